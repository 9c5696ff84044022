//! Divided differences, k-monotonicity, coconvexity and shape-constrained
//! splines.

mod spline;

pub use spline::{spline_project, PiecewisePoly, SplineFit, SplineOptions};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fnspace::{FnSpaceError, PartitionSet, RealFunction};
use crate::quad::QuadError;

pub const MONOTONE_TOL: f64 = 1e-10;
pub const COCONVEX_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("points {0} and {1} are closer than 1e-9")]
    CoincidentPoints(f64, f64),
    #[error("grid has {have} points, need at least {need}")]
    GridTooSmall { have: usize, need: usize },
    #[error("invalid spline order {0}; need at least 2")]
    InvalidOrder(usize),
    #[error("constraint set infeasible; worst sample violations: {0:?}")]
    Infeasible(Vec<(f64, f64)>),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Partition(#[from] FnSpaceError),
}

/// Shape class imposed on a fit.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeConstraint {
    None,
    Convex,
    /// `f'' · Π (x - y_i) >= 0` for the inflection set `Y`.
    Coconvex(PartitionSet),
    KMonotone(usize),
}

impl ShapeConstraint {
    pub fn name(&self) -> String {
        match self {
            ShapeConstraint::None => "none".into(),
            ShapeConstraint::Convex => "convex".into(),
            ShapeConstraint::Coconvex(y) => format!("coconvex(s={})", y.inflection_points().len()),
            ShapeConstraint::KMonotone(k) => format!("{k}-monotone"),
        }
    }
}

/// `Π_i (x - y_i)` over the inflection points.
pub fn inflection_sign(y: &PartitionSet, x: f64) -> f64 {
    y.inflection_points().iter().map(|yi| x - yi).product()
}

fn check_distinct(xs: &[f64]) -> Result<(), ShapeError> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in v.windows(2) {
        if w[1] - w[0] <= 1e-9 {
            return Err(ShapeError::CoincidentPoints(w[0], w[1]));
        }
    }
    Ok(())
}

/// `f[x_0, ..., x_k]` by the Newton recursion.
pub fn divided_difference(f: &dyn Fn(f64) -> f64, xs: &[f64]) -> Result<f64, ShapeError> {
    check_distinct(xs)?;
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    Ok(divided_difference_values(xs, &vals))
}

fn divided_difference_values(xs: &[f64], vals: &[f64]) -> f64 {
    let mut d = vals.to_vec();
    let k = xs.len() - 1;
    for j in 1..=k {
        for i in (j..=k).rev() {
            d[i] = (d[i] - d[i - 1]) / (xs[i] - xs[i - j]);
        }
    }
    d[k]
}

/// `Σ_j f(x_j) / Π_{i≠j} (x_j - x_i)`.
pub fn divided_difference_explicit(f: &dyn Fn(f64) -> f64, xs: &[f64]) -> Result<f64, ShapeError> {
    check_distinct(xs)?;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            let denom: f64 = xs.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, &xi)| xj - xi).product();
            f(xj) / denom
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    pub holds: bool,
    pub worst: f64,
}

/// Checks `f[x_{i_0}, ..., x_{i_k}] >= -1e-10` over all consecutive windows of
/// the grid and `windows` seeded random `(k+1)`-subsets.
pub fn is_k_monotone(f: &dyn Fn(f64) -> f64, k: usize, grid: &[f64], windows: usize, seed: u64) -> Result<MonotoneReport, ShapeError> {
    if k == 0 {
        return Err(ShapeError::GridTooSmall { have: grid.len(), need: 1 });
    }
    if grid.len() < k + 1 {
        return Err(ShapeError::GridTooSmall { have: grid.len(), need: k + 1 });
    }
    let mut xs: Vec<f64> = grid.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    check_distinct(&xs)?;
    let vals: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut worst = f64::INFINITY;
    for i in 0..xs.len() - k {
        worst = worst.min(divided_difference_values(&xs[i..=i + k], &vals[i..=i + k]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut px = vec![0.0; k + 1];
    let mut pv = vec![0.0; k + 1];
    for _ in 0..windows {
        let mut idx = sample(&mut rng, xs.len(), k + 1).into_vec();
        idx.sort_unstable();
        for (slot, &i) in idx.iter().enumerate() {
            px[slot] = xs[i];
            pv[slot] = vals[i];
        }
        worst = worst.min(divided_difference_values(&px, &pv));
    }
    Ok(MonotoneReport { holds: worst >= -MONOTONE_TOL, worst })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoconvexityReport {
    pub holds: bool,
    pub worst: f64,
    /// `(x, f''(x) Π(x - y_i))` at violating grid points.
    pub violations: Vec<(f64, f64)>,
}

/// Sign test `f''(x) Π(x - y_i) >= -1e-9` on the grid; functions without a
/// second derivative are tested through second divided differences.
pub fn coconvexity_check(f: &dyn RealFunction, y: &PartitionSet, grid: &[f64]) -> CoconvexityReport {
    let smooth = f.smoothness().is_none_or(|s| s >= 2);
    let f2 = smooth.then(|| f.derived(2));
    let spacing = {
        let mut g = grid.to_vec();
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        g.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(1e-3f64, f64::min)
    };
    let mut worst = f64::INFINITY;
    let mut violations = Vec::new();
    for &x in grid {
        let second = match &f2 {
            Some(g) => g.value(x),
            None => {
                let d = (spacing / 2.0).min(1.0 - x.abs()).max(1e-6);
                let a = (x - d).max(-1.0);
                let b = (x + d).min(1.0);
                let m = 0.5 * (a + b);
                2.0 * divided_difference_values(&[a, m, b], &[f.value(a), f.value(m), f.value(b)])
            }
        };
        let v = second * inflection_sign(y, x);
        worst = worst.min(v);
        if v < -COCONVEX_TOL {
            violations.push((x, v));
        }
    }
    CoconvexityReport { holds: violations.is_empty(), worst, violations }
}

/// `n + 1` equispaced points on `[-1, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|j| -1.0 + 2.0 * j as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fnspace::FunctionExpr;
    use proptest::prelude::*;

    #[test]
    fn divided_difference_examples() {
        let sq = |x: f64| x * x;
        assert!((divided_difference(&sq, &[-1.0, 0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        let c = |_: f64| 3.0;
        assert_eq!(divided_difference(&c, &[0.1, 0.5, 0.7]).unwrap(), 0.0);
        assert!(matches!(divided_difference(&sq, &[0.1, 0.1 + 1e-12, 0.5]), Err(ShapeError::CoincidentPoints(..))));
    }

    #[test]
    fn k_monotone_examples() {
        let g = uniform_grid(200);
        assert!(is_k_monotone(&|x: f64| x * x, 2, &g, 200, 1).unwrap().holds);
        let r = is_k_monotone(&|x: f64| -x * x, 2, &g, 200, 1).unwrap();
        assert!(!r.holds);
        assert!((r.worst + 1.0).abs() < 1e-9);
        for k in 1..=3 {
            assert!(is_k_monotone(&f64::exp, k, &g, 200, 7).unwrap().holds);
        }
        assert!(is_k_monotone(&f64::exp, 3, &[0.0, 0.5], 1, 0).is_err());
    }

    #[test]
    fn coconvexity_examples() {
        let grid = uniform_grid(400);
        let x3 = FunctionExpr::monomial(3);
        let y0 = PartitionSet::inflection(vec![0.0]).unwrap();
        assert!(coconvexity_check(&x3, &y0, &grid).holds);
        let empty = PartitionSet::inflection(vec![]).unwrap();
        assert!(coconvexity_check(&FunctionExpr::monomial(2), &empty, &grid).holds);
        let y5 = PartitionSet::inflection(vec![0.5]).unwrap();
        let r = coconvexity_check(&x3, &y5, &grid);
        assert!(!r.holds);
        assert!(r.violations.iter().all(|(x, _)| *x > 0.0 && *x < 0.5));
        // |x| has no second derivative; divided differences still see convexity.
        assert!(coconvexity_check(&FunctionExpr::abs_pow(0.0, 1.0), &empty, &grid).holds);
    }

    #[test]
    fn convexity_agrees_with_two_monotonicity() {
        let grid = uniform_grid(300);
        let empty = PartitionSet::inflection(vec![]).unwrap();
        for f in [FunctionExpr::exp(1.0), FunctionExpr::monomial(3), FunctionExpr::abs_pow(0.2, 3.5), FunctionExpr::poly(&[0.0, 1.0, -0.5])] {
            let a = coconvexity_check(&f, &empty, &grid).holds;
            let b = is_k_monotone(&|x| f.eval(x), 2, &grid, 300, 3).unwrap().holds;
            assert_eq!(a, b, "{f}");
        }
    }

    proptest! {
        #[test]
        fn newton_matches_explicit_and_is_symmetric(mut xs in proptest::collection::vec(-1.0f64..1.0, 2..7), seed in 0u64..1000) {
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assume!(xs.windows(2).all(|w| w[1] - w[0] > 0.1));
            let k = xs.len() - 1;
            let f = |x: f64| (1.3 * x).exp() + x.powi(k as i32);
            let a = divided_difference(&f, &xs).unwrap();
            let b = divided_difference_explicit(&f, &xs).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            let mut perm = xs.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let c = divided_difference(&f, &perm).unwrap();
            prop_assert!((a - c).abs() <= 1e-12 * (1.0 + a.abs()));
            let monic = |x: f64| x.powi(k as i32) + 0.5 * x;
            let m = divided_difference(&monic, &xs).unwrap();
            if k >= 2 {
                prop_assert!((m - 1.0).abs() <= 1e-9);
            }
            let low = |x: f64| if k >= 1 { x.powi(k as i32 - 1) } else { 0.0 };
            prop_assert!(divided_difference(&low, &xs).unwrap().abs() <= 1e-10);
        }
    }
}
