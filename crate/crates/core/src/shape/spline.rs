use nalgebra::{DMatrix, DVector};

use super::{inflection_sign, ShapeConstraint, ShapeError};
use crate::cheb;
use crate::fnspace::{JacobiWeight, PartitionSet, RealFunction};
use crate::optim::Qp;
use crate::quad::{gauss_legendre, NormQuery};

/// Piecewise polynomial on a partition; each piece is a Chebyshev series in
/// the local variable `t ∈ [-1, 1]`. At an interior knot, values and
/// derivatives come from the piece on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    pieces: Vec<Vec<f64>>,
    continuity: Option<usize>,
}

impl PiecewisePoly {
    pub fn new(breaks: Vec<f64>, pieces: Vec<Vec<f64>>, continuity: Option<usize>) -> Self {
        assert_eq!(breaks.len(), pieces.len() + 1, "interval count must match the partition");
        PiecewisePoly { breaks, pieces, continuity }
    }

    /// A single polynomial on `[-1, 1]` from monomial coefficients.
    pub fn from_monomial(coeffs: &[f64]) -> Self {
        PiecewisePoly::new(vec![-1.0, 1.0], vec![cheb::from_monomial(coeffs)], None)
    }

    /// Restriction of a global polynomial to every cell of `part`.
    pub fn from_polynomial_on(coeffs: &[f64], part: &PartitionSet) -> Self {
        let breaks = part.breakpoints();
        let global = cheb::from_monomial(coeffs);
        let order = global.len();
        let pieces = breaks
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                // Interpolate at Chebyshev points of the local variable.
                let ts = cheb::first_kind(order);
                let vals: Vec<f64> = ts.iter().map(|t| cheb::eval(&global, 0.5 * (a + b) + 0.5 * (b - a) * t)).collect();
                interpolate_cheb(&ts, &vals)
            })
            .collect();
        PiecewisePoly::new(breaks, pieces, Some(usize::MAX))
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn continuity(&self) -> Option<usize> {
        self.continuity
    }

    fn locate(&self, x: f64) -> usize {
        let n = self.pieces.len();
        match self.breaks[1..n].binary_search_by(|b| b.partial_cmp(&x).unwrap()) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }

    /// Value of piece `j` at `x` (no knot convention).
    pub fn eval_piece(&self, j: usize, x: f64) -> f64 {
        let (a, b) = (self.breaks[j], self.breaks[j + 1]);
        cheb::eval(&self.pieces[j], (2.0 * x - a - b) / (b - a))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_piece(self.locate(x), x)
    }

    pub fn derivative(&self, order: usize) -> PiecewisePoly {
        let pieces = self
            .pieces
            .iter()
            .zip(self.breaks.windows(2))
            .map(|(c, w)| {
                let s = (2.0 / (w[1] - w[0])).powi(order as i32);
                cheb::derivative_n(c, order).into_iter().map(|v| v * s).collect()
            })
            .collect();
        let continuity = self.continuity.and_then(|m| m.checked_sub(order));
        PiecewisePoly { breaks: self.breaks.clone(), pieces, continuity }
    }

    /// Largest jump `|s(t_j+) - s(t_j-)|` over interior knots.
    pub fn max_knot_jump(&self) -> f64 {
        (1..self.pieces.len()).map(|j| (self.eval_piece(j, self.breaks[j]) - self.eval_piece(j - 1, self.breaks[j])).abs()).fold(0.0, f64::max)
    }
}

fn interpolate_cheb(ts: &[f64], vals: &[f64]) -> Vec<f64> {
    let n = ts.len();
    let m = DMatrix::from_fn(n, n, |i, j| cheb::basis_derivatives(n - 1, 0, ts[i])[j]);
    let v = DVector::from_column_slice(vals);
    m.lu().solve(&v).map(|c| c.iter().copied().collect()).unwrap_or_else(|| vec![0.0; n])
}

impl RealFunction for PiecewisePoly {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn derived(&self, order: usize) -> Box<dyn RealFunction> {
        Box::new(self.derivative(order))
    }

    /// Derivatives of every order exist piecewise.
    fn smoothness(&self) -> Option<usize> {
        None
    }

    fn label(&self) -> String {
        format!("spline({} pieces)", self.pieces.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineOptions {
    pub weight: JacobiWeight,
    pub p: f64,
    /// Derivative order of the reported error.
    pub r: usize,
    /// Continuity class `C^m` imposed at interior knots.
    pub continuity: usize,
    pub samples_per_piece: usize,
    pub panels: usize,
    pub max_iter: usize,
}

impl Default for SplineOptions {
    fn default() -> Self {
        SplineOptions { weight: JacobiWeight::unit(), p: 2.0, r: 0, continuity: 0, samples_per_piece: 16, panels: 64, max_iter: 5000 }
    }
}

#[derive(Debug, Clone)]
pub struct SplineFit {
    pub spline: PiecewisePoly,
    /// `‖f^(r) - s^(r)‖_{w,p}`.
    pub error: f64,
    /// Largest constraint violation on a grid four times finer than the constraint grid.
    pub max_violation: f64,
    pub converged: bool,
}

struct Layout {
    breaks: Vec<f64>,
    order: usize,
}

impl Layout {
    fn pieces(&self) -> usize {
        self.breaks.len() - 1
    }

    fn nvars(&self) -> usize {
        self.pieces() * self.order
    }

    /// Row of `s^(nu)` evaluated on piece `j` at `x`.
    fn row(&self, j: usize, nu: usize, x: f64) -> Vec<(usize, f64)> {
        let (a, b) = (self.breaks[j], self.breaks[j + 1]);
        let t = ((2.0 * x - a - b) / (b - a)).clamp(-1.0, 1.0);
        let s = (2.0 / (b - a)).powi(nu as i32);
        cheb::basis_derivatives(self.order - 1, nu, t).into_iter().enumerate().map(|(i, v)| (j * self.order + i, v * s)).collect()
    }
}

fn push_row(rows: &mut Vec<Vec<f64>>, n: usize, entries: &[(usize, f64)], normalise: bool) {
    let mut r = vec![0.0; n];
    for &(i, v) in entries {
        r[i] += v;
    }
    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    if normalise {
        r.iter_mut().for_each(|v| *v /= norm);
    }
    rows.push(r);
}

fn to_matrix(rows: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j])
}

/// Points `a + (b - a) q / (m - 1)`, `q = 0..m`.
fn piece_samples(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..m).map(|q| a + (b - a) * q as f64 / (m - 1) as f64).collect()
}

/// Least-squares spline fit with continuity and shape constraints.
///
/// The fit minimises `Σ w² (f - s)²` on Gauss–Legendre nodes inside every
/// cell; shape conditions are imposed at `samples_per_piece` points per cell
/// (ends included) and, where the continuity class allows a jump, as a sign
/// condition on the jump at each knot.
pub fn spline_project(
    f: &dyn RealFunction,
    part: &PartitionSet,
    order: usize,
    constraint: &ShapeConstraint,
    opts: &SplineOptions,
) -> Result<SplineFit, ShapeError> {
    if order < 2 {
        return Err(ShapeError::InvalidOrder(order));
    }
    opts.weight.check(opts.p)?;
    let breaks = part.breakpoints();
    let lay = Layout { breaks: breaks.clone(), order };
    let n = lay.nvars();
    let continuity = match constraint {
        ShapeConstraint::KMonotone(k) if *k >= 2 => opts.continuity.max(k - 2),
        _ => opts.continuity,
    }
    .min(order - 1);

    // Objective.
    let gl = gauss_legendre(8);
    let sub = 4;
    let mut a_rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs = Vec::new();
    for j in 0..lay.pieces() {
        let (a, b) = (breaks[j], breaks[j + 1]);
        for s in 0..sub {
            let lo = a + (b - a) * s as f64 / sub as f64;
            let hi = a + (b - a) * (s + 1) as f64 / sub as f64;
            for (u, wq) in gl.nodes.iter().zip(&gl.weights) {
                let x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * u;
                let scale = (0.5 * (hi - lo) * wq).sqrt() * opts.weight.eval(x);
                a_rows.push(lay.row(j, 0, x).into_iter().map(|(i, v)| (i, v * scale)).collect());
                rhs.push(f.value(x) * scale);
            }
        }
    }
    let mut amat = DMatrix::zeros(a_rows.len(), n);
    for (r, row) in a_rows.iter().enumerate() {
        for &(i, v) in row {
            amat[(r, i)] = v;
        }
    }
    let y = DVector::from_vec(rhs);
    let h = amat.transpose() * &amat;
    let g = -(amat.transpose() * &y);

    // Continuity.
    let mut eq = Vec::new();
    for j in 1..lay.pieces() {
        let x = breaks[j];
        for nu in 0..=continuity {
            let mut e = lay.row(j - 1, nu, x);
            e.extend(lay.row(j, nu, x).into_iter().map(|(i, v)| (i, -v)));
            push_row(&mut eq, n, &e, true);
        }
    }

    // Shape rows `G c >= 0`, plus the validation rows on a 4x finer grid.
    let shape_rows = |samples: usize| -> Vec<Vec<f64>> {
        let mut rows = Vec::new();
        let (nu, jump_nu): (usize, Option<usize>) = match constraint {
            ShapeConstraint::None => return rows,
            ShapeConstraint::Convex | ShapeConstraint::Coconvex(_) => (2, (continuity < 1).then_some(1)),
            ShapeConstraint::KMonotone(k) => (*k, (continuity < k - 1).then(|| k - 1)),
        };
        let sign = |x: f64| match constraint {
            ShapeConstraint::Coconvex(y) => inflection_sign(y, x),
            _ => 1.0,
        };
        for j in 0..lay.pieces() {
            if nu < order {
                for x in piece_samples(breaks[j], breaks[j + 1], samples) {
                    let s = sign(x);
                    let e: Vec<(usize, f64)> = lay.row(j, nu, x).into_iter().map(|(i, v)| (i, v * s)).collect();
                    push_row(&mut rows, n, &e, true);
                }
            }
            if let Some(m) = jump_nu {
                if j >= 1 {
                    let x = breaks[j];
                    let s = sign(x);
                    let mut e: Vec<(usize, f64)> = lay.row(j, m, x).into_iter().map(|(i, v)| (i, v * s)).collect();
                    e.extend(lay.row(j - 1, m, x).into_iter().map(|(i, v)| (i, -v * s)));
                    push_row(&mut rows, n, &e, true);
                }
            }
        }
        rows
    };
    let ineq = shape_rows(opts.samples_per_piece.max(2));
    let validate = shape_rows(4 * opts.samples_per_piece.max(2));

    let qp = Qp { h, g, eq: to_matrix(&eq, n), eq_rhs: DVector::zeros(eq.len()), ineq: to_matrix(&ineq, n), ineq_rhs: DVector::zeros(ineq.len()) };
    let free = qp.solve_equality().ok_or_else(|| ShapeError::Infeasible(Vec::new()))?;
    let (coeffs, converged) = if qp.max_violation(&free) <= 1e-12 * (1.0 + free.amax()) {
        (free, true)
    } else {
        let sol = qp.solve_from(DVector::zeros(n), opts.max_iter);
        (sol.x, sol.converged)
    };

    let pieces: Vec<Vec<f64>> = (0..lay.pieces()).map(|j| coeffs.rows(j * order, order).iter().copied().collect()).collect();
    let spline = PiecewisePoly::new(breaks.clone(), pieces, Some(continuity));

    let vmat = to_matrix(&validate, n);
    let max_violation = if validate.is_empty() { 0.0 } else { (&vmat * &coeffs).iter().fold(0.0f64, |m, v| m.max(-v)) };
    if !converged && max_violation > 1e-6 {
        let worst: Vec<(f64, f64)> =
            validate.iter().zip((&vmat * &coeffs).iter()).enumerate().filter(|(_, (_, v))| **v < -1e-6).take(8).map(|(i, (_, v))| (i as f64, *v)).collect();
        return Err(ShapeError::Infeasible(worst));
    }

    let error = spline_error(f, &spline, opts)?;
    Ok(SplineFit { spline, error, max_violation, converged })
}

/// `‖f^(r) - s^(r)‖_{w,p}` assembled cell by cell so knots never fall inside a panel.
pub fn spline_error(f: &dyn RealFunction, s: &PiecewisePoly, opts: &SplineOptions) -> Result<f64, ShapeError> {
    let fr = f.derived(opts.r);
    let sr = s.derivative(opts.r);
    let mut acc: f64 = 0.0;
    for j in 0..sr.pieces.len() {
        let (a, b) = (sr.breaks[j], sr.breaks[j + 1]);
        let diff = |x: f64| fr.value(x) - sr.eval_piece(j, x);
        let q = NormQuery::new(&diff, opts.p).weight(opts.weight).interval(a, b).panels(opts.panels);
        if opts.p.is_infinite() {
            acc = acc.max(q.norm()?);
        } else {
            acc += q.power()?;
        }
    }
    Ok(if opts.p.is_infinite() { acc } else { acc.powf(1.0 / opts.p) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fnspace::{chebyshev_partition, FunctionExpr};
    use crate::shape::{coconvexity_check, is_k_monotone};

    #[test]
    fn derivative_and_continuity_of_restricted_polynomial() {
        let part = chebyshev_partition(5).unwrap();
        let c = [0.5, -1.0, 2.0, 0.3];
        let s = PiecewisePoly::from_polynomial_on(&c, &part);
        assert!(s.max_knot_jump() < 1e-10);
        let f = FunctionExpr::poly(&c);
        for j in 0..41 {
            let x = -1.0 + 0.05 * j as f64;
            assert!((s.eval(x) - f.eval(x)).abs() < 1e-12);
            assert!((s.derivative(2).eval(x) - f.eval_derivative(2, x)).abs() < 1e-10);
        }
    }

    #[test]
    fn feasible_spline_is_reproduced() {
        // x^3 on T_2 with order 4 is itself a coconvex spline for Y = {0}.
        let part = chebyshev_partition(2).unwrap();
        let y = PartitionSet::inflection(vec![0.0]).unwrap();
        let f = FunctionExpr::monomial(3);
        let fit = spline_project(&f, &part, 4, &ShapeConstraint::Coconvex(y), &SplineOptions::default()).unwrap();
        assert!(fit.error <= 1e-8, "{}", fit.error);
        let conv =
            spline_project(&FunctionExpr::monomial(2), &chebyshev_partition(4).unwrap(), 3, &ShapeConstraint::Convex, &SplineOptions::default()).unwrap();
        assert!(conv.error <= 1e-8);
    }

    #[test]
    fn convex_fit_of_exp_beats_constant() {
        let part = chebyshev_partition(4).unwrap();
        let f = FunctionExpr::exp(1.0);
        let fit = spline_project(&f, &part, 3, &ShapeConstraint::Convex, &SplineOptions::default()).unwrap();
        // Best constant in L2 is the mean.
        let mean = (1f64.exp() - (-1f64).exp()) / 2.0;
        let g = |x: f64| x.exp() - mean;
        let constant = NormQuery::new(&g, 2.0).norm().unwrap();
        assert!(fit.error < constant);
        let grid: Vec<f64> = (0..=256).map(|j| -1.0 + 2.0 * j as f64 / 256.0).collect();
        assert!(is_k_monotone(&|x| fit.spline.eval(x), 2, &grid, 100, 1).unwrap().worst >= -1e-6);
    }

    #[test]
    fn constrained_fit_of_nonconvex_target_respects_constraint() {
        let part = chebyshev_partition(6).unwrap();
        let f = FunctionExpr::poly(&[0.0, 0.0, 1.0, 0.0, -2.0]);
        let fit = spline_project(&f, &part, 3, &ShapeConstraint::Convex, &SplineOptions::default()).unwrap();
        assert!(fit.max_violation <= 1e-6, "{}", fit.max_violation);
        let y = PartitionSet::inflection(vec![0.3]).unwrap();
        let g = FunctionExpr::Sum(vec![FunctionExpr::monomial(3), FunctionExpr::poly(&[0.0, 0.0, -0.9])]);
        let fit = spline_project(&g, &part, 4, &ShapeConstraint::Coconvex(y.clone()), &SplineOptions::default()).unwrap();
        let grid: Vec<f64> = (0..=400).map(|j| -1.0 + 2.0 * j as f64 / 400.0 + 1e-7).filter(|x: &f64| x.abs() < 1.0).collect();
        let rep = coconvexity_check(&fit.spline, &y, &grid);
        assert!(rep.worst >= -1e-6, "{}", rep.worst);
        let mono = spline_project(&f, &part, 4, &ShapeConstraint::KMonotone(3), &SplineOptions::default()).unwrap();
        assert!(mono.max_violation <= 1e-6);
    }

    #[test]
    fn error_decreases_under_refinement() {
        let f = FunctionExpr::exp(1.0);
        for c in [ShapeConstraint::None, ShapeConstraint::Convex] {
            let mut prev = f64::INFINITY;
            for eta in [2, 4, 8, 16] {
                let fit = spline_project(&f, &chebyshev_partition(eta).unwrap(), 3, &c, &SplineOptions::default()).unwrap();
                assert!(fit.error <= prev * (1.0 + 1e-9), "{c:?} eta={eta}");
                prev = fit.error;
            }
        }
    }
}
