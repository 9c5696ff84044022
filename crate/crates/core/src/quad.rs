//! Weighted `L_p` quasi-norms on `[-1, 1]` and its subintervals.
//!
//! Integrals are taken in the variable `θ` with `x = -cos θ`, so the Jacobian
//! `sin θ` damps endpoint singularities of the weight, and composite
//! Gauss–Legendre panels are laid out uniformly in `θ`. The sup norm is a
//! dense `θ`-sample followed by a golden-section polish around the best sample.

use std::sync::OnceLock;

use thiserror::Error;

use crate::fnspace::{FnSpaceError, JacobiWeight};

pub const DEFAULT_PANELS: usize = 256;
pub const MIN_PANELS: usize = 64;
pub const DEFAULT_SUP_SAMPLES: usize = 4096;
pub const NODES_PER_PANEL: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error(transparent)]
    Weight(#[from] FnSpaceError),
    #[error("non-finite integrand value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },
    #[error("empty integration interval [{0}, {1}]")]
    EmptyInterval(f64, f64),
    #[error("interval [{0}, {1}] is not inside [-1, 1]")]
    OutsideDomain(f64, f64),
    #[error("quasi-norm power requested for p = inf")]
    SupPower,
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `n`-point Gauss–Legendre rule by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> GaussLegendre {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    GaussLegendre { nodes, weights }
}

fn default_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(NODES_PER_PANEL))
}

/// `θ = arccos(-x)`.
#[inline]
pub fn theta_of(x: f64) -> f64 {
    (-x).clamp(-1.0, 1.0).acos()
}

const GRADING_LEVELS: usize = 24;
const GRADING_RATIO: f64 = 0.2;

/// Panel endpoints in `θ`; a panel touching `θ = 0` or `θ = π` is split
/// geometrically so Jacobi endpoint singularities are integrated accurately.
fn theta_panels(ta: f64, tb: f64, panels: usize) -> Vec<(f64, f64)> {
    let width = (tb - ta) / panels as f64;
    let mut out = Vec::with_capacity(panels + 2 * GRADING_LEVELS);
    for j in 0..panels {
        let lo = ta + j as f64 * width;
        let hi = if j + 1 == panels { tb } else { ta + (j + 1) as f64 * width };
        let at_left = j == 0 && ta == 0.0;
        let at_right = j + 1 == panels && tb == std::f64::consts::PI;
        if at_left || at_right {
            let mut cuts = Vec::with_capacity(GRADING_LEVELS + 2);
            let mut s = 1.0;
            for _ in 0..GRADING_LEVELS {
                s *= GRADING_RATIO;
                cuts.push(s);
            }
            cuts.push(0.0);
            cuts.reverse();
            cuts.push(1.0);
            for c in cuts.windows(2) {
                if at_left {
                    out.push((lo + c[0] * (hi - lo), lo + c[1] * (hi - lo)));
                } else {
                    out.push((hi - c[1] * (hi - lo), hi - c[0] * (hi - lo)));
                }
            }
        } else {
            out.push((lo, hi));
        }
    }
    out
}

/// Quadrature nodes `(x, θ, weight)` for `∫_a^b g(x) dx`, including the Jacobian.
pub fn theta_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64, f64)> {
    let rule = default_rule();
    let (ta, tb) = (theta_of(a), theta_of(b));
    let mut out = Vec::with_capacity((panels + 2 * GRADING_LEVELS) * rule.nodes.len());
    for (lo, hi) in theta_panels(ta, tb, panels) {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        for (u, w) in rule.nodes.iter().zip(&rule.weights) {
            let th = mid + half * u;
            out.push((-th.cos(), th, half * w * th.sin()));
        }
    }
    out
}

/// A weighted norm request `‖w g‖_{L_p[a, b]}`.
pub struct NormQuery<'a> {
    pub integrand: &'a (dyn Fn(f64) -> f64 + Sync),
    pub weight: JacobiWeight,
    pub p: f64,
    pub interval: (f64, f64),
    pub panels: usize,
    pub sup_samples: usize,
}

impl<'a> NormQuery<'a> {
    pub fn new(integrand: &'a (dyn Fn(f64) -> f64 + Sync), p: f64) -> Self {
        NormQuery { integrand, weight: JacobiWeight::unit(), p, interval: (-1.0, 1.0), panels: DEFAULT_PANELS, sup_samples: DEFAULT_SUP_SAMPLES }
    }

    pub fn weight(mut self, w: JacobiWeight) -> Self {
        self.weight = w;
        self
    }

    pub fn interval(mut self, a: f64, b: f64) -> Self {
        self.interval = (a, b);
        self
    }

    pub fn panels(mut self, panels: usize) -> Self {
        self.panels = panels.max(MIN_PANELS);
        self
    }

    pub fn sup_samples(mut self, n: usize) -> Self {
        self.sup_samples = n.max(16);
        self
    }

    fn validate(&self) -> Result<(), QuadError> {
        self.weight.check(self.p)?;
        let (a, b) = self.interval;
        if !(a >= -1.0 && b <= 1.0) {
            return Err(QuadError::OutsideDomain(a, b));
        }
        if !(a < b) {
            return Err(QuadError::EmptyInterval(a, b));
        }
        Ok(())
    }

    /// `∫ |w g|^p` (no root). Errors for `p = ∞`.
    pub fn power(&self) -> Result<f64, QuadError> {
        self.validate()?;
        if self.p.is_infinite() {
            return Err(QuadError::SupPower);
        }
        let (a, b) = self.interval;
        let mut acc = 0.0;
        for (x, th, q) in theta_nodes(a, b, self.panels) {
            let v = self.weight.eval_theta(th) * (self.integrand)(x);
            if !v.is_finite() {
                return Err(QuadError::NonFinite { x, value: v });
            }
            if v != 0.0 {
                acc += q * v.abs().powf(self.p);
            }
        }
        Ok(acc)
    }

    pub fn norm(&self) -> Result<f64, QuadError> {
        if self.p.is_infinite() {
            self.validate()?;
            let (a, b) = self.interval;
            let w = self.weight;
            let g = self.integrand;
            sup_abs(&|th: f64| w.eval_theta(th) * g(-th.cos()), theta_of(a), theta_of(b), self.sup_samples)
        } else {
            Ok(self.power()?.powf(1.0 / self.p))
        }
    }

    /// Norm plus the value at doubled resolution when the weight has a negative
    /// exponent, so callers can see how settled the endpoint singularity is.
    pub fn norm_with_refinement(&self) -> Result<(f64, Option<f64>), QuadError> {
        let v = self.norm()?;
        if self.weight.alpha < 0.0 || self.weight.beta < 0.0 {
            let fine = NormQuery { panels: self.panels * 2, ..*self };
            Ok((v, Some(fine.norm()?)))
        } else {
            Ok((v, None))
        }
    }
}

/// `max |g(θ)|` over `[ta, tb]`: `samples` equispaced values plus a golden
/// section polish around the largest one.
pub fn sup_abs(g: &dyn Fn(f64) -> f64, ta: f64, tb: f64, samples: usize) -> Result<f64, QuadError> {
    let n = samples.max(2);
    let step = (tb - ta) / n as f64;
    let mut best = 0.0;
    let mut arg = 0usize;
    for j in 0..=n {
        let th = if j == n { tb } else { ta + j as f64 * step };
        let v = g(th);
        if !v.is_finite() {
            return Err(QuadError::NonFinite { x: -th.cos(), value: v });
        }
        if v.abs() > best {
            best = v.abs();
            arg = j;
        }
    }
    if step == 0.0 {
        return Ok(best);
    }
    let lo = ta + arg.saturating_sub(1) as f64 * step;
    let hi = (ta + (arg + 1) as f64 * step).min(tb);
    let f = |th: f64| {
        let v = g(th).abs();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    Ok(best.max(golden_max(&f, lo, hi, 60)))
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
pub fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = fc.max(fd);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        best = best.max(fc).max(fd);
    }
    best
}

/// `‖w g‖_{L_p[-1,1]}`.
pub fn weighted_norm(g: &(dyn Fn(f64) -> f64 + Sync), w: JacobiWeight, p: f64, panels: usize) -> Result<f64, QuadError> {
    NormQuery::new(g, p).weight(w).panels(panels).norm()
}

/// `∫ |w g|^p` over `[-1, 1]`.
pub fn quasi_norm_power(g: &(dyn Fn(f64) -> f64 + Sync), w: JacobiWeight, p: f64, panels: usize) -> Result<f64, QuadError> {
    NormQuery::new(g, p).weight(w).panels(panels).power()
}

/// Signed `∫_a^b g(x) dx`.
pub fn integrate(g: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    theta_nodes(a, b, panels).into_iter().map(|(x, _, q)| q * g(x)).sum()
}
