//! Symmetric differences and moduli of smoothness.
//!
//! Every variant is `sup_{h ∈ grid} ‖integrand_h‖` where the h-grid is
//! `t · 10^{-3j/n}` for `j = 0..=n` and the norm comes from [`crate::quad`].
//! Difference cutoffs are resolved in closed form, so the norm is taken over
//! the exact interval where all difference nodes stay in the domain and the
//! integrand has no jumps.

use thiserror::Error;

use crate::fnspace::{binomial, phi, symmetric_difference, FnSpaceError, JacobiWeight, RealFunction};
use crate::quad::{NormQuery, QuadError, DEFAULT_PANELS, DEFAULT_SUP_SAMPLES};
use crate::stieltjes::{difference_via_iterated_integral as ls_difference, LsError};

pub const DEFAULT_HGRID: usize = 40;
pub const DEFAULT_KERNEL_DEPTH: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModulusError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Weight(#[from] FnSpaceError),
    #[error("smoothness deficit: need {needed} derivatives, function has {available}")]
    Smoothness { needed: usize, available: usize },
    #[error("step bound violated: t = {t} must be < 2/{k}")]
    StepBound { t: f64, k: usize },
    #[error("empty restricted domain: A t^2 = {0} >= 1")]
    EmptyRestrictedDomain(f64),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Stieltjes(#[from] LsError),
}

impl ModulusError {
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            ModulusError::Weight(FnSpaceError::InadmissibleExponent { .. })
                | ModulusError::Smoothness { .. }
                | ModulusError::StepBound { .. }
                | ModulusError::EmptyRestrictedDomain(_)
                | ModulusError::Quad(QuadError::Weight(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `ω_k(f, t)`: constant step, weight `w`.
    Classical,
    /// `ω^φ_{k,r}`: unweighted, `φ^r Δ_{hφ}^k f^(r)`.
    Dt,
    /// Weighted DT modulus: `w φ^r Δ_{hφ}^k f^(r)`, with `t < 2/k`.
    WeightedDt,
    /// Main part `Ψ`: same integrand as `WeightedDt` without the step bound.
    MainPart,
    /// `Ω`: `Ψ` restricted to `[-1 + A h², 1 - A h²]`.
    Restricted,
    /// `w 𝒲_{kh}^r Δ_{hφ}^k f^(r)`.
    Kls,
}

impl Variant {
    pub const ALL: [Variant; 6] = [Variant::Classical, Variant::Dt, Variant::WeightedDt, Variant::MainPart, Variant::Restricted, Variant::Kls];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Classical => "classical",
            Variant::Dt => "dt",
            Variant::WeightedDt => "weighted-dt",
            Variant::MainPart => "psi",
            Variant::Restricted => "omega",
            Variant::Kls => "kls",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == s.to_ascii_lowercase())
    }

    fn phi_step(&self) -> bool {
        !matches!(self, Variant::Classical)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// Binomial symmetric difference.
    Difference,
    /// `k`-fold iterated integral of `f^(k)` over the step window.
    Stieltjes,
}

impl Kernel {
    pub fn parse(s: &str) -> Option<Kernel> {
        match s.to_ascii_lowercase().as_str() {
            "difference" | "classical" | "classical-difference" => Some(Kernel::Difference),
            "stieltjes" | "stieltjes-difference" => Some(Kernel::Stieltjes),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Difference => "difference",
            Kernel::Stieltjes => "stieltjes",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulusQuery {
    pub variant: Variant,
    pub k: usize,
    pub r: usize,
    pub t: f64,
    pub weight: JacobiWeight,
    pub p: f64,
    /// `A` in the restricted domain.
    pub a: f64,
    pub kernel: Kernel,
    pub hgrid: usize,
    pub xgrid: usize,
    pub panels: usize,
    pub kernel_depth: u32,
    /// When false, `f` is used as given and only the `φ^r` factor is applied.
    pub differentiate: bool,
    /// Norm taken over this subinterval instead of the whole domain.
    pub region: Option<(f64, f64)>,
}

impl ModulusQuery {
    pub fn new(variant: Variant, k: usize, r: usize, t: f64) -> Self {
        ModulusQuery {
            variant,
            k,
            r,
            t,
            weight: JacobiWeight::unit(),
            p: f64::INFINITY,
            a: 1.0,
            kernel: Kernel::Difference,
            hgrid: DEFAULT_HGRID,
            xgrid: DEFAULT_SUP_SAMPLES,
            panels: DEFAULT_PANELS,
            kernel_depth: DEFAULT_KERNEL_DEPTH,
            differentiate: true,
            region: None,
        }
    }

    pub fn weight(mut self, w: JacobiWeight) -> Self {
        self.weight = w;
        self
    }

    pub fn p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn a(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn region(mut self, a: f64, b: f64) -> Self {
        self.region = Some((a, b));
        self
    }

    pub fn differentiate(mut self, on: bool) -> Self {
        self.differentiate = on;
        self
    }

    pub fn resolution(mut self, hgrid: usize, xgrid: usize, panels: usize) -> Self {
        self.hgrid = hgrid;
        self.xgrid = xgrid;
        self.panels = panels;
        self
    }

    /// The h values at which the sup is sampled, largest first: `t` itself
    /// plus the points of the fixed lattice `2 · 10^{-3j/n}` in `[10^{-3} t, t)`.
    /// The lattice does not depend on `t`, so grids for nested `t` are nested
    /// and the computed modulus is nondecreasing in `t`.
    pub fn h_grid(&self) -> Vec<f64> {
        let n = self.hgrid.max(1) as f64;
        let t = self.t;
        let mut hs = vec![t];
        let j0 = ((2.0 / t).log10() * n / 3.0).floor() as i64;
        let mut j = j0.max(0);
        loop {
            let h = 2.0 * 10f64.powf(-3.0 * j as f64 / n);
            if h < 1e-3 * t {
                break;
            }
            if h < t * (1.0 - 1e-12) {
                hs.push(h);
            }
            j += 1;
        }
        hs
    }

    fn effective_weight(&self) -> JacobiWeight {
        match self.variant {
            Variant::Dt => JacobiWeight::unit(),
            _ => self.weight,
        }
    }

    fn derivative_order(&self) -> usize {
        if self.differentiate {
            self.r
        } else {
            0
        }
    }

    pub fn validate(&self, f: &dyn RealFunction) -> Result<(), ModulusError> {
        if self.k == 0 {
            return Err(ModulusError::InvalidParameter("k must be >= 1".into()));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(ModulusError::InvalidParameter(format!("t = {} must be positive", self.t)));
        }
        if self.variant == Variant::Dt && !self.weight.is_unit() {
            return Err(ModulusError::InvalidParameter("the DT variant is unweighted; use weighted-dt".into()));
        }
        self.effective_weight().check(self.p)?;
        if self.variant == Variant::WeightedDt && self.t >= 2.0 / self.k as f64 {
            return Err(ModulusError::StepBound { t: self.t, k: self.k });
        }
        if self.variant == Variant::Restricted {
            if !(self.a > 0.0) {
                return Err(ModulusError::InvalidParameter(format!("A = {} must be positive", self.a)));
            }
            if self.a * self.t * self.t >= 1.0 {
                return Err(ModulusError::EmptyRestrictedDomain(self.a * self.t * self.t));
            }
        }
        if let Some((a, b)) = self.region {
            if !(a < b && a >= -1.0 && b <= 1.0) {
                return Err(ModulusError::InvalidParameter(format!("region [{a}, {b}] must be inside [-1, 1]")));
            }
        }
        let needed = match self.kernel {
            Kernel::Difference => self.derivative_order(),
            Kernel::Stieltjes => self.derivative_order() + self.k,
        };
        if let Some(s) = f.smoothness() {
            if needed > s {
                return Err(ModulusError::Smoothness { needed, available: s });
            }
        }
        Ok(())
    }

    /// Interval of `x` on which every difference node stays in the domain and
    /// the norm is taken; `None` when empty.
    fn x_domain(&self, h: f64) -> Option<(f64, f64)> {
        let b = match self.variant {
            Variant::Restricted => 1.0 - self.a * h * h,
            _ => 1.0,
        };
        let lam = self.k as f64 * h / 2.0;
        let (lo, hi) = if self.variant.phi_step() {
            if b < lam {
                return None;
            }
            let xm = (b - lam * (1.0 + lam * lam - b * b).sqrt()) / (1.0 + lam * lam);
            (-xm, xm)
        } else {
            (-b + lam, b - lam)
        };
        let (lo, hi) = match self.region {
            Some((a, c)) => (lo.max(a), hi.min(c)),
            None => (lo, hi),
        };
        (lo < hi).then_some((lo, hi))
    }
}

/// `Δ_{hφ(x)}^k f(x)`.
pub fn phi_step_difference(f: &dyn RealFunction, k: usize, h: f64, x: f64) -> f64 {
    symmetric_difference(f, k, h * phi(x), x)
}

/// `𝒲_{kh}^r(x) = ((1 - x - khφ/2)(1 + x - khφ/2))^{r/2}` when both factors are
/// nonnegative, 0 otherwise.
pub fn cutoff_weight_w(r: usize, k: usize, h: f64, x: f64) -> f64 {
    let d = k as f64 * h * phi(x) / 2.0;
    let a = 1.0 - x - d;
    let b = 1.0 + x - d;
    if a < 0.0 || b < 0.0 {
        return 0.0;
    }
    if r == 0 {
        1.0
    } else {
        (a * b).powf(r as f64 / 2.0)
    }
}

/// `Δ_h^k f(x)` through the `k`-fold identity-integrator iterated integral of
/// `f^(k)`; zero when the window leaves `[-1, 1]`.
pub fn difference_via_iterated_integral(f: &dyn RealFunction, k: usize, h: f64, x: f64, depth: u32) -> Result<f64, ModulusError> {
    let half = k as f64 * h / 2.0;
    if x - half < -1.0 - 1e-12 || x + half > 1.0 + 1e-12 {
        return Ok(0.0);
    }
    let g = f.derived(k);
    let gf = |u: f64| g.value(u.clamp(-1.0, 1.0));
    Ok(ls_difference(&gf, k, h, x, depth)?.value)
}

/// Per-h values of a modulus plus their sup.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulusReport {
    pub value: f64,
    pub argmax_h: f64,
    pub grid: Vec<(f64, f64)>,
}

struct Prepared<'a> {
    q: &'a ModulusQuery,
    g: Box<dyn RealFunction>,
    gk: Option<Box<dyn RealFunction>>,
}

impl Prepared<'_> {
    fn difference(&self, step: f64, x: f64) -> Result<f64, ModulusError> {
        match &self.gk {
            None => Ok(self.g.difference(self.q.k, step, x)),
            Some(gk) => {
                let f = |u: f64| gk.value(u.clamp(-1.0, 1.0));
                Ok(ls_difference(&f, self.q.k, step, x, self.q.kernel_depth)?.value)
            }
        }
    }

    fn factor(&self, h: f64, x: f64) -> f64 {
        let q = self.q;
        match q.variant {
            Variant::Classical => 1.0,
            Variant::Kls => cutoff_weight_w(q.r, q.k, h, x),
            _ => {
                if q.r == 0 {
                    1.0
                } else {
                    phi(x).powi(q.r as i32)
                }
            }
        }
    }

    fn step(&self, h: f64, x: f64) -> f64 {
        if self.q.variant.phi_step() {
            h * phi(x)
        } else {
            h
        }
    }

    fn value_at(&self, h: f64) -> Result<f64, ModulusError> {
        let q = self.q;
        let Some((lo, hi)) = q.x_domain(h) else {
            return Ok(0.0);
        };
        let err = std::sync::Mutex::new(None);
        let integrand = |x: f64| {
            let s = self.factor(h, x);
            if s == 0.0 {
                return 0.0;
            }
            match self.difference(self.step(h, x), x) {
                Ok(d) => s * d,
                Err(e) => {
                    *err.lock().unwrap() = Some(e);
                    0.0
                }
            }
        };
        let v = NormQuery::new(&integrand, q.p).weight(q.effective_weight()).interval(lo, hi).panels(q.panels).sup_samples(q.xgrid).norm()?;
        if let Some(e) = err.into_inner().unwrap() {
            return Err(e);
        }
        Ok(v)
    }
}

/// Evaluates the modulus and keeps the per-h values.
pub fn modulus_report(q: &ModulusQuery, f: &dyn RealFunction) -> Result<ModulusReport, ModulusError> {
    q.validate(f)?;
    let g = f.derived(q.derivative_order());
    let gk = match q.kernel {
        Kernel::Difference => None,
        Kernel::Stieltjes => Some(g.derived(q.k)),
    };
    let prep = Prepared { q, g, gk };
    let hs = q.h_grid();
    let vals = crate::par::map(&hs, |&h| prep.value_at(h));
    let mut grid = Vec::with_capacity(hs.len());
    for (h, v) in hs.iter().zip(vals) {
        grid.push((*h, v?));
    }
    let (mut best, mut arg) = grid.iter().fold((0.0, q.t), |acc, &(h, v)| if v > acc.0 { (v, h) } else { acc });
    // Interior local maxima are polished by golden section between their
    // lattice neighbours; this keeps the sup consistent across different t.
    for i in 0..grid.len() {
        let v = grid[i].1;
        let right = grid.get(i + 1).map_or(0.0, |g| g.1);
        let left_ok = if i == 0 {
            // At h = t, polish only when the value still rises just below t.
            v > 0.0 && grid.len() > 1 && prep.value_at(q.t * (1.0 - 1e-6))? > v
        } else {
            v >= grid[i - 1].1
        };
        if v > 0.0 && left_ok && v >= right && v >= 0.9 * best {
            let hi = if i == 0 { q.t } else { grid[i - 1].0 };
            let lo = grid.get(i + 1).map_or(grid[i].0 / 2.0, |g| g.0);
            let (h, pv) = golden_max(|h| prep.value_at(h), lo, hi, 30)?;
            if pv > best {
                best = pv;
                arg = h;
            }
        }
    }
    Ok(ModulusReport { value: best, argmax_h: arg, grid })
}

fn golden_max<F>(f: F, mut a: f64, mut b: f64, iters: usize) -> Result<(f64, f64), ModulusError>
where
    F: Fn(f64) -> Result<f64, ModulusError>,
{
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}

pub fn evaluate_modulus(q: &ModulusQuery, f: &dyn RealFunction) -> Result<f64, ModulusError> {
    Ok(modulus_report(q, f)?.value)
}

/// Modulus values along a decreasing `t` sequence, with two ceilings: the
/// triangle-inequality oracle (a proven bound on each value) and the nominal
/// `c ‖w φ^r f^(r)‖_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitScan {
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
    pub nonincreasing: bool,
    /// Per `t`: sup over h of the binomially weighted shifted norms.
    pub oracle_ceiling: Vec<f64>,
    pub nominal_constant: f64,
    pub nominal_ceiling: f64,
}

impl LimitScan {
    pub fn within_oracle(&self) -> bool {
        self.values.iter().zip(&self.oracle_ceiling).all(|(v, c)| *v <= c * (1.0 + 1e-9) + 1e-12)
    }
}

pub fn modulus_limit_scan(q: &ModulusQuery, f: &dyn RealFunction, ts: &[f64]) -> Result<LimitScan, ModulusError> {
    let mut values = Vec::with_capacity(ts.len());
    let mut oracle = Vec::with_capacity(ts.len());
    let g = f.derived(q.derivative_order());
    for &t in ts {
        let qt = q.clone().t(t);
        values.push(evaluate_modulus(&qt, f)?);
        let mut ceil: f64 = 0.0;
        for h in qt.h_grid() {
            let Some((lo, hi)) = qt.x_domain(h) else { continue };
            let mut acc = 0.0;
            for i in 0..=q.k {
                let shift = (2.0 * i as f64 - q.k as f64) / 2.0;
                let prep = Prepared { q: &qt, g: g.derived(0), gk: None };
                let term = |x: f64| {
                    let s = prep.factor(h, x);
                    if s == 0.0 {
                        0.0
                    } else {
                        s * g.value((x + shift * prep.step(h, x)).clamp(-1.0, 1.0))
                    }
                };
                let n = NormQuery::new(&term, q.p).weight(qt.effective_weight()).interval(lo, hi).panels(q.panels).sup_samples(q.xgrid).norm()?;
                let c = binomial(q.k, i);
                acc += if q.p >= 1.0 { c * n } else { (c * n).powf(q.p) };
            }
            let bound = if q.p >= 1.0 { acc } else { acc.powf(1.0 / q.p) };
            ceil = ceil.max(bound);
        }
        oracle.push(ceil);
    }
    let base = {
        let r = q.r as i32;
        let gf = |x: f64| phi(x).powi(r) * g.value(x);
        NormQuery::new(&gf, q.p).weight(q.effective_weight()).panels(q.panels).sup_samples(q.xgrid).norm()?
    };
    let kf = q.k as f64;
    let nominal_constant = if q.p >= 1.0 { 2f64.powf(kf) } else { 2f64.powf(kf / q.p) };
    let nonincreasing = values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
    Ok(LimitScan { ts: ts.to_vec(), values, nonincreasing, oracle_ceiling: oracle, nominal_constant, nominal_ceiling: nominal_constant * base })
}

/// Branch of the piecewise constant `c_δ(k, q, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CDeltaBranch {
    KAtLeastTwo,
    KOnePBelow2Q,
    KOnePEquals2Q,
    KOnePAbove2Q,
}

impl CDeltaBranch {
    /// The first two printed branches share the same expression.
    pub fn is_duplicate_expression(&self) -> bool {
        matches!(self, CDeltaBranch::KAtLeastTwo | CDeltaBranch::KOnePBelow2Q)
    }
}

/// `c_δ(k, q, p)` evaluated on the printed branch.
pub fn c_delta(k: usize, q: f64, p: f64, delta: f64) -> Result<(f64, CDeltaBranch), ModulusError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ModulusError::InvalidParameter(format!("delta = {delta} must lie in (0, 1)")));
    }
    if k == 0 || !(q > 0.0) || !(p > 0.0) {
        return Err(ModulusError::InvalidParameter("k, q and p must be positive".into()));
    }
    let two_q = 2.0 * q;
    let eq = (p - two_q).abs() <= 1e-12 * two_q;
    let branch = if k >= 2 {
        CDeltaBranch::KAtLeastTwo
    } else if eq {
        CDeltaBranch::KOnePEquals2Q
    } else if p < two_q {
        CDeltaBranch::KOnePBelow2Q
    } else {
        CDeltaBranch::KOnePAbove2Q
    };
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let v = match branch {
        CDeltaBranch::KAtLeastTwo | CDeltaBranch::KOnePBelow2Q => delta.powf(2.0 / q - 2.0 * inv_p),
        CDeltaBranch::KOnePEquals2Q => (delta * delta.ln().abs().sqrt()).powf(1.0 / q),
        CDeltaBranch::KOnePAbove2Q => delta.powf(1.0 / q),
    };
    Ok((v, branch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fnspace::FunctionExpr;
    use proptest::prelude::*;

    fn fast(q: ModulusQuery) -> ModulusQuery {
        q.resolution(20, 1024, 64)
    }

    #[test]
    fn classical_x_squared_sup_norm() {
        let f = FunctionExpr::monomial(2);
        // Δ_h^2 x² = (x+h)² - 2x² + (x-h)² = 2h², so the sup over h <= t is 2t².
        for t in [0.1, 0.25, 0.5] {
            let q = fast(ModulusQuery::new(Variant::Classical, 2, 0, t));
            let v = evaluate_modulus(&q, &f).unwrap();
            assert!((v - 2.0 * t * t).abs() < 1e-12, "t={t} v={v}");
        }
    }

    #[test]
    fn phi_step_examples() {
        let f = FunctionExpr::monomial(2).prepare();
        assert!((phi_step_difference(&f, 2, 0.2, 0.0) - 0.08).abs() < 1e-15);
        assert_eq!(phi_step_difference(&f, 2, 0.2, 1.0), 0.0);
        assert_eq!(phi_step_difference(&f, 2, 0.2, -1.0), 0.0);
        let lin = FunctionExpr::poly(&[0.3, -2.0]).prepare();
        assert_eq!(phi_step_difference(&lin, 2, 0.3, 0.4), 0.0);
        assert_eq!(symmetric_difference(&f, 2, 0.1, 0.99), 0.0);
    }

    #[test]
    fn cutoff_weight_examples() {
        assert!((cutoff_weight_w(2, 2, 0.1, 0.0) - 0.81).abs() < 1e-15);
        assert_eq!(cutoff_weight_w(0, 3, 0.2, 0.5), 1.0);
        // 1 - x - khφ/2 < 0 near the right endpoint with a large step.
        assert_eq!(cutoff_weight_w(1, 2, 0.9, 0.95), 0.0);
    }

    #[test]
    fn iterated_integral_examples() {
        let e = FunctionExpr::exp(1.0);
        let v = difference_via_iterated_integral(&e, 1, 0.2, 0.0, 16).unwrap();
        assert!((v - (0.1f64.exp() - (-0.1f64).exp())).abs() < 1e-6);
        let sq = FunctionExpr::monomial(2);
        let v = difference_via_iterated_integral(&sq, 2, 0.3, 0.0, 12).unwrap();
        assert!((v - 0.18).abs() < 1e-9);
        let c = FunctionExpr::poly(&[2.0]);
        assert_eq!(difference_via_iterated_integral(&c, 1, 0.3, 0.0, 8).unwrap(), 0.0);
        assert_eq!(difference_via_iterated_integral(&sq, 2, 0.3, 0.9, 8).unwrap(), 0.0);
    }

    #[test]
    fn exact_phi_domain_matches_node_condition() {
        let q = ModulusQuery::new(Variant::MainPart, 2, 0, 0.5);
        let h = 0.4;
        let (lo, hi) = q.x_domain(h).unwrap();
        let lam = h;
        for x in [lo, hi] {
            assert!((x.abs() + lam * phi(x) - 1.0).abs() < 1e-12);
        }
        let qr = ModulusQuery::new(Variant::Restricted, 1, 0, 0.5).a(1.0);
        let (lo, hi) = qr.x_domain(0.5).unwrap();
        let b = 1.0 - 0.25;
        assert!((hi + 0.25 * phi(hi) - b).abs() < 1e-12);
        assert!((lo + b - 0.25 * phi(lo)).abs() < 1e-12);
    }

    #[test]
    fn preconditions() {
        let f = FunctionExpr::abs_pow(0.0, 3.5);
        let q = ModulusQuery::new(Variant::WeightedDt, 2, 0, 1.0);
        assert!(matches!(evaluate_modulus(&q, &f), Err(ModulusError::StepBound { .. })));
        let q = ModulusQuery::new(Variant::Classical, 2, 4, 0.1);
        assert!(matches!(evaluate_modulus(&q, &f), Err(ModulusError::Smoothness { .. })));
        let q = ModulusQuery::new(Variant::Classical, 1, 3, 0.1).kernel(Kernel::Stieltjes);
        assert!(matches!(evaluate_modulus(&q, &f), Err(ModulusError::Smoothness { needed: 4, available: 3 })));
        let q = ModulusQuery::new(Variant::Restricted, 1, 0, 1.0);
        assert!(matches!(evaluate_modulus(&q, &f), Err(ModulusError::EmptyRestrictedDomain(_))));
        let q = ModulusQuery::new(Variant::Dt, 1, 0, 0.1).weight(JacobiWeight { alpha: 1.0, beta: 0.0 });
        assert!(matches!(evaluate_modulus(&q, &f), Err(ModulusError::InvalidParameter(_))));
        let q = ModulusQuery::new(Variant::MainPart, 1, 0, 0.1).weight(JacobiWeight { alpha: -0.5, beta: 0.0 });
        let e = evaluate_modulus(&q, &f).unwrap_err();
        assert!(e.is_hypothesis_violation());
    }

    #[test]
    fn annihilation_for_every_variant() {
        for v in Variant::ALL {
            for k in 1..=3 {
                for r in 0..=2 {
                    let deg = k + r - 1;
                    let coeffs: Vec<f64> = (0..=deg).map(|i| 1.0 + 0.5 * i as f64).collect();
                    let f = FunctionExpr::Poly(coeffs);
                    let t = 0.9 / k as f64;
                    let q = fast(ModulusQuery::new(v, k, r, t)).p(2.0);
                    let val = evaluate_modulus(&q, &f).unwrap();
                    assert!(val <= 1e-10, "{v:?} k={k} r={r}: {val}");
                }
            }
        }
    }

    #[test]
    fn kernels_agree_on_exp() {
        let f = FunctionExpr::exp(1.0);
        let q = fast(ModulusQuery::new(Variant::WeightedDt, 1, 0, 0.1));
        let a = evaluate_modulus(&q, &f).unwrap();
        let b = evaluate_modulus(&q.clone().kernel(Kernel::Stieltjes), &f).unwrap();
        assert!((a - b).abs() <= 1e-5 * a, "{a} vs {b}");
    }

    #[test]
    fn restricted_is_below_main_part() {
        let f = FunctionExpr::abs_pow(0.0, 3.5);
        for p in [1.0, 2.0, f64::INFINITY] {
            let q = fast(ModulusQuery::new(Variant::MainPart, 2, 1, 0.2)).p(p);
            let psi = evaluate_modulus(&q, &f).unwrap();
            let mut qo = q.clone();
            qo.variant = Variant::Restricted;
            let om = evaluate_modulus(&qo, &f).unwrap();
            assert!(om <= psi * (1.0 + 1e-9), "p={p}: {om} > {psi}");
        }
    }

    #[test]
    fn limit_scan_decreases_and_respects_ceilings() {
        let f = FunctionExpr::exp(1.0);
        let q = fast(ModulusQuery::new(Variant::MainPart, 1, 0, 0.4)).p(2.0);
        let scan = modulus_limit_scan(&q, &f, &[0.4, 0.2, 0.1, 0.05]).unwrap();
        assert!(scan.values.windows(2).all(|w| w[1] < w[0]));
        assert!(scan.within_oracle());
        assert!(scan.values.iter().all(|v| *v <= scan.nominal_ceiling));
        let lin = FunctionExpr::poly(&[1.0, 2.0]);
        let q = fast(ModulusQuery::new(Variant::MainPart, 2, 0, 0.4));
        let scan = modulus_limit_scan(&q, &lin, &[0.4, 0.1]).unwrap();
        assert!(scan.values.iter().all(|v| *v <= 1e-12));
    }

    #[test]
    fn c_delta_branches() {
        let (v, b) = c_delta(1, 1.0, 2.0, 0.25).unwrap();
        assert_eq!(b, CDeltaBranch::KOnePEquals2Q);
        let expected = 0.25 * 4f64.ln().sqrt();
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.294_353).abs() < 1e-6);
        let (v, b) = c_delta(1, 2.0, 5.0, 0.81).unwrap();
        assert_eq!(b, CDeltaBranch::KOnePAbove2Q);
        assert!((v - 0.9).abs() < 1e-15);
        let (_, b) = c_delta(3, 1.0, 2.0, 0.5).unwrap();
        assert!(b.is_duplicate_expression());
        assert!(c_delta(1, 1.0, 2.0, 1.0).is_err());
        assert!(c_delta(1, 1.0, 2.0, 0.0).is_err());
        let (v, _) = c_delta(2, 1.0, 2.0, 1.0 - 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn nondecreasing_in_t(vi in 0usize..6, k in 1usize..3, p_idx in 0usize..3) {
            let v = Variant::ALL[vi];
            let p = [1.0, 2.0, f64::INFINITY][p_idx];
            let f = FunctionExpr::abs_pow(0.1, 3.5);
            let mut prev = 0.0;
            for j in 1..=10 {
                let t = 0.09 * j as f64 / k as f64;
                let q = fast(ModulusQuery::new(v, k, 1, t)).p(p).a(1.0);
                let val = evaluate_modulus(&q, &f).unwrap();
                prop_assert!(val >= prev * (1.0 - 1e-9), "{:?} t={} {} < {}", v, t, val, prev);
                prev = val;
            }
        }

        #[test]
        fn homogeneous_and_subadditive(c in -3.0f64..3.0, p_idx in 0usize..3) {
            let p = [0.5, 2.0, f64::INFINITY][p_idx];
            let f = FunctionExpr::exp(0.8);
            let g = FunctionExpr::trunc_pow(0.2, 4.0);
            let q = fast(ModulusQuery::new(Variant::MainPart, 2, 0, 0.3)).p(p);
            let wf = evaluate_modulus(&q, &f).unwrap();
            let wcf = evaluate_modulus(&q, &FunctionExpr::Scale(c, Box::new(f.clone()))).unwrap();
            prop_assert!((wcf - c.abs() * wf).abs() <= 1e-9 * wf.max(1e-300) + 1e-15);
            if p >= 1.0 {
                let wg = evaluate_modulus(&q, &g).unwrap();
                let wfg = evaluate_modulus(&q, &FunctionExpr::Sum(vec![f.clone(), g.clone()])).unwrap();
                prop_assert!(wfg <= wf + wg + 1e-9);
            }
        }
    }
}
