//! Best polynomial approximation in weighted `L_p`, unconstrained and under
//! (co)convexity constraints. Polynomials are stored in the Chebyshev basis.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cheb::{self, ChebSeries};
use crate::fnspace::{FnSpaceError, JacobiWeight, PartitionSet, RealFunction};
use crate::optim::{linear_program, Qp};
use crate::quad::{theta_nodes, NormQuery, QuadError, DEFAULT_PANELS, DEFAULT_SUP_SAMPLES};
use crate::shape::inflection_sign;

/// Largest degree accepted by the solvers.
pub const MAX_DEGREE: usize = 40;
/// Largest `n_max` for tail checks.
pub const MAX_TAIL_DEGREE: usize = 14;
pub const REMEZ_TOL: f64 = 1e-8;
pub const VIOLATION_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error("degree {0} exceeds the supported maximum {MAX_DEGREE}")]
    Degree(usize),
    #[error("sigma = 4 is excluded by the tail estimate (σ ≠ 4); pass the override flag to probe it")]
    SigmaFour,
    #[error("invalid tail range m = {m}, n_max = {n_max} (need 1 <= m <= n_max <= {MAX_TAIL_DEGREE})")]
    TailRange { m: usize, n_max: usize },
    #[error("non-finite target value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error(transparent)]
    Weight(#[from] FnSpaceError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

impl ApproxError {
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(self, ApproxError::Weight(FnSpaceError::InadmissibleExponent { .. }) | ApproxError::Quad(QuadError::Weight(_)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxOptions {
    pub weight: JacobiWeight,
    pub p: f64,
    pub iters: usize,
    /// Random restarts of the heuristic `p < 1` search.
    pub restarts: usize,
    pub seed: u64,
    pub panels: usize,
    pub sup_samples: usize,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            weight: JacobiWeight::unit(),
            p: f64::INFINITY,
            iters: 200,
            restarts: 5,
            seed: 0,
            panels: DEFAULT_PANELS,
            sup_samples: DEFAULT_SUP_SAMPLES,
        }
    }
}

impl ApproxOptions {
    pub fn weight(mut self, w: JacobiWeight) -> Self {
        self.weight = w;
        self
    }

    pub fn p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A polynomial of degree `degree` with its certified error.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyCandidate {
    pub degree: usize,
    /// Chebyshev coefficients, `degree + 1` of them.
    pub coeffs: Vec<f64>,
    /// `‖w (f - p)‖_p` on the certification grid.
    pub error: f64,
    /// Largest violation of the shape condition on the validation grid (0 when unconstrained).
    pub max_violation: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective is nonconvex (`p < 1`); the value is a local optimum.
    pub heuristic: bool,
    /// For constrained fits: whether the constraint changed the optimum.
    pub binding: bool,
    /// Copied from degree `n - 1` because the fresh solve was worse.
    pub carried: bool,
}

impl PolyCandidate {
    pub fn eval(&self, x: f64) -> f64 {
        cheb::eval(&self.coeffs, x)
    }

    pub fn series(&self) -> ChebSeries {
        ChebSeries(self.coeffs.clone())
    }

    /// Monomial coefficients.
    pub fn monomial(&self) -> Vec<f64> {
        // T_{j+1} = 2x T_j - T_{j-1}
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        let mut prev = vec![0.0; n];
        let mut cur = vec![0.0; n];
        cur[0] = 1.0;
        for (j, &c) in self.coeffs.iter().enumerate() {
            for i in 0..n {
                out[i] += c * cur[i];
            }
            let mut next = vec![0.0; n];
            for i in 0..n {
                if i + 1 < n {
                    next[i + 1] += if j == 0 { cur[i] } else { 2.0 * cur[i] };
                }
                if j > 0 {
                    next[i] -= prev[i];
                }
            }
            prev = cur;
            cur = next;
        }
        out
    }

    fn lift(&self, n: usize) -> PolyCandidate {
        let mut c = self.clone();
        c.coeffs.resize(n + 1, 0.0);
        c.degree = n;
        c.carried = true;
        c
    }
}

fn check_inputs(n: usize, opts: &ApproxOptions) -> Result<(), ApproxError> {
    if n > MAX_DEGREE {
        return Err(ApproxError::Degree(n));
    }
    opts.weight.check(opts.p)?;
    Ok(())
}

fn sample(f: &dyn RealFunction, x: f64) -> Result<f64, ApproxError> {
    let v = f.value(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ApproxError::NonFinite { x, value: v })
    }
}

/// `‖w (f - p)‖_p` with the `quad` engine.
pub fn certify(f: &dyn RealFunction, coeffs: &[f64], opts: &ApproxOptions) -> Result<f64, ApproxError> {
    let g = |x: f64| f.value(x) - cheb::eval(coeffs, x);
    Ok(NormQuery::new(&g, opts.p).weight(opts.weight).panels(opts.panels).sup_samples(opts.sup_samples).norm()?)
}

fn basis(n: usize, x: f64) -> Vec<f64> {
    cheb::basis_derivatives(n, 0, x)
}

// ---------------------------------------------------------------- p = ∞

struct Remez<'a> {
    f: &'a dyn RealFunction,
    n: usize,
    w: JacobiWeight,
}

impl Remez<'_> {
    fn err(&self, c: &[f64], x: f64) -> f64 {
        self.w.eval(x) * (self.f.value(x) - cheb::eval(c, x))
    }

    /// Solves `w(x_j)(f - p)(x_j) = (-1)^j E` on the reference.
    fn level(&self, reference: &[f64]) -> Option<(Vec<f64>, f64)> {
        let m = self.n + 2;
        let mut a = DMatrix::zeros(m, m);
        let mut b = DVector::zeros(m);
        for (j, &x) in reference.iter().enumerate() {
            for (i, v) in basis(self.n, x).into_iter().enumerate() {
                a[(j, i)] = v;
            }
            let wx = self.w.eval(x);
            if wx <= 0.0 {
                return None;
            }
            a[(j, m - 1)] = if j % 2 == 0 { 1.0 } else { -1.0 } / wx;
            b[j] = self.f.value(x);
        }
        let s = a.lu().solve(&b)?;
        Some((s.rows(0, m - 1).iter().copied().collect(), s[m - 1]))
    }

    /// Local extrema of the weighted error over `points`, polished when `polish`.
    fn extrema(&self, c: &[f64], points: &[f64], polish: bool) -> Vec<(f64, f64)> {
        let e: Vec<f64> = points.iter().map(|&x| self.err(c, x)).collect();
        let m = points.len();
        let mut out = Vec::new();
        for i in 0..m {
            let a = e[i].abs();
            let left = if i > 0 { e[i - 1].abs() } else { -1.0 };
            let right = if i + 1 < m { e[i + 1].abs() } else { -1.0 };
            if a > 0.0 && a >= left && a >= right {
                if polish && i > 0 && i + 1 < m {
                    let s = e[i].signum();
                    let t0 = crate::quad::theta_of(points[i - 1]);
                    let t1 = crate::quad::theta_of(points[i + 1]);
                    let g = |th: f64| s * self.err(c, -th.cos());
                    let th = golden_argmax(&g, t0, t1, 40);
                    let x = -th.cos();
                    let v = self.err(c, x);
                    out.push(if v.abs() > a { (x, v) } else { (points[i], e[i]) });
                } else {
                    out.push((points[i], e[i]));
                }
            }
        }
        out
    }
}

fn golden_argmax(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
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
    }
    if fc > fd {
        c
    } else {
        d
    }
}

/// Picks `m` alternating points containing the largest error.
fn exchange(mut cands: Vec<(f64, f64)>, m: usize) -> Option<Vec<f64>> {
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut alt: Vec<(f64, f64)> = Vec::new();
    for (x, e) in cands {
        if e == 0.0 {
            continue;
        }
        match alt.last_mut() {
            Some(last) if last.1.signum() == e.signum() => {
                if e.abs() > last.1.abs() {
                    *last = (x, e);
                }
            }
            Some(last) if (x - last.0).abs() < 1e-14 => {}
            _ => alt.push((x, e)),
        }
    }
    if alt.len() < m {
        return None;
    }
    let gmax = alt.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    while alt.len() > m {
        let first = alt[0].1.abs();
        let last = alt[alt.len() - 1].1.abs();
        if (first < last || last == gmax) && first != gmax {
            alt.remove(0);
        } else {
            alt.pop();
        }
    }
    Some(alt.into_iter().map(|p| p.0).collect())
}

fn remez(f: &dyn RealFunction, n: usize, opts: &ApproxOptions) -> Result<(Vec<f64>, bool, usize), ApproxError> {
    let w = opts.weight;
    let r = Remez { f, n, w };
    let m = n + 2;
    let vanishing = w.alpha > 0.0 || w.beta > 0.0;
    // Discrete stage: the minimax problem on 4n + 17 Chebyshev extrema, solved
    // as a linear program; its alternation set seeds the continuous exchange.
    let mut discrete = cheb::extrema(4 * n + 16);
    discrete.retain(|&x| w.eval(x) > 0.0);
    let dense: Vec<f64> = {
        let s = opts.sup_samples.max(64 * m);
        (0..=s).map(|j| -(std::f64::consts::PI * j as f64 / s as f64).cos()).collect()
    };
    for &x in &dense {
        sample(f, x)?;
    }
    let scale = 1.0 + dense.iter().map(|&x| (w.eval(x) * f.value(x)).abs()).fold(0.0, f64::max);
    let fallback = if vanishing { cheb::first_kind(m) } else { cheb::extrema(n + 1) };
    let mut reference = match discrete_minimax(f, n, w, &discrete, None) {
        Ok((c, _)) => {
            let cv: Vec<f64> = c.iter().copied().collect();
            let cands: Vec<(f64, f64)> = discrete.iter().map(|&x| (x, r.err(&cv, x))).collect();
            exchange(cands, m).unwrap_or(fallback)
        }
        Err(_) => fallback,
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for it in 0..opts.iters.max(1) {
        let Some((c, level)) = r.level(&reference) else {
            break;
        };
        let mut cands = r.extrema(&c, &dense, true);
        cands.extend(reference.iter().map(|&x| (x, r.err(&c, x))));
        let maxe = cands.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
        if best.as_ref().is_none_or(|b| maxe < b.1) {
            best = Some((c.clone(), maxe));
        }
        let settled = maxe - level.abs() <= (REMEZ_TOL * maxe).max(1e-14 * scale);
        if settled {
            return Ok((c, true, it + 1));
        }
        match exchange(cands, m) {
            Some(next) => reference = next,
            None => {
                // Fewer than n + 2 sign changes: the error is at rounding level.
                if maxe <= 1e-12 * scale {
                    return Ok((c, true, it + 1));
                }
                break;
            }
        }
    }
    let c = best.map(|b| b.0).unwrap_or_else(|| vec![0.0; n + 1]);
    Ok((c, false, opts.iters))
}

/// Alternation points of the weighted error of `cand`: alternating local
/// extrema whose magnitude is within `rel` of the maximum.
pub fn alternation_points(f: &dyn RealFunction, cand: &PolyCandidate, opts: &ApproxOptions, rel: f64) -> Vec<(f64, f64)> {
    let r = Remez { f, n: cand.degree, w: opts.weight };
    let s = opts.sup_samples.max(64 * (cand.degree + 2));
    let dense: Vec<f64> = (0..=s).map(|j| -(std::f64::consts::PI * j as f64 / s as f64).cos()).collect();
    let ext = r.extrema(&cand.coeffs, &dense, true);
    let maxe = ext.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (x, e) in ext {
        if e.abs() < (1.0 - rel) * maxe {
            continue;
        }
        if out.last().is_some_and(|l| l.1.signum() == e.signum()) {
            continue;
        }
        out.push((x, e));
    }
    out
}

// ---------------------------------------------------------------- p < ∞

/// Discretised objective `Σ q |ω (y - A c)|^p` on θ-Gauss nodes.
struct Discrete {
    a: DMatrix<f64>,
    y: DVector<f64>,
    /// `ω_q`: Jacobi weight at the node.
    om: DVector<f64>,
    /// Quadrature weights.
    q: DVector<f64>,
    p: f64,
}

impl Discrete {
    fn new(f: &dyn RealFunction, n: usize, opts: &ApproxOptions) -> Result<Self, ApproxError> {
        let nodes = theta_nodes(-1.0, 1.0, opts.panels);
        let m = nodes.len();
        let mut a = DMatrix::zeros(m, n + 1);
        let mut y = DVector::zeros(m);
        let mut om = DVector::zeros(m);
        let mut q = DVector::zeros(m);
        for (i, &(x, th, wq)) in nodes.iter().enumerate() {
            for (j, v) in basis(n, x).into_iter().enumerate() {
                a[(i, j)] = v;
            }
            y[i] = sample(f, x)?;
            om[i] = opts.weight.eval_theta(th);
            q[i] = wq;
        }
        Ok(Discrete { a, y, om, q, p: opts.p })
    }

    fn residual(&self, c: &DVector<f64>) -> DVector<f64> {
        (&self.y - &self.a * c).component_mul(&self.om)
    }

    fn objective(&self, c: &DVector<f64>, eps: f64) -> f64 {
        let r = self.residual(c);
        r.iter().zip(self.q.iter()).map(|(r, q)| q * smooth_abs_pow(*r, eps, self.p)).sum()
    }

    /// Weighted L2 projection.
    fn l2(&self) -> DVector<f64> {
        let s = self.q.map(f64::sqrt).component_mul(&self.om);
        let mut b = self.a.clone();
        for (i, mut row) in b.row_iter_mut().enumerate() {
            row *= s[i];
        }
        let rhs = self.y.component_mul(&s);
        b.svd(true, true).solve(&rhs, 1e-14).unwrap_or_else(|_| DVector::zeros(self.a.ncols()))
    }

    /// Gradient and Hessian of the smoothed objective.
    fn newton_system(&self, c: &DVector<f64>, eps: f64) -> (DMatrix<f64>, DVector<f64>) {
        let r = self.residual(c);
        let p = self.p;
        let n = self.a.ncols();
        let mut h = DMatrix::zeros(n, n);
        let mut g = DVector::zeros(n);
        for i in 0..r.len() {
            let (d1, d2) = smooth_abs_pow_derivs(r[i], eps, p);
            let row = self.a.row(i);
            let s = self.q[i] * self.om[i];
            g -= row.transpose() * (s * d1);
            h += row.transpose() * row * (s * self.om[i] * d2);
        }
        let reg = 1e-14 * (1.0 + h.diagonal().amax());
        for j in 0..n {
            h[(j, j)] += reg;
        }
        (h, g)
    }
}

/// `(r² + ε²)^{p/2}`; `|r|^p` when `ε = 0`.
fn smooth_abs_pow(r: f64, eps: f64, p: f64) -> f64 {
    if eps == 0.0 {
        r.abs().powf(p)
    } else {
        (r * r + eps * eps).powf(p / 2.0)
    }
}

fn smooth_abs_pow_derivs(r: f64, eps: f64, p: f64) -> (f64, f64) {
    let s = r * r + eps * eps;
    if s == 0.0 {
        return (0.0, 0.0);
    }
    let d1 = p * r * s.powf(p / 2.0 - 1.0);
    let d2 = p * s.powf(p / 2.0 - 2.0) * ((p - 1.0) * r * r + eps * eps);
    (d1, d2)
}

/// Shape rows `G c >= 0` for `p'' · Π(x - y_i) >= 0` at `points`, raw and normalised.
/// Equality rows `p''(y_i) = 0` are added separately: the sign change of `p''`
/// at an inflection point forces a root there.
struct ShapeRows {
    raw: DMatrix<f64>,
    unit: DMatrix<f64>,
}

impl ShapeRows {
    fn new(n: usize, y: &PartitionSet, points: &[f64]) -> Self {
        let mut raw = DMatrix::zeros(points.len(), n + 1);
        for (i, &x) in points.iter().enumerate() {
            let s = inflection_sign(y, x);
            for (j, v) in cheb::basis_derivatives(n, 2, x).into_iter().enumerate() {
                raw[(i, j)] = v * s;
            }
        }
        let mut unit = raw.clone();
        for mut row in unit.row_iter_mut() {
            let nr = row.norm();
            if nr > 0.0 {
                row /= nr;
            }
        }
        ShapeRows { raw, unit }
    }

    fn violations(&self, c: &DVector<f64>) -> DVector<f64> {
        (&self.raw * c).map(|v| (-v).max(0.0))
    }
}

fn constraint_points(m: usize) -> Vec<f64> {
    cheb::extrema(m - 1)
}

/// Damped Newton on the smoothed objective, with `ε` continuation for `p < 2`.
/// With `shape`, each step solves the linearly constrained Newton QP.
fn newton(d: &Discrete, mut c: DVector<f64>, shape: Option<&Linear>, iters: usize) -> (DVector<f64>, bool, usize) {
    let p = d.p;
    let scale = d.residual(&c).amax().max(1e-300);
    let mut eps_seq = Vec::new();
    if p < 2.0 {
        let mut e = 1e-2 * scale;
        while e > 1e-11 * scale {
            eps_seq.push(e);
            e /= 10.0;
        }
        eps_seq.push(1e-11 * scale);
    } else {
        eps_seq.push(0.0);
    }
    let mut total = 0;
    let mut converged = true;
    for &eps in &eps_seq {
        let mut stage_ok = false;
        for _ in 0..iters {
            total += 1;
            let (h, g) = d.newton_system(&c, eps);
            let step = match shape {
                None => h.clone().cholesky().map(|ch| ch.solve(&(-&g))).or_else(|| h.clone().svd(true, true).solve(&(-&g), 1e-14).ok()),
                Some(lin) => {
                    let mut qp = Qp::unconstrained(h.clone(), g.clone());
                    qp.ineq = lin.ineq.clone();
                    qp.ineq_rhs = -(lin.ineq * &c);
                    qp.eq = lin.eq.clone();
                    qp.eq_rhs = DVector::zeros(lin.eq.nrows());
                    // The current iterate is feasible, so the zero step is.
                    qp.ineq_rhs.iter_mut().for_each(|v| *v = v.min(0.0));
                    let sol = qp.solve_from(DVector::zeros(c.len()), 500);
                    Some(sol.x)
                }
            };
            let Some(step) = step else { break };
            let f0 = d.objective(&c, eps);
            let slope = g.dot(&step);
            if slope >= 0.0 || step.amax() <= 1e-15 * (1.0 + c.amax()) {
                stage_ok = true;
                break;
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial = &c + alpha * &step;
                if d.objective(&trial, eps) <= f0 + 1e-4 * alpha * slope {
                    c = trial;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted || (f0 - d.objective(&c, eps)).abs() <= 1e-15 * f0.abs().max(1e-300) {
                stage_ok = true;
                break;
            }
        }
        converged &= stage_ok;
    }
    (c, converged, total)
}

/// Multi-start coordinate pattern search for `0 < p < 1`.
fn pattern_search(d: &Discrete, starts: Vec<DVector<f64>>, shape: Option<&Linear>, iters: usize) -> (DVector<f64>, usize) {
    let feasible = |c: &DVector<f64>| shape.is_none_or(|l| (l.ineq * c).iter().all(|v| *v >= -1e-12) && (l.eq * c).iter().all(|v| v.abs() <= 1e-12));
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut total = 0;
    for start in starts {
        if !feasible(&start) {
            continue;
        }
        let mut c = start;
        let mut val = d.objective(&c, 0.0);
        let mut delta: Vec<f64> = c.iter().map(|v| 0.1 * (v.abs() + 0.1)).collect();
        for _ in 0..iters * 20 {
            total += 1;
            let mut improved = false;
            for i in 0..c.len() {
                for dir in [1.0, -1.0] {
                    let mut trial = c.clone();
                    trial[i] += dir * delta[i];
                    if !feasible(&trial) {
                        continue;
                    }
                    let v = d.objective(&trial, 0.0);
                    if v < val {
                        c = trial;
                        val = v;
                        improved = true;
                        delta[i] *= 1.5;
                        break;
                    }
                }
            }
            if !improved {
                delta.iter_mut().for_each(|v| *v *= 0.5);
                if delta.iter().all(|v| *v < 1e-12) {
                    break;
                }
            }
        }
        if best.as_ref().is_none_or(|b| val < b.1) {
            best = Some((c, val));
        }
    }
    (best.map(|b| b.0).unwrap_or_else(|| DVector::zeros(d.a.ncols())), total)
}

fn starts(center: &DVector<f64>, restarts: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 0.1 * (1.0 + center.amax());
    let mut out = vec![center.clone()];
    for _ in 0..restarts {
        out.push(center.map(|v| v + scale * rng.gen_range(-1.0..1.0)));
    }
    out
}

fn finite_p_solve(f: &dyn RealFunction, n: usize, opts: &ApproxOptions) -> Result<(Vec<f64>, bool, usize, bool), ApproxError> {
    let d = Discrete::new(f, n, opts)?;
    let c0 = d.l2();
    if opts.p == 2.0 {
        return Ok((c0.iter().copied().collect(), true, 1, false));
    }
    if opts.p >= 1.0 {
        let (c, ok, it) = newton(&d, c0, None, opts.iters);
        return Ok((c.iter().copied().collect(), ok, it, false));
    }
    let seed_point = newton(&Discrete { p: 1.0, ..d_clone(&d) }, c0, None, opts.iters).0;
    let (c, it) = pattern_search(&d, starts(&seed_point, opts.restarts, opts.seed), None, opts.iters);
    Ok((c.iter().copied().collect(), true, it, true))
}

fn d_clone(d: &Discrete) -> Discrete {
    Discrete { a: d.a.clone(), y: d.y.clone(), om: d.om.clone(), q: d.q.clone(), p: d.p }
}

/// Best unconstrained approximation `E_n(f)` from `π_n`.
pub fn best_unconstrained(f: &dyn RealFunction, n: usize, opts: &ApproxOptions) -> Result<PolyCandidate, ApproxError> {
    check_inputs(n, opts)?;
    let (coeffs, converged, iterations, heuristic) = if opts.p.is_infinite() {
        let (c, ok, it) = remez(f, n, opts)?;
        (c, ok, it, false)
    } else {
        finite_p_solve(f, n, opts)?
    };
    let error = certify(f, &coeffs, opts)?;
    Ok(PolyCandidate { degree: n, coeffs, error, max_violation: 0.0, converged, iterations, heuristic, binding: false, carried: false })
}

/// Best approximation from `π_n ∩ Δ^(2)(Y)`: polynomials whose second
/// derivative has the sign of `Π (x - y_i)`. An empty `Y` gives convexity.
pub fn best_coconvex(f: &dyn RealFunction, n: usize, y: &PartitionSet, opts: &ApproxOptions) -> Result<PolyCandidate, ApproxError> {
    let free = best_unconstrained(f, n, opts)?;
    if n < 2 {
        // p'' = 0 satisfies every sign condition.
        return Ok(free);
    }
    let s = y.inflection_points().len();
    let m = 16 * (s + 1);
    let mut grid = constraint_points(m);
    let validation = ShapeRows::new(n, y, &constraint_points(4 * m));
    // Cutting planes are drawn from a grid much finer than the validation grid.
    let fine_pts: Vec<f64> = {
        let mut v = constraint_points(1024);
        v.extend((0..=1024).map(|j| -1.0 + j as f64 / 512.0));
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };
    let fine = ShapeRows::new(n, y, &fine_pts);
    let free_c = DVector::from_column_slice(&free.coeffs);
    let tol = |c: &DVector<f64>| 1e-12 * (1.0 + c.amax());
    if fine.violations(&free_c).amax() <= tol(&free_c) && validation.violations(&free_c).amax() <= tol(&free_c) {
        return Ok(free);
    }
    let eq = {
        let mut e = DMatrix::zeros(s, n + 1);
        for (i, &yi) in y.inflection_points().iter().enumerate() {
            let row = cheb::basis_derivatives(n, 2, yi);
            let nr = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (j, v) in row.into_iter().enumerate() {
                e[(i, j)] = v / nr;
            }
        }
        e
    };

    let mut total_iters = 0;
    let mut c = free_c.clone();
    let mut converged = false;
    for _round in 0..10 {
        let rows = ShapeRows::new(n, y, &grid);
        let lin = Linear { ineq: &rows.unit, eq: &eq };
        let (next, ok, it) = if opts.p.is_infinite() {
            constrained_minimax(f, n, &lin, opts)?
        } else {
            let d = Discrete::new(f, n, opts)?;
            let mut qp = Qp::unconstrained(d_hessian_l2(&d), d_grad_l2(&d));
            qp.ineq = rows.unit.clone();
            qp.ineq_rhs = DVector::zeros(rows.unit.nrows());
            qp.eq = eq.clone();
            qp.eq_rhs = DVector::zeros(s);
            let start = qp.solve_from(DVector::zeros(n + 1), 2000);
            if opts.p == 2.0 {
                (start.x, start.converged, start.iterations)
            } else if opts.p >= 1.0 {
                newton(&d, start.x, Some(&lin), opts.iters)
            } else {
                let seed_point = newton(&Discrete { p: 1.0, ..d_clone(&d) }, start.x, Some(&lin), opts.iters).0;
                let (x, it) = pattern_search(&d, starts(&seed_point, opts.restarts, opts.seed), Some(&lin), opts.iters);
                (x, true, it)
            }
        };
        c = next;
        converged = ok;
        total_iters += it;
        let viol = fine.violations(&c);
        let bad: Vec<f64> = (0..viol.len()).filter(|&i| viol[i] > 1e-12 * (1.0 + c.amax())).map(|i| fine_pts[i]).collect();
        if bad.is_empty() {
            break;
        }
        grid.extend(bad);
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
    }
    let coeffs: Vec<f64> = c.iter().copied().collect();
    let error = certify(f, &coeffs, opts)?;
    let max_violation = validation.violations(&c).amax();
    Ok(PolyCandidate {
        degree: n,
        coeffs,
        error,
        max_violation,
        converged: converged && max_violation <= VIOLATION_TOL,
        iterations: total_iters,
        heuristic: opts.p < 1.0,
        binding: true,
        carried: false,
    })
}

fn d_hessian_l2(d: &Discrete) -> DMatrix<f64> {
    let s = d.q.component_mul(&d.om).component_mul(&d.om);
    let mut b = d.a.clone();
    for (i, mut row) in b.row_iter_mut().enumerate() {
        row *= s[i];
    }
    d.a.transpose() * b
}

fn d_grad_l2(d: &Discrete) -> DVector<f64> {
    let s = d.q.component_mul(&d.om).component_mul(&d.om);
    -(d.a.transpose() * d.y.component_mul(&s))
}

/// Linear constraints on the coefficients: `G c >= 0` and `E c = 0`.
pub(crate) struct Linear<'a> {
    ineq: &'a DMatrix<f64>,
    eq: &'a DMatrix<f64>,
}

/// `min_c max_{x in pts} |w (f - p)|` under optional linear constraints, as an LP.
fn discrete_minimax(f: &dyn RealFunction, n: usize, w: JacobiWeight, pts: &[f64], lin: Option<&Linear>) -> Result<(DVector<f64>, f64), ApproxError> {
    let m = pts.len();
    let (gi, ge) = lin.map_or((0, 0), |l| (l.ineq.nrows(), l.eq.nrows()));
    let rows = 2 * m + gi + 2 * ge;
    let mut a = DMatrix::zeros(rows, n + 2);
    let mut b = vec![0.0; rows];
    for (i, &x) in pts.iter().enumerate() {
        let wx = w.eval(x);
        let fx = sample(f, x)?;
        for (j, v) in basis(n, x).into_iter().enumerate() {
            a[(2 * i, j)] = wx * v;
            a[(2 * i + 1, j)] = -wx * v;
        }
        a[(2 * i, n + 1)] = 1.0;
        a[(2 * i + 1, n + 1)] = 1.0;
        b[2 * i] = wx * fx;
        b[2 * i + 1] = -wx * fx;
    }
    if let Some(l) = lin {
        for j in 0..=n {
            for i in 0..gi {
                a[(2 * m + i, j)] = l.ineq[(i, j)];
            }
            for i in 0..ge {
                a[(2 * m + gi + 2 * i, j)] = l.eq[(i, j)];
                a[(2 * m + gi + 2 * i + 1, j)] = -l.eq[(i, j)];
            }
        }
    }
    let mut obj = vec![0.0; n + 2];
    obj[n + 1] = 1.0;
    let x = linear_program(&obj, &a, &b, &[n + 1]).map_err(ApproxError::Lp)?;
    Ok((DVector::from_column_slice(&x[..=n]), x[n + 1]))
}

/// Minimax under linear constraints by linear programming on a point set
/// refined with the dense-grid extrema that exceed the current level.
fn constrained_minimax(f: &dyn RealFunction, n: usize, lin: &Linear, opts: &ApproxOptions) -> Result<(DVector<f64>, bool, usize), ApproxError> {
    let w = opts.weight;
    let mut pts = cheb::extrema(8 * (n + 2) + 63);
    pts.retain(|&x| w.eval(x) > 0.0);
    let s = opts.sup_samples.max(64 * (n + 2));
    let dense: Vec<f64> = (0..=s).map(|j| -(std::f64::consts::PI * j as f64 / s as f64).cos()).collect();
    let r = Remez { f, n, w };
    let mut c = DVector::zeros(n + 1);
    for round in 0..30 {
        let (next, level) = discrete_minimax(f, n, w, &pts, Some(lin))?;
        c = next;
        let cv: Vec<f64> = c.iter().copied().collect();
        let ext = r.extrema(&cv, &dense, true);
        let new: Vec<f64> = ext.iter().filter(|e| e.1.abs() > level * (1.0 + 1e-9) + 1e-14).map(|e| e.0).collect();
        if new.is_empty() {
            return Ok((c, true, round + 1));
        }
        pts.extend(new);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    }
    Ok((c, false, 30))
}

/// One row of an error table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub n: usize,
    pub unconstrained: PolyCandidate,
    pub constrained: Option<PolyCandidate>,
}

/// `E_n` (and `ℰ_n^(2)` when `y` is given) for `n` in `ns`, solved in
/// parallel. A solve that comes out worse than degree `n - 1` is replaced by
/// the lifted degree `n - 1` candidate, which is feasible in `π_n`.
pub fn error_table(f: &dyn RealFunction, ns: &[usize], y: Option<&PartitionSet>, opts: &ApproxOptions) -> Result<Vec<TableRow>, ApproxError> {
    let solved = crate::par::map(ns, |&n| -> Result<TableRow, ApproxError> {
        let unconstrained = best_unconstrained(f, n, opts)?;
        let constrained = y.map(|y| best_coconvex(f, n, y, opts)).transpose()?;
        Ok(TableRow { n, unconstrained, constrained })
    });
    let mut rows: Vec<TableRow> = solved.into_iter().collect::<Result<_, _>>()?;
    rows.sort_by_key(|r| r.n);
    for i in 1..rows.len() {
        if rows[i].n != rows[i - 1].n + 1 {
            continue;
        }
        let n = rows[i].n;
        if rows[i].unconstrained.error > rows[i - 1].unconstrained.error {
            rows[i].unconstrained = rows[i - 1].unconstrained.lift(n);
        }
        let prev = rows[i - 1].constrained.clone();
        if let (Some(cur), Some(prev)) = (rows[i].constrained.as_mut(), prev) {
            if cur.error > prev.error {
                *cur = prev.lift(n);
            }
        }
    }
    Ok(rows)
}

/// Ratio of two nonnegative sides with the both-zero convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Value(f64),
    /// Both sides below the zero threshold.
    BothZero,
    /// Left side positive with a zero right side.
    Unbounded,
}

pub const ZERO_THRESHOLD: f64 = 1e-12;

impl Ratio {
    pub fn of(lhs: f64, rhs: f64) -> Ratio {
        if lhs < ZERO_THRESHOLD && rhs < ZERO_THRESHOLD {
            Ratio::BothZero
        } else if rhs < ZERO_THRESHOLD {
            Ratio::Unbounded
        } else {
            Ratio::Value(lhs / rhs)
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Ratio::Value(v) => Some(*v),
            _ => None,
        }
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ratio::Value(v) => write!(f, "{v:.12e}"),
            Ratio::BothZero => f.write_str("both-zero"),
            Ratio::Unbounded => f.write_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TailReport {
    pub sigma: u32,
    pub m: usize,
    /// `sup_{m <= n <= n_max} n^σ ℰ_n^(2)`.
    pub lhs: f64,
    /// `sup_{1 <= n <= n_max} n^σ E_n`.
    pub rhs: f64,
    pub constant: Ratio,
    pub table: Vec<TableRow>,
    /// `σ = 4` was run through the override.
    pub outside_hypotheses: bool,
}

/// Evaluates both sups of the tail estimate over `n <= n_max`.
pub fn jackson_tail_check(
    f: &dyn RealFunction,
    sigma: u32,
    m: usize,
    n_max: usize,
    y: &PartitionSet,
    opts: &ApproxOptions,
    override_hypotheses: bool,
) -> Result<TailReport, ApproxError> {
    if sigma == 4 && !override_hypotheses {
        return Err(ApproxError::SigmaFour);
    }
    if m == 0 || m > n_max || n_max > MAX_TAIL_DEGREE {
        return Err(ApproxError::TailRange { m, n_max });
    }
    let ns: Vec<usize> = (1..=n_max).collect();
    let table = error_table(f, &ns, Some(y), opts)?;
    Ok(tail_from_table(table, sigma, m))
}

/// Both sups of the tail estimate from an already computed table.
pub fn tail_from_table(table: Vec<TableRow>, sigma: u32, m: usize) -> TailReport {
    let pow = |n: usize| (n as f64).powi(sigma as i32);
    let lhs = table.iter().filter(|r| r.n >= m).map(|r| pow(r.n) * r.constrained.as_ref().map_or(0.0, |c| c.error)).fold(0.0, f64::max);
    let rhs = table.iter().map(|r| pow(r.n) * r.unconstrained.error).fold(0.0, f64::max);
    TailReport { sigma, m, lhs, rhs, constant: Ratio::of(lhs, rhs), table, outside_hypotheses: sigma == 4 }
}
