//! Lebesgue–Stieltjes integration against nondecreasing integrators.
//!
//! A level-`d` partition of the domain splits every component into `2^d`
//! open dyadic cells plus the singleton atoms of the integrator. Open cells
//! carry the continuous part of `ΔL`, atoms carry their jumps, so a point mass
//! at `c` contributes exactly `f(c) · jump` to both sums. Cell extrema are
//! taken over the sampled grid points of the closed cell; since each level
//! refines the previous one, lower sums never decrease and upper sums never
//! increase with depth.
//!
//! Measures are half-open, `L((a, b]) = L(b) - L(a)`, matching right-continuous
//! step integrators.

use thiserror::Error;

pub const DEFAULT_DEPTH: u32 = 16;
pub const DEFAULT_TOL: f64 = 1e-4;
pub const MAX_FOLDS: usize = 4;
const MULTIVARIATE_CELL_BUDGET: u32 = 22;
const CONVOLUTION_BUDGET: usize = 1 << 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LsError {
    #[error("integrator is not nondecreasing: {0}")]
    NotMonotone(String),
    #[error("invalid domain: {0}")]
    BadDomain(String),
    #[error("fold count {0} outside 1..=4")]
    FoldCount(usize),
    #[error("integrand is not finite at u = {0}")]
    NonFinite(f64),
    #[error("upper-lower gap {gap} exceeds tolerance {tol} at depth {depth}")]
    NotConverged { gap: f64, tol: f64, depth: u32, value: f64 },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

/// A nondecreasing function `L` used as integrator.
#[derive(Debug, Clone, PartialEq)]
pub enum Integrator {
    Identity,
    Affine {
        slope: f64,
        intercept: f64,
    },
    /// Right-continuous jumps `(point, size)`.
    Step {
        jumps: Vec<(f64, f64)>,
    },
    /// `outer(inner(u))`.
    Compose(Box<Integrator>, Box<Integrator>),
}

impl Integrator {
    pub fn step(jumps: Vec<(f64, f64)>) -> Self {
        Integrator::Step { jumps }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Integrator::Identity => u,
            Integrator::Affine { slope, intercept } => slope * u + intercept,
            Integrator::Step { jumps } => jumps.iter().filter(|(c, _)| *c <= u).map(|(_, s)| s).sum(),
            Integrator::Compose(outer, inner) => outer.eval(inner.eval(u)),
        }
    }

    /// Left limit `L(u-)`.
    pub fn eval_left(&self, u: f64) -> f64 {
        match self {
            Integrator::Identity | Integrator::Affine { .. } => self.eval(u),
            Integrator::Step { jumps } => jumps.iter().filter(|(c, _)| *c < u).map(|(_, s)| s).sum(),
            Integrator::Compose(outer, inner) => {
                if inner.is_strictly_increasing() {
                    outer.eval_left(inner.eval_left(u))
                } else {
                    outer.eval(inner.eval_left(u))
                }
            }
        }
    }

    fn is_strictly_increasing(&self) -> bool {
        match self {
            Integrator::Identity => true,
            Integrator::Affine { slope, .. } => *slope > 0.0,
            Integrator::Step { .. } => false,
            Integrator::Compose(o, i) => o.is_strictly_increasing() && i.is_strictly_increasing(),
        }
    }

    fn inverse(&self, y: f64) -> Option<f64> {
        match self {
            Integrator::Identity => Some(y),
            Integrator::Affine { slope, intercept } if *slope > 0.0 => Some((y - intercept) / slope),
            Integrator::Compose(o, i) if self.is_strictly_increasing() => o.inverse(y).and_then(|v| i.inverse(v)),
            _ => None,
        }
    }

    fn candidate_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            Integrator::Identity | Integrator::Affine { .. } => Vec::new(),
            Integrator::Step { jumps } => jumps.iter().map(|(c, _)| *c).filter(|c| *c > lo && *c <= hi).collect(),
            Integrator::Compose(outer, inner) => {
                let mut pts = inner.candidate_points(lo, hi);
                if inner.is_strictly_increasing() {
                    let (a, b) = (inner.eval(lo), inner.eval(hi));
                    for y in outer.candidate_points(a, b) {
                        if let Some(u) = inner.inverse(y) {
                            if u > lo && u <= hi {
                                pts.push(u);
                            }
                        }
                    }
                }
                pts
            }
        }
    }

    /// Atoms `(c, L(c) - L(c-))` with `c ∈ (lo, hi]`, sorted by position.
    pub fn atoms(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mut pts = self.candidate_points(lo, hi);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts.into_iter().map(|c| (c, self.eval(c) - self.eval_left(c))).filter(|(_, j)| *j > 0.0).collect()
    }

    /// Structural check plus a 1024-point monotonicity sample on `[-1, 1]`.
    pub fn validate(&self) -> Result<(), LsError> {
        match self {
            Integrator::Identity => {}
            Integrator::Affine { slope, intercept } => {
                if !(slope.is_finite() && *slope >= 0.0 && intercept.is_finite()) {
                    return Err(LsError::NotMonotone(format!("affine slope {slope} must be finite and >= 0")));
                }
            }
            Integrator::Step { jumps } => {
                if let Some((c, s)) = jumps.iter().find(|(c, s)| !(c.is_finite() && s.is_finite() && *s > 0.0)) {
                    return Err(LsError::NotMonotone(format!("jump of size {s} at {c}")));
                }
            }
            Integrator::Compose(o, i) => {
                o.validate()?;
                i.validate()?;
            }
        }
        let mut prev = self.eval(-1.0);
        for j in 1..1024 {
            let v = self.eval(-1.0 + 2.0 * j as f64 / 1023.0);
            if v < prev {
                return Err(LsError::NotMonotone(format!("decreases near u = {}", -1.0 + 2.0 * j as f64 / 1023.0)));
            }
            prev = v;
        }
        Ok(())
    }
}

/// Finite union of closed intervals inside `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub intervals: Vec<(f64, f64)>,
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Self {
        Domain { intervals: vec![(a, b)] }
    }

    pub fn validate(&self) -> Result<(), LsError> {
        if self.intervals.is_empty() {
            return Err(LsError::BadDomain("no intervals".into()));
        }
        for &(a, b) in &self.intervals {
            if !(a < b) || a < -1.0 || b > 1.0 {
                return Err(LsError::BadDomain(format!("[{a}, {b}] must be nondegenerate and inside [-1, 1]")));
            }
        }
        let mut v = self.intervals.clone();
        v.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        if v.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(LsError::BadDomain("intervals overlap".into()));
        }
        Ok(())
    }
}

/// What is being integrated over `𝔻^i`.
pub enum Integrand<'a> {
    /// `f(u_coord)`, constant in the other coordinates.
    Univariate { f: &'a (dyn Fn(f64) -> f64 + Sync), coord: usize },
    /// `f(offset + u_1 + ... + u_i)`.
    CoordinateSum { f: &'a (dyn Fn(f64) -> f64 + Sync), offset: f64 },
    /// General `f(u_1, ..., u_i)`.
    Multivariate { f: &'a (dyn Fn(&[f64]) -> f64 + Sync) },
}

pub struct LsQuery<'a> {
    pub integrand: Integrand<'a>,
    pub integrators: Vec<Integrator>,
    pub domain: Domain,
    pub depth: u32,
    pub tol: f64,
}

impl<'a> LsQuery<'a> {
    /// One-fold query of `f` against `l` on `[a, b]`.
    pub fn univariate(f: &'a (dyn Fn(f64) -> f64 + Sync), l: Integrator, a: f64, b: f64) -> Self {
        LsQuery {
            integrand: Integrand::Univariate { f, coord: 0 },
            integrators: vec![l],
            domain: Domain::interval(a, b),
            depth: DEFAULT_DEPTH,
            tol: DEFAULT_TOL,
        }
    }

    pub fn with_depth(mut self, depth: u32) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Darboux sums of a query.
#[derive(Debug, Clone, PartialEq)]
pub struct LsOutcome {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    /// Depth actually reached (cost guards may stop earlier than requested).
    pub depth: u32,
    /// `(lower, upper)` per level `0..=depth`.
    pub levels: Vec<(f64, f64)>,
}

impl LsOutcome {
    fn from_levels(levels: Vec<(f64, f64)>) -> Self {
        let (lower, upper) = *levels.last().unwrap();
        LsOutcome { value: 0.5 * (lower + upper), lower, upper, gap: upper - lower, depth: levels.len() as u32 - 1, levels }
    }
}

/// One fold on one domain: open-cell masses, atoms and sample points at the finest level.
struct FoldGrid {
    /// Per component: finest grid points.
    points: Vec<Vec<f64>>,
    /// Per component: continuous mass of each finest open cell.
    masses: Vec<Vec<f64>>,
    atoms: Vec<(f64, f64)>,
    total: f64,
}

impl FoldGrid {
    fn new(l: &Integrator, domain: &Domain, depth: u32) -> Self {
        let n = 1usize << depth;
        let mut points = Vec::new();
        let mut masses = Vec::new();
        let mut atoms = Vec::new();
        let mut total = 0.0;
        for &(lo, hi) in &domain.intervals {
            let pts: Vec<f64> = (0..=n).map(|m| if m == n { hi } else { lo + (hi - lo) * m as f64 / n as f64 }).collect();
            let comp_atoms = l.atoms(lo, hi);
            let mut ms: Vec<f64> = pts.windows(2).map(|w| (l.eval_left(w[1]) - l.eval(w[0])).max(0.0)).collect();
            for &(c, j) in &comp_atoms {
                // Atoms strictly inside an open cell are moved to their singleton.
                let idx = ((c - lo) / (hi - lo) * n as f64).floor() as usize;
                let idx = idx.min(n - 1);
                if c > pts[idx] && c < pts[idx + 1] {
                    ms[idx] = (ms[idx] - j).max(0.0);
                }
            }
            total += l.eval(hi) - l.eval(lo);
            atoms.extend(comp_atoms);
            points.push(pts);
            masses.push(ms);
        }
        FoldGrid { points, masses, atoms, total }
    }
}

fn sample(f: &dyn Fn(f64) -> f64, u: f64) -> Result<f64, LsError> {
    let v = f(u);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(LsError::NonFinite(u))
    }
}

/// Min/max pyramid over cells; level `d` has `base << d` cells. Index `[d][cell]`.
fn pyramid(finest_min: Vec<f64>, finest_max: Vec<f64>, depth: u32) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut mins = vec![finest_min];
    let mut maxs = vec![finest_max];
    for _ in 0..depth {
        let lo = mins.last().unwrap();
        let hi = maxs.last().unwrap();
        let nm: Vec<f64> = lo.chunks(2).map(|c| c.iter().copied().fold(f64::INFINITY, f64::min)).collect();
        let nx: Vec<f64> = hi.chunks(2).map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        mins.push(nm);
        maxs.push(nx);
    }
    mins.reverse();
    maxs.reverse();
    (mins, maxs)
}

fn coarsen_sum(v: &[f64]) -> Vec<f64> {
    v.chunks(2).map(|c| c.iter().sum()).collect()
}

/// Per-level `(lower, upper)` for a univariate integrand against one fold.
fn univariate_levels(f: &dyn Fn(f64) -> f64, grid: &FoldGrid, depth: u32) -> Result<Vec<(f64, f64)>, LsError> {
    let mut atom_part = 0.0;
    for &(c, j) in &grid.atoms {
        atom_part += sample(f, c)? * j;
    }
    let mut per_level = vec![(atom_part, atom_part); depth as usize + 1];
    for (pts, ms) in grid.points.iter().zip(&grid.masses) {
        let vals = pts.iter().map(|&u| sample(f, u)).collect::<Result<Vec<_>, _>>()?;
        let fmin: Vec<f64> = vals.windows(2).map(|w| w[0].min(w[1])).collect();
        let fmax: Vec<f64> = vals.windows(2).map(|w| w[0].max(w[1])).collect();
        let (mins, maxs) = pyramid(fmin, fmax, depth);
        let mut mass = ms.clone();
        for d in (0..=depth as usize).rev() {
            let lo: f64 = mins[d].iter().zip(&mass).map(|(a, m)| a * m).sum();
            let hi: f64 = maxs[d].iter().zip(&mass).map(|(a, m)| a * m).sum();
            per_level[d].0 += lo;
            per_level[d].1 += hi;
            if d > 0 {
                mass = coarsen_sum(&mass);
            }
        }
    }
    Ok(per_level)
}

/// Number of `(i_1, ..., i_k) ∈ [0, n)^k` with sum `s`.
fn compositions(s: usize, n: usize, k: usize) -> f64 {
    let mut acc = 0.0;
    let mut j = 0;
    while j <= k && j * n <= s {
        let term = crate::fnspace::binomial(k, j) * crate::fnspace::binomial(s - j * n + k - 1, k - 1);
        if j % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
        j += 1;
    }
    acc
}

/// Common cell mass when all cells carry the same mass up to rounding.
fn uniform_mass(ms: &[f64]) -> Option<f64> {
    let mean = ms.iter().sum::<f64>() / ms.len() as f64;
    ms.iter().all(|m| (m - mean).abs() <= 1e-9 * mean.abs().max(1e-300)).then_some(mean)
}

fn coordinate_sum_levels(f: &dyn Fn(f64) -> f64, offset: f64, grids: &[FoldGrid], domain: &Domain, depth: u32) -> Result<Vec<(f64, f64)>, LsError> {
    let k = grids.len();
    let (lo, hi) = domain.intervals[0];
    let n = 1usize << depth;
    let width = hi - lo;
    let sum_points = k * n;
    let vals = (0..=sum_points).map(|m| sample(f, offset + k as f64 * lo + k as f64 * width * m as f64 / sum_points as f64)).collect::<Result<Vec<_>, _>>()?;
    let fmin: Vec<f64> = vals.windows(2).map(|w| w[0].min(w[1])).collect();
    let fmax: Vec<f64> = vals.windows(2).map(|w| w[0].max(w[1])).collect();
    let (mins, maxs) = pyramid(fmin, fmax, depth);
    let mut masses: Vec<Vec<f64>> = grids.iter().map(|g| g.masses[0].clone()).collect();
    let mut levels = vec![(0.0, 0.0); depth as usize + 1];
    for d in (0..=depth as usize).rev() {
        let nd = 1usize << d;
        let count = k * (nd - 1) + 1;
        let nu: Vec<f64> = match masses.iter().map(|m| uniform_mass(m)).collect::<Option<Vec<f64>>>() {
            Some(ms) => {
                let prod: f64 = ms.iter().product();
                (0..count).map(|s| prod * compositions(s, nd, k)).collect()
            }
            None => {
                if nd > CONVOLUTION_BUDGET {
                    // Too deep for direct convolution: restart the report at the guard level.
                    masses = masses.iter().map(|m| coarsen_sum(m)).collect();
                    continue;
                }
                let mut acc = masses[0].clone();
                for m in &masses[1..] {
                    let mut next = vec![0.0; acc.len() + m.len() - 1];
                    for (i, a) in acc.iter().enumerate() {
                        for (j, b) in m.iter().enumerate() {
                            next[i + j] += a * b;
                        }
                    }
                    acc = next;
                }
                acc
            }
        };
        let (mut lsum, mut usum) = (0.0, 0.0);
        for (s, w) in nu.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let wmin = mins[d][s..s + k].iter().copied().fold(f64::INFINITY, f64::min);
            let wmax = maxs[d][s..s + k].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            lsum += w * wmin;
            usum += w * wmax;
        }
        levels[d] = (lsum, usum);
        if d > 0 {
            masses = masses.iter().map(|m| coarsen_sum(m)).collect();
        }
    }
    // Levels skipped by the convolution guard are dropped from the top.
    while levels.len() > 1 && levels.last() == Some(&(0.0, 0.0)) && levels[levels.len() - 2] != (0.0, 0.0) {
        levels.pop();
    }
    Ok(levels)
}

fn multivariate_levels(f: &dyn Fn(&[f64]) -> f64, grids: &[FoldGrid], depth: u32) -> Result<Vec<(f64, f64)>, LsError> {
    let k = grids.len();
    // Flatten each fold: cells across components, and the two corner indices per cell.
    let mut cell_pts: Vec<Vec<(f64, f64)>> = Vec::with_capacity(k);
    let mut cell_mass: Vec<Vec<f64>> = Vec::with_capacity(k);
    for g in grids {
        let mut pts = Vec::new();
        let mut ms = Vec::new();
        for (p, m) in g.points.iter().zip(&g.masses) {
            pts.extend(p.windows(2).map(|w| (w[0], w[1])));
            ms.extend_from_slice(m);
        }
        cell_pts.push(pts);
        cell_mass.push(ms);
    }
    let n = cell_pts[0].len();
    let total = n.pow(k as u32);
    let mut fmin = vec![0.0; total];
    let mut fmax = vec![0.0; total];
    let mut idx = vec![0usize; k];
    let mut u = vec![0.0; k];
    for cell in 0..total {
        let mut rem = cell;
        for j in (0..k).rev() {
            idx[j] = rem % n;
            rem /= n;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for corner in 0..(1usize << k) {
            for j in 0..k {
                let (a, b) = cell_pts[j][idx[j]];
                u[j] = if corner >> j & 1 == 1 { b } else { a };
            }
            let v = f(&u);
            if !v.is_finite() {
                return Err(LsError::NonFinite(u[0]));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        fmin[cell] = lo;
        fmax[cell] = hi;
    }
    let mut levels = vec![(0.0, 0.0); depth as usize + 1];
    let mut nd = n;
    for d in (0..=depth as usize).rev() {
        let totald = nd.pow(k as u32);
        let (mut ls, mut us) = (0.0, 0.0);
        for cell in 0..totald {
            let mut rem = cell;
            let mut w = 1.0;
            for j in (0..k).rev() {
                w *= cell_mass[j][rem % nd];
                rem /= nd;
            }
            ls += w * fmin[cell];
            us += w * fmax[cell];
        }
        levels[d] = (ls, us);
        if d == 0 {
            break;
        }
        let nc = nd / 2;
        let totalc = nc.pow(k as u32);
        let mut cmin = vec![f64::INFINITY; totalc];
        let mut cmax = vec![f64::NEG_INFINITY; totalc];
        for cell in 0..totald {
            let mut rem = cell;
            let mut parent = 0;
            let mut stride = 1;
            for _ in 0..k {
                parent += (rem % nd / 2) * stride;
                rem /= nd;
                stride *= nc;
            }
            cmin[parent] = cmin[parent].min(fmin[cell]);
            cmax[parent] = cmax[parent].max(fmax[cell]);
        }
        fmin = cmin;
        fmax = cmax;
        for m in cell_mass.iter_mut() {
            *m = coarsen_sum(m);
        }
        nd = nc;
    }
    Ok(levels)
}

/// Lower/upper sums at every level up to the query depth, with no convergence check.
pub fn darboux(q: &LsQuery) -> Result<LsOutcome, LsError> {
    let folds = q.integrators.len();
    if folds == 0 || folds > MAX_FOLDS {
        return Err(LsError::FoldCount(folds));
    }
    q.domain.validate()?;
    for l in &q.integrators {
        l.validate()?;
    }
    let levels = match &q.integrand {
        Integrand::Univariate { f, coord } => {
            if *coord >= folds {
                return Err(LsError::Unsupported(format!("coordinate {coord} with {folds} folds")));
            }
            let grid = FoldGrid::new(&q.integrators[*coord], &q.domain, q.depth);
            let others: f64 = q.integrators.iter().enumerate().filter(|(j, _)| j != coord).map(|(_, l)| FoldGrid::new(l, &q.domain, 0).total).product();
            univariate_levels(*f, &grid, q.depth)?.into_iter().map(|(a, b)| (a * others, b * others)).collect()
        }
        Integrand::CoordinateSum { f, offset } => {
            if q.domain.intervals.len() != 1 {
                return Err(LsError::Unsupported("coordinate-sum integrands need a single interval".into()));
            }
            let grids: Vec<FoldGrid> = q.integrators.iter().map(|l| FoldGrid::new(l, &q.domain, q.depth)).collect();
            if grids.iter().any(|g| !g.atoms.is_empty()) {
                return Err(LsError::Unsupported("coordinate-sum integrands need continuous integrators".into()));
            }
            coordinate_sum_levels(*f, *offset, &grids, &q.domain, q.depth)?
        }
        Integrand::Multivariate { f } => {
            let comps = q.domain.intervals.len().next_power_of_two().trailing_zeros();
            let budget = (MULTIVARIATE_CELL_BUDGET / folds as u32).saturating_sub(comps);
            let depth = q.depth.min(budget);
            let grids: Vec<FoldGrid> = q.integrators.iter().map(|l| FoldGrid::new(l, &q.domain, depth)).collect();
            if grids.iter().any(|g| !g.atoms.is_empty()) {
                return Err(LsError::Unsupported("multivariate integrands need continuous integrators".into()));
            }
            if q.domain.intervals.len() > 1 && depth == 0 {
                return Err(LsError::Unsupported("domain has too many components for the cell budget".into()));
            }
            multivariate_levels(*f, &grids, depth)?
        }
    };
    Ok(LsOutcome::from_levels(levels))
}

/// One-fold integral; errors when the final gap exceeds the tolerance.
pub fn ls_integral(q: &LsQuery) -> Result<LsOutcome, LsError> {
    if q.integrators.len() != 1 {
        return Err(LsError::FoldCount(q.integrators.len()));
    }
    converged(q)
}

/// `i`-fold product construct over `𝔻^i`.
pub fn iterated_ls_integral(q: &LsQuery) -> Result<LsOutcome, LsError> {
    converged(q)
}

fn converged(q: &LsQuery) -> Result<LsOutcome, LsError> {
    let out = darboux(q)?;
    if out.gap > q.tol {
        return Err(LsError::NotConverged { gap: out.gap, tol: q.tol, depth: out.depth, value: out.value });
    }
    Ok(out)
}

/// Membership test for the integrable class: `(gap <= tol, gap)`. Never errors;
/// an invalid query reports `(false, inf)`.
pub fn is_ls_integrable(q: &LsQuery, tol: f64) -> (bool, f64) {
    match darboux(q) {
        Ok(out) => (out.gap <= tol, out.gap),
        Err(_) => (false, f64::INFINITY),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearityReport {
    pub scaling_residual: f64,
    pub scaling_tolerance: f64,
    pub additivity_residual: f64,
    pub additivity_tolerance: f64,
    pub sum_value: f64,
}

impl LinearityReport {
    /// Residuals against `factor` times the combined gaps.
    pub fn holds(&self, factor: f64) -> bool {
        self.scaling_residual <= factor * self.scaling_tolerance + 1e-12 && self.additivity_residual <= factor * self.additivity_tolerance + 1e-12
    }
}

/// Scaling and additivity of the one-fold integral, using `template`'s
/// integrator, domain and depth.
pub fn ls_linearity_check(f1: &(dyn Fn(f64) -> f64 + Sync), f2: &(dyn Fn(f64) -> f64 + Sync), v: f64, template: &LsQuery) -> Result<LinearityReport, LsError> {
    if !(v > 0.0) {
        return Err(LsError::Unsupported(format!("scaling factor {v} must be positive")));
    }
    let run = |f: &(dyn Fn(f64) -> f64 + Sync)| {
        darboux(&LsQuery {
            integrand: Integrand::Univariate { f, coord: 0 },
            integrators: template.integrators.clone(),
            domain: template.domain.clone(),
            depth: template.depth,
            tol: template.tol,
        })
    };
    let vf1 = move |u: f64| v * f1(u);
    let sum = move |u: f64| f1(u) + f2(u);
    let i1 = run(f1)?;
    let i2 = run(f2)?;
    let iv = run(&vf1)?;
    let is = run(&sum)?;
    for o in [&i1, &i2, &iv, &is] {
        if o.gap > template.tol {
            return Err(LsError::NotConverged { gap: o.gap, tol: template.tol, depth: o.depth, value: o.value });
        }
    }
    Ok(LinearityReport {
        scaling_residual: (iv.value - v * i1.value).abs(),
        scaling_tolerance: iv.gap + v * i1.gap,
        additivity_residual: (is.value - i1.value - i2.value).abs(),
        additivity_tolerance: is.gap + i1.gap + i2.gap,
        sum_value: is.value,
    })
}

/// `∫_{[-h/2, h/2]^k} g(x + u_1 + ... + u_k) du` with identity integrators.
/// For `g = f^(k)` this is `Δ_h^k f(x)`.
pub fn difference_via_iterated_integral(g: &(dyn Fn(f64) -> f64 + Sync), k: usize, h: f64, x: f64, depth: u32) -> Result<LsOutcome, LsError> {
    if k == 0 {
        let v = g(x);
        return Ok(LsOutcome::from_levels(vec![(v, v)]));
    }
    darboux(&LsQuery {
        integrand: Integrand::CoordinateSum { f: g, offset: x },
        integrators: vec![Integrator::Identity; k],
        domain: Domain::interval(-h / 2.0, h / 2.0),
        depth,
        tol: f64::INFINITY,
    })
}

/// `sign(sin(2π · 10^6 u))` mapped to `{0, 1}`; a bounded, wildly oscillating
/// stand-in for the indicator of the rationals.
pub fn square_wave_proxy(u: f64) -> f64 {
    if (2.0 * std::f64::consts::PI * 1e6 * u).sin() >= 0.0 {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_integral_of_u() {
        let f = |u: f64| u;
        let out = ls_integral(&LsQuery::univariate(&f, Integrator::Identity, 0.0, 1.0)).unwrap();
        assert!((out.value - 0.5).abs() < 1e-6);
        assert!(out.gap <= 1e-4);
    }

    #[test]
    fn point_mass_returns_value_at_jump() {
        let f = |u: f64| u;
        let l = Integrator::step(vec![(0.5, 1.0)]);
        let out = ls_integral(&LsQuery::univariate(&f, l, 0.0, 1.0)).unwrap();
        assert!((out.value - 0.5).abs() < 1e-12);
        assert_eq!(out.gap, 0.0);
    }

    #[test]
    fn constant_integrand_gives_integrator_increment() {
        let f = |_: f64| 1.0;
        let l = Integrator::Compose(Box::new(Integrator::Affine { slope: 2.0, intercept: 1.0 }), Box::new(Integrator::step(vec![(-0.2, 0.5), (0.3, 1.5)])));
        let out = ls_integral(&LsQuery::univariate(&f, l.clone(), -0.5, 0.8)).unwrap();
        assert!((out.value - (l.eval(0.8) - l.eval(-0.5))).abs() < 1e-12);
        assert!((out.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn composed_atoms_pull_back_through_affine_inner() {
        let l = Integrator::Compose(Box::new(Integrator::step(vec![(0.0, 2.0)])), Box::new(Integrator::Affine { slope: 2.0, intercept: -0.5 }));
        assert_eq!(l.atoms(-1.0, 1.0), vec![(0.25, 2.0)]);
        let f = |u: f64| u * u;
        let out = ls_integral(&LsQuery::univariate(&f, l, 0.0, 1.0)).unwrap();
        assert!((out.value - 2.0 * 0.0625).abs() < 1e-12);
    }

    #[test]
    fn rejects_decreasing_integrator_and_bad_folds() {
        let f = |u: f64| u;
        let q = LsQuery::univariate(&f, Integrator::Affine { slope: -1.0, intercept: 0.0 }, 0.0, 1.0);
        assert!(matches!(ls_integral(&q), Err(LsError::NotMonotone(_))));
        let q = LsQuery { integrators: vec![Integrator::Identity; 5], ..LsQuery::univariate(&f, Integrator::Identity, 0.0, 1.0) };
        assert!(matches!(iterated_ls_integral(&q), Err(LsError::FoldCount(5))));
    }

    #[test]
    fn two_fold_examples() {
        let one = |_: &[f64]| 1.0;
        let q = LsQuery {
            integrand: Integrand::Multivariate { f: &one },
            integrators: vec![Integrator::Identity; 2],
            domain: Domain::interval(0.0, 1.0),
            depth: 8,
            tol: 1e-4,
        };
        assert!((iterated_ls_integral(&q).unwrap().value - 1.0).abs() < 1e-12);

        let f = |u: f64| u;
        let q = LsQuery {
            integrand: Integrand::Univariate { f: &f, coord: 0 },
            integrators: vec![Integrator::Identity; 2],
            domain: Domain::interval(0.0, 1.0),
            depth: 16,
            tol: 1e-4,
        };
        assert!((iterated_ls_integral(&q).unwrap().value - 0.5).abs() < 1e-6);

        let c = |_: f64| 3.0;
        let q = LsQuery {
            integrand: Integrand::Univariate { f: &c, coord: 0 },
            integrators: vec![Integrator::step(vec![(0.1, 2.0)]), Integrator::step(vec![(0.2, 0.5), (0.7, 1.0)])],
            domain: Domain::interval(0.0, 1.0),
            depth: 6,
            tol: 1e-4,
        };
        assert!((iterated_ls_integral(&q).unwrap().value - 3.0 * 2.0 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn multivariate_sum_matches_coordinate_sum_path() {
        let g = |s: f64| (s * 3.0).sin();
        let gm = |u: &[f64]| (3.0 * (0.1 + u[0] + u[1])).sin();
        let a = difference_via_iterated_integral(&g, 2, 0.4, 0.1, 8).unwrap();
        let b = darboux(&LsQuery {
            integrand: Integrand::Multivariate { f: &gm },
            integrators: vec![Integrator::Identity; 2],
            domain: Domain::interval(-0.2, 0.2),
            depth: 8,
            tol: 1.0,
        })
        .unwrap();
        assert!((a.value - b.value).abs() < 1e-5);
    }

    #[test]
    fn sums_are_monotone_in_depth() {
        let f = |u: f64| (5.0 * u).cos() + u.abs();
        let l = Integrator::Compose(Box::new(Integrator::Identity), Box::new(Integrator::step(vec![(0.3, 0.2)])));
        let q = LsQuery::univariate(&f, Integrator::Affine { slope: 1.5, intercept: 0.0 }, -1.0, 1.0).with_depth(12);
        for q in [q, LsQuery::univariate(&f, l, -1.0, 1.0).with_depth(12)] {
            let out = darboux(&q).unwrap();
            for w in out.levels.windows(2) {
                assert!(w[1].0 >= w[0].0 - 1e-14 * w[0].0.abs().max(1.0));
                assert!(w[1].1 <= w[0].1 + 1e-14 * w[0].1.abs().max(1.0));
            }
        }
    }

    #[test]
    fn square_wave_is_not_integrable() {
        let f = square_wave_proxy;
        let q = LsQuery::univariate(&f, Integrator::Identity, 0.0, 1.0);
        let (ok, gap) = is_ls_integrable(&q, 1e-3);
        assert!(!ok);
        assert!(gap > 0.5);
        let c = |u: f64| u.sin();
        let q = LsQuery::univariate(&c, Integrator::Affine { slope: 0.0, intercept: 2.0 }, 0.0, 1.0);
        let (ok, gap) = is_ls_integrable(&q, 1e-3);
        assert!(ok && gap == 0.0);
    }

    #[test]
    fn linearity_examples() {
        let f1 = |u: f64| u;
        let f2 = |u: f64| 1.0 - u;
        let t = LsQuery::univariate(&f1, Integrator::Identity, 0.0, 1.0);
        let r = ls_linearity_check(&f1, &f2, 3.0, &t).unwrap();
        assert!(r.scaling_residual <= 2e-4 && r.additivity_residual <= 2e-4);
        assert!((r.sum_value - 1.0).abs() < 1e-12);
        let r = ls_linearity_check(&f1, &f2, 1.0, &t).unwrap();
        assert!(r.scaling_residual < 1e-14);
    }

    #[test]
    fn compositions_count() {
        // k = 2, n = 3: sums 0..4 have counts 1, 2, 3, 2, 1.
        let c: Vec<f64> = (0..5).map(|s| compositions(s, 3, 2)).collect();
        assert_eq!(c, vec![1.0, 2.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn iterated_integral_reproduces_difference() {
        // Δ_h^2 of sin at x: g = -sin.
        let g = |s: f64| -s.sin();
        let (h, x) = (0.3f64, 0.2f64);
        let exact = (x + h).sin() - 2.0 * x.sin() + (x - h).sin();
        let out = difference_via_iterated_integral(&g, 2, h, x, 12).unwrap();
        assert!((out.value - exact).abs() < 1e-7, "{} vs {exact}", out.value);
    }
}
