use std::fmt;

/// Binomial coefficient `C(n, k)` as `f64`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Falling factorial `γ (γ-1) ... (γ-r+1)`.
pub fn falling_factorial(gamma: f64, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (gamma - i as f64))
}

#[inline]
fn sign(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn is_integer(v: f64) -> bool {
    v.fract() == 0.0 && v.is_finite()
}

/// A real function on `[-1, 1]` that the moduli and quadrature code can consume.
///
/// `smoothness` is the largest `r` for which `f^(r)` is defined everywhere on
/// `[-1, 1]`; `None` means unbounded.
pub trait RealFunction: Send + Sync {
    fn value(&self, x: f64) -> f64;

    /// The `order`-th derivative as a new function object.
    fn derived(&self, order: usize) -> Box<dyn RealFunction>;

    fn smoothness(&self) -> Option<usize>;

    /// `Δ_step^k f(x)` without any domain cutoff.
    fn difference(&self, k: usize, step: f64, x: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..=k {
            let c = binomial(k, i);
            let node = x + (2.0 * i as f64 - k as f64) * step / 2.0;
            let term = c * self.value(node.clamp(-1.0, 1.0));
            if (k - i) % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        acc
    }

    fn label(&self) -> String {
        "f".to_string()
    }
}

/// `Δ_h^k f(x)`, which is zero unless `x ± kh/2` both lie in `[-1, 1]`.
pub fn symmetric_difference(f: &dyn RealFunction, k: usize, h: f64, x: f64) -> f64 {
    let half = k as f64 * h / 2.0;
    if x - half < -1.0 - 1e-12 || x + half > 1.0 + 1e-12 {
        return 0.0;
    }
    f.difference(k, h, x)
}

/// Closed-form test functions with exact symbolic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionExpr {
    /// `Σ c_i x^i`, coefficients in increasing degree.
    Poly(Vec<f64>),
    /// `exp(a x)`.
    Exp {
        rate: f64,
    },
    /// `|x - c|^γ`.
    AbsPow {
        center: f64,
        exponent: f64,
    },
    /// `sign(x - c) |x - c|^γ`; appears as the derivative of `AbsPow`.
    SignedPow {
        center: f64,
        exponent: f64,
    },
    /// `(x - c)_+^m`.
    TruncPow {
        center: f64,
        exponent: f64,
    },
    Scale(f64, Box<FunctionExpr>),
    Sum(Vec<FunctionExpr>),
}

impl FunctionExpr {
    pub fn poly(coeffs: &[f64]) -> Self {
        FunctionExpr::Poly(coeffs.to_vec())
    }

    /// `x^m`.
    pub fn monomial(m: usize) -> Self {
        let mut c = vec![0.0; m + 1];
        c[m] = 1.0;
        FunctionExpr::Poly(c)
    }

    pub fn exp(rate: f64) -> Self {
        FunctionExpr::Exp { rate }
    }

    pub fn abs_pow(center: f64, exponent: f64) -> Self {
        FunctionExpr::AbsPow { center, exponent }
    }

    pub fn trunc_pow(center: f64, exponent: f64) -> Self {
        FunctionExpr::TruncPow { center, exponent }
    }

    pub fn zero() -> Self {
        FunctionExpr::Poly(Vec::new())
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_derivative(0, x)
    }

    /// `f^(r)(x)` in closed form.
    pub fn eval_derivative(&self, r: usize, x: f64) -> f64 {
        match self {
            FunctionExpr::Poly(c) => {
                if r >= c.len() {
                    return 0.0;
                }
                let mut acc = 0.0;
                for m in (r..c.len()).rev() {
                    acc = acc * x + c[m] * falling_factorial(m as f64, r);
                }
                acc
            }
            FunctionExpr::Exp { rate } => rate.powi(r as i32) * (rate * x).exp(),
            FunctionExpr::AbsPow { center, exponent } => {
                let ff = falling_factorial(*exponent, r);
                if ff == 0.0 {
                    return 0.0;
                }
                let u = x - center;
                let s = if r % 2 == 0 { 1.0 } else { sign(u) };
                ff * s * u.abs().powf(exponent - r as f64)
            }
            FunctionExpr::SignedPow { center, exponent } => {
                let ff = falling_factorial(*exponent, r);
                if ff == 0.0 {
                    return 0.0;
                }
                let u = x - center;
                let s = if r % 2 == 1 { 1.0 } else { sign(u) };
                ff * s * u.abs().powf(exponent - r as f64)
            }
            FunctionExpr::TruncPow { center, exponent } => {
                let u = x - center;
                if u <= 0.0 {
                    return 0.0;
                }
                let ff = falling_factorial(*exponent, r);
                if ff == 0.0 {
                    return 0.0;
                }
                ff * u.powf(exponent - r as f64)
            }
            FunctionExpr::Scale(a, inner) => a * inner.eval_derivative(r, x),
            FunctionExpr::Sum(terms) => terms.iter().map(|t| t.eval_derivative(r, x)).sum(),
        }
    }

    fn derive_once(&self) -> FunctionExpr {
        match self {
            FunctionExpr::Poly(c) => {
                if c.len() <= 1 {
                    return FunctionExpr::zero();
                }
                FunctionExpr::Poly(c.iter().enumerate().skip(1).map(|(m, v)| m as f64 * v).collect())
            }
            FunctionExpr::Exp { rate } => scale(*rate, self.clone()),
            FunctionExpr::AbsPow { center, exponent } => {
                if *exponent == 0.0 {
                    return FunctionExpr::zero();
                }
                scale(*exponent, FunctionExpr::SignedPow { center: *center, exponent: exponent - 1.0 })
            }
            FunctionExpr::SignedPow { center, exponent } => {
                if *exponent == 0.0 {
                    return FunctionExpr::zero();
                }
                scale(*exponent, FunctionExpr::AbsPow { center: *center, exponent: exponent - 1.0 })
            }
            FunctionExpr::TruncPow { center, exponent } => {
                if *exponent == 0.0 {
                    return FunctionExpr::zero();
                }
                scale(*exponent, FunctionExpr::TruncPow { center: *center, exponent: exponent - 1.0 })
            }
            FunctionExpr::Scale(a, inner) => scale(*a, inner.derive_once()),
            FunctionExpr::Sum(terms) => FunctionExpr::Sum(terms.iter().map(|t| t.derive_once()).collect()),
        }
    }

    /// Symbolic `r`-th derivative; `derivative(0)` is a clone.
    pub fn derivative(&self, r: usize) -> FunctionExpr {
        let mut out = self.clone();
        for _ in 0..r {
            out = out.derive_once();
        }
        out
    }

    /// Largest `r` such that `f^(r)` exists everywhere; `None` when unbounded.
    pub fn smoothness_order(&self) -> Option<usize> {
        fn power(exponent: f64, even_is_poly: bool) -> Option<usize> {
            if is_integer(exponent) && exponent >= 0.0 {
                let m = exponent as i64;
                if (m % 2 == 0) == even_is_poly {
                    None
                } else {
                    Some((m - 1).max(0) as usize)
                }
            } else {
                Some(exponent.max(0.0).floor() as usize)
            }
        }
        match self {
            FunctionExpr::Poly(_) | FunctionExpr::Exp { .. } => None,
            FunctionExpr::AbsPow { exponent, .. } => power(*exponent, true),
            FunctionExpr::SignedPow { exponent, .. } => power(*exponent, false),
            FunctionExpr::TruncPow { exponent, .. } => {
                if is_integer(*exponent) {
                    Some((*exponent as i64 - 1).max(0) as usize)
                } else {
                    Some(exponent.max(0.0).floor() as usize)
                }
            }
            FunctionExpr::Scale(_, inner) => inner.smoothness_order(),
            FunctionExpr::Sum(terms) => terms.iter().filter_map(|t| t.smoothness_order()).min(),
        }
    }

    /// Monomial coefficients when the expression is a polynomial.
    pub fn as_polynomial(&self) -> Option<Vec<f64>> {
        fn shifted_power(center: f64, m: usize) -> Vec<f64> {
            (0..=m).map(|i| binomial(m, i) * (-center).powi((m - i) as i32)).collect()
        }
        match self {
            FunctionExpr::Poly(c) => Some(c.clone()),
            FunctionExpr::AbsPow { center, exponent } if is_integer(*exponent) && *exponent >= 0.0 => {
                let m = *exponent as usize;
                (m % 2 == 0).then(|| shifted_power(*center, m))
            }
            FunctionExpr::SignedPow { center, exponent } if is_integer(*exponent) && *exponent >= 0.0 => {
                let m = *exponent as usize;
                (m % 2 == 1).then(|| shifted_power(*center, m))
            }
            FunctionExpr::Scale(a, inner) => inner.as_polynomial().map(|c| c.iter().map(|v| a * v).collect()),
            FunctionExpr::Sum(terms) => {
                let mut acc: Vec<f64> = Vec::new();
                for t in terms {
                    let c = t.as_polynomial()?;
                    if c.len() > acc.len() {
                        acc.resize(c.len(), 0.0);
                    }
                    for (a, v) in acc.iter_mut().zip(c) {
                        *a += v;
                    }
                }
                Some(acc)
            }
            _ => None,
        }
    }

    /// Wraps the expression with a cached polynomial form for exact differences.
    pub fn prepare(&self) -> Prepared {
        Prepared::new(self.clone())
    }
}

fn scale(a: f64, inner: FunctionExpr) -> FunctionExpr {
    match inner {
        FunctionExpr::Scale(b, f) => scale(a * b, *f),
        FunctionExpr::Poly(c) => FunctionExpr::Poly(c.into_iter().map(|v| a * v).collect()),
        other if a == 1.0 => other,
        other => FunctionExpr::Scale(a, Box::new(other)),
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl fmt::Display for FunctionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionExpr::Poly(c) => {
                let parts: Vec<String> = c.iter().map(|v| fmt_num(*v)).collect();
                write!(f, "poly:{}", parts.join(" "))
            }
            FunctionExpr::Exp { rate } => write!(f, "exp:{}", fmt_num(*rate)),
            FunctionExpr::AbsPow { center, exponent } => write!(f, "abspow:{} {}", fmt_num(*center), fmt_num(*exponent)),
            FunctionExpr::SignedPow { center, exponent } => {
                write!(f, "signedpow:{} {}", fmt_num(*center), fmt_num(*exponent))
            }
            FunctionExpr::TruncPow { center, exponent } => {
                write!(f, "truncpow:{} {}", fmt_num(*center), fmt_num(*exponent))
            }
            FunctionExpr::Scale(a, inner) => write!(f, "{}*({inner})", fmt_num(*a)),
            FunctionExpr::Sum(terms) => {
                let parts: Vec<String> = terms.iter().map(|t| format!("({t})")).collect();
                write!(f, "{}", parts.join("+"))
            }
        }
    }
}

impl RealFunction for FunctionExpr {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn derived(&self, order: usize) -> Box<dyn RealFunction> {
        Box::new(Prepared::new(self.derivative(order)))
    }

    fn smoothness(&self) -> Option<usize> {
        self.smoothness_order()
    }

    fn label(&self) -> String {
        self.to_string()
    }
}

/// A [`FunctionExpr`] with its polynomial coefficients cached.
///
/// Polynomial differences are evaluated through the Taylor expansion
/// `Δ_s^k g(x) = Σ_{m>=k} g^(m)(x)/m! · s^m · c_{k,m}` with
/// `c_{k,m} = Σ_i C(k,i) (-1)^(k-i) ((2i-k)/2)^m`, which vanishes for
/// `m < k`, so polynomials of degree below `k` are annihilated exactly.
#[derive(Debug, Clone)]
pub struct Prepared {
    expr: FunctionExpr,
    poly: Option<Vec<f64>>,
}

impl Prepared {
    pub fn new(expr: FunctionExpr) -> Self {
        let poly = expr.as_polynomial().map(|mut c| {
            while c.last() == Some(&0.0) {
                c.pop();
            }
            c
        });
        Prepared { expr, poly }
    }

    pub fn expr(&self) -> &FunctionExpr {
        &self.expr
    }
}

fn taylor_difference(c: &[f64], k: usize, step: f64, x: f64) -> f64 {
    let d = c.len();
    if d <= k {
        return 0.0;
    }
    // Taylor coefficients at x by repeated synthetic division.
    let mut a = c.to_vec();
    for j in 0..d {
        for i in (j..d - 1).rev() {
            a[i] += x * a[i + 1];
        }
    }
    let mut acc = 0.0;
    for (m, am) in a.iter().enumerate().skip(k) {
        if (m - k) % 2 == 1 || *am == 0.0 {
            continue;
        }
        let mut ckm = 0.0;
        for i in 0..=k {
            let term = binomial(k, i) * ((2.0 * i as f64 - k as f64) / 2.0).powi(m as i32);
            if (k - i) % 2 == 0 {
                ckm += term;
            } else {
                ckm -= term;
            }
        }
        acc += am * step.powi(m as i32) * ckm;
    }
    acc
}

impl RealFunction for Prepared {
    fn value(&self, x: f64) -> f64 {
        self.expr.eval(x)
    }

    fn derived(&self, order: usize) -> Box<dyn RealFunction> {
        Box::new(Prepared::new(self.expr.derivative(order)))
    }

    fn smoothness(&self) -> Option<usize> {
        self.expr.smoothness_order()
    }

    fn difference(&self, k: usize, step: f64, x: f64) -> f64 {
        match &self.poly {
            Some(c) => taylor_difference(c, k, step, x),
            None => {
                let mut acc = 0.0;
                for i in 0..=k {
                    let node = (x + (2.0 * i as f64 - k as f64) * step / 2.0).clamp(-1.0, 1.0);
                    let term = binomial(k, i) * self.expr.eval(node);
                    if (k - i) % 2 == 0 {
                        acc += term;
                    } else {
                        acc -= term;
                    }
                }
                acc
            }
        }
    }

    fn label(&self) -> String {
        self.expr.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn suite() -> Vec<FunctionExpr> {
        vec![
            FunctionExpr::poly(&[1.0, -2.0, 0.5, 3.0]),
            FunctionExpr::exp(1.0),
            FunctionExpr::exp(-0.7),
            FunctionExpr::abs_pow(0.0, 3.5),
            FunctionExpr::abs_pow(0.1, 5.0),
            FunctionExpr::trunc_pow(0.3, 4.0),
            FunctionExpr::Sum(vec![FunctionExpr::monomial(4), FunctionExpr::Scale(-1.0, Box::new(FunctionExpr::monomial(2)))]),
        ]
    }

    #[test]
    fn derivative_zero_is_identity() {
        for f in suite() {
            assert_eq!(f.derivative(0), f);
        }
    }

    #[test]
    fn closed_form_matches_finite_differences() {
        // Points avoid the kinks at 0, 0.1 and 0.3.
        let xs: Vec<f64> = (0..101).map(|j| -1.0 + 2.0 * (j as f64 + 1.0) / 103.0).collect();
        let h = 1e-5;
        for f in suite() {
            let s = f.smoothness_order().unwrap_or(4).min(4);
            for r in 0..s {
                for &x in &xs {
                    let fd = (f.eval_derivative(r, x + h) - f.eval_derivative(r, x - h)) / (2.0 * h);
                    let exact = f.eval_derivative(r + 1, x);
                    assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "{f} r={r} x={x}: fd={fd} exact={exact}");
                }
            }
        }
    }

    #[test]
    fn symbolic_and_pointwise_derivatives_agree() {
        for f in suite() {
            for r in 0..4 {
                let g = f.derivative(r);
                for j in 0..50 {
                    let x = -0.98 + 0.04 * j as f64 + 0.001;
                    let a = g.eval(x);
                    let b = f.eval_derivative(r, x);
                    assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{f} r={r} x={x}");
                }
            }
        }
    }

    #[test]
    fn smoothness_rules() {
        assert_eq!(FunctionExpr::abs_pow(0.0, 3.5).smoothness_order(), Some(3));
        assert_eq!(FunctionExpr::abs_pow(0.0, 3.0).smoothness_order(), Some(2));
        assert_eq!(FunctionExpr::abs_pow(0.0, 4.0).smoothness_order(), None);
        assert_eq!(FunctionExpr::trunc_pow(0.3, 4.0).smoothness_order(), Some(3));
        assert_eq!(FunctionExpr::exp(1.0).smoothness_order(), None);
        assert_eq!(FunctionExpr::abs_pow(0.0, 3.5).derivative(2).smoothness_order(), Some(1));
    }

    #[test]
    fn x_squared_second_difference() {
        let f = FunctionExpr::monomial(2).prepare();
        for &h in &[0.1, 0.3, 0.01] {
            let d = symmetric_difference(&f, 2, h, 0.2);
            assert!((d - 2.0 * h * h).abs() < 1e-14);
        }
        assert_eq!(symmetric_difference(&f, 2, 0.5, 0.9), 0.0);
    }

    #[test]
    fn taylor_and_binomial_differences_agree() {
        let f = FunctionExpr::poly(&[0.3, -1.0, 2.0, 0.5, -0.25, 1.5]);
        let p = f.prepare();
        for k in 1..=4 {
            for j in 0..20 {
                let x = -0.5 + 0.05 * j as f64;
                let h = 0.07;
                let a = p.difference(k, h, x);
                let b = RealFunction::difference(&f, k, h, x);
                assert!((a - b).abs() < 1e-12, "k={k} x={x}: {a} vs {b}");
            }
        }
    }

    proptest! {
        #[test]
        fn polynomials_below_degree_k_are_annihilated(
            coeffs in proptest::collection::vec(-5.0f64..5.0, 1..4),
            k in 1usize..5,
            x in -0.5f64..0.5,
            h in 0.0f64..0.25,
        ) {
            prop_assume!(coeffs.len() <= k);
            let p = FunctionExpr::Poly(coeffs).prepare();
            prop_assert!(symmetric_difference(&p, k, h, x).abs() <= 1e-10);
        }

        #[test]
        fn difference_of_x_to_k_is_constant(k in 1usize..6, x in -0.3f64..0.3, h in 0.0f64..0.1) {
            let p = FunctionExpr::monomial(k).prepare();
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            let expected = fact * h.powi(k as i32);
            prop_assert!((symmetric_difference(&p, k, h, x) - expected).abs() <= 1e-12 * (1.0 + expected));
        }
    }
}
