//! Chebyshev series helpers on `[-1, 1]`.

/// `Σ c_j T_j(t)` by Clenshaw's recurrence.
pub fn eval(c: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &cj in c.iter().skip(1).rev() {
        let b0 = cj + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c.first().copied().unwrap_or(0.0) + t * b1 - b2
}

/// Coefficients of the derivative series.
pub fn derivative(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n <= 1 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n - 1];
    for j in (1..n).rev() {
        let next = if j + 1 < n - 1 { d[j + 1] } else { 0.0 };
        let v = next + 2.0 * j as f64 * c[j];
        d[j - 1] = v;
    }
    d[0] /= 2.0;
    d
}

/// Derivative of order `r` of the series.
pub fn derivative_n(c: &[f64], r: usize) -> Vec<f64> {
    let mut out = c.to_vec();
    for _ in 0..r {
        out = derivative(&out);
    }
    out
}

/// `T_0^(r)(t), ..., T_n^(r)(t)`.
pub fn basis_derivatives(n: usize, r: usize, t: f64) -> Vec<f64> {
    let mut prev: Vec<f64> = Vec::new();
    for order in 0..=r {
        let mut cur = vec![0.0; n + 1];
        if order == 0 {
            cur[0] = 1.0;
        }
        if n >= 1 {
            cur[1] = match order {
                0 => t,
                1 => 1.0,
                _ => 0.0,
            };
        }
        for j in 1..n {
            let lower = if order > 0 { 2.0 * order as f64 * prev[j] } else { 0.0 };
            cur[j + 1] = lower + 2.0 * t * cur[j] - cur[j - 1];
        }
        prev = cur;
    }
    prev
}

/// Converts monomial coefficients (increasing degree) to Chebyshev coefficients.
pub fn from_monomial(m: &[f64]) -> Vec<f64> {
    let n = m.len();
    if n == 0 {
        return vec![0.0];
    }
    // Horner in the Chebyshev basis: c <- c * t + m_k.
    let mut c = vec![0.0; n];
    for k in (0..n).rev() {
        let mut next = vec![0.0; n];
        for (j, &cj) in c.iter().enumerate() {
            if cj == 0.0 {
                continue;
            }
            if j == 0 {
                if n > 1 {
                    next[1] += cj;
                }
            } else {
                next[j - 1] += cj / 2.0;
                if j + 1 < n {
                    next[j + 1] += cj / 2.0;
                }
            }
        }
        next[0] += m[k];
        c = next;
    }
    c
}

/// Chebyshev extrema `-cos(jπ/n)`, `j = 0..=n`, in increasing order.
pub fn extrema(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    (0..=n).map(|j| crate::fnspace::chebyshev_knot(n, j as i64)).collect()
}

/// Chebyshev points of the first kind, `n` of them, increasing.
pub fn first_kind(n: usize) -> Vec<f64> {
    (0..n).map(|j| -((2 * j + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos()).collect()
}

/// A Chebyshev series on `[-1, 1]` as a [`RealFunction`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChebSeries(pub Vec<f64>);

impl crate::fnspace::RealFunction for ChebSeries {
    fn value(&self, x: f64) -> f64 {
        eval(&self.0, x)
    }

    fn derived(&self, order: usize) -> Box<dyn crate::fnspace::RealFunction> {
        Box::new(ChebSeries(derivative_n(&self.0, order)))
    }

    fn smoothness(&self) -> Option<usize> {
        None
    }

    fn label(&self) -> String {
        format!("cheb({} terms)", self.0.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clenshaw_matches_basis() {
        let c = [0.3, -1.0, 0.5, 2.0, -0.7];
        for j in 0..21 {
            let t = -1.0 + 0.1 * j as f64;
            let b = basis_derivatives(4, 0, t);
            let direct: f64 = c.iter().zip(&b).map(|(a, b)| a * b).sum();
            assert!((eval(&c, t) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_recurrence_matches_series_derivative() {
        let c = [0.3, -1.0, 0.5, 2.0, -0.7, 0.25];
        for r in 0..4 {
            let d = derivative_n(&c, r);
            for j in 0..21 {
                let t = -1.0 + 0.1 * j as f64;
                let b = basis_derivatives(5, r, t);
                let direct: f64 = c.iter().zip(&b).map(|(a, b)| a * b).sum();
                assert!((eval(&d, t) - direct).abs() < 1e-10 * (1.0 + direct.abs()), "r={r} t={t}");
            }
        }
    }

    #[test]
    fn monomial_conversion() {
        // x^3 = (3 T_1 + T_3) / 4
        let c = from_monomial(&[0.0, 0.0, 0.0, 1.0]);
        let expected = [0.0, 0.75, 0.0, 0.25];
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let m = [1.0, -2.0, 0.5, 3.0, 0.1];
        let c = from_monomial(&m);
        for j in 0..11 {
            let t = -1.0 + 0.2 * j as f64;
            let direct: f64 = m.iter().enumerate().map(|(i, v)| v * t.powi(i as i32)).sum();
            assert!((eval(&c, t) - direct).abs() < 1e-13);
        }
    }
}
