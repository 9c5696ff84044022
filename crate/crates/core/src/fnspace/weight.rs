use super::{format_p, FnSpaceError};

/// True when `p` encodes the sup norm.
#[inline]
pub fn is_sup_exponent(p: f64) -> bool {
    p.is_infinite()
}

/// Jacobi weight `w(x) = (1 + x)^α (1 - x)^β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiWeight {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for JacobiWeight {
    fn default() -> Self {
        Self::unit()
    }
}

impl JacobiWeight {
    /// Builds a weight and checks `α, β ∈ J_p`: `(-1/p, ∞)` for finite `p`,
    /// `[0, ∞)` for `p = ∞`.
    pub fn new(alpha: f64, beta: f64, p: f64) -> Result<Self, FnSpaceError> {
        let w = JacobiWeight { alpha, beta };
        w.check(p)?;
        Ok(w)
    }

    pub fn unit() -> Self {
        JacobiWeight { alpha: 0.0, beta: 0.0 }
    }

    pub fn is_unit(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }

    fn exponent_ok(v: f64, p: f64) -> bool {
        if is_sup_exponent(p) {
            v >= 0.0
        } else {
            v > -1.0 / p
        }
    }

    pub fn admissible_for(&self, p: f64) -> bool {
        Self::exponent_ok(self.alpha, p) && Self::exponent_ok(self.beta, p)
    }

    pub fn check(&self, p: f64) -> Result<(), FnSpaceError> {
        if p.is_nan() || p <= 0.0 {
            return Err(FnSpaceError::InvalidP(format!("{p}")));
        }
        let set = if is_sup_exponent(p) { "J_inf = [0, inf)".to_string() } else { format!("J_p = ({}, inf)", -1.0 / p) };
        for (name, value) in [("alpha", self.alpha), ("beta", self.beta)] {
            if value.is_nan() || !Self::exponent_ok(value, p) {
                return Err(FnSpaceError::InadmissibleExponent { name, value, p: format_p(p), set });
            }
        }
        Ok(())
    }

    /// `w_{α+a, β+b}`.
    pub fn shifted(&self, da: f64, db: f64) -> Self {
        JacobiWeight { alpha: self.alpha + da, beta: self.beta + db }
    }

    pub fn eval(&self, x: f64) -> f64 {
        pow0(1.0 + x, self.alpha) * pow0(1.0 - x, self.beta)
    }

    /// Weight at `x = -cos θ`, using `1 + x = 2 sin²(θ/2)` and `1 - x = 2 cos²(θ/2)`
    /// so values near the endpoints keep full relative accuracy.
    pub fn eval_theta(&self, theta: f64) -> f64 {
        let s = (theta / 2.0).sin();
        let c = (theta / 2.0).cos();
        pow0(2.0 * s * s, self.alpha) * pow0(2.0 * c * c, self.beta)
    }
}

fn pow0(base: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        base.max(0.0).powf(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissibility_branches() {
        assert!(JacobiWeight::new(0.0, 0.0, f64::INFINITY).is_ok());
        let err = JacobiWeight::new(-0.1, 0.0, f64::INFINITY).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpha") && msg.contains("J_inf"), "{msg}");
        assert!(JacobiWeight::new(-0.4, 0.2, 2.0).is_ok());
        let err = JacobiWeight::new(0.0, -0.5, 2.0).unwrap_err();
        assert!(err.to_string().contains("beta"));
        assert!(JacobiWeight::new(-0.9, 0.0, 1.0).is_ok());
        assert!(JacobiWeight::new(-1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn theta_form_matches_direct() {
        let w = JacobiWeight { alpha: 0.5, beta: 1.5 };
        for j in 1..100 {
            let th = std::f64::consts::PI * j as f64 / 100.0;
            let x = -th.cos();
            assert!((w.eval(x) - w.eval_theta(th)).abs() < 1e-12);
        }
        assert_eq!(JacobiWeight::unit().eval(1.0), 1.0);
    }
}
