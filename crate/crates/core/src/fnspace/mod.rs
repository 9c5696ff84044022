//! Function space primitives: symbolic test functions, Jacobi weights and
//! partitions of `[-1, 1]`.

mod expr;
mod partition;
mod spec;
mod weight;

pub use expr::{binomial, falling_factorial, symmetric_difference, FunctionExpr, Prepared, RealFunction};
pub use partition::{chebyshev_knot, chebyshev_partition, PartitionKind, PartitionSet};
pub use spec::{parse_function, FunctionSpec};
pub use weight::{is_sup_exponent, JacobiWeight};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FnSpaceError {
    #[error("{name} = {value} is outside {set} required for p = {p}")]
    InadmissibleExponent { name: &'static str, value: f64, p: String, set: String },
    #[error("invalid exponent p = {0}; expected a number in (0, inf] or 'inf'")]
    InvalidP(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("unknown function kind '{0}'")]
    UnknownKind(String),
    #[error("bad function parameters for '{kind}': {reason}")]
    BadParams { kind: String, reason: String },
    #[error("cannot parse function spec: {0}")]
    Parse(String),
}

/// Formats an exponent the way reports print it (`inf` for ∞).
pub fn format_p(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

/// Parses `inf`, `infinity` or a positive number.
pub fn parse_p(s: &str) -> Result<f64, FnSpaceError> {
    let t = s.trim().to_ascii_lowercase();
    let p = match t.as_str() {
        "inf" | "infinity" | "∞" => f64::INFINITY,
        _ => t.parse::<f64>().map_err(|_| FnSpaceError::InvalidP(s.to_string()))?,
    };
    if p.is_nan() || p <= 0.0 {
        return Err(FnSpaceError::InvalidP(s.to_string()));
    }
    Ok(p)
}

/// `φ(x) = sqrt(1 - x²)`, clamped to zero outside `[-1, 1]`.
#[inline]
pub fn phi(x: f64) -> f64 {
    ((1.0 - x) * (1.0 + x)).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_p_accepts_inf_and_rejects_nonpositive() {
        assert_eq!(parse_p("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_p("0.5").unwrap(), 0.5);
        assert!(parse_p("0").is_err());
        assert!(parse_p("-1").is_err());
        assert!(parse_p("abc").is_err());
        assert_eq!(format_p(f64::INFINITY), "inf");
        assert_eq!(format_p(2.0), "2");
    }

    #[test]
    fn phi_vanishes_at_endpoints() {
        assert_eq!(phi(1.0), 0.0);
        assert_eq!(phi(-1.0), 0.0);
        assert_eq!(phi(0.0), 1.0);
    }
}
