use crate::fnspace::{FunctionExpr, PartitionSet};

/// A suite entry: a function together with the inflection set it is
/// coconvex for.
#[derive(Debug, Clone)]
pub struct SuiteFn {
    pub name: String,
    pub expr: FunctionExpr,
    pub y: PartitionSet,
}

impl SuiteFn {
    pub fn new(name: impl Into<String>, expr: FunctionExpr, y: Vec<f64>) -> Self {
        SuiteFn { name: name.into(), expr, y: PartitionSet::inflection(y).expect("suite inflection points are valid") }
    }

    pub fn s(&self) -> usize {
        self.y.inflection_points().len()
    }

    /// `None` when the function is analytic.
    pub fn smoothness(&self) -> Option<usize> {
        self.expr.smoothness_order()
    }

    pub fn has_smoothness(&self, order: usize) -> bool {
        self.smoothness().is_none_or(|s| s >= order)
    }

    /// Degree when the function is a polynomial (`0` for the zero polynomial).
    pub fn degree(&self) -> Option<usize> {
        let c = self.expr.as_polynomial()?;
        Some(c.iter().rposition(|v| *v != 0.0).unwrap_or(0))
    }

    /// True when `φ^r Δ^k f^(r)` vanishes identically, i.e. `f` is a
    /// polynomial of degree below `k + r`.
    pub fn annihilated_by(&self, k: usize, r: usize) -> bool {
        self.degree().is_some_and(|d| d < k + r)
    }
}

/// Monomials up to degree 6, `exp`, `|x|^{7/2}`, `(x - 0.3)_+^4`, and two
/// `x⁴ - c x²` functions with two inflection points.
pub fn default_suite() -> Vec<SuiteFn> {
    let mut v = Vec::new();
    for m in 0..=6 {
        let y = if m % 2 == 1 && m >= 3 { vec![0.0] } else { vec![] };
        v.push(SuiteFn::new(format!("x^{m}"), FunctionExpr::monomial(m), y));
    }
    v.push(SuiteFn::new("exp", FunctionExpr::exp(1.0), vec![]));
    v.push(SuiteFn::new("|x|^3.5", FunctionExpr::abs_pow(0.0, 3.5), vec![]));
    v.push(SuiteFn::new("(x-0.3)_+^4", FunctionExpr::trunc_pow(0.3, 4.0), vec![]));
    for c in [1.0, 0.5] {
        // f'' = 12x² - 2c vanishes at ±sqrt(c/6).
        let y = (c / 6.0f64).sqrt();
        v.push(SuiteFn::new(format!("x^4-{c}x^2"), FunctionExpr::poly(&[0.0, 0.0, -c, 0.0, 1.0]), vec![y, -y]));
    }
    v
}

/// The smooth, genuinely curved part of the suite used by the heavier campaigns.
pub fn core_suite() -> Vec<SuiteFn> {
    default_suite().into_iter().filter(|f| ["x^1", "x^2", "x^3", "x^4", "exp", "|x|^3.5", "x^4-1x^2"].contains(&f.name.as_str())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::{coconvexity_check, uniform_grid};

    #[test]
    fn suite_members_are_coconvex_for_their_sets() {
        let grid = uniform_grid(401);
        for f in default_suite() {
            let rep = coconvexity_check(&f.expr, &f.y, &grid);
            assert!(rep.holds, "{}", f.name);
        }
    }
}
