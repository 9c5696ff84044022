//! Small dense solvers shared by the spline and polynomial fits: a primal
//! active-set method for convex quadratic programs and a thin wrapper over
//! `microlp` for the linear programs of sup-norm fits.

use nalgebra::{DMatrix, DVector};

/// `min ½ xᵀHx + gᵀx` subject to `E x = e` and `G x ≥ b`.
#[derive(Debug, Clone)]
pub struct Qp {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub eq: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub ineq: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub active: Vec<usize>,
}

impl Qp {
    pub fn unconstrained(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        Qp { h, g, eq: DMatrix::zeros(0, n), eq_rhs: DVector::zeros(0), ineq: DMatrix::zeros(0, n), ineq_rhs: DVector::zeros(0) }
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x)
    }

    /// Largest violation of `G x ≥ b` (zero when feasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let r = &self.ineq * x - &self.ineq_rhs;
        r.iter().fold(0.0f64, |m, v| m.max(-v))
    }

    /// Equality-constrained minimiser, ignoring the inequalities.
    pub fn solve_equality(&self) -> Option<DVector<f64>> {
        let rows: Vec<usize> = Vec::new();
        let x0 = DVector::zeros(self.g.len());
        self.eqp_step(&x0, &rows, true).map(|(p, _)| p)
    }

    /// Solves the KKT system for the step from `x` with working set `w`.
    /// With `absolute`, returns the minimiser itself (used for the equality solve).
    fn eqp_step(&self, x: &DVector<f64>, w: &[usize], absolute: bool) -> Option<(DVector<f64>, DVector<f64>)> {
        let n = self.g.len();
        let me = self.eq.nrows();
        let m = me + w.len();
        let mut k = DMatrix::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).copy_from(&self.h);
        for (r, row) in (0..me).map(|i| self.eq.row(i).into_owned()).chain(w.iter().map(|&i| self.ineq.row(i).into_owned())).enumerate() {
            for j in 0..n {
                k[(n + r, j)] = row[j];
                k[(j, n + r)] = -row[j];
            }
        }
        let mut rhs = DVector::zeros(n + m);
        let c = &self.h * x + &self.g;
        for j in 0..n {
            rhs[j] = -c[j];
        }
        if absolute {
            for i in 0..me {
                rhs[n + i] = self.eq_rhs[i] - self.eq.row(i).dot(&x.transpose());
            }
        }
        let sol = match k.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) && (&k * &s - &rhs).amax() <= 1e-8 * (1.0 + rhs.amax()) => s,
            _ => {
                let svd = k.svd(true, true);
                svd.solve(&rhs, 1e-12).ok()?
            }
        };
        let p = sol.rows(0, n).into_owned();
        let lambda = sol.rows(n, m).into_owned();
        Some((if absolute { x + p } else { p }, lambda))
    }

    /// Primal active-set iterations from a feasible `x0`.
    pub fn solve_from(&self, x0: DVector<f64>, max_iter: usize) -> QpSolution {
        let me = self.eq.nrows();
        let mut x = x0;
        let mut w: Vec<usize> = Vec::new();
        let scale = 1.0 + self.h.amax();
        for it in 0..max_iter {
            let Some((p, lambda)) = self.eqp_step(&x, &w, false) else {
                return QpSolution { x, iterations: it, converged: false, active: w };
            };
            if p.amax() <= 1e-13 * (1.0 + x.amax()) {
                // Multipliers of the inequality rows in the working set.
                let mut worst = None;
                let mut worst_val = -1e-10 * scale;
                for (j, &i) in w.iter().enumerate() {
                    let l = lambda[me + j];
                    if l < worst_val {
                        worst_val = l;
                        worst = Some((j, i));
                    }
                }
                match worst {
                    None => return QpSolution { x, iterations: it, converged: true, active: w },
                    Some((j, _)) => {
                        w.remove(j);
                    }
                }
                continue;
            }
            let mut alpha = 1.0;
            let mut blocking = None;
            for i in 0..self.ineq.nrows() {
                if w.contains(&i) {
                    continue;
                }
                let row = self.ineq.row(i);
                let gp = row.dot(&p.transpose());
                if gp < -1e-14 * (1.0 + p.amax()) {
                    let slack = (row.dot(&x.transpose()) - self.ineq_rhs[i]).max(0.0);
                    let step = slack / -gp;
                    if step < alpha {
                        alpha = step;
                        blocking = Some(i);
                    }
                }
            }
            x += alpha * &p;
            if let Some(i) = blocking {
                w.push(i);
            }
        }
        QpSolution { x, iterations: max_iter, converged: false, active: w }
    }
}

/// `min cᵀx` subject to `A x ≥ b`, with free variables except those listed
/// as nonnegative.
pub fn linear_program(c: &[f64], a: &DMatrix<f64>, b: &[f64], nonneg: &[usize]) -> Result<Vec<f64>, String> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};
    let mut prob = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = c
        .iter()
        .enumerate()
        .map(|(j, &cj)| {
            let lo = if nonneg.contains(&j) { 0.0 } else { f64::NEG_INFINITY };
            prob.add_var(cj, (lo, f64::INFINITY))
        })
        .collect();
    for i in 0..a.nrows() {
        let terms: Vec<_> = (0..a.ncols()).filter(|&j| a[(i, j)] != 0.0).map(|j| (vars[j], a[(i, j)])).collect();
        prob.add_constraint(terms, ComparisonOp::Ge, b[i]);
    }
    let sol = prob.solve().map_err(|e| format!("{e:?}"))?.into_solution().map_err(|_| "interrupted".to_string())?;
    Ok(vars.iter().map(|v| sol[*v]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_constrained_quadratic() {
        // min (x-2)² + (y+1)² with x <= 1, y >= 0.
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        let g = DVector::from_vec(vec![-4.0, 2.0]);
        let mut qp = Qp::unconstrained(h, g);
        qp.ineq = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        qp.ineq_rhs = DVector::from_vec(vec![-1.0, 0.0]);
        let s = qp.solve_from(DVector::from_vec(vec![0.0, 0.5]), 50);
        assert!(s.converged);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && s.x[1].abs() < 1e-12);
    }

    #[test]
    fn equality_constraint_projection() {
        // min x² + y² with x + y = 1.
        let h = DMatrix::identity(2, 2) * 2.0;
        let mut qp = Qp::unconstrained(h, DVector::zeros(2));
        qp.eq = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        qp.eq_rhs = DVector::from_vec(vec![1.0]);
        let x = qp.solve_equality().unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lp_minimax_line() {
        // min E s.t. |c - y_i| <= E for y = 0, 1 -> c = 0.5, E = 0.5.
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, -1.0, 1.0, 1.0, 1.0, -1.0, 1.0]);
        let b = [0.0, 0.0, 1.0, -1.0];
        let x = linear_program(&[0.0, 1.0], &a, &b, &[1]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-9 && (x[1] - 0.5).abs() < 1e-9);
    }
}
