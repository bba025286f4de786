//! Dense convex QP: `min ½ xᵀPx + qᵀx  s.t.  A_eq x = b_eq,  A_in x ≤ b_in`.
//!
//! Solved by an interior-point method, then polished by re-solving the KKT system of
//! the identified active set, which is kept only if it is primal and dual feasible.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QpError {
    #[error("QP dimensions are inconsistent: {0}")]
    Dimensions(String),
    #[error("QP is infeasible")]
    Infeasible,
    #[error("QP is unbounded below")]
    Unbounded,
    #[error("QP solver hit its iteration limit")]
    MaxIterations,
    #[error("QP solver failed: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
}

impl QpProblem {
    pub fn n_vars(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    fn check(&self) -> Result<(), QpError> {
        let n = self.n_vars();
        let bad = |what: &str| Err(QpError::Dimensions(what.to_string()));
        if self.p.shape() != (n, n) {
            return bad("P must be n x n");
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return bad("equality block");
        }
        if self.a_in.ncols() != n || self.a_in.nrows() != self.b_in.len() {
            return bad("inequality block");
        }
        let asym = (&self.p - self.p.transpose()).amax();
        if asym > 1e-12 * self.p.amax().max(1.0) {
            return bad("P is not symmetric");
        }
        Ok(())
    }
}

/// Infinity-norm KKT residuals with multipliers `y` (equalities) and `z ≥ 0` (inequalities).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    pub primal_eq: f64,
    pub primal_ineq: f64,
    pub stationarity: f64,
    pub complementarity: f64,
    pub dual_feasibility: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal_eq
            .max(self.primal_ineq)
            .max(self.stationarity)
            .max(self.complementarity)
            .max(self.dual_feasibility)
    }
}

pub fn kkt_residuals(qp: &QpProblem, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> KktResiduals {
    let eq = &qp.a_eq * x - &qp.b_eq;
    let slack = &qp.b_in - &qp.a_in * x;
    let grad = &qp.p * x + &qp.q + qp.a_eq.transpose() * y + qp.a_in.transpose() * z;
    let amax = |v: &DVector<f64>| if v.is_empty() { 0.0 } else { v.amax() };
    KktResiduals {
        primal_eq: amax(&eq),
        primal_ineq: slack.iter().fold(0.0, |m, s| m.max(-s)),
        stationarity: amax(&grad),
        complementarity: z.iter().zip(slack.iter()).fold(0.0, |m, (z, s)| m.max((z * s).abs())),
        dual_feasibility: z.iter().fold(0.0, |m, z| m.max(-z)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub objective: f64,
    pub residuals: KktResiduals,
    pub iterations: u32,
    /// The active-set refinement replaced the interior-point iterate.
    pub polished: bool,
}

fn to_csc(m: &DMatrix<f64>, upper_only: bool) -> CscMatrix<f64> {
    let (rows, cols) = m.shape();
    let mut colptr = Vec::with_capacity(cols + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for c in 0..cols {
        let end = if upper_only { (c + 1).min(rows) } else { rows };
        for r in 0..end {
            let v = m[(r, c)];
            if v != 0.0 {
                rowval.push(r);
                nzval.push(v);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(rows, cols, colptr, rowval, nzval)
}

/// Primal `x`, equality multipliers `y`, inequality multipliers `z`, iterations.
type IpmSolution = (DVector<f64>, DVector<f64>, DVector<f64>, u32);

fn interior_point(qp: &QpProblem) -> Result<IpmSolution, QpError> {
    let n = qp.n_vars();
    let (m_eq, m_in) = (qp.a_eq.nrows(), qp.a_in.nrows());
    let mut a = DMatrix::zeros(m_eq + m_in, n);
    a.rows_mut(0, m_eq).copy_from(&qp.a_eq);
    a.rows_mut(m_eq, m_in).copy_from(&qp.a_in);
    let b: Vec<f64> = qp.b_eq.iter().chain(qp.b_in.iter()).copied().collect();
    let mut cones = Vec::new();
    if m_eq > 0 {
        cones.push(SupportedConeT::ZeroConeT(m_eq));
    }
    if m_in > 0 {
        cones.push(SupportedConeT::NonnegativeConeT(m_in));
    }
    let settings = DefaultSettings {
        verbose: false,
        max_iter: 200,
        tol_gap_abs: 1e-10,
        tol_gap_rel: 1e-10,
        tol_feas: 1e-10,
        presolve_enable: false,
        ..Default::default()
    };
    let p = to_csc(&qp.p, true);
    let a = to_csc(&a, false);
    let q: Vec<f64> = qp.q.iter().copied().collect();
    let mut solver =
        DefaultSolver::new(&p, &q, &a, &b, &cones, settings).map_err(|e| QpError::Numerical(e.to_string()))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => return Err(QpError::Infeasible),
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => return Err(QpError::Unbounded),
        SolverStatus::MaxIterations | SolverStatus::MaxTime => return Err(QpError::MaxIterations),
        other => return Err(QpError::Numerical(format!("{other:?}"))),
    }
    let sol = &solver.solution;
    let x = DVector::from_column_slice(&sol.x);
    let y = DVector::from_column_slice(&sol.z[..m_eq]);
    let z = DVector::from_column_slice(&sol.z[m_eq..]);
    Ok((x, y, z, sol.iterations))
}

/// Solves the equality-constrained QP over the equalities plus the given active
/// inequalities; returns `(x, y, z)` with zero multipliers on inactive rows.
fn solve_active_set(qp: &QpProblem, active: &[usize]) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let n = qp.n_vars();
    let m_eq = qp.a_eq.nrows();
    let m = m_eq + active.len();
    let mut kkt = DMatrix::zeros(n + m, n + m);
    let mut rhs = DVector::zeros(n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(&qp.p);
    rhs.rows_mut(0, n).copy_from(&(-&qp.q));
    for r in 0..m {
        let (row, b) = if r < m_eq {
            (qp.a_eq.row(r), qp.b_eq[r])
        } else {
            let i = active[r - m_eq];
            (qp.a_in.row(i), qp.b_in[i])
        };
        for c in 0..n {
            kkt[(n + r, c)] = row[c];
            kkt[(c, n + r)] = row[c];
        }
        rhs[n + r] = b;
    }
    let scale = rhs.amax().max(1.0);
    let lu = kkt.clone().lu();
    let mut sol = match lu.solve(&rhs).filter(|s| s.iter().all(|v| v.is_finite())) {
        Some(s) => {
            let mut s = s;
            // a few rounds of refinement; large multipliers otherwise leave visible
            // complementarity residue
            for _ in 0..3 {
                let r = &rhs - &kkt * &s;
                if r.amax() <= 1e-15 * scale {
                    break;
                }
                match lu.solve(&r) {
                    Some(ds) => s += ds,
                    None => break,
                }
            }
            s
        }
        None => DVector::zeros(n + m),
    };
    if (&kkt * &sol - &rhs).amax() > 1e-10 * scale {
        sol = kkt.svd(true, true).solve(&rhs, 1e-12).ok()?;
    }
    let x = sol.rows(0, n).into_owned();
    let y = sol.rows(n, m_eq).into_owned();
    let mut z = DVector::zeros(qp.a_in.nrows());
    for (j, &i) in active.iter().enumerate() {
        z[i] = sol[n + m_eq + j];
    }
    Some((x, y, z))
}

/// Active-set refinement seeded with the interior-point guess: rows whose multiplier
/// dominates their slack start active; rows with negative multipliers are dropped and
/// violated rows added, one at a time, until the KKT conditions hold.
fn polish(qp: &QpProblem, x: &DVector<f64>, z: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    const TOL: f64 = 1e-10;
    let slack = &qp.b_in - &qp.a_in * x;
    let mut active: Vec<usize> = (0..qp.a_in.nrows()).filter(|&i| z[i] > slack[i]).collect();
    for _ in 0..(qp.a_in.nrows() + 10).min(200) {
        let (px, py, pz) = solve_active_set(qp, &active)?;
        let drop = active
            .iter()
            .copied()
            .filter(|&i| pz[i] < -TOL)
            .min_by(|&a, &b| pz[a].total_cmp(&pz[b]));
        if let Some(i) = drop {
            active.retain(|&j| j != i);
            continue;
        }
        let viol = &qp.a_in * &px - &qp.b_in;
        let add = (0..viol.len())
            .filter(|i| viol[*i] > TOL && !active.contains(i))
            .max_by(|&a, &b| viol[a].total_cmp(&viol[b]));
        match add {
            Some(i) => active.push(i),
            None => return Some((px, py, pz)),
        }
    }
    None
}

pub fn solve_qp(qp: &QpProblem) -> Result<QpSolution, QpError> {
    qp.check()?;
    let (x, y, z, iterations) = interior_point(qp)?;
    let base = kkt_residuals(qp, &x, &y, &z);
    if let Some((px, py, pz)) = polish(qp, &x, &z) {
        let polished = kkt_residuals(qp, &px, &py, &pz);
        if polished.max() <= base.max() {
            return Ok(QpSolution {
                objective: qp.objective(&px),
                x: px,
                y: py,
                z: pz,
                residuals: polished,
                iterations,
                polished: true,
            });
        }
    }
    Ok(QpSolution {
        objective: qp.objective(&x),
        x,
        y,
        z,
        residuals: base,
        iterations,
        polished: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_qp(a_in: &[f64], b_in: &[f64]) -> QpProblem {
        QpProblem {
            p: DMatrix::from_element(1, 1, 2.0),
            q: DVector::zeros(1),
            a_eq: DMatrix::zeros(0, 1),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::from_column_slice(a_in.len(), 1, a_in),
            b_in: DVector::from_column_slice(b_in),
        }
    }

    #[test]
    fn bound_constrained_scalar() {
        // x >= 1 written as -x <= -1
        let s = solve_qp(&scalar_qp(&[-1.0], &[-1.0])).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert!((s.z[0] - 2.0).abs() < 1e-9);
        assert!(s.residuals.max() < 1e-9);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        assert_eq!(
            solve_qp(&scalar_qp(&[1.0, -1.0], &[0.0, -1.0])),
            Err(QpError::Infeasible)
        );
    }

    #[test]
    fn equality_only_matches_kkt_solve() {
        let p = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let q = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let a_eq = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let b_eq = DVector::from_column_slice(&[1.0]);
        let qp = QpProblem {
            p: p.clone(),
            q: q.clone(),
            a_eq: a_eq.clone(),
            b_eq: b_eq.clone(),
            a_in: DMatrix::zeros(0, 3),
            b_in: DVector::zeros(0),
        };
        let s = solve_qp(&qp).unwrap();
        let mut kkt = DMatrix::zeros(4, 4);
        kkt.view_mut((0, 0), (3, 3)).copy_from(&p);
        for c in 0..3 {
            kkt[(3, c)] = 1.0;
            kkt[(c, 3)] = 1.0;
        }
        let rhs = DVector::from_column_slice(&[-1.0, 2.0, -0.5, 1.0]);
        let direct = kkt.lu().solve(&rhs).unwrap();
        for i in 0..3 {
            assert!((s.x[i] - direct[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_asymmetric_p() {
        let mut qp = scalar_qp(&[], &[]);
        qp.p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        qp.q = DVector::zeros(2);
        qp.a_eq = DMatrix::zeros(0, 2);
        qp.a_in = DMatrix::zeros(0, 2);
        assert!(matches!(solve_qp(&qp), Err(QpError::Dimensions(_))));
    }
}
