//! Dense semidefinite feasibility via a log-det barrier.
//!
//! Maximizes a linear objective `cᵀθ` over parameters `θ` subject to a list
//! of affine symmetric matrix constraints `G_b(θ) = K_b + Σ_i θ_i·C_{b,i} ≻ 0`
//! by following the central path of `t·cᵀθ + Σ_b log det G_b(θ)` with damped
//! Newton steps. Problem sizes here are tiny (tens of parameters, blocks of
//! dimension at most ~10), so everything is dense and deterministic.

use alloc::vec::Vec;

use crate::linalg::{dot, solve_lower, solve_upper_from_lower, Mat};

/// Symmetric matrix-valued affine function of the parameter vector.
pub(crate) struct MatrixExpr {
    pub constant: Mat,
    /// One coefficient matrix per parameter (zero matrices allowed).
    pub coeffs: Vec<Mat>,
}

impl MatrixExpr {
    pub fn eval(&self, theta: &[f64]) -> Mat {
        let mut g = self.constant.clone();
        for (t, c) in theta.iter().zip(&self.coeffs) {
            if *t != 0.0 {
                g.axpy(*t, c);
            }
        }
        g
    }
}

pub(crate) struct BarrierProblem {
    /// Linear objective to maximize.
    pub objective: Vec<f64>,
    pub blocks: Vec<MatrixExpr>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BarrierParams {
    pub t0: f64,
    pub t_growth: f64,
    pub gap_tol: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for BarrierParams {
    fn default() -> Self {
        BarrierParams {
            t0: 1.0,
            t_growth: 10.0,
            gap_tol: 1e-12,
            newton_tol: 1e-12,
            max_newton: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum SdpError {
    InfeasibleStart,
    NumericalBreakdown,
}

/// `log det G` via Cholesky; `None` when `G` is not positive definite.
fn log_det_pd(g: &Mat) -> Option<f64> {
    let l = g.cholesky()?;
    let mut s = 0.0;
    for i in 0..l.rows() {
        s += libm::log(l[(i, i)]);
    }
    Some(2.0 * s)
}

fn barrier_value(problem: &BarrierProblem, theta: &[f64], t: f64) -> Option<f64> {
    let mut phi = t * dot(&problem.objective, theta);
    for b in &problem.blocks {
        phi += log_det_pd(&b.eval(theta))?;
    }
    Some(phi)
}

/// Maximize the objective from a strictly feasible starting point.
pub(crate) fn maximize(
    problem: &BarrierProblem,
    theta0: Vec<f64>,
    params: &BarrierParams,
) -> Result<Vec<f64>, SdpError> {
    let nt = theta0.len();
    let nu: f64 = problem
        .blocks
        .iter()
        .map(|b| b.constant.rows() as f64)
        .sum();
    let mut theta = theta0;
    if barrier_value(problem, &theta, params.t0).is_none() {
        return Err(SdpError::InfeasibleStart);
    }
    let mut t = params.t0;
    loop {
        // inner Newton iterations at fixed t
        for _ in 0..params.max_newton {
            let mut grad = problem
                .objective
                .iter()
                .map(|c| t * c)
                .collect::<Vec<f64>>();
            let mut neg_hess = Mat::zeros(nt, nt);
            for block in &problem.blocks {
                let g = block.eval(&theta);
                let Some(l) = g.cholesky() else {
                    return Err(SdpError::NumericalBreakdown);
                };
                // U_i = G⁻¹ C_i, column-by-column through the factor
                let dim = g.rows();
                let mut us: Vec<Mat> = Vec::with_capacity(nt);
                for ci in &block.coeffs {
                    let mut u = Mat::zeros(dim, dim);
                    if ci.max_abs() != 0.0 {
                        for col in 0..dim {
                            let rhs: Vec<f64> = (0..dim).map(|r| ci[(r, col)]).collect();
                            let y = solve_lower(&l, &rhs);
                            let x = solve_upper_from_lower(&l, &y);
                            for r in 0..dim {
                                u[(r, col)] = x[r];
                            }
                        }
                    }
                    us.push(u);
                }
                for i in 0..nt {
                    grad[i] += us[i].trace();
                    for j in i..nt {
                        // tr(U_i · U_j)
                        let mut s = 0.0;
                        for a in 0..dim {
                            for b in 0..dim {
                                s += us[i][(a, b)] * us[j][(b, a)];
                            }
                        }
                        neg_hess[(i, j)] += s;
                        if i != j {
                            neg_hess[(j, i)] += s;
                        }
                    }
                }
            }
            // Newton direction: neg_hess · d = grad, regularizing on breakdown
            let mut reg = 0.0;
            let d = loop {
                let mut h = neg_hess.clone();
                if reg > 0.0 {
                    for i in 0..nt {
                        h[(i, i)] += reg;
                    }
                }
                match h.solve_spd(&grad) {
                    Some(d) => break d,
                    None => {
                        reg = if reg == 0.0 {
                            1e-10 * (1.0 + neg_hess.max_abs())
                        } else {
                            reg * 100.0
                        };
                        if reg > 1e20 {
                            return Err(SdpError::NumericalBreakdown);
                        }
                    }
                }
            };
            let decrement = dot(&grad, &d);
            if decrement <= params.newton_tol {
                break;
            }
            // damped step: stay inside the cone, require barrier increase
            let phi0 = barrier_value(problem, &theta, t).ok_or(SdpError::NumericalBreakdown)?;
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand: Vec<f64> = theta
                    .iter()
                    .zip(&d)
                    .map(|(th, di)| th + alpha * di)
                    .collect();
                if let Some(phi) = barrier_value(problem, &cand, t) {
                    if phi >= phi0 + 0.25 * alpha * decrement {
                        theta = cand;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if nu / t <= params.gap_tol {
            return Ok(theta);
        }
        t *= params.t_growth;
        if !t.is_finite() {
            return Ok(theta);
        }
    }
}
