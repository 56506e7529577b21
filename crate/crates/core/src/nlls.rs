//! Projected single-shooting Levenberg-Marquardt.
//!
//! The estimation problems in this crate optimize over the window-initial
//! state and the disturbance sequence; intermediate states are eliminated by
//! forward simulation, so the dynamics and output equations hold by
//! construction. The decision vector is
//!
//! ```text
//! z = [ x_init (n) | w_0 (q) | w_1 (q) | … | w_{T−1} (q) ]
//! ```
//!
//! with window data ordered oldest-first. Hard bounds on `x_init` and the
//! `w_s` are enforced exactly by projection after every trial step;
//! interior-state and output boxes enter as exterior quadratic penalty rows.
//! Step acceptance uses Armijo backtracking along the projected direction.

use alloc::vec::Vec;

use crate::estimate::SolverConfig;
use crate::linalg::{dot, Mat};
use crate::model::SystemModel;

/// Weighted discounted least-squares window problem.
pub(crate) struct ShootingProblem<'a> {
    pub model: &'a SystemModel,
    /// Inputs `u_s`, oldest first, length `T`.
    pub inputs: &'a [Vec<f64>],
    /// Measured outputs `y_s`, oldest first, length `T`.
    pub meas: &'a [Vec<f64>],
    /// Prior estimate for the window-initial state.
    pub prior: &'a [f64],
    /// Square root of the full prior weight matrix (discount included).
    pub prior_sqrt: Mat,
    /// Square root of the undiscounted per-step disturbance weight.
    pub dist_sqrt: Mat,
    /// Square root of the undiscounted per-step output weight.
    pub out_sqrt: Mat,
    /// Discount factor; step `s` (of `T`) carries `η^{T−1−s}`.
    pub eta: f64,
    pub penalty_weight: f64,
}

pub(crate) struct Simulated {
    /// States `x_0 … x_T`.
    pub states: Vec<Vec<f64>>,
    /// Outputs `y_0 … y_{T−1}`.
    pub outputs: Vec<Vec<f64>>,
}

impl<'a> ShootingProblem<'a> {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn z_dim(&self) -> usize {
        self.model.state_dim() + self.horizon() * self.model.disturbance_dim()
    }

    pub fn split_z<'z>(&self, z: &'z [f64]) -> (&'z [f64], Vec<&'z [f64]>) {
        let n = self.model.state_dim();
        let q = self.model.disturbance_dim();
        let x0 = &z[..n];
        let ws = (0..self.horizon())
            .map(|s| &z[n + s * q..n + (s + 1) * q])
            .collect();
        (x0, ws)
    }

    /// Project the decision vector onto `X × W^T` (exact feasibility).
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        let n = self.model.state_dim();
        let q = self.model.disturbance_dim();
        let mut out = self.model.sets.x.project(&z[..n]);
        for s in 0..self.horizon() {
            out.extend(self.model.sets.w.project(&z[n + s * q..n + (s + 1) * q]));
        }
        out
    }

    /// Per-coordinate bounds of the decision vector.
    pub fn z_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.model.state_dim();
        let q = self.model.disturbance_dim();
        let nz = self.z_dim();
        let mut lo = Vec::with_capacity(nz);
        let mut hi = Vec::with_capacity(nz);
        for i in 0..n {
            lo.push(self.model.sets.x.lower(i));
            hi.push(self.model.sets.x.upper(i));
        }
        for _ in 0..self.horizon() {
            for i in 0..q {
                lo.push(self.model.sets.w.lower(i));
                hi.push(self.model.sets.w.upper(i));
            }
        }
        (lo, hi)
    }

    pub fn simulate(&self, z: &[f64]) -> Simulated {
        let (x0, ws) = self.split_z(z);
        let t = self.horizon();
        let mut states = Vec::with_capacity(t + 1);
        let mut outputs = Vec::with_capacity(t);
        states.push(x0.to_vec());
        for s in 0..t {
            let x = states.last().unwrap();
            let xn = self.model.dynamics(x, &self.inputs[s], ws[s]);
            let y = self.model.output(x, &self.inputs[s], ws[s]);
            outputs.push(y);
            states.push(xn);
        }
        Simulated { states, outputs }
    }

    fn discount(&self, s: usize) -> f64 {
        crate::linalg::powi(self.eta, (self.horizon() - 1 - s) as u64)
    }

    /// Stacked weighted residual vector at `z` (penalty rows included).
    pub fn residuals(&self, z: &[f64], sim: &Simulated) -> Vec<f64> {
        let t = self.horizon();
        let n = self.model.state_dim();
        let (x0, ws) = self.split_z(z);
        let mut r = Vec::new();
        let dx: Vec<f64> = x0.iter().zip(self.prior).map(|(a, b)| a - b).collect();
        r.extend(self.prior_sqrt.mul_vec(&dx));
        for s in 0..t {
            let scale = libm::sqrt(self.discount(s));
            for v in self.dist_sqrt.mul_vec(ws[s]) {
                r.push(scale * v);
            }
            let dy: Vec<f64> = sim.outputs[s]
                .iter()
                .zip(&self.meas[s])
                .map(|(a, b)| a - b)
                .collect();
            for v in self.out_sqrt.mul_vec(&dy) {
                r.push(scale * v);
            }
        }
        if self.penalty_weight > 0.0 {
            let pw = libm::sqrt(self.penalty_weight);
            for xs in sim.states.iter().skip(1) {
                for i in 0..n {
                    r.push(
                        pw * signed_overshoot(
                            xs[i],
                            self.model.sets.x.lower(i),
                            self.model.sets.x.upper(i),
                        ),
                    );
                }
            }
            for ys in sim.outputs.iter() {
                for i in 0..self.model.output_dim() {
                    r.push(
                        pw * signed_overshoot(
                            ys[i],
                            self.model.sets.y.lower(i),
                            self.model.sets.y.upper(i),
                        ),
                    );
                }
            }
        }
        r
    }

    /// Cost `‖r‖²` including penalty.
    pub fn cost(&self, z: &[f64]) -> f64 {
        let sim = self.simulate(z);
        let r = self.residuals(z, &sim);
        dot(&r, &r)
    }

    /// Largest box violation over intermediate states and window outputs.
    pub fn box_violation(&self, sim: &Simulated) -> f64 {
        let mut v = 0.0f64;
        for xs in sim.states.iter().skip(1) {
            v = v.max(self.model.sets.x.violation(xs));
        }
        for ys in sim.outputs.iter() {
            v = v.max(self.model.sets.y.violation(ys));
        }
        v
    }

    /// State sensitivities `S_s = ∂x_s/∂z` propagated with the analytic
    /// Jacobians, plus the residual Jacobian.
    pub fn jacobian(&self, z: &[f64], sim: &Simulated) -> Mat {
        let t = self.horizon();
        let n = self.model.state_dim();
        let q = self.model.disturbance_dim();
        let p = self.model.output_dim();
        let nz = self.z_dim();
        let (_, ws) = self.split_z(z);

        // sensitivity propagation: S_0 = [I 0 … 0]
        let mut sens: Vec<Mat> = Vec::with_capacity(t + 1);
        let mut s0 = Mat::zeros(n, nz);
        for i in 0..n {
            s0[(i, i)] = 1.0;
        }
        sens.push(s0);
        let mut lins = Vec::with_capacity(t);
        for s in 0..t {
            let lin = self
                .model
                .linearize(&sim.states[s], &self.inputs[s], ws[s])
                .expect("dimensions fixed by construction");
            let mut next = lin.a.mul(&sens[s]);
            for i in 0..n {
                for j in 0..q {
                    next[(i, n + s * q + j)] += lin.b[(i, j)];
                }
            }
            sens.push(next);
            lins.push(lin);
        }

        let n_rows = {
            let base = n + t * (q + p);
            if self.penalty_weight > 0.0 {
                base + t * n + t * p
            } else {
                base
            }
        };
        let mut jac = Mat::zeros(n_rows, nz);
        let mut row = 0;
        // prior block: prior_sqrt · S_0
        for i in 0..n {
            for j in 0..n {
                jac[(row + i, j)] = self.prior_sqrt[(i, j)];
            }
        }
        row += n;
        for s in 0..t {
            let scale = libm::sqrt(self.discount(s));
            for i in 0..q {
                for j in 0..q {
                    jac[(row + i, n + s * q + j)] = scale * self.dist_sqrt[(i, j)];
                }
            }
            row += q;
            // out_sqrt · (C_s S_s + D_s E_s)
            let cs = self.out_sqrt.mul(&lins[s].c).mul(&sens[s]);
            let ds = self.out_sqrt.mul(&lins[s].d);
            for i in 0..p {
                for j in 0..nz {
                    jac[(row + i, j)] = scale * cs[(i, j)];
                }
                for j in 0..q {
                    jac[(row + i, n + s * q + j)] += scale * ds[(i, j)];
                }
            }
            row += p;
        }
        if self.penalty_weight > 0.0 {
            let pw = libm::sqrt(self.penalty_weight);
            for s in 1..=t {
                for i in 0..n {
                    let active = overshoot_active(
                        sim.states[s][i],
                        self.model.sets.x.lower(i),
                        self.model.sets.x.upper(i),
                    );
                    if active != 0.0 {
                        for j in 0..nz {
                            jac[(row, j)] = pw * active * sens[s][(i, j)];
                        }
                    }
                    row += 1;
                }
            }
            for s in 0..t {
                let crow = lins[s].c.mul(&sens[s]);
                for i in 0..p {
                    let active = overshoot_active(
                        sim.outputs[s][i],
                        self.model.sets.y.lower(i),
                        self.model.sets.y.upper(i),
                    );
                    if active != 0.0 {
                        for j in 0..nz {
                            jac[(row, j)] = pw * active * crow[(i, j)];
                        }
                        for j in 0..q {
                            jac[(row, n + s * q + j)] += pw * active * lins[s].d[(i, j)];
                        }
                    }
                    row += 1;
                }
            }
        }
        jac
    }
}

fn signed_overshoot(v: f64, lo: f64, hi: f64) -> f64 {
    if v > hi {
        v - hi
    } else if v < lo {
        v - lo
    } else {
        0.0
    }
}

fn overshoot_active(v: f64, lo: f64, hi: f64) -> f64 {
    if v > hi || v < lo {
        1.0
    } else {
        0.0
    }
}

pub(crate) struct LmOutput {
    pub z: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `‖r(z)‖²` over the projected box from `z0`.
///
/// Coordinates pinned at a bound with the gradient pushing outward are
/// frozen out of the Levenberg-Marquardt subproblem (an active-set
/// reduction); without it the clipped direction stalls on solutions with
/// many disturbance estimates saturated at the box.
pub(crate) fn lm_solve(problem: &ShootingProblem<'_>, z0: &[f64], cfg: &SolverConfig) -> LmOutput {
    let nz = problem.z_dim();
    let (lo, hi) = problem.z_bounds();
    let mut z = problem.project(z0);
    let mut sim = problem.simulate(&z);
    let mut r = problem.residuals(&z, &sim);
    let mut cost = dot(&r, &r);
    let mut lambda = cfg.levenberg_lambda0;
    let mut iterations = 0;
    let mut converged = false;
    let mut small_gains = 0u32;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let jac = problem.jacobian(&z, &sim);
        // g = 2 Jᵀ r
        let g: Vec<f64> = jac.tr_mul_vec(&r).iter().map(|v| 2.0 * v).collect();
        // projected gradient stationarity
        let pg: Vec<f64> = {
            let stepped: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - gi).collect();
            let proj = problem.project(&stepped);
            proj.iter().zip(&z).map(|(a, b)| a - b).collect()
        };
        if pg.iter().fold(0.0f64, |m, v| m.max(libm::fabs(*v))) <= cfg.gradient_tol {
            converged = true;
            break;
        }
        // free variables: not pinned at a bound the gradient pushes into
        let free: Vec<usize> = (0..nz)
            .filter(|&i| !((z[i] <= lo[i] && g[i] >= 0.0) || (z[i] >= hi[i] && g[i] <= 0.0)))
            .collect();
        let nf = free.len();
        if nf == 0 {
            converged = true;
            break;
        }
        let jtj = jac.tr_mul(&jac);
        let jtr = jac.tr_mul_vec(&r);
        let mut jtj_f = Mat::zeros(nf, nf);
        let mut neg_jtr_f = alloc::vec::Vec::with_capacity(nf);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                jtj_f[(a, b)] = jtj[(i, j)];
            }
            neg_jtr_f.push(-jtr[i]);
        }
        let mut accepted = false;
        for _ in 0..30 {
            // (JᵀJ + λ·(diag(JᵀJ) + τI)) d = −Jᵀr on the free subspace
            let mut sys = jtj_f.clone();
            for i in 0..nf {
                sys[(i, i)] += lambda * (jtj_f[(i, i)] + 1e-12);
            }
            let d = match sys.solve_spd(&neg_jtr_f) {
                Some(d_f) => {
                    let mut d = alloc::vec![0.0; nz];
                    for (a, &i) in free.iter().enumerate() {
                        d[i] = d_f[a];
                    }
                    d
                }
                None => {
                    lambda = (lambda * 10.0).max(1e-12);
                    continue;
                }
            };
            // Armijo backtracking along the projected step
            let mut alpha = 1.0;
            let mut found = None;
            for _ in 0..25 {
                let cand: Vec<f64> = z.iter().zip(&d).map(|(zi, di)| zi + alpha * di).collect();
                let cand = problem.project(&cand);
                let descent = dot(&g, &vec_diff(&cand, &z));
                if descent < 0.0 {
                    let c_cost = problem.cost(&cand);
                    if c_cost <= cost + 1e-4 * descent {
                        found = Some((cand, c_cost));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            match found {
                Some((cand, c_cost)) => {
                    let step = max_abs(&vec_diff(&cand, &z));
                    let improvement = cost - c_cost;
                    z = cand;
                    sim = problem.simulate(&z);
                    r = problem.residuals(&z, &sim);
                    cost = c_cost;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    // progress at the numerical floor counts as converged
                    // once it is sustained
                    if improvement <= 1e-13 * (1.0 + cost) {
                        small_gains += 1;
                    } else {
                        small_gains = 0;
                    }
                    if step <= cfg.step_tol * (1.0 + max_abs(&z)) || small_gains >= 3 {
                        converged = true;
                    }
                    break;
                }
                None => {
                    lambda *= 10.0;
                    if lambda > 1e14 {
                        break;
                    }
                }
            }
        }
        if !accepted {
            // no productive direction left at machine scale: treat the point
            // as stationary
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    LmOutput {
        z,
        iterations,
        converged,
    }
}

/// Projected gradient descent with Armijo backtracking, for objectives that
/// are not sums of squares. Deterministic; adapts the trial step length.
pub(crate) fn projected_descent(
    objective: &dyn Fn(&[f64]) -> f64,
    gradient: &dyn Fn(&[f64]) -> Vec<f64>,
    project: &dyn Fn(&[f64]) -> Vec<f64>,
    z0: &[f64],
    cfg: &SolverConfig,
) -> LmOutput {
    let mut z = project(z0);
    let mut cost = objective(&z);
    let mut alpha = 1.0f64;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let g = gradient(&z);
        let pg: Vec<f64> = {
            let stepped: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - gi).collect();
            let proj = project(&stepped);
            proj.iter().zip(&z).map(|(a, b)| a - b).collect()
        };
        if max_abs(&pg) <= cfg.gradient_tol {
            converged = true;
            break;
        }
        let mut found = None;
        let mut a = alpha;
        for _ in 0..40 {
            let cand: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - a * gi).collect();
            let cand = project(&cand);
            let descent = dot(&g, &vec_diff(&cand, &z));
            if descent < 0.0 {
                let c = objective(&cand);
                if c <= cost + 1e-4 * descent {
                    found = Some((cand, c, a));
                    break;
                }
            }
            a *= 0.5;
        }
        match found {
            Some((cand, c, a_used)) => {
                let step = max_abs(&vec_diff(&cand, &z));
                z = cand;
                cost = c;
                alpha = (a_used * 2.0).min(1e6);
                if step <= cfg.step_tol * (1.0 + max_abs(&z)) {
                    converged = true;
                    break;
                }
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    LmOutput {
        z,
        iterations,
        converged,
    }
}

fn vec_diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(libm::fabs(*x)))
}
