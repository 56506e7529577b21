//! Discounted moving horizon estimation and full-information estimation.
//!
//! At time `t` the moving horizon estimator considers the window of the
//! `M_t = min{t, M}` most recent measurements and the filtering prior
//! `x̂_{t−M_t}`, and minimizes
//!
//! ```text
//! 2·η^{M_t}·‖x̂_{t−M_t|t} − x̂_{t−M_t}‖²_{P2}
//!   + Σ_{j=1}^{M_t} η^{j−1}·( 2‖ŵ_{t−j|t}‖²_Q + ‖ŷ_{t−j|t} − y_{t−j}‖²_R )
//! ```
//!
//! over the window-initial state and the disturbance sequence, with `j = 1`
//! denoting the most recent step (discount `η⁰`). The weights `(P2, Q, R, η)`
//! come from a detectability certificate, which is what turns the value
//! function into a stability certificate for the estimation error.
//!
//! The full-information variant replaces the quadratic weights with class-K
//! gains `(α2, σ_w, σ_y)` and runs over the entire history:
//!
//! ```text
//! η^t·α2(2‖x̂_{0|t} − x̂_0‖)
//!   + Σ_{j=1}^{t} η^{j−1}·( σ_w(2‖ŵ_{t−j|t}‖) + σ_y(‖ŷ_{t−j|t} − y_{t−j}‖) )
//! ```
//!
//! Window data is ordered oldest-first everywhere. Solutions are feasible by
//! construction: states and outputs are forward simulations of
//! `(x̂_init, ŵ)`, the decision variables are projected onto `X` and `W`
//! exactly, and interior-state/output boxes are handled by exterior penalty.
//! When the true state/disturbance sequence is supplied as a candidate, the
//! returned cost never exceeds the candidate's cost (the solver result is
//! replaced by the candidate otherwise); that is the premise the M-step decrease
//! guarantee rests on.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::certify::DiossCertificate;
use crate::linalg::{norm2, powi, vec_sub, Mat};
use crate::model::{ModelError, SystemModel};
use crate::nlls::{self, ShootingProblem};

#[derive(Debug, Clone, PartialEq)]
pub enum EstimateError {
    /// Window sequences disagree in length, or exceed the horizon.
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    DimensionMismatch(&'static str),
    /// Prior lies outside the state box.
    InfeasiblePrior,
    /// A solver tolerance is not positive.
    BadSolverConfig(&'static str),
    /// The class-K gain needs an inverse for this operation.
    MissingInverse(&'static str),
    Model(ModelError),
}

impl fmt::Display for EstimateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimateError::LengthMismatch {
                what,
                expected,
                got,
            } => {
                write!(f, "{what}: expected length {expected}, got {got}")
            }
            EstimateError::DimensionMismatch(what) => write!(f, "dimension mismatch: {what}"),
            EstimateError::InfeasiblePrior => write!(f, "prior estimate violates the state box"),
            EstimateError::BadSolverConfig(what) => {
                write!(f, "solver config: {what} must be positive")
            }
            EstimateError::MissingInverse(what) => write!(f, "{what} has no inverse map"),
            EstimateError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for EstimateError {}

impl From<ModelError> for EstimateError {
    fn from(e: ModelError) -> Self {
        EstimateError::Model(e)
    }
}

/// Initial guess policy for the window solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WarmStart {
    /// Start from the prior with zero disturbances.
    #[default]
    None,
    /// Shift the previous window's solution by one step.
    PreviousShifted,
    /// Start from the supplied true candidate (test mode).
    TrueSequence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub levenberg_lambda0: f64,
    /// Exterior penalty weight for interior-state and output boxes.
    pub penalty_weight: f64,
    pub warm_start: WarmStart,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 2000,
            gradient_tol: 1e-10,
            step_tol: 1e-13,
            levenberg_lambda0: 1e-3,
            penalty_weight: 1e6,
            warm_start: WarmStart::None,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), EstimateError> {
        if self.max_iterations == 0 {
            return Err(EstimateError::BadSolverConfig("max_iterations"));
        }
        if !(self.gradient_tol > 0.0) {
            return Err(EstimateError::BadSolverConfig("gradient_tol"));
        }
        if !(self.step_tol > 0.0) {
            return Err(EstimateError::BadSolverConfig("step_tol"));
        }
        if !(self.levenberg_lambda0 > 0.0) {
            return Err(EstimateError::BadSolverConfig("levenberg_lambda0"));
        }
        if self.penalty_weight < 0.0 {
            return Err(EstimateError::BadSolverConfig("penalty_weight"));
        }
        Ok(())
    }
}

/// Moving horizon estimator configuration: horizon, certificate-derived
/// weights, and solver knobs.
#[derive(Debug, Clone)]
pub struct MheConfig {
    pub horizon: usize,
    pub cert: DiossCertificate,
    pub solver: SolverConfig,
}

impl MheConfig {
    pub fn new(horizon: usize, cert: DiossCertificate) -> Self {
        MheConfig {
            horizon,
            cert,
            solver: SolverConfig::default(),
        }
    }
}

/// Input/output window, oldest first.
#[derive(Debug, Clone, Copy)]
pub struct EstimationWindow<'a> {
    pub inputs: &'a [Vec<f64>],
    pub outputs: &'a [Vec<f64>],
}

impl<'a> EstimationWindow<'a> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// The true window-initial state and disturbance sequence, used to upper
/// bound the value function in monitored runs.
#[derive(Debug, Clone)]
pub struct TrueCandidate {
    pub x_init: Vec<f64>,
    pub w_seq: Vec<Vec<f64>>,
}

/// Window solution; states and outputs are the forward simulation of
/// `(x_init, w_seq)`, so the model equations hold exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub x_init: Vec<f64>,
    pub w_seq: Vec<Vec<f64>>,
    /// `M_t + 1` states, oldest first; the last one is the estimate `x̂_t`.
    pub x_seq: Vec<Vec<f64>>,
    pub y_seq: Vec<Vec<f64>>,
    /// Objective value at the returned solution.
    pub cost: f64,
    /// Objective value of the true-sequence candidate, when supplied.
    pub candidate_cost: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest interior-state/output box overshoot at the solution.
    pub box_violation: f64,
    /// Whether the candidate replaced the solver's own local solution.
    pub replaced_by_candidate: bool,
}

impl EstimateResult {
    /// The state estimate `x̂_t` extracted from the window.
    pub fn estimate(&self) -> &[f64] {
        self.x_seq
            .last()
            .expect("x_seq holds at least the initial state")
    }
}

/// Scalar comparison(-class) function `r ↦ value(r)` with optional inverse.
pub struct KFunction {
    value: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    inverse: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    class: KClass,
    quad: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KClass {
    K,
    KInfinity,
}

impl KFunction {
    /// `s ↦ c·s²` with exact inverse; the workhorse for exponential
    /// certificates.
    pub fn quadratic(c: f64) -> Self {
        KFunction {
            value: Box::new(move |s| c * s * s),
            inverse: if c > 0.0 {
                Some(Box::new(move |r| libm::sqrt(r / c)))
            } else {
                None
            },
            class: KClass::KInfinity,
            quad: Some(c),
        }
    }

    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, class: KClass) -> Self {
        KFunction {
            value: Box::new(f),
            inverse: None,
            class,
            quad: None,
        }
    }

    pub fn with_inverse(mut self, inv: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.inverse = Some(Box::new(inv));
        self
    }

    pub fn value(&self, s: f64) -> f64 {
        (self.value)(s)
    }

    pub fn inverse(&self, r: f64) -> Option<f64> {
        self.inverse.as_ref().map(|f| f(r))
    }

    pub fn class(&self) -> KClass {
        self.class
    }

    /// `Some(c)` when the function is exactly `c·s²`.
    pub fn quad_coeff(&self) -> Option<f64> {
        self.quad
    }

    /// Spot-check the class axioms on a grid: zero at zero, strictly
    /// increasing between consecutive grid points.
    pub fn check_on_grid(&self, grid: &[f64]) -> bool {
        if libm::fabs(self.value(0.0)) > 0.0 {
            return false;
        }
        let mut prev_s = 0.0;
        let mut prev_v = 0.0;
        for &s in grid {
            if s <= prev_s {
                continue;
            }
            let v = self.value(s);
            if v <= prev_v {
                return false;
            }
            prev_s = s;
            prev_v = v;
        }
        true
    }
}

impl fmt::Debug for KFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KFunction")
            .field("class", &self.class)
            .field("quad", &self.quad)
            .field("has_inverse", &self.inverse.is_some())
            .finish()
    }
}

/// Class-K data of the full-information objective.
#[derive(Debug)]
pub struct FieGains {
    pub eta: f64,
    pub alpha1: KFunction,
    pub alpha2: KFunction,
    pub sigma_w: KFunction,
    pub sigma_y: KFunction,
}

impl FieGains {
    /// Quadratic gains induced by a certificate:
    /// `α1 = λ_min(P1)·s²`, `α2 = λ_max(P2)·s²`, `σ_w = λ_max(Q)·s²`,
    /// `σ_y = λ_max(R)·s²`.
    pub fn from_certificate(cert: &DiossCertificate) -> Self {
        FieGains {
            eta: cert.eta(),
            alpha1: KFunction::quadratic(cert.c1()),
            alpha2: KFunction::quadratic(cert.c2()),
            sigma_w: KFunction::quadratic(cert.q().sym_eig_max()),
            sigma_y: KFunction::quadratic(cert.r().sym_eig_max()),
        }
    }

    /// Quadratic coefficients `(α2, σ_w, σ_y)` when all three gains are
    /// quadratic, enabling the least-squares fast path.
    pub fn quadratic_coeffs(&self) -> Option<(f64, f64, f64)> {
        Some((
            self.alpha2.quad_coeff()?,
            self.sigma_w.quad_coeff()?,
            self.sigma_y.quad_coeff()?,
        ))
    }
}

/// The discounted window objective at explicit sequences (oldest first).
///
/// `M_t` is the common sequence length; `j = 1` (the most recent step)
/// carries discount `η⁰`.
pub fn mhe_cost(
    cfg: &MheConfig,
    prior: &[f64],
    x_init: &[f64],
    w_seq: &[Vec<f64>],
    y_est: &[Vec<f64>],
    y_meas: &[Vec<f64>],
) -> Result<f64, EstimateError> {
    let mt = w_seq.len();
    if y_est.len() != mt {
        return Err(EstimateError::LengthMismatch {
            what: "estimated outputs",
            expected: mt,
            got: y_est.len(),
        });
    }
    if y_meas.len() != mt {
        return Err(EstimateError::LengthMismatch {
            what: "measured outputs",
            expected: mt,
            got: y_meas.len(),
        });
    }
    let n = cfg.cert.state_dim();
    if prior.len() != n || x_init.len() != n {
        return Err(EstimateError::DimensionMismatch(
            "prior/x_init vs certificate",
        ));
    }
    let eta = cfg.cert.eta();
    let dx = vec_sub(x_init, prior);
    let mut cost = 2.0 * powi(eta, mt as u64) * cfg.cert.p2().quad_form(&dx);
    for s in 0..mt {
        if w_seq[s].len() != cfg.cert.q().rows() {
            return Err(EstimateError::DimensionMismatch("disturbance vs Q"));
        }
        if y_est[s].len() != cfg.cert.r().rows() || y_meas[s].len() != cfg.cert.r().rows() {
            return Err(EstimateError::DimensionMismatch("output vs R"));
        }
        let discount = powi(eta, (mt - 1 - s) as u64);
        let dy = vec_sub(&y_est[s], &y_meas[s]);
        cost += discount * (2.0 * cfg.cert.q().quad_form(&w_seq[s]) + cfg.cert.r().quad_form(&dy));
    }
    Ok(cost)
}

/// The full-information objective at explicit sequences (oldest first).
pub fn fie_cost(
    gains: &FieGains,
    prior: &[f64],
    x_init: &[f64],
    w_seq: &[Vec<f64>],
    y_est: &[Vec<f64>],
    y_meas: &[Vec<f64>],
) -> Result<f64, EstimateError> {
    let t = w_seq.len();
    if y_est.len() != t {
        return Err(EstimateError::LengthMismatch {
            what: "estimated outputs",
            expected: t,
            got: y_est.len(),
        });
    }
    if y_meas.len() != t {
        return Err(EstimateError::LengthMismatch {
            what: "measured outputs",
            expected: t,
            got: y_meas.len(),
        });
    }
    if prior.len() != x_init.len() {
        return Err(EstimateError::DimensionMismatch("prior vs x_init"));
    }
    let eta = gains.eta;
    let dx = norm2(&vec_sub(x_init, prior));
    let mut cost = powi(eta, t as u64) * gains.alpha2.value(2.0 * dx);
    for s in 0..t {
        if y_est[s].len() != y_meas[s].len() {
            return Err(EstimateError::DimensionMismatch("output lengths"));
        }
        let discount = powi(eta, (t - 1 - s) as u64);
        let dy = norm2(&vec_sub(&y_est[s], &y_meas[s]));
        cost += discount * (gains.sigma_w.value(2.0 * norm2(&w_seq[s])) + gains.sigma_y.value(dy));
    }
    Ok(cost)
}

fn check_window(model: &SystemModel, window: &EstimationWindow<'_>) -> Result<(), EstimateError> {
    if window.outputs.len() != window.inputs.len() {
        return Err(EstimateError::LengthMismatch {
            what: "window outputs",
            expected: window.inputs.len(),
            got: window.outputs.len(),
        });
    }
    for u in window.inputs {
        if u.len() != model.input_dim() {
            return Err(EstimateError::DimensionMismatch("window input"));
        }
    }
    for y in window.outputs {
        if y.len() != model.output_dim() {
            return Err(EstimateError::DimensionMismatch("window output"));
        }
    }
    Ok(())
}

fn initial_guess(
    problem: &ShootingProblem<'_>,
    warm: WarmStart,
    prior: &[f64],
    previous: Option<&EstimateResult>,
    candidate: Option<&TrueCandidate>,
) -> Vec<f64> {
    let n = problem.model.state_dim();
    let q = problem.model.disturbance_dim();
    let t = problem.horizon();
    let cold = || {
        let mut z = prior.to_vec();
        z.extend(vec![0.0; t * q]);
        z
    };
    match warm {
        WarmStart::None => cold(),
        WarmStart::TrueSequence => match candidate {
            Some(c) if c.x_init.len() == n && c.w_seq.len() == t => {
                let mut z = c.x_init.clone();
                for w in &c.w_seq {
                    z.extend(w.iter().copied());
                }
                z
            }
            _ => cold(),
        },
        WarmStart::PreviousShifted => match previous {
            Some(prev) => {
                let prev_t = prev.w_seq.len();
                if prev_t + 1 == t && prev.x_init.len() == n {
                    // growing phase: same initial time, one more step
                    let mut z = prev.x_init.clone();
                    for w in &prev.w_seq {
                        z.extend(w.iter().copied());
                    }
                    z.extend(vec![0.0; q]);
                    z
                } else if prev_t == t && t > 0 && prev.x_seq.len() > 1 {
                    // sliding phase: drop the oldest step
                    let mut z = prev.x_seq[1].clone();
                    for w in prev.w_seq.iter().skip(1) {
                        z.extend(w.iter().copied());
                    }
                    z.extend(vec![0.0; q]);
                    z
                } else {
                    cold()
                }
            }
            None => cold(),
        },
    }
}

/// Solve the moving horizon window problem.
///
/// `window.len()` must equal `M_t = min{t, M}`; the prior must lie in `X`.
/// With a candidate supplied, the returned cost is at most the candidate
/// cost. Non-convergence within the iteration budget is reported through
/// `converged`, never silently dropped.
pub fn solve_mhe(
    model: &SystemModel,
    cfg: &MheConfig,
    prior: &[f64],
    window: &EstimationWindow<'_>,
    candidate: Option<&TrueCandidate>,
    previous: Option<&EstimateResult>,
) -> Result<EstimateResult, EstimateError> {
    cfg.solver.validate()?;
    check_window(model, window)?;
    if cfg.cert.state_dim() != model.state_dim()
        || cfg.cert.q().rows() != model.disturbance_dim()
        || cfg.cert.r().rows() != model.output_dim()
    {
        return Err(EstimateError::DimensionMismatch("certificate vs model"));
    }
    let mt = window.len();
    if mt > cfg.horizon {
        return Err(EstimateError::LengthMismatch {
            what: "window",
            expected: cfg.horizon,
            got: mt,
        });
    }
    if prior.len() != model.state_dim() {
        return Err(EstimateError::DimensionMismatch("prior"));
    }
    if !model.sets.x.contains(prior) {
        return Err(EstimateError::InfeasiblePrior);
    }
    let eta = cfg.cert.eta();
    let prior_sqrt = cfg.cert.p2().scale(2.0 * powi(eta, mt as u64)).sqrt_psd();
    let dist_sqrt = cfg.cert.q().scale(2.0).sqrt_psd();
    let out_sqrt = cfg.cert.r().sqrt_psd();
    let problem = ShootingProblem {
        model,
        inputs: window.inputs,
        meas: window.outputs,
        prior,
        prior_sqrt,
        dist_sqrt,
        out_sqrt,
        eta,
        penalty_weight: cfg.solver.penalty_weight,
    };
    let z0 = initial_guess(&problem, cfg.solver.warm_start, prior, previous, candidate);
    let out = nlls::lm_solve(&problem, &z0, &cfg.solver);
    let plain_cost = |x_init: &[f64], w_seq: &[Vec<f64>], sim: &nlls::Simulated| {
        mhe_cost(cfg, prior, x_init, w_seq, &sim.outputs, window.outputs)
    };
    finish_solve(model, &problem, out, candidate, &plain_cost)
}

/// Solve the full-information problem over the whole history.
///
/// Quadratic gains take the least-squares path; general gains fall back to
/// projected gradient descent with numerically differentiated scalar gains.
pub fn solve_fie(
    model: &SystemModel,
    gains: &FieGains,
    solver: &SolverConfig,
    prior: &[f64],
    history: &EstimationWindow<'_>,
    candidate: Option<&TrueCandidate>,
    previous: Option<&EstimateResult>,
) -> Result<EstimateResult, EstimateError> {
    solver.validate()?;
    check_window(model, history)?;
    if prior.len() != model.state_dim() {
        return Err(EstimateError::DimensionMismatch("prior"));
    }
    if !model.sets.x.contains(prior) {
        return Err(EstimateError::InfeasiblePrior);
    }
    let t = history.len();
    let eta = gains.eta;
    let plain_cost = |x_init: &[f64], w_seq: &[Vec<f64>], sim: &nlls::Simulated| {
        fie_cost(gains, prior, x_init, w_seq, &sim.outputs, history.outputs)
    };
    if let Some((c_a2, c_w, c_y)) = gains.quadratic_coeffs() {
        let n = model.state_dim();
        let prior_sqrt = Mat::scaled_identity(n, libm::sqrt(4.0 * c_a2 * powi(eta, t as u64)));
        let dist_sqrt = Mat::scaled_identity(model.disturbance_dim(), libm::sqrt(4.0 * c_w));
        let out_sqrt = Mat::scaled_identity(model.output_dim(), libm::sqrt(c_y));
        let problem = ShootingProblem {
            model,
            inputs: history.inputs,
            meas: history.outputs,
            prior,
            prior_sqrt,
            dist_sqrt,
            out_sqrt,
            eta,
            penalty_weight: solver.penalty_weight,
        };
        let z0 = initial_guess(&problem, solver.warm_start, prior, previous, candidate);
        let out = nlls::lm_solve(&problem, &z0, solver);
        return finish_solve(model, &problem, out, candidate, &plain_cost);
    }
    // general class-K objective: projected descent with chain-rule gradient
    let problem = ShootingProblem {
        model,
        inputs: history.inputs,
        meas: history.outputs,
        prior,
        prior_sqrt: Mat::identity(model.state_dim()),
        dist_sqrt: Mat::identity(model.disturbance_dim()),
        out_sqrt: Mat::identity(model.output_dim()),
        eta,
        penalty_weight: solver.penalty_weight,
    };
    let objective = |z: &[f64]| -> f64 {
        let sim = problem.simulate(z);
        let (x0, ws) = problem.split_z(z);
        let w_seq: Vec<Vec<f64>> = ws.iter().map(|w| w.to_vec()).collect();
        let base = fie_cost(gains, prior, x0, &w_seq, &sim.outputs, history.outputs)
            .expect("dimensions checked");
        let mut pen = 0.0;
        if solver.penalty_weight > 0.0 {
            for xs in sim.states.iter().skip(1) {
                let v = model.sets.x.violation(xs);
                pen += v * v;
            }
            for ys in sim.outputs.iter() {
                let v = model.sets.y.violation(ys);
                pen += v * v;
            }
        }
        base + solver.penalty_weight * pen
    };
    let gradient = |z: &[f64]| -> Vec<f64> {
        fie_gradient(&problem, gains, prior, history, z, solver.penalty_weight)
    };
    let project = |z: &[f64]| problem.project(z);
    let z0 = initial_guess(&problem, solver.warm_start, prior, previous, candidate);
    let out = nlls::projected_descent(&objective, &gradient, &project, &z0, solver);
    finish_solve(model, &problem, out, candidate, &plain_cost)
}

/// Central-difference derivative of a scalar gain.
fn kfun_slope(f: &KFunction, s: f64) -> f64 {
    let h = 1e-6 * (1.0 + libm::fabs(s));
    let lo = (s - h).max(0.0);
    (f.value(s + h) - f.value(lo)) / (s + h - lo)
}

fn fie_gradient(
    problem: &ShootingProblem<'_>,
    gains: &FieGains,
    prior: &[f64],
    history: &EstimationWindow<'_>,
    z: &[f64],
    penalty_weight: f64,
) -> Vec<f64> {
    let model = problem.model;
    let n = model.state_dim();
    let q = model.disturbance_dim();
    let t = problem.horizon();
    let nz = problem.z_dim();
    let sim = problem.simulate(z);
    let (x0, ws) = problem.split_z(z);
    let mut grad = vec![0.0; nz];

    // sensitivities, same recursion as the least-squares path
    let mut sens: Vec<Mat> = Vec::with_capacity(t + 1);
    let mut s0 = Mat::zeros(n, nz);
    for i in 0..n {
        s0[(i, i)] = 1.0;
    }
    sens.push(s0);
    let mut lins = Vec::with_capacity(t);
    for s in 0..t {
        let lin = model
            .linearize(&sim.states[s], &history.inputs[s], ws[s])
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

    // prior term: η^t · α2(2‖x0 − prior‖)
    let dx = vec_sub(x0, prior);
    let ndx = norm2(&dx);
    if ndx > 0.0 {
        let c = powi(gains.eta, t as u64) * kfun_slope(&gains.alpha2, 2.0 * ndx) * 2.0 / ndx;
        for i in 0..n {
            grad[i] += c * dx[i];
        }
    }
    for s in 0..t {
        let discount = powi(gains.eta, (t - 1 - s) as u64);
        // σ_w(2‖w_s‖)
        let nw = norm2(ws[s]);
        if nw > 0.0 {
            let c = discount * kfun_slope(&gains.sigma_w, 2.0 * nw) * 2.0 / nw;
            for j in 0..q {
                grad[n + s * q + j] += c * ws[s][j];
            }
        }
        // σ_y(‖ŷ_s − y_s‖)
        let dy = vec_sub(&sim.outputs[s], &history.outputs[s]);
        let ny = norm2(&dy);
        if ny > 0.0 {
            let c = discount * kfun_slope(&gains.sigma_y, ny) / ny;
            // ∂ŷ_s/∂z = C_s S_s + D_s E_s
            // chain through sensitivities: grad += c·(S_sᵀ Cᵀ dy + Eᵀ Dᵀ dy)
            let ctd = lins[s].c.tr_mul_vec(&dy);
            let sty = sens[s].tr_mul_vec(&ctd);
            for j in 0..nz {
                grad[j] += c * sty[j];
            }
            let dtd = lins[s].d.tr_mul_vec(&dy);
            for j in 0..q {
                grad[n + s * q + j] += c * dtd[j];
            }
        }
    }
    if penalty_weight > 0.0 {
        for s in 1..=t {
            for i in 0..n {
                let x = sim.states[s][i];
                let (lo, hi) = (model.sets.x.lower(i), model.sets.x.upper(i));
                let over = if x > hi {
                    x - hi
                } else if x < lo {
                    x - lo
                } else {
                    0.0
                };
                if over != 0.0 {
                    for j in 0..nz {
                        grad[j] += 2.0 * penalty_weight * over * sens[s][(i, j)];
                    }
                }
            }
        }
        for s in 0..t {
            for i in 0..model.output_dim() {
                let y = sim.outputs[s][i];
                let (lo, hi) = (model.sets.y.lower(i), model.sets.y.upper(i));
                let over = if y > hi {
                    y - hi
                } else if y < lo {
                    y - lo
                } else {
                    0.0
                };
                if over != 0.0 {
                    let crow = lins[s].c.mul(&sens[s]);
                    for j in 0..nz {
                        grad[j] += 2.0 * penalty_weight * over * crow[(i, j)];
                    }
                    for j in 0..q {
                        grad[n + s * q + j] += 2.0 * penalty_weight * over * lins[s].d[(i, j)];
                    }
                }
            }
        }
    }
    grad
}

fn finish_solve(
    model: &SystemModel,
    problem: &ShootingProblem<'_>,
    out: nlls::LmOutput,
    candidate: Option<&TrueCandidate>,
    plain_cost: &dyn Fn(&[f64], &[Vec<f64>], &nlls::Simulated) -> Result<f64, EstimateError>,
) -> Result<EstimateResult, EstimateError> {
    let q = model.disturbance_dim();
    let n = model.state_dim();
    let t = problem.horizon();
    let (x0, ws) = problem.split_z(&out.z);
    let x_init = x0.to_vec();
    let w_seq: Vec<Vec<f64>> = ws.iter().map(|w| w.to_vec()).collect();
    let sim = problem.simulate(&out.z);
    let cost = plain_cost(&x_init, &w_seq, &sim)?;
    let box_violation = problem.box_violation(&sim);

    let mut result = EstimateResult {
        x_init,
        w_seq,
        x_seq: sim.states,
        y_seq: sim.outputs,
        cost,
        candidate_cost: None,
        converged: out.converged,
        iterations: out.iterations,
        box_violation,
        replaced_by_candidate: false,
    };
    if let Some(cand) = candidate {
        if cand.x_init.len() != n {
            return Err(EstimateError::DimensionMismatch("candidate state"));
        }
        if cand.w_seq.len() != t {
            return Err(EstimateError::LengthMismatch {
                what: "candidate disturbances",
                expected: t,
                got: cand.w_seq.len(),
            });
        }
        for w in &cand.w_seq {
            if w.len() != q {
                return Err(EstimateError::DimensionMismatch("candidate disturbance"));
            }
        }
        let mut zc = cand.x_init.clone();
        for w in &cand.w_seq {
            zc.extend(w.iter().copied());
        }
        let cand_sim = problem.simulate(&zc);
        let cand_cost = plain_cost(&cand.x_init, &cand.w_seq, &cand_sim)?;
        result.candidate_cost = Some(cand_cost);
        if result.cost > cand_cost {
            result.x_init = cand.x_init.clone();
            result.w_seq = cand.w_seq.clone();
            result.box_violation = problem.box_violation(&cand_sim);
            result.x_seq = cand_sim.states;
            result.y_seq = cand_sim.outputs;
            result.cost = cand_cost;
            result.replaced_by_candidate = true;
        }
    }
    Ok(result)
}
