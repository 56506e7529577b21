//! The perturbed nonlinear system class and its benchmark instance.
//!
//! A [`SystemModel`] is the discrete-time system
//!
//! ```text
//! x⁺ = f(x, u, w),    y = h(x, u, w),
//! ```
//!
//! with state dimension `n`, input dimension `m`, generalized disturbance
//! dimension `q` (covering process noise and measurement noise alike), and
//! output dimension `p`. Dynamics, output map, and their analytic Jacobians
//! are supplied as callbacks; the domain knowledge `X × U × W × Y` is a
//! product of per-coordinate intervals ([`Bounds`]), with `±∞` encoding
//! unconstrained coordinates.
//!
//! All types are immutable after construction and all operations are pure,
//! so models can be shared freely across threads.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{max_abs_diff, Mat};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// A vector argument does not match the model dimensions.
    DimensionMismatch {
        expected: usize,
        got: usize,
        what: &'static str,
    },
    /// Interval bounds are inconsistent (lower > upper or NaN).
    BadBounds { index: usize },
    /// Stored trajectory lengths are inconsistent.
    BadTrajectory(&'static str),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::DimensionMismatch {
                expected,
                got,
                what,
            } => {
                write!(f, "{what}: expected dimension {expected}, got {got}")
            }
            ModelError::BadBounds { index } => {
                write!(f, "invalid interval at coordinate {index}")
            }
            ModelError::BadTrajectory(what) => write!(f, "inconsistent trajectory: {what}"),
        }
    }
}

impl core::error::Error for ModelError {}

/// Axis-aligned box: one closed interval per coordinate, infinities allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ModelError> {
        if lower.len() != upper.len() {
            return Err(ModelError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
                what: "bounds",
            });
        }
        for i in 0..lower.len() {
            if lower[i].is_nan() || upper[i].is_nan() || lower[i] > upper[i] {
                return Err(ModelError::BadBounds { index: i });
            }
        }
        Ok(Bounds { lower, upper })
    }

    pub fn from_intervals(iv: &[(f64, f64)]) -> Result<Self, ModelError> {
        Bounds::new(
            iv.iter().map(|p| p.0).collect(),
            iv.iter().map(|p| p.1).collect(),
        )
    }

    /// All coordinates unconstrained.
    pub fn unbounded(dim: usize) -> Self {
        Bounds {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    /// `|v_i| ≤ r` in every coordinate.
    pub fn symmetric(dim: usize, r: f64) -> Self {
        Bounds {
            lower: vec![-r; dim],
            upper: vec![r; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self, i: usize) -> f64 {
        self.lower[i]
    }

    pub fn upper(&self, i: usize) -> f64 {
        self.upper[i]
    }

    pub fn is_finite(&self, i: usize) -> bool {
        self.lower[i].is_finite() && self.upper[i].is_finite()
    }

    pub fn all_finite(&self) -> bool {
        (0..self.dim()).all(|i| self.is_finite(i))
    }

    /// Closed-interval membership.
    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.dim()
            && v.iter()
                .enumerate()
                .all(|(i, x)| *x >= self.lower[i] && *x <= self.upper[i])
    }

    /// Euclidean projection (per-coordinate clamp).
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim());
        v.iter()
            .enumerate()
            .map(|(i, x)| x.max(self.lower[i]).min(self.upper[i]))
            .collect()
    }

    /// Largest per-coordinate overshoot; zero inside the box.
    pub fn violation(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim());
        let mut worst = 0.0f64;
        for (i, x) in v.iter().enumerate() {
            worst = worst.max(self.lower[i] - x).max(x - self.upper[i]);
        }
        worst.max(0.0)
    }

    /// A representative interior point: the midpoint for finite coordinates,
    /// zero (clamped one unit inside any finite edge) otherwise.
    pub fn interior_point(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let (lo, hi) = (self.lower[i], self.upper[i]);
                if lo.is_finite() && hi.is_finite() {
                    0.5 * (lo + hi)
                } else if lo.is_finite() {
                    if lo < 0.0 {
                        0.0
                    } else {
                        lo + 1.0
                    }
                } else if hi.is_finite() {
                    if hi > 0.0 {
                        0.0
                    } else {
                        hi - 1.0
                    }
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Domain knowledge `X × U × W × Y` of the real system trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSets {
    pub x: Bounds,
    pub u: Bounds,
    pub w: Bounds,
    pub y: Bounds,
}

/// Pointwise linearization of `(f, h)` at one `(x, u, w)`.
#[derive(Debug, Clone)]
pub struct Linearization {
    /// `∂f/∂x`, `n × n`.
    pub a: Mat,
    /// `∂f/∂w`, `n × q`.
    pub b: Mat,
    /// `∂h/∂x`, `p × n`.
    pub c: Mat,
    /// `∂h/∂w`, `p × q`.
    pub d: Mat,
}

pub type VectorFn = dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync;
pub type JacobianFn = dyn Fn(&[f64], &[f64], &[f64]) -> (Mat, Mat) + Send + Sync;

/// Discrete-time perturbed system with analytic Jacobians and box domains.
pub struct SystemModel {
    n: usize,
    m: usize,
    q: usize,
    p: usize,
    f: Box<VectorFn>,
    h: Box<VectorFn>,
    jac_f: Box<JacobianFn>,
    jac_h: Box<JacobianFn>,
    pub sets: ConstraintSets,
}

impl SystemModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        m: usize,
        q: usize,
        p: usize,
        f: Box<VectorFn>,
        h: Box<VectorFn>,
        jac_f: Box<JacobianFn>,
        jac_h: Box<JacobianFn>,
        sets: ConstraintSets,
    ) -> Result<Self, ModelError> {
        for (what, want, got) in [
            ("state bounds", n, sets.x.dim()),
            ("input bounds", m, sets.u.dim()),
            ("disturbance bounds", q, sets.w.dim()),
            ("output bounds", p, sets.y.dim()),
        ] {
            if want != got {
                return Err(ModelError::DimensionMismatch {
                    expected: want,
                    got,
                    what,
                });
            }
        }
        Ok(SystemModel {
            n,
            m,
            q,
            p,
            f,
            h,
            jac_f,
            jac_h,
            sets,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn disturbance_dim(&self) -> usize {
        self.q
    }

    pub fn output_dim(&self) -> usize {
        self.p
    }

    fn check_args(&self, x: &[f64], u: &[f64], w: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.n {
            return Err(ModelError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
                what: "state",
            });
        }
        if u.len() != self.m {
            return Err(ModelError::DimensionMismatch {
                expected: self.m,
                got: u.len(),
                what: "input",
            });
        }
        if w.len() != self.q {
            return Err(ModelError::DimensionMismatch {
                expected: self.q,
                got: w.len(),
                what: "disturbance",
            });
        }
        Ok(())
    }

    /// One step of the dynamics: `(f(x,u,w), h(x,u,w))`.
    pub fn step(
        &self,
        x: &[f64],
        u: &[f64],
        w: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        self.check_args(x, u, w)?;
        let xn = (self.f)(x, u, w);
        let y = (self.h)(x, u, w);
        debug_assert_eq!(xn.len(), self.n);
        debug_assert_eq!(y.len(), self.p);
        Ok((xn, y))
    }

    pub fn dynamics(&self, x: &[f64], u: &[f64], w: &[f64]) -> Vec<f64> {
        (self.f)(x, u, w)
    }

    pub fn output(&self, x: &[f64], u: &[f64], w: &[f64]) -> Vec<f64> {
        (self.h)(x, u, w)
    }

    /// Analytic linearization `(A, B, C, D)` at `(x, u, w)`.
    pub fn linearize(&self, x: &[f64], u: &[f64], w: &[f64]) -> Result<Linearization, ModelError> {
        self.check_args(x, u, w)?;
        let (a, b) = (self.jac_f)(x, u, w);
        let (c, d) = (self.jac_h)(x, u, w);
        debug_assert_eq!((a.rows(), a.cols()), (self.n, self.n));
        debug_assert_eq!((b.rows(), b.cols()), (self.n, self.q));
        debug_assert_eq!((c.rows(), c.cols()), (self.p, self.n));
        debug_assert_eq!((d.rows(), d.cols()), (self.p, self.q));
        Ok(Linearization { a, b, c, d })
    }
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("q", &self.q)
            .field("p", &self.p)
            .finish_non_exhaustive()
    }
}

/// Per-block report of analytic-vs-finite-difference Jacobian agreement.
///
/// Deviations are `|analytic − central difference| / (1 + |analytic|)`,
/// maximized over entries and sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    pub max_dev_a: f64,
    pub max_dev_b: f64,
    pub max_dev_c: f64,
    pub max_dev_d: f64,
    pub tol: f64,
}

impl JacobianReport {
    pub fn max_dev(&self) -> f64 {
        self.max_dev_a
            .max(self.max_dev_b)
            .max(self.max_dev_c)
            .max(self.max_dev_d)
    }

    pub fn pass(&self) -> bool {
        self.max_dev() <= self.tol
    }
}

/// Compare analytic Jacobians against central finite differences of `f`, `h`
/// at the given sample points (which should lie in the interior of the
/// domain so the difference stencil stays admissible). Report-only.
pub fn check_jacobians(
    model: &SystemModel,
    samples: &[(Vec<f64>, Vec<f64>, Vec<f64>)],
    tol: f64,
) -> Result<JacobianReport, ModelError> {
    let mut report = JacobianReport {
        max_dev_a: 0.0,
        max_dev_b: 0.0,
        max_dev_c: 0.0,
        max_dev_d: 0.0,
        tol,
    };
    for (x, u, w) in samples {
        let lin = model.linearize(x, u, w)?;
        let fd = |wrt_w: bool, of_h: bool| -> Mat {
            let in_dim = if wrt_w { model.q } else { model.n };
            let out_dim = if of_h { model.p } else { model.n };
            let mut j = Mat::zeros(out_dim, in_dim);
            for col in 0..in_dim {
                let base = if wrt_w { w[col] } else { x[col] };
                let h_step = 1e-6 * (1.0 + libm::fabs(base));
                let eval = |v: f64| -> Vec<f64> {
                    let mut xx = x.clone();
                    let mut ww = w.clone();
                    if wrt_w {
                        ww[col] = v;
                    } else {
                        xx[col] = v;
                    }
                    if of_h {
                        (model.h)(&xx, u, &ww)
                    } else {
                        (model.f)(&xx, u, &ww)
                    }
                };
                let fp = eval(base + h_step);
                let fm = eval(base - h_step);
                for row in 0..out_dim {
                    j[(row, col)] = (fp[row] - fm[row]) / (2.0 * h_step);
                }
            }
            j
        };
        let pairs = [
            (&lin.a, fd(false, false), &mut report.max_dev_a),
            (&lin.b, fd(true, false), &mut report.max_dev_b),
            (&lin.c, fd(false, true), &mut report.max_dev_c),
            (&lin.d, fd(true, true), &mut report.max_dev_d),
        ];
        for (analytic, numeric, slot) in pairs {
            for i in 0..analytic.rows() {
                for j in 0..analytic.cols() {
                    let dev = libm::fabs(analytic[(i, j)] - numeric[(i, j)])
                        / (1.0 + libm::fabs(analytic[(i, j)]));
                    if dev > *slot {
                        *slot = dev;
                    }
                }
            }
        }
    }
    Ok(report)
}

/// A stored system trajectory: `T+1` states and `T` inputs, disturbances,
/// and outputs, starting at discrete time `start_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub disturbances: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub start_time: i64,
}

impl Trajectory {
    pub fn new(
        states: Vec<Vec<f64>>,
        inputs: Vec<Vec<f64>>,
        disturbances: Vec<Vec<f64>>,
        outputs: Vec<Vec<f64>>,
        start_time: i64,
    ) -> Result<Self, ModelError> {
        let t = inputs.len();
        if states.len() != t + 1 {
            return Err(ModelError::BadTrajectory("need one more state than inputs"));
        }
        if disturbances.len() != t || outputs.len() != t {
            return Err(ModelError::BadTrajectory(
                "inputs, disturbances, outputs must share a length",
            ));
        }
        Ok(Trajectory {
            states,
            inputs,
            disturbances,
            outputs,
            start_time,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Re-simulate from `states[0]` and return the largest absolute deviation
    /// from the stored states and outputs. Zero means the trajectory obeys
    /// the model exactly.
    pub fn replay(&self, model: &SystemModel) -> Result<f64, ModelError> {
        let mut x = self.states[0].clone();
        let mut worst = 0.0f64;
        for k in 0..self.len() {
            let (xn, y) = model.step(&x, &self.inputs[k], &self.disturbances[k])?;
            worst = worst.max(max_abs_diff(&y, &self.outputs[k]));
            worst = worst.max(max_abs_diff(&xn, &self.states[k + 1]));
            x = xn;
        }
        Ok(worst)
    }

    /// Simulate `model` forward from `x0` under the given input and
    /// disturbance sequences.
    pub fn simulate(
        model: &SystemModel,
        x0: Vec<f64>,
        inputs: Vec<Vec<f64>>,
        disturbances: Vec<Vec<f64>>,
        start_time: i64,
    ) -> Result<Self, ModelError> {
        if inputs.len() != disturbances.len() {
            return Err(ModelError::BadTrajectory(
                "inputs and disturbances must share a length",
            ));
        }
        let mut states = vec![x0];
        let mut outputs = Vec::with_capacity(inputs.len());
        for k in 0..inputs.len() {
            let (xn, y) = model.step(states.last().unwrap(), &inputs[k], &disturbances[k])?;
            states.push(xn);
            outputs.push(y);
        }
        Ok(Trajectory {
            states,
            inputs,
            disturbances,
            outputs,
            start_time,
        })
    }
}

/// Parameters of the constant-volume batch reactor benchmark
/// (`2A ⇌ B`, Euler-discretized, with generalized disturbances).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactorParams {
    pub k1: f64,
    pub k2: f64,
    pub dt: f64,
    /// State box, one `(lower, upper)` per coordinate.
    pub x_box: [(f64, f64); 2],
    /// Disturbance box `|w_i| ≤ w_bound`.
    pub w_bound: f64,
}

impl Default for ReactorParams {
    fn default() -> Self {
        ReactorParams {
            k1: 0.16,
            k2: 0.0064,
            dt: 0.1,
            x_box: [(0.1, 4.5), (0.1, 4.5)],
            w_bound: 1e-3,
        }
    }
}

/// The batch-reactor benchmark with default parameters:
///
/// ```text
/// x1⁺ = x1 + dt·(−2·k1·x1² + 2·k2·x2) + 5·w1
/// x2⁺ = x2 + dt·(k1·x1² − k2·x2)      + 2·w2
/// y   = x1 + x2 + 10·w3
/// ```
///
/// with `k1 = 0.16`, `k2 = 0.0064`, `dt = 0.1`, prior knowledge
/// `X = [0.1, 4.5]²`, disturbances `|w_i| ≤ 1e-3`, no inputs, and
/// unconstrained outputs.
pub fn reactor_model() -> SystemModel {
    reactor_model_with(&ReactorParams::default())
}

/// The batch-reactor benchmark with explicit parameters.
pub fn reactor_model_with(params: &ReactorParams) -> SystemModel {
    let ReactorParams {
        k1,
        k2,
        dt,
        x_box,
        w_bound,
    } = *params;
    let f = move |x: &[f64], _u: &[f64], w: &[f64]| -> Vec<f64> {
        vec![
            x[0] + dt * (-2.0 * k1 * x[0] * x[0] + 2.0 * k2 * x[1]) + 5.0 * w[0],
            x[1] + dt * (k1 * x[0] * x[0] - k2 * x[1]) + 2.0 * w[1],
        ]
    };
    let h = move |x: &[f64], _u: &[f64], w: &[f64]| -> Vec<f64> { vec![x[0] + x[1] + 10.0 * w[2]] };
    let jac_f = move |x: &[f64], _u: &[f64], _w: &[f64]| -> (Mat, Mat) {
        let a = Mat::from_rows(&[
            &[1.0 - 4.0 * dt * k1 * x[0], 2.0 * dt * k2],
            &[2.0 * dt * k1 * x[0], 1.0 - dt * k2],
        ]);
        let b = Mat::from_rows(&[&[5.0, 0.0, 0.0], &[0.0, 2.0, 0.0]]);
        (a, b)
    };
    let jac_h = move |_x: &[f64], _u: &[f64], _w: &[f64]| -> (Mat, Mat) {
        (
            Mat::from_rows(&[&[1.0, 1.0]]),
            Mat::from_rows(&[&[0.0, 0.0, 10.0]]),
        )
    };
    let sets = ConstraintSets {
        x: Bounds::from_intervals(&x_box).expect("reactor state box"),
        u: Bounds::unbounded(0),
        w: Bounds::symmetric(3, w_bound),
        y: Bounds::unbounded(1),
    };
    SystemModel::new(
        2,
        0,
        3,
        1,
        Box::new(f),
        Box::new(h),
        Box::new(jac_f),
        Box::new(jac_h),
        sets,
    )
    .expect("reactor dimensions are consistent")
}
