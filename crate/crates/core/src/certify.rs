//! Exponential incremental-detectability certificates and their LMIs.
//!
//! A [`DiossCertificate`] packages matrices `(P1, P2, Q, R)` and a decay rate
//! `η ∈ [0, 1)` such that the quadratic form `‖x − x̃‖²_P` (constant metric,
//! `P1 = P2 = P`, optionally expressed through a linear change of
//! coordinates) dissipates along any pair of admissible trajectories:
//!
//! ```text
//! [ AᵀPA − ηP − CᵀRC    AᵀPB − CᵀRD  ]
//! [ BᵀPA − DᵀRC         BᵀPB − Q − DᵀRD ]  ⪯ 0     on  X × U × W.
//! ```
//!
//! The pointwise condition is checked by sampling: at box vertices, which is
//! *exact* whenever `[A B]` is affine in the scheduled coordinates and `C`,
//! `D` are constant (each directional quadratic form is then coordinatewise
//! convex, so its maximum over the box sits at a vertex), or on a grid,
//! which is heuristic. [`affinity_check`] decides which case applies.
//!
//! Synthesis fixes `η`, treats the sampled conditions as linear constraints
//! in `(P, Q, R)`, and maximizes the feasibility margin `s` subject to
//! `lmi ⪯ −s·I`, `P ⪰ ε·I`, `trace(P) = n`, and box bounds on `Q`, `R`,
//! using the internal log-det barrier solver; `η` itself is scanned over a
//! grid because `ηP` is bilinear.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{solve_lower, Mat};
use crate::model::{Linearization, ModelError, SystemModel};
use crate::sdp::{self, BarrierParams, BarrierProblem, MatrixExpr};

#[derive(Debug, Clone, PartialEq)]
pub enum CertifyError {
    /// Decay rate outside `[0, 1)`.
    InvalidEta(f64),
    /// A matrix that must be positive definite is not.
    NotPositiveDefinite(&'static str),
    /// A matrix that must be positive semidefinite is not.
    NotPositiveSemidefinite(&'static str),
    /// `P1 ⪯ P ⪯ P2` violated.
    BoundsOrder,
    /// Coordinate transform is singular.
    SingularTransform,
    /// Vertex sampling requested over an unbounded coordinate.
    UnboundedVertex(usize),
    /// Grid sampling with more than one point on an unbounded coordinate.
    UnboundedGrid(usize),
    /// Sampling plan would generate an unreasonable number of points.
    TooManySamples,
    /// Grid counts do not match the combined (x, u, w) dimension.
    GridShape {
        expected: usize,
        got: usize,
    },
    /// Certificate has `P1 ≠ P2`, so no constant metric is available.
    NonConstantMetric,
    /// Matrix dimensions inconsistent with the model.
    DimensionMismatch(&'static str),
    /// No decay rate in the grid admits a feasible certificate.
    SynthesisInfeasible {
        best_eta: f64,
        best_margin: f64,
    },
    /// The barrier solver failed to make progress.
    SolverBreakdown,
    Model(ModelError),
}

impl fmt::Display for CertifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CertifyError::InvalidEta(e) => write!(f, "decay rate {e} outside [0, 1)"),
            CertifyError::NotPositiveDefinite(m) => write!(f, "{m} is not positive definite"),
            CertifyError::NotPositiveSemidefinite(m) => {
                write!(f, "{m} is not positive semidefinite")
            }
            CertifyError::BoundsOrder => write!(f, "bounding matrices violate P1 \u{2aaf} P \u{2aaf} P2"),
            CertifyError::SingularTransform => write!(f, "coordinate transform is singular"),
            CertifyError::UnboundedVertex(i) => {
                write!(f, "vertex sampling over unbounded coordinate {i}")
            }
            CertifyError::UnboundedGrid(i) => {
                write!(f, "grid sampling over unbounded coordinate {i}")
            }
            CertifyError::TooManySamples => write!(f, "sampling plan generates too many points"),
            CertifyError::GridShape { expected, got } => {
                write!(f, "grid counts: expected {expected} entries, got {got}")
            }
            CertifyError::NonConstantMetric => {
                write!(f, "certificate has P1 \u{2260} P2: no constant metric to verify")
            }
            CertifyError::DimensionMismatch(m) => write!(f, "dimension mismatch: {m}"),
            CertifyError::SynthesisInfeasible { best_eta, best_margin } => write!(
                f,
                "no feasible certificate on the decay grid (best margin {best_margin:.3e} at eta {best_eta})"
            ),
            CertifyError::SolverBreakdown => write!(f, "feasibility solver broke down"),
            CertifyError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for CertifyError {}

impl From<ModelError> for CertifyError {
    fn from(e: ModelError) -> Self {
        CertifyError::Model(e)
    }
}

/// Largest generalized eigenvalue of a positive definite pair: the largest
/// `λ` with `det(Anum − λ·Bden) = 0`, computed as `λ_max(L⁻¹·Anum·L⁻ᵀ)`
/// where `L` is the Cholesky factor of `Bden`.
pub fn generalized_eigmax(anum: &Mat, bden: &Mat) -> Result<f64, CertifyError> {
    if !anum.is_square() || !bden.is_square() || anum.rows() != bden.rows() {
        return Err(CertifyError::DimensionMismatch(
            "generalized eigenvalue pair",
        ));
    }
    if anum.cholesky().is_none() {
        return Err(CertifyError::NotPositiveDefinite("numerator"));
    }
    let l = bden
        .cholesky()
        .ok_or(CertifyError::NotPositiveDefinite("denominator"))?;
    let n = anum.rows();
    // Y = L⁻¹ A  (column solves), then W = Y L⁻ᵀ via row solves
    let mut y = Mat::zeros(n, n);
    for col in 0..n {
        let rhs: Vec<f64> = (0..n).map(|r| anum[(r, col)]).collect();
        let sol = solve_lower(&l, &rhs);
        for r in 0..n {
            y[(r, col)] = sol[r];
        }
    }
    let mut w = Mat::zeros(n, n);
    for row in 0..n {
        let sol = solve_lower(&l, y.row(row));
        for col in 0..n {
            w[(row, col)] = sol[col];
        }
    }
    Ok(w.symmetrized().sym_eig_max())
}

/// Exponential detectability certificate with constant quadratic metric.
#[derive(Debug, Clone, PartialEq)]
pub struct DiossCertificate {
    p1: Mat,
    p2: Mat,
    q: Mat,
    r: Mat,
    eta: f64,
    transform: Option<Mat>,
    quadratic: bool,
}

impl DiossCertificate {
    /// Certificate with `P1 = P2 = P` (quadratic metric `‖·‖²_P`).
    pub fn quadratic(p: Mat, q: Mat, r: Mat, eta: f64) -> Result<Self, CertifyError> {
        Self::validate_common(&p, &q, &r, eta)?;
        if p.sym_eig_min() <= 0.0 {
            return Err(CertifyError::NotPositiveDefinite("P"));
        }
        Ok(DiossCertificate {
            p1: p.clone(),
            p2: p,
            q,
            r,
            eta,
            transform: None,
            quadratic: true,
        })
    }

    /// Certificate known only through its sandwich bounds `P1 ⪯ W ⪯ P2`.
    /// Such certificates support the horizon calculus and the conservative
    /// monitors, but not LMI verification (there is no constant metric).
    pub fn with_bounds(p1: Mat, p2: Mat, q: Mat, r: Mat, eta: f64) -> Result<Self, CertifyError> {
        Self::validate_common(&p1, &q, &r, eta)?;
        if p1.sym_eig_min() <= 0.0 {
            return Err(CertifyError::NotPositiveDefinite("P1"));
        }
        if p2.rows() != p1.rows() || !p2.is_square() {
            return Err(CertifyError::DimensionMismatch("P2"));
        }
        if p2.sym_eig_min() <= 0.0 {
            return Err(CertifyError::NotPositiveDefinite("P2"));
        }
        if !p2.sub(&p1).is_psd() {
            return Err(CertifyError::BoundsOrder);
        }
        let quadratic = p1 == p2;
        Ok(DiossCertificate {
            p1,
            p2,
            q,
            r,
            eta,
            transform: None,
            quadratic,
        })
    }

    fn validate_common(p: &Mat, q: &Mat, r: &Mat, eta: f64) -> Result<(), CertifyError> {
        if !(0.0..1.0).contains(&eta) {
            return Err(CertifyError::InvalidEta(eta));
        }
        if !p.is_square() {
            return Err(CertifyError::DimensionMismatch("P"));
        }
        if !q.is_square() {
            return Err(CertifyError::DimensionMismatch("Q"));
        }
        if !r.is_square() {
            return Err(CertifyError::DimensionMismatch("R"));
        }
        if !q.is_psd() {
            return Err(CertifyError::NotPositiveSemidefinite("Q"));
        }
        if !r.is_psd() {
            return Err(CertifyError::NotPositiveSemidefinite("R"));
        }
        Ok(())
    }

    /// Attach a nonsingular coordinate change `x̄ = T·x`; the metric is then
    /// read as a quadratic form in the original coordinates while the LMI is
    /// assembled in the transformed ones.
    pub fn with_transform(mut self, t: Mat) -> Result<Self, CertifyError> {
        if !t.is_square() || t.rows() != self.p1.rows() {
            return Err(CertifyError::DimensionMismatch("transform"));
        }
        if t.inverse().is_none() {
            return Err(CertifyError::SingularTransform);
        }
        self.transform = Some(t);
        Ok(self)
    }

    pub fn p1(&self) -> &Mat {
        &self.p1
    }

    pub fn p2(&self) -> &Mat {
        &self.p2
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn transform(&self) -> Option<&Mat> {
        self.transform.as_ref()
    }

    /// The constant metric `P`, available when `P1 = P2`.
    pub fn metric(&self) -> Option<&Mat> {
        if self.quadratic {
            Some(&self.p1)
        } else {
            None
        }
    }

    pub fn is_quadratic(&self) -> bool {
        self.quadratic
    }

    pub fn state_dim(&self) -> usize {
        self.p1.rows()
    }

    /// `λ_max(P2, P1)`; exactly one for quadratic certificates.
    pub fn lambda_max_p2_p1(&self) -> f64 {
        if self.quadratic {
            1.0
        } else {
            generalized_eigmax(&self.p2, &self.p1).expect("certificate bounds are PD")
        }
    }

    /// `λ_min(P1)`.
    pub fn c1(&self) -> f64 {
        self.p1.sym_eig_min()
    }

    /// `λ_max(P2)`.
    pub fn c2(&self) -> f64 {
        self.p2.sym_eig_max()
    }

    /// Scale `(P1, P2, Q, R)` by `c > 0`; the certified property is invariant.
    pub fn scaled(&self, c: f64) -> Result<Self, CertifyError> {
        if !(c > 0.0) {
            return Err(CertifyError::NotPositiveDefinite("scale factor"));
        }
        Ok(DiossCertificate {
            p1: self.p1.scale(c),
            p2: self.p2.scale(c),
            q: self.q.scale(c),
            r: self.r.scale(c),
            eta: self.eta,
            transform: self.transform.clone(),
            quadratic: self.quadratic,
        })
    }

    /// Same matrices with a different decay rate. Raising the rate only
    /// weakens the dissipation inequality, so the certified property
    /// survives; lowering it requires re-verification.
    pub fn with_eta(&self, eta: f64) -> Result<Self, CertifyError> {
        if !(0.0..1.0).contains(&eta) {
            return Err(CertifyError::InvalidEta(eta));
        }
        let mut c = self.clone();
        c.eta = eta;
        Ok(c)
    }
}

/// One linearization sample: the point and the Jacobians evaluated there.
#[derive(Debug, Clone)]
pub struct LmiSample {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub lin: Linearization,
}

impl LmiSample {
    pub fn at(
        model: &SystemModel,
        x: Vec<f64>,
        u: Vec<f64>,
        w: Vec<f64>,
    ) -> Result<Self, CertifyError> {
        let lin = model.linearize(&x, &u, &w)?;
        Ok(LmiSample { x, u, w, lin })
    }
}

/// The dissipation block matrix at one sample:
///
/// ```text
/// [ AᵀPA − ηP − CᵀRC    AᵀPB − CᵀRD   ]
/// [ BᵀPA − DᵀRC         BᵀPB − Q − DᵀRD ]
/// ```
pub fn lmi_matrix(sample: &LmiSample, p: &Mat, q: &Mat, r: &Mat, eta: f64) -> Mat {
    lmi_matrix_lin(&sample.lin, p, q, r, eta)
}

pub(crate) fn lmi_matrix_lin(lin: &Linearization, p: &Mat, q: &Mat, r: &Mat, eta: f64) -> Mat {
    let (a, b, c, d) = (&lin.a, &lin.b, &lin.c, &lin.d);
    let n = a.cols();
    let qdim = b.cols();
    let pa = p.mul(a);
    let pb = p.mul(b);
    let rc = r.mul(c);
    let rd = r.mul(d);
    let mut tl = a.tr_mul(&pa);
    tl.axpy(-eta, p);
    tl = tl.sub(&c.tr_mul(&rc));
    let tr = a.tr_mul(&pb).sub(&c.tr_mul(&rd));
    let mut br = b.tr_mul(&pb).sub(q);
    br = br.sub(&d.tr_mul(&rd));
    let mut m = Mat::zeros(n + qdim, n + qdim);
    m.set_block(0, 0, &tl);
    m.set_block(0, n, &tr);
    m.set_block(n, 0, &tr.transpose());
    m.set_block(n, n, &br);
    m.symmetrized()
}

/// Whether a verification outcome is a proof over the whole box or only a
/// spot check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Soundness {
    /// Vertex enumeration with certified affine dependence: the sampled
    /// maximum bounds the maximum over the entire box.
    Exact,
    /// Finite sampling of a set where the inequality may vary nonlinearly.
    Heuristic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SamplingMode {
    /// All corners of the scheduled coordinates of the combined `(x, u, w)`
    /// box; remaining coordinates sit at an interior base point.
    Vertices { scheduled: Vec<usize> },
    /// Per-coordinate uniform grid over the combined box (count 1 pins the
    /// coordinate at the base point).
    Grid { counts: Vec<usize> },
}

/// How to sample `X × U × W` when checking the pointwise LMI.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub mode: SamplingMode,
    /// Soundness claimed by construction; verification downgrades the claim
    /// when the affinity certificate fails.
    pub soundness: Soundness,
}

const MAX_SAMPLES: usize = 1 << 20;

impl SamplingPlan {
    pub fn vertices(scheduled: Vec<usize>) -> Self {
        SamplingPlan {
            mode: SamplingMode::Vertices { scheduled },
            soundness: Soundness::Exact,
        }
    }

    /// Vertex plan over exactly the coordinates the Jacobians depend on,
    /// detected by probing; constant coordinates stay at the base point.
    pub fn vertices_auto(model: &SystemModel) -> Result<Self, CertifyError> {
        let dims = combined_intervals(model);
        let base = combined_base(model);
        let base_lin = stacked_jacobians(model, &base)?;
        let scale = 1.0 + base_lin.max_abs();
        let mut scheduled = Vec::new();
        for (i, (lo, hi)) in dims.iter().enumerate() {
            let probes = probe_values(*lo, *hi, base[i]);
            let mut varies = false;
            for v in probes {
                let mut pt = base.clone();
                pt[i] = v;
                let lin = stacked_jacobians(model, &pt)?;
                if lin.sub(&base_lin).max_abs() > 1e-12 * scale {
                    varies = true;
                    break;
                }
            }
            if varies {
                scheduled.push(i);
            }
        }
        Ok(SamplingPlan::vertices(scheduled))
    }

    pub fn grid(counts: Vec<usize>) -> Self {
        SamplingPlan {
            mode: SamplingMode::Grid { counts },
            soundness: Soundness::Heuristic,
        }
    }

    /// Materialize the sample points `(x, u, w)`.
    pub fn points(
        &self,
        model: &SystemModel,
    ) -> Result<Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>, CertifyError> {
        let dims = combined_intervals(model);
        let base = combined_base(model);
        let combined: Vec<Vec<f64>> = match &self.mode {
            SamplingMode::Vertices { scheduled } => {
                for &i in scheduled {
                    if i >= dims.len() {
                        return Err(CertifyError::DimensionMismatch(
                            "scheduled coordinate index",
                        ));
                    }
                    if !(dims[i].0.is_finite() && dims[i].1.is_finite()) {
                        return Err(CertifyError::UnboundedVertex(i));
                    }
                }
                if scheduled.len() >= 20 {
                    return Err(CertifyError::TooManySamples);
                }
                let count = 1usize << scheduled.len();
                let mut pts = Vec::with_capacity(count);
                for bits in 0..count {
                    let mut pt = base.clone();
                    for (k, &i) in scheduled.iter().enumerate() {
                        pt[i] = if bits >> k & 1 == 0 {
                            dims[i].0
                        } else {
                            dims[i].1
                        };
                    }
                    pts.push(pt);
                }
                pts
            }
            SamplingMode::Grid { counts } => {
                if counts.len() != dims.len() {
                    return Err(CertifyError::GridShape {
                        expected: dims.len(),
                        got: counts.len(),
                    });
                }
                let mut total = 1usize;
                for (i, &c) in counts.iter().enumerate() {
                    let c = c.max(1);
                    if c > 1 && !(dims[i].0.is_finite() && dims[i].1.is_finite()) {
                        return Err(CertifyError::UnboundedGrid(i));
                    }
                    total = total.saturating_mul(c);
                    if total > MAX_SAMPLES {
                        return Err(CertifyError::TooManySamples);
                    }
                }
                let mut pts = vec![base.clone()];
                for (i, &c) in counts.iter().enumerate() {
                    let c = c.max(1);
                    if c == 1 {
                        continue;
                    }
                    let (lo, hi) = dims[i];
                    let mut next = Vec::with_capacity(pts.len() * c);
                    for pt in &pts {
                        for k in 0..c {
                            let mut p = pt.clone();
                            p[i] = lo + (hi - lo) * (k as f64) / ((c - 1) as f64);
                            next.push(p);
                        }
                    }
                    pts = next;
                }
                pts
            }
        };
        let n = model.state_dim();
        let m = model.input_dim();
        Ok(combined
            .into_iter()
            .map(|pt| {
                let x = pt[..n].to_vec();
                let u = pt[n..n + m].to_vec();
                let w = pt[n + m..].to_vec();
                (x, u, w)
            })
            .collect())
    }
}

fn combined_intervals(model: &SystemModel) -> Vec<(f64, f64)> {
    let mut dims =
        Vec::with_capacity(model.state_dim() + model.input_dim() + model.disturbance_dim());
    for b in [&model.sets.x, &model.sets.u, &model.sets.w] {
        for i in 0..b.dim() {
            dims.push((b.lower(i), b.upper(i)));
        }
    }
    dims
}

fn combined_base(model: &SystemModel) -> Vec<f64> {
    let mut base = model.sets.x.interior_point();
    base.extend(model.sets.u.interior_point());
    base.extend(model.sets.w.interior_point());
    base
}

fn split_point(model: &SystemModel, pt: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = model.state_dim();
    let m = model.input_dim();
    (
        pt[..n].to_vec(),
        pt[n..n + m].to_vec(),
        pt[n + m..].to_vec(),
    )
}

/// `[A B]` stacked next to `[C; D]` padding into one matrix so probes can
/// compare everything at once: rows `0..n` hold `[A B]`, rows `n..n+p` hold
/// `[C D]`.
fn stacked_jacobians(model: &SystemModel, pt: &[f64]) -> Result<Mat, CertifyError> {
    let (x, u, w) = split_point(model, pt);
    let lin = model.linearize(&x, &u, &w)?;
    let n = model.state_dim();
    let p = model.output_dim();
    let q = model.disturbance_dim();
    let mut s = Mat::zeros(n + p, n + q);
    s.set_block(0, 0, &lin.a);
    s.set_block(0, n, &lin.b);
    s.set_block(n, 0, &lin.c);
    s.set_block(n, n, &lin.d);
    Ok(s)
}

fn stacked_ab(model: &SystemModel, pt: &[f64]) -> Result<Mat, CertifyError> {
    let (x, u, w) = split_point(model, pt);
    let lin = model.linearize(&x, &u, &w)?;
    let n = model.state_dim();
    let q = model.disturbance_dim();
    let mut s = Mat::zeros(n, n + q);
    s.set_block(0, 0, &lin.a);
    s.set_block(0, n, &lin.b);
    Ok(s)
}

fn stacked_cd(model: &SystemModel, pt: &[f64]) -> Result<Mat, CertifyError> {
    let (x, u, w) = split_point(model, pt);
    let lin = model.linearize(&x, &u, &w)?;
    let p = model.output_dim();
    let n = model.state_dim();
    let q = model.disturbance_dim();
    let mut s = Mat::zeros(p, n + q);
    s.set_block(0, 0, &lin.c);
    s.set_block(0, n, &lin.d);
    Ok(s)
}

fn probe_values(lo: f64, hi: f64, base: f64) -> Vec<f64> {
    if lo.is_finite() && hi.is_finite() {
        vec![lo, 0.5 * (lo + hi), hi]
    } else {
        vec![base - 1.0, base, base + 1.0]
    }
}

const AFFINITY_TOL: f64 = 1e-10;

/// Vertex-plan soundness certificate: true iff `[A B]` is affine along every
/// scheduled coordinate (two collinear three-point residual tests per
/// coordinate), `[A B]` is constant along the remaining coordinates, and
/// `C`, `D` are constant across all probes.
///
/// Coordinates are indices into the combined `(x, u, w)` vector. Scheduled
/// coordinates must be bounded.
pub fn affinity_check(model: &SystemModel, scheduled: &[usize]) -> Result<bool, CertifyError> {
    let dims = combined_intervals(model);
    let base = combined_base(model);
    for &i in scheduled {
        if i >= dims.len() {
            return Err(CertifyError::DimensionMismatch(
                "scheduled coordinate index",
            ));
        }
        if !(dims[i].0.is_finite() && dims[i].1.is_finite()) {
            return Err(CertifyError::UnboundedVertex(i));
        }
    }
    let base_cd = stacked_cd(model, &base)?;
    let base_ab = stacked_ab(model, &base)?;
    let scale = 1.0 + base_ab.max_abs().max(base_cd.max_abs());
    let check_cd = |pt: &[f64]| -> Result<bool, CertifyError> {
        Ok(stacked_cd(model, pt)?.sub(&base_cd).max_abs() <= AFFINITY_TOL * scale)
    };

    for (i, &(lo, hi)) in dims.iter().enumerate() {
        if scheduled.contains(&i) {
            // two equally spaced collinear triples; the asymmetric one
            // catches odd nonlinearities centered at the midpoint
            let width = hi - lo;
            let triples = [
                [lo, lo + 0.5 * width, hi],
                [lo, lo + 0.3 * width, lo + 0.6 * width],
            ];
            for triple in triples {
                let mut mats = Vec::with_capacity(3);
                for v in triple {
                    let mut pt = base.clone();
                    pt[i] = v;
                    if !check_cd(&pt)? {
                        return Ok(false);
                    }
                    mats.push(stacked_ab(model, &pt)?);
                }
                // affine ⇒ m0 + m2 = 2·m1 for equally spaced points
                let mut resid = mats[0].add(&mats[2]);
                resid.axpy(-2.0, &mats[1]);
                if resid.max_abs() > AFFINITY_TOL * scale {
                    return Ok(false);
                }
            }
        } else {
            for v in probe_values(lo, hi, base[i]) {
                let mut pt = base.clone();
                pt[i] = v;
                if !check_cd(&pt)? {
                    return Ok(false);
                }
                if stacked_ab(model, &pt)?.sub(&base_ab).max_abs() > AFFINITY_TOL * scale {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Outcome of sampling the pointwise LMI over a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub pass: bool,
    /// Largest LMI eigenvalue seen over all samples.
    pub worst_eigenvalue: f64,
    /// Sample point achieving it, as a combined `(x, u, w)` tuple.
    pub worst_point: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    /// Whether `P1 ⪯ P ⪯ P2` held (trivial for quadratic certificates).
    pub sandwich_ok: bool,
    pub soundness: Soundness,
    pub samples: usize,
    pub tol: f64,
}

/// Check the certificate's LMI at every point of the plan.
///
/// Passes iff the worst eigenvalue is at most `tol` and the metric sits
/// inside its sandwich bounds. With a coordinate transform `T`, the LMI is
/// assembled in transformed coordinates: `P̄ = T⁻ᵀPT⁻¹`, `Ā = TAT⁻¹`,
/// `B̄ = TB`, `C̄ = CT⁻¹`, `D̄ = D`. The transformed matrix is a congruence
/// of the original one, so definiteness (pass/fail at `tol = 0`) is
/// invariant while the reported eigenvalues refer to the transformed
/// assembly.
pub fn verify_certificate(
    model: &SystemModel,
    cert: &DiossCertificate,
    plan: &SamplingPlan,
    tol: f64,
) -> Result<VerificationReport, CertifyError> {
    let p = cert.metric().ok_or(CertifyError::NonConstantMetric)?;
    if p.rows() != model.state_dim() {
        return Err(CertifyError::DimensionMismatch("P vs model state"));
    }
    if cert.q().rows() != model.disturbance_dim() {
        return Err(CertifyError::DimensionMismatch("Q vs model disturbance"));
    }
    if cert.r().rows() != model.output_dim() {
        return Err(CertifyError::DimensionMismatch("R vs model output"));
    }
    let trans = match cert.transform() {
        Some(t) => {
            let t_inv = t.inverse().ok_or(CertifyError::SingularTransform)?;
            let p_bar = t_inv.tr_mul(&p.mul(&t_inv)).symmetrized();
            Some((t.clone(), t_inv, p_bar))
        }
        None => None,
    };
    let points = plan.points(model)?;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_point = None;
    for (x, u, w) in &points {
        let sample = LmiSample::at(model, x.clone(), u.clone(), w.clone())?;
        let m = match &trans {
            None => lmi_matrix(&sample, p, cert.q(), cert.r(), cert.eta()),
            Some((t, t_inv, p_bar)) => {
                let lin = Linearization {
                    a: t.mul(&sample.lin.a.mul(t_inv)),
                    b: t.mul(&sample.lin.b),
                    c: sample.lin.c.mul(t_inv),
                    d: sample.lin.d.clone(),
                };
                lmi_matrix_lin(&lin, p_bar, cert.q(), cert.r(), cert.eta())
            }
        };
        let lam = m.sym_eig_max();
        if lam > worst {
            worst = lam;
            worst_point = Some((x.clone(), u.clone(), w.clone()));
        }
    }
    let sandwich_ok =
        cert.is_quadratic() || (p.sub(cert.p1()).is_psd() && cert.p2().sub(p).is_psd());
    let soundness = match &plan.mode {
        SamplingMode::Vertices { scheduled } => {
            if affinity_check(model, scheduled)? {
                Soundness::Exact
            } else {
                Soundness::Heuristic
            }
        }
        SamplingMode::Grid { .. } => Soundness::Heuristic,
    };
    Ok(VerificationReport {
        pass: worst <= tol && sandwich_ok,
        worst_eigenvalue: worst,
        worst_point,
        sandwich_ok,
        soundness,
        samples: points.len(),
        tol,
    })
}

/// What the decay-rate scan should optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveHint {
    /// Return the smallest feasible decay rate in the grid.
    MinimizeEta,
    /// Return the decay rate with the largest feasibility margin.
    MaximizeMargin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    /// Restrict `Q` and `R` to diagonal matrices (default). Full symmetric
    /// parameterizations are supported but rarely needed.
    pub diag_qr: bool,
    /// Upper bound `Q ⪯ q_max·I`; the max-margin objective is unbounded in
    /// `Q` without it.
    pub q_max: f64,
    /// Upper bound `R ⪯ r_max·I`.
    pub r_max: f64,
    /// Strict-positivity floor `P ⪰ eps_p·I` under `trace(P) = n`.
    pub eps_p: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            diag_qr: true,
            q_max: 1e4,
            r_max: 1e4,
            eps_p: 1e-6,
        }
    }
}

/// Result of one fixed-decay feasibility solve.
#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub certificate: DiossCertificate,
    /// `−max_k λ_max(lmi_k)` at the returned matrices: nonnegative means the
    /// sampled LMIs hold.
    pub margin: f64,
}

/// Synthesize a constant-metric certificate over the plan's samples.
///
/// For each `η` in the grid (scanned per the hint), the sampled dissipation
/// constraints, which are linear in `(P, Q, R)`, are handed to the barrier solver as
/// a max-margin problem with `trace(P) = n` fixing the scale. Returns the
/// selected certificate; fails with the best margin found when no grid point
/// is feasible.
pub fn synthesize_certificate(
    model: &SystemModel,
    plan: &SamplingPlan,
    eta_grid: &[f64],
    hint: ObjectiveHint,
) -> Result<SynthesisOutcome, CertifyError> {
    synthesize_certificate_with(model, plan, eta_grid, hint, &SynthesisOptions::default())
}

pub fn synthesize_certificate_with(
    model: &SystemModel,
    plan: &SamplingPlan,
    eta_grid: &[f64],
    hint: ObjectiveHint,
    opts: &SynthesisOptions,
) -> Result<SynthesisOutcome, CertifyError> {
    for &eta in eta_grid {
        if !(0.0..1.0).contains(&eta) {
            return Err(CertifyError::InvalidEta(eta));
        }
    }
    if eta_grid.is_empty() {
        return Err(CertifyError::SynthesisInfeasible {
            best_eta: f64::NAN,
            best_margin: f64::NEG_INFINITY,
        });
    }
    let points = plan.points(model)?;
    let mut lins = Vec::with_capacity(points.len());
    for (x, u, w) in &points {
        lins.push(model.linearize(x, u, w)?);
    }
    let mut grid: Vec<f64> = eta_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut best: Option<(f64, SynthesisOutcome)> = None;
    let mut best_infeasible = (f64::NAN, f64::NEG_INFINITY);
    for &eta in &grid {
        let outcome = solve_fixed_eta(model, &lins, eta, opts)?;
        match outcome {
            Some(out) if out.margin >= 0.0 => match hint {
                ObjectiveHint::MinimizeEta => return Ok(out),
                ObjectiveHint::MaximizeMargin => {
                    if best.as_ref().map_or(true, |(m, _)| out.margin > *m) {
                        best = Some((out.margin, out));
                    }
                }
            },
            Some(out) if out.margin > best_infeasible.1 => {
                best_infeasible = (eta, out.margin);
            }
            Some(_) => {}
            None => {}
        }
    }
    match best {
        Some((_, out)) => Ok(out),
        None => Err(CertifyError::SynthesisInfeasible {
            best_eta: best_infeasible.0,
            best_margin: best_infeasible.1,
        }),
    }
}

/// Max-margin feasibility at fixed decay rate. `Ok(None)` only on solver
/// breakdown at an otherwise valid input.
fn solve_fixed_eta(
    model: &SystemModel,
    lins: &[Linearization],
    eta: f64,
    opts: &SynthesisOptions,
) -> Result<Option<SynthesisOutcome>, CertifyError> {
    let n = model.state_dim();
    let qdim = model.disturbance_dim();
    let pdim = model.output_dim();

    // parameter layout: P entries (trace-eliminated), Q entries, R entries, s
    let mut p_basis: Vec<Mat> = Vec::new();
    for i in 0..n {
        for j in i..n {
            if i == j {
                if i < n - 1 {
                    let mut e = Mat::zeros(n, n);
                    e[(i, i)] = 1.0;
                    e[(n - 1, n - 1)] = -1.0;
                    p_basis.push(e);
                }
            } else {
                let mut e = Mat::zeros(n, n);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                p_basis.push(e);
            }
        }
    }
    let mut p_const = Mat::zeros(n, n);
    p_const[(n - 1, n - 1)] = n as f64;

    let sym_basis = |dim: usize, diag: bool| -> Vec<Mat> {
        let mut basis = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                if diag && i != j {
                    continue;
                }
                let mut e = Mat::zeros(dim, dim);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                if i == j {
                    e[(i, i)] = 1.0;
                }
                basis.push(e);
            }
        }
        basis
    };
    let q_basis = sym_basis(qdim, opts.diag_qr);
    let r_basis = sym_basis(pdim, opts.diag_qr);
    let np = p_basis.len();
    let nq = q_basis.len();
    let nr = r_basis.len();
    let ntheta = np + nq + nr + 1;
    let s_idx = ntheta - 1;

    let zero_q = Mat::zeros(qdim, qdim);
    let zero_r = Mat::zeros(pdim, pdim);

    let mut blocks: Vec<MatrixExpr> = Vec::new();
    // sample blocks: G_k = −lmi(P(θ), Q(θ), R(θ)) − s·I ≻ 0
    for lin in lins {
        let dim = n + qdim;
        let constant = lmi_matrix_lin(lin, &p_const, &zero_q, &zero_r, eta).scale(-1.0);
        let mut coeffs = Vec::with_capacity(ntheta);
        for e in &p_basis {
            coeffs.push(lmi_matrix_lin(lin, e, &zero_q, &zero_r, eta).scale(-1.0));
        }
        for e in &q_basis {
            // ∂lmi/∂q-entry = −blockdiag(0, e)  →  negated: +blockdiag(0, e)
            let mut cmat = Mat::zeros(dim, dim);
            cmat.set_block(n, n, e);
            coeffs.push(cmat);
        }
        for e in &r_basis {
            let zero_p = Mat::zeros(n, n);
            coeffs.push(lmi_matrix_lin(lin, &zero_p, &zero_q, e, 0.0).scale(-1.0));
        }
        coeffs.push(Mat::scaled_identity(dim, -1.0));
        blocks.push(MatrixExpr { constant, coeffs });
    }
    // P(θ) − eps·I ≻ 0
    {
        let mut constant = p_const.clone();
        for i in 0..n {
            constant[(i, i)] -= opts.eps_p;
        }
        let mut coeffs = vec![Mat::zeros(n, n); ntheta];
        for (k, e) in p_basis.iter().enumerate() {
            coeffs[k] = e.clone();
        }
        blocks.push(MatrixExpr { constant, coeffs });
    }
    // 0 ≺ Q(θ) ≺ q_max·I and likewise for R
    let bound_blocks =
        |basis: &[Mat], offset: usize, dim: usize, cap: f64, blocks: &mut Vec<MatrixExpr>| {
            if dim == 0 {
                return;
            }
            let mut lo_coeffs = vec![Mat::zeros(dim, dim); ntheta];
            let mut hi_coeffs = vec![Mat::zeros(dim, dim); ntheta];
            for (k, e) in basis.iter().enumerate() {
                lo_coeffs[offset + k] = e.clone();
                hi_coeffs[offset + k] = e.scale(-1.0);
            }
            blocks.push(MatrixExpr {
                constant: Mat::zeros(dim, dim),
                coeffs: lo_coeffs,
            });
            blocks.push(MatrixExpr {
                constant: Mat::scaled_identity(dim, cap),
                coeffs: hi_coeffs,
            });
        };
    bound_blocks(&q_basis, np, qdim, opts.q_max, &mut blocks);
    bound_blocks(&r_basis, np + nq, pdim, opts.r_max, &mut blocks);

    let mut objective = vec![0.0; ntheta];
    objective[s_idx] = 1.0;

    // strictly feasible start: P = I, Q and R small multiples of I,
    // s below the worst current eigenvalue
    let mut theta0 = vec![0.0; ntheta];
    {
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                if i == j {
                    if i < n - 1 {
                        theta0[k] = 1.0;
                        k += 1;
                    }
                } else {
                    k += 1;
                }
            }
        }
        let q0 = (opts.q_max * 0.01).min(100.0).max(opts.q_max * 1e-6);
        let r0 = (opts.r_max * 0.01).min(100.0).max(opts.r_max * 1e-6);
        let assemble = |theta: &[f64]| -> (Mat, Mat, Mat) {
            assemble_matrices(theta, &p_const, &p_basis, &q_basis, &r_basis, qdim, pdim)
        };
        for i in 0..nq {
            if is_diag_basis(&q_basis[i]) {
                theta0[np + i] = q0;
            }
        }
        for i in 0..nr {
            if is_diag_basis(&r_basis[i]) {
                theta0[np + nq + i] = r0;
            }
        }
        let (p0m, q0m, r0m) = assemble(&theta0);
        let mut worst = f64::NEG_INFINITY;
        for lin in lins {
            worst = worst.max(lmi_matrix_lin(lin, &p0m, &q0m, &r0m, eta).sym_eig_max());
        }
        theta0[s_idx] = -(worst + 1.0);
    }

    let problem = BarrierProblem { objective, blocks };
    let theta = match sdp::maximize(&problem, theta0, &BarrierParams::default()) {
        Ok(t) => t,
        Err(_) => return Ok(None),
    };
    let (p, q, r) = assemble_matrices(&theta, &p_const, &p_basis, &q_basis, &r_basis, qdim, pdim);
    let mut worst = f64::NEG_INFINITY;
    for lin in lins {
        worst = worst.max(lmi_matrix_lin(lin, &p, &q, &r, eta).sym_eig_max());
    }
    let cert = DiossCertificate::quadratic(p, q, r, eta)?;
    Ok(Some(SynthesisOutcome {
        certificate: cert,
        margin: -worst,
    }))
}

/// Shared synthesized reactor certificate for tests (deterministic, cached).
#[cfg(test)]
pub(crate) fn synthesize_reactor_test_cert() -> DiossCertificate {
    use std::sync::OnceLock;
    static CELL: OnceLock<DiossCertificate> = OnceLock::new();
    CELL.get_or_init(|| {
        let model = crate::model::reactor_model();
        let plan = SamplingPlan::vertices(alloc::vec![0]);
        synthesize_certificate(&model, &plan, &[0.91], ObjectiveHint::MinimizeEta)
            .expect("reactor is feasible at decay 0.91")
            .certificate
    })
    .clone()
}

fn is_diag_basis(e: &Mat) -> bool {
    for i in 0..e.rows() {
        for j in 0..e.cols() {
            if i != j && e[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

fn assemble_matrices(
    theta: &[f64],
    p_const: &Mat,
    p_basis: &[Mat],
    q_basis: &[Mat],
    r_basis: &[Mat],
    qdim: usize,
    pdim: usize,
) -> (Mat, Mat, Mat) {
    let np = p_basis.len();
    let nq = q_basis.len();
    let mut p = p_const.clone();
    for (k, e) in p_basis.iter().enumerate() {
        p.axpy(theta[k], e);
    }
    let mut q = Mat::zeros(qdim, qdim);
    for (k, e) in q_basis.iter().enumerate() {
        q.axpy(theta[np + k], e);
    }
    let mut r = Mat::zeros(pdim, pdim);
    for (k, e) in r_basis.iter().enumerate() {
        r.axpy(theta[np + nq + k], e);
    }
    (p.symmetrized(), q.symmetrized(), r.symmetrized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{reactor_model, Bounds, ConstraintSets};
    use alloc::boxed::Box;

    pub(crate) fn published_reactor_certificate() -> DiossCertificate {
        DiossCertificate::quadratic(
            Mat::from_rows(&[&[1.249, 1.146], &[1.146, 1.053]]),
            Mat::scaled_identity(3, 1e4),
            Mat::from_rows(&[&[100.0]]),
            0.91,
        )
        .unwrap()
    }

    fn scalar_model(a: f64, c: f64) -> SystemModel {
        let f = move |x: &[f64], _u: &[f64], w: &[f64]| alloc::vec![a * x[0] + 0.0 * w[0]];
        let h = move |x: &[f64], _u: &[f64], _w: &[f64]| alloc::vec![c * x[0]];
        let jf = move |_x: &[f64], _u: &[f64], _w: &[f64]| {
            (Mat::from_rows(&[&[a]]), Mat::from_rows(&[&[0.0]]))
        };
        let jh = move |_x: &[f64], _u: &[f64], _w: &[f64]| {
            (Mat::from_rows(&[&[c]]), Mat::from_rows(&[&[0.0]]))
        };
        SystemModel::new(
            1,
            0,
            1,
            1,
            Box::new(f),
            Box::new(h),
            Box::new(jf),
            Box::new(jh),
            ConstraintSets {
                x: Bounds::unbounded(1),
                u: Bounds::unbounded(0),
                w: Bounds::unbounded(1),
                y: Bounds::unbounded(1),
            },
        )
        .unwrap()
    }

    fn scalar_sample(a: f64, c: f64) -> LmiSample {
        let model = scalar_model(a, c);
        LmiSample::at(&model, alloc::vec![0.0], alloc::vec![], alloc::vec![0.0]).unwrap()
    }

    #[test]
    fn lmi_scalar_contraction_is_zero() {
        let s = scalar_sample(0.5, 0.0);
        let m = lmi_matrix(
            &s,
            &Mat::from_rows(&[&[1.0]]),
            &Mat::from_rows(&[&[0.0]]),
            &Mat::from_rows(&[&[0.0]]),
            0.25,
        );
        assert!(m.max_abs() < 1e-15);
    }

    #[test]
    fn lmi_scalar_detectable_balances() {
        // 1.21 − 0.9 − 0.31 = 0 up to rounding
        let s = scalar_sample(1.1, 1.0);
        let m = lmi_matrix(
            &s,
            &Mat::from_rows(&[&[1.0]]),
            &Mat::from_rows(&[&[0.0]]),
            &Mat::from_rows(&[&[0.31]]),
            0.9,
        );
        assert!(m.max_abs() < 1e-12, "entries {:?}", m.data());
    }

    #[test]
    fn lmi_reactor_vertex_values() {
        // frozen from an independent eigensolve of the 5x5 blocks
        let model = reactor_model();
        let cert = published_reactor_certificate();
        let hi = LmiSample::at(
            &model,
            alloc::vec![4.5, 2.3],
            alloc::vec![],
            alloc::vec![0.0; 3],
        )
        .unwrap();
        let m = lmi_matrix(&hi, cert.metric().unwrap(), cert.q(), cert.r(), cert.eta());
        let lam = m.sym_eig_max();
        assert!((lam - (-2.6304380329e-4)).abs() < 1e-9, "x1=4.5 eig {lam}");
        assert!(lam <= 1e-6);
        // the printed (3-decimal) metric is marginally infeasible at the
        // lower vertex; keep the measured value pinned as a regression anchor
        let lo = LmiSample::at(
            &model,
            alloc::vec![0.1, 2.3],
            alloc::vec![],
            alloc::vec![0.0; 3],
        )
        .unwrap();
        let m = lmi_matrix(&lo, cert.metric().unwrap(), cert.q(), cert.r(), cert.eta());
        let lam = m.sym_eig_max();
        assert!((lam - 4.0608200747e-5).abs() < 1e-9, "x1=0.1 eig {lam}");
    }

    #[test]
    fn generalized_eigmax_basics() {
        let p = Mat::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]);
        assert!((generalized_eigmax(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        let two = Mat::scaled_identity(3, 2.0);
        assert!((generalized_eigmax(&two, &Mat::identity(3)).unwrap() - 2.0).abs() < 1e-12);
        let not_pd = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(
            generalized_eigmax(&not_pd, &Mat::identity(2)),
            Err(CertifyError::NotPositiveDefinite(_))
        ));
        assert!(matches!(
            generalized_eigmax(&Mat::identity(2), &not_pd),
            Err(CertifyError::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn certificate_validation() {
        let q = Mat::identity(3);
        let r = Mat::identity(1);
        let not_pd = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(
            DiossCertificate::quadratic(not_pd, q.clone(), r.clone(), 0.5),
            Err(CertifyError::NotPositiveDefinite("P"))
        ));
        assert!(matches!(
            DiossCertificate::quadratic(Mat::identity(2), q.clone(), r.clone(), 1.0),
            Err(CertifyError::InvalidEta(_))
        ));
        // P1 ⪯ P2 violated
        assert!(matches!(
            DiossCertificate::with_bounds(
                Mat::scaled_identity(2, 2.0),
                Mat::identity(2),
                q.clone(),
                r.clone(),
                0.5
            ),
            Err(CertifyError::BoundsOrder)
        ));
        let ok = DiossCertificate::with_bounds(
            Mat::identity(2),
            Mat::scaled_identity(2, 3.0),
            q,
            r,
            0.5,
        )
        .unwrap();
        assert!(!ok.is_quadratic());
        assert!(ok.metric().is_none());
        assert!((ok.lambda_max_p2_p1() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn affinity_reactor_schedules_x1() {
        let model = reactor_model();
        assert!(affinity_check(&model, &[0]).unwrap());
        // scheduling everything is also fine: constant directions are affine
        assert!(affinity_check(&model, &[0, 1, 2, 3, 4]).unwrap());
    }

    #[test]
    fn affinity_rejects_quadratic_dependence() {
        // A depends on x1², not affine
        let f = |x: &[f64], _u: &[f64], w: &[f64]| alloc::vec![x[0] * x[0] * x[0] / 3.0 + w[0]];
        let h = |x: &[f64], _u: &[f64], _w: &[f64]| alloc::vec![x[0]];
        let jf = |x: &[f64], _u: &[f64], _w: &[f64]| {
            (Mat::from_rows(&[&[x[0] * x[0]]]), Mat::from_rows(&[&[1.0]]))
        };
        let jh = |_x: &[f64], _u: &[f64], _w: &[f64]| {
            (Mat::from_rows(&[&[1.0]]), Mat::from_rows(&[&[0.0]]))
        };
        let model = SystemModel::new(
            1,
            0,
            1,
            1,
            Box::new(f),
            Box::new(h),
            Box::new(jf),
            Box::new(jh),
            ConstraintSets {
                x: Bounds::from_intervals(&[(-1.0, 1.0)]).unwrap(),
                u: Bounds::unbounded(0),
                w: Bounds::symmetric(1, 1.0),
                y: Bounds::unbounded(1),
            },
        )
        .unwrap();
        assert!(!affinity_check(&model, &[0]).unwrap());
    }

    #[test]
    fn affinity_lti_empty_schedule() {
        let model = scalar_model(0.7, 1.0);
        assert!(affinity_check(&model, &[]).unwrap());
    }

    #[test]
    fn vertices_auto_detects_reactor_dependence() {
        let model = reactor_model();
        let plan = SamplingPlan::vertices_auto(&model).unwrap();
        assert_eq!(
            plan.mode,
            SamplingMode::Vertices {
                scheduled: alloc::vec![0]
            }
        );
        let pts = plan.points(&model).unwrap();
        assert_eq!(pts.len(), 2);
        let mut x1s: Vec<f64> = pts.iter().map(|p| p.0[0]).collect();
        x1s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(x1s, alloc::vec![0.1, 4.5]);
    }

    #[test]
    fn vertex_plan_on_unbounded_box_is_usage_error() {
        let model = scalar_model(0.5, 1.0);
        let plan = SamplingPlan::vertices(alloc::vec![0]);
        assert!(matches!(
            plan.points(&model),
            Err(CertifyError::UnboundedVertex(0))
        ));
    }

    #[test]
    fn grid_plan_shape_and_bounds_errors() {
        let model = reactor_model();
        // reactor combined dimension is 2 + 0 + 3
        let plan = SamplingPlan::grid(alloc::vec![3, 3]);
        assert!(matches!(
            plan.points(&model),
            Err(CertifyError::GridShape {
                expected: 5,
                got: 2
            })
        ));
        let plan = SamplingPlan::grid(alloc::vec![3, 3, 2, 2, 2]);
        assert_eq!(plan.points(&model).unwrap().len(), 72);
        // more than one sample on an unbounded coordinate is an error
        let unbounded = scalar_model(0.5, 1.0);
        let plan = SamplingPlan::grid(alloc::vec![2, 1]);
        assert!(matches!(
            plan.points(&unbounded),
            Err(CertifyError::UnboundedGrid(0))
        ));
        // a single point on an unbounded coordinate pins it at the base
        let plan = SamplingPlan::grid(alloc::vec![1, 1]);
        assert_eq!(plan.points(&unbounded).unwrap().len(), 1);
    }

    #[test]
    fn verify_published_certificate_fails_at_tight_tol_passes_at_loose() {
        let model = reactor_model();
        let cert = published_reactor_certificate();
        let plan = SamplingPlan::vertices(alloc::vec![0]);
        let report = verify_certificate(&model, &cert, &plan, 1e-6).unwrap();
        assert_eq!(report.soundness, Soundness::Exact);
        assert!(report.sandwich_ok);
        assert_eq!(report.samples, 2);
        assert!((report.worst_eigenvalue - 4.0608200747e-5).abs() < 1e-9);
        assert!(!report.pass);
        // at a tolerance above the printed-rounding artifact it passes
        let report = verify_certificate(&model, &cert, &plan, 1e-4).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn verify_eta_zero_fails_with_positive_worst_eigenvalue() {
        let model = reactor_model();
        let cert = published_reactor_certificate().with_eta(0.0).unwrap();
        let plan = SamplingPlan::vertices(alloc::vec![0]);
        let report = verify_certificate(&model, &cert, &plan, 1e-6).unwrap();
        assert!(!report.pass);
        assert!(
            report.worst_eigenvalue > 1e-4,
            "worst {}",
            report.worst_eigenvalue
        );
    }

    #[test]
    fn verify_linear_model_single_sample() {
        let model = scalar_model(0.5, 0.0);
        let cert =
            DiossCertificate::quadratic(Mat::identity(1), Mat::zeros(1, 1), Mat::zeros(1, 1), 0.25)
                .unwrap();
        let plan = SamplingPlan::vertices(alloc::vec![]);
        let report = verify_certificate(&model, &cert, &plan, 1e-12).unwrap();
        assert_eq!(report.samples, 1);
        assert!(report.pass);
    }

    #[test]
    fn synthesis_scalar_detectable() {
        let model = scalar_model(1.1, 1.0);
        let plan = SamplingPlan::vertices(alloc::vec![]);
        let out =
            synthesize_certificate(&model, &plan, &[0.9], ObjectiveHint::MinimizeEta).unwrap();
        assert!(out.margin >= 0.0, "margin {}", out.margin);
        let report = verify_certificate(&model, &out.certificate, &plan, 1e-9).unwrap();
        assert!(report.pass);
        // trace normalization pins P = 1, so the whole problem is solvable by
        // hand: the blocks are diag(a²−η−r, −q) and the margin maximum under
        // the default caps q,r ≤ 1e4 is min(r_max − (a²−η), q_max)
        assert!((out.certificate.metric().unwrap()[(0, 0)] - 1.0).abs() < 1e-9);
        let expected = 1e4 - (1.1f64 * 1.1 - 0.9);
        assert!(
            (out.margin - expected).abs() < 1e-3 * expected,
            "margin {} vs hand optimum {}",
            out.margin,
            expected
        );
    }

    #[test]
    fn synthesis_scalar_stable_without_output() {
        let model = scalar_model(0.5, 0.0);
        let plan = SamplingPlan::vertices(alloc::vec![]);
        let out =
            synthesize_certificate(&model, &plan, &[0.25], ObjectiveHint::MinimizeEta).unwrap();
        assert!(out.margin >= 0.0, "margin {}", out.margin);
        let report = verify_certificate(&model, &out.certificate, &plan, 1e-9).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn synthesis_infeasible_at_tiny_eta() {
        // a = 1.1 with no output information cannot contract
        let model = scalar_model(1.1, 0.0);
        let plan = SamplingPlan::vertices(alloc::vec![]);
        let err = synthesize_certificate(&model, &plan, &[0.0, 0.5], ObjectiveHint::MinimizeEta)
            .unwrap_err();
        match err {
            CertifyError::SynthesisInfeasible { best_margin, .. } => {
                assert!(best_margin < 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn synthesis_reactor_feasible_at_published_eta() {
        let model = reactor_model();
        let plan = SamplingPlan::vertices(alloc::vec![0]);
        let out =
            synthesize_certificate(&model, &plan, &[0.91], ObjectiveHint::MinimizeEta).unwrap();
        assert!(out.margin > 0.0, "margin {}", out.margin);
        let report = verify_certificate(&model, &out.certificate, &plan, 1e-9).unwrap();
        assert!(report.pass, "worst {}", report.worst_eigenvalue);
        assert_eq!(report.soundness, Soundness::Exact);
        let p = out.certificate.metric().unwrap();
        assert!((p.trace() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn synthesis_with_full_symmetric_weights() {
        let model = reactor_model();
        let plan = SamplingPlan::vertices(alloc::vec![0]);
        let opts = SynthesisOptions {
            diag_qr: false,
            ..SynthesisOptions::default()
        };
        let out =
            synthesize_certificate_with(&model, &plan, &[0.91], ObjectiveHint::MinimizeEta, &opts)
                .unwrap();
        assert!(out.margin >= 0.0, "margin {}", out.margin);
        let report = verify_certificate(&model, &out.certificate, &plan, 1e-9).unwrap();
        assert!(report.pass);
        // Q and R keep their semidefiniteness with off-diagonal freedom
        assert!(out.certificate.q().is_psd());
        assert!(out.certificate.r().is_psd());
    }

    #[test]
    fn maximize_margin_hint_picks_largest_margin() {
        let model = reactor_model();
        let plan = SamplingPlan::vertices(alloc::vec![0]);
        let min_eta =
            synthesize_certificate(&model, &plan, &[0.91, 0.95], ObjectiveHint::MinimizeEta)
                .unwrap();
        let max_margin =
            synthesize_certificate(&model, &plan, &[0.91, 0.95], ObjectiveHint::MaximizeMargin)
                .unwrap();
        assert!((min_eta.certificate.eta() - 0.91).abs() < 1e-12);
        assert!((max_margin.certificate.eta() - 0.95).abs() < 1e-12);
        assert!(max_margin.margin >= min_eta.margin);
    }

    #[test]
    fn transform_leaves_verification_invariant() {
        let model = reactor_model();
        // a certificate that genuinely verifies (synthesized), expressed in
        // transformed coordinates
        let plan = SamplingPlan::vertices(alloc::vec![0]);
        let out =
            synthesize_certificate(&model, &plan, &[0.91], ObjectiveHint::MinimizeEta).unwrap();
        let base = verify_certificate(&model, &out.certificate, &plan, 1e-9).unwrap();
        let t = Mat::from_rows(&[&[2.0, 0.5], &[-1.0, 3.0]]);
        let transformed = out.certificate.clone().with_transform(t).unwrap();
        let report = verify_certificate(&model, &transformed, &plan, 1e-9).unwrap();
        // the transformed assembly is a congruence of the original: the
        // eigenvalues move but their signs (and hence pass/fail) do not
        assert_eq!(report.pass, base.pass);
        assert_eq!(
            report.worst_eigenvalue.is_sign_positive(),
            base.worst_eigenvalue.is_sign_positive()
        );
    }
}
