//! Horizon calculus and stability bounds for the discounted estimator.
//!
//! Everything here is a pure function of a certificate and scalar data:
//! the minimal stabilizing horizon from a contraction condition `C·μ^M < 1`,
//! the comparison of that condition across analysis methods from the
//! literature, the M-step decrease residuals monitored along closed-loop
//! runs, and the exponential/asymptotic error envelopes.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::certify::DiossCertificate;
use crate::estimate::FieGains;
use crate::linalg::{norm2, powi, Mat};

#[derive(Debug, Clone, PartialEq)]
pub enum AnalyzeError {
    /// `C ≥ 1` with `μ ≥ 1`: no horizon makes the contraction strict.
    NoFiniteHorizon,
    /// Contraction rate outside `(0, 1)` where one is required.
    InvalidRate(f64),
    InvalidArgument(&'static str),
    /// Disturbance window shorter than the horizon it must cover.
    WindowTooShort {
        need: usize,
        got: usize,
    },
    /// The bound needs an inverse of `α1`.
    MissingInverse,
}

impl fmt::Display for AnalyzeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyzeError::NoFiniteHorizon => {
                write!(f, "no finite horizon satisfies the contraction")
            }
            AnalyzeError::InvalidRate(r) => write!(f, "contraction rate {r} outside (0, 1)"),
            AnalyzeError::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
            AnalyzeError::WindowTooShort { need, got } => {
                write!(f, "disturbance window: need {need} entries, got {got}")
            }
            AnalyzeError::MissingInverse => write!(f, "lower gain has no inverse map"),
        }
    }
}

impl core::error::Error for AnalyzeError {}

/// Smallest integer `M ≥ 0` with `C·μ^M < 1` (strict).
///
/// Computed by the log formula `⌈−log C / log μ⌉` and then corrected by an
/// integer scan so the strict inequality survives floating-point rounding.
pub fn min_horizon(c: f64, mu: f64) -> Result<u64, AnalyzeError> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(AnalyzeError::InvalidArgument(
            "C must be positive and finite",
        ));
    }
    if !(mu >= 0.0) || mu.is_nan() {
        return Err(AnalyzeError::InvalidArgument("mu must be nonnegative"));
    }
    if c < 1.0 {
        return Ok(0);
    }
    if mu >= 1.0 {
        return Err(AnalyzeError::NoFiniteHorizon);
    }
    if mu == 0.0 {
        // 0^M = 0 < 1 for any M ≥ 1
        return Ok(1);
    }
    let m0 = libm::ceil(-libm::log(c) / libm::log(mu));
    let mut m = if m0 > 2.0 { (m0 - 2.0) as u64 } else { 0 };
    let mut steps = 0u32;
    while c * powi(mu, m) >= 1.0 {
        m += 1;
        steps += 1;
        if steps > 10_000 {
            // astronomically flat contraction: the formula value is the best
            // floating-point answer
            return Ok(m);
        }
    }
    Ok(m)
}

/// Outcome of the horizon-length condition `ρ^M := 4·η^M·λ_max(P2, P1) < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonCheck {
    /// `4·η^M·λ_max(P2, P1)`.
    pub rho_pow_m: f64,
    /// `(4·λ_max(P2, P1))^{1/M}·η`, defined for `M ≥ 1`.
    pub rho: Option<f64>,
    pub satisfied: bool,
}

pub fn horizon_condition(cert: &DiossCertificate, m: u64) -> HorizonCheck {
    let lam = cert.lambda_max_p2_p1();
    let eta = cert.eta();
    let rho_pow_m = 4.0 * powi(eta, m) * lam;
    let rho = if m >= 1 {
        Some(libm::exp(libm::log(4.0 * lam) / m as f64) * eta)
    } else {
        None
    };
    HorizonCheck {
        rho_pow_m,
        rho,
        satisfied: rho_pow_m < 1.0,
    }
}

/// Stability-analysis method behind a contraction condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    /// The discounted M-step Lyapunov analysis implemented by this crate.
    Proposed,
    /// Lyapunov-like Q-function framework (FIE-based), idealized bound.
    AllanFie2021,
    /// General time-discounting analysis.
    KnueferMhe2021,
    /// Undiscounted analysis.
    AllanMoving2019,
}

impl MethodTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::Proposed => "proposed",
            MethodTag::AllanFie2021 => "allan2021FIE",
            MethodTag::KnueferMhe2021 => "knuefer2021MHE",
            MethodTag::AllanMoving2019 => "allan2019moving",
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of the contraction-condition comparison: `C·μ^M < 1` guarantees
/// exponential stability of the estimator under the tagged analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionSpec {
    pub method: MethodTag,
    pub c: f64,
    pub mu: f64,
    /// True when the row's constants are strict lower bounds (idealized
    /// assumptions), so its minimal horizon is itself only a lower bound.
    pub is_lower_bound: bool,
}

impl ContractionSpec {
    /// Minimal stabilizing horizon for this row; `None` when no finite
    /// horizon satisfies the contraction.
    pub fn min_horizon(&self) -> Option<u64> {
        min_horizon(self.c, self.mu).ok()
    }
}

/// Contraction conditions of the four analysis methods, in terms of
/// `c1 = λ_min(P1)`, `c2 = λ_max(P2)`, `λ = λ_max(P2, P1)`, and `η`:
///
/// | method          | C              | μ                              |
/// |-----------------|----------------|--------------------------------|
/// | proposed        | `4λ`           | `η`                            |
/// | allan2021FIE    | `√(4c2/c1)`    | `(1 − (1−η)·c1/(4c2))^{1/4}`   |
/// | knuefer2021MHE  | `8c2/c1`       | `η`                            |
/// | allan2019moving | `3√(8c2/c1)`   | `√η`                           |
///
/// The allan2021FIE row carries strict lower bounds on both constants.
pub fn contraction_conditions(cert: &DiossCertificate) -> Vec<ContractionSpec> {
    let c1 = cert.c1();
    let c2 = cert.c2();
    let lam = cert.lambda_max_p2_p1();
    let eta = cert.eta();
    let ratio = c2 / c1;
    vec![
        ContractionSpec {
            method: MethodTag::Proposed,
            c: 4.0 * lam,
            mu: eta,
            is_lower_bound: false,
        },
        ContractionSpec {
            method: MethodTag::AllanFie2021,
            c: libm::sqrt(4.0 * ratio),
            mu: libm::sqrt(libm::sqrt(1.0 - (1.0 - eta) * c1 / (4.0 * c2))),
            is_lower_bound: true,
        },
        ContractionSpec {
            method: MethodTag::KnueferMhe2021,
            c: 8.0 * ratio,
            mu: eta,
            is_lower_bound: false,
        },
        ContractionSpec {
            method: MethodTag::AllanMoving2019,
            c: 3.0 * libm::sqrt(8.0 * ratio),
            mu: libm::sqrt(eta),
            is_lower_bound: false,
        },
    ]
}

/// Discounted disturbance energy `Σ_{j=1}^{M_t} η^{j−1}·‖w_{t−j}‖²_Q` over a
/// window ordered oldest-first.
pub fn discounted_disturbance_energy(cert: &DiossCertificate, window: &[Vec<f64>]) -> f64 {
    let mt = window.len();
    let eta = cert.eta();
    let mut sum = 0.0;
    for (s, w) in window.iter().enumerate() {
        sum += powi(eta, (mt - 1 - s) as u64) * cert.q().quad_form(w);
    }
    sum
}

/// M-step decrease residual
/// `W_now − (4·η^{M_t}·λ_max(P2,P1)·W_past + 4·Σ_j η^{j−1}‖w_{t−j}‖²_Q)`;
/// the stability guarantee is a nonpositive residual. When `rho` is given,
/// the decay factor `ρ^{M_t}` replaces `4·η^{M_t}·λ_max(P2,P1)`.
pub fn mstep_decrease_residual(
    cert: &DiossCertificate,
    w_now: f64,
    w_past: f64,
    window: &[Vec<f64>],
    rho: Option<f64>,
) -> f64 {
    let mt = window.len() as u64;
    let factor = match rho {
        Some(r) => powi(r, mt),
        None => 4.0 * powi(cert.eta(), mt) * cert.lambda_max_p2_p1(),
    };
    w_now - (factor * w_past + 4.0 * discounted_disturbance_energy(cert, window))
}

/// Value-function bound residual
/// `W_now − (2·η^{M_t}·λ_max(P2,P1)·W_past + cost + 2·Σ_j η^{j−1}‖w_{t−j}‖²_Q)`;
/// nonpositive for every feasible window solution.
pub fn value_bound_residual(
    cert: &DiossCertificate,
    w_now: f64,
    w_past: f64,
    cost: f64,
    window: &[Vec<f64>],
) -> f64 {
    let mt = window.len() as u64;
    let factor = 2.0 * powi(cert.eta(), mt) * cert.lambda_max_p2_p1();
    w_now - (factor * w_past + cost + 2.0 * discounted_disturbance_energy(cert, window))
}

/// Alternative M-step Lyapunov-like value
/// `2·η^M·λ_max(P2,P1)·W_past + cost + 2·Σ_{j=1}^{M} η^{j−1}‖w_{t−j}‖²_Q`,
/// evaluated over the `M` most recent disturbances (window oldest-first).
pub fn alt_lyapunov_value(
    cert: &DiossCertificate,
    m: usize,
    w_past: f64,
    cost: f64,
    window: &[Vec<f64>],
) -> Result<f64, AnalyzeError> {
    if window.len() < m {
        return Err(AnalyzeError::WindowTooShort {
            need: m,
            got: window.len(),
        });
    }
    let tail = &window[window.len() - m..];
    let factor = 2.0 * powi(cert.eta(), m as u64) * cert.lambda_max_p2_p1();
    Ok(factor * w_past + cost + 2.0 * discounted_disturbance_energy(cert, tail))
}

/// Exponential error envelope data: `ρ` from the horizon condition plus the
/// certificate matrices the bound weighs with.
#[derive(Debug, Clone, PartialEq)]
pub struct RgesBound {
    pub rho: f64,
    pub p1: Mat,
    pub p2: Mat,
    pub q: Mat,
}

impl RgesBound {
    /// Build from a certificate and horizon; errors when the horizon
    /// condition fails (`ρ ≥ 1`).
    pub fn from_certificate(cert: &DiossCertificate, m: u64) -> Result<Self, AnalyzeError> {
        let check = horizon_condition(cert, m);
        let rho = match check.rho {
            Some(r) if check.satisfied => r,
            _ => {
                return Err(AnalyzeError::InvalidRate(
                    check.rho.unwrap_or(check.rho_pow_m),
                ))
            }
        };
        Ok(RgesBound {
            rho,
            p1: cert.p1().clone(),
            p2: cert.p2().clone(),
            q: cert.q().clone(),
        })
    }

    /// Envelope on `‖ê_t‖_{P1}`:
    ///
    /// ```text
    /// max{ 4·√ρ^t·‖ê_0‖_{P2},
    ///      max_{q ∈ [0, t−1]} (4/(1−ρ^{1/4}))·ρ^{q/4}·‖w_{t−q−1}‖_Q }
    /// ```
    ///
    /// `disturbances` is the history `w_0 … w_{t−1}` (oldest first; may be
    /// longer, only the first `t` entries are read).
    pub fn error_bound(
        &self,
        e0_p2_norm: f64,
        disturbances: &[Vec<f64>],
        t: u64,
    ) -> Result<f64, AnalyzeError> {
        if !(self.rho < 1.0) || !(self.rho >= 0.0) {
            return Err(AnalyzeError::InvalidRate(self.rho));
        }
        if (disturbances.len() as u64) < t {
            return Err(AnalyzeError::WindowTooShort {
                need: t as usize,
                got: disturbances.len(),
            });
        }
        let sqrt_rho = libm::sqrt(self.rho);
        let quarter_rho = libm::sqrt(sqrt_rho);
        let mut bound = 4.0 * powi(sqrt_rho, t) * e0_p2_norm;
        let gain = 4.0 / (1.0 - quarter_rho);
        for q in 0..t {
            let w = &disturbances[(t - q - 1) as usize];
            let wq = libm::sqrt(self.q.quad_form(w));
            bound = bound.max(gain * powi(quarter_rho, q) * wq);
        }
        Ok(bound)
    }
}

/// Decay bound on `W_δ(x̂_t, x_t)` along full-information runs:
/// `2·η^t·α2(2·α1⁻¹(W_0)) + 2·Σ_{j=1}^t η^{j−1}·σ_w(2‖w_{t−j}‖)`.
pub fn fie_wdelta_bound(
    gains: &FieGains,
    w_delta_0: f64,
    disturbances: &[Vec<f64>],
    t: usize,
) -> Result<f64, AnalyzeError> {
    if disturbances.len() < t {
        return Err(AnalyzeError::WindowTooShort {
            need: t,
            got: disturbances.len(),
        });
    }
    let inv0 = gains
        .alpha1
        .inverse(w_delta_0)
        .ok_or(AnalyzeError::MissingInverse)?;
    let mut bound = 2.0 * powi(gains.eta, t as u64) * gains.alpha2.value(2.0 * inv0);
    for j in 1..=t {
        bound += 2.0
            * powi(gains.eta, (j - 1) as u64)
            * gains.sigma_w.value(2.0 * norm2(&disturbances[t - j]));
    }
    Ok(bound)
}

/// Asymptotic error envelope along full-information runs:
///
/// ```text
/// max{ 2·α1⁻¹(4·η^t·α2(2‖x̂_0 − x_0‖)),
///      max_{j ∈ [0, t−1]} 2·α1⁻¹((4/(1−√η))·√η^j·σ_w(2‖w_{t−j−1}‖)) }
/// ```
pub fn fie_error_bound(
    gains: &FieGains,
    e0_norm: f64,
    disturbances: &[Vec<f64>],
    t: usize,
) -> Result<f64, AnalyzeError> {
    if disturbances.len() < t {
        return Err(AnalyzeError::WindowTooShort {
            need: t,
            got: disturbances.len(),
        });
    }
    if gains.alpha1.inverse(0.0).is_none() {
        return Err(AnalyzeError::MissingInverse);
    }
    let inv = |r: f64| gains.alpha1.inverse(r).expect("checked above");
    let mut bound = 2.0 * inv(4.0 * powi(gains.eta, t as u64) * gains.alpha2.value(2.0 * e0_norm));
    let sqrt_eta = libm::sqrt(gains.eta);
    let gain = 4.0 / (1.0 - sqrt_eta);
    for j in 0..t {
        let w = &disturbances[t - j - 1];
        let v = 2.0 * inv(gain * powi(sqrt_eta, j as u64) * gains.sigma_w.value(2.0 * norm2(w)));
        bound = bound.max(v);
    }
    Ok(bound)
}
