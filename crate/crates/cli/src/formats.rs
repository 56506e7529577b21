//! File formats: model configs, certificates, scenarios, and log export.
//!
//! All JSON floats are written in shortest round-trip decimal form (what
//! `serde_json` emits), so reading a file back reproduces every `f64`
//! bit-for-bit. CSV export uses 17 significant digits for the same reason.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mhecert_core::certify::DiossCertificate;
use mhecert_core::estimate::{SolverConfig, WarmStart};
use mhecert_core::harness::{
    DisturbanceMode, EstimatorKind, MonitorFlags, MonitorSample, SimulationLog, StepRecord,
};
use mhecert_core::linalg::Mat;
use mhecert_core::model::{reactor_model_with, ReactorParams, SystemModel};

#[derive(Debug)]
pub enum FormatError {
    Io(io::Error),
    Json(serde_json::Error),
    Invalid(String),
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::Io(e) => write!(f, "i/o error: {e}"),
            FormatError::Json(e) => write!(f, "json error: {e}"),
            FormatError::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for FormatError {}

impl From<io::Error> for FormatError {
    fn from(e: io::Error) -> Self {
        FormatError::Io(e)
    }
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Json(e)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let text = fs::read_to_string(path)
        .map_err(|e| FormatError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// model config

fn default_k1() -> f64 {
    0.16
}
fn default_k2() -> f64 {
    0.0064
}
fn default_dt() -> f64 {
    0.1
}
fn default_x_box() -> Vec<[f64; 2]> {
    vec![[0.1, 4.5], [0.1, 4.5]]
}
fn default_w_bound() -> f64 {
    1e-3
}

/// Built-in model selection, e.g.
/// `{"model":"reactor","k1":0.16,"k2":0.0064,"dt":0.1,
///   "x_box":[[0.1,4.5],[0.1,4.5]],"w_bound":1e-3}`.
/// Omitted parameters take the benchmark defaults.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: String,
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_k2")]
    pub k2: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_x_box")]
    pub x_box: Vec<[f64; 2]>,
    #[serde(default = "default_w_bound")]
    pub w_bound: f64,
}

impl ModelConfig {
    pub fn reactor() -> Self {
        ModelConfig {
            model: "reactor".into(),
            k1: default_k1(),
            k2: default_k2(),
            dt: default_dt(),
            x_box: default_x_box(),
            w_bound: default_w_bound(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        write_json(path, self)
    }

    pub fn build(&self) -> Result<SystemModel, FormatError> {
        match self.model.as_str() {
            "reactor" => {
                if self.x_box.len() != 2 {
                    return Err(FormatError::Invalid(format!(
                        "reactor state box needs 2 intervals, got {}",
                        self.x_box.len()
                    )));
                }
                if !(self.w_bound >= 0.0) {
                    return Err(FormatError::Invalid("w_bound must be nonnegative".into()));
                }
                let params = ReactorParams {
                    k1: self.k1,
                    k2: self.k2,
                    dt: self.dt,
                    x_box: [
                        (self.x_box[0][0], self.x_box[0][1]),
                        (self.x_box[1][0], self.x_box[1][1]),
                    ],
                    w_bound: self.w_bound,
                };
                Ok(reactor_model_with(&params))
            }
            other => Err(FormatError::Invalid(format!("unknown model \"{other}\""))),
        }
    }
}

// ---------------------------------------------------------------------------
// certificate

/// On-disk certificate:
/// `{"P":[[...]],"Q":[[...]],"R":[[...]],"eta":0.91,"transform":null}`.
/// Only constant-metric certificates (`P1 = P2 = P`) have a file form.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    pub eta: f64,
    #[serde(default)]
    pub transform: Option<Vec<Vec<f64>>>,
}

fn rows_to_mat(rows: &[Vec<f64>], name: &str) -> Result<Mat, FormatError> {
    let r = rows.len();
    let c = rows.first().map(|row| row.len()).unwrap_or(0);
    if rows.iter().any(|row| row.len() != c) {
        return Err(FormatError::Invalid(format!("{name} is ragged")));
    }
    let mut data = Vec::with_capacity(r * c);
    for row in rows {
        data.extend_from_slice(row);
    }
    Ok(Mat::from_vec(r, c, data))
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

impl CertificateFile {
    pub fn load(path: &Path) -> Result<Self, FormatError> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        write_json(path, self)
    }

    pub fn to_certificate(&self) -> Result<DiossCertificate, FormatError> {
        let p = rows_to_mat(&self.p, "P")?;
        let q = rows_to_mat(&self.q, "Q")?;
        let r = rows_to_mat(&self.r, "R")?;
        let cert = DiossCertificate::quadratic(p, q, r, self.eta)
            .map_err(|e| FormatError::Invalid(format!("invalid certificate: {e}")))?;
        match &self.transform {
            Some(rows) => {
                let t = rows_to_mat(rows, "transform")?;
                cert.with_transform(t)
                    .map_err(|e| FormatError::Invalid(format!("invalid transform: {e}")))
            }
            None => Ok(cert),
        }
    }

    pub fn from_certificate(cert: &DiossCertificate) -> Result<Self, FormatError> {
        let p = cert.metric().ok_or_else(|| {
            FormatError::Invalid("only constant-metric certificates can be serialized".into())
        })?;
        Ok(CertificateFile {
            p: mat_to_rows(p),
            q: mat_to_rows(cert.q()),
            r: mat_to_rows(cert.r()),
            eta: cert.eta(),
            transform: cert.transform().map(mat_to_rows),
        })
    }
}

// ---------------------------------------------------------------------------
// scenario

/// A model or certificate reference: a path (resolved relative to the
/// scenario file) or an inline object.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ModelRef {
    Path(String),
    Inline(ModelConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum CertRef {
    Path(String),
    Inline(CertificateFile),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorsJson {
    pub value_bound: bool,
    pub mstep_decrease: bool,
    pub error_envelope: bool,
    pub fie_bounds: bool,
    pub alt_lyapunov: bool,
}

impl Default for MonitorsJson {
    fn default() -> Self {
        MonitorsJson {
            value_bound: true,
            mstep_decrease: true,
            error_envelope: true,
            fie_bounds: true,
            alt_lyapunov: true,
        }
    }
}

impl From<MonitorsJson> for MonitorFlags {
    fn from(m: MonitorsJson) -> Self {
        MonitorFlags {
            value_bound: m.value_bound,
            mstep_decrease: m.mstep_decrease,
            error_envelope: m.error_envelope,
            fie_bounds: m.fie_bounds,
            alt_lyapunov: m.alt_lyapunov,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverJson {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub step_tol: f64,
    pub levenberg_lambda0: f64,
    pub penalty_weight: f64,
    /// `"none" | "previous-shifted" | "true-sequence"`.
    pub warm_start: String,
}

impl Default for SolverJson {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverJson {
            max_iterations: d.max_iterations,
            gradient_tol: d.gradient_tol,
            step_tol: d.step_tol,
            levenberg_lambda0: d.levenberg_lambda0,
            penalty_weight: d.penalty_weight,
            // closed-loop runs re-solve a shifted window; warm starting is
            // the sensible file default
            warm_start: "previous-shifted".into(),
        }
    }
}

impl SolverJson {
    pub fn to_config(&self) -> Result<SolverConfig, FormatError> {
        let warm_start = match self.warm_start.as_str() {
            "none" => WarmStart::None,
            "previous-shifted" => WarmStart::PreviousShifted,
            "true-sequence" => WarmStart::TrueSequence,
            other => {
                return Err(FormatError::Invalid(format!(
                    "unknown warm_start \"{other}\""
                )));
            }
        };
        Ok(SolverConfig {
            max_iterations: self.max_iterations,
            gradient_tol: self.gradient_tol,
            step_tol: self.step_tol,
            levenberg_lambda0: self.levenberg_lambda0,
            penalty_weight: self.penalty_weight,
            warm_start,
        })
    }
}

fn default_steps() -> usize {
    300
}
fn default_seed() -> u64 {
    1
}
fn default_estimator() -> String {
    "mhe".into()
}
fn default_disturbance() -> String {
    "uniform-box".into()
}
fn default_true() -> bool {
    true
}

/// Scenario file: closed-loop simulation setup.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub model: ModelRef,
    pub certificate: CertRef,
    #[serde(default = "default_estimator")]
    pub estimator: String,
    pub horizon: usize,
    pub x0_true: Vec<f64>,
    pub x0_hat: Vec<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// `"uniform-box" | "zero"`.
    #[serde(default = "default_disturbance")]
    pub disturbance: String,
    #[serde(default)]
    pub monitors: MonitorsJson,
    #[serde(default = "default_true")]
    pub supply_candidate: bool,
    #[serde(default)]
    pub solver: SolverJson,
}

/// Everything a scenario file resolves to (model ownership lives here so the
/// borrow-based config can be assembled by the caller).
pub struct ResolvedScenario {
    pub model: SystemModel,
    pub cert: DiossCertificate,
    pub estimator: EstimatorKind,
    pub horizon: usize,
    pub x0_true: Vec<f64>,
    pub x0_hat: Vec<f64>,
    pub steps: usize,
    pub seed: u64,
    pub disturbance: DisturbanceMode,
    pub monitors: MonitorFlags,
    pub supply_candidate: bool,
    pub solver: SolverConfig,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, FormatError> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        write_json(path, self)
    }

    /// Resolve references relative to `base_dir` (normally the scenario
    /// file's directory) and build the pieces of a runnable scenario.
    pub fn resolve(&self, base_dir: &Path) -> Result<ResolvedScenario, FormatError> {
        let model_cfg = match &self.model {
            ModelRef::Inline(cfg) => cfg.clone(),
            ModelRef::Path(rel) => ModelConfig::load(&join_base(base_dir, rel))?,
        };
        let cert_file = match &self.certificate {
            CertRef::Inline(c) => c.clone(),
            CertRef::Path(rel) => CertificateFile::load(&join_base(base_dir, rel))?,
        };
        let estimator = match self.estimator.as_str() {
            "mhe" => EstimatorKind::Mhe,
            "fie" => EstimatorKind::Fie,
            other => {
                return Err(FormatError::Invalid(format!(
                    "unknown estimator \"{other}\""
                )))
            }
        };
        let disturbance = match self.disturbance.as_str() {
            "uniform-box" => DisturbanceMode::UniformBox,
            "zero" => DisturbanceMode::Zero,
            other => {
                return Err(FormatError::Invalid(format!(
                    "unknown disturbance \"{other}\""
                )));
            }
        };
        Ok(ResolvedScenario {
            model: model_cfg.build()?,
            cert: cert_file.to_certificate()?,
            estimator,
            horizon: self.horizon,
            x0_true: self.x0_true.clone(),
            x0_hat: self.x0_hat.clone(),
            steps: self.steps,
            seed: self.seed,
            disturbance,
            monitors: self.monitors.into(),
            supply_candidate: self.supply_candidate,
            solver: self.solver.to_config()?,
        })
    }
}

fn join_base(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

// ---------------------------------------------------------------------------
// log export

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_residual(m: &Option<MonitorSample>) -> String {
    match m {
        Some(s) => fmt17(s.residual),
        None => String::new(),
    }
}

/// Render the log as CSV with columns
/// `t,x1,…,xn,xhat1,…,xhatn,err_norm,W_delta,cost,res_eq11,res_eq12,res_eq15`
/// (17 significant digits; empty cells for monitors that did not apply).
pub fn log_to_csv(log: &SimulationLog) -> String {
    let n = log.records.first().map(|r| r.x_true.len()).unwrap_or(2);
    let mut header = String::from("t");
    for i in 1..=n {
        header.push_str(&format!(",x{i}"));
    }
    for i in 1..=n {
        header.push_str(&format!(",xhat{i}"));
    }
    header.push_str(",err_norm,W_delta,cost,res_eq11,res_eq12,res_eq15");
    let mut out = header;
    out.push('\n');
    for rec in &log.records {
        let mut line = format!("{}", rec.t);
        for v in &rec.x_true {
            line.push(',');
            line.push_str(&fmt17(*v));
        }
        for v in &rec.x_hat {
            line.push(',');
            line.push_str(&fmt17(*v));
        }
        line.push(',');
        line.push_str(&fmt17(rec.error_norm));
        line.push(',');
        line.push_str(&fmt17(rec.w_delta));
        line.push(',');
        line.push_str(&fmt17(rec.cost));
        line.push(',');
        line.push_str(&opt_residual(&rec.value_bound));
        line.push(',');
        line.push_str(&opt_residual(&rec.mstep));
        line.push(',');
        line.push_str(&opt_residual(&rec.envelope));
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn write_log_csv(log: &SimulationLog, path: &Path) -> Result<(), FormatError> {
    fs::write(path, log_to_csv(log))?;
    Ok(())
}

// JSON mirror of the in-memory log

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MonitorSampleJson {
    pub residual: f64,
    pub bound: f64,
}

impl From<&MonitorSample> for MonitorSampleJson {
    fn from(m: &MonitorSample) -> Self {
        MonitorSampleJson {
            residual: m.residual,
            bound: m.bound,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StepRecordJson {
    pub t: usize,
    pub x_true: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub error: Vec<f64>,
    pub error_norm: f64,
    pub w_delta: f64,
    pub cost: f64,
    pub candidate_cost: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub box_violation: f64,
    pub value_bound: Option<MonitorSampleJson>,
    pub mstep: Option<MonitorSampleJson>,
    pub envelope: Option<MonitorSampleJson>,
    pub fie_wdelta: Option<MonitorSampleJson>,
    pub fie_error: Option<MonitorSampleJson>,
    pub alt_chain: Option<MonitorSampleJson>,
    pub alt_lyapunov: Option<f64>,
}

impl From<&StepRecord> for StepRecordJson {
    fn from(r: &StepRecord) -> Self {
        StepRecordJson {
            t: r.t,
            x_true: r.x_true.clone(),
            x_hat: r.x_hat.clone(),
            error: r.error.clone(),
            error_norm: r.error_norm,
            w_delta: r.w_delta,
            cost: r.cost,
            candidate_cost: r.candidate_cost,
            converged: r.converged,
            iterations: r.iterations,
            box_violation: r.box_violation,
            value_bound: r.value_bound.as_ref().map(Into::into),
            mstep: r.mstep.as_ref().map(Into::into),
            envelope: r.envelope.as_ref().map(Into::into),
            fie_wdelta: r.fie_wdelta.as_ref().map(Into::into),
            fie_error: r.fie_error.as_ref().map(Into::into),
            alt_chain: r.alt_chain.as_ref().map(Into::into),
            alt_lyapunov: r.alt_lyapunov,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SummaryJson {
    pub final_error_norm: f64,
    pub max_error_norm: f64,
    pub max_res_value_bound: Option<f64>,
    pub max_res_mstep: Option<f64>,
    pub max_res_envelope: Option<f64>,
    pub max_res_fie_wdelta: Option<f64>,
    pub max_res_fie_error: Option<f64>,
    pub max_res_alt_lyapunov: Option<f64>,
    pub horizon_condition_satisfied: bool,
    pub rho: Option<f64>,
    pub certificate_verified: Option<bool>,
    pub solver_failures: usize,
    pub max_box_violation: f64,
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LogFile {
    pub seed: u64,
    pub steps: usize,
    pub horizon: usize,
    pub estimator: String,
    pub records: Vec<StepRecordJson>,
    pub summary: SummaryJson,
}

impl From<&SimulationLog> for LogFile {
    fn from(log: &SimulationLog) -> Self {
        let s = &log.summary;
        LogFile {
            seed: log.seed,
            steps: log.steps,
            horizon: log.horizon,
            estimator: match log.estimator {
                EstimatorKind::Mhe => "mhe".into(),
                EstimatorKind::Fie => "fie".into(),
            },
            records: log.records.iter().map(Into::into).collect(),
            summary: SummaryJson {
                final_error_norm: s.final_error_norm,
                max_error_norm: s.max_error_norm,
                max_res_value_bound: s.max_res_value_bound,
                max_res_mstep: s.max_res_mstep,
                max_res_envelope: s.max_res_envelope,
                max_res_fie_wdelta: s.max_res_fie_wdelta,
                max_res_fie_error: s.max_res_fie_error,
                max_res_alt_lyapunov: s.max_res_alt_lyapunov,
                horizon_condition_satisfied: s.horizon_condition_satisfied,
                rho: s.rho,
                certificate_verified: s.certificate_verified,
                solver_failures: s.solver_failures,
                max_box_violation: s.max_box_violation,
                wall_time_ms: s.wall_time_ms,
            },
        }
    }
}

pub fn write_log_json(log: &SimulationLog, path: &Path) -> Result<(), FormatError> {
    write_json(path, &LogFile::from(log))
}

pub fn read_log_json(path: &Path) -> Result<LogFile, FormatError> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_config_defaults_fill_in() {
        let cfg: ModelConfig = serde_json::from_str(r#"{"model":"reactor"}"#).unwrap();
        assert_eq!(cfg, ModelConfig::reactor());
        let model = cfg.build().unwrap();
        assert_eq!(model.state_dim(), 2);
        assert_eq!(model.disturbance_dim(), 3);
    }

    #[test]
    fn unknown_model_rejected() {
        let cfg: ModelConfig = serde_json::from_str(r#"{"model":"pendulum"}"#).unwrap();
        assert!(cfg.build().is_err());
    }

    #[test]
    fn certificate_file_round_trips_bitwise() {
        let file = CertificateFile {
            p: vec![vec![1.249, 1.146], vec![1.146, 1.053]],
            q: vec![
                vec![1e4, 0.0, 0.0],
                vec![0.0, 1e4, 0.0],
                vec![0.0, 0.0, 1e4],
            ],
            r: vec![vec![100.0]],
            eta: 0.91,
            transform: None,
        };
        let cert = file.to_certificate().unwrap();
        let back = CertificateFile::from_certificate(&cert).unwrap();
        assert_eq!(file, back);
        // through text as well
        let text = serde_json::to_string(&back).unwrap();
        let reparsed: CertificateFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, reparsed);
        for (a, b) in back.p.iter().flatten().zip(reparsed.p.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn certificate_with_transform_round_trips() {
        let file = CertificateFile {
            p: vec![vec![2.0, 0.3], vec![0.3, 1.0]],
            q: vec![vec![1.0]],
            r: vec![vec![1.0]],
            eta: 0.8,
            transform: Some(vec![vec![2.0, 0.5], vec![-1.0, 3.0]]),
        };
        let cert = file.to_certificate().unwrap();
        assert!(cert.transform().is_some());
        let back = CertificateFile::from_certificate(&cert).unwrap();
        assert_eq!(file, back);
        // singular transform is rejected
        let bad = CertificateFile {
            transform: Some(vec![vec![1.0, 2.0], vec![2.0, 4.0]]),
            ..file
        };
        assert!(bad.to_certificate().is_err());
    }

    #[test]
    fn scenario_parses_with_defaults() {
        let text = r#"{
            "model": {"model": "reactor"},
            "certificate": {"P": [[1.0, 0.0], [0.0, 1.0]],
                            "Q": [[1.0,0,0],[0,1.0,0],[0,0,1.0]],
                            "R": [[1.0]], "eta": 0.5},
            "horizon": 15,
            "x0_true": [3.0, 1.0],
            "x0_hat": [0.1, 4.5]
        }"#;
        let sc: ScenarioFile = serde_json::from_str(text).unwrap();
        assert_eq!(sc.steps, 300);
        assert_eq!(sc.seed, 1);
        assert_eq!(sc.estimator, "mhe");
        assert!(sc.supply_candidate);
        let resolved = sc.resolve(Path::new(".")).unwrap();
        assert_eq!(resolved.solver.warm_start, WarmStart::PreviousShifted);
        assert_eq!(resolved.horizon, 15);
    }

    #[test]
    fn scenario_rejects_unknown_fields() {
        let text = r#"{
            "model": {"model": "reactor"},
            "certificate": {"P": [[1.0]], "Q": [[1.0]], "R": [[1.0]], "eta": 0.5},
            "horizon": 5, "x0_true": [1.0], "x0_hat": [1.0],
            "definitely_not_a_field": 1
        }"#;
        assert!(serde_json::from_str::<ScenarioFile>(text).is_err());
    }

    #[test]
    fn csv_of_empty_log_is_header_only() {
        let log = SimulationLog {
            seed: 0,
            steps: 0,
            horizon: 1,
            estimator: EstimatorKind::Mhe,
            records: vec![],
            summary: mhecert_core::harness::RunSummary {
                final_error_norm: 0.0,
                max_error_norm: 0.0,
                max_res_value_bound: None,
                max_res_mstep: None,
                max_res_envelope: None,
                max_res_fie_wdelta: None,
                max_res_fie_error: None,
                max_res_alt_lyapunov: None,
                horizon_condition_satisfied: false,
                rho: None,
                certificate_verified: None,
                solver_failures: 0,
                max_box_violation: 0.0,
                wall_time_ms: None,
            },
        };
        let csv = log_to_csv(&log);
        assert_eq!(
            csv,
            "t,x1,x2,xhat1,xhat2,err_norm,W_delta,cost,res_eq11,res_eq12,res_eq15\n"
        );
    }
}
