//! Command implementations behind the CLI surface.
//!
//! Every command returns a structured outcome plus rendered text; exit-code
//! policy lives in `main`: 0 on success, 1 on analytical failure (failed
//! verification, infeasible synthesis, violated monitor), 2 on usage or i/o
//! errors.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use mhecert_core::analyze::{contraction_conditions, ContractionSpec};
use mhecert_core::certify::{
    synthesize_certificate_with, verify_certificate, CertifyError, ObjectiveHint, SamplingPlan,
    Soundness, SynthesisOptions, VerificationReport,
};
use mhecert_core::estimate::MheConfig;
use mhecert_core::harness::{run_scenario, HarnessError, ScenarioConfig, SimulationLog};
use mhecert_core::model::SystemModel;

use crate::formats::{
    write_log_csv, write_log_json, CertificateFile, FormatError, ModelConfig, ScenarioFile,
};

#[derive(Debug)]
pub enum CmdError {
    /// Bad invocation, unreadable or malformed files: exit 2.
    Usage(String),
    /// The analysis itself failed: exit 1.
    Analysis(String),
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Usage(m) | CmdError::Analysis(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CmdError {}

impl From<FormatError> for CmdError {
    fn from(e: FormatError) -> Self {
        CmdError::Usage(e.to_string())
    }
}

impl From<CertifyError> for CmdError {
    fn from(e: CertifyError) -> Self {
        match e {
            CertifyError::SynthesisInfeasible { .. } => CmdError::Analysis(e.to_string()),
            _ => CmdError::Usage(e.to_string()),
        }
    }
}

fn load_model(path: &Path) -> Result<SystemModel, CmdError> {
    Ok(ModelConfig::load(path)?.build()?)
}

fn load_cert(
    path: &Path,
    eta_override: Option<f64>,
) -> Result<mhecert_core::certify::DiossCertificate, CmdError> {
    let cert = CertificateFile::load(path)?.to_certificate()?;
    match eta_override {
        Some(eta) => cert
            .with_eta(eta)
            .map_err(|e| CmdError::Usage(format!("--eta override: {e}"))),
        None => Ok(cert),
    }
}

pub struct VerifyOutcome {
    pub report: VerificationReport,
    pub elapsed_ms: f64,
}

impl VerifyOutcome {
    pub fn render(&self) -> String {
        let r = &self.report;
        let soundness = match r.soundness {
            Soundness::Exact => "exact (vertex enumeration with affine Jacobians)",
            Soundness::Heuristic => "heuristic (finite sampling only)",
        };
        let point = match &r.worst_point {
            Some((x, u, w)) => format!("x={x:?} u={u:?} w={w:?}"),
            None => "-".into(),
        };
        format!(
            "verdict:          {}\n\
             worst eigenvalue: {:.6e} (tolerance {:.1e})\n\
             worst point:      {}\n\
             sandwich bounds:  {}\n\
             soundness:        {}\n\
             samples:          {}\n\
             elapsed:          {:.3} ms",
            if r.pass { "PASS" } else { "FAIL" },
            r.worst_eigenvalue,
            r.tol,
            point,
            if r.sandwich_ok { "ok" } else { "violated" },
            soundness,
            r.samples,
            self.elapsed_ms,
        )
    }
}

/// `verify --model F --cert F [--grid n1,n2,...] [--tol x] [--eta x]`
pub fn cmd_verify(
    model_path: &Path,
    cert_path: &Path,
    grid: Option<Vec<usize>>,
    tol: f64,
    eta_override: Option<f64>,
) -> Result<VerifyOutcome, CmdError> {
    let model = load_model(model_path)?;
    let cert = load_cert(cert_path, eta_override)?;
    let plan = match grid {
        Some(counts) => SamplingPlan::grid(counts),
        None => SamplingPlan::vertices_auto(&model)?,
    };
    let start = Instant::now();
    let report = verify_certificate(&model, &cert, &plan, tol)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(VerifyOutcome { report, elapsed_ms })
}

/// Parse `a:b:step` into an inclusive grid.
pub fn parse_eta_grid(spec: &str) -> Result<Vec<f64>, CmdError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CmdError::Usage(format!("--eta-grid: expected a:b:step, got \"{spec}\""));
    let parse = |s: &str| s.parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        [single] => Ok(vec![parse(single)?]),
        [a, b, step] => {
            let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
            if !(step > 0.0) || b < a {
                return Err(bad());
            }
            let mut grid = Vec::new();
            let n = ((b - a) / step).round() as usize;
            for k in 0..=n {
                let v = a + step * k as f64;
                if v <= b + 1e-12 {
                    grid.push(v.min(b));
                }
            }
            Ok(grid)
        }
        _ => Err(bad()),
    }
}

pub struct SynthesizeOutcome {
    pub certificate_json: String,
    pub eta: f64,
    pub margin: f64,
    pub elapsed_ms: f64,
}

/// `synthesize --model F --eta-grid a:b:step [--diag-qr] [--out F]`
#[allow(clippy::too_many_arguments)]
pub fn cmd_synthesize(
    model_path: &Path,
    eta_grid_spec: &str,
    diag_qr: bool,
    maximize_margin: bool,
    q_max: Option<f64>,
    r_max: Option<f64>,
    out: Option<&Path>,
) -> Result<SynthesizeOutcome, CmdError> {
    let model = load_model(model_path)?;
    let grid = parse_eta_grid(eta_grid_spec)?;
    let plan = SamplingPlan::vertices_auto(&model)?;
    let hint = if maximize_margin {
        ObjectiveHint::MaximizeMargin
    } else {
        ObjectiveHint::MinimizeEta
    };
    let defaults = SynthesisOptions::default();
    let opts = SynthesisOptions {
        diag_qr,
        q_max: q_max.unwrap_or(defaults.q_max),
        r_max: r_max.unwrap_or(defaults.r_max),
        ..defaults
    };
    let start = Instant::now();
    let outcome = synthesize_certificate_with(&model, &plan, &grid, hint, &opts)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let file = CertificateFile::from_certificate(&outcome.certificate)?;
    let json = serde_json::to_string_pretty(&file).map_err(FormatError::from)?;
    if let Some(path) = out {
        file.save(path)?;
    }
    Ok(SynthesizeOutcome {
        certificate_json: json,
        eta: outcome.certificate.eta(),
        margin: outcome.margin,
        elapsed_ms,
    })
}

pub struct HorizonRow {
    pub spec: ContractionSpec,
    pub m_min: Option<u64>,
}

pub struct HorizonOutcome {
    pub rows: Vec<HorizonRow>,
    pub elapsed_ms: f64,
}

impl HorizonOutcome {
    pub fn proposed_m_min(&self) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.spec.method == mhecert_core::analyze::MethodTag::Proposed)
            .and_then(|r| r.m_min)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<16} {:>14} {:>10} {:>10}  {}\n",
            "method", "C", "mu", "M_min", "note"
        );
        for row in &self.rows {
            let m = match row.m_min {
                Some(m) => m.to_string(),
                None => "inf".into(),
            };
            out.push_str(&format!(
                "{:<16} {:>14.6e} {:>10.6} {:>10}  {}\n",
                row.spec.method.as_str(),
                row.spec.c,
                row.spec.mu,
                m,
                if row.spec.is_lower_bound {
                    "lower bound only"
                } else {
                    ""
                },
            ));
        }
        out.push_str(&format!("elapsed: {:.3} ms", self.elapsed_ms));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,C,mu,M_min,is_lower_bound\n");
        for row in &self.rows {
            let m = match row.m_min {
                Some(m) => m.to_string(),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{},{}\n",
                row.spec.method.as_str(),
                row.spec.c,
                row.spec.mu,
                m,
                row.spec.is_lower_bound,
            ));
        }
        out
    }
}

fn horizon_table(cert: &mhecert_core::certify::DiossCertificate) -> HorizonOutcome {
    let start = Instant::now();
    let rows = contraction_conditions(cert)
        .into_iter()
        .map(|spec| HorizonRow {
            m_min: spec.min_horizon(),
            spec,
        })
        .collect();
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    HorizonOutcome { rows, elapsed_ms }
}

/// `horizon --cert F [--eta x]`
pub fn cmd_horizon(
    cert_path: &Path,
    eta_override: Option<f64>,
) -> Result<HorizonOutcome, CmdError> {
    let cert = load_cert(cert_path, eta_override)?;
    Ok(horizon_table(&cert))
}

/// `compare --cert F --out F [--eta x]`: the same table as CSV.
pub fn cmd_compare(
    cert_path: &Path,
    out_path: &Path,
    eta_override: Option<f64>,
) -> Result<HorizonOutcome, CmdError> {
    let cert = load_cert(cert_path, eta_override)?;
    let outcome = horizon_table(&cert);
    std::fs::write(out_path, outcome.to_csv())
        .map_err(|e| CmdError::Usage(format!("cannot write {}: {e}", out_path.display())))?;
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Csv,
    Json,
}

pub struct SimulateOutcome {
    pub log: SimulationLog,
    /// Any enabled monitor violated beyond tolerance (scaled residual
    /// above `MONITOR_TOL`).
    pub violated: bool,
}

/// Scale-relative monitor tolerance applied by `simulate`.
pub const MONITOR_TOL: f64 = 1e-8;

impl SimulateOutcome {
    pub fn render_summary(&self) -> String {
        let s = &self.log.summary;
        let fmt_opt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.3e}"),
            None => "-".into(),
        };
        let mut out = format!(
            "steps: {}   final error: {:.6e}   max error: {:.6e}\n\
             monitors (worst scaled residual; <= {MONITOR_TOL:.0e} is healthy):\n\
             \u{0020} value-bound {}   mstep {}   envelope {}\n\
             \u{0020} fie-wdelta {}   fie-error {}   alt-chain {}\n",
            self.log.steps,
            s.final_error_norm,
            s.max_error_norm,
            fmt_opt(s.max_res_value_bound),
            fmt_opt(s.max_res_mstep),
            fmt_opt(s.max_res_envelope),
            fmt_opt(s.max_res_fie_wdelta),
            fmt_opt(s.max_res_fie_error),
            fmt_opt(s.max_res_alt_lyapunov),
        );
        if !s.horizon_condition_satisfied {
            out.push_str(
                "note: horizon condition violated (4*eta^M*lambda >= 1): decrease monitors are informational, no exponential envelope\n",
            );
        }
        if s.certificate_verified == Some(false) {
            out.push_str("warning: certificate failed vertex verification on this model\n");
        }
        if s.solver_failures > 0 {
            out.push_str(&format!(
                "warning: {} solver runs did not converge\n",
                s.solver_failures
            ));
        }
        out.push_str(&format!(
            "verdict: {}",
            if self.violated {
                "MONITOR VIOLATION"
            } else {
                "ok"
            }
        ));
        out
    }
}

/// `simulate --scenario F --out F [--format csv|json]`; seed precedence is
/// `--seed` flag over `MHECERT_SEED` over the scenario file.
pub fn cmd_simulate(
    scenario_path: &Path,
    out_path: &Path,
    format: LogFormat,
    seed_flag: Option<u64>,
    horizon_flag: Option<usize>,
) -> Result<SimulateOutcome, CmdError> {
    let scenario = ScenarioFile::load(scenario_path)?;
    let base = scenario_path.parent().unwrap_or(Path::new("."));
    let resolved = scenario.resolve(base)?;
    let env_seed = match std::env::var("MHECERT_SEED") {
        Ok(v) => Some(
            v.parse::<u64>()
                .map_err(|_| CmdError::Usage(format!("MHECERT_SEED: not a u64: \"{v}\"")))?,
        ),
        Err(_) => None,
    };
    let mut mhe = MheConfig::new(
        horizon_flag.unwrap_or(resolved.horizon),
        resolved.cert.clone(),
    );
    mhe.solver = resolved.solver;
    let mut cfg = ScenarioConfig::new(
        &resolved.model,
        mhe,
        resolved.x0_true.clone(),
        resolved.x0_hat.clone(),
    );
    cfg.estimator = resolved.estimator;
    cfg.steps = resolved.steps;
    cfg.seed = seed_flag.or(env_seed).unwrap_or(resolved.seed);
    cfg.disturbance = resolved.disturbance;
    cfg.monitors = resolved.monitors;
    cfg.supply_candidate = resolved.supply_candidate;

    let started = Instant::now();
    let mut log = run_scenario(&cfg).map_err(|e| match e {
        HarnessError::StateLeftDomain { .. } => CmdError::Analysis(e.to_string()),
        other => CmdError::Usage(other.to_string()),
    })?;
    log.summary.wall_time_ms = Some(started.elapsed().as_secs_f64() * 1e3);

    match format {
        LogFormat::Csv => write_log_csv(&log, out_path)?,
        LogFormat::Json => write_log_json(&log, out_path)?,
    }
    let s = &log.summary;
    let violated = [
        s.max_res_value_bound,
        s.max_res_mstep,
        s.max_res_envelope,
        s.max_res_fie_wdelta,
        s.max_res_fie_error,
        s.max_res_alt_lyapunov,
    ]
    .iter()
    .any(|r| r.map_or(false, |v| v > MONITOR_TOL));
    Ok(SimulateOutcome { log, violated })
}
