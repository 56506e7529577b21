//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (visible with `--nocapture`; the harness prints one
//! ok/FAILED line per criterion either way).
//!
//! Run with `cargo test -p mhecert --test acceptance`.
//!
//! Two assertions are expected to fail on mathematically verified grounds
//! (see the failure messages for the measured values): the printed
//! three-decimal benchmark certificate misses the 1e-6 eigenvalue tolerance
//! at the lower vertex (criterion 2), and the closed-loop error cannot stay
//! below 0.1 after step 150 under the benchmark disturbance intensity for
//! any seed (criterion 5's error clause). Everything else holds.

use std::sync::OnceLock;
use std::time::Instant;

use mhecert_core::analyze::{contraction_conditions, min_horizon, MethodTag};
use mhecert_core::certify::{
    generalized_eigmax, lmi_matrix, synthesize_certificate_with, verify_certificate,
    DiossCertificate, LmiSample, ObjectiveHint, SamplingPlan, Soundness, SynthesisOptions,
};
use mhecert_core::estimate::{solve_mhe, EstimationWindow, MheConfig, SolverConfig};
use mhecert_core::harness::{
    run_scenario, sample_disturbance, EstimatorKind, ScenarioConfig, SimulationLog,
};
use mhecert_core::linalg::Mat;
use mhecert_core::model::{reactor_model, Bounds, ConstraintSets, SystemModel};

fn published_certificate() -> DiossCertificate {
    DiossCertificate::quadratic(
        Mat::from_rows(&[&[1.249, 1.146], &[1.146, 1.053]]),
        Mat::scaled_identity(3, 1e4),
        Mat::from_rows(&[&[100.0]]),
        0.91,
    )
    .unwrap()
}

/// Certificate synthesized with default options over the criterion-3 grid,
/// shared across criteria (deterministic).
fn synthesized() -> &'static (DiossCertificate, f64) {
    static CELL: OnceLock<(DiossCertificate, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let model = reactor_model();
        let plan = SamplingPlan::vertices_auto(&model).unwrap();
        let grid: Vec<f64> = (80..=95).map(|k| k as f64 / 100.0).collect();
        let out = synthesize_certificate_with(
            &model,
            &plan,
            &grid,
            ObjectiveHint::MinimizeEta,
            &SynthesisOptions::default(),
        )
        .expect("reactor synthesis feasible on the grid");
        (out.certificate, out.margin)
    })
}

/// The closed-loop benchmark run shared by criterion 5 and the
/// supplementary convergence test.
fn benchmark_run() -> &'static SimulationLog {
    static CELL: OnceLock<SimulationLog> = OnceLock::new();
    CELL.get_or_init(|| {
        let model = reactor_model();
        let plan = SamplingPlan::vertices_auto(&model).unwrap();
        // benchmark-scale cap on R; see configs/synthesized_certificate.json
        let opts = SynthesisOptions {
            r_max: 100.0,
            ..SynthesisOptions::default()
        };
        let cert =
            synthesize_certificate_with(&model, &plan, &[0.91], ObjectiveHint::MinimizeEta, &opts)
                .unwrap()
                .certificate;
        let mut cfg = ScenarioConfig::new(
            &model,
            MheConfig::new(15, cert),
            vec![3.0, 1.0],
            vec![0.1, 4.5],
        );
        cfg.steps = 300;
        cfg.seed = 1;
        cfg.mhe.solver.warm_start = mhecert_core::estimate::WarmStart::PreviousShifted;
        let started = Instant::now();
        let log = run_scenario(&cfg).unwrap();
        let elapsed = started.elapsed().as_secs_f64();
        assert!(
            elapsed < 60.0,
            "closed-loop run took {elapsed:.1} s (budget 60 s)"
        );
        log
    })
}

#[test]
fn criterion_1_horizon_reproduction() {
    let cert = published_certificate();
    let started = Instant::now();
    let rows = contraction_conditions(&cert);
    let proposed = rows
        .iter()
        .find(|r| r.method == MethodTag::Proposed)
        .and_then(|r| r.min_horizon())
        .expect("proposed row has a finite horizon");
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    assert_eq!(proposed, 15, "proposed minimal horizon");
    assert!(elapsed_ms < 1.0, "took {elapsed_ms:.3} ms (budget 1 ms)");
    println!("ACCEPTANCE 1 (horizon reproduction): PASS, proposed M_min = {proposed}, {elapsed_ms:.4} ms");
}

#[test]
fn criterion_2_certificate_verification() {
    let model = reactor_model();
    let cert = published_certificate();
    let plan = SamplingPlan::vertices_auto(&model).unwrap();
    let started = Instant::now();
    let report = verify_certificate(&model, &cert, &plan, 1e-6).unwrap();
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    assert_eq!(
        report.soundness,
        Soundness::Exact,
        "affinity certifies vertex-plan soundness"
    );
    assert!(elapsed_ms < 10.0, "took {elapsed_ms:.3} ms (budget 10 ms)");
    assert!(
        report.pass && report.worst_eigenvalue <= 1e-6,
        "printed benchmark certificate fails vertex verification: worst LMI eigenvalue \
         {:.6e} > 1e-6 at x1 = {:.3} (exact-arithmetic fact: the three-decimal rounding of P \
         moves its smallest eigenvalue, ~8.2e-4, enough to break the inequality at the lower \
         vertex; the x1 = 4.5 vertex gives -2.63e-4 and passes; resynthesis at the same decay \
         rate is feasible with margin ~2.5e-5, see criterion 3)",
        report.worst_eigenvalue,
        report
            .worst_point
            .as_ref()
            .map(|p| p.0[0])
            .unwrap_or(f64::NAN),
    );
    println!(
        "ACCEPTANCE 2 (certificate verification): PASS, worst eigenvalue {:.3e}, exact, {elapsed_ms:.3} ms",
        report.worst_eigenvalue
    );
}

#[test]
fn criterion_3_certificate_synthesis() {
    let started = Instant::now();
    let (cert, margin) = synthesized();
    let model = reactor_model();
    let plan = SamplingPlan::vertices_auto(&model).unwrap();
    assert!(cert.eta() <= 0.95, "eta {}", cert.eta());
    assert!(*margin >= 0.0, "margin {margin}");
    let report = verify_certificate(&model, cert, &plan, 1e-9).unwrap();
    assert!(
        report.pass,
        "re-verification at 1e-9: worst {}",
        report.worst_eigenvalue
    );
    assert_eq!(report.soundness, Soundness::Exact);

    // rejection sampling over X × W (u is empty): no violation beyond 1e-9
    let p = cert.metric().unwrap();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..10_000u64 {
        let x = sample_disturbance(31, i, &model.sets.x).unwrap();
        let w = sample_disturbance(37, i, &model.sets.w).unwrap();
        let sample = LmiSample::at(&model, x, vec![], w).unwrap();
        let lam = lmi_matrix(&sample, p, cert.q(), cert.r(), cert.eta()).sym_eig_max();
        worst = worst.max(lam);
    }
    assert!(
        worst <= 1e-9,
        "rejection sampling found eigenvalue {worst:.3e}"
    );
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "took {elapsed:.1} s (budget 30 s)");
    println!(
        "ACCEPTANCE 3 (certificate synthesis): PASS, eta {}, margin {margin:.3e}, \
         10^4-point worst eigenvalue {worst:.3e}, {elapsed:.2} s",
        cert.eta()
    );
}

#[test]
fn criterion_4_horizon_ordering() {
    let (cert, _) = synthesized();
    let rows = contraction_conditions(cert);
    let m = |tag: MethodTag| -> u64 {
        rows.iter()
            .find(|r| r.method == tag)
            .unwrap()
            .min_horizon()
            .unwrap_or(u64::MAX)
    };
    let proposed = m(MethodTag::Proposed);
    let knuefer = m(MethodTag::KnueferMhe2021);
    let allan2019 = m(MethodTag::AllanMoving2019);
    let allan_fie = m(MethodTag::AllanFie2021);
    assert!(
        proposed < knuefer,
        "proposed {proposed} vs knuefer {knuefer}"
    );
    assert!(
        knuefer <= allan2019,
        "knuefer {knuefer} vs allan2019 {allan2019}"
    );
    assert!(
        allan2019 < allan_fie,
        "allan2019 {allan2019} vs allanFIE {allan_fie}"
    );
    assert!(
        allan_fie > 10,
        "the idealized bound never drops to 10 or below"
    );
    println!(
        "ACCEPTANCE 4 (horizon ordering): PASS, {proposed} < {knuefer} <= {allan2019} < {allan_fie}"
    );
}

#[test]
fn criterion_5_closed_loop_stability() {
    let log = benchmark_run();
    assert!(log.summary.horizon_condition_satisfied);
    assert_eq!(log.summary.certificate_verified, Some(true));
    assert_eq!(
        log.summary.max_box_violation, 0.0,
        "window solutions stayed interior"
    );
    assert_eq!(log.records.len(), 301);
    for rec in &log.records {
        if let Some(m) = rec.value_bound {
            assert!(
                !m.violated(1e-8),
                "value-function bound violated at t={}: residual {:.3e} (bound {:.3e})",
                rec.t,
                m.residual,
                m.bound
            );
        }
        if let Some(m) = rec.mstep {
            assert!(
                !m.violated(1e-8),
                "M-step decrease violated at t={}: residual {:.3e} (bound {:.3e})",
                rec.t,
                m.residual,
                m.bound
            );
        }
        let m = rec
            .envelope
            .expect("envelope monitor active (horizon condition holds)");
        assert!(
            m.residual <= 1e-9,
            "exponential envelope fails to dominate at t={}: residual {:.3e}",
            rec.t,
            m.residual
        );
    }
    let max_late = log
        .records
        .iter()
        .filter(|r| r.t >= 150)
        .map(|r| r.error_norm)
        .fold(0.0f64, f64::max);
    assert!(
        max_late <= 0.1,
        "closed-loop error exceeds 0.1 after step 150: max {:.3e}. This is not a seed \
         artifact or a solver gap: across 100 seeds the maximum ranges 0.19-0.31 (median \
         0.26), 100 random restarts of a spiking window all reach the same global minimum, \
         and the certificate choice does not move the number. The drift conserves x1+2*x2, \
         so the per-step disturbance (|w_i| <= 1e-3 through gains diag(5,2)) accumulates as \
         an undamped random walk that the output x1+x2+10*w3 pins only weakly; the \
         estimator's stationary error in that direction sits near 0.2. All stability \
         monitors hold (see the assertions above); the 0.1 figure would require roughly \
         5x smaller effective disturbances.",
        max_late
    );
    println!(
        "ACCEPTANCE 5 (closed-loop stability): PASS, max error after t=150: {max_late:.3e}, monitors clean"
    );
}

/// What the benchmark run does provably achieve: decay from the initial
/// error 4.545 into a small neighborhood, with every monitor clean. Guards
/// the qualitative convergence while criterion 5's 0.1 clause stands red.
#[test]
fn closed_loop_convergence_supplementary() {
    let log = benchmark_run();
    assert!((log.records[0].error_norm - 4.545327).abs() < 1e-5);
    let late: Vec<f64> = log
        .records
        .iter()
        .filter(|r| r.t >= 150)
        .map(|r| r.error_norm)
        .collect();
    let max_late = late.iter().fold(0.0f64, |m, v| m.max(*v));
    let mean_late: f64 = late.iter().sum::<f64>() / late.len() as f64;
    assert!(
        max_late <= 0.35,
        "late error band blew up: max {max_late:.3e}"
    );
    assert!(
        mean_late <= 0.12,
        "late error band blew up: mean {mean_late:.3e}"
    );
    assert_eq!(log.summary.solver_failures, 0);
    println!(
        "SUPPLEMENTARY (closed-loop convergence): PASS, initial 4.545, late max {max_late:.3e}, late mean {mean_late:.3e}"
    );
}

fn scalar_linear_model(a: f64, c: f64) -> SystemModel {
    let f = move |x: &[f64], _u: &[f64], w: &[f64]| vec![a * x[0] + w[0]];
    let h = move |x: &[f64], _u: &[f64], _w: &[f64]| vec![c * x[0]];
    let jf = move |_x: &[f64], _u: &[f64], _w: &[f64]| {
        (Mat::from_rows(&[&[a]]), Mat::from_rows(&[&[1.0]]))
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

/// Deterministic test-local generator (split-mix style).
fn rng_stream(seed: u64) -> impl FnMut() -> f64 {
    let mut state = seed;
    move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 * (1.0 / 9007199254740992.0)
    }
}

#[test]
fn criterion_6_solver_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = rng_stream(12345);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = -1.5 + 3.0 * rng();
        let c = 0.5 + 1.5 * rng();
        let p2 = 0.1 + 9.9 * rng();
        let q = 0.1 + 9.9 * rng();
        let r = 0.1 + 9.9 * rng();
        let eta = 0.5 + 0.49 * rng();
        let prior = -1.0 + 2.0 * rng();
        let y0 = -2.0 + 4.0 * rng();
        let y1 = -2.0 + 4.0 * rng();

        let model = scalar_linear_model(a, c);
        let cert = DiossCertificate::quadratic(
            Mat::from_rows(&[&[p2]]),
            Mat::from_rows(&[&[q]]),
            Mat::from_rows(&[&[r]]),
            eta,
        )
        .unwrap();
        let cfg = MheConfig {
            horizon: 2,
            cert,
            solver: SolverConfig::default(),
        };
        let inputs = vec![vec![]; 2];
        let outputs = vec![vec![y0], vec![y1]];
        let window = EstimationWindow {
            inputs: &inputs,
            outputs: &outputs,
        };
        let res = solve_mhe(&model, &cfg, &[prior], &window, None, None).unwrap();
        assert!(res.converged);

        // independent oracle: stack the weighted residual rows in
        // z = (x0, w0, w1) and solve the normal equations by elimination
        //   sqrt(2 eta^2 p2) (x0 - prior)
        //   sqrt(2 eta q) w0 ;  sqrt(eta r) (c x0 - y0)
        //   sqrt(2 q) w1    ;  sqrt(r) (c (a x0 + w0) - y1)
        let rows: [(f64, [f64; 3], f64); 5] = [
            (2.0 * eta * eta * p2, [1.0, 0.0, 0.0], prior),
            (2.0 * eta * q, [0.0, 1.0, 0.0], 0.0),
            (eta * r, [c, 0.0, 0.0], y0),
            (2.0 * q, [0.0, 0.0, 1.0], 0.0),
            (r, [c * a, c, 0.0], y1),
        ];
        let mut ata = [[0.0f64; 3]; 3];
        let mut atb = [0.0f64; 3];
        for (wgt, row, rhs) in rows {
            for i in 0..3 {
                atb[i] += wgt * row[i] * rhs;
                for j in 0..3 {
                    ata[i][j] += wgt * row[i] * row[j];
                }
            }
        }
        let mut m = ata;
        let mut b = atb;
        for col in 0..3 {
            let piv = (col..3)
                .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
                .unwrap();
            m.swap(col, piv);
            b.swap(col, piv);
            for rr in (col + 1)..3 {
                let f = m[rr][col] / m[col][col];
                for cc in col..3 {
                    m[rr][cc] -= f * m[col][cc];
                }
                b[rr] -= f * b[col];
            }
        }
        let mut sol = [0.0f64; 3];
        for i in (0..3).rev() {
            let mut s = b[i];
            for j in (i + 1)..3 {
                s -= m[i][j] * sol[j];
            }
            sol[i] = s / m[i][i];
        }
        worst = worst
            .max((res.x_init[0] - sol[0]).abs())
            .max((res.w_seq[0][0] - sol[1]).abs())
            .max((res.w_seq[1][0] - sol[2]).abs());
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        worst <= 1e-8,
        "worst deviation from closed form: {worst:.3e}"
    );
    assert!(elapsed < 1.0, "took {elapsed:.2} s (budget 1 s)");
    println!(
        "ACCEPTANCE 6 (solver oracle equivalence): PASS, 100 instances, worst deviation {worst:.3e}, {elapsed:.3} s"
    );
}

/// Test-local determinant by Gaussian elimination (no pivot-free shortcuts;
/// independent of the library's factorizations).
fn det_local(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())
            .unwrap();
        if a[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            a.swap(piv, c);
            det = -det;
        }
        det *= a[c][c];
        for r in (c + 1)..n {
            let f = a[r][c] / a[c][c];
            for cc in c..n {
                let v = f * a[c][cc];
                a[r][cc] -= v;
            }
        }
    }
    det
}

/// `A − λB ≺ 0` via Sylvester's criterion on leading principal minors:
/// `(−1)^k · minor_k > 0` for all `k`. Monotone in `λ` for PD `B`.
fn neg_definite_by_minors(a: &[Vec<f64>], b: &[Vec<f64>], lam: f64) -> bool {
    let n = a.len();
    for k in 1..=n {
        let sub: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| a[i][j] - lam * b[i][j]).collect())
            .collect();
        let minor = det_local(&sub);
        let signed = if k % 2 == 1 { -minor } else { minor };
        if signed <= 0.0 {
            return false;
        }
    }
    true
}

#[test]
fn criterion_7_generalized_eigmax_oracle() {
    let started = Instant::now();
    let mut rng = rng_stream(777);
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let n = 1 + trial % 6;
        let rand_pd = |rng: &mut dyn FnMut() -> f64| -> (Mat, Vec<Vec<f64>>) {
            let mut g = Mat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] = -1.0 + 2.0 * rng();
                }
            }
            let mut m = g.tr_mul(&g);
            for i in 0..n {
                m[(i, i)] += 0.1;
            }
            let rows: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
            (m, rows)
        };
        let (a_mat, a_rows) = rand_pd(&mut rng);
        let (b_mat, b_rows) = rand_pd(&mut rng);
        let lib = generalized_eigmax(&a_mat, &b_mat).unwrap();

        // determinant-sign bisection: double an upper bound until A − λB is
        // negative definite, then bisect on that monotone predicate
        let mut hi = 1.0;
        while !neg_definite_by_minors(&a_rows, &b_rows, hi) {
            hi *= 2.0;
            assert!(hi < 1e300);
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if neg_definite_by_minors(&a_rows, &b_rows, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        worst = worst.max((lib - oracle).abs() / (1.0 + oracle.abs()));
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(worst <= 1e-6, "worst relative deviation {worst:.3e}");
    assert!(elapsed < 5.0, "took {elapsed:.2} s (budget 5 s)");
    println!(
        "ACCEPTANCE 7 (generalized eigenvalue oracle): PASS, 1000 pairs, worst deviation {worst:.3e}, {elapsed:.2} s"
    );
}

#[test]
fn criterion_8_fie_property_suite() {
    let started = Instant::now();
    let (cert, _) = synthesized();
    let model = reactor_model();
    let mut cfg = ScenarioConfig::new(
        &model,
        MheConfig::new(30, cert.clone()),
        vec![3.0, 1.0],
        vec![0.1, 4.5],
    );
    cfg.estimator = EstimatorKind::Fie;
    cfg.steps = 30;
    cfg.seed = 5;
    let log = run_scenario(&cfg).unwrap();
    let mut checked = 0;
    for rec in &log.records {
        if let Some(m) = rec.fie_wdelta {
            assert!(
                !m.violated(1e-8),
                "W-decay bound violated at t={}: residual {:.3e}",
                rec.t,
                m.residual
            );
            checked += 1;
        }
        if let Some(m) = rec.fie_error {
            assert!(
                !m.violated(1e-8),
                "error envelope violated at t={}: residual {:.3e}",
                rec.t,
                m.residual
            );
        }
    }
    assert_eq!(checked, 31, "both bounds evaluated at every step");
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "took {elapsed:.1} s (budget 30 s)");
    println!(
        "ACCEPTANCE 8 (full-information property suite): PASS, 31 steps, both bounds hold, {elapsed:.2} s"
    );
}

#[test]
fn criterion_9_degenerate_horizon_logic() {
    assert_eq!(
        min_horizon(4.0, 0.5).unwrap(),
        3,
        "4·0.5² = 1 is not < 1: strictness forces 3"
    );
    assert_eq!(min_horizon(0.5, 0.5).unwrap(), 0);
    println!("ACCEPTANCE 9 (degenerate horizon logic): PASS, (4, 0.5) -> 3, (0.5, 0.5) -> 0");
}
