//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured quantities. Criteria 3-7 share two benchmark runs
//! (60 s and 300 s at h = 1e-4) that are executed once per process.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

#![allow(clippy::needless_range_loop)]

use std::sync::OnceLock;
use std::time::Instant;

use exo_observer::canonical::{self, symbolic};
use exo_observer::filters::design_beta;
use exo_observer::mathkit::Matrix;
use exo_observer::observer::{adapt_step, EstimateSet, Gains};
use exo_observer::plant::{benchmark_model, ExoModel, ThetaParams};
use exo_observer::sim::{benchmark_params, Engine, RunResult, Sample};
use exo_observer::verify::DetRng;

struct TimedRun {
    result: RunResult,
    wall_seconds: f64,
}

fn run60() -> &'static TimedRun {
    static RUN: OnceLock<TimedRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let mut p = benchmark_params();
        p.t_end = 60.0;
        let started = Instant::now();
        let result = Engine::new(p).unwrap().run().unwrap();
        TimedRun {
            result,
            wall_seconds: started.elapsed().as_secs_f64(),
        }
    })
}

fn run300() -> &'static TimedRun {
    static RUN: OnceLock<TimedRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let started = Instant::now();
        let result = Engine::new(benchmark_params()).unwrap().run().unwrap();
        TimedRun {
            result,
            wall_seconds: started.elapsed().as_secs_f64(),
        }
    })
}

fn report(criterion: &str, passed: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} -- {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
}

fn max_metric<F: Fn(&Sample) -> f64>(result: &RunResult, lo: f64, hi: f64, f: F) -> f64 {
    result.window(lo, hi).map(f).fold(0.0, f64::max)
}

#[test]
fn criterion_1_beta_design_reproduction() {
    let exo = ExoModel {
        a_delta: Matrix::from_row_slice(2, 2, &[0.0, 1.0, -10.0, 0.0]),
        h_delta: vec![1.0, 0.0],
        x_delta0: vec![500.0, 100.0],
    };
    let g = Matrix::from_row_slice(2, 2, &[-4.0, 1.0, -2.0, 0.0]);
    let l = [1.0, 2.0];

    let beta = design_beta(&exo, &g, &l).unwrap();
    let started = Instant::now();
    let reps = 100;
    for _ in 0..reps {
        std::hint::black_box(design_beta(&exo, &g, &l).unwrap());
    }
    let per_call = started.elapsed().as_secs_f64() / reps as f64;

    let err = (beta[0] - 20.0).abs().max((beta[1] + 8.0).abs());
    let passed = err <= 1e-10 && per_call < 1e-3;
    report(
        "1 (beta design)",
        passed,
        &format!(
            "beta = ({}, {}), abs error {err:.2e}, {:.1} us/call",
            beta[0],
            beta[1],
            per_call * 1e6
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_2_canonical_oracle() {
    let started = Instant::now();
    let dec = canonical::decompose(&benchmark_model(&ThetaParams(vec![1.0, 1.0, -1.0]))).unwrap();
    let t_inv = Matrix::from_row_slice(3, 3, &[2.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
    let t_fwd = Matrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 2.0]);
    let mut frozen_err = dec
        .t_inv
        .sub(&t_inv)
        .max_abs()
        .max(dec.t_fwd.sub(&t_fwd).max_abs());
    for (got, want) in [
        (&dec.psi_a, [0.0, -1.0, 0.0]),
        (&dec.psi_b, [-1.0, 0.0, -2.0]),
        (&dec.psi_d, [0.0, 0.0, -1.0]),
    ] {
        for (a, b) in got.iter().zip(want) {
            frozen_err = frozen_err.max((a - b).abs());
        }
    }

    let mut rng = DetRng::new(2024);
    let mut identity_err = 0.0f64;
    for _ in 0..100 {
        let th = rng.theta();
        let model = benchmark_model(&ThetaParams(th.to_vec()));
        let dec = canonical::decompose(&model).unwrap();
        // (i) T T_I = I
        identity_err = identity_err.max(
            dec.t_fwd
                .mul(&dec.t_inv)
                .sub(&Matrix::identity(3))
                .max_abs(),
        );
        // (ii) C^T T_I = C0^T
        for j in 0..3 {
            let c_ti: f64 = (0..3).map(|i| model.c[i] * dec.t_inv[(i, j)]).sum();
            identity_err = identity_err.max((c_ti - if j == 0 { 1.0 } else { 0.0 }).abs());
        }
        // (iii) T A T_I = A0 + psi_a C0^T
        let comp = dec.t_fwd.mul(&model.a).mul(&dec.t_inv);
        let mut expect = dec.a0.clone();
        for i in 0..3 {
            expect[(i, 0)] += dec.psi_a[i];
        }
        identity_err = identity_err.max(comp.sub(&expect).max_abs());
        // (iv) psi_b = T B and (v) psi_d = T D
        for (got, src) in [(&dec.psi_b, &model.b), (&dec.psi_d, &model.d)] {
            for (a, b) in got.iter().zip(dec.t_fwd.mul_vec(src)) {
                identity_err = identity_err.max((a - b).abs());
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let passed = frozen_err <= 1e-12 && identity_err <= 1e-9 && elapsed < 1.0;
    report(
        "2 (canonical oracle)",
        passed,
        &format!(
            "frozen-value error {frozen_err:.2e}, identity error {identity_err:.2e}, {elapsed:.2} s"
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_3_filter_regression_contract() {
    let run = run60();
    let dec = canonical::decompose(&benchmark_model(&ThetaParams(vec![1.0, 1.0, -1.0]))).unwrap();
    let eta_norm: f64 = dec.eta().iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut worst_q = 0.0f64; // ratio of residual to bound
    let mut worst_xi = 0.0f64;
    for s in run.result.window(20.0, 60.0) {
        let tr = s.truth.as_ref().unwrap();
        if s.t >= 30.0 {
            worst_q = worst_q.max(tr.q_residual / (1e-4 * tr.phi_norm * eta_norm));
        }
        worst_xi = worst_xi.max(tr.xi_residual / (1e-4 * tr.xi_norm));
    }
    let passed = worst_q <= 1.0 && worst_xi <= 1.0 && run.wall_seconds < 120.0;
    report(
        "3 (filter regression contract)",
        passed,
        &format!(
            "q-residual at {:.3}x bound, xi-residual at {:.3}x bound, run took {:.0} s",
            worst_q, worst_xi, run.wall_seconds
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_4_cascade_pair_contracts() {
    // static identity suites at 1e-9 relative
    let mut rng = DetRng::new(77);
    let mut static_err = 0.0f64;
    for _ in 0..100 {
        let th = rng.theta();
        let delta = rng.range(0.2, 2.0);
        let m: Vec<f64> = symbolic::psi_ab(&th).iter().map(|v| v * delta).collect();
        let pair = exo_observer::hetero::theta_regression(&m, delta);
        let scale = pair.y.norm_fro().max(1e-30);
        for i in 0..3 {
            static_err = static_err.max((pair.y_vec()[i] - pair.m * th[i]).abs() / scale);
        }
        let m_theta = rng.range(0.5, 2.0);
        let n: Vec<f64> = th.iter().map(|v| v * m_theta).collect();
        let pd = exo_observer::hetero::psi_d_regression(&n, m_theta);
        let truth = symbolic::psi_d(&th);
        let scale = pd.y.norm_fro().max(1e-30);
        for i in 0..3 {
            static_err = static_err.max((pd.y_vec()[i] - pd.m * truth[i]).abs() / scale);
        }
        let ti = exo_observer::hetero::t_i_regression(&n, m_theta);
        static_err =
            static_err.max(ti.y.sub(&symbolic::t_i(&th).scale(ti.m)).norm_fro() / ti.y.norm_fro());
    }

    // dynamic contracts on the shared 60 s run
    let run = run60();
    let mut worst = [
        ("theta", 0.0f64),
        ("psi_d", 0.0),
        ("t_i", 0.0),
        ("kappa", 0.0),
        ("x_delta0", 0.0),
    ];
    for s in run.result.window(30.0, 60.0) {
        let tr = s.truth.as_ref().unwrap();
        for (slot, rel) in worst.iter_mut().zip([
            tr.theta_rel,
            tr.psi_d_rel,
            tr.t_i_rel,
            tr.kappa_rel,
            tr.x_delta0_rel,
        ]) {
            slot.1 = slot.1.max(rel);
        }
    }
    let dynamic_ok = worst.iter().all(|(_, rel)| *rel <= 1e-3);
    let passed = static_err <= 1e-9 && dynamic_ok;
    let detail = worst
        .iter()
        .map(|(name, rel)| format!("{name} {rel:.2e}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(
        "4 (cascade pair contracts)",
        passed,
        &format!("static suites {static_err:.2e} (<= 1e-9), pair residuals vs 1e-3: {detail}"),
    );
    assert!(passed, "see the printed residuals; the collection-start residual of the published experiment exceeds the stated tolerance");
}

#[test]
fn criterion_5_drem_positivity() {
    let run = run60();
    let t_e = run.result.t_e;
    let fired_in_time = matches!(t_e, Some(t) if t < 30.0);
    let mut floor_ok = true;
    let mut delta_at_te = None;
    if let Some(t_e) = t_e {
        for s in run.result.window(t_e, 60.0) {
            let d = delta_at_te.get_or_insert(s.pair_mags.eta);
            if s.pair_mags.eta < 0.5 * *d {
                floor_ok = false;
            }
        }
    }
    let passed = fired_in_time && floor_ok;
    report(
        "5 (excitation positivity)",
        passed,
        &format!(
            "t_e = {:?}, |Delta(t_e)| = {:.3}, floor held: {floor_ok}",
            t_e,
            delta_at_te.unwrap_or(0.0)
        ),
    );
    assert!(passed);
}

/// Slope of the tightest linear upper envelope of `log err` over the
/// adaptation phase: anchored at the pre-adaptation peak (the worst error in
/// the `[25, 30]` collection window), the returned `b` is the smallest value
/// with `err(t) <= err_peak * exp(b (t - t_peak))` for every sample at least
/// ten seconds past the peak. A slope below `-lambda` certifies exponential
/// convergence at rate `lambda` over the whole phase.
fn envelope_slope(samples: &[(f64, f64)]) -> f64 {
    let (t_peak, e_peak) = samples
        .iter()
        .filter(|(t, _)| *t >= 25.0 && *t <= 30.0)
        .fold(
            (25.0, 0.0f64),
            |acc, (t, e)| if *e > acc.1 { (*t, *e) } else { acc },
        );
    let l0 = e_peak.max(1e-300).ln();
    samples
        .iter()
        .filter(|(t, _)| *t >= t_peak + 10.0)
        .map(|(t, e)| (e.max(1e-300).ln() - l0) / (t - t_peak))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn criterion_6_full_run_convergence() {
    let run = run300();
    let result = &run.result;
    result.t_e.expect("excitation fires on the benchmark");

    let metric = |s: &Sample, i: usize| {
        let m = s.truth.as_ref().unwrap().metrics;
        [
            m.x_err,
            m.delta_err,
            m.kappa_err,
            m.xdelta0_err,
            m.t_i_err,
            m.u_err,
        ][i]
    };
    let names = ["x", "delta", "kappa", "x_delta0", "t_i", "u"];

    let last = result.last();
    let mut ratio_details = Vec::new();
    let mut ratios_ok = true;
    for i in 0..6 {
        let peak = max_metric(result, 25.0, 30.0, |s| metric(s, i));
        let ratio = metric(last, i) / peak.max(1e-300);
        if ratio > 1e-2 {
            ratios_ok = false;
        }
        ratio_details.push(format!("{} {ratio:.1e}", names[i]));
    }

    // parametric errors: fitted linear envelope of the log decay
    let mut slope_details = Vec::new();
    let mut slopes_ok = true;
    for (name, idx) in [("kappa", 2), ("x_delta0", 3), ("t_i", 4), ("u", 5)] {
        let series: Vec<(f64, f64)> = result
            .samples
            .iter()
            .map(|s| (s.t, metric(s, idx)))
            .collect();
        let slope = envelope_slope(&series);
        if slope >= -0.01 {
            slopes_ok = false;
        }
        slope_details.push(format!("{name} {slope:.4}"));
    }

    let passed = ratios_ok && slopes_ok && run.wall_seconds < 600.0;
    report(
        "6 (full-run convergence)",
        passed,
        &format!(
            "error ratios vs 1e-2: [{}]; envelope slopes vs -0.01: [{}]; run took {:.0} s",
            ratio_details.join(", "),
            slope_details.join(", "),
            run.wall_seconds
        ),
    );
    assert!(passed, "see the printed ratios; the identification floor of the published experiment sits near 1e-2 of the initial errors");
}

#[test]
fn criterion_7_no_peaking() {
    let run = run300();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let max_xhat = max_metric(&run.result, 25.0, 300.0, |s| norm(&s.x_hat));
    let max_x = max_metric(&run.result, 25.0, 300.0, |s| norm(&s.x));
    let passed = max_xhat <= 10.0 * max_x;
    report(
        "7 (no peaking)",
        passed,
        &format!(
            "max ||x_hat|| = {max_xhat:.1}, max ||x|| = {max_x:.1}, ratio {:.2}",
            max_xhat / max_x
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_8_scalar_adaptation_exactness() {
    // frozen pair with gamma M^2 = 1; contraction over 5 time units vs e^-5
    let truth = 3.0;
    let m = 0.4;
    let gamma = 1.0 / (m * m);
    let gains = Gains::new(gamma, gamma, gamma);
    let kp = exo_observer::drem::ComponentPair {
        label: "kappa",
        y: vec![m * truth; 9],
        m: vec![m; 9],
    };
    let tp = exo_observer::drem::RegressionPair {
        label: "t_i",
        y: Matrix::zeros(3, 3),
        m: 0.0,
    };
    let xp = exo_observer::drem::RegressionPair::from_vec("x_delta0", vec![0.0, 0.0], 0.0);
    let mut est = EstimateSet::zeros(3, 2);
    let h = 1e-4;
    for i in 0..(5.0 / h) as usize {
        est = adapt_step(&est, &kp, &tp, &xp, &gains, i as f64 * h, h).unwrap();
    }
    let contraction = (est.kappa_hat[0] - truth).abs() / truth;
    let expect = (-5.0f64).exp();
    let rel = (contraction - expect).abs() / expect;
    let passed = rel <= 0.01;
    report(
        "8 (scalar adaptation exactness)",
        passed,
        &format!("contraction {contraction:.6e} vs e^-5 = {expect:.6e} ({rel:.2e} relative)"),
    );
    assert!(passed);
}
