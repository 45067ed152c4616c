//! Invariant check suites shared by the `verify` command and the test
//! harness: algebraic identities at random parameters, solver residuals, and
//! (at the full level) truth-referenced simulation contracts.

use std::fmt::Write as _;

use crate::canonical::{self, symbolic};
use crate::drem;
use crate::filters;
use crate::hetero::{self, HeteroMapSet};
use crate::mathkit::{self, Matrix, OdeSystem};
use crate::plant::{benchmark_model, ThetaParams};
use crate::sim::{benchmark_params, Engine};

/// Small deterministic generator (splitmix64) for the randomized suites.
#[derive(Debug, Clone)]
pub struct DetRng(u64);

impl DetRng {
    pub fn new(seed: u64) -> Self {
        Self(
            seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(0x1234_5678_9ABC_DEF0),
        )
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Admissible benchmark parameter draw.
    pub fn theta(&mut self) -> [f64; 3] {
        [
            self.range(0.5, 2.0),
            self.range(0.5, 2.0),
            self.range(-2.0, -0.5),
        ]
    }
}

/// Result of one named check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Empty on success; the first counterexample on failure.
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: &'static str) -> Self {
        Self {
            name,
            passed: true,
            detail: String::new(),
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: false,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLevel {
    Quick,
    Full,
}

/// Run the invariant suites. `Quick` covers the algebraic identities;
/// `Full` adds two truth-mode simulations.
pub fn run_checks(level: VerifyLevel) -> Vec<CheckOutcome> {
    let mut out = vec![
        check_laplace_identity(),
        check_sylvester_residuals(),
        check_rk4_order(),
        check_canonical_frozen_values(),
        check_canonical_identities(),
        check_selectors(),
        check_identifiability(),
        check_beta_design(),
        check_theta_identity_with(&hetero::BenchmarkMaps),
        check_psi_d_identity(),
        check_t_i_identity(),
        check_kappa_identity(),
        check_degree_scaling(),
        check_mix_contract(),
        check_normalize_properties(),
        check_adaptation_flow(),
    ];
    if level == VerifyLevel::Full {
        out.push(check_truth_run_contracts());
        out.push(check_zero_disturbance_run());
    }
    out
}

fn check_laplace_identity() -> CheckOutcome {
    const NAME: &str = "mathkit_laplace_identity";
    let mut rng = DetRng::new(101);
    for trial in 0..100 {
        let n = 3 + trial % 4; // 3..6
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = rng.range(-2.0, 2.0);
            }
        }
        if trial % 10 == 0 {
            // force singularity: duplicate a row
            let r0: Vec<f64> = m.row(0).to_vec();
            for j in 0..n {
                m[(n - 1, j)] = r0[j];
            }
        }
        let lhs = mathkit::adjugate(&m).mul(&m);
        let rhs = Matrix::identity(n).scale(mathkit::det(&m));
        let err = lhs.sub(&rhs).norm_fro();
        let bound = 1e-10 * m.norm_fro().powi(n as i32);
        if err > bound {
            return CheckOutcome::fail(
                NAME,
                format!("trial {trial}: ||adj(M)M - det(M)I|| = {err:e} > {bound:e}, M = {m:?}"),
            );
        }
    }
    CheckOutcome::pass(NAME)
}

fn check_sylvester_residuals() -> CheckOutcome {
    const NAME: &str = "mathkit_sylvester_residual";
    let mut rng = DetRng::new(103);
    for trial in 0..50 {
        let n = 2 + trial % 3;
        let mut a = Matrix::zeros(n, n);
        let mut g = Matrix::zeros(n, n);
        let mut q = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = rng.range(-1.0, 1.0);
                g[(i, j)] = rng.range(-1.0, 1.0);
                q[(i, j)] = rng.range(-1.0, 1.0);
            }
            a[(i, i)] -= 5.0; // spectra split around -5 and +5
            g[(i, i)] += 5.0;
        }
        match mathkit::solve_sylvester(&a, &g, &q) {
            Ok(m) => {
                let res = m.mul(&a).sub(&g.mul(&m)).sub(&q).norm_fro();
                let bound = 1e-10 * q.norm_fro();
                if res > bound {
                    return CheckOutcome::fail(
                        NAME,
                        format!("trial {trial}: residual {res:e} > {bound:e}"),
                    );
                }
            }
            Err(e) => return CheckOutcome::fail(NAME, format!("trial {trial}: {e}")),
        }
    }
    // frozen benchmark solution
    let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -10.0, 0.0]);
    let g = Matrix::from_row_slice(2, 2, &[-4.0, 1.0, -2.0, 0.0]);
    let q = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 2.0]);
    let m = match mathkit::solve_sylvester(&a, &g, &q) {
        Ok(m) => m,
        Err(e) => return CheckOutcome::fail(NAME, format!("benchmark solve: {e}")),
    };
    let expect = Matrix::from_row_slice(2, 2, &[5.0 / 7.0, 3.0 / 28.0, 25.0 / 14.0, 1.0 / 7.0]);
    if m.sub(&expect).max_abs() > 1e-12 {
        return CheckOutcome::fail(NAME, format!("benchmark M_delta mismatch: {m:?}"));
    }
    CheckOutcome::pass(NAME)
}

fn check_rk4_order() -> CheckOutcome {
    const NAME: &str = "mathkit_rk4_order";
    let sys = OdeSystem {
        dim: 1,
        rhs: &|_t, x: &[f64], dx: &mut [f64]| dx[0] = x[0],
    };
    let err_at = |h: f64| -> f64 {
        let mut x = vec![1.0];
        let mut t = 0.0;
        let steps = (1.0 / h).round() as usize;
        for _ in 0..steps {
            x = mathkit::rk4_step(&sys, t, &x, h).expect("finite");
            t += h;
        }
        (x[0] - 1.0f64.exp()).abs()
    };
    let ratio = err_at(0.02) / err_at(0.01);
    if ratio < 15.0 {
        return CheckOutcome::fail(NAME, format!("error ratio {ratio} < 15"));
    }
    CheckOutcome::pass(NAME)
}

fn check_canonical_frozen_values() -> CheckOutcome {
    const NAME: &str = "canonical_frozen_values";
    let dec = match canonical::decompose(&benchmark_model(&ThetaParams(vec![1.0, 1.0, -1.0]))) {
        Ok(d) => d,
        Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
    };
    let t_inv = Matrix::from_row_slice(3, 3, &[2.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
    let t_fwd = Matrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 2.0]);
    let checks = [
        ("T_I", dec.t_inv.sub(&t_inv).max_abs()),
        ("T", dec.t_fwd.sub(&t_fwd).max_abs()),
        (
            "psi",
            dec.psi_a
                .iter()
                .zip([0.0, -1.0, 0.0])
                .chain(dec.psi_b.iter().zip([-1.0, 0.0, -2.0]))
                .chain(dec.psi_d.iter().zip([0.0, 0.0, -1.0]))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max),
        ),
    ];
    for (what, err) in checks {
        if err > 1e-12 {
            return CheckOutcome::fail(NAME, format!("{what} off by {err:e}"));
        }
    }
    CheckOutcome::pass(NAME)
}

fn check_canonical_identities() -> CheckOutcome {
    const NAME: &str = "canonical_identities";
    let mut rng = DetRng::new(107);
    for trial in 0..100 {
        let th = rng.theta();
        let model = benchmark_model(&ThetaParams(th.to_vec()));
        let dec = match canonical::decompose(&model) {
            Ok(d) => d,
            Err(e) => return CheckOutcome::fail(NAME, format!("theta {th:?}: {e}")),
        };
        let mut worst = 0.0f64;
        worst = worst.max(
            dec.t_fwd
                .mul(&dec.t_inv)
                .sub(&Matrix::identity(3))
                .max_abs(),
        );
        let comp = dec.t_fwd.mul(&model.a).mul(&dec.t_inv);
        let mut expect = dec.a0.clone();
        for i in 0..3 {
            expect[(i, 0)] += dec.psi_a[i];
        }
        worst = worst.max(comp.sub(&expect).max_abs());
        for (n_vec, s_vec) in [
            (&dec.psi_a, symbolic::psi_a(&th)),
            (&dec.psi_b, symbolic::psi_b(&th)),
            (&dec.psi_d, symbolic::psi_d(&th)),
        ] {
            for (a, b) in n_vec.iter().zip(&s_vec) {
                worst = worst.max((a - b).abs());
            }
        }
        worst = worst.max(dec.t_inv.sub(&symbolic::t_i(&th)).max_abs());
        if worst > 1e-9 {
            return CheckOutcome::fail(
                NAME,
                format!("trial {trial} theta {th:?}: worst identity residual {worst:e}"),
            );
        }
    }
    CheckOutcome::pass(NAME)
}

fn check_selectors() -> CheckOutcome {
    const NAME: &str = "canonical_selectors";
    let mut rng = DetRng::new(109);
    for _ in 0..50 {
        let th = rng.theta();
        let dec = canonical::decompose(&benchmark_model(&ThetaParams(th.to_vec()))).unwrap();
        let p = canonical::psi_ab_from_eta(&dec.eta());
        let ea = canonical::embed_a(&p);
        let eb = canonical::embed_b(&p);
        for ((a, b), (c, d)) in ea.iter().zip(&dec.psi_a).zip(eb.iter().zip(&dec.psi_b)) {
            if (a - b).abs() > 1e-10 || (c - d).abs() > 1e-10 {
                return CheckOutcome::fail(NAME, format!("selector mismatch at theta {th:?}"));
            }
        }
    }
    CheckOutcome::pass(NAME)
}

fn check_identifiability() -> CheckOutcome {
    const NAME: &str = "canonical_identifiability";
    let v = canonical::identifiability_check(&ThetaParams(vec![1.0, 1.0, -1.0]));
    if (v - 1.0).abs() > 1e-4 {
        return CheckOutcome::fail(NAME, format!("det^2 at the benchmark theta: {v}"));
    }
    let mut rng = DetRng::new(113);
    for _ in 0..20 {
        let th = rng.theta();
        let v = canonical::identifiability_check(&ThetaParams(th.to_vec()));
        let d = mathkit::det(&symbolic::jacobian_psi_ab(&th));
        if (v - d * d).abs() > 1e-4 * (d * d).max(1.0) {
            return CheckOutcome::fail(
                NAME,
                format!("theta {th:?}: finite differences {v} vs analytic {}", d * d),
            );
        }
    }
    CheckOutcome::pass(NAME)
}

fn check_beta_design() -> CheckOutcome {
    const NAME: &str = "filters_beta_design";
    let exo = crate::plant::ExoModel {
        a_delta: Matrix::from_row_slice(2, 2, &[0.0, 1.0, -10.0, 0.0]),
        h_delta: vec![1.0, 0.0],
        x_delta0: vec![500.0, 100.0],
    };
    let g = Matrix::from_row_slice(2, 2, &[-4.0, 1.0, -2.0, 0.0]);
    match filters::design_beta(&exo, &g, &[1.0, 2.0]) {
        Ok(beta) => {
            if (beta[0] - 20.0).abs() > 1e-10 || (beta[1] + 8.0).abs() > 1e-10 {
                return CheckOutcome::fail(NAME, format!("beta = {beta:?}, expected (20, -8)"));
            }
        }
        Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
    }
    CheckOutcome::pass(NAME)
}

/// Brute-force identity of the theta regression against the symbolic truth,
/// with pluggable mappings so tampering is observable.
pub fn check_theta_identity_with(maps: &dyn HeteroMapSet) -> CheckOutcome {
    const NAME: &str = "hetero_theta_regression";
    let mut rng = DetRng::new(127);
    for trial in 0..100 {
        let th = rng.theta();
        let delta = rng.range(0.2, 2.0);
        let m: Vec<f64> = symbolic::psi_ab(&th).iter().map(|v| v * delta).collect();
        let pair = hetero::theta_regression_with(maps, &m, delta);
        let scale = pair.y.norm_fro().max(1e-30);
        for i in 0..3 {
            let err = (pair.y_vec()[i] - pair.m * th[i]).abs();
            if err > 1e-9 * scale {
                let mut detail = String::new();
                let _ = write!(
                    detail,
                    "theta_regression contract violated at trial {trial}: theta = {th:?}, \
                     Delta = {delta}, component {i}: |Y_i - M theta_i| = {err:e}"
                );
                return CheckOutcome::fail(NAME, detail);
            }
        }
    }
    CheckOutcome::pass(NAME)
}

fn check_psi_d_identity() -> CheckOutcome {
    const NAME: &str = "hetero_psi_d_regression";
    let mut rng = DetRng::new(131);
    for trial in 0..100 {
        let th = rng.theta();
        let m_theta = rng.range(0.5, 2.0);
        let n: Vec<f64> = th.iter().map(|v| v * m_theta).collect();
        let pair = hetero::psi_d_regression(&n, m_theta);
        let truth = symbolic::psi_d(&th);
        let scale = pair.y.norm_fro().max(1e-30);
        for i in 0..3 {
            let err = (pair.y_vec()[i] - pair.m * truth[i]).abs();
            if err > 1e-9 * scale {
                return CheckOutcome::fail(NAME, format!("trial {trial} theta {th:?}: {err:e}"));
            }
        }
    }
    CheckOutcome::pass(NAME)
}

fn check_t_i_identity() -> CheckOutcome {
    const NAME: &str = "hetero_t_i_regression";
    let mut rng = DetRng::new(137);
    for trial in 0..100 {
        let th = rng.theta();
        let m_theta = rng.range(0.5, 2.0);
        let n: Vec<f64> = th.iter().map(|v| v * m_theta).collect();
        let pair = hetero::t_i_regression(&n, m_theta);
        let truth = symbolic::t_i(&th);
        let err = pair.y.sub(&truth.scale(pair.m)).norm_fro();
        if err > 1e-9 * pair.y.norm_fro().max(1e-30) {
            return CheckOutcome::fail(NAME, format!("trial {trial} theta {th:?}: {err:e}"));
        }
        // printed composition must agree in ratio
        let printed = hetero::t_i_regression_printed(&n, m_theta);
        let drift = pair
            .y
            .scale(1.0 / pair.m)
            .sub(&printed.y.scale(1.0 / printed.m))
            .max_abs();
        if drift > 1e-9 {
            return CheckOutcome::fail(NAME, format!("printed/reduced drift {drift:e}"));
        }
    }
    CheckOutcome::pass(NAME)
}

fn check_kappa_identity() -> CheckOutcome {
    const NAME: &str = "hetero_kappa_regression";
    let mut rng = DetRng::new(139);
    for trial in 0..100 {
        let th = rng.theta();
        let delta = rng.range(0.2, 2.0);
        let kappa = symbolic::kappa(&th);
        let y_eta: Vec<f64> = symbolic::eta(&th).iter().map(|v| v * delta).collect();
        let m_psi_d = rng.range(0.5, 2.0);
        let y_psi_d: Vec<f64> = symbolic::psi_d(&th).iter().map(|v| v * m_psi_d).collect();
        for reduced in [true, false] {
            let pair = hetero::kappa_regression(&y_eta, delta, &y_psi_d, m_psi_d, reduced);
            for i in 0..9 {
                let err = (pair.y[i] - pair.m[i] * kappa[i]).abs();
                let scale = pair.y[i].abs().max(pair.m[i].abs()).max(1e-30);
                if err > 1e-9 * scale {
                    return CheckOutcome::fail(
                        NAME,
                        format!("trial {trial} reduced={reduced} component {i}: {err:e}"),
                    );
                }
            }
        }
    }
    CheckOutcome::pass(NAME)
}

fn check_degree_scaling() -> CheckOutcome {
    const NAME: &str = "hetero_degree_scaling";
    let mut rng = DetRng::new(149);
    for trial in 0..50 {
        let th = rng.theta();
        let delta = rng.range(0.3, 1.5);
        let c = rng.range(1.1, 2.5);
        let m: Vec<f64> = symbolic::psi_ab(&th).iter().map(|v| v * delta).collect();
        let base = hetero::theta_regression(&m, delta);
        let m_scaled: Vec<f64> = m.iter().map(|v| v * c).collect();
        let scaled = hetero::theta_regression(&m_scaled, delta * c);
        let factor = c.powi(7);
        if (scaled.m - base.m * factor).abs() > 1e-9 * scaled.m.abs() {
            return CheckOutcome::fail(
                NAME,
                format!(
                    "trial {trial}: M_theta scales by {} not c^7",
                    scaled.m / base.m
                ),
            );
        }
        for i in 0..3 {
            let drift = (scaled.y_vec()[i] / scaled.m - base.y_vec()[i] / base.m).abs();
            if drift > 1e-9 {
                return CheckOutcome::fail(NAME, format!("ratio drift {drift:e}"));
            }
        }
    }
    CheckOutcome::pass(NAME)
}

fn check_mix_contract() -> CheckOutcome {
    const NAME: &str = "drem_mix_contract";
    let mut rng = DetRng::new(151);
    for trial in 0..50 {
        let mut b = Matrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                b[(i, j)] = rng.range(-1.0, 1.0);
            }
        }
        let mut phi = b.mul(&b.transpose());
        for i in 0..6 {
            phi[(i, i)] += 0.05;
        }
        let eta: Vec<f64> = (0..6).map(|_| rng.range(-2.0, 2.0)).collect();
        let q = phi.mul_vec(&eta);
        let pair = drem::mix(&phi, &q, 1.0);
        let scale = pair.y.norm_fro().max(1e-30);
        for i in 0..6 {
            let err = (pair.y_vec()[i] - pair.m * eta[i]).abs();
            if err > 1e-9 * scale {
                return CheckOutcome::fail(NAME, format!("trial {trial} component {i}: {err:e}"));
            }
        }
    }
    CheckOutcome::pass(NAME)
}

fn check_normalize_properties() -> CheckOutcome {
    const NAME: &str = "drem_normalize";
    let mut rng = DetRng::new(157);
    for trial in 0..100 {
        let m = rng.range(-1e8, 1e8);
        let v: Vec<f64> = (0..4).map(|_| rng.range(-3.0, 3.0)).collect();
        let y: Vec<f64> = v.iter().map(|x| x * m).collect();
        let pair = drem::RegressionPair::from_vec("p", y, m);
        let out = drem::normalize(&pair);
        if out.m.signum() != pair.m.signum() && pair.m != 0.0 {
            return CheckOutcome::fail(NAME, format!("trial {trial}: sign flipped"));
        }
        if out.m.abs() >= 1.0 {
            return CheckOutcome::fail(NAME, format!("trial {trial}: |M'| = {} >= 1", out.m));
        }
        if m.abs() > 1e-6 {
            for (a, b) in out.y_vec().iter().zip(&v) {
                if (a / out.m - b).abs() > 1e-9 * b.abs().max(1.0) {
                    return CheckOutcome::fail(NAME, format!("trial {trial}: ratio changed"));
                }
            }
        }
    }
    CheckOutcome::pass(NAME)
}

fn check_adaptation_flow() -> CheckOutcome {
    const NAME: &str = "observer_scalar_flow";
    // frozen pair with gamma M^2 = 1: contraction over 5 time units is e^-5
    let truth = 1.7;
    let m = 0.25;
    let gamma = 1.0 / (m * m);
    let gains = crate::observer::Gains::new(gamma, gamma, gamma);
    let kp = drem::ComponentPair {
        label: "kappa",
        y: vec![m * truth; 9],
        m: vec![m; 9],
    };
    let tp = drem::RegressionPair {
        label: "t_i",
        y: Matrix::zeros(3, 3),
        m: 0.0,
    };
    let xp = drem::RegressionPair::from_vec("x_delta0", vec![0.0, 0.0], 0.0);
    let mut est = crate::observer::EstimateSet::zeros(3, 2);
    let h = 1e-4;
    let steps = (5.0 / h) as usize;
    for i in 0..steps {
        est = match crate::observer::adapt_step(&est, &kp, &tp, &xp, &gains, i as f64 * h, h) {
            Ok(e) => e,
            Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
        };
    }
    let contraction = (est.kappa_hat[0] - truth).abs() / truth;
    let expect = (-5.0f64).exp();
    if (contraction - expect).abs() > 0.01 * expect {
        return CheckOutcome::fail(
            NAME,
            format!("contraction {contraction} vs e^-5 = {expect}"),
        );
    }
    CheckOutcome::pass(NAME)
}

fn check_truth_run_contracts() -> CheckOutcome {
    const NAME: &str = "sim_truth_contracts";
    let mut p = benchmark_params();
    p.t_end = 60.0;
    let result = match Engine::new(p).and_then(|e| e.run()) {
        Ok(r) => r,
        Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
    };
    let t_e = match result.t_e {
        Some(t) if t < 30.0 => t,
        Some(t) => return CheckOutcome::fail(NAME, format!("excitation too late: t_e = {t}")),
        None => return CheckOutcome::fail(NAME, "excitation never fired".into()),
    };
    let dec = canonical::decompose(&benchmark_model(&ThetaParams(vec![1.0, 1.0, -1.0]))).unwrap();
    let eta_norm: f64 = dec.eta().iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut delta_at_te = None;
    for s in result.samples.iter() {
        let truth = s.truth.as_ref().expect("truth mode");
        if s.t >= 30.0 && truth.q_residual > 1e-4 * truth.phi_norm * eta_norm {
            return CheckOutcome::fail(
                NAME,
                format!("q residual {:e} at t = {}", truth.q_residual, s.t),
            );
        }
        if s.t >= 20.0 && truth.xi_residual > 1e-4 * truth.xi_norm {
            return CheckOutcome::fail(
                NAME,
                format!("xi residual {:e} at t = {}", truth.xi_residual, s.t),
            );
        }
        if s.t >= 30.0 {
            // The pair contracts hold up to the collection-start residual of
            // the experiment: the decaying term at t_eps = 25 amplified
            // through the weakest regressor direction leaves a bias of a few
            // percent. These bounds are that measured envelope; pushing the
            // collection start out by ten seconds shrinks them ~350x.
            for (what, rel, bound) in [
                ("theta", truth.theta_rel, 1e-2),
                ("psi_d", truth.psi_d_rel, 1e-2),
                ("t_i", truth.t_i_rel, 1e-2),
                ("kappa", truth.kappa_rel, 3e-2),
                ("x_delta0", truth.x_delta0_rel, 1e-2),
            ] {
                if rel > bound {
                    return CheckOutcome::fail(
                        NAME,
                        format!("{what} pair relative residual {rel:e} at t = {}", s.t),
                    );
                }
            }
        }
        if s.t >= t_e {
            let d = delta_at_te.get_or_insert(s.pair_mags.eta);
            if s.pair_mags.eta < 0.5 * *d {
                return CheckOutcome::fail(
                    NAME,
                    format!("Delta dropped below half its t_e level at t = {}", s.t),
                );
            }
        }
    }
    CheckOutcome::pass(NAME)
}

fn check_zero_disturbance_run() -> CheckOutcome {
    const NAME: &str = "sim_zero_disturbance";
    let mut p = benchmark_params();
    p.exo.x_delta0 = vec![0.0, 0.0];
    p.t_end = 60.0;
    let result = match Engine::new(p).and_then(|e| e.run()) {
        Ok(r) => r,
        Err(e) => return CheckOutcome::fail(NAME, e.to_string()),
    };
    for s in result.samples.iter() {
        if s.delta != 0.0 {
            return CheckOutcome::fail(NAME, format!("true delta nonzero at t = {}", s.t));
        }
        // exactly zero before collection; bounded by the decaying-term
        // contamination afterwards (the true disturbance scale is 500)
        let bound = if s.t < 25.0 { 0.0 } else { 0.1 };
        if s.delta_hat.abs() > bound {
            return CheckOutcome::fail(
                NAME,
                format!("|delta estimate| = {:e} at t = {}", s.delta_hat.abs(), s.t),
            );
        }
    }
    let x_err_end = result
        .last()
        .truth
        .as_ref()
        .map(|t| t.metrics.x_err)
        .unwrap_or(f64::NAN);
    if x_err_end.is_nan() || x_err_end >= 10.0 {
        return CheckOutcome::fail(NAME, format!("state error did not converge: {x_err_end}"));
    }
    CheckOutcome::pass(NAME)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        for outcome in run_checks(VerifyLevel::Quick) {
            assert!(outcome.passed, "{}: {}", outcome.name, outcome.detail);
        }
    }

    #[test]
    fn tampered_mapping_is_caught_and_named() {
        struct Tampered;
        impl HeteroMapSet for Tampered {
            fn t_g(&self, y_ab: &[f64], delta: f64) -> Matrix {
                hetero::BenchmarkMaps.t_g(y_ab, delta)
            }
            fn t_s(&self, y_ab: &[f64], delta: f64) -> Vec<f64> {
                // sign flip
                hetero::BenchmarkMaps
                    .t_s(y_ab, delta)
                    .iter()
                    .map(|v| -v)
                    .collect()
            }
            fn t_p(&self, n: &[f64], m: f64) -> Matrix {
                hetero::BenchmarkMaps.t_p(n, m)
            }
            fn t_q(&self, n: &[f64], m: f64) -> Matrix {
                hetero::BenchmarkMaps.t_q(n, m)
            }
            fn t_r(&self, n: &[f64], m: f64) -> Matrix {
                hetero::BenchmarkMaps.t_r(n, m)
            }
            fn t_w(&self, n: &[f64], m: f64) -> Vec<f64> {
                hetero::BenchmarkMaps.t_w(n, m)
            }
            fn degrees(&self) -> (u32, u32, u32) {
                hetero::BenchmarkMaps.degrees()
            }
        }
        let outcome = check_theta_identity_with(&Tampered);
        assert!(!outcome.passed);
        assert!(outcome.detail.contains("theta_regression"));
    }

    #[test]
    fn det_rng_is_reproducible() {
        let mut a = DetRng::new(42);
        let mut b = DetRng::new(42);
        for _ in 0..10 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = DetRng::new(42);
        for _ in 0..100 {
            let v = c.range(0.5, 2.0);
            assert!((0.5..2.0).contains(&v));
        }
    }
}
