//! Gradient identification laws and algebraic estimate assembly.
//!
//! Each unknown gets a decoupled scalar (or entrywise) gradient flow
//! `v' = -gamma M (M v - Y)` driven by its regression pair. The state and
//! disturbance estimates are then assembled algebraically from the filter
//! states and the parameter estimates; there is no corrective output
//! injection anywhere, which is what keeps the estimates free of peaking.

use crate::drem::{ComponentPair, RegressionPair};
use crate::filters::{FilterBankState, FilterDesign};
use crate::mathkit::Matrix;
use crate::plant::ExoModel;
use crate::{Error, Result};

/// Adaptation gains, one per identification law.
#[derive(Debug, Clone, Copy)]
pub struct Gains {
    pub gamma_kappa: f64,
    pub gamma_xdelta0: f64,
    pub gamma_t_i: f64,
}

impl Gains {
    pub fn new(gamma_kappa: f64, gamma_xdelta0: f64, gamma_t_i: f64) -> Self {
        assert!(gamma_kappa > 0.0 && gamma_xdelta0 > 0.0 && gamma_t_i > 0.0);
        Self {
            gamma_kappa,
            gamma_xdelta0,
            gamma_t_i,
        }
    }
}

/// All estimated quantities of one run.
#[derive(Debug, Clone)]
pub struct EstimateSet {
    /// Canonical parameter estimate `col(psi_a, psi_b, psi_d)`.
    pub kappa_hat: Vec<f64>,
    pub t_i_hat: Matrix,
    pub x_delta0_hat: Vec<f64>,
    /// Disturbance-channel filter driven by the estimated disturbance.
    pub u_hat: Matrix,
    /// Assembled physical state estimate.
    pub x_hat: Vec<f64>,
    /// Assembled disturbance estimate.
    pub delta_hat: f64,
}

impl EstimateSet {
    /// Zero-initialized estimates (the experiment's initial conditions).
    pub fn zeros(n: usize, nd: usize) -> Self {
        Self {
            kappa_hat: vec![0.0; 3 * n],
            t_i_hat: Matrix::zeros(n, n),
            x_delta0_hat: vec![0.0; nd],
            u_hat: Matrix::zeros(n, n),
            x_hat: vec![0.0; n],
            delta_hat: 0.0,
        }
    }
}

/// One RK4 step of the scalar flow `v' = -a v + b`.
fn rk4_scalar(v: f64, a: f64, b: f64, h: f64) -> f64 {
    let k1 = -a * v + b;
    let k2 = -a * (v + 0.5 * h * k1) + b;
    let k3 = -a * (v + 0.5 * h * k2) + b;
    let k4 = -a * (v + h * k3) + b;
    v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// One RK4 step of the three gradient flows with the pairs held over the
/// step. A zero multiplier freezes the corresponding component, which is the
/// valid pre-excitation behavior.
pub fn adapt_step(
    est: &EstimateSet,
    kappa_pair: &ComponentPair,
    t_i_pair: &RegressionPair,
    xdelta0_pair: &RegressionPair,
    gains: &Gains,
    t: f64,
    h: f64,
) -> Result<EstimateSet> {
    let mut out = est.clone();
    for i in 0..out.kappa_hat.len() {
        let m = kappa_pair.m[i];
        out.kappa_hat[i] = rk4_scalar(
            out.kappa_hat[i],
            gains.gamma_kappa * m * m,
            gains.gamma_kappa * m * kappa_pair.y[i],
            h,
        );
    }
    let m = t_i_pair.m;
    let n = out.t_i_hat.rows();
    for i in 0..n {
        for j in 0..n {
            out.t_i_hat[(i, j)] = rk4_scalar(
                out.t_i_hat[(i, j)],
                gains.gamma_t_i * m * m,
                gains.gamma_t_i * m * t_i_pair.y[(i, j)],
                h,
            );
        }
    }
    let m = xdelta0_pair.m;
    for i in 0..out.x_delta0_hat.len() {
        out.x_delta0_hat[i] = rk4_scalar(
            out.x_delta0_hat[i],
            gains.gamma_xdelta0 * m * m,
            gains.gamma_xdelta0 * m * xdelta0_pair.y_vec()[i],
            h,
        );
    }
    for (law, gain, finite) in [
        (
            "kappa",
            gains.gamma_kappa,
            out.kappa_hat.iter().all(|v| v.is_finite()),
        ),
        ("T_I", gains.gamma_t_i, out.t_i_hat.is_finite()),
        (
            "x_delta0",
            gains.gamma_xdelta0,
            out.x_delta0_hat.iter().all(|v| v.is_finite()),
        ),
    ] {
        if !finite {
            return Err(Error::AdaptationDiverged {
                t,
                law: law.into(),
                gain,
            });
        }
    }
    Ok(out)
}

/// Assemble the state and disturbance estimates from the filter states and
/// advance the estimated disturbance filter one step with the assembled
/// disturbance held.
pub fn assemble(
    est: &EstimateSet,
    bank: &FilterBankState,
    design: &FilterDesign,
    exo: &ExoModel,
    phi_delta: &Matrix,
    h: f64,
) -> EstimateSet {
    let n = est.t_i_hat.rows();
    let mut out = est.clone();

    let hrow = exo.output_row(phi_delta);
    out.delta_hat = hrow.iter().zip(&est.x_delta0_hat).map(|(a, b)| a * b).sum();

    let xi_hat = assemble_xi(est, bank, n);
    out.x_hat = est.t_i_hat.mul_vec(&xi_hat);

    // U_hat' = A_K U_hat + I delta_hat, delta_hat held over the step
    let a_k = &design.a_k;
    let mut u = est.u_hat.clone();
    let mut k = [
        Matrix::zeros(n, n),
        Matrix::zeros(n, n),
        Matrix::zeros(n, n),
        Matrix::zeros(n, n),
    ];
    for stage in 0..4 {
        let arg = match stage {
            0 => u.clone(),
            1 => u.add(&k[0].scale(0.5 * h)),
            2 => u.add(&k[1].scale(0.5 * h)),
            _ => u.add(&k[2].scale(h)),
        };
        let mut d = a_k.mul(&arg);
        for i in 0..n {
            d[(i, i)] += out.delta_hat;
        }
        k[stage] = d;
    }
    u = u.add(
        &k[0]
            .add(&k[1].scale(2.0))
            .add(&k[2].scale(2.0))
            .add(&k[3])
            .scale(h / 6.0),
    );
    out.u_hat = u;
    out
}

/// Canonical state estimate `xi_hat = z + Omega psi_a_hat + P psi_b_hat +
/// U_hat psi_d_hat` from the stacked `kappa_hat` blocks.
pub fn assemble_xi(est: &EstimateSet, bank: &FilterBankState, n: usize) -> Vec<f64> {
    let psi_a = &est.kappa_hat[..n];
    let psi_b = &est.kappa_hat[n..2 * n];
    let psi_d = &est.kappa_hat[2 * n..3 * n];
    let mut xi = bank.z().to_vec();
    let omega = bank.omega_mat();
    let p = bank.p_mat();
    for i in 0..n {
        for j in 0..n {
            xi[i] += omega[(i, j)] * psi_a[j] + p[(i, j)] * psi_b[j] + est.u_hat[(i, j)] * psi_d[j];
        }
    }
    xi
}

/// Truth-referenced quantities used only for diagnostics.
#[derive(Debug, Clone)]
pub struct TruthChannel {
    pub x: Vec<f64>,
    pub delta: f64,
    pub kappa: Vec<f64>,
    pub t_i: Matrix,
    pub x_delta0: Vec<f64>,
    pub u_true: Matrix,
}

/// Per-sample error norms of every estimated quantity.
#[derive(Debug, Clone, Copy, Default)]
pub struct ErrorMetrics {
    pub x_err: f64,
    pub delta_err: f64,
    pub kappa_err: f64,
    pub xdelta0_err: f64,
    pub t_i_err: f64,
    pub u_err: f64,
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Error norms against the truth channel.
pub fn metrics(est: &EstimateSet, truth: &TruthChannel) -> ErrorMetrics {
    ErrorMetrics {
        x_err: norm_diff(&est.x_hat, &truth.x),
        delta_err: (est.delta_hat - truth.delta).abs(),
        kappa_err: norm_diff(&est.kappa_hat, &truth.kappa),
        xdelta0_err: norm_diff(&est.x_delta0_hat, &truth.x_delta0),
        t_i_err: est.t_i_hat.sub(&truth.t_i).norm_fro(),
        u_err: est.u_hat.sub(&truth.u_true).norm_fro(),
    }
}
