//! Single-clock coupled simulation: plant, exosystem, filter bank, extension
//! integrals, mixing cascade and adaptation laws advance together as one ODE
//! under a fixed-step RK4 grid, so every stage sees consistent values of
//! every coupled signal.

use crate::canonical::{self, CanonicalDecomposition};
use crate::drem::FeMonitor;
use crate::filters::{self, BankLayout, FilterDesign, PairMode, Seg};
use crate::mathkit::{rk4_step_in_place, Matrix, Rk4Buffers};
use crate::observer::{ErrorMetrics, EstimateSet};
use crate::plant::{benchmark_model, control, reference, ExoModel, PlantModel, ThetaParams};
use crate::{Error, Result};

/// Fully resolved numeric parameters of one run.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub theta: ThetaParams,
    pub x0: Vec<f64>,
    pub exo: ExoModel,
    pub design: FilterDesign,
    pub gains: crate::observer::Gains,
    pub pair_mode: PairMode,
    pub truth_diagnostics: bool,
    pub fe_threshold: f64,
    pub t_end: f64,
    pub h: f64,
    /// Output cadence, decoupled from the integration step.
    pub sample_dt: f64,
    /// Diagnostic hook: at this time the parameter estimates are overwritten
    /// with their true values, `U_hat` is reset and adaptation freezes, so the
    /// algebraic assembly error can be observed in isolation.
    pub inject_truth_at: Option<f64>,
}

/// Magnitudes of the scalar multipliers of each pair, as used by adaptation.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairMagnitudes {
    pub eta: f64,
    pub theta: f64,
    pub psi_d: f64,
    pub t_i: f64,
    pub x_delta0: f64,
}

/// Truth-referenced residuals; only produced in truth-diagnostics mode.
#[derive(Debug, Clone, Copy, Default)]
pub struct TruthDiagnostics {
    pub metrics: ErrorMetrics,
    /// `||q - phi eta||` of the extension regression.
    pub q_residual: f64,
    pub phi_norm: f64,
    /// `||xi - z - Omega psi_a - P psi_b - U psi_d||` of the filter identity.
    pub xi_residual: f64,
    pub xi_norm: f64,
    /// Relative contract residuals of the five cascade pairs.
    pub theta_rel: f64,
    pub psi_d_rel: f64,
    pub t_i_rel: f64,
    pub kappa_rel: f64,
    pub x_delta0_rel: f64,
}

/// One output record.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub delta: f64,
    pub delta_hat: f64,
    pub fe_level: f64,
    pub fe_excited: bool,
    pub pair_mags: PairMagnitudes,
    pub truth: Option<TruthDiagnostics>,
}

/// Full trajectory of output records plus the recorded excitation time.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub samples: Vec<Sample>,
    pub t_e: Option<f64>,
}

impl RunResult {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("run produced no samples")
    }

    /// Samples with `t` in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = &Sample> {
        self.samples
            .iter()
            .filter(move |s| s.t >= lo - 1e-12 && s.t <= hi + 1e-12)
    }
}

struct EstLayout {
    kappa: Seg,
    t_i: Seg,
    xdelta0: Seg,
    u_hat: Seg,
}

/// The coupled simulation engine for the benchmark plant.
pub struct Engine {
    params: SimParams,
    model: PlantModel,
    n: usize,
    nd: usize,
    x: Seg,
    x_delta: Seg,
    phi_delta: Seg,
    bank: BankLayout,
    est: EstLayout,
    total: usize,
    /// Canonical truth, present in truth-diagnostics mode.
    dec: Option<CanonicalDecomposition>,
}

impl Engine {
    pub fn new(params: SimParams) -> Result<Engine> {
        let model = benchmark_model(&params.theta);
        let n = model.n;
        let nd = params.exo.dim();
        if params.x0.len() != n {
            return Err(Error::InvalidConfig {
                reason: format!("x0 must have length {n}"),
            });
        }
        if params.h <= 0.0 {
            return Err(Error::InvalidConfig {
                reason: "h must be positive".into(),
            });
        }
        let mut off = 0;
        let mut seg = |len: usize| {
            let s = Seg { off, len };
            off += len;
            s
        };
        let x = seg(n);
        let x_delta = seg(nd);
        let phi_delta = seg(nd * nd);
        let bank = BankLayout::new(n, nd).shifted(off);
        off += bank.total;
        let mut seg = |len: usize| {
            let s = Seg { off, len };
            off += len;
            s
        };
        let est = EstLayout {
            kappa: seg(3 * n),
            t_i: seg(n * n),
            xdelta0: seg(nd),
            u_hat: seg(n * n),
        };
        let dec = if params.truth_diagnostics {
            Some(canonical::decompose(&model)?)
        } else {
            None
        };
        Ok(Engine {
            params,
            model,
            n,
            nd,
            x,
            x_delta,
            phi_delta,
            bank,
            est,
            total: off,
            dec,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.total
    }

    fn initial_state(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.total];
        s[self.x.off..self.x.off + self.n].copy_from_slice(&self.params.x0);
        s[self.x_delta.off..self.x_delta.off + self.nd].copy_from_slice(&self.params.exo.x_delta0);
        for i in 0..self.nd {
            s[self.phi_delta.off + i * self.nd + i] = 1.0;
        }
        s
    }

    fn hrow(&self, s: &[f64]) -> Vec<f64> {
        let h = &self.params.exo.h_delta;
        let phi = &s[self.phi_delta.off..self.phi_delta.off + self.nd * self.nd];
        let mut row = vec![0.0; self.nd];
        for j in 0..self.nd {
            for i in 0..self.nd {
                row[j] += h[i] * phi[i * self.nd + j];
            }
        }
        row
    }

    /// Right-hand side of the full coupled system.
    fn rhs(
        &self,
        t: f64,
        s: &[f64],
        ds: &mut [f64],
        phibar: &mut [f64],
        hrow: &mut [f64],
        frozen: bool,
    ) {
        let n = self.n;
        let nd = self.nd;
        let p = &self.params;
        ds.fill(0.0);

        let x = &s[self.x.off..self.x.off + n];
        let xd = &s[self.x_delta.off..self.x_delta.off + nd];
        let y = self.model.output(x);
        let u = control(reference(t, p.design.t_eps), y);
        let delta = p.exo.disturbance(xd);
        hrow.fill(0.0);
        {
            let phid = &s[self.phi_delta.off..self.phi_delta.off + nd * nd];
            for i in 0..nd {
                let h = p.exo.h_delta[i];
                for (o, m) in hrow.iter_mut().zip(&phid[i * nd..i * nd + nd]) {
                    *o += h * m;
                }
            }
        }

        // plant
        for i in 0..n {
            let mut acc = self.model.b[i] * u + self.model.d[i] * delta;
            for j in 0..n {
                acc += self.model.a[(i, j)] * x[j];
            }
            ds[self.x.off + i] = acc;
        }
        for i in 0..nd {
            let mut acc = 0.0;
            for j in 0..nd {
                acc += p.exo.a_delta[(i, j)] * xd[j];
            }
            ds[self.x_delta.off + i] = acc;
        }
        let phid = &s[self.phi_delta.off..self.phi_delta.off + nd * nd];
        for i in 0..nd {
            for j in 0..nd {
                let mut acc = 0.0;
                for k in 0..nd {
                    acc += p.exo.a_delta[(i, k)] * phid[k * nd + j];
                }
                ds[self.phi_delta.off + i * nd + j] = acc;
            }
        }

        // filter bank
        let delta_true = p.truth_diagnostics.then_some(delta);
        filters::bank_rhs(&p.design, &self.bank, y, u, delta_true, hrow, s, ds, phibar);

        // extension integrals, pairs and adaptation
        let pairs = filters::extension_rhs(&p.design, &self.bank, p.pair_mode, y, t, s, ds);
        if let (Some(pairs), false) = (&pairs, frozen) {
            let g = &p.gains;
            let kh = &s[self.est.kappa.off..self.est.kappa.off + 3 * n];
            for i in 0..3 * n {
                let m = pairs.kappa.m[i];
                ds[self.est.kappa.off + i] = -g.gamma_kappa * m * (m * kh[i] - pairs.kappa.y[i]);
            }
            let m = pairs.t_i.m;
            let th = &s[self.est.t_i.off..self.est.t_i.off + n * n];
            for i in 0..n * n {
                ds[self.est.t_i.off + i] = -g.gamma_t_i * m * (m * th[i] - pairs.t_i.y.data()[i]);
            }
            let m = pairs.xdelta0.m;
            let xh = &s[self.est.xdelta0.off..self.est.xdelta0.off + nd];
            for i in 0..nd {
                ds[self.est.xdelta0.off + i] =
                    -g.gamma_xdelta0 * m * (m * xh[i] - pairs.xdelta0.y_vec()[i]);
            }
        }

        // estimated disturbance filter
        let x0_hat = &s[self.est.xdelta0.off..self.est.xdelta0.off + nd];
        let delta_hat: f64 = hrow.iter().zip(x0_hat).map(|(a, b)| a * b).sum();
        let uh = &s[self.est.u_hat.off..self.est.u_hat.off + n * n];
        for i in 0..n {
            let out = &mut ds[self.est.u_hat.off + i * n..self.est.u_hat.off + i * n + n];
            out.fill(0.0);
            for (k, a) in p.design.a_k.row(i).iter().enumerate() {
                for (o, m) in out.iter_mut().zip(&uh[k * n..k * n + n]) {
                    *o += a * m;
                }
            }
            out[i] += delta_hat;
        }
    }

    fn estimates(&self, s: &[f64]) -> EstimateSet {
        let n = self.n;
        let nd = self.nd;
        let mut est = EstimateSet::zeros(n, nd);
        est.kappa_hat
            .copy_from_slice(&s[self.est.kappa.off..self.est.kappa.off + 3 * n]);
        est.t_i_hat = Matrix::from_row_slice(n, n, &s[self.est.t_i.off..self.est.t_i.off + n * n]);
        est.x_delta0_hat
            .copy_from_slice(&s[self.est.xdelta0.off..self.est.xdelta0.off + nd]);
        est.u_hat =
            Matrix::from_row_slice(n, n, &s[self.est.u_hat.off..self.est.u_hat.off + n * n]);

        let hrow = self.hrow(s);
        est.delta_hat = hrow.iter().zip(&est.x_delta0_hat).map(|(a, b)| a * b).sum();

        // xi_hat = z + Omega psi_a_hat + P psi_b_hat + U_hat psi_d_hat
        let z = self.bank.z.of(s);
        let omega = self.bank.omega.of(s);
        let pmat = self.bank.p.of(s);
        let mut xi = z.to_vec();
        for i in 0..n {
            for j in 0..n {
                xi[i] += omega[i * n + j] * est.kappa_hat[j]
                    + pmat[i * n + j] * est.kappa_hat[n + j]
                    + est.u_hat[(i, j)] * est.kappa_hat[2 * n + j];
            }
        }
        est.x_hat = est.t_i_hat.mul_vec(&xi);
        est
    }

    fn sample(&self, t: f64, s: &[f64], monitor: &mut FeMonitor) -> Result<Sample> {
        let n = self.n;
        let phi = Matrix::from_row_slice(2 * n, 2 * n, self.bank.phi.of(s));
        let (excited, level) = monitor.update(&phi, t)?;

        let est = self.estimates(s);
        let x = s[self.x.off..self.x.off + n].to_vec();
        let delta = self
            .params
            .exo
            .disturbance(&s[self.x_delta.off..self.x_delta.off + self.nd]);

        let (pair_mags, pairs) = if t >= self.params.design.t_eps {
            let pairs =
                filters::compute_pairs(&self.params.design, &self.bank, self.params.pair_mode, s);
            (
                PairMagnitudes {
                    eta: pairs.eta.m.abs(),
                    theta: pairs.theta.m.abs(),
                    psi_d: pairs.psi_d.m.abs(),
                    t_i: pairs.t_i.m.abs(),
                    x_delta0: pairs.xdelta0.m.abs(),
                },
                Some(pairs),
            )
        } else {
            (PairMagnitudes::default(), None)
        };

        let truth = self.dec.as_ref().map(|dec| {
            let truth_kappa = dec.kappa();
            let truth_eta = dec.eta();
            let u_true = Matrix::from_row_slice(n, n, self.bank.u_true.of(s));
            let metrics = crate::observer::metrics(
                &est,
                &crate::observer::TruthChannel {
                    x: x.clone(),
                    delta,
                    kappa: truth_kappa.clone(),
                    t_i: dec.t_inv.clone(),
                    x_delta0: self.params.exo.x_delta0.clone(),
                    u_true: u_true.clone(),
                },
            );

            // extension regression residual q - phi eta
            let q = self.bank.q.of(s);
            let fitted = phi.mul_vec(&truth_eta);
            let q_residual = q
                .iter()
                .zip(&fitted)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();

            // filter identity xi = z + Omega psi_a + P psi_b + U psi_d
            let xi = dec.t_fwd.mul_vec(&x);
            let z = self.bank.z.of(s);
            let omega = self.bank.omega.of(s);
            let pmat = self.bank.p.of(s);
            let mut fitted_xi = z.to_vec();
            for i in 0..n {
                for j in 0..n {
                    fitted_xi[i] += omega[i * n + j] * dec.psi_a[j]
                        + pmat[i * n + j] * dec.psi_b[j]
                        + u_true[(i, j)] * dec.psi_d[j];
                }
            }
            let xi_residual = xi
                .iter()
                .zip(&fitted_xi)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let xi_norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();

            let rel = |err: f64, scale: f64| err / scale.max(1e-30);
            let (theta_rel, psi_d_rel, t_i_rel, kappa_rel, x_delta0_rel) = match &pairs {
                Some(pr) => {
                    let th = self.params.theta.as_slice();
                    let e_th: f64 = pr
                        .theta
                        .y_vec()
                        .iter()
                        .zip(th)
                        .map(|(y, t)| (y - pr.theta.m * t).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    let e_pd: f64 = pr
                        .psi_d
                        .y_vec()
                        .iter()
                        .zip(&dec.psi_d)
                        .map(|(y, t)| (y - pr.psi_d.m * t).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    let e_ti = pr.t_i.y.sub(&dec.t_inv.scale(pr.t_i.m)).norm_fro();
                    let e_k: f64 = (0..3 * n)
                        .map(|i| (pr.kappa.y[i] - pr.kappa.m[i] * truth_kappa[i]).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    let k_norm: f64 = pr.kappa.y.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let e_x0: f64 = pr
                        .xdelta0
                        .y_vec()
                        .iter()
                        .zip(&self.params.exo.x_delta0)
                        .map(|(y, t)| (y - pr.xdelta0.m * t).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    (
                        rel(e_th, pr.theta.y.norm_fro()),
                        rel(e_pd, pr.psi_d.y.norm_fro()),
                        rel(e_ti, pr.t_i.y.norm_fro()),
                        rel(e_k, k_norm),
                        rel(e_x0, pr.xdelta0.y.norm_fro()),
                    )
                }
                None => (0.0, 0.0, 0.0, 0.0, 0.0),
            };

            TruthDiagnostics {
                metrics,
                q_residual,
                phi_norm: phi.norm_fro(),
                xi_residual,
                xi_norm,
                theta_rel,
                psi_d_rel,
                t_i_rel,
                kappa_rel,
                x_delta0_rel,
            }
        });

        Ok(Sample {
            t,
            x,
            x_hat: est.x_hat,
            delta,
            delta_hat: est.delta_hat,
            fe_level: level,
            fe_excited: excited,
            pair_mags,
            truth,
        })
    }

    fn component_name(&self, idx: usize) -> String {
        let segs: [(&str, Seg); 22] = [
            ("x", self.x),
            ("x_delta", self.x_delta),
            ("phi_delta", self.phi_delta),
            ("z", self.bank.z),
            ("omega", self.bank.omega),
            ("p", self.bank.p),
            ("u_true", self.bank.u_true),
            ("f", self.bank.f),
            ("h", self.bank.h_mat),
            ("n", self.bank.n_mat),
            ("qbar_f", self.bank.qbar_f),
            ("phibar_f", self.bank.phibar_f),
            ("f_f", self.bank.f_f),
            ("y_f", self.bank.y_f),
            ("v", self.bank.v),
            ("q", self.bank.q),
            ("phi", self.bank.phi),
            ("p_f", self.bank.p_f),
            ("v_f", self.bank.v_f),
            ("kappa_hat", self.est.kappa),
            ("t_i_hat", self.est.t_i),
            ("x_delta0_hat", self.est.xdelta0),
            // u_hat handled by the fallthrough below
        ];
        for (name, seg) in segs {
            if idx >= seg.off && idx < seg.off + seg.len {
                return format!("{name}[{}]", idx - seg.off);
            }
        }
        format!("u_hat[{}]", idx - self.est.u_hat.off)
    }

    /// Run the whole horizon, emitting one sample every `sample_dt`.
    pub fn run(&self) -> Result<RunResult> {
        let p = &self.params;
        let steps = (p.t_end / p.h).round() as usize;
        let per_sample = (p.sample_dt / p.h).round().max(1.0) as usize;
        let mut state = self.initial_state();
        let mut buf = Rk4Buffers::new(self.total);
        let mut phibar = vec![0.0; 2 * self.n];
        let mut hrow = vec![0.0; self.nd];
        let mut monitor = FeMonitor::new(p.fe_threshold);
        let mut samples = Vec::with_capacity(steps / per_sample + 2);
        let mut frozen = false;
        let mut injected = p.inject_truth_at.is_none();

        for step in 0..=steps {
            let t = step as f64 * p.h;
            if !injected && t >= p.inject_truth_at.unwrap() {
                let dec = self
                    .dec
                    .as_ref()
                    .expect("truth injection requires truth mode");
                let kappa = dec.kappa();
                state[self.est.kappa.off..self.est.kappa.off + 3 * self.n].copy_from_slice(&kappa);
                state[self.est.t_i.off..self.est.t_i.off + self.n * self.n]
                    .copy_from_slice(dec.t_inv.data());
                state[self.est.xdelta0.off..self.est.xdelta0.off + self.nd]
                    .copy_from_slice(&p.exo.x_delta0);
                state[self.est.u_hat.off..self.est.u_hat.off + self.n * self.n].fill(0.0);
                frozen = true;
                injected = true;
            }
            if step % per_sample == 0 || step == steps {
                samples.push(self.sample(t, &state, &mut monitor)?);
            }
            if step == steps {
                break;
            }
            let mut rhs_fn = |t: f64, s: &[f64], ds: &mut [f64]| {
                self.rhs(t, s, ds, &mut phibar, &mut hrow, frozen);
            };
            rk4_step_in_place(&mut rhs_fn, t, &mut state, p.h, &mut buf);
            if let Some(i) = state.iter().position(|v| !v.is_finite()) {
                return Err(Error::SimulationDiverged {
                    t: t + p.h,
                    component: self.component_name(i),
                });
            }
        }
        Ok(RunResult {
            samples,
            t_e: monitor.t_e,
        })
    }
}

/// Benchmark parameters of the reproduction experiment in normalized mode.
/// Structural constants (plant, exosystem, filter data) are the published
/// ones; amplifier and gains are the normalized defaults.
pub fn benchmark_params() -> SimParams {
    let exo = ExoModel {
        a_delta: Matrix::from_row_slice(2, 2, &[0.0, 1.0, -10.0, 0.0]),
        h_delta: vec![1.0, 0.0],
        x_delta0: vec![500.0, 100.0],
    };
    let design = FilterDesign::new(
        3,
        vec![3.0, 3.0, 1.0],
        Matrix::from_row_slice(2, 2, &[-4.0, 1.0, -2.0, 0.0]),
        vec![1.0, 2.0],
        25.0,
        1.0,
        1.0,
        25.0,
        &exo,
    )
    .expect("benchmark filter design is valid");
    SimParams {
        theta: ThetaParams(vec![1.0, 1.0, -1.0]),
        x0: vec![-1.0, 0.0, 2.0],
        exo,
        design,
        gains: crate::observer::Gains::new(50.0, 50.0, 50.0),
        pair_mode: PairMode::NORMALIZED,
        truth_diagnostics: true,
        fe_threshold: 1e-9,
        t_end: 300.0,
        h: 1e-4,
        sample_dt: 0.01,
        inject_truth_at: None,
    }
}
