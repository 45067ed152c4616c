//! State-variable filter bank and extension integrals.
//!
//! The bank turns the measured signals `(y, u)` into filtered regressor
//! material: the observer-form filters `z`, `Omega`, `P`, the
//! disturbance-channel filters `F`, `H`, `N` with their mixing vector `beta`,
//! the first-order copies `qbar_f`, `phibar_f`, `F_f`, `y_f`, and the
//! disturbance mode filter `V`. The extension stage accumulates the
//! exponentially weighted Gram integrals `(q, phi)` for the canonical
//! parameters and `(p_f, V_f)` for the exosystem initial condition.
//!
//! All filter states live in one flat vector described by [`BankLayout`], so
//! the per-operation steppers here and the coupled engine in [`crate::sim`]
//! share the same right-hand sides.

use crate::drem::{self, ComponentPair, RegressionPair};
use crate::hetero::{self, ETA_SELECTION};
use crate::mathkit::{self, rk4_step_in_place, Matrix, Rk4Buffers};
use crate::plant::ExoModel;
use crate::{Error, Result};

/// How regression pairs are conditioned before use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairMode {
    /// Divide every pair by `1 + |M|` as it is formed.
    pub normalize: bool,
    /// Use the reduced-power compositions instead of the printed
    /// adjugate/determinant cascades.
    pub reduced: bool,
}

impl PairMode {
    pub const NORMALIZED: PairMode = PairMode {
        normalize: true,
        reduced: true,
    };
    pub const PAPER: PairMode = PairMode {
        normalize: false,
        reduced: false,
    };
}

/// Filter constants: observer injection gain, disturbance-channel pair
/// `(G, l)` with its mixing vector, time constants and the collection start.
#[derive(Debug, Clone)]
pub struct FilterDesign {
    pub k_vec: Vec<f64>,
    pub a_k: Matrix,
    pub g: Matrix,
    pub l: Vec<f64>,
    pub beta: Vec<f64>,
    pub k1: f64,
    pub sigma: f64,
    pub k_gain: f64,
    pub t_eps: f64,
    /// Cached `G l`, used by the `F` filter drive at every stage.
    g_l: Vec<f64>,
}

impl FilterDesign {
    /// Build and validate a design. `A_K = A0 - K C0^T` and `G` must be
    /// Hurwitz, `(G, l)` controllable, and the spectra of `G` and the
    /// exosystem disjoint (enforced by the Sylvester solve behind `beta`).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        k_vec: Vec<f64>,
        g: Matrix,
        l: Vec<f64>,
        k1: f64,
        sigma: f64,
        k_gain: f64,
        t_eps: f64,
        exo: &ExoModel,
    ) -> Result<Self> {
        if k_vec.len() != n {
            return Err(Error::DesignFailure {
                reason: format!("K must have length {n}"),
            });
        }
        if k1 <= 0.0 || sigma <= 0.0 || k_gain <= 0.0 {
            return Err(Error::DesignFailure {
                reason: "k1, sigma and k must be positive".into(),
            });
        }
        let mut a_k = crate::canonical::shift_matrix(n);
        for i in 0..n {
            a_k[(i, 0)] -= k_vec[i];
        }
        if !mathkit::is_hurwitz(&a_k) {
            return Err(Error::DesignFailure {
                reason: "A_K = A0 - K C0^T is not Hurwitz".into(),
            });
        }
        if !mathkit::is_hurwitz(&g) {
            return Err(Error::DesignFailure {
                reason: "G is not Hurwitz".into(),
            });
        }
        let nd = exo.dim();
        if g.rows() != nd || l.len() != nd {
            return Err(Error::DesignFailure {
                reason: "G and l must match the exosystem dimension".into(),
            });
        }
        // controllability of (G, l): [l, G l, ..., G^{nd-1} l] full rank
        let mut ctrb = Matrix::zeros(nd, nd);
        let mut col = l.clone();
        for j in 0..nd {
            ctrb.set_col(j, &col);
            col = g.mul_vec(&col);
        }
        let d = mathkit::det(&ctrb);
        if d.abs() <= 1e-12 * ctrb.norm_fro().powi(nd as i32) {
            return Err(Error::DesignFailure {
                reason: "(G, l) is not controllable".into(),
            });
        }
        let beta = design_beta(exo, &g, &l)?;
        let g_l = g.mul_vec(&l);
        Ok(Self {
            k_vec,
            a_k,
            g,
            l,
            beta,
            k1,
            sigma,
            k_gain,
            t_eps,
            g_l,
        })
    }
}

/// Solve the disturbance-channel mixing vector: `M_d A_d - G M_d = l hbar^T`
/// with `hbar^T = h_d^T A_d`, then `beta = hbar^T M_d^{-1}`.
pub fn design_beta(exo: &ExoModel, g: &Matrix, l: &[f64]) -> Result<Vec<f64>> {
    let nd = exo.dim();
    let hbar = {
        let mut v = vec![0.0; nd];
        for j in 0..nd {
            for i in 0..nd {
                v[j] += exo.h_delta[i] * exo.a_delta[(i, j)];
            }
        }
        v
    };
    let mut q = Matrix::zeros(nd, nd);
    for i in 0..nd {
        for j in 0..nd {
            q[(i, j)] = l[i] * hbar[j];
        }
    }
    let m_delta =
        mathkit::solve_sylvester(&exo.a_delta, g, &q).map_err(|e| Error::DesignFailure {
            reason: format!("sylvester solve: {e}"),
        })?;
    // beta^T = hbar^T M_d^{-1}  <=>  M_d^T beta = hbar
    mathkit::solve(&m_delta.transpose(), &hbar).map_err(|_| Error::DesignFailure {
        reason: "M_delta is singular".into(),
    })
}

/// One contiguous segment of the flat filter state.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Seg {
    pub off: usize,
    pub len: usize,
}

impl Seg {
    pub fn of<'a>(&self, s: &'a [f64]) -> &'a [f64] {
        &s[self.off..self.off + self.len]
    }
}

/// Offsets of every filter state inside the flat vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BankLayout {
    pub n: usize,
    pub nd: usize,
    pub z: Seg,
    pub omega: Seg,
    pub p: Seg,
    pub u_true: Seg,
    pub f: Seg,
    pub h_mat: Seg,
    pub n_mat: Seg,
    pub qbar_f: Seg,
    pub phibar_f: Seg,
    pub f_f: Seg,
    pub y_f: Seg,
    pub v: Seg,
    pub q: Seg,
    pub phi: Seg,
    pub p_f: Seg,
    pub v_f: Seg,
    pub total: usize,
}

impl BankLayout {
    /// Re-base every segment by `base`, for embedding the bank into a larger
    /// flat state.
    pub(crate) fn shifted(mut self, base: usize) -> Self {
        for seg in [
            &mut self.z,
            &mut self.omega,
            &mut self.p,
            &mut self.u_true,
            &mut self.f,
            &mut self.h_mat,
            &mut self.n_mat,
            &mut self.qbar_f,
            &mut self.phibar_f,
            &mut self.f_f,
            &mut self.y_f,
            &mut self.v,
            &mut self.q,
            &mut self.phi,
            &mut self.p_f,
            &mut self.v_f,
        ] {
            seg.off += base;
        }
        self
    }

    pub fn new(n: usize, nd: usize) -> Self {
        let mut off = 0;
        let mut seg = |len: usize| {
            let s = Seg { off, len };
            off += len;
            s
        };
        let z = seg(n);
        let omega = seg(n * n);
        let p = seg(n * n);
        let u_true = seg(n * n);
        let f = seg(nd);
        let h_mat = seg(nd * n);
        let n_mat = seg(nd * n);
        let qbar_f = seg(1);
        let phibar_f = seg(2 * n);
        let f_f = seg(nd);
        let y_f = seg(1);
        let v = seg(n * n * nd);
        let q = seg(2 * n);
        let phi = seg(4 * n * n);
        let p_f = seg(nd);
        let v_f = seg(nd * nd);
        Self {
            n,
            nd,
            z,
            omega,
            p,
            u_true,
            f,
            h_mat,
            n_mat,
            qbar_f,
            phibar_f,
            f_f,
            y_f,
            v,
            q,
            phi,
            p_f,
            v_f,
            total: off,
        }
    }
}

/// All filter and extension states of one run, zero-initialized.
#[derive(Debug, Clone)]
pub struct FilterBankState {
    pub(crate) layout: BankLayout,
    pub(crate) flat: Vec<f64>,
}

macro_rules! slice_accessor {
    ($name:ident) => {
        pub fn $name(&self) -> &[f64] {
            self.layout.$name.of(&self.flat)
        }
    };
}

impl FilterBankState {
    pub fn new(n: usize, nd: usize) -> Self {
        let layout = BankLayout::new(n, nd);
        Self {
            flat: vec![0.0; layout.total],
            layout,
        }
    }

    slice_accessor!(z);
    slice_accessor!(f);
    slice_accessor!(phibar_f);
    slice_accessor!(f_f);
    slice_accessor!(q);
    slice_accessor!(p_f);

    pub fn qbar_f(&self) -> f64 {
        self.flat[self.layout.qbar_f.off]
    }

    pub fn y_f(&self) -> f64 {
        self.flat[self.layout.y_f.off]
    }

    pub fn omega_mat(&self) -> Matrix {
        let n = self.layout.n;
        Matrix::from_row_slice(n, n, self.layout.omega.of(&self.flat))
    }

    pub fn p_mat(&self) -> Matrix {
        let n = self.layout.n;
        Matrix::from_row_slice(n, n, self.layout.p.of(&self.flat))
    }

    pub fn u_true_mat(&self) -> Matrix {
        let n = self.layout.n;
        Matrix::from_row_slice(n, n, self.layout.u_true.of(&self.flat))
    }

    pub fn v_mat(&self) -> Matrix {
        let n = self.layout.n;
        Matrix::from_row_slice(n, n * self.layout.nd, self.layout.v.of(&self.flat))
    }

    pub fn phi_mat(&self) -> Matrix {
        let n2 = 2 * self.layout.n;
        Matrix::from_row_slice(n2, n2, self.layout.phi.of(&self.flat))
    }

    pub fn v_f_mat(&self) -> Matrix {
        let nd = self.layout.nd;
        Matrix::from_row_slice(nd, nd, self.layout.v_f.of(&self.flat))
    }

    #[cfg(test)]
    pub(crate) fn set_seg(&mut self, seg: Seg, data: &[f64]) {
        self.flat[seg.off..seg.off + seg.len].copy_from_slice(data);
    }
}

/// Derivatives of the filter states driven by the measured signals, written
/// into `ds` over the bank segments. Returns `qbar`; `phibar` is written to
/// `phibar_out`. `delta_true` drives the diagnostic `U` filter when truth
/// mode is on; otherwise `U` is frozen. `hrow` is the known disturbance mode
/// row `h_d^T Phi_d(t)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn bank_rhs(
    design: &FilterDesign,
    lay: &BankLayout,
    y: f64,
    u: f64,
    delta_true: Option<f64>,
    hrow: &[f64],
    s: &[f64],
    ds: &mut [f64],
    phibar_out: &mut [f64],
) -> f64 {
    let n = lay.n;
    let nd = lay.nd;
    let a_k = &design.a_k;

    // z' = A_K z + K y
    let z = lay.z.of(s);
    for i in 0..n {
        let ak_row = a_k.row(i);
        let mut acc = design.k_vec[i] * y;
        for (a, zj) in ak_row.iter().zip(z) {
            acc += a * zj;
        }
        ds[lay.z.off + i] = acc;
    }

    // Omega' = A_K Omega + I y ; P' = A_K P + I u ; U' = A_K U + I delta
    let omega = lay.omega.of(s);
    let p = lay.p.of(s);
    let u_true = lay.u_true.of(s);
    let with_truth = delta_true.is_some();
    for i in 0..n {
        let ak_row = a_k.row(i);
        let om_out = &mut ds[lay.omega.off + i * n..lay.omega.off + i * n + n];
        om_out.fill(0.0);
        for (k, a) in ak_row.iter().enumerate() {
            for (o, m) in om_out.iter_mut().zip(&omega[k * n..k * n + n]) {
                *o += a * m;
            }
        }
        let p_out = &mut ds[lay.p.off + i * n..lay.p.off + i * n + n];
        p_out.fill(0.0);
        for (k, a) in ak_row.iter().enumerate() {
            for (o, m) in p_out.iter_mut().zip(&p[k * n..k * n + n]) {
                *o += a * m;
            }
        }
        if with_truth {
            let u_out = &mut ds[lay.u_true.off + i * n..lay.u_true.off + i * n + n];
            u_out.fill(0.0);
            for (k, a) in ak_row.iter().enumerate() {
                for (o, m) in u_out.iter_mut().zip(&u_true[k * n..k * n + n]) {
                    *o += a * m;
                }
            }
        }
        ds[lay.omega.off + i * n + i] += y;
        ds[lay.p.off + i * n + i] += u;
        if with_truth {
            ds[lay.u_true.off + i * n + i] += delta_true.unwrap_or(0.0);
        }
    }

    // F' = G F + G l y - l z'_1 ; H' = G H - l P'_row1 ; N' = G N - l Omega'_row1
    let zdot0 = ds[lay.z.off];
    let f = lay.f.of(s);
    let h_mat = lay.h_mat.of(s);
    let n_mat = lay.n_mat.of(s);
    for i in 0..nd {
        let g_row = design.g.row(i);
        let mut acc = design.g_l[i] * y - design.l[i] * zdot0;
        for (g, fj) in g_row.iter().zip(f) {
            acc += g * fj;
        }
        ds[lay.f.off + i] = acc;
        for c in 0..n {
            let mut ha = -design.l[i] * ds[lay.p.off + c];
            let mut na = -design.l[i] * ds[lay.omega.off + c];
            for (j, g) in g_row.iter().enumerate() {
                ha += g * h_mat[j * n + c];
                na += g * n_mat[j * n + c];
            }
            ds[lay.h_mat.off + i * n + c] = ha;
            ds[lay.n_mat.off + i * n + c] = na;
        }
    }

    // measurable regression scalars
    let qbar = y - z[0];
    for c in 0..n {
        let mut top = ds[lay.omega.off + c];
        let mut bot = ds[lay.p.off + c];
        for j in 0..nd {
            top += design.beta[j] * n_mat[j * n + c];
            bot += design.beta[j] * h_mat[j * n + c];
        }
        phibar_out[c] = top;
        phibar_out[n + c] = bot;
    }

    // first-order copies
    let k1 = design.k1;
    ds[lay.qbar_f.off] = -k1 * s[lay.qbar_f.off] + qbar;
    for i in 0..2 * n {
        ds[lay.phibar_f.off + i] = -k1 * s[lay.phibar_f.off + i] + phibar_out[i];
    }
    for i in 0..nd {
        ds[lay.f_f.off + i] = -k1 * s[lay.f_f.off + i] + f[i];
    }
    ds[lay.y_f.off] = -k1 * s[lay.y_f.off] + y;

    // V' = A_K V + (h_d^T Phi_d  kron  I_n)
    let v = lay.v.of(s);
    let w = n * nd;
    for i in 0..n {
        let v_out = &mut ds[lay.v.off + i * w..lay.v.off + i * w + w];
        v_out.fill(0.0);
        for (k, a) in a_k.row(i).iter().enumerate() {
            for (o, m) in v_out.iter_mut().zip(&v[k * w..k * w + w]) {
                *o += a * m;
            }
        }
        for (k, h) in hrow.iter().enumerate() {
            v_out[k * n + i] += h;
        }
    }

    qbar
}

/// The regression pairs formed from the current extension state, conditioned
/// per `mode`.
#[derive(Debug, Clone)]
pub struct ExtensionPairs {
    pub eta: RegressionPair,
    pub theta: RegressionPair,
    pub psi_d: RegressionPair,
    pub t_i: RegressionPair,
    pub kappa: ComponentPair,
    pub xdelta0: RegressionPair,
}

/// Run the mixing cascade on the current `(phi, q)` and `(V_f, p_f)` states.
///
/// In normalized mode every pair is rescaled to unit multiplier magnitude
/// and then magnitude-normalized, so each gradient law sees `|M| ~ 0.5` once
/// its regression carries signal and exactly zero before that.
pub(crate) fn compute_pairs(
    design: &FilterDesign,
    lay: &BankLayout,
    mode: PairMode,
    s: &[f64],
) -> ExtensionPairs {
    let n2 = 2 * lay.n;
    let phi = Matrix::from_row_slice(n2, n2, lay.phi.of(s));
    let raw = drem::mix(&phi, lay.q.of(s), design.k_gain);
    let cond = |p: RegressionPair| {
        if mode.normalize {
            drem::normalize(&drem::unit_scale(&p))
        } else {
            p
        }
    };
    let eta = cond(raw);

    let y = eta.y_vec();
    let y_ab: Vec<f64> = ETA_SELECTION.iter().map(|&i| y[i]).collect();

    let theta = cond(hetero::theta_regression(&y_ab, eta.m));
    let psi_d = cond(if mode.reduced {
        hetero::psi_d_regression(theta.y_vec(), theta.m)
    } else {
        hetero::psi_d_regression_printed(theta.y_vec(), theta.m)
    });
    let t_i = cond(if mode.reduced {
        hetero::t_i_regression(theta.y_vec(), theta.m)
    } else {
        hetero::t_i_regression_printed(theta.y_vec(), theta.m)
    });
    let kappa_raw = hetero::kappa_regression(y, eta.m, psi_d.y_vec(), psi_d.m, mode.reduced);
    let kappa = if mode.normalize {
        drem::normalize_components(&drem::unit_scale_components(&kappa_raw))
    } else {
        kappa_raw
    };

    let v_f = Matrix::from_row_slice(lay.nd, lay.nd, lay.v_f.of(s));
    let xdelta0 = cond(hetero::xdelta0_regression(&v_f, lay.p_f.of(s)));

    ExtensionPairs {
        eta,
        theta,
        psi_d,
        t_i,
        kappa,
        xdelta0,
    }
}

/// Derivatives of the extension integrals `(q, phi, p_f, V_f)` at time `t`,
/// written into `ds`. Everything is zero before the collection start `t_eps`;
/// after it the integrands carry the converging kernel
/// `exp(-sigma (t - t_eps))`, so the accumulated matrices settle to constant
/// values instead of fading out. Returns the pairs evaluated at this state.
pub(crate) fn extension_rhs(
    design: &FilterDesign,
    lay: &BankLayout,
    mode: PairMode,
    y: f64,
    t: f64,
    s: &[f64],
    ds: &mut [f64],
) -> Option<ExtensionPairs> {
    if t < design.t_eps {
        return None;
    }
    let n = lay.n;
    let n2 = 2 * n;
    let nd = lay.nd;
    let weight = (-design.sigma * (t - design.t_eps)).exp();

    let phibar_f = lay.phibar_f.of(s);
    let f_f = lay.f_f.of(s);
    let y_f = s[lay.y_f.off];
    let qbar = y - s[lay.z.off];
    let mut drive = qbar - design.k1 * s[lay.qbar_f.off];
    for j in 0..nd {
        drive -= design.beta[j] * (f_f[j] + design.l[j] * y_f);
    }
    for i in 0..n2 {
        ds[lay.q.off + i] = weight * phibar_f[i] * drive;
        for j in 0..n2 {
            ds[lay.phi.off + i * n2 + j] = weight * phibar_f[i] * phibar_f[j];
        }
    }

    let pairs = compute_pairs(design, lay, mode, s);
    let delta = pairs.eta.m;
    let y_mixed = pairs.eta.y_vec();

    // p = Delta qbar - C0^T Omega (psi_a block of Y) - C0^T P (psi_b block of Y)
    // The selectors L_a, L_b act on psi_ab; applied to the mixed vector they
    // compose as L_a L_ab, picking the handpicked components of Y and
    // embedding them into their psi_a / psi_b slots. The slots that are
    // structurally zero carry no signal, so this reading also keeps their
    // mixing noise out of p.
    let omega_row = &lay.omega.of(s)[..n];
    let p_row = &lay.p.of(s)[..n];
    let y_ab_mixed: Vec<f64> = ETA_SELECTION.iter().map(|&i| y_mixed[i]).collect();
    let la_y = hetero::embed_a(&y_ab_mixed);
    let lb_y = hetero::embed_b(&y_ab_mixed);
    let mut p_scalar = delta * qbar;
    for i in 0..n {
        p_scalar -= omega_row[i] * la_y[i] + p_row[i] * lb_y[i];
    }

    // g = (I kron Y_psi_d)^T V^T C0, using row 0 of V
    let v_row = &lay.v.of(s)[..n * nd];
    let y_psi_d = pairs.psi_d.y_vec();
    let mut g = vec![0.0; nd];
    for (k, gk) in g.iter_mut().enumerate() {
        for i in 0..n {
            *gk += y_psi_d[i] * v_row[k * n + i];
        }
    }
    let m_psi_d = pairs.psi_d.m;
    for k in 0..nd {
        ds[lay.p_f.off + k] = weight * delta * m_psi_d * p_scalar * g[k];
        for j in 0..nd {
            ds[lay.v_f.off + k * nd + j] = weight * delta * delta * g[k] * g[j];
        }
    }
    Some(pairs)
}

/// Advance the time-domain filters (everything initialized at `t0`) one RK4
/// step with `(y, u)` held over the step. The extension integrals are not
/// touched; see [`step_extension`].
#[allow(clippy::too_many_arguments)]
pub fn step_bank(
    state: &FilterBankState,
    design: &FilterDesign,
    exo: &ExoModel,
    phi_delta: &Matrix,
    y: f64,
    u: f64,
    delta_true: Option<f64>,
    t: f64,
    h: f64,
) -> Result<FilterBankState> {
    let lay = state.layout;
    let hrow = exo.output_row(phi_delta);
    let mut phibar = vec![0.0; 2 * lay.n];
    let mut rhs = |_t: f64, s: &[f64], ds: &mut [f64]| {
        ds.fill(0.0);
        bank_rhs(design, &lay, y, u, delta_true, &hrow, s, ds, &mut phibar);
    };
    let mut out = state.clone();
    let mut buf = Rk4Buffers::new(lay.total);
    rk4_step_in_place(&mut rhs, t, &mut out.flat, h, &mut buf);
    if let Some(i) = out.flat.iter().position(|v| !v.is_finite()) {
        return Err(Error::SimulationDiverged {
            t,
            component: format!("filter_bank[{i}]"),
        });
    }
    Ok(out)
}

/// The measurable pair `(phibar, qbar)` evaluated from the right-hand sides
/// of the filters at the current state; no finite differencing.
pub fn phibar_and_qbar(
    state: &FilterBankState,
    design: &FilterDesign,
    y: f64,
    u: f64,
) -> (Vec<f64>, f64) {
    let lay = state.layout;
    let mut ds = vec![0.0; lay.total];
    let mut phibar = vec![0.0; 2 * lay.n];
    let hrow = vec![0.0; lay.nd];
    let qbar = bank_rhs(
        design,
        &lay,
        y,
        u,
        None,
        &hrow,
        &state.flat,
        &mut ds,
        &mut phibar,
    );
    (phibar, qbar)
}

/// Advance the extension integrals one RK4 step with the rest of the bank
/// held. Steps lying entirely before `t_eps` leave the state unchanged
/// (the integrals start at the collection time, not at `t0`).
pub fn step_extension(
    state: &FilterBankState,
    design: &FilterDesign,
    mode: PairMode,
    y: f64,
    t: f64,
    h: f64,
) -> Result<FilterBankState> {
    let lay = state.layout;
    let mut rhs = |t_stage: f64, s: &[f64], ds: &mut [f64]| {
        ds.fill(0.0);
        extension_rhs(design, &lay, mode, y, t_stage, s, ds);
    };
    let mut out = state.clone();
    let mut buf = Rk4Buffers::new(lay.total);
    rk4_step_in_place(&mut rhs, t, &mut out.flat, h, &mut buf);
    if let Some(i) = out.flat.iter().position(|v| !v.is_finite()) {
        return Err(Error::SimulationDiverged {
            t,
            component: format!("extension[{i}]"),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit::Matrix;

    fn benchmark_exo() -> ExoModel {
        ExoModel {
            a_delta: Matrix::from_row_slice(2, 2, &[0.0, 1.0, -10.0, 0.0]),
            h_delta: vec![1.0, 0.0],
            x_delta0: vec![500.0, 100.0],
        }
    }

    fn benchmark_design() -> FilterDesign {
        FilterDesign::new(
            3,
            vec![3.0, 3.0, 1.0],
            Matrix::from_row_slice(2, 2, &[-4.0, 1.0, -2.0, 0.0]),
            vec![1.0, 2.0],
            25.0,
            1.0,
            1.0,
            25.0,
            &benchmark_exo(),
        )
        .unwrap()
    }

    #[test]
    fn beta_matches_experiment_value() {
        let beta = design_beta(
            &benchmark_exo(),
            &Matrix::from_row_slice(2, 2, &[-4.0, 1.0, -2.0, 0.0]),
            &[1.0, 2.0],
        )
        .unwrap();
        assert!((beta[0] - 20.0).abs() <= 1e-10);
        assert!((beta[1] + 8.0).abs() <= 1e-10);
    }

    #[test]
    fn beta_scales_inversely_with_l() {
        // the Sylvester equation is linear in l, so M_d doubles and beta halves
        let exo = benchmark_exo();
        let g = Matrix::from_row_slice(2, 2, &[-4.0, 1.0, -2.0, 0.0]);
        let b1 = design_beta(&exo, &g, &[1.0, 2.0]).unwrap();
        let b2 = design_beta(&exo, &g, &[2.0, 4.0]).unwrap();
        for (a, b) in b1.iter().zip(&b2) {
            assert!((a - 2.0 * b).abs() < 1e-10);
        }
    }

    #[test]
    fn design_rejects_unstable_a_k() {
        let err = FilterDesign::new(
            3,
            vec![-1.0, 0.0, 0.0],
            Matrix::from_row_slice(2, 2, &[-4.0, 1.0, -2.0, 0.0]),
            vec![1.0, 2.0],
            25.0,
            1.0,
            1.0,
            25.0,
            &benchmark_exo(),
        );
        assert!(matches!(err, Err(Error::DesignFailure { .. })));
    }

    #[test]
    fn design_rejects_spectra_overlap() {
        // G sharing the exosystem's oscillator spectrum is not Hurwitz here,
        // so overlap must be caught through the Sylvester residual with a
        // stable-but-resonant G is impossible; check the uncontrollable case.
        let err = FilterDesign::new(
            3,
            vec![3.0, 3.0, 1.0],
            Matrix::from_row_slice(2, 2, &[-4.0, 0.0, 0.0, -4.0]),
            vec![1.0, 0.0],
            25.0,
            1.0,
            1.0,
            25.0,
            &benchmark_exo(),
        );
        assert!(matches!(err, Err(Error::DesignFailure { .. })));
    }

    #[test]
    fn zero_inputs_keep_bank_at_zero() {
        let design = benchmark_design();
        let exo = benchmark_exo();
        let phi_d = Matrix::identity(2);
        let mut bank = FilterBankState::new(3, 2);
        // zero the Kronecker drive as well: hrow = 0 requires h_delta = 0
        let exo_silent = ExoModel {
            h_delta: vec![0.0, 0.0],
            ..exo
        };
        for step in 0..100 {
            bank = step_bank(
                &bank,
                &design,
                &exo_silent,
                &phi_d,
                0.0,
                0.0,
                Some(0.0),
                step as f64 * 1e-3,
                1e-3,
            )
            .unwrap();
        }
        assert_eq!(bank.flat.iter().map(|v| v.abs()).fold(0.0, f64::max), 0.0);
    }

    #[test]
    fn z_reaches_linear_steady_state_under_constant_output() {
        // constant y = 1, u = 0: z -> -A_K^{-1} K, computed by direct solve.
        // The triple pole of A_K at -1 carries a strong Jordan transient, so
        // the 1e-6 band is reached only around t = 28.
        let design = benchmark_design();
        let exo = benchmark_exo();
        let phi_d = Matrix::identity(2);
        let mut bank = FilterBankState::new(3, 2);
        let h = 1e-3;
        let mut t = 0.0;
        for _ in 0..30_000 {
            bank = step_bank(&bank, &design, &exo, &phi_d, 1.0, 0.0, None, t, h).unwrap();
            t += h;
        }
        let neg_k: Vec<f64> = design.k_vec.iter().map(|v| -v).collect();
        let expect = mathkit::solve(&design.a_k, &neg_k).unwrap();
        let err: f64 = bank
            .z()
            .iter()
            .zip(&expect)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-6, "steady-state error {err}");
    }

    #[test]
    fn phibar_all_zero_bank() {
        let design = benchmark_design();
        let bank = FilterBankState::new(3, 2);
        let (phibar, qbar) = phibar_and_qbar(&bank, &design, 0.0, 0.0);
        assert!(phibar.iter().all(|v| *v == 0.0));
        assert_eq!(qbar, 0.0);

        let (_, qbar) = phibar_and_qbar(&bank, &design, 1.0, 0.0);
        assert_eq!(qbar, 1.0, "qbar = y - z_1 with z = 0");
    }

    #[test]
    fn phibar_from_unit_omega() {
        // Omega = I, N = 0, y = 0: first block is row 1 of A_K
        let design = benchmark_design();
        let mut bank = FilterBankState::new(3, 2);
        let eye = Matrix::identity(3);
        bank.set_seg(bank.layout.omega, eye.data());
        let (phibar, _) = phibar_and_qbar(&bank, &design, 0.0, 0.0);
        let expect = design.a_k.row(0);
        for (a, b) in phibar[..3].iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(phibar[3..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn extension_is_inert_before_collection_time() {
        let design = benchmark_design();
        let mut bank = FilterBankState::new(3, 2);
        // put something into the filtered regressor so the integrand would be
        // nonzero if the gate were wrong
        bank.set_seg(bank.layout.phibar_f, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let out = step_extension(&bank, &design, PairMode::NORMALIZED, 1.0, 0.0, 1e-3).unwrap();
        assert_eq!(out.q(), bank.q());
        assert_eq!(out.phi_mat(), bank.phi_mat());
    }

    #[test]
    fn extension_gram_is_symmetric_psd_and_monotone() {
        let design = benchmark_design();
        let mut bank = FilterBankState::new(3, 2);
        bank.set_seg(bank.layout.phibar_f, &[1.0, -2.0, 3.0, 0.5, -1.0, 2.0]);
        let mut t = design.t_eps;
        let mut state = bank.clone();
        let mut prev = state.phi_mat();
        for step in 0..100 {
            state = step_extension(&state, &design, PairMode::NORMALIZED, 1.0, t, 1e-3).unwrap();
            t += 1e-3;
            if step % 20 == 19 {
                // the Gram integrand has a positive weight, so phi can only
                // grow in the positive-semidefinite order
                let phi = state.phi_mat();
                let growth = mathkit::min_eig_sym(&phi.sub(&prev)).unwrap();
                assert!(growth >= -1e-12, "phi decreased in the PSD order: {growth}");
                prev = phi;
            }
        }
        let phi = state.phi_mat();
        assert!(phi.sub(&phi.transpose()).max_abs() < 1e-12);
        let min_eig = mathkit::min_eig_sym(&phi).unwrap();
        assert!(min_eig >= -1e-12, "phi must stay PSD, min eig {min_eig}");
    }
}
