//! Observer canonical form machinery: observability matrix, similarity
//! transform, canonical parameter vectors and the identifiability test.
//!
//! This module is the numeric ground-truth channel for diagnostics and tests.
//! The observer itself never reads it; estimation works from measured input
//! and output signals alone.

use crate::hetero::ETA_SELECTION;
use crate::mathkit::{self, Matrix};
use crate::plant::{benchmark_model, PlantModel, ThetaParams};
use crate::{Error, Result};

/// Similarity transform and canonical parameters of one plant instance.
#[derive(Debug, Clone)]
pub struct CanonicalDecomposition {
    /// `T`: physical -> canonical coordinates.
    pub t_fwd: Matrix,
    /// `T_I = T^{-1}`: canonical -> physical coordinates.
    pub t_inv: Matrix,
    pub psi_a: Vec<f64>,
    pub psi_b: Vec<f64>,
    pub psi_d: Vec<f64>,
    pub a0: Matrix,
    pub c0: Vec<f64>,
}

impl CanonicalDecomposition {
    /// `eta = col(psi_a, psi_b)`.
    pub fn eta(&self) -> Vec<f64> {
        let mut v = self.psi_a.clone();
        v.extend_from_slice(&self.psi_b);
        v
    }

    /// `kappa = col(psi_a, psi_b, psi_d)`.
    pub fn kappa(&self) -> Vec<f64> {
        let mut v = self.eta();
        v.extend_from_slice(&self.psi_d);
        v
    }
}

/// Upper-shift matrix of the observer canonical form.
pub fn shift_matrix(n: usize) -> Matrix {
    let mut a0 = Matrix::zeros(n, n);
    for i in 0..n - 1 {
        a0[(i, i + 1)] = 1.0;
    }
    a0
}

/// Stacked observability rows `C^T`, `C^T A`, ..., `C^T A^{n-1}`.
pub fn observability_inverse(model: &PlantModel) -> Result<Matrix> {
    let n = model.n;
    let mut rows = Matrix::zeros(n, n);
    let mut row = model.c.clone();
    for i in 0..n {
        for j in 0..n {
            rows[(i, j)] = row[j];
        }
        if i + 1 < n {
            // row <- row * A
            let mut next = vec![0.0; n];
            for j in 0..n {
                for (k, item) in row.iter().enumerate() {
                    next[j] += item * model.a[(k, j)];
                }
            }
            row = next;
        }
    }
    let d = mathkit::det(&rows);
    let tol = mathkit::SINGULAR_TOL * rows.norm_fro().powi(n as i32);
    if d.abs() <= tol {
        return Err(Error::NotObservable { det: d });
    }
    Ok(rows)
}

/// Build the similarity transform pair and the canonical parameter vectors.
pub fn decompose(model: &PlantModel) -> Result<CanonicalDecomposition> {
    let n = model.n;
    let obs_inv = observability_inverse(model)?;
    let obs = mathkit::inverse(&obs_inv).map_err(|_| Error::NotObservable { det: 0.0 })?;
    let o_n = obs.col(n - 1);

    // T_I = [A^{n-1} O_n | A^{n-2} O_n | ... | O_n]
    let mut t_inv = Matrix::zeros(n, n);
    let mut power = o_n.clone();
    t_inv.set_col(n - 1, &power);
    for j in (0..n - 1).rev() {
        power = model.a.mul_vec(&power);
        t_inv.set_col(j, &power);
    }
    let t_fwd = mathkit::inverse(&t_inv).map_err(|_| Error::NotObservable { det: 0.0 })?;

    let companion = t_fwd.mul(&model.a).mul(&t_inv);
    let psi_a = companion.col(0);
    let psi_b = t_fwd.mul_vec(&model.b);
    let psi_d = t_fwd.mul_vec(&model.d);

    let mut c0 = vec![0.0; n];
    c0[0] = 1.0;
    Ok(CanonicalDecomposition {
        t_fwd,
        t_inv,
        psi_a,
        psi_b,
        psi_d,
        a0: shift_matrix(n),
        c0,
    })
}

/// `psi_ab` selected out of `eta`.
pub fn psi_ab_from_eta(eta: &[f64]) -> Vec<f64> {
    ETA_SELECTION.iter().map(|&i| eta[i]).collect()
}

pub use crate::hetero::{embed_a, embed_b};

/// Squared Jacobian determinant of the map `theta -> psi_ab` for the
/// benchmark plant, evaluated by central finite differences. Returns zero
/// when the map degenerates (loss of observability included).
pub fn identifiability_check(theta: &ThetaParams) -> f64 {
    const STEP: f64 = 1e-6;
    let nt = theta.as_slice().len();
    let psi_ab_at = |th: &[f64]| -> Option<Vec<f64>> {
        let model = benchmark_model(&ThetaParams(th.to_vec()));
        let dec = decompose(&model).ok()?;
        Some(psi_ab_from_eta(&dec.eta()))
    };
    let mut jac = Matrix::zeros(nt, nt);
    for j in 0..nt {
        let mut plus = theta.as_slice().to_vec();
        let mut minus = plus.clone();
        plus[j] += STEP;
        minus[j] -= STEP;
        let (pp, pm) = match (psi_ab_at(&plus), psi_ab_at(&minus)) {
            (Some(a), Some(b)) => (a, b),
            _ => return 0.0,
        };
        for i in 0..nt {
            jac[(i, j)] = (pp[i] - pm[i]) / (2.0 * STEP);
        }
    }
    let d = mathkit::det(&jac);
    d * d
}

/// Hand-derived closed forms for the benchmark plant, verified numerically
/// against [`decompose`]. These are the oracle side of the cross-check; the
/// numeric path never consumes them.
pub mod symbolic {
    use super::Matrix;

    pub fn psi_a(th: &[f64]) -> Vec<f64> {
        vec![0.0, -th[1] * (th[0] + th[1] + th[2]), 0.0]
    }

    pub fn psi_b(th: &[f64]) -> Vec<f64> {
        vec![th[2], 0.0, th[1] * th[2] * (th[0] + th[1])]
    }

    pub fn psi_d(th: &[f64]) -> Vec<f64> {
        vec![0.0, 0.0, th[0] * th[1] * th[1] * th[2]]
    }

    pub fn psi_ab(th: &[f64]) -> Vec<f64> {
        vec![
            -th[1] * (th[0] + th[1] + th[2]),
            th[2],
            th[1] * th[2] * (th[0] + th[1]),
        ]
    }

    pub fn eta(th: &[f64]) -> Vec<f64> {
        let mut v = psi_a(th);
        v.extend(psi_b(th));
        v
    }

    pub fn kappa(th: &[f64]) -> Vec<f64> {
        let mut v = eta(th);
        v.extend(psi_d(th));
        v
    }

    pub fn jacobian_psi_ab(th: &[f64]) -> Matrix {
        let (t1, t2, t3) = (th[0], th[1], th[2]);
        Matrix::from_row_slice(
            3,
            3,
            &[
                -t2,
                -(t1 + 2.0 * t2 + t3),
                -t2,
                0.0,
                0.0,
                1.0,
                t2 * t3,
                t3 * (t1 + 2.0 * t2),
                t2 * (t1 + t2),
            ],
        )
    }

    pub fn t_i(th: &[f64]) -> Matrix {
        let (t1, t2, t3) = (th[0], th[1], th[2]);
        Matrix::from_row_slice(
            3,
            3,
            &[
                -(t1 + t2) / t3,
                0.0,
                1.0 / (t2 * t3),
                0.0,
                -1.0 / t3,
                0.0,
                1.0,
                0.0,
                0.0,
            ],
        )
    }

    pub fn observability_inverse(th: &[f64]) -> Matrix {
        let (t2, t3) = (th[1], th[2]);
        Matrix::from_row_slice(
            3,
            3,
            &[0.0, 0.0, 1.0, 0.0, -t3, 0.0, t2 * t3, 0.0, -t2 * t3],
        )
    }
}
