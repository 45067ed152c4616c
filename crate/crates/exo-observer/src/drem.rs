//! Regressor extension and mixing: turning the vector regression
//! `q = phi * eta` into decoupled scalar regressions, monitoring the
//! excitation level of the extended regressor, and conditioning the
//! resulting pairs for adaptation.

use crate::mathkit::{self, Matrix};
use crate::Result;

/// A measurable pair `(Y, M)` with the contract `Y = M * unknown`.
#[derive(Debug, Clone)]
pub struct RegressionPair {
    /// Name of the unknown the pair multiplies.
    pub label: &'static str,
    /// Left-hand side; vectors are stored as `n x 1`.
    pub y: Matrix,
    /// Scalar multiplier.
    pub m: f64,
}

impl RegressionPair {
    pub fn from_vec(label: &'static str, y: Vec<f64>, m: f64) -> Self {
        Self {
            label,
            y: Matrix::col_from_slice(&y),
            m,
        }
    }

    pub fn y_vec(&self) -> &[f64] {
        self.y.data()
    }
}

/// A component-wise pair: each entry of `y` has its own multiplier. Used for
/// the stacked parameter vector whose blocks come from different regressions.
#[derive(Debug, Clone)]
pub struct ComponentPair {
    pub label: &'static str,
    pub y: Vec<f64>,
    pub m: Vec<f64>,
}

/// Relative pivot level below which the extended regressor is treated as
/// numerically rank-deficient. Resolved weak directions sit many orders
/// above round-off; unresolved ones produce pure cancellation noise in the
/// determinant, and the valid pre-excitation answer for those is zero.
const RANK_GUARD: f64 = 1e-12;

/// Mix the extended regression `(phi, q)` into `Y = k adj(phi) q`,
/// `M = k det(phi)`. A (numerically) singular `phi` yields the zero pair,
/// which is the valid pre-excitation state, not an error.
pub fn mix(phi: &Matrix, q: &[f64], k: f64) -> RegressionPair {
    let lu = mathkit::Lu::factor(phi);
    let d = lu.det();
    if d == 0.0 || lu.min_pivot_rel < RANK_GUARD {
        return RegressionPair::from_vec("eta", vec![0.0; q.len()], 0.0);
    }
    let mut y = lu.solve(q).expect("nonzero pivots");
    for v in y.iter_mut() {
        *v *= k * d;
    }
    RegressionPair::from_vec("eta", y, k * d)
}

/// One-shot excitation check: smallest eigenvalue of the Gram matrix against
/// a threshold.
pub fn fe_monitor(phi: &Matrix, threshold: f64) -> Result<(bool, f64)> {
    let level = mathkit::min_eig_sym(phi)?;
    Ok((level >= threshold, level))
}

/// Stateful excitation monitor that records the first crossing time.
#[derive(Debug, Clone)]
pub struct FeMonitor {
    pub threshold: f64,
    pub level: f64,
    pub excited: bool,
    pub t_e: Option<f64>,
}

impl FeMonitor {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            level: 0.0,
            excited: false,
            t_e: None,
        }
    }

    pub fn update(&mut self, phi: &Matrix, t: f64) -> Result<(bool, f64)> {
        let (excited, level) = fe_monitor(phi, self.threshold)?;
        self.level = level;
        if excited && self.t_e.is_none() {
            self.t_e = Some(t);
            self.excited = true;
        }
        Ok((excited, level))
    }
}

/// Magnitude normalization: divide both sides by `1 + |M|`. The contract is
/// preserved exactly because both sides scale by the same measurable factor;
/// the sign of `M` is preserved and `|M|` lands in `[0, 1)`.
pub fn normalize(pair: &RegressionPair) -> RegressionPair {
    let s = 1.0 + pair.m.abs();
    RegressionPair {
        label: pair.label,
        y: pair.y.scale(1.0 / s),
        m: pair.m / s,
    }
}

/// Component-wise version of [`normalize`].
pub fn normalize_components(pair: &ComponentPair) -> ComponentPair {
    let mut out = pair.clone();
    for i in 0..out.y.len() {
        let s = 1.0 + out.m[i].abs();
        out.y[i] /= s;
        out.m[i] /= s;
    }
    out
}

/// Floor below which a multiplier is treated as unexcited by [`unit_scale`].
pub const UNIT_SCALE_FLOOR: f64 = 1e-30;

/// Rescale a pair by the measurable factor `1 / (floor + |M|)`, bringing any
/// excited multiplier to unit magnitude while an unexcited pair collapses to
/// zero. Both sides scale identically, so the contract and the sign of `M`
/// are untouched. The compositions downstream raise multipliers to powers of
/// up to twelve; feeding them unit-magnitude inputs is what keeps every
/// stage of the cascade inside the representable range regardless of the raw
/// Gram determinant scale.
pub fn unit_scale(pair: &RegressionPair) -> RegressionPair {
    if pair.m.abs() <= UNIT_SCALE_FLOOR {
        return RegressionPair {
            label: pair.label,
            y: Matrix::zeros(pair.y.rows(), pair.y.cols()),
            m: 0.0,
        };
    }
    let s = 1.0 / (UNIT_SCALE_FLOOR + pair.m.abs());
    RegressionPair {
        label: pair.label,
        y: pair.y.scale(s),
        m: pair.m * s,
    }
}

/// Component-wise version of [`unit_scale`].
pub fn unit_scale_components(pair: &ComponentPair) -> ComponentPair {
    let mut out = pair.clone();
    for i in 0..out.y.len() {
        if out.m[i].abs() <= UNIT_SCALE_FLOOR {
            out.y[i] = 0.0;
            out.m[i] = 0.0;
        } else {
            let s = 1.0 / (UNIT_SCALE_FLOOR + out.m[i].abs());
            out.y[i] *= s;
            out.m[i] *= s;
        }
    }
    out
}
