//! True system simulation: the uncertain plant, the disturbance exosystem
//! with its fundamental solution, and the reference/controller pair used by
//! the benchmark experiment.

use crate::mathkit::{rk4_step_in_place, Matrix, Rk4Buffers};
use crate::{Error, Result};

/// Unknown physical parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaParams(pub Vec<f64>);

impl ThetaParams {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Evaluated plant `x' = A x + B u + D delta`, `y = C^T x`.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub n: usize,
    pub a: Matrix,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    pub c: Vec<f64>,
}

impl PlantModel {
    pub fn output(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

/// Known exosystem `x_d' = A_d x_d`, `delta = h_d^T x_d` with unknown
/// initial condition `x_d0`.
#[derive(Debug, Clone)]
pub struct ExoModel {
    pub a_delta: Matrix,
    pub h_delta: Vec<f64>,
    pub x_delta0: Vec<f64>,
}

impl ExoModel {
    pub fn dim(&self) -> usize {
        self.h_delta.len()
    }

    pub fn disturbance(&self, x_delta: &[f64]) -> f64 {
        self.h_delta.iter().zip(x_delta).map(|(h, x)| h * x).sum()
    }

    /// `h_d^T Phi_d(t)`, the known disturbance mode row.
    pub fn output_row(&self, phi_delta: &Matrix) -> Vec<f64> {
        let nd = self.dim();
        let mut row = vec![0.0; nd];
        for j in 0..nd {
            for i in 0..nd {
                row[j] += self.h_delta[i] * phi_delta[(i, j)];
            }
        }
        row
    }
}

/// Joint truth state: plant states, exosystem states and fundamental solution.
#[derive(Debug, Clone)]
pub struct PlantState {
    pub x: Vec<f64>,
    pub x_delta: Vec<f64>,
    pub phi_delta: Matrix,
    pub t: f64,
}

impl PlantState {
    pub fn new(x0: &[f64], exo: &ExoModel, t0: f64) -> Self {
        Self {
            x: x0.to_vec(),
            x_delta: exo.x_delta0.clone(),
            phi_delta: Matrix::identity(exo.dim()),
            t: t0,
        }
    }
}

/// The benchmark plant. `A`, `B`, `D` are polynomial in the three unknown
/// parameters; the output picks the third state.
pub fn benchmark_model(theta: &ThetaParams) -> PlantModel {
    let th = theta.as_slice();
    assert_eq!(th.len(), 3, "benchmark model expects three parameters");
    let (t1, t2, t3) = (th[0], th[1], th[2]);
    PlantModel {
        n: 3,
        a: Matrix::from_row_slice(3, 3, &[0.0, t1 + t2, 0.0, -t2, 0.0, t2, 0.0, -t3, 0.0]),
        b: vec![0.0, 0.0, t3],
        d: vec![t1 * t2, 0.0, 0.0],
        c: vec![0.0, 0.0, 1.0],
    }
}

/// Advance plant, exosystem and fundamental solution jointly by one RK4 step
/// with the control input held over the step. The disturbance is evaluated
/// from the propagated exosystem state inside every stage, so the coupled
/// system sees stage-consistent values.
pub fn step_true_system(
    state: &PlantState,
    model: &PlantModel,
    exo: &ExoModel,
    u: f64,
    h: f64,
) -> Result<PlantState> {
    let n = model.n;
    let nd = exo.dim();
    let dim = n + nd + nd * nd;
    let mut flat = Vec::with_capacity(dim);
    flat.extend_from_slice(&state.x);
    flat.extend_from_slice(&state.x_delta);
    flat.extend_from_slice(state.phi_delta.data());

    let mut rhs = |_t: f64, s: &[f64], ds: &mut [f64]| {
        let (x, rest) = s.split_at(n);
        let (xd, phid) = rest.split_at(nd);
        let delta = exo.disturbance(xd);
        for i in 0..n {
            let mut acc = model.b[i] * u + model.d[i] * delta;
            for j in 0..n {
                acc += model.a[(i, j)] * x[j];
            }
            ds[i] = acc;
        }
        for i in 0..nd {
            let mut acc = 0.0;
            for j in 0..nd {
                acc += exo.a_delta[(i, j)] * xd[j];
            }
            ds[n + i] = acc;
        }
        for i in 0..nd {
            for j in 0..nd {
                let mut acc = 0.0;
                for k in 0..nd {
                    acc += exo.a_delta[(i, k)] * phid[k * nd + j];
                }
                ds[n + nd + i * nd + j] = acc;
            }
        }
    };

    let mut buf = Rk4Buffers::new(dim);
    rk4_step_in_place(&mut rhs, state.t, &mut flat, h, &mut buf);
    if let Some(i) = flat.iter().position(|v| !v.is_finite()) {
        let component = if i < n {
            format!("x[{i}]")
        } else if i < n + nd {
            format!("x_delta[{}]", i - n)
        } else {
            format!("phi_delta[{}]", i - n - nd)
        };
        return Err(Error::SimulationDiverged {
            t: state.t,
            component,
        });
    }
    Ok(PlantState {
        x: flat[..n].to_vec(),
        x_delta: flat[n..n + nd].to_vec(),
        phi_delta: Matrix::from_row_slice(nd, nd, &flat[n + nd..]),
        t: state.t + h,
    })
}

/// Reference trajectory: constant level plus a sinusoidal dither whose
/// envelope starts decaying at `t_eps`. Before `t_eps` the envelope is held
/// at its full amplitude so the excitation stays rich through the whole
/// collection phase.
pub fn reference(t: f64, t_eps: f64) -> f64 {
    let envelope = if t >= t_eps {
        (-(t - t_eps)).exp()
    } else {
        1.0
    };
    100.0 + 2.5 * envelope * (10.0 * t).sin()
}

/// Proportional output feedback `u = -75 (r - y)`.
pub fn control(r: f64, y: f64) -> f64 {
    -75.0 * (r - y)
}
