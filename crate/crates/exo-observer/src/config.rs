//! Run configuration: JSON schema, defaults and resolution into numeric
//! simulation parameters.
//!
//! One config file carries the structural constants of the experiment plus
//! both gain sets; the `mode` discriminator picks which set a run uses.
//! `normalized` runs with unit amplifier, magnitude-normalized pairs and
//! moderate gains; `paper` runs the raw compositions with the published
//! amplifier and gains verbatim.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::filters::{FilterDesign, PairMode};
use crate::mathkit::Matrix;
use crate::observer::Gains;
use crate::plant::{ExoModel, ThetaParams};
use crate::sim::SimParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Normalized,
    Paper,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "normalized" => Ok(Mode::Normalized),
            "paper" => Ok(Mode::Paper),
            other => Err(format!(
                "unknown mode `{other}` (expected normalized|paper)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExoConfig {
    pub a_delta: Vec<Vec<f64>>,
    pub h_delta: Vec<f64>,
    pub x_delta0: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub k: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub l: Vec<f64>,
    pub k1: f64,
    pub sigma: f64,
    pub t_eps: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub gamma_kappa: f64,
    pub gamma_xdelta0: f64,
    pub gamma_t_i: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerMode<T> {
    pub normalized: T,
    pub paper: T,
}

impl<T: Copy> PerMode<T> {
    pub fn pick(&self, mode: Mode) -> T {
        match mode {
            Mode::Normalized => self.normalized,
            Mode::Paper => self.paper,
        }
    }
}

fn default_truth() -> bool {
    true
}

fn default_fe_threshold() -> f64 {
    1e-9
}

fn default_sample_dt() -> f64 {
    0.01
}

/// Complete description of one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub mode: Mode,
    #[serde(default = "default_truth")]
    pub truth_diagnostics: bool,
    pub theta: Vec<f64>,
    pub x0: Vec<f64>,
    pub exosystem: ExoConfig,
    pub filter: FilterConfig,
    pub amplifier_k: PerMode<f64>,
    pub gains: PerMode<GainsConfig>,
    #[serde(default = "default_fe_threshold")]
    pub fe_threshold: f64,
    pub t_end: f64,
    pub h: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
}

impl SimConfig {
    /// The bundled reproduction experiment: published structural constants,
    /// both gain sets, normalized mode selected.
    pub fn paper_default() -> Self {
        Self {
            mode: Mode::Normalized,
            truth_diagnostics: true,
            theta: vec![1.0, 1.0, -1.0],
            x0: vec![-1.0, 0.0, 2.0],
            exosystem: ExoConfig {
                a_delta: vec![vec![0.0, 1.0], vec![-10.0, 0.0]],
                h_delta: vec![1.0, 0.0],
                x_delta0: vec![500.0, 100.0],
            },
            filter: FilterConfig {
                k: vec![3.0, 3.0, 1.0],
                g: vec![vec![-4.0, 1.0], vec![-2.0, 0.0]],
                l: vec![1.0, 2.0],
                k1: 25.0,
                sigma: 1.0,
                t_eps: 25.0,
            },
            amplifier_k: PerMode {
                normalized: 1.0,
                paper: 1e19,
            },
            gains: PerMode {
                normalized: GainsConfig {
                    gamma_kappa: 50.0,
                    gamma_xdelta0: 50.0,
                    gamma_t_i: 50.0,
                },
                paper: GainsConfig {
                    gamma_kappa: 1e-74,
                    gamma_xdelta0: 5e-82,
                    gamma_t_i: 1e-23,
                },
            },
            fe_threshold: 1e-9,
            t_end: 300.0,
            h: 1e-4,
            sample_dt: 0.01,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: SimConfig = serde_json::from_str(&text).map_err(|e| Error::InvalidConfig {
            reason: format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidConfig { reason });
        if self.theta.len() != 3 {
            return fail("theta must have length 3 (benchmark plant)".into());
        }
        if self.x0.len() != 3 {
            return fail("x0 must have length 3".into());
        }
        let nd = self.exosystem.h_delta.len();
        if nd == 0
            || self.exosystem.a_delta.len() != nd
            || self.exosystem.a_delta.iter().any(|r| r.len() != nd)
            || self.exosystem.x_delta0.len() != nd
        {
            return fail("exosystem dimensions are inconsistent".into());
        }
        if self.filter.g.len() != nd
            || self.filter.g.iter().any(|r| r.len() != nd)
            || self.filter.l.len() != nd
        {
            return fail("filter G and l must match the exosystem dimension".into());
        }
        if self.filter.k.len() != 3 {
            return fail("filter K must have length 3".into());
        }
        if self.h <= 0.0 {
            return fail("h must be positive".into());
        }
        if self.filter.t_eps >= self.t_end {
            return fail("t_eps must be smaller than t_end".into());
        }
        if self.sample_dt < self.h {
            return fail("sample_dt must be at least h".into());
        }
        for (name, g) in [
            ("normalized", self.gains.normalized),
            ("paper", self.gains.paper),
        ] {
            if g.gamma_kappa <= 0.0 || g.gamma_xdelta0 <= 0.0 || g.gamma_t_i <= 0.0 {
                return fail(format!("{name} gains must be positive"));
            }
        }
        if self.amplifier_k.normalized <= 0.0 || self.amplifier_k.paper <= 0.0 {
            return fail("amplifier k must be positive".into());
        }
        Ok(())
    }

    fn matrix(rows: &[Vec<f64>]) -> Matrix {
        let r: Vec<&[f64]> = rows.iter().map(|v| v.as_slice()).collect();
        Matrix::from_rows(&r)
    }

    pub fn exo_model(&self) -> ExoModel {
        ExoModel {
            a_delta: Self::matrix(&self.exosystem.a_delta),
            h_delta: self.exosystem.h_delta.clone(),
            x_delta0: self.exosystem.x_delta0.clone(),
        }
    }

    /// Resolve into numeric run parameters under the given mode.
    pub fn to_params(&self, mode: Mode) -> Result<SimParams> {
        self.validate()?;
        let exo = self.exo_model();
        let design = FilterDesign::new(
            3,
            self.filter.k.clone(),
            Self::matrix(&self.filter.g),
            self.filter.l.clone(),
            self.filter.k1,
            self.filter.sigma,
            self.amplifier_k.pick(mode),
            self.filter.t_eps,
            &exo,
        )?;
        let g = self.gains.pick(mode);
        Ok(SimParams {
            theta: ThetaParams(self.theta.clone()),
            x0: self.x0.clone(),
            exo,
            design,
            gains: Gains::new(g.gamma_kappa, g.gamma_xdelta0, g.gamma_t_i),
            pair_mode: match mode {
                Mode::Normalized => PairMode::NORMALIZED,
                Mode::Paper => PairMode::PAPER,
            },
            truth_diagnostics: self.truth_diagnostics,
            fe_threshold: self.fe_threshold,
            t_end: self.t_end,
            h: self.h,
            sample_dt: self.sample_dt,
            inject_truth_at: None,
        })
    }
}
