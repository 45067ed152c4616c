//! Adaptive observer for uncertain LTI overparametrized systems driven by an
//! exosystem-generated disturbance.
//!
//! The crate simulates the true closed-loop plant, runs a state-variable
//! filter bank over the measured input/output signals, turns the filtered
//! signals into decoupled scalar regressions by regressor extension and
//! mixing, and feeds those regressions to gradient identification laws. The
//! state and disturbance estimates are then assembled algebraically, with no
//! corrective output feedback, so the estimates show no peaking transient.
//!
//! Module map:
//! * [`mathkit`] - dense matrix kernel, RK4, Sylvester solve, eigen bounds
//! * [`plant`] - true system, exosystem, reference and controller
//! * [`canonical`] - observer canonical form and ground-truth oracle
//! * [`filters`] - filter bank and extension integrals
//! * [`drem`] - regressor mixing, excitation monitor, normalization
//! * [`hetero`] - cascade of regressions for theta, psi_d, T_I, kappa, x_d0
//! * [`observer`] - gradient adaptation laws and algebraic estimate assembly
//! * [`sim`] - single-clock coupled simulation engine
//! * [`config`] - run configuration schema
//! * [`verify`] - invariant check suites shared by tests and the CLI
//! * [`cli`] - simulate / verify / reproduce commands

// The numeric kernels work on small fixed-shape blocks where indexed loops
// read more directly than iterator chains.
#![allow(clippy::needless_range_loop)]

pub mod canonical;
pub mod cli;
pub mod config;
pub mod drem;
pub mod filters;
pub mod hetero;
pub mod mathkit;
pub mod observer;
pub mod plant;
pub mod sim;
pub mod verify;

use thiserror::Error as ThisError;

/// Crate-wide error type.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error("integration diverged: non-finite value in {component} at t = {t}")]
    IntegrationDiverged { component: String, t: f64 },

    #[error("simulation diverged at t = {t}: non-finite value in {component}")]
    SimulationDiverged { t: f64, component: String },

    #[error("adaptation diverged at t = {t} in the {law} law (gain {gain:e})")]
    AdaptationDiverged { t: f64, law: String, gain: f64 },

    #[error("singular matrix: |det| = {det:e} is at or below tolerance {tol:e}")]
    SingularMatrix { det: f64, tol: f64 },

    #[error("sylvester solve failed: spectra overlap (relative pivot {pivot:e})")]
    SpectraOverlap { pivot: f64 },

    #[error("matrix is not symmetric: relative skew {skew:e} exceeds 1e-9")]
    NotSymmetric { skew: f64 },

    #[error("pair (C^T, A) is not observable: |det| = {det:e}")]
    NotObservable { det: f64 },

    #[error("filter design failed: {reason}")]
    DesignFailure { reason: String },

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
