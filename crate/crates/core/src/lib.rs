//! Collective-spin phase estimation toolkit.
//!
//! The crate models a polarization interferometry experiment end to end:
//! preparing few-qubit probe states ([`state`]), quantifying their metrological
//! value through the quantum Fisher information and entanglement-depth bounds
//! ([`qfi`]), propagating them through a collective phase rotation with a
//! parity-sector measurement and an optional noise model ([`interferometer`],
//! [`calibration`]), and running maximum-likelihood and Bayesian phase
//! estimation campaigns with reproducible seeding ([`estimation`],
//! [`campaign`]).
//!
//! Basis convention used throughout: the two polarization modes are labelled
//! `H -> 0` and `V -> 1`, and mode 1 occupies the most significant bit of a
//! computational-basis index.

pub mod calibration;
pub mod campaign;
pub mod error;
pub mod estimation;
pub mod interferometer;
pub mod linalg;
pub mod qfi;
pub mod state;

pub use calibration::{
    fit_calibration, synthesize_calibration, CalibrationData, CalibrationFit, FitFamily, TiltMode,
};
pub use campaign::{bayes_campaign, ml_campaign, CampaignReport, Protocol};
pub use error::{Error, Result};
pub use estimation::{
    bayes_posterior, bias_corrected_crlb, derive_seed, ml_estimate, sample_outcomes,
    BayesPosterior, BiasCurve, CorrectedCrlb, MlEstimate, ProbTable,
};
pub use interferometer::{FisherInfo, MeasurementModel, NoiseModel, ProbabilityModel};
pub use qfi::{
    classify_depth, optimize_axes, producibility_bound, qfi, qfi_pure, witness_value,
    DepthClassification, QfiResult,
};
pub use state::{evolve, fidelity, CollectiveGenerator, DensityMatrix, LocalAxis, PureState};
