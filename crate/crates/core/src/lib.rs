//! Split conformal prediction for classifiers, with certified bounds on the
//! model uncertainty implied by each prediction set.
//!
//! The pipeline is post-hoc: it consumes probability vectors produced by any
//! classifier.
//!
//! 1. [`nonconformity`] scores each calibration example (LAC, APS, RAPS).
//! 2. [`calibration`] takes the finite-sample conformal quantile `q_hat`.
//! 3. [`sets`] builds prediction sets `{y : s(x, y) <= q_hat}`.
//! 4. [`uncertainty`] turns a set of size `m` into a pure uncertainty and
//!    lower/upper bounds on the model uncertainty.
//!
//! [`harness`] checks the coverage guarantee by simulation, [`figures`] emits
//! bound curves, and [`cli`] wires everything to the `cpuq` binary.
//!
//! Numeric code is generic over the scalar type: [`Real`] for probability
//! work (`f32`, `f64`) and [`BoundScalar`] for the bound algebra, which also
//! accepts exact rationals. The aliases below fix the common choices.

pub mod calibration;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod figures;
pub mod harness;
pub mod io;
pub mod nonconformity;
pub mod rng;
pub mod scalar;
pub mod sets;
pub mod uncertainty;

pub use calibration::{
    calibrate, conformal_quantile, CalibrationResult, CoverageErrorLevel, Threshold,
};
pub use dataset::{LabeledProbabilityDataset, LabeledRow, ProbabilityVector};
pub use error::{Error, Result};
pub use nonconformity::{score_aps, score_batch, score_lac, score_raps, ScoreConfig, ScoreKind};
pub use scalar::{BoundScalar, Real};
pub use sets::{build_set_generic, build_set_threshold, predict_batch, PredictionSet};
pub use uncertainty::{
    pure_uncertainty, quantify, quantify_batch, uncertainty_variation, UncertaintyQuantification,
};

pub type Dataset = LabeledProbabilityDataset<f64>;
pub type Probabilities = ProbabilityVector<f64>;
pub type Calibration = CalibrationResult<f64>;
pub type Scores = ScoreConfig<f64>;
pub type Quantification = UncertaintyQuantification<f64>;
pub type Dataset32 = LabeledProbabilityDataset<f32>;
pub type Calibration32 = CalibrationResult<f32>;

/// Exact rational arithmetic for the bound algebra.
pub type Rational = num_rational::Rational64;
pub type ExactQuantification = UncertaintyQuantification<Rational>;
