//! Ship deck motion synthesis and one-step-ahead prediction.
//!
//! The crate covers the whole pipeline: sine-superposition motion models
//! for heave, pitch and roll ([`wavegen`]), uniform sampling and sliding
//! windows ([`series`]), a composite single-layer LSTM predicting all three
//! channels jointly ([`lstm`]), mini-batch training and persistence
//! ([`train`]), absolute-error evaluation ([`evaluate`]) and detection of
//! quiescent landing windows ([`rest`]).

pub mod error;
pub mod evaluate;
pub mod lstm;
pub mod plot;
pub mod rest;
pub mod series;
pub mod train;
pub mod wavegen;

pub use error::{Error, Result};
pub use evaluate::{error_report, predict_series, predict_series_with, ErrorReport, ForecastResult};
pub use lstm::{Gradients, LstmConfig, LstmParams, LstmState};
pub use rest::{detect_rest_periods, rest_periods_from_forecast, RestCriteria, RestInterval};
pub use series::{MotionSeries, Normalizer, SplitDataset, WindowedDataset};
pub use train::{load_model, save_model, train, ModelArtifact, Optimizer, TrainConfig, TrainReport};
pub use wavegen::{Channel, SeaStateSpec, SineComponent, WaveModel};

/// One tri-channel sample in `[heave, pitch, roll]` order.
pub type Sample = [f64; 3];

/// Number of motion channels modelled.
pub const CHANNELS: usize = 3;
