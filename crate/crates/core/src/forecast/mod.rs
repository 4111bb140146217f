//! Probabilistic multi-step forecasting of the discourse state.
//!
//! A small encoder-decoder transformer reads a window of MI-selected
//! features plus target lags and emits Student-t parameters for every target
//! and step of the horizon in one pass.

mod checkpoint;
mod config;
mod forecaster;
mod model;
mod selection;
mod studentt;
pub mod tape;
mod train;
pub mod windows;

pub use checkpoint::{content_hash, CHECKPOINT_EXTENSION, CHECKPOINT_VERSION};
pub use config::ModelConfig;
pub use forecaster::{
    covariate_names, default_targets, event_categories, ForecastResult, Forecaster, StepForecast, TargetForecast,
    MODEL_VERSION,
};
pub use model::{positional_encoding, DropoutStream, ModelDims, ParamStore, Transformer};
pub use selection::{select_features_mi, FeatureScore, MIN_SELECTION_DAYS, MI_BINS};
pub use studentt::{standard_cdf, standard_quantile, NllGradient, StudentTParams, QUANTILE_LEVELS};
pub use train::{train, EpochMetrics, SelectedFeature, TrainReport, MIN_TRAINING_WINDOWS};
