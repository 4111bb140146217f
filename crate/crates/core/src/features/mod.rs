//! Daily discourse features: volume, emotion, themes, key events, calendar.
//!
//! Each submodule holds the per-day kernels; [`state`] fixes the flat layout
//! the forecaster consumes and persists it as a feature store.

pub mod calendar;
pub mod emotion;
pub mod events;
pub mod state;
pub mod thematic;
pub mod volume;

pub use calendar::{calendar_features, CalendarFeatures};
pub use emotion::{
    assign_emotion_bin, emotion_aggregates, emotion_bin_distribution, emotion_correlations, emotion_dispersion,
    CorrelationMatrix, EmotionAggregates, DEFAULT_CORRELATION_WINDOW, EMOTION_BINS, EMOTION_BIN_NAMES,
};
pub use events::{
    category_index, encode_key_events, read_event_table, write_event_table, KeyEvent, KeyEventEncoding, EVENT_COLUMNS,
    IMPACT_LEVELS,
};
pub use state::{
    assemble_discourse_state, DayComponents, DiscourseState, EmotionDay, EmotionLayout, FeatureBlock, FeatureManifest,
    FeatureRecord, FeatureSeries, ManifestEntry, PlatformVolume, VolumeFeatures,
};
pub use thematic::{
    aggregate_thematic_distribution, centroid, compute_topic_centroids, content_thematic_profile, default_taxonomy,
    distance_bin, dominant_bins, keyphrase_topic_distance, topic_mi_matrix, topic_mutual_information, topic_slug,
    ThemeMatrix, TopicSpec, DISTANCE_BINS, DISTANCE_BIN_NAMES,
};
pub use volume::{
    compute_platform_volume, platform_distribution_index, smooth_volume, smoothing_weights, volume_derivatives,
    VolumeDerivatives, WeightedItem, DEFAULT_BASELINE_WINDOW, DEFAULT_SMOOTHING_DECAY, DEFAULT_SMOOTHING_WINDOW,
};
