//! Checks detected accident posts against an accident log and against
//! loop-detector traffic.
//!
//! Log validation map-matches each post to the nearest log record inside a
//! distance and time envelope. Detector validation builds a flow-occupancy
//! signature per detector, clusters the signatures with K-means (cluster
//! count picked by AIC), scores every observation by how far its flow sits
//! from its cluster's bin center, and aggregates the scores around each
//! post.

mod cluster;
mod matching;
mod pairing;
mod signature;
mod synth;

pub use cluster::{
    abnormal_degree, aic, fit_clusters_aic, kmeans, score_observations, select_k, AbnormalScore, ClusterFit,
    ClusterModel, KMeansResult, KMEANS_MAX_ITER, KMEANS_RESTARTS,
};
pub use matching::{map_match_log, summarize_log, LogSummary, LogValidation, MatchResult, Phase};
pub use pairing::{
    aggregate_scores, pair_tweets_detectors, summarize_traffic, Neighborhood, TrafficEntry, TrafficSummary,
    TrafficValidation,
};
pub use signature::{bin_index, build_signature, build_signatures, TrafficSignature, DEFAULT_BINS};
pub use synth::{synth_validation_data, SynthValidationSpec};

/// Mean Earth radius in statute miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.8;

/// Great-circle distance between two (lat, lon) points in degrees.
pub fn haversine_miles(p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let (lat1, lon1) = (p1.0.to_radians(), p1.1.to_radians());
    let (lat2, lon2) = (p2.0.to_radians(), p2.1.to_radians());
    let a = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_MILES * a.sqrt().min(1.0).asin()
}
