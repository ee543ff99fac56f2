//! Detecting accident reports in geo-tagged short posts.
//!
//! The pipeline runs in six stages, one module each:
//!
//! * [`corpus`] loads and synthesizes posts, the accident log and
//!   loop-detector observations.
//! * [`textpipe`] turns posts into a binary stemmed-token database.
//! * [`featsel`] picks individual tokens by phi coefficient and token pairs
//!   by Apriori support/confidence.
//! * [`neuralnet`] trains the multi-layer perceptron and the LSTM classifier
//!   by plain backpropagation.
//! * [`evalkit`] scores classifiers with k-fold cross-validation.
//! * [`trafficval`] checks detections against an accident log and against
//!   loop-detector anomaly scores.

pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod featsel;
pub mod neuralnet;
pub mod textpipe;
pub mod trafficval;

pub use error::{Error, Result};
