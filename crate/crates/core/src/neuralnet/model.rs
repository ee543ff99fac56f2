use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{
    lstm_classify, mlp_forward, train_lstm, train_mlp, LSTMParams, MLPParams, TrainConfig,
};
use crate::error::{Error, Result};
use crate::featsel::{select_features, FeatureSet, Thresholds};
use crate::textpipe::{build_binary_matrix, StemmedTweet, TokenList};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    /// Feedforward network over individual and paired feature bits.
    Mlp { hidden: Vec<usize> },
    /// LSTM over one-hot individual feature tokens in posting order.
    Lstm { hidden_dim: usize },
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture::Mlp {
            hidden: super::DEFAULT_HIDDEN.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Network {
    Mlp { params: MLPParams },
    Lstm { params: LSTMParams },
}

/// A trained classifier together with the feature set it reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub architecture: Architecture,
    pub train_config: TrainConfig,
    pub featureset: FeatureSet,
    pub network: Network,
    /// Majority training label; the LSTM falls back to it for posts without
    /// any selected token.
    pub majority_accident: bool,
    pub epochs: usize,
    pub final_loss: f64,
}

fn labels_of(tweets: &[StemmedTweet]) -> Result<Vec<bool>> {
    tweets
        .iter()
        .map(|t| {
            t.label
                .map(|l| l.is_accident())
                .ok_or_else(|| Error::invalid(format!("post {} has no label", t.id)))
        })
        .collect()
}

fn one_hot_sequence(index: &HashMap<&str, usize>, tokens: &TokenList) -> Vec<Vec<f64>> {
    tokens
        .iter()
        .filter_map(|t| index.get(t))
        .map(|&j| {
            let mut v = vec![0.0; index.len()];
            v[j] = 1.0;
            v
        })
        .collect()
}

fn token_index(fs: &FeatureSet) -> HashMap<&str, usize> {
    fs.individual
        .iter()
        .enumerate()
        .map(|(j, f)| (f.token.as_str(), j))
        .collect()
}

impl Model {
    /// Selects features on `train` and fits the network.
    pub fn fit(
        arch: &Architecture,
        train: &[StemmedTweet],
        thresholds: Thresholds,
        cfg: &TrainConfig,
    ) -> Result<Model> {
        let matrix = build_binary_matrix(train)?;
        let fs = select_features(&matrix, thresholds)?;
        Model::fit_with_features(arch, train, fs, cfg)
    }

    pub fn fit_with_features(
        arch: &Architecture,
        train: &[StemmedTweet],
        featureset: FeatureSet,
        cfg: &TrainConfig,
    ) -> Result<Model> {
        let y = labels_of(train)?;
        let positives = y.iter().filter(|&&l| l).count();
        let majority_accident = 2 * positives > y.len();
        let (network, trace) = match arch {
            Architecture::Mlp { hidden } => {
                let x: Vec<Vec<f64>> = train
                    .iter()
                    .map(|t| featureset.encode(t.tokens.iter()))
                    .collect();
                let t = train_mlp(&x, &y, hidden, cfg)?;
                (Network::Mlp { params: t.params }, t.loss_trace)
            }
            Architecture::Lstm { hidden_dim } => {
                let index = token_index(&featureset);
                let seqs: Vec<Vec<Vec<f64>>> = train
                    .iter()
                    .map(|t| one_hot_sequence(&index, &t.tokens))
                    .collect();
                let t = train_lstm(&seqs, &y, index.len(), *hidden_dim, cfg)?;
                (Network::Lstm { params: t.params }, t.loss_trace)
            }
        };
        Ok(Model {
            architecture: arch.clone(),
            train_config: *cfg,
            featureset,
            network,
            majority_accident,
            epochs: trace.len() - 1,
            final_loss: *trace.last().expect("trace is never empty"),
        })
    }

    /// Class probabilities `[non-accident, accident]`, or `None` when the
    /// LSTM sees no selected token.
    pub fn probabilities(&self, tokens: &TokenList) -> Result<Option<[f64; 2]>> {
        match &self.network {
            Network::Mlp { params } => {
                let fwd = mlp_forward(params, &self.featureset.encode(tokens.iter()))?;
                let out = fwd.output();
                Ok(Some([out[0], out[1]]))
            }
            Network::Lstm { params } => {
                let seq = one_hot_sequence(&token_index(&self.featureset), tokens);
                if seq.is_empty() {
                    return Ok(None);
                }
                lstm_classify(params, &seq).map(Some)
            }
        }
    }

    /// `true` = accident. Ties go to non-accident.
    pub fn predict(&self, tokens: &TokenList) -> Result<bool> {
        Ok(match self.probabilities(tokens)? {
            Some(p) => p[1] > p[0],
            None => self.majority_accident,
        })
    }

    pub fn predict_all(&self, tweets: &[StemmedTweet]) -> Result<Vec<bool>> {
        let mut fallback = 0usize;
        let mut out = Vec::with_capacity(tweets.len());
        for t in tweets {
            let p = self.probabilities(&t.tokens)?;
            if p.is_none() {
                fallback += 1;
            }
            out.push(match p {
                Some(p) => p[1] > p[0],
                None => self.majority_accident,
            });
        }
        if fallback > 0 {
            warn!("{fallback} post(s) had no selected tokens; assigned the majority class");
        }
        Ok(out)
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Model> {
        let m: Model = serde_json::from_reader(r)?;
        match &m.network {
            Network::Mlp { params } => {
                params.validate()?;
                if params.input_width() != m.featureset.n_features() {
                    return Err(Error::shape("network input width differs from feature count"));
                }
            }
            Network::Lstm { params } => {
                params.validate()?;
                if params.input_dim != m.featureset.individual.len() {
                    return Err(Error::shape("LSTM input width differs from token feature count"));
                }
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Model> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Model::read_json(std::io::BufReader::new(f))
    }
}
