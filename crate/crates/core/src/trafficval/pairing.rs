use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::cluster::AbnormalScore;
use super::haversine_miles;
use crate::corpus::Tweet;
use crate::error::{Error, Result};

/// Abnormal degrees observed around one tweet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub tweet_id: String,
    pub scores: Vec<f64>,
    pub n_detectors: usize,
    pub n_periods: usize,
}

/// Collects, per tweet, every score within `radius_miles` and within
/// `window_hours` of the tweet's hour. Both bounds are inclusive.
pub fn pair_tweets_detectors(
    tweets: &[Tweet],
    scores: &[AbnormalScore],
    radius_miles: f64,
    window_hours: f64,
) -> Result<Vec<Neighborhood>> {
    if !(radius_miles > 0.0 && radius_miles.is_finite()) {
        return Err(Error::config(format!("radius must be positive, got {radius_miles}")));
    }
    if !(window_hours > 0.0 && window_hours.is_finite()) {
        return Err(Error::config(format!("window must be positive, got {window_hours}")));
    }
    let mut by_period: BTreeMap<i64, Vec<&AbnormalScore>> = BTreeMap::new();
    for s in scores {
        by_period.entry(s.period).or_default().push(s);
    }
    let reach = window_hours.floor() as i64;
    Ok(tweets
        .iter()
        .map(|t| {
            let hour = t.hour();
            let mut values = Vec::new();
            let mut detectors = BTreeSet::new();
            let mut periods = BTreeSet::new();
            for (&period, list) in by_period.range(hour - reach..=hour + reach) {
                for s in list {
                    if haversine_miles((t.lat, t.lon), (s.lat, s.lon)) <= radius_miles {
                        values.push(s.value);
                        detectors.insert(s.detector_id.as_str());
                        periods.insert(period);
                    }
                }
            }
            Neighborhood {
                tweet_id: t.id.clone(),
                scores: values,
                n_detectors: detectors.len(),
                n_periods: periods.len(),
            }
        })
        .collect())
}

/// Mean and 75th percentile (linear interpolation at rank `(n - 1) * 0.75`).
pub fn aggregate_scores(scores: &[f64]) -> Result<(f64, f64)> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty neighborhood"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let mean = (sorted.iter().sum::<f64>() / sorted.len() as f64).clamp(lo, hi);
    let rank = (sorted.len() - 1) as f64 * 0.75;
    let i = rank.floor() as usize;
    let frac = rank - i as f64;
    let q3 = if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    };
    Ok((mean, q3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficEntry {
    pub tweet_id: String,
    pub qualified: bool,
    pub p_traffic: Option<f64>,
    pub q_traffic: Option<f64>,
    pub n_detectors: usize,
    pub n_periods: usize,
}

impl TrafficEntry {
    pub fn from_neighborhood(n: &Neighborhood) -> TrafficEntry {
        let agg = aggregate_scores(&n.scores).ok();
        TrafficEntry {
            tweet_id: n.tweet_id.clone(),
            qualified: agg.is_some(),
            p_traffic: agg.map(|a| a.0),
            q_traffic: agg.map(|a| a.1),
            n_detectors: n.n_detectors,
            n_periods: n.n_periods,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSummary {
    pub n_tweets: usize,
    pub n_qualified: usize,
    pub probability_cut: f64,
    /// Share of qualified tweets with `q_traffic >= probability_cut`.
    pub q_at_or_above_cut: Option<f64>,
    pub p_at_or_above_cut: Option<f64>,
    /// `(cut, share of qualified tweets with q_traffic >= cut)` for cuts
    /// 0.50, 0.55, ..., 1.00.
    pub q_exceedance: Vec<(f64, f64)>,
}

pub fn summarize_traffic(entries: &[TrafficEntry], probability_cut: f64) -> Result<TrafficSummary> {
    if !(0.0..=1.0).contains(&probability_cut) {
        return Err(Error::config(format!("probability cut {probability_cut} outside [0, 1]")));
    }
    let q: Vec<f64> = entries.iter().filter_map(|e| e.q_traffic).collect();
    let p: Vec<f64> = entries.iter().filter_map(|e| e.p_traffic).collect();
    let share = |v: &[f64], cut: f64| v.iter().filter(|&&x| x >= cut).count() as f64 / v.len() as f64;
    Ok(TrafficSummary {
        n_tweets: entries.len(),
        n_qualified: q.len(),
        probability_cut,
        q_at_or_above_cut: (!q.is_empty()).then(|| share(&q, probability_cut)),
        p_at_or_above_cut: (!p.is_empty()).then(|| share(&p, probability_cut)),
        q_exceedance: if q.is_empty() {
            Vec::new()
        } else {
            (0..=10)
                .map(|i| {
                    let cut = 0.5 + 0.05 * i as f64;
                    (cut, share(&q, cut))
                })
                .collect()
        },
    })
}

/// Detector validation artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficValidation {
    pub radius_miles: f64,
    pub window_hours: f64,
    pub n_bins: usize,
    pub k: usize,
    pub aic_trace: Vec<f64>,
    pub skipped_observations: usize,
    pub summary: TrafficSummary,
    pub entries: Vec<TrafficEntry>,
}
