use std::collections::BTreeMap;
use std::io::Write;

use log::warn;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::signature::{bin_index, build_signatures, TrafficSignature};
use crate::corpus::DetectorObservation;
use crate::error::{Error, Result};

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_RESTARTS: usize = 10;
/// Relative AIC improvement below which adding a cluster stops paying off.
pub const AIC_STOP_CHANGE: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub wcss: f64,
    /// Within-cluster sum of squares after every assignment step of the
    /// winning restart.
    pub wcss_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    while centroids.len() < k {
        let d: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, &di) in d.iter().enumerate() {
                if r < di {
                    idx = i;
                    break;
                }
                r -= di;
            }
            idx
        } else {
            rng.gen_range(0..points.len())
        };
        centroids.push(points[pick].clone());
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> KMeansResult {
    let dim = points[0].len();
    let mut assignment = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        let mut wcss = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(p, &centroids);
            wcss += d;
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }
        trace.push(wcss);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (p, &j) in points.iter().zip(&assignment) {
            counts[j] += 1;
            sums[j].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for (j, c) in centroids.iter_mut().enumerate() {
            // an empty cluster keeps its previous center
            if counts[j] > 0 {
                *c = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
    }
    let wcss = points
        .iter()
        .zip(&assignment)
        .map(|(p, &j)| sq_dist(p, &centroids[j]))
        .sum();
    KMeansResult {
        centroids,
        assignment,
        wcss,
        wcss_trace: trace,
    }
}

/// Best of [`KMEANS_RESTARTS`] seeded k-means++ runs by final WCSS.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansResult> {
    if k < 1 || k > points.len() {
        return Err(Error::config(format!("k = {k} outside 1..={}", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::shape("points of different dimension"));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..KMEANS_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds.next_u64());
        let run = lloyd(points, plus_plus_init(points, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// `m ln(WCSS/m) + 2kd`. WCSS/m is floored at the smallest positive normal
/// double so a perfect fit stays finite.
pub fn aic(wcss: f64, m: usize, k: usize, d: usize) -> f64 {
    let m_f = m as f64;
    m_f * (wcss / m_f).max(f64::MIN_POSITIVE).ln() + 2.0 * (k * d) as f64
}

/// Cluster count from an AIC trace (`trace[i]` is the AIC at `k = i + 1`):
/// `k - 1` for the first `k` whose relative improvement over `k - 1` falls
/// below 3%, else the largest `k` tried.
pub fn select_k(trace: &[f64]) -> usize {
    for k in 2..=trace.len() {
        let (prev, cur) = (trace[k - 2], trace[k - 1]);
        let gain = prev - cur;
        let rel = if prev != 0.0 {
            gain / prev.abs()
        } else if gain > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        if rel < AIC_STOP_CHANGE {
            return k - 1;
        }
    }
    trace.len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFit {
    pub k: usize,
    /// Detector id to cluster index.
    pub assignment: BTreeMap<String, usize>,
    pub centroids: Vec<Vec<f64>>,
    /// AIC at k = 1, 2, ... up to the first k that triggered the stop rule.
    pub aic_trace: Vec<f64>,
    pub wcss_trace: Vec<f64>,
}

/// K-means over imputed signatures for k = 1, 2, ..., stopping once the
/// AIC rule fires or `k_max` is reached.
pub fn fit_clusters_aic(signatures: &[TrafficSignature], k_max: usize, seed: u64) -> Result<ClusterFit> {
    if k_max < 1 {
        return Err(Error::config("k_max must be >= 1"));
    }
    if signatures.len() < 2 {
        return Err(Error::invalid("clustering needs at least 2 detectors"));
    }
    let points: Vec<Vec<f64>> = signatures.iter().map(|s| s.imputed()).collect();
    let (m, d) = (points.len(), points[0].len());
    let k_cap = k_max.min(m);
    let mut runs = Vec::new();
    let mut aic_trace = Vec::new();
    for k in 1..=k_cap {
        let run = kmeans(&points, k, seed.wrapping_add(k as u64))?;
        aic_trace.push(aic(run.wcss, m, k, d));
        runs.push(run);
        if k >= 2 && select_k(&aic_trace) < k {
            break;
        }
    }
    let k = select_k(&aic_trace);
    let chosen = &runs[k - 1];
    Ok(ClusterFit {
        k,
        assignment: signatures
            .iter()
            .zip(&chosen.assignment)
            .map(|(s, &j)| (s.detector_id.clone(), j))
            .collect(),
        centroids: chosen.centroids.clone(),
        wcss_trace: runs.iter().map(|r| r.wcss).collect(),
        aic_trace,
    })
}

/// Standard normal CDF of `|z|` for `z = (flow - center) / spread`.
///
/// Capped just below 1 so the value stays in `[0.5, 1)` when the tail
/// rounds away.
pub fn abnormal_degree(flow: f64, center: f64, spread: f64) -> Result<f64> {
    if spread == 0.0 {
        return Err(Error::invalid("degenerate bin spread"));
    }
    if !(spread > 0.0 && spread.is_finite() && flow.is_finite() && center.is_finite()) {
        return Err(Error::invalid(format!(
            "bad score inputs: flow {flow}, center {center}, spread {spread}"
        )));
    }
    let z = ((flow - center) / spread).abs();
    let p = 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
    Ok(p.min(1.0 - f64::EPSILON / 2.0))
}

/// Clusters plus per-cluster, per-bin flow statistics over the raw
/// observations of member detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub n_bins: usize,
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
    /// `centers[i][o]`: mean flow of cluster `i` in occupancy bin `o`.
    pub centers: Vec<Vec<Option<f64>>>,
    /// Population standard deviation matching `centers`.
    pub spreads: Vec<Vec<Option<f64>>>,
    pub aic_trace: Vec<f64>,
    pub wcss_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn fit(
        by_detector: &BTreeMap<String, Vec<DetectorObservation>>,
        n_bins: usize,
        k_max: usize,
        seed: u64,
    ) -> Result<ClusterModel> {
        let signatures = build_signatures(by_detector, n_bins)?;
        let fit = fit_clusters_aic(&signatures, k_max, seed)?;
        let mut flows: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n_bins]; fit.k];
        for (id, obs) in by_detector {
            let c = fit.assignment[id];
            for o in obs {
                flows[c][bin_index(o.occupancy, n_bins)?].push(o.flow);
            }
        }
        let mut centers = Vec::with_capacity(fit.k);
        let mut spreads = Vec::with_capacity(fit.k);
        for cluster in &flows {
            let (c, s): (Vec<_>, Vec<_>) = cluster
                .iter()
                .map(|v| {
                    if v.is_empty() {
                        return (None, None);
                    }
                    let n = v.len() as f64;
                    let mean = v.iter().sum::<f64>() / n;
                    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                    (Some(mean), Some(var.sqrt()))
                })
                .unzip();
            centers.push(c);
            spreads.push(s);
        }
        Ok(ClusterModel {
            n_bins,
            k: fit.k,
            assignment: fit.assignment,
            centers,
            spreads,
            aic_trace: fit.aic_trace,
            wcss_trace: fit.wcss_trace,
        })
    }

    /// Abnormal degree of one observation against its detector's cluster.
    pub fn score(&self, detector_id: &str, flow: f64, occupancy: f64) -> Result<f64> {
        let c = *self
            .assignment
            .get(detector_id)
            .ok_or_else(|| Error::invalid(format!("detector {detector_id} is not in the cluster model")))?;
        let o = bin_index(occupancy, self.n_bins)?;
        match (self.centers[c][o], self.spreads[c][o]) {
            (Some(center), Some(spread)) => abnormal_degree(flow, center, spread),
            _ => Err(Error::invalid(format!("missing bin {o} in cluster {c}"))),
        }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbnormalScore {
    pub detector_id: String,
    pub period: i64,
    pub value: f64,
    pub lat: f64,
    pub lon: f64,
}

/// Scores every observation. Observations that cannot be scored (unknown
/// detector, empty or zero-spread bin) are skipped and counted.
pub fn score_observations(model: &ClusterModel, observations: &[DetectorObservation]) -> (Vec<AbnormalScore>, usize) {
    let mut out = Vec::with_capacity(observations.len());
    let mut skipped = 0;
    for o in observations {
        match model.score(&o.detector_id, o.flow, o.occupancy) {
            Ok(value) => out.push(AbnormalScore {
                detector_id: o.detector_id.clone(),
                period: o.period,
                value,
                lat: o.lat,
                lon: o.lon,
            }),
            Err(_) => skipped += 1,
        }
    }
    if skipped > 0 {
        warn!("{skipped} detector observation(s) could not be scored");
    }
    (out, skipped)
}
