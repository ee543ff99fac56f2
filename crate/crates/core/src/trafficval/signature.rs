use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::DetectorObservation;
use crate::error::{Error, Result};

/// Default number of occupancy bins.
pub const DEFAULT_BINS: usize = 20;

/// Bin `j` covers `[j/N, (j+1)/N)`; the last bin also takes occupancy 1.
pub fn bin_index(occupancy: f64, n_bins: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&occupancy) {
        return Err(Error::invalid(format!("occupancy {occupancy} outside [0, 1]")));
    }
    Ok(((occupancy * n_bins as f64).floor() as usize).min(n_bins - 1))
}

/// Per-bin median flow of one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficSignature {
    pub detector_id: String,
    pub lat: f64,
    pub lon: f64,
    /// `None` for bins without observations.
    pub median_flow: Vec<Option<f64>>,
    /// Median over all of the detector's observations.
    pub overall_median: f64,
}

impl TrafficSignature {
    pub fn n_bins(&self) -> usize {
        self.median_flow.len()
    }

    /// Missing bins filled with the detector's overall median flow.
    pub fn imputed(&self) -> Vec<f64> {
        self.median_flow
            .iter()
            .map(|m| m.unwrap_or(self.overall_median))
            .collect()
    }
}

/// Median with the mean-of-middle-two rule. `values` must be nonempty.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn build_signature(observations: &[DetectorObservation], n_bins: usize) -> Result<TrafficSignature> {
    if n_bins < 2 {
        return Err(Error::config(format!("n_bins must be >= 2, got {n_bins}")));
    }
    let first = observations
        .first()
        .ok_or_else(|| Error::invalid("detector has no observations"))?;
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for o in observations {
        if o.detector_id != first.detector_id {
            return Err(Error::invalid(format!(
                "observations of {} and {} mixed in one signature",
                first.detector_id, o.detector_id
            )));
        }
        if !o.flow.is_finite() {
            return Err(Error::invalid(format!("non-finite flow at detector {}", o.detector_id)));
        }
        bins[bin_index(o.occupancy, n_bins)?].push(o.flow);
    }
    let mut all: Vec<f64> = observations.iter().map(|o| o.flow).collect();
    Ok(TrafficSignature {
        detector_id: first.detector_id.clone(),
        lat: first.lat,
        lon: first.lon,
        median_flow: bins
            .iter_mut()
            .map(|b| (!b.is_empty()).then(|| median(b)))
            .collect(),
        overall_median: median(&mut all),
    })
}

/// One signature per detector, in detector id order.
pub fn build_signatures(
    by_detector: &BTreeMap<String, Vec<DetectorObservation>>,
    n_bins: usize,
) -> Result<Vec<TrafficSignature>> {
    by_detector
        .values()
        .map(|obs| build_signature(obs, n_bins))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(occupancy: f64, flow: f64) -> DetectorObservation {
        DetectorObservation {
            detector_id: "d1".into(),
            period: 0,
            occupancy,
            flow,
            lat: 38.9,
            lon: -77.2,
        }
    }

    #[test]
    fn bin_boundaries() {
        assert_eq!(bin_index(0.0, 20).unwrap(), 0);
        assert_eq!(bin_index(0.05, 20).unwrap(), 1);
        assert_eq!(bin_index(0.0499, 20).unwrap(), 0);
        assert_eq!(bin_index(1.0, 20).unwrap(), 19);
        assert!(bin_index(1.01, 20).is_err());
        assert!(bin_index(f64::NAN, 20).is_err());
    }

    #[test]
    fn medians_per_bin() {
        let s = build_signature(&[obs(0.1, 100.0), obs(0.11, 300.0), obs(0.12, 200.0)], 10).unwrap();
        assert_eq!(s.median_flow[1], Some(200.0));
        assert_eq!(s.median_flow[0], None);
        let s = build_signature(&[obs(0.1, 100.0), obs(0.1, 200.0)], 10).unwrap();
        assert_eq!(s.median_flow[1], Some(150.0));
        let s = build_signature(&[obs(1.0, 50.0)], 4).unwrap();
        assert_eq!(s.median_flow[3], Some(50.0));
    }

    #[test]
    fn imputation_uses_overall_median() {
        let s = build_signature(&[obs(0.1, 100.0), obs(0.9, 300.0), obs(0.95, 500.0)], 2).unwrap();
        assert_eq!(s.median_flow, vec![Some(100.0), Some(400.0)]);
        assert_eq!(s.overall_median, 300.0);
        let s = build_signature(&[obs(0.1, 100.0), obs(0.2, 300.0)], 2).unwrap();
        assert_eq!(s.imputed(), vec![200.0, 200.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_signature(&[], 20).is_err());
        assert!(build_signature(&[obs(0.1, 1.0)], 1).is_err());
        let mut other = obs(0.1, 1.0);
        other.detector_id = "d2".into();
        assert!(build_signature(&[obs(0.1, 1.0), other], 20).is_err());
    }
}
