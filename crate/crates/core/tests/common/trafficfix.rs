//! Hand-built traffic fixtures shared by the integration and acceptance
//! tests.

use std::collections::BTreeMap;

use crashtweet_core::corpus::{AccidentKind, AccidentRecord, DetectorObservation, Tweet};
use crashtweet_core::trafficval::{Phase, EARTH_RADIUS_MILES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const T0: i64 = 1_400_000_000;

fn north(lat: f64, miles: f64) -> f64 {
    lat + miles * 180.0 / (std::f64::consts::PI * EARTH_RADIUS_MILES)
}

fn east(lat: f64, lon: f64, miles: f64) -> f64 {
    lon + miles * 180.0 / (std::f64::consts::PI * EARTH_RADIUS_MILES * lat.to_radians().cos())
}

fn tweet(id: &str, lat: f64, lon: f64, time: i64) -> Tweet {
    Tweet {
        id: id.into(),
        time,
        lat,
        lon,
        author: "u".into(),
        text: "accident".into(),
    }
}

fn record(lat: f64, lon: f64, start: i64, end: i64, roadway: &str) -> AccidentRecord {
    AccidentRecord {
        kind: AccidentKind::Collision,
        lat,
        lon,
        start,
        end,
        roadway: roadway.into(),
    }
}

/// Ten tweets, five records and the expected (record index, phase) per
/// tweet at 4 miles / 1 hour.
pub fn match_fixture() -> (Vec<Tweet>, Vec<AccidentRecord>, Vec<(Option<usize>, Phase)>) {
    let (lat0, lon0) = (38.80, -77.40);
    let log = vec![
        record(lat0, lon0, T0, T0 + 3600, "I-66"),
        record(north(lat0, 6.0), lon0, T0 + 10_000, T0 + 13_600, "I-95"),
        record(38.80, -77.00, T0, T0 + 1800, "I-495"),
        record(38.80, -77.00, T0, T0 + 1800, "I-395"),
        record(38.60, -77.20, T0 + 50_000, T0 + 52_000, "US-50"),
    ];
    // a hair under 4 miles so the boundary case does not hinge on the last ulp
    let four = 4.0 * (1.0 - 1e-12);
    let tweets = vec![
        tweet("t0", lat0, east(lat0, lon0, 1.8), T0 + 120),
        tweet("t1", north(lat0, 0.5), lon0, T0 - 660),
        tweet("t2", north(lat0, four), lon0, T0 + 1800),
        tweet("t3", north(lat0, 4.01), lon0, T0),
        tweet("t4", lat0, lon0, T0 + 3600 + 3600),
        tweet("t5", lat0, lon0, T0 + 3600 + 3601),
        tweet("t6", lat0, lon0, T0 - 3600),
        tweet("t7", 38.80, -77.00, T0 + 600),
        tweet("t8", 38.60, east(38.60, -77.20, 5.0), T0 + 51_000),
        tweet("t9", north(lat0, 2.5), lon0, T0 + 7000),
    ];
    let expected = vec![
        (Some(0), Phase::During),
        (Some(0), Phase::Before),
        (Some(0), Phase::During),
        (None, Phase::Unmatched),
        (Some(0), Phase::After),
        (None, Phase::Unmatched),
        (Some(0), Phase::Before),
        (Some(3), Phase::During),
        (None, Phase::Unmatched),
        (Some(0), Phase::After),
    ];
    (tweets, log, expected)
}

/// Two groups of detectors whose per-bin flow centers differ by at least
/// `separation` noise standard deviations in every bin. Returns the
/// observations and the planted group of each detector.
pub fn two_blobs(
    seed: u64,
    per_blob: usize,
    n_bins: usize,
    separation: f64,
) -> (BTreeMap<String, Vec<DetectorObservation>>, BTreeMap<String, usize>) {
    const SIGMA: f64 = 40.0;
    let noise = Normal::new(0.0, SIGMA).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by = BTreeMap::new();
    let mut truth = BTreeMap::new();
    for blob in 0..2 {
        for d in 0..per_blob {
            let id = format!("b{blob}-d{d:03}");
            let mut obs = Vec::new();
            for bin in 0..n_bins {
                let occupancy = (bin as f64 + 0.5) / n_bins as f64;
                let base = 1500.0 + 2000.0 * (1.0 - (2.0 * occupancy - 0.4).abs());
                let center = base + blob as f64 * separation * SIGMA;
                for rep in 0..3 {
                    obs.push(DetectorObservation {
                        detector_id: id.clone(),
                        period: (bin * 3 + rep) as i64,
                        occupancy,
                        flow: center + noise.sample(&mut rng),
                        lat: 38.9,
                        lon: -77.0,
                    });
                }
            }
            by.insert(id.clone(), obs);
            truth.insert(id, blob);
        }
    }
    (by, truth)
}
