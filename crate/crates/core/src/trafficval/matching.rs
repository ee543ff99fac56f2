use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::haversine_miles;
use crate::corpus::{AccidentRecord, Tweet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Before,
    During,
    After,
    Unmatched,
}

impl Phase {
    fn of(time: i64, record: &AccidentRecord) -> Phase {
        if time < record.start {
            Phase::Before
        } else if time <= record.end {
            Phase::During
        } else {
            Phase::After
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub tweet_id: String,
    /// Index into the accident log.
    pub record_index: Option<usize>,
    pub record: Option<AccidentRecord>,
    pub distance_miles: Option<f64>,
    /// Tweet time minus record start.
    pub time_offset_minutes: Option<f64>,
    pub phase: Phase,
}

impl MatchResult {
    pub fn is_matched(&self) -> bool {
        self.record_index.is_some()
    }
}

/// Matches each tweet to the nearest log record within `max_miles` whose
/// `[start - max_hours, end + max_hours]` envelope contains the tweet time.
/// Both bounds are inclusive. Equal distances go to the earlier start, then
/// the smaller roadway name.
pub fn map_match_log(
    tweets: &[Tweet],
    log: &[AccidentRecord],
    max_miles: f64,
    max_hours: f64,
) -> Result<Vec<MatchResult>> {
    if !(max_miles > 0.0 && max_miles.is_finite()) {
        return Err(Error::config(format!("max_miles must be positive, got {max_miles}")));
    }
    if !(max_hours > 0.0 && max_hours.is_finite()) {
        return Err(Error::config(format!("max_hours must be positive, got {max_hours}")));
    }
    let slack = max_hours * 3600.0;
    Ok(tweets
        .iter()
        .map(|t| {
            let mut best: Option<(usize, f64)> = None;
            for (i, r) in log.iter().enumerate() {
                let time = t.time as f64;
                if time < r.start as f64 - slack || time > r.end as f64 + slack {
                    continue;
                }
                let d = haversine_miles((t.lat, t.lon), (r.lat, r.lon));
                if d > max_miles {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((j, bd)) => {
                        let b = &log[j];
                        d.total_cmp(&bd)
                            .then(r.start.cmp(&b.start))
                            .then_with(|| r.roadway.cmp(&b.roadway))
                            == Ordering::Less
                    }
                };
                if better {
                    best = Some((i, d));
                }
            }
            match best {
                Some((i, d)) => {
                    let r = &log[i];
                    MatchResult {
                        tweet_id: t.id.clone(),
                        record_index: Some(i),
                        record: Some(r.clone()),
                        distance_miles: Some(d),
                        time_offset_minutes: Some((t.time - r.start) as f64 / 60.0),
                        phase: Phase::of(t.time, r),
                    }
                }
                None => MatchResult {
                    tweet_id: t.id.clone(),
                    record_index: None,
                    record: None,
                    distance_miles: None,
                    time_offset_minutes: None,
                    phase: Phase::Unmatched,
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSummary {
    pub n_tweets: usize,
    pub n_matched: usize,
    pub matched_fraction: f64,
    pub mean_distance_miles: Option<f64>,
    pub mean_abs_offset_minutes: Option<f64>,
    pub before: usize,
    pub during: usize,
    pub after: usize,
    /// Phase fractions among matched tweets.
    pub before_fraction: Option<f64>,
    pub during_fraction: Option<f64>,
    pub after_fraction: Option<f64>,
    /// Matched tweets posted by influential accounts, when known.
    pub influential_matched: Option<usize>,
}

/// `influential[i]` flags whether `matches[i]` came from an influential
/// account; pass `None` when unknown.
pub fn summarize_log(matches: &[MatchResult], influential: Option<&[bool]>) -> Result<LogSummary> {
    if let Some(flags) = influential {
        if flags.len() != matches.len() {
            return Err(Error::shape(format!(
                "{} influential flags for {} matches",
                flags.len(),
                matches.len()
            )));
        }
    }
    let matched: Vec<&MatchResult> = matches.iter().filter(|m| m.is_matched()).collect();
    let n_matched = matched.len();
    let count = |p: Phase| matched.iter().filter(|m| m.phase == p).count();
    let (before, during, after) = (count(Phase::Before), count(Phase::During), count(Phase::After));
    let frac = |c: usize| (n_matched > 0).then(|| c as f64 / n_matched as f64);
    let mean = |f: &dyn Fn(&MatchResult) -> f64| {
        (n_matched > 0).then(|| matched.iter().map(|m| f(m)).sum::<f64>() / n_matched as f64)
    };
    Ok(LogSummary {
        n_tweets: matches.len(),
        n_matched,
        matched_fraction: if matches.is_empty() {
            0.0
        } else {
            n_matched as f64 / matches.len() as f64
        },
        mean_distance_miles: mean(&|m| m.distance_miles.unwrap_or(0.0)),
        mean_abs_offset_minutes: mean(&|m| m.time_offset_minutes.unwrap_or(0.0).abs()),
        before,
        during,
        after,
        before_fraction: frac(before),
        during_fraction: frac(during),
        after_fraction: frac(after),
        influential_matched: influential.map(|flags| {
            matches
                .iter()
                .zip(flags)
                .filter(|(m, &f)| f && m.is_matched())
                .count()
        }),
    })
}

/// Log validation artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogValidation {
    pub max_miles: f64,
    pub max_hours: f64,
    pub summary: LogSummary,
    pub matches: Vec<MatchResult>,
}
