//! Input datasets: posts, the accident log and loop-detector observations.
//!
//! Posts are line-delimited JSON, the accident log and detector data are CSV.
//! All timestamps are UTC epoch seconds; detector periods are UTC hour
//! indices (`epoch_seconds / 3600`).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_TEXT_CHARS: usize = 280;

/// One geo-tagged post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    /// UTC epoch seconds.
    pub time: i64,
    pub lat: f64,
    pub lon: f64,
    pub author: String,
    pub text: String,
}

impl Tweet {
    /// UTC hour index of the posting time.
    pub fn hour(&self) -> i64 {
        self.time.div_euclid(3600)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.time <= 0 {
            return Err("time must be strictly positive".into());
        }
        check_coordinates(self.lat, self.lon)?;
        if self.text.chars().count() > MAX_TEXT_CHARS {
            return Err(format!("text longer than {MAX_TEXT_CHARS} characters"));
        }
        Ok(())
    }
}

/// Manual annotation of a post.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    NonAccident,
    Accident,
}

impl Label {
    pub fn is_accident(self) -> bool {
        matches!(self, Label::Accident)
    }

    pub fn from_bool(accident: bool) -> Self {
        if accident {
            Label::Accident
        } else {
            Label::NonAccident
        }
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        match label {
            Label::NonAccident => 0,
            Label::Accident => 1,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(value: u8) -> std::result::Result<Self, Self::Error> {
        match value {
            0 => Ok(Label::NonAccident),
            1 => Ok(Label::Accident),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTweet {
    pub tweet: Tweet,
    pub label: Label,
}

/// Wire form of one JSONL line. `label` is present only in annotated corpora.
#[derive(Serialize, Deserialize)]
struct TweetLine {
    id: String,
    time: i64,
    lat: f64,
    lon: f64,
    author: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccidentKind {
    Collision,
    DisabledVehicle,
    VehicleOnFire,
}

impl AccidentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AccidentKind::Collision => "collision",
            AccidentKind::DisabledVehicle => "disabled vehicle",
            AccidentKind::VehicleOnFire => "vehicle on fire",
        }
    }
}

impl fmt::Display for AccidentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AccidentKind {
    type Err = String;

    /// Case-insensitive; spaces, hyphens and underscores are interchangeable.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .map(|c| match c {
                '-' | '_' => ' ',
                c => c.to_ascii_lowercase(),
            })
            .collect();
        let norm = norm.split_whitespace().collect::<Vec<_>>().join(" ");
        match norm.as_str() {
            "collision" => Ok(AccidentKind::Collision),
            "disabled vehicle" => Ok(AccidentKind::DisabledVehicle),
            "vehicle on fire" => Ok(AccidentKind::VehicleOnFire),
            _ => Err(format!("unknown accident kind {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccidentRecord {
    pub kind: AccidentKind,
    pub lat: f64,
    pub lon: f64,
    /// UTC epoch seconds.
    pub start: i64,
    /// UTC epoch seconds, never before `start`.
    pub end: i64,
    pub roadway: String,
}

impl AccidentRecord {
    pub fn duration_minutes(&self) -> f64 {
        (self.end - self.start) as f64 / 60.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorObservation {
    pub detector_id: String,
    /// UTC hour index.
    pub period: i64,
    /// Fraction of time the loop is occupied, in [0, 1].
    pub occupancy: f64,
    /// Vehicles per hour.
    pub flow: f64,
    pub lat: f64,
    pub lon: f64,
}

fn check_coordinates(lat: f64, lon: f64) -> std::result::Result<(), String> {
    if !(-90.0..=90.0).contains(&lat) {
        return Err(format!("latitude out of range: {lat}"));
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(format!("longitude out of range: {lon}"));
    }
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn record_err(source: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Record {
        source_name: source.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_tweet_lines<R: BufRead>(reader: R, source: &Path) -> Result<Vec<(Tweet, Option<Label>)>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TweetLine =
            serde_json::from_str(&line).map_err(|e| record_err(source, lineno, e.to_string()))?;
        let tweet = Tweet {
            id: rec.id,
            time: rec.time,
            lat: rec.lat,
            lon: rec.lon,
            author: rec.author.to_lowercase(),
            text: rec.text,
        };
        tweet.validate().map_err(|m| record_err(source, lineno, m))?;
        if !seen.insert(tweet.id.clone()) {
            return Err(Error::invalid(format!(
                "{}: duplicate tweet id {:?} (line {lineno})",
                source.display(),
                tweet.id
            )));
        }
        out.push((tweet, rec.label));
    }
    Ok(out)
}

/// Reads posts from a JSONL stream. Any `label` key is ignored.
pub fn read_tweets<R: Read>(reader: R, source: &Path) -> Result<Vec<Tweet>> {
    Ok(read_tweet_lines(BufReader::new(reader), source)?
        .into_iter()
        .map(|(t, _)| t)
        .collect())
}

/// Reads annotated posts; every line must carry a `label` of 0 or 1.
pub fn read_labeled_tweets<R: Read>(reader: R, source: &Path) -> Result<Vec<LabeledTweet>> {
    read_tweet_lines(BufReader::new(reader), source)?
        .into_iter()
        .enumerate()
        .map(|(i, (tweet, label))| match label {
            Some(label) => Ok(LabeledTweet { tweet, label }),
            None => Err(Error::invalid(format!(
                "{}: tweet {:?} (record {}) has no label",
                source.display(),
                tweet.id,
                i + 1
            ))),
        })
        .collect()
}

pub fn load_tweets(path: &Path) -> Result<Vec<Tweet>> {
    read_tweets(open(path)?, path)
}

pub fn load_labeled_tweets(path: &Path) -> Result<Vec<LabeledTweet>> {
    read_labeled_tweets(open(path)?, path)
}

fn write_line<W: Write>(mut w: W, line: &TweetLine) -> Result<()> {
    serde_json::to_writer(&mut w, line)?;
    w.write_all(b"\n").map_err(|e| Error::io("<tweet writer>", e))
}

pub fn write_tweets<W: Write>(mut w: W, tweets: &[Tweet]) -> Result<()> {
    for t in tweets {
        write_line(&mut w, &to_line(t, None))?;
    }
    Ok(())
}

pub fn write_labeled_tweets<W: Write>(mut w: W, tweets: &[LabeledTweet]) -> Result<()> {
    for t in tweets {
        write_line(&mut w, &to_line(&t.tweet, Some(t.label)))?;
    }
    Ok(())
}

fn to_line(t: &Tweet, label: Option<Label>) -> TweetLine {
    TweetLine {
        id: t.id.clone(),
        time: t.time,
        lat: t.lat,
        lon: t.lon,
        author: t.author.clone(),
        text: t.text.clone(),
        label,
    }
}

/// Parses a UTC timestamp: integer epoch seconds, RFC 3339, or
/// `YYYY-MM-DD HH:MM[:SS]` (taken as UTC).
pub fn parse_utc(s: &str) -> std::result::Result<i64, String> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return Ok(secs);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    Err(format!("unparseable timestamp {s:?}"))
}

#[derive(Deserialize)]
struct AccidentRow {
    kind: String,
    lat: f64,
    lon: f64,
    start: String,
    end: String,
    roadway: String,
}

pub fn read_accident_log<R: Read>(reader: R, source: &Path) -> Result<Vec<AccidentRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (idx, row) in rdr.deserialize::<AccidentRow>().enumerate() {
        // header is line 1
        let lineno = idx + 2;
        let row = row.map_err(|e| record_err(source, lineno, e.to_string()))?;
        let kind = row
            .kind
            .parse::<AccidentKind>()
            .map_err(|m| record_err(source, lineno, m))?;
        check_coordinates(row.lat, row.lon).map_err(|m| record_err(source, lineno, m))?;
        let start = parse_utc(&row.start).map_err(|m| record_err(source, lineno, m))?;
        let end = parse_utc(&row.end).map_err(|m| record_err(source, lineno, m))?;
        if end < start {
            return Err(record_err(source, lineno, "accident end precedes start"));
        }
        out.push(AccidentRecord {
            kind,
            lat: row.lat,
            lon: row.lon,
            start,
            end,
            roadway: row.roadway,
        });
    }
    Ok(out)
}

pub fn load_accident_log(path: &Path) -> Result<Vec<AccidentRecord>> {
    read_accident_log(open(path)?, path)
}

pub fn write_accident_log<W: Write>(w: W, records: &[AccidentRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::invalid(format!("csv write: {e}"));
    wtr.write_record(["kind", "lat", "lon", "start", "end", "roadway"])
        .map_err(csv_err)?;
    for r in records {
        wtr.write_record([
            r.kind.as_str().to_string(),
            r.lat.to_string(),
            r.lon.to_string(),
            r.start.to_string(),
            r.end.to_string(),
            r.roadway.clone(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<accident writer>", e))
}

pub fn read_detector_obs<R: Read>(reader: R, source: &Path) -> Result<Vec<DetectorObservation>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (idx, row) in rdr.deserialize::<DetectorObservation>().enumerate() {
        let lineno = idx + 2;
        let obs = row.map_err(|e| record_err(source, lineno, e.to_string()))?;
        if !(0.0..=1.0).contains(&obs.occupancy) {
            return Err(record_err(
                source,
                lineno,
                format!("occupancy out of range [0, 1]: {}", obs.occupancy),
            ));
        }
        if !(obs.flow >= 0.0 && obs.flow.is_finite()) {
            return Err(record_err(
                source,
                lineno,
                format!("flow must be a non-negative number: {}", obs.flow),
            ));
        }
        check_coordinates(obs.lat, obs.lon).map_err(|m| record_err(source, lineno, m))?;
        out.push(obs);
    }
    Ok(out)
}

pub fn load_detector_obs(path: &Path) -> Result<Vec<DetectorObservation>> {
    read_detector_obs(open(path)?, path)
}

pub fn write_detector_obs<W: Write>(w: W, obs: &[DetectorObservation]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for o in obs {
        wtr.serialize(o)
            .map_err(|e| Error::invalid(format!("csv write: {e}")))?;
    }
    wtr.flush().map_err(|e| Error::io("<detector writer>", e))
}

/// Groups observations by detector, keeping input order within a group.
pub fn group_by_detector(
    obs: &[DetectorObservation],
) -> BTreeMap<String, Vec<DetectorObservation>> {
    let mut groups: BTreeMap<String, Vec<DetectorObservation>> = BTreeMap::new();
    for o in obs {
        groups.entry(o.detector_id.clone()).or_default().push(o.clone());
    }
    groups
}

/// Class-conditional occurrence probability of one token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSignal {
    pub token: String,
    pub p_accident: f64,
    pub p_non_accident: f64,
}

/// Generator parameters for [`synth_corpus`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub signals: Vec<TokenSignal>,
    /// Uninformative words mixed into every post.
    pub filler: Vec<String>,
    /// Each post gets between 1 and `max_filler` filler words.
    pub max_filler: usize,
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        for s in &self.signals {
            for p in [s.p_accident, s.p_non_accident] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config(format!(
                        "probability for token {:?} outside [0, 1]: {p}",
                        s.token
                    )));
                }
            }
            if s.token.is_empty() || s.token.contains(char::is_whitespace) {
                return Err(Error::config(format!("bad signal token {:?}", s.token)));
            }
        }
        if self.max_filler > 0 && self.filler.is_empty() {
            return Err(Error::config("max_filler > 0 but the filler list is empty"));
        }
        Ok(())
    }

    /// A traffic-flavoured table with a handful of strongly and weakly
    /// informative words.
    pub fn traffic_default() -> Self {
        let sig = |token: &str, p_accident, p_non_accident| TokenSignal {
            token: token.into(),
            p_accident,
            p_non_accident,
        };
        SignalSpec {
            signals: vec![
                sig("accident", 0.75, 0.02),
                sig("crash", 0.60, 0.03),
                sig("car", 0.50, 0.10),
                sig("lane", 0.40, 0.04),
                sig("police", 0.30, 0.03),
                sig("blocked", 0.35, 0.04),
                sig("traffic", 0.40, 0.20),
                sig("damage", 0.05, 0.15),
                sig("game", 0.02, 0.20),
                sig("coffee", 0.02, 0.15),
            ],
            filler: [
                "today", "morning", "road", "people", "home", "work", "sunset", "lunch", "weekend",
                "friends", "rain", "city", "music", "phone", "downtown", "park", "night", "office",
                "dinner", "shopping",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            max_filler: 4,
        }
    }
}

/// Bounding box the synthetic posts are scattered over (Northern Virginia).
const SYNTH_LAT: (f64, f64) = (38.6, 39.1);
const SYNTH_LON: (f64, f64) = (-77.6, -77.0);
/// 2014-01-01T00:00:00Z.
const SYNTH_EPOCH: i64 = 1_388_534_400;

/// Generates `n_accident` accident posts and `2 * n_accident` others.
///
/// Each signal token is included independently with its class-conditional
/// probability; filler words are appended and the bag is shuffled. Output is
/// a pure function of the arguments.
pub fn synth_corpus(seed: u64, n_accident: usize, spec: &SignalSpec) -> Result<Vec<LabeledTweet>> {
    if n_accident == 0 {
        return Err(Error::config("n_accident must be at least 1"));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut labels: Vec<Label> = std::iter::repeat_n(Label::Accident, n_accident)
        .chain(std::iter::repeat_n(Label::NonAccident, 2 * n_accident))
        .collect();
    labels.shuffle(&mut rng);

    let mut out = Vec::with_capacity(labels.len());
    for (i, label) in labels.into_iter().enumerate() {
        let mut words: Vec<&str> = Vec::new();
        for s in &spec.signals {
            let p = if label.is_accident() {
                s.p_accident
            } else {
                s.p_non_accident
            };
            if rng.gen::<f64>() < p {
                words.push(&s.token);
            }
        }
        if spec.max_filler > 0 {
            let n_fill = rng.gen_range(1..=spec.max_filler);
            for _ in 0..n_fill {
                words.push(&spec.filler[rng.gen_range(0..spec.filler.len())]);
            }
        }
        words.shuffle(&mut rng);
        let mut text = String::new();
        for w in words {
            if text.len() + w.len() + 1 > MAX_TEXT_CHARS {
                break;
            }
            if !text.is_empty() {
                text.push(' ');
            }
            text.push_str(w);
        }
        let tweet = Tweet {
            id: format!("syn{seed}-{i:06}"),
            time: SYNTH_EPOCH + rng.gen_range(0..365 * 86_400),
            lat: rng.gen_range(SYNTH_LAT.0..SYNTH_LAT.1),
            lon: rng.gen_range(SYNTH_LON.0..SYNTH_LON.1),
            author: format!("user{}", rng.gen_range(0..1000)),
            text,
        };
        out.push(LabeledTweet { tweet, label });
    }
    Ok(out)
}

/// Convenience for error messages that need a path but have only a reader.
pub fn memory_source() -> PathBuf {
    PathBuf::from("<memory>")
}
