//! Pipeline configuration.
//!
//! Values come from built-in defaults, then the TOML config file, then
//! command-line flags. `--set section.key=value` reaches any key.

use std::path::{Path, PathBuf};

use crashtweet_core::featsel::Thresholds;
use crashtweet_core::neuralnet::{Architecture, TrainConfig, DEFAULT_HIDDEN};
use crashtweet_core::textpipe::{Lexicons, WordSet};
use crashtweet_core::trafficval::{SynthValidationSpec, DEFAULT_BINS};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub paths: Paths,
    pub synth: SynthSection,
    pub preprocess: PreprocessSection,
    pub featsel: FeatselSection,
    pub train: TrainSection,
    pub evaluate: EvaluateSection,
    pub validation: ValidationSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            out_dir: PathBuf::from("out"),
            paths: Paths::default(),
            synth: SynthSection::default(),
            preprocess: PreprocessSection::default(),
            featsel: FeatselSection::default(),
            train: TrainSection::default(),
            evaluate: EvaluateSection::default(),
            validation: ValidationSection::default(),
        }
    }
}

/// Input files. Unset data paths default to the matching file in `out_dir`
/// (where `synth` writes them); unset word lists use the built-in ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub tweets: Option<PathBuf>,
    pub accident_log: Option<PathBuf>,
    pub detectors: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub influential: Option<PathBuf>,
    pub hashtags: Option<PathBuf>,
    pub misspellings: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    /// Accident posts; twice as many non-accident posts are generated.
    pub n_accident: usize,
    pub record_fraction: f64,
    pub extra_records: usize,
    pub detectors_per_tweet: usize,
    pub span_hours: i64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let v = SynthValidationSpec::default();
        SynthSection {
            n_accident: 200,
            record_fraction: v.record_fraction,
            extra_records: v.extra_records,
            detectors_per_tweet: v.detectors_per_tweet,
            span_hours: v.span_hours,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub keyword_filter: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatselSection {
    pub phi_min: f64,
    pub supp_min: f64,
    pub conf_min: f64,
}

impl Default for FeatselSection {
    fn default() -> Self {
        let t = Thresholds::default();
        FeatselSection {
            phi_min: t.phi_min,
            supp_min: t.supp_min,
            conf_min: t.conf_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchKind {
    Mlp,
    Lstm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub architecture: ArchKind,
    /// MLP hidden layer widths.
    pub hidden: Vec<usize>,
    pub lstm_hidden: usize,
    pub alpha: f64,
    pub loss_threshold: f64,
    pub max_epochs: usize,
    pub init_scale: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            architecture: ArchKind::Mlp,
            hidden: DEFAULT_HIDDEN.to_vec(),
            lstm_hidden: 8,
            alpha: t.alpha,
            loss_threshold: t.loss_threshold,
            max_epochs: t.max_epochs,
            init_scale: t.init_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub folds: usize,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection { folds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSection {
    pub log_max_miles: f64,
    pub log_max_hours: f64,
    pub detector_radius_miles: f64,
    pub detector_window_hours: f64,
    pub probability_cut: f64,
    pub n_bins: usize,
    pub k_max: usize,
}

impl Default for ValidationSection {
    fn default() -> Self {
        ValidationSection {
            log_max_miles: 4.0,
            log_max_hours: 1.0,
            detector_radius_miles: 1.0,
            detector_window_hours: 1.0,
            probability_cut: 0.9,
            n_bins: DEFAULT_BINS,
            k_max: 20,
        }
    }
}

fn set_path(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, sections) = parts.split_last().expect("split yields at least one part");
    let mut table = root;
    for s in sections {
        let entry = table
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{key}: {s} is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Parses the right-hand side of `--set` as a TOML value, falling back to a
/// plain string.
fn parse_override(raw: &str) -> Result<(String, toml::Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {raw:?}")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("bad key in --set {raw:?}")));
    }
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

/// Command-line values that override the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub set: Vec<String>,
}

impl PipelineConfig {
    pub fn load(config_path: Option<&Path>, overrides: &Overrides) -> Result<PipelineConfig, CliError> {
        let mut table = match config_path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for raw in &overrides.set {
            let (key, value) = parse_override(raw)?;
            set_path(&mut table, &key, value)?;
        }
        if let Some(seed) = overrides.seed {
            let seed = i64::try_from(seed).map_err(|_| CliError::Config(format!("seed {seed} too large")))?;
            table.insert("seed".into(), toml::Value::Integer(seed));
        }
        if let Some(dir) = &overrides.out_dir {
            table.insert("out_dir".into(), toml::Value::String(dir.display().to_string()));
        }
        let cfg: PipelineConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
            let origin = config_path.map_or("configuration".to_string(), |p| p.display().to_string());
            CliError::Config(format!("{origin}: {}", e.message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.thresholds().validate()?;
        self.train_config().validate()?;
        self.synth_validation_spec().validate()?;
        let bad = |m: String| Err(CliError::Config(m));
        if self.synth.n_accident == 0 {
            return bad("synth.n_accident must be >= 1".into());
        }
        if self.train.hidden.contains(&0) {
            return bad("train.hidden widths must be >= 1".into());
        }
        if self.train.lstm_hidden == 0 {
            return bad("train.lstm_hidden must be >= 1".into());
        }
        if self.evaluate.folds < 2 {
            return bad(format!("evaluate.folds must be >= 2, got {}", self.evaluate.folds));
        }
        let v = &self.validation;
        for (name, x) in [
            ("log_max_miles", v.log_max_miles),
            ("log_max_hours", v.log_max_hours),
            ("detector_radius_miles", v.detector_radius_miles),
            ("detector_window_hours", v.detector_window_hours),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return bad(format!("validation.{name} must be positive, got {x}"));
            }
        }
        if !(0.0..=1.0).contains(&v.probability_cut) {
            return bad(format!("validation.probability_cut must lie in [0, 1], got {}", v.probability_cut));
        }
        if v.n_bins < 2 {
            return bad("validation.n_bins must be >= 2".into());
        }
        if v.k_max < 1 {
            return bad("validation.k_max must be >= 1".into());
        }
        Ok(())
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            phi_min: self.featsel.phi_min,
            supp_min: self.featsel.supp_min,
            conf_min: self.featsel.conf_min,
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self.train.architecture {
            ArchKind::Mlp => Architecture::Mlp {
                hidden: self.train.hidden.clone(),
            },
            ArchKind::Lstm => Architecture::Lstm {
                hidden_dim: self.train.lstm_hidden,
            },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            alpha: self.train.alpha,
            loss_threshold: self.train.loss_threshold,
            max_epochs: self.train.max_epochs,
            seed: self.seed,
            init_scale: self.train.init_scale,
        }
    }

    pub fn synth_validation_spec(&self) -> SynthValidationSpec {
        SynthValidationSpec {
            record_fraction: self.synth.record_fraction,
            extra_records: self.synth.extra_records,
            detectors_per_tweet: self.synth.detectors_per_tweet,
            span_hours: self.synth.span_hours,
            ..SynthValidationSpec::default()
        }
    }

    pub fn tweets_path(&self) -> PathBuf {
        self.paths.tweets.clone().unwrap_or_else(|| self.out_dir.join("tweets.jsonl"))
    }

    pub fn accident_log_path(&self) -> PathBuf {
        self.paths
            .accident_log
            .clone()
            .unwrap_or_else(|| self.out_dir.join("accident_log.csv"))
    }

    pub fn detectors_path(&self) -> PathBuf {
        self.paths
            .detectors
            .clone()
            .unwrap_or_else(|| self.out_dir.join("detectors.csv"))
    }

    pub fn lexicons(&self) -> Result<Lexicons, CliError> {
        let mut lex = Lexicons::default();
        let p = &self.paths;
        for (path, slot) in [
            (&p.stopwords, &mut lex.stopwords),
            (&p.vocab, &mut lex.vocab),
            (&p.influential, &mut lex.influential),
            (&p.hashtags, &mut lex.hashtags),
            (&p.misspellings, &mut lex.misspellings),
        ] {
            if let Some(path) = path {
                *slot = WordSet::load(path)?;
            }
        }
        Ok(lex)
    }
}
