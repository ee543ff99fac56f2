use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use crashtweet_core::corpus::{self, SignalSpec, Tweet};
use crashtweet_core::evalkit::{cross_validate_model, CvReport};
use crashtweet_core::featsel::{select_features, FeatureSet, Thresholds};
use crashtweet_core::neuralnet::{Architecture, Model, TrainConfig};
use crashtweet_core::textpipe::{build_binary_matrix, preprocess_labeled, BinaryFeatureMatrix, PreprocessOptions, StemmedTweet};
use crashtweet_core::trafficval::{
    map_match_log, pair_tweets_detectors, score_observations, summarize_log, summarize_traffic,
    synth_validation_data, ClusterModel, LogValidation, MatchResult, TrafficEntry, TrafficValidation,
};
use log::info;
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, read_json, read_jsonl, write_atomic, write_json, write_jsonl, write_text};
use crate::config::PipelineConfig;
use crate::error::CliError;

fn out(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name)
}

fn done(path: &Path, what: String) {
    println!("wrote {} ({what})", path.display());
}

/// Synthetic annotated corpus plus an accident log and detector feed built
/// around its accident posts.
pub fn synth(cfg: &PipelineConfig) -> Result<(), CliError> {
    let tweets = corpus::synth_corpus(cfg.seed, cfg.synth.n_accident, &SignalSpec::traffic_default())?;
    let accidents: Vec<Tweet> = tweets
        .iter()
        .filter(|t| t.label.is_accident())
        .map(|t| t.tweet.clone())
        .collect();
    let (log, obs) = synth_validation_data(&accidents, &cfg.synth_validation_spec(), cfg.seed)?;

    let p = out(cfg, artifacts::TWEETS);
    write_atomic(&p, |w| Ok(corpus::write_labeled_tweets(w, &tweets)?))?;
    done(&p, format!("{} posts, {} accident", tweets.len(), accidents.len()));
    let p = out(cfg, artifacts::ACCIDENT_LOG);
    write_atomic(&p, |w| Ok(corpus::write_accident_log(w, &log)?))?;
    done(&p, format!("{} records", log.len()));
    let p = out(cfg, artifacts::DETECTORS);
    write_atomic(&p, |w| Ok(corpus::write_detector_obs(w, &obs)?))?;
    done(&p, format!("{} observations", obs.len()));
    Ok(())
}

pub fn preprocess(cfg: &PipelineConfig) -> Result<(), CliError> {
    let lex = cfg.lexicons()?;
    let tweets = corpus::load_labeled_tweets(&cfg.tweets_path())?;
    let stemmed = preprocess_labeled(
        &tweets,
        &lex,
        PreprocessOptions {
            keyword_filter: cfg.preprocess.keyword_filter,
        },
    )?;
    let matrix = build_binary_matrix(&stemmed)?;
    let p = out(cfg, artifacts::STEMMED);
    write_jsonl(&p, &stemmed)?;
    done(&p, format!("{} of {} posts kept", stemmed.len(), tweets.len()));
    let p = out(cfg, artifacts::MATRIX);
    write_atomic(&p, |w| Ok(matrix.write_csv(w)?))?;
    done(&p, format!("{} x {}", matrix.n_rows(), matrix.n_cols()));
    Ok(())
}

fn load_matrix(path: &Path) -> Result<BinaryFeatureMatrix, CliError> {
    let f = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(BinaryFeatureMatrix::read_csv(f, path)?)
}

pub fn features(cfg: &PipelineConfig) -> Result<(), CliError> {
    let matrix = load_matrix(&out(cfg, artifacts::MATRIX))?;
    let fs = select_features(&matrix, cfg.thresholds())?;
    let p = out(cfg, artifacts::FEATURESET);
    write_json(&p, &fs)?;
    done(
        &p,
        format!("{} individual, {} paired", fs.individual.len(), fs.paired.len()),
    );
    Ok(())
}

fn load_stemmed(cfg: &PipelineConfig) -> Result<Vec<StemmedTweet>, CliError> {
    read_jsonl(&out(cfg, artifacts::STEMMED))
}

pub fn train(cfg: &PipelineConfig) -> Result<(), CliError> {
    let stemmed = load_stemmed(cfg)?;
    let fs = FeatureSet::load(&out(cfg, artifacts::FEATURESET))?;
    let model = Model::fit_with_features(&cfg.architecture(), &stemmed, fs, &cfg.train_config())?;
    let p = out(cfg, artifacts::MODEL);
    write_atomic(&p, |w| Ok(model.write_json(w)?))?;
    done(&p, format!("{} epochs, loss {:.6}", model.epochs, model.final_loss));
    Ok(())
}

/// Cross-validation artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub architecture: Architecture,
    pub folds: usize,
    pub seed: u64,
    pub n_posts: usize,
    pub thresholds: Thresholds,
    pub train_config: TrainConfig,
    #[serde(flatten)]
    pub cv: CvReport,
}

pub fn evaluate(cfg: &PipelineConfig) -> Result<(), CliError> {
    let stemmed = load_stemmed(cfg)?;
    let arch = cfg.architecture();
    let cv = cross_validate_model(
        &stemmed,
        &arch,
        cfg.thresholds(),
        &cfg.train_config(),
        cfg.evaluate.folds,
        cfg.seed,
    )?;
    info!("per-fold accuracy: {:?}", cv.per_fold.iter().map(|m| m.accuracy).collect::<Vec<_>>());
    let eval = Evaluation {
        architecture: arch,
        folds: cfg.evaluate.folds,
        seed: cfg.seed,
        n_posts: stemmed.len(),
        thresholds: cfg.thresholds(),
        train_config: cfg.train_config(),
        cv,
    };
    let p = out(cfg, artifacts::METRICS);
    write_json(&p, &eval)?;
    done(&p, format!("mean accuracy {:.4}", eval.cv.mean.accuracy));
    Ok(())
}

/// Posts the trained model flags as accidents, with their stemmed form.
fn detected(cfg: &PipelineConfig) -> Result<Vec<(Tweet, StemmedTweet)>, CliError> {
    let model = Model::load(&out(cfg, artifacts::MODEL))?;
    let stemmed = load_stemmed(cfg)?;
    let raw: BTreeMap<String, Tweet> = corpus::load_labeled_tweets(&cfg.tweets_path())?
        .into_iter()
        .map(|t| (t.tweet.id.clone(), t.tweet))
        .collect();
    let pred = model.predict_all(&stemmed)?;
    stemmed
        .into_iter()
        .zip(pred)
        .filter(|(_, p)| *p)
        .map(|(s, _)| {
            let t = raw.get(&s.id).cloned().ok_or_else(|| {
                CliError::Input(format!("post {} is missing from {}", s.id, cfg.tweets_path().display()))
            })?;
            Ok((t, s))
        })
        .collect()
}

pub fn validate_log(cfg: &PipelineConfig) -> Result<(), CliError> {
    let lex = cfg.lexicons()?;
    let detected = detected(cfg)?;
    let tweets: Vec<Tweet> = detected.iter().map(|(t, _)| t.clone()).collect();
    let flags: Vec<bool> = detected.iter().map(|(_, s)| s.names_influential(&lex)).collect();
    let log = corpus::load_accident_log(&cfg.accident_log_path())?;
    let v = &cfg.validation;
    let matches = map_match_log(&tweets, &log, v.log_max_miles, v.log_max_hours)?;
    let summary = summarize_log(&matches, Some(&flags))?;
    let result = LogValidation {
        max_miles: v.log_max_miles,
        max_hours: v.log_max_hours,
        summary,
        matches,
    };
    let p = out(cfg, artifacts::LOG_VALIDATION);
    write_json(&p, &result)?;
    done(
        &p,
        format!("{} of {} detected posts matched", result.summary.n_matched, result.summary.n_tweets),
    );
    Ok(())
}

pub fn validate_traffic(cfg: &PipelineConfig) -> Result<(), CliError> {
    let tweets: Vec<Tweet> = detected(cfg)?.into_iter().map(|(t, _)| t).collect();
    let obs = corpus::load_detector_obs(&cfg.detectors_path())?;
    let by = corpus::group_by_detector(&obs);
    let v = &cfg.validation;
    let clusters = ClusterModel::fit(&by, v.n_bins, v.k_max, cfg.seed)?;
    let (scores, skipped) = score_observations(&clusters, &obs);
    let hoods = pair_tweets_detectors(&tweets, &scores, v.detector_radius_miles, v.detector_window_hours)?;
    let entries: Vec<TrafficEntry> = hoods.iter().map(TrafficEntry::from_neighborhood).collect();
    let summary = summarize_traffic(&entries, v.probability_cut)?;
    let result = TrafficValidation {
        radius_miles: v.detector_radius_miles,
        window_hours: v.detector_window_hours,
        n_bins: v.n_bins,
        k: clusters.k,
        aic_trace: clusters.aic_trace.clone(),
        skipped_observations: skipped,
        summary,
        entries,
    };
    let p = out(cfg, artifacts::CLUSTER_MODEL);
    write_atomic(&p, |w| Ok(clusters.write_json(w)?))?;
    done(&p, format!("{} clusters over {} detectors", clusters.k, by.len()));
    let p = out(cfg, artifacts::TRAFFIC_VALIDATION);
    write_json(&p, &result)?;
    done(
        &p,
        format!("{} of {} detected posts qualified", result.summary.n_qualified, result.summary.n_tweets),
    );
    Ok(())
}

/// Per-post validation record joining the log match and detector scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostValidation {
    pub tweet_id: String,
    #[serde(rename = "match")]
    pub matched: Option<MatchResult>,
    pub p_traffic: Option<f64>,
    pub q_traffic: Option<f64>,
    pub n_detectors: usize,
    pub n_periods: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub matched_fraction: Option<f64>,
    pub probability_cut: Option<f64>,
    pub q_at_or_above_cut: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub summary: ValidationSummary,
    pub posts: Vec<PostValidation>,
}

fn read_optional<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<T>, CliError> {
    if path.exists() {
        read_json(path).map(Some)
    } else {
        Ok(None)
    }
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.digits$}"))
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{:.1}%", 100.0 * x))
}

/// Joins the validation artifacts and renders a plain-text summary of every
/// artifact present. Nothing is recomputed.
pub fn report(cfg: &PipelineConfig) -> Result<(), CliError> {
    let fs: Option<FeatureSet> = read_optional(&out(cfg, artifacts::FEATURESET))?;
    let model: Option<Model> = read_optional(&out(cfg, artifacts::MODEL))?;
    let eval: Option<Evaluation> = read_optional(&out(cfg, artifacts::METRICS))?;
    let logv: Option<LogValidation> = read_optional(&out(cfg, artifacts::LOG_VALIDATION))?;
    let traffic: Option<TrafficValidation> = read_optional(&out(cfg, artifacts::TRAFFIC_VALIDATION))?;
    if fs.is_none() && model.is_none() && eval.is_none() && logv.is_none() && traffic.is_none() {
        return Err(CliError::Input(format!("no artifacts found in {}", cfg.out_dir.display())));
    }

    let mut r = String::new();
    let w = &mut r;
    writeln!(w, "crashtweet report").unwrap();
    writeln!(w, "=================").unwrap();
    match &fs {
        Some(fs) => {
            writeln!(
                w,
                "features: {} individual tokens, {} token pairs (phi_min {}, supp_min {}, conf_min {})",
                fs.individual.len(),
                fs.paired.len(),
                fs.thresholds.phi_min,
                fs.thresholds.supp_min,
                fs.thresholds.conf_min
            )
            .unwrap();
            let top: Vec<String> = fs.individual.iter().take(10).map(|f| format!("{} ({:.3})", f.token, f.phi)).collect();
            writeln!(w, "  top tokens by phi: {}", top.join(", ")).unwrap();
            let pairs: Vec<String> = fs
                .paired
                .iter()
                .take(5)
                .map(|p| format!("{}+{} (conf {:.3})", p.tokens[0], p.tokens[1], p.confidence))
                .collect();
            if !pairs.is_empty() {
                writeln!(w, "  top pairs: {}", pairs.join(", ")).unwrap();
            }
        }
        None => writeln!(w, "features: not run").unwrap(),
    }
    match &model {
        Some(m) => writeln!(
            w,
            "model: {} trained for {} epochs, final loss {:.6}",
            serde_json::to_string(&m.architecture).unwrap_or_default(),
            m.epochs,
            m.final_loss
        )
        .unwrap(),
        None => writeln!(w, "model: not trained").unwrap(),
    }
    match &eval {
        Some(e) => {
            writeln!(w, "cross-validation: {} folds over {} posts (plan seed {})", e.folds, e.n_posts, e.cv.plan_seed).unwrap();
            writeln!(w, "  mean accuracy:                {:.4}", e.cv.mean.accuracy).unwrap();
            writeln!(w, "  mean precision, accident:     {}", fmt_opt(e.cv.mean.precision_accident, 4)).unwrap();
            writeln!(w, "  mean precision, non-accident: {}", fmt_opt(e.cv.mean.precision_nonaccident, 4)).unwrap();
            for (i, m) in e.cv.per_fold.iter().enumerate() {
                let c = &m.confusion;
                writeln!(
                    w,
                    "  fold {}: accuracy {:.4} (tp {}, fp {}, fn {}, tn {})",
                    i + 1,
                    m.accuracy,
                    c.tp,
                    c.fp,
                    c.fn_,
                    c.tn
                )
                .unwrap();
            }
        }
        None => writeln!(w, "cross-validation: not run").unwrap(),
    }
    match &logv {
        Some(l) => {
            let s = &l.summary;
            writeln!(
                w,
                "accident log ({} mi, {} h): {} of {} detected posts matched ({})",
                l.max_miles,
                l.max_hours,
                s.n_matched,
                s.n_tweets,
                pct(Some(s.matched_fraction))
            )
            .unwrap();
            writeln!(
                w,
                "  before {} ({}), during {} ({}), after {} ({})",
                s.before,
                pct(s.before_fraction),
                s.during,
                pct(s.during_fraction),
                s.after,
                pct(s.after_fraction)
            )
            .unwrap();
            writeln!(
                w,
                "  mean distance {} mi, mean |offset| {} min",
                fmt_opt(s.mean_distance_miles, 2),
                fmt_opt(s.mean_abs_offset_minutes, 1)
            )
            .unwrap();
        }
        None => writeln!(w, "accident log: not run").unwrap(),
    }
    match &traffic {
        Some(t) => {
            let s = &t.summary;
            writeln!(
                w,
                "detectors ({} mi, +-{} h): {} clusters, {} of {} detected posts qualified",
                t.radius_miles, t.window_hours, t.k, s.n_qualified, s.n_tweets
            )
            .unwrap();
            writeln!(
                w,
                "  q_traffic >= {}: {}; p_traffic >= {}: {}",
                s.probability_cut,
                pct(s.q_at_or_above_cut),
                s.probability_cut,
                pct(s.p_at_or_above_cut)
            )
            .unwrap();
            if t.skipped_observations > 0 {
                writeln!(w, "  {} observations could not be scored", t.skipped_observations).unwrap();
            }
        }
        None => writeln!(w, "detectors: not run").unwrap(),
    }

    if logv.is_some() || traffic.is_some() {
        let traffic_by_id: BTreeMap<&str, &TrafficEntry> = traffic
            .iter()
            .flat_map(|t| t.entries.iter())
            .map(|e| (e.tweet_id.as_str(), e))
            .collect();
        let ids: Vec<String> = match (&logv, &traffic) {
            (Some(l), _) => l.matches.iter().map(|m| m.tweet_id.clone()).collect(),
            (None, Some(t)) => t.entries.iter().map(|e| e.tweet_id.clone()).collect(),
            (None, None) => unreachable!(),
        };
        let match_by_id: BTreeMap<&str, &MatchResult> = logv
            .iter()
            .flat_map(|l| l.matches.iter())
            .map(|m| (m.tweet_id.as_str(), m))
            .collect();
        let posts = ids
            .iter()
            .map(|id| {
                let e = traffic_by_id.get(id.as_str());
                PostValidation {
                    tweet_id: id.clone(),
                    matched: match_by_id.get(id.as_str()).map(|m| (*m).clone()),
                    p_traffic: e.and_then(|e| e.p_traffic),
                    q_traffic: e.and_then(|e| e.q_traffic),
                    n_detectors: e.map_or(0, |e| e.n_detectors),
                    n_periods: e.map_or(0, |e| e.n_periods),
                }
            })
            .collect();
        let combined = ValidationReport {
            summary: ValidationSummary {
                matched_fraction: logv.as_ref().map(|l| l.summary.matched_fraction),
                probability_cut: traffic.as_ref().map(|t| t.summary.probability_cut),
                q_at_or_above_cut: traffic.as_ref().and_then(|t| t.summary.q_at_or_above_cut),
            },
            posts,
        };
        let p = out(cfg, artifacts::VALIDATION);
        write_json(&p, &combined)?;
        done(&p, format!("{} posts", combined.posts.len()));
    }

    let p = out(cfg, artifacts::REPORT);
    write_text(&p, &r)?;
    print!("{r}");
    done(&p, "report".into());
    Ok(())
}
