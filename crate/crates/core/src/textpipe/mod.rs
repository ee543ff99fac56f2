//! Raw posts to the structured binary token database.
//!
//! The per-post path is tokenize -> stop-word removal -> Porter stemming.
//! Candidate extraction (keyword filter) and influential-author exclusion
//! operate on whole posts before that.

mod porter;
mod tokenize;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabeledTweet, Tweet};
use crate::error::{Error, Result};

pub use porter::porter_stem;
pub use tokenize::{normalize_tokenize, tokenize, TokenList, Tokenized};

pub const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");
pub const DEFAULT_VOCAB: &str = include_str!("../../data/vocab.txt");
pub const DEFAULT_INFLUENTIAL: &str = include_str!("../../data/influential.txt");
pub const DEFAULT_HASHTAGS: &str = include_str!("../../data/hashtags.txt");
pub const DEFAULT_MISSPELLINGS: &str = include_str!("../../data/misspellings.txt");

/// A set of normalized words read from a one-word-per-line list.
///
/// Entries are trimmed and lowercased and lose their apostrophes, so they
/// compare equal to tokenizer output. Blank lines and `#` comments are
/// skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordSet(pub BTreeSet<String>);

impl WordSet {
    pub fn parse(text: &str) -> Self {
        WordSet(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| {
                    l.chars()
                        .filter(|c| !matches!(c, '\'' | '\u{2019}'))
                        .collect::<String>()
                        .to_lowercase()
                })
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, w: &str) -> bool {
        self.0.contains(w)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl<'a> FromIterator<&'a str> for WordSet {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        WordSet(iter.into_iter().map(String::from).collect())
    }
}

/// Word lists used by the text pipeline.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub stopwords: WordSet,
    pub vocab: WordSet,
    pub influential: WordSet,
    pub hashtags: WordSet,
    pub misspellings: WordSet,
}

impl Default for Lexicons {
    fn default() -> Self {
        Lexicons {
            stopwords: WordSet::parse(DEFAULT_STOPWORDS),
            vocab: WordSet::parse(DEFAULT_VOCAB),
            influential: WordSet::parse(DEFAULT_INFLUENTIAL),
            hashtags: WordSet::parse(DEFAULT_HASHTAGS),
            misspellings: WordSet::parse(DEFAULT_MISSPELLINGS),
        }
    }
}

/// Order-preserving removal of stop words.
pub fn filter_stopwords(tokens: &TokenList, stoplist: &WordSet) -> TokenList {
    TokenList(
        tokens
            .0
            .iter()
            .filter(|t| !stoplist.contains(t))
            .cloned()
            .collect(),
    )
}

/// Keeps posts that contain at least one accident keyword or listed variant.
/// Matching is done on stemmed tokens.
pub fn keyword_filter(tweets: &[Tweet], vocab: &WordSet, variants: &WordSet) -> Result<Vec<Tweet>> {
    if vocab.is_empty() {
        return Err(Error::config("keyword vocabulary is empty"));
    }
    let stems: HashSet<String> = vocab.iter().chain(variants.iter()).map(porter_stem).collect();
    Ok(tweets
        .iter()
        .filter(|t| {
            normalize_tokenize(&t.text)
                .iter()
                .any(|tok| stems.contains(&porter_stem(tok)))
        })
        .cloned()
        .collect())
}

/// Drops posts authored by influential accounts. Posts that only mention
/// such an account are kept.
pub fn exclude_influential<'a, T, F>(tweets: &'a [T], handles: &WordSet, author: F) -> Vec<T>
where
    T: Clone,
    F: Fn(&'a T) -> &'a str,
{
    tweets
        .iter()
        .filter(|t| !handles.contains(author(t)))
        .cloned()
        .collect()
}

/// A post after tokenization, stop-word removal and stemming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StemmedTweet {
    pub id: String,
    /// Stemmed tokens in posting order.
    pub tokens: TokenList,
    #[serde(default)]
    pub mentions: Vec<String>,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl StemmedTweet {
    /// True if the post names an influential account or a listed hashtag,
    /// either with a marker or as a plain word.
    pub fn names_influential(&self, lex: &Lexicons) -> bool {
        self.mentions
            .iter()
            .chain(&self.hashtags)
            .map(String::as_str)
            .chain(self.tokens.iter())
            .any(|w| lex.influential.contains(w) || lex.hashtags.contains(w))
    }
}

/// Tokenize, drop stop words, stem.
pub fn stem_text(text: &str, stopwords: &WordSet) -> Tokenized {
    let t = tokenize(text);
    let kept = filter_stopwords(&t.tokens, stopwords);
    Tokenized {
        tokens: TokenList(kept.iter().map(porter_stem).collect()),
        mentions: t.mentions,
        hashtags: t.hashtags,
    }
}

pub fn stem_tweet(tweet: &Tweet, label: Option<Label>, stopwords: &WordSet) -> StemmedTweet {
    let t = stem_text(&tweet.text, stopwords);
    StemmedTweet {
        id: tweet.id.clone(),
        tokens: t.tokens,
        mentions: t.mentions,
        hashtags: t.hashtags,
        label,
    }
}

/// Options for [`preprocess_labeled`].
#[derive(Debug, Clone, Copy, Default)]
pub struct PreprocessOptions {
    /// Apply the keyword candidate filter. Useful for raw streams; an
    /// annotated corpus is usually already a candidate set.
    pub keyword_filter: bool,
}

/// Full preprocessing of an annotated corpus: influential-author exclusion,
/// optional keyword filtering, then stemming.
pub fn preprocess_labeled(
    tweets: &[LabeledTweet],
    lex: &Lexicons,
    opts: PreprocessOptions,
) -> Result<Vec<StemmedTweet>> {
    let mut kept = exclude_influential(tweets, &lex.influential, |t| t.tweet.author.as_str());
    if opts.keyword_filter {
        let plain: Vec<Tweet> = kept.iter().map(|t| t.tweet.clone()).collect();
        let ids: HashSet<String> = keyword_filter(&plain, &lex.vocab, &lex.misspellings)?
            .into_iter()
            .map(|t| t.id)
            .collect();
        kept.retain(|t| ids.contains(&t.tweet.id));
    }
    Ok(kept
        .iter()
        .map(|t| stem_tweet(&t.tweet, Some(t.label), &lex.stopwords))
        .collect())
}

/// Posts x stemmed-token presence bits, plus the label column.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFeatureMatrix {
    /// Sorted, unique stemmed tokens.
    pub vocabulary: Vec<String>,
    pub rows: Vec<Vec<bool>>,
    /// `true` = accident.
    pub labels: Vec<bool>,
    index: HashMap<String, usize>,
}

impl BinaryFeatureMatrix {
    pub fn new(vocabulary: Vec<String>, rows: Vec<Vec<bool>>, labels: Vec<bool>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(r) = rows.iter().position(|r| r.len() != vocabulary.len()) {
            return Err(Error::shape(format!(
                "row {r} has {} cells, vocabulary has {}",
                rows[r].len(),
                vocabulary.len()
            )));
        }
        let mut index = HashMap::with_capacity(vocabulary.len());
        for (j, t) in vocabulary.iter().enumerate() {
            if index.insert(t.clone(), j).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(BinaryFeatureMatrix {
            vocabulary,
            rows,
            labels,
            index,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn column_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn column(&self, j: usize) -> Vec<bool> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Rows restricted to `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        BinaryFeatureMatrix {
            vocabulary: self.vocabulary.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            index: self.index.clone(),
        }
    }

    /// CSV with header `<vocabulary...>,label` and 0/1 cells.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::invalid(format!("csv write: {e}"));
        wtr.write_record(self.vocabulary.iter().map(String::as_str).chain(["label"]))
            .map_err(err)?;
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            wtr.write_record(
                row.iter()
                    .chain(std::iter::once(&label))
                    .map(|&b| if b { "1" } else { "0" }),
            )
            .map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::io("<matrix writer>", e))
    }

    /// Inverse of [`write_csv`](Self::write_csv). The last column is the
    /// label whatever its header says.
    pub fn read_csv<R: Read>(r: R, source: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(r);
        let rec_err = |line: usize, message: String| Error::Record {
            source_name: source.to_path_buf(),
            line,
            message,
        };
        let header = rdr.headers().map_err(|e| rec_err(1, e.to_string()))?.clone();
        if header.is_empty() {
            return Err(rec_err(1, "missing header".into()));
        }
        let vocabulary: Vec<String> = header.iter().take(header.len() - 1).map(String::from).collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| rec_err(line, e.to_string()))?;
            let mut bits = Vec::with_capacity(rec.len());
            for cell in rec.iter() {
                bits.push(match cell.trim() {
                    "0" => false,
                    "1" => true,
                    other => return Err(rec_err(line, format!("cell must be 0 or 1, got {other:?}"))),
                });
            }
            let label = bits.pop().ok_or_else(|| rec_err(line, "empty row".into()))?;
            rows.push(bits);
            labels.push(label);
        }
        Self::new(vocabulary, rows, labels)
    }
}

/// Builds the presence matrix over the sorted union of all tokens.
pub fn build_binary_matrix(tweets: &[StemmedTweet]) -> Result<BinaryFeatureMatrix> {
    if tweets.is_empty() {
        return Err(Error::invalid("no tweets"));
    }
    let vocabulary: Vec<String> = tweets
        .iter()
        .flat_map(|t| t.tokens.iter())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(String::from)
        .collect();
    let pos: HashMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(j, t)| (t.as_str(), j))
        .collect();
    let mut rows = Vec::with_capacity(tweets.len());
    let mut labels = Vec::with_capacity(tweets.len());
    for t in tweets {
        let label = t
            .label
            .ok_or_else(|| Error::invalid(format!("tweet {:?} has no label", t.id)))?;
        let mut row = vec![false; vocabulary.len()];
        for tok in t.tokens.iter() {
            row[pos[tok]] = true;
        }
        rows.push(row);
        labels.push(label.is_accident());
    }
    BinaryFeatureMatrix::new(vocabulary, rows, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stemmed(tokens: &[&str], label: Label) -> StemmedTweet {
        StemmedTweet {
            id: tokens.join("_"),
            tokens: TokenList::from(tokens.to_vec()),
            mentions: vec![],
            hashtags: vec![],
            label: Some(label),
        }
    }

    fn tweet(author: &str, text: &str) -> Tweet {
        Tweet {
            id: format!("{author}:{text}"),
            time: 1,
            lat: 0.0,
            lon: 0.0,
            author: author.into(),
            text: text.into(),
        }
    }

    #[test]
    fn ranks_nl_stopwords() {
        let lex = Lexicons::default();
        let toks = TokenList::from(vec!["i", "am", "waiting", "at", "the", "silver", "line"]);
        assert_eq!(
            filter_stopwords(&toks, &lex.stopwords),
            TokenList::from(vec!["waiting", "silver", "line"])
        );
        assert_eq!(filter_stopwords(&toks, &WordSet::default()), toks);
        let all = TokenList::from(vec!["the", "a", "dont"]);
        assert!(filter_stopwords(&all, &lex.stopwords).is_empty());
    }

    #[test]
    fn bundled_lists_have_expected_sizes() {
        let lex = Lexicons::default();
        // 174 entries; it's/its and we're/were coincide once apostrophes go
        assert_eq!(lex.stopwords.0.len(), 172);
        assert_eq!(lex.vocab.0.len(), 45);
        assert_eq!(lex.influential.0.len(), 13);
        assert_eq!(lex.hashtags.0.len(), 8);
        assert!(lex.misspellings.contains("acident"));
        assert!(lex.misspellings.contains("incident"));
    }

    #[test]
    fn keyword_filter_cases() {
        let lex = Lexicons::default();
        let tweets = vec![
            tweet("a", "just saw a crash on 95"),
            tweet("b", "terrible acident ahead"),
            tweet("c", "lovely sunset tonight"),
            tweet("d", "Crashed into a pole"),
        ];
        let kept = keyword_filter(&tweets, &lex.vocab, &lex.misspellings).unwrap();
        let authors: Vec<_> = kept.iter().map(|t| t.author.as_str()).collect();
        assert_eq!(authors, ["a", "b", "d"]);
        assert!(keyword_filter(&tweets, &WordSet::default(), &lex.misspellings).is_err());
    }

    #[test]
    fn influential_authors_only() {
        let lex = Lexicons::default();
        let tweets = vec![
            tweet("wtoptraffic", "accident on 66"),
            tweet("bob", "@wtoptraffic accident at w267"),
        ];
        let kept = exclude_influential(&tweets, &lex.influential, |t| t.author.as_str());
        assert_eq!(kept, vec![tweets[1].clone()]);
        let same = exclude_influential(&tweets, &WordSet::default(), |t| t.author.as_str());
        assert_eq!(same, tweets);
    }

    #[test]
    fn matrix_construction() {
        let m = build_binary_matrix(&[
            stemmed(&["crash", "car", "crash"], Label::Accident),
            stemmed(&["car"], Label::NonAccident),
        ])
        .unwrap();
        assert_eq!(m.vocabulary, ["car", "crash"]);
        assert_eq!(m.rows, vec![vec![true, true], vec![true, false]]);
        assert_eq!(m.labels, vec![true, false]);
        assert!(matches!(build_binary_matrix(&[]), Err(Error::Invalid(_))));
    }

    #[test]
    fn matrix_csv_roundtrip() {
        let m = build_binary_matrix(&[
            stemmed(&["label", "car"], Label::Accident),
            stemmed(&["66"], Label::NonAccident),
        ])
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "66,car,label,label");
        let back = BinaryFeatureMatrix::read_csv(buf.as_slice(), Path::new("m.csv")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn stem_text_pipeline() {
        let lex = Lexicons::default();
        let t = stem_text("Accidents on the I-95!! #vatraffic @wtop", &lex.stopwords);
        assert_eq!(t.tokens.0, ["accid", "95"]);
        assert_eq!(t.hashtags, ["vatraffic"]);
        assert_eq!(t.mentions, ["wtop"]);
    }
}
