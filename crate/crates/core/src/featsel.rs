//! Feature selection over the binary token database.
//!
//! Individual tokens are kept when their phi coefficient with the label
//! exceeds a threshold; token pairs are mined Apriori-style and kept when
//! their support and label confidence reach their thresholds. A pair feature
//! fires when both tokens are present.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textpipe::BinaryFeatureMatrix;

/// Largest itemset size mined. Only pairs are used as features.
pub const MAX_ITEMSET_SIZE: usize = 2;

/// 2x2 table of feature bit `x` against label bit `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ContingencyTable {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl ContingencyTable {
    /// Rows with x = 1.
    pub fn n1_(&self) -> u64 {
        self.n11 + self.n10
    }
    /// Rows with x = 0.
    pub fn n0_(&self) -> u64 {
        self.n01 + self.n00
    }
    /// Rows with y = 1.
    pub fn n_1(&self) -> u64 {
        self.n11 + self.n01
    }
    /// Rows with y = 0.
    pub fn n_0(&self) -> u64 {
        self.n10 + self.n00
    }
    pub fn n(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }
}

pub fn contingency(x: &[bool], y: &[bool]) -> Result<ContingencyTable> {
    if x.len() != y.len() {
        return Err(Error::shape(format!(
            "feature column has {} entries, labels {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::invalid("contingency table needs at least one row"));
    }
    let mut t = ContingencyTable::default();
    for (&a, &b) in x.iter().zip(y) {
        match (a, b) {
            (true, true) => t.n11 += 1,
            (true, false) => t.n10 += 1,
            (false, true) => t.n01 += 1,
            (false, false) => t.n00 += 1,
        }
    }
    Ok(t)
}

/// Phi coefficient of a 2x2 table, or `None` when any margin is zero (the
/// feature or the label is constant).
pub fn phi_coefficient(t: &ContingencyTable) -> Option<f64> {
    let margins = [t.n1_(), t.n0_(), t.n_0(), t.n_1()];
    if margins.contains(&0) {
        return None;
    }
    let num = t.n11 as f64 * t.n00 as f64 - t.n10 as f64 * t.n01 as f64;
    let den = margins.iter().map(|&m| m as f64).product::<f64>().sqrt();
    Some(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualFeature {
    pub token: String,
    pub phi: f64,
}

/// Tokens with `|phi| > phi_min`, by decreasing `|phi|`, ties by token.
/// Constant columns are skipped with a warning.
pub fn select_individual(matrix: &BinaryFeatureMatrix, phi_min: f64) -> Result<Vec<IndividualFeature>> {
    if !(phi_min >= 0.0) {
        return Err(Error::config(format!("phi_min must be >= 0, got {phi_min}")));
    }
    let mut out = Vec::new();
    let mut degenerate = 0usize;
    for (j, token) in matrix.vocabulary.iter().enumerate() {
        let table = contingency(&matrix.column(j), &matrix.labels)?;
        match phi_coefficient(&table) {
            Some(phi) if phi.abs() > phi_min => out.push(IndividualFeature {
                token: token.clone(),
                phi,
            }),
            Some(_) => {}
            None => degenerate += 1,
        }
    }
    if degenerate > 0 {
        warn!("skipped {degenerate} constant token column(s) in phi selection");
    }
    out.sort_by(|a, b| {
        b.phi
            .abs()
            .total_cmp(&a.phi.abs())
            .then_with(|| a.token.cmp(&b.token))
    });
    Ok(out)
}

fn itemset_columns(itemset: &[&str], matrix: &BinaryFeatureMatrix) -> Result<Vec<usize>> {
    if itemset.is_empty() {
        return Err(Error::invalid("empty itemset"));
    }
    itemset
        .iter()
        .map(|t| {
            matrix
                .column_of(t)
                .ok_or_else(|| Error::invalid(format!("token {t:?} not in vocabulary")))
        })
        .collect()
}

fn count_containing(cols: &[usize], matrix: &BinaryFeatureMatrix) -> (usize, usize) {
    let mut all = 0;
    let mut positive = 0;
    for (row, &label) in matrix.rows.iter().zip(&matrix.labels) {
        if cols.iter().all(|&c| row[c]) {
            all += 1;
            if label {
                positive += 1;
            }
        }
    }
    (all, positive)
}

/// Fraction of rows containing every token of `itemset`.
pub fn itemset_support(itemset: &[&str], matrix: &BinaryFeatureMatrix) -> Result<f64> {
    let cols = itemset_columns(itemset, matrix)?;
    if matrix.n_rows() == 0 {
        return Err(Error::invalid("matrix has no rows"));
    }
    let (all, _) = count_containing(&cols, matrix);
    Ok(all as f64 / matrix.n_rows() as f64)
}

/// Fraction of itemset-containing rows labelled accident,
/// `supp(label ∧ itemset) / supp(itemset)`.
pub fn rule_confidence(itemset: &[&str], matrix: &BinaryFeatureMatrix) -> Result<f64> {
    let cols = itemset_columns(itemset, matrix)?;
    let (all, positive) = count_containing(&cols, matrix);
    if all == 0 {
        return Err(Error::invalid(format!(
            "itemset {itemset:?} has zero support; confidence undefined"
        )));
    }
    Ok(positive as f64 / all as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTokenRule {
    /// Lexicographically ordered, distinct.
    pub tokens: [String; 2],
    pub support: f64,
    pub confidence: f64,
}

fn check_pair_thresholds(supp_min: f64, conf_min: f64) -> Result<()> {
    if !(supp_min > 0.0 && supp_min <= 1.0) {
        return Err(Error::config(format!("supp_min must lie in (0, 1], got {supp_min}")));
    }
    if !(0.0..=1.0).contains(&conf_min) {
        return Err(Error::config(format!("conf_min must lie in [0, 1], got {conf_min}")));
    }
    Ok(())
}

/// Token pairs with `support >= supp_min` and `confidence >= conf_min`.
///
/// Candidates are built only from singletons that are themselves frequent,
/// then counted by intersecting their row lists. Output is ordered by
/// confidence, then support (both descending), then tokens.
pub fn mine_paired_features(
    matrix: &BinaryFeatureMatrix,
    supp_min: f64,
    conf_min: f64,
) -> Result<Vec<PairedTokenRule>> {
    check_pair_thresholds(supp_min, conf_min)?;
    let n = matrix.n_rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let support = |count: usize| count as f64 / n as f64;

    // frequent singletons with their (sorted) row lists
    let frequent: Vec<(usize, Vec<usize>)> = (0..matrix.n_cols())
        .filter_map(|j| {
            let rows: Vec<usize> = (0..n).filter(|&i| matrix.rows[i][j]).collect();
            (support(rows.len()) >= supp_min).then_some((j, rows))
        })
        .collect();

    let mut out = Vec::new();
    for (a, (ja, rows_a)) in frequent.iter().enumerate() {
        for (jb, rows_b) in &frequent[a + 1..] {
            let (mut count, mut positive) = (0usize, 0usize);
            let (mut p, mut q) = (0, 0);
            while p < rows_a.len() && q < rows_b.len() {
                match rows_a[p].cmp(&rows_b[q]) {
                    std::cmp::Ordering::Less => p += 1,
                    std::cmp::Ordering::Greater => q += 1,
                    std::cmp::Ordering::Equal => {
                        count += 1;
                        if matrix.labels[rows_a[p]] {
                            positive += 1;
                        }
                        p += 1;
                        q += 1;
                    }
                }
            }
            if count == 0 || support(count) < supp_min {
                continue;
            }
            let confidence = positive as f64 / count as f64;
            if confidence < conf_min {
                continue;
            }
            let (ta, tb) = (&matrix.vocabulary[*ja], &matrix.vocabulary[*jb]);
            let tokens = if ta <= tb {
                [ta.clone(), tb.clone()]
            } else {
                [tb.clone(), ta.clone()]
            };
            out.push(PairedTokenRule {
                tokens,
                support: support(count),
                confidence,
            });
        }
    }
    sort_rules(&mut out);
    Ok(out)
}

pub fn sort_rules(rules: &mut [PairedTokenRule]) {
    rules.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| b.support.total_cmp(&a.support))
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub phi_min: f64,
    pub supp_min: f64,
    pub conf_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            phi_min: 0.1,
            supp_min: 0.01,
            conf_min: 0.8,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.phi_min) {
            return Err(Error::config(format!(
                "phi_min must lie in [0, 1], got {}",
                self.phi_min
            )));
        }
        check_pair_thresholds(self.supp_min, self.conf_min)
    }
}

/// The classifier inputs: selected tokens, then selected pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub thresholds: Thresholds,
    pub individual: Vec<IndividualFeature>,
    pub paired: Vec<PairedTokenRule>,
}

impl FeatureSet {
    pub fn n_features(&self) -> usize {
        self.individual.len() + self.paired.len()
    }

    /// Drops the pair features.
    pub fn individual_only(&self) -> FeatureSet {
        FeatureSet {
            paired: Vec::new(),
            ..self.clone()
        }
    }

    /// Distinct tokens appearing in pair features.
    pub fn paired_token_count(&self) -> usize {
        self.paired
            .iter()
            .flat_map(|r| r.tokens.iter())
            .collect::<HashSet<_>>()
            .len()
    }

    /// Feature vector for a post given its stemmed tokens. Tokens unknown to
    /// the set are ignored.
    pub fn encode<'a, I>(&self, tokens: I) -> Vec<f64>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let present: HashSet<&str> = tokens.into_iter().collect();
        let bit = |b: bool| if b { 1.0 } else { 0.0 };
        self.individual
            .iter()
            .map(|f| bit(present.contains(f.token.as_str())))
            .chain(self.paired.iter().map(|r| {
                bit(present.contains(r.tokens[0].as_str()) && present.contains(r.tokens[1].as_str()))
            }))
            .collect()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let fs: FeatureSet = serde_json::from_reader(r)?;
        fs.thresholds.validate()?;
        Ok(fs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_json(std::io::BufReader::new(f))
    }
}

/// Runs both selections with the given thresholds.
pub fn select_features(matrix: &BinaryFeatureMatrix, thresholds: Thresholds) -> Result<FeatureSet> {
    thresholds.validate()?;
    Ok(FeatureSet {
        thresholds,
        individual: select_individual(matrix, thresholds.phi_min)?,
        paired: mine_paired_features(matrix, thresholds.supp_min, thresholds.conf_min)?,
    })
}

/// Classifier input matrix: one column per individual feature, then one per
/// pair (AND of its two token bits), in feature-set order.
pub fn assemble_feature_matrix(
    matrix: &BinaryFeatureMatrix,
    features: &FeatureSet,
) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let lookup = |t: &str| {
        matrix
            .column_of(t)
            .ok_or_else(|| Error::invalid(format!("feature token {t:?} not in vocabulary")))
    };
    let ind: Vec<usize> = features
        .individual
        .iter()
        .map(|f| lookup(&f.token))
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = features
        .paired
        .iter()
        .map(|r| Ok((lookup(&r.tokens[0])?, lookup(&r.tokens[1])?)))
        .collect::<Result<_>>()?;
    let bit = |b: bool| if b { 1.0 } else { 0.0 };
    let x = matrix
        .rows
        .iter()
        .map(|row| {
            ind.iter()
                .map(|&j| bit(row[j]))
                .chain(pairs.iter().map(|&(a, b)| bit(row[a] && row[b])))
                .collect()
        })
        .collect();
    Ok((x, matrix.labels.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(vocab: &[&str], rows: &[&[u8]], labels: &[u8]) -> BinaryFeatureMatrix {
        BinaryFeatureMatrix::new(
            vocab.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect(),
            labels.iter().map(|&b| b == 1).collect(),
        )
        .unwrap()
    }

    #[test]
    fn contingency_counts() {
        let t = contingency(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!((t.n11, t.n10, t.n01, t.n00), (1, 1, 1, 1));
        let t = contingency(&[true; 3], &[true; 3]).unwrap();
        assert_eq!((t.n11, t.n10, t.n01, t.n00), (3, 0, 0, 0));
        assert!(contingency(&[true], &[true, false]).is_err());
    }

    #[test]
    fn phi_values() {
        let t = |n11, n10, n01, n00| ContingencyTable { n11, n10, n01, n00 };
        assert_eq!(phi_coefficient(&t(5, 0, 0, 5)), Some(1.0));
        assert_eq!(phi_coefficient(&t(7, 7, 7, 7)), Some(0.0));
        // 10 / sqrt(5*5*6*4)
        let v = phi_coefficient(&t(4, 1, 2, 3)).unwrap();
        assert!((v - 0.408_248_290_463_863).abs() < 1e-12, "{v}");
        assert_eq!(phi_coefficient(&t(3, 0, 0, 0)), None);
    }

    #[test]
    fn select_individual_threshold_and_order() {
        // a: phi 1, b: phi 0, c: phi -1
        let m = matrix(
            &["a", "b", "c"],
            &[&[1, 1, 0], &[1, 0, 0], &[0, 1, 1], &[0, 0, 1]],
            &[1, 1, 0, 0],
        );
        let sel = select_individual(&m, 0.1).unwrap();
        let toks: Vec<_> = sel.iter().map(|f| f.token.as_str()).collect();
        assert_eq!(toks, ["a", "c"]);
        assert_eq!(sel[1].phi, -1.0);
        assert!(select_individual(&m, 1.0).unwrap().is_empty());
    }

    #[test]
    fn support_and_confidence() {
        let m = matrix(
            &["x", "y"],
            &[
                &[1, 1],
                &[1, 0],
                &[1, 1],
                &[0, 1],
                &[0, 0],
                &[0, 0],
                &[0, 0],
                &[0, 0],
                &[0, 0],
                &[0, 0],
            ],
            &[1, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        );
        assert!((itemset_support(&["x"], &m).unwrap() - 0.3).abs() < 1e-15);
        assert!((itemset_support(&["x", "y"], &m).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(rule_confidence(&["x", "y"], &m).unwrap(), 0.5);
        assert!(itemset_support(&[], &m).is_err());
        assert!(itemset_support(&["zzz"], &m).is_err());
    }

    #[test]
    fn confidence_extremes() {
        let m = matrix(&["p", "q"], &[&[1, 0], &[1, 0], &[0, 1]], &[1, 1, 0]);
        assert_eq!(rule_confidence(&["p"], &m).unwrap(), 1.0);
        assert_eq!(rule_confidence(&["q"], &m).unwrap(), 0.0);
        assert!(rule_confidence(&["p", "q"], &m).is_err());
    }

    #[test]
    fn whole_vocabulary_itemset() {
        let m = matrix(
            &["a", "b", "c"],
            &[&[1, 1, 1], &[1, 0, 1], &[0, 1, 1], &[0, 0, 0]],
            &[1, 0, 0, 0],
        );
        assert_eq!(itemset_support(&["a", "b", "c"], &m).unwrap(), 0.25);
    }

    #[test]
    fn universal_support_threshold() {
        let m = matrix(&["a", "b"], &[&[1, 1], &[1, 0]], &[1, 0]);
        assert!(mine_paired_features(&m, 1.0, 0.0).unwrap().is_empty());
        assert!(mine_paired_features(&m, 0.0, 0.5).is_err());
        assert!(mine_paired_features(&m, 0.5, 1.1).is_err());
    }

    #[test]
    fn pair_column_is_and() {
        let m = matrix(&["accid", "car"], &[&[1, 1], &[0, 1]], &[1, 0]);
        let fs = FeatureSet {
            thresholds: Thresholds::default(),
            individual: vec![],
            paired: vec![PairedTokenRule {
                tokens: ["accid".into(), "car".into()],
                support: 0.5,
                confidence: 1.0,
            }],
        };
        let (x, y) = assemble_feature_matrix(&m, &fs).unwrap();
        assert_eq!(x, vec![vec![1.0], vec![0.0]]);
        assert_eq!(y, vec![true, false]);
        assert_eq!(fs.encode(["car", "accid"]), vec![1.0]);
        assert_eq!(fs.encode(["car"]), vec![0.0]);
    }

    #[test]
    fn assembled_width() {
        let vocab: Vec<String> = (0..50).map(|i| format!("t{i:02}")).collect();
        let m = BinaryFeatureMatrix::new(vocab.clone(), vec![vec![true; 50]], vec![true]).unwrap();
        let fs = FeatureSet {
            thresholds: Thresholds::default(),
            individual: vocab[..44]
                .iter()
                .map(|t| IndividualFeature { token: t.clone(), phi: 0.5 })
                .collect(),
            paired: (0..17)
                .map(|i| PairedTokenRule {
                    tokens: [vocab[i].clone(), vocab[i + 1].clone()],
                    support: 1.0,
                    confidence: 1.0,
                })
                .collect(),
        };
        let (x, _) = assemble_feature_matrix(&m, &fs).unwrap();
        assert_eq!(x[0].len(), 61);
        let mut bad = fs.clone();
        bad.individual[0].token = "nope".into();
        assert!(assemble_feature_matrix(&m, &bad).is_err());
    }

    #[test]
    fn featureset_json_roundtrip() {
        let fs = FeatureSet {
            thresholds: Thresholds::default(),
            individual: vec![IndividualFeature { token: "accid".into(), phi: 0.31 }],
            paired: vec![],
        };
        let mut buf = Vec::new();
        fs.write_json(&mut buf).unwrap();
        assert_eq!(FeatureSet::read_json(buf.as_slice()).unwrap(), fs);
    }
}
