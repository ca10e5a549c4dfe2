//! Score-level fusion of the two recognition streams and trial evaluation:
//! per-action tallies with confusion sets, and the dense confusion matrix.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::score::ScoreVector;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("class lists differ between the two streams")]
    ClassListMismatch,
    #[error("fusion weight alpha must lie in [0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("empty score vector")]
    EmptyScores,
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("malformed record line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("product fusion degenerates: the streams share no probability mass")]
    DegenerateProduct,
}

/// Weighting of the skeleton stream against the depth stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig<T> {
    pub alpha: T,
}

impl<T: Scalar> FusionConfig<T> {
    pub fn new(alpha: T) -> Result<Self, FusionError> {
        if alpha < T::zero() || alpha > T::one() || !alpha.is_finite() {
            return Err(FusionError::AlphaOutOfRange(alpha.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self { alpha })
    }
}

impl<T: Scalar> Default for FusionConfig<T> {
    fn default() -> Self {
        Self {
            alpha: T::from_f64(0.5).unwrap(),
        }
    }
}

/// Convex combination `alpha·s_skel + (1−alpha)·s_depth`, elementwise. Both
/// vectors must share the same ordered class list.
pub fn fuse_scores<T: Scalar>(
    s_skel: &ScoreVector<T>,
    s_depth: &ScoreVector<T>,
    cfg: FusionConfig<T>,
) -> Result<ScoreVector<T>, FusionError> {
    if s_skel.classes != s_depth.classes {
        return Err(FusionError::ClassListMismatch);
    }
    if s_skel.is_empty() {
        return Err(FusionError::EmptyScores);
    }
    let alpha = cfg.alpha;
    let beta = T::one() - alpha;
    let scores = s_skel
        .scores
        .iter()
        .zip(&s_depth.scores)
        .map(|(&a, &b)| alpha * a + beta * b)
        .collect();
    Ok(ScoreVector::new(s_skel.classes.clone(), scores))
}

/// Alternative fusion rule: renormalized elementwise product of the two
/// distributions. Off by default; selected per config.
pub fn fuse_scores_product<T: Scalar>(
    s_skel: &ScoreVector<T>,
    s_depth: &ScoreVector<T>,
) -> Result<ScoreVector<T>, FusionError> {
    if s_skel.classes != s_depth.classes {
        return Err(FusionError::ClassListMismatch);
    }
    if s_skel.is_empty() {
        return Err(FusionError::EmptyScores);
    }
    let product: Vec<T> = s_skel
        .scores
        .iter()
        .zip(&s_depth.scores)
        .map(|(&a, &b)| a * b)
        .collect();
    let total: T = product.iter().copied().sum();
    if total <= T::zero() {
        return Err(FusionError::DegenerateProduct);
    }
    let scores = product.into_iter().map(|p| p / total).collect();
    Ok(ScoreVector::new(s_skel.classes.clone(), scores))
}

/// Index of the maximum score; exact ties resolve to the lowest index.
pub fn top_prediction<T: Scalar>(s: &ScoreVector<T>) -> Result<usize, FusionError> {
    if s.is_empty() {
        return Err(FusionError::EmptyScores);
    }
    let mut best = 0;
    for (i, &v) in s.scores.iter().enumerate().skip(1) {
        if v > s.scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// One evaluation record: a sequence id with its true and predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub sequence_id: String,
    pub true_class: String,
    pub predicted_class: String,
}

/// Per-action tally row: recognitions out of trials, plus the classes the
/// action was confused with and how often.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionScore {
    pub class_name: String,
    pub trials: usize,
    pub correct: usize,
    /// Wrong predictions in class-list order.
    pub confusions: Vec<(String, usize)>,
}

/// The full evaluation table, one row per action that has trials, in
/// class-list order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionScoreTable {
    pub rows: Vec<ActionScore>,
}

fn class_index(classes: &[String], name: &str) -> Result<usize, FusionError> {
    classes
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| FusionError::UnknownClass(name.to_string()))
}

/// Tally records into per-action scores. Every class mentioned by a record
/// must appear in `classes`.
pub fn trial_tally(
    records: &[TrialRecord],
    classes: &[String],
) -> Result<ActionScoreTable, FusionError> {
    let mut trials = vec![0usize; classes.len()];
    let mut correct = vec![0usize; classes.len()];
    let mut confused: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); classes.len()];
    for r in records {
        let t = class_index(classes, &r.true_class)?;
        let p = class_index(classes, &r.predicted_class)?;
        trials[t] += 1;
        if t == p {
            correct[t] += 1;
        } else {
            *confused[t].entry(p).or_insert(0) += 1;
        }
    }
    let rows = (0..classes.len())
        .filter(|&i| trials[i] > 0)
        .map(|i| ActionScore {
            class_name: classes[i].clone(),
            trials: trials[i],
            correct: correct[i],
            confusions: confused[i]
                .iter()
                .map(|(&j, &n)| (classes[j].clone(), n))
                .collect(),
        })
        .collect();
    Ok(ActionScoreTable { rows })
}

impl ActionScoreTable {
    pub fn row(&self, class_name: &str) -> Option<&ActionScore> {
        self.rows.iter().find(|r| r.class_name == class_name)
    }

    /// Render as aligned text with Action, Score, and Confused-with columns.
    pub fn render(&self) -> String {
        let name_width = self
            .rows
            .iter()
            .map(|r| r.class_name.len())
            .chain(["Action".len()])
            .max()
            .unwrap_or(6);
        let mut out = format!("{:<name_width$}  Score  Confused with\n", "Action");
        for r in &self.rows {
            let confusions: Vec<String> = r
                .confusions
                .iter()
                .map(|(name, count)| format!("{name} ({count})"))
                .collect();
            out.push_str(&format!(
                "{:<name_width$}  {:>2}/{:<2}  {}\n",
                r.class_name,
                r.correct,
                r.trials,
                confusions.join(", ")
            ));
        }
        out
    }

    /// Render as TSV: `class<TAB>correct<TAB>trials<TAB>confusions` where
    /// confusions are `name:count` joined by commas.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let confusions: Vec<String> = r
                .confusions
                .iter()
                .map(|(name, count)| format!("{name}:{count}"))
                .collect();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.class_name,
                r.correct,
                r.trials,
                confusions.join(",")
            ));
        }
        out
    }
}

/// Dense confusion counts: entry (i, j) is the number of records with true
/// class i predicted as class j, indices into `classes`.
pub fn confusion_matrix(
    records: &[TrialRecord],
    classes: &[String],
) -> Result<Vec<Vec<usize>>, FusionError> {
    let mut m = vec![vec![0usize; classes.len()]; classes.len()];
    for r in records {
        let t = class_index(classes, &r.true_class)?;
        let p = class_index(classes, &r.predicted_class)?;
        m[t][p] += 1;
    }
    Ok(m)
}

/// Parse the record file format: `sequence_id<TAB>true<TAB>predicted` per
/// line, `#` comments allowed.
pub fn parse_records(text: &str) -> Result<Vec<TrialRecord>, FusionError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(FusionError::MalformedRecord {
                line: i + 1,
                reason: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        records.push(TrialRecord {
            sequence_id: fields[0].to_string(),
            true_class: fields[1].to_string(),
            predicted_class: fields[2].to_string(),
        });
    }
    Ok(records)
}

/// Emit the record file format.
pub fn serialize_records(records: &[TrialRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            r.sequence_id, r.true_class, r.predicted_class
        ));
    }
    out
}
