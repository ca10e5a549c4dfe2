//! Per-class prediction scores, shared by the skeleton stream, the depth
//! stream, and fusion.

use crate::numfmt::format_exact;
use crate::scalar::Scalar;

/// A named per-class score distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector<T> {
    pub classes: Vec<String>,
    pub scores: Vec<T>,
}

impl<T: Scalar> ScoreVector<T> {
    pub fn new(classes: Vec<String>, scores: Vec<T>) -> Self {
        assert_eq!(classes.len(), scores.len(), "one score per class");
        Self { classes, scores }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Nonnegative and sums to 1 within `tol`.
    pub fn is_distribution(&self, tol: T) -> bool {
        if self.is_empty() || self.scores.iter().any(|&s| s < T::zero() || !s.is_finite()) {
            return false;
        }
        let total: T = self.scores.iter().copied().sum();
        (total - T::one()).abs() <= tol
    }

    /// Render as score-file text: one `class<TAB>score` line per class.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, &score) in self.classes.iter().zip(&self.scores) {
            out.push_str(name);
            out.push('\t');
            out.push_str(&format_exact(score));
            out.push('\n');
        }
        out
    }

    /// Parse the [`to_text`](Self::to_text) format. Returns `None` on any
    /// malformed line.
    pub fn from_text(text: &str) -> Option<Self> {
        let mut classes = Vec::new();
        let mut scores = Vec::new();
        for line in text.lines() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, score) = line.split_once('\t')?;
            classes.push(name.to_string());
            scores.push(score.trim().parse().ok()?);
        }
        if classes.is_empty() {
            return None;
        }
        Some(Self { classes, scores })
    }
}

/// Numerically-stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}
