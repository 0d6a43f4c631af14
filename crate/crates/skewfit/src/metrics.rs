//! Confusion-matrix metrics and pairwise-indicator AUC.

use crate::error::{Error, Result};

/// Binary confusion tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    /// Number of positive instances (tp + fn).
    pub fn n_pos(&self) -> u64 {
        self.tp + self.fn_
    }

    /// Number of negative instances (fp + tn).
    pub fn n_neg(&self) -> u64 {
        self.fp + self.tn
    }

    /// Number of predicted-positive instances (tp + fp).
    pub fn predicted_pos(&self) -> u64 {
        self.tp + self.fp
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// A metric value plus a flag marking a degenerate (empty) denominator.
///
/// Degenerate cases score 0 rather than erroring, so that e.g. a classifier
/// that never predicts positive gets F = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub degenerate: bool,
}

impl MetricValue {
    fn ratio(num: f64, denom: f64) -> Self {
        if denom == 0.0 {
            Self {
                value: 0.0,
                degenerate: true,
            }
        } else {
            Self {
                value: num / denom,
                degenerate: false,
            }
        }
    }
}

/// Scores paired with ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLabels {
    scores: Vec<f64>,
    labels: Vec<u8>,
}

impl ScoredLabels {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyInput);
        }
        if scores.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: scores.len(),
                got: labels.len(),
            });
        }
        if !scores.iter().all(|s| s.is_finite() && (0.0..=1.0).contains(s)) {
            return Err(Error::InvalidParameter(
                "scores must be finite and in [0, 1]".into(),
            ));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
        }
        Ok(Self { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Tally predictions at a threshold: predicted positive iff score >= t.
pub fn confusion(scored: &ScoredLabels, threshold: f64) -> Result<ConfusionCounts> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be in [0, 1], got {threshold}"
        )));
    }
    let mut c = ConfusionCounts::new(0, 0, 0, 0);
    for (&s, &y) in scored.scores.iter().zip(&scored.labels) {
        match (s >= threshold, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// TP / (TP + FP).
pub fn precision(c: &ConfusionCounts) -> MetricValue {
    MetricValue::ratio(c.tp as f64, c.predicted_pos() as f64)
}

/// TP / (TP + FN).
pub fn recall(c: &ConfusionCounts) -> MetricValue {
    MetricValue::ratio(c.tp as f64, c.n_pos() as f64)
}

/// Alpha-weighted F: TP / (alpha * n_p + (1 - alpha) * m_p).
///
/// Computed in this single-fraction form rather than through reciprocals of
/// precision and recall, so zero precision or recall cannot divide by zero.
pub fn f_alpha(c: &ConfusionCounts, alpha: f64) -> MetricValue {
    assert!(
        (0.0..=1.0).contains(&alpha),
        "alpha must be in [0, 1], got {alpha}"
    );
    let denom = alpha * c.n_pos() as f64 + (1.0 - alpha) * c.predicted_pos() as f64;
    MetricValue::ratio(c.tp as f64, denom)
}

/// Harmonic-mean F, identical to `f_alpha` at alpha = 1/2.
pub fn f_measure(c: &ConfusionCounts) -> MetricValue {
    f_alpha(c, 0.5)
}

/// (TP + TN) / n.
pub fn accuracy(c: &ConfusionCounts) -> MetricValue {
    MetricValue::ratio((c.tp + c.tn) as f64, c.total() as f64)
}

/// Fraction of (positive, negative) score pairs correctly ordered, with tied
/// pairs counting one half (Mann-Whitney convention).
///
/// Runs in O(n log n) via average ranks.
pub fn auc(scored: &ScoredLabels) -> Result<f64> {
    let (mw, _) = ranked_auc(scored)?;
    Ok(mw)
}

/// AUC with the strict pairwise indicator: tied pairs count zero.
pub fn auc_strict(scored: &ScoredLabels) -> Result<f64> {
    let (_, strict) = ranked_auc(scored)?;
    Ok(strict)
}

fn ranked_auc(scored: &ScoredLabels) -> Result<(f64, f64)> {
    let n = scored.len();
    let n_pos = scored.labels.iter().filter(|&&y| y == 1).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassScores);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scored.scores[a].total_cmp(&scored.scores[b]));

    let mut rank_sum_pos = 0.0f64;
    let mut tied_pairs = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && scored.scores[order[j]] == scored.scores[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tie group [i, j)
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let group_pos = order[i..j].iter().filter(|&&k| scored.labels[k] == 1).count();
        let group_neg = (j - i) - group_pos;
        rank_sum_pos += avg_rank * group_pos as f64;
        tied_pairs += group_pos as f64 * group_neg as f64;
        i = j;
    }

    let np = n_pos as f64;
    let nn = n_neg as f64;
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    let mw = u / (np * nn);
    let strict = (u - tied_pairs / 2.0) / (np * nn);
    Ok((mw, strict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding;
    use rand::Rng;

    /// O(n^2) oracle straight from the pairwise definition.
    fn brute_auc(scored: &ScoredLabels, tie_half: bool) -> f64 {
        let mut won = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in scored.labels().iter().enumerate() {
            if yi != 1 {
                continue;
            }
            for (j, &yj) in scored.labels().iter().enumerate() {
                if yj != 0 {
                    continue;
                }
                pairs += 1.0;
                let (pi, pj) = (scored.scores()[i], scored.scores()[j]);
                if pi > pj {
                    won += 1.0;
                } else if pi == pj && tie_half {
                    won += 0.5;
                }
            }
        }
        won / pairs
    }

    fn sl(scores: &[f64], labels: &[u8]) -> ScoredLabels {
        ScoredLabels::new(scores.to_vec(), labels.to_vec()).unwrap()
    }

    #[test]
    fn confusion_perfect_classifier() {
        let s = sl(&[1.0, 0.0, 1.0, 0.0], &[1, 0, 1, 0]);
        let c = confusion(&s, 0.5).unwrap();
        assert_eq!(c, ConfusionCounts::new(2, 0, 0, 2));
    }

    #[test]
    fn confusion_all_negative_predictions() {
        let s = sl(&[0.4; 6], &[1, 1, 1, 0, 0, 0]);
        let c = confusion(&s, 0.5).unwrap();
        assert_eq!(c.tp, 0);
        assert_eq!(c.fn_, 3);
        assert_eq!(c.tn, 3);
    }

    #[test]
    fn confusion_mixed_tally_and_boundary() {
        let s = sl(&[0.9, 0.4, 0.6], &[1, 1, 0]);
        let c = confusion(&s, 0.5).unwrap();
        assert_eq!(c, ConfusionCounts::new(1, 1, 1, 0));
        // boundary inclusive: score == threshold predicts positive
        let s = sl(&[0.5], &[1]);
        assert_eq!(confusion(&s, 0.5).unwrap().tp, 1);
    }

    #[test]
    fn precision_recall_basic_values() {
        let c = ConfusionCounts::new(3, 1, 2, 0);
        assert_eq!(precision(&c).value, 0.75);
        assert_eq!(recall(&c).value, 0.6);

        let c = ConfusionCounts::new(5, 0, 0, 1);
        assert_eq!(precision(&c).value, 1.0);
        assert_eq!(recall(&c).value, 1.0);

        let none = ConfusionCounts::new(0, 0, 0, 4);
        assert!(precision(&none).degenerate);
        assert_eq!(precision(&none).value, 0.0);
        let c = ConfusionCounts::new(0, 2, 0, 2);
        assert!(recall(&c).degenerate);
    }

    #[test]
    fn f_alpha_matches_harmonic_mean_and_endpoints() {
        let c = ConfusionCounts::new(3, 1, 2, 0);
        let f = f_alpha(&c, 0.5);
        assert!((f.value - 2.0 / 3.0).abs() < 1e-15);
        // harmonic mean of precision .75 and recall .6
        let harmonic = 2.0 / (1.0 / 0.75 + 1.0 / 0.6);
        assert!((f.value - harmonic).abs() < 1e-15);
        assert_eq!(f_alpha(&c, 1.0).value, recall(&c).value);
        assert_eq!(f_alpha(&c, 0.0).value, precision(&c).value);
        assert_eq!(f_measure(&c), f_alpha(&c, 0.5));
    }

    #[test]
    fn accuracy_values() {
        assert_eq!(accuracy(&ConfusionCounts::new(2, 0, 0, 2)).value, 1.0);
        assert_eq!(accuracy(&ConfusionCounts::new(0, 2, 2, 0)).value, 0.0);
        assert_eq!(accuracy(&ConfusionCounts::new(1, 1, 1, 1)).value, 0.5);
    }

    #[test]
    fn auc_small_cases() {
        // pos {0.9, 0.4}, neg {0.5, 0.1}: 3 of 4 pairs ordered
        let s = sl(&[0.9, 0.4, 0.5, 0.1], &[1, 1, 0, 0]);
        assert!((auc(&s).unwrap() - 0.75).abs() < 1e-15);
        assert!((brute_auc(&s, true) - 0.75).abs() < 1e-15);

        let s = sl(&[0.8, 0.9, 0.1, 0.2], &[1, 1, 0, 0]);
        assert_eq!(auc(&s).unwrap(), 1.0);

        let s = sl(&[0.3; 5], &[1, 1, 0, 0, 0]);
        assert_eq!(auc(&s).unwrap(), 0.5);
        assert_eq!(auc_strict(&s).unwrap(), 0.0);
    }

    #[test]
    fn auc_rejects_single_class() {
        let s = sl(&[0.1, 0.2], &[1, 1]);
        assert!(matches!(auc(&s), Err(Error::SingleClassScores)));
    }

    #[test]
    fn auc_matches_brute_force_with_ties() {
        let mut rng = seeding::rng(99);
        for trial in 0..200 {
            let n = rng.random_range(2..=120);
            // Half the trials draw from a coarse grid to force heavy ties.
            let coarse = trial % 2 == 0;
            let scores: Vec<f64> = (0..n)
                .map(|_| {
                    if coarse {
                        rng.random_range(0..=4) as f64 / 4.0
                    } else {
                        rng.random_range(0.0..1.0)
                    }
                })
                .collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1) as u8).collect();
            labels[0] = 1;
            if n > 1 {
                labels[1] = 0;
            } else {
                continue;
            }
            let s = sl(&scores, &labels);
            let fast = auc(&s).unwrap();
            let slow = brute_auc(&s, true);
            assert!((fast - slow).abs() < 1e-12, "mw mismatch: {fast} vs {slow}");
            let fast = auc_strict(&s).unwrap();
            let slow = brute_auc(&s, false);
            assert!((fast - slow).abs() < 1e-12, "strict mismatch: {fast} vs {slow}");
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let mut rng = seeding::rng(123);
        let scores: Vec<f64> = (0..80).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut labels: Vec<u8> = (0..80).map(|_| rng.random_range(0..=1) as u8).collect();
        labels[0] = 1;
        labels[1] = 0;
        let base = auc(&sl(&scores, &labels)).unwrap();
        let squared: Vec<f64> = scores.iter().map(|s| s * s).collect();
        let rooted: Vec<f64> = scores.iter().map(|s| s.sqrt()).collect();
        assert!((auc(&sl(&squared, &labels)).unwrap() - base).abs() < 1e-12);
        assert!((auc(&sl(&rooted, &labels)).unwrap() - base).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn metric_identities_and_bounds(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 0u64..500) {
            let c = ConfusionCounts::new(tp, fp, fn_, tn);
            proptest::prop_assert_eq!(f_alpha(&c, 0.5).value, f_measure(&c).value);
            proptest::prop_assert_eq!(f_alpha(&c, 1.0).value, recall(&c).value);
            proptest::prop_assert_eq!(f_alpha(&c, 0.0).value, precision(&c).value);
            for m in [precision(&c), recall(&c), f_measure(&c), accuracy(&c)] {
                proptest::prop_assert!((0.0..=1.0).contains(&m.value));
            }
        }
    }
}
