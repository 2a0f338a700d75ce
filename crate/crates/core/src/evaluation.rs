//! ROC AUC of dissimilarity scores against change-point labels, and
//! aggregation over repeated runs.

use crate::detector::ScoreSeries;
use crate::error::{CpdError, Result};

/// AUC as an exact fraction: `twice_u / (2 * positives * negatives)`, where
/// `twice_u` counts every positive-over-negative win as 2 and every tie as 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AucFraction {
    pub twice_u: u64,
    pub positives: u64,
    pub negatives: u64,
}

impl AucFraction {
    pub fn value(&self) -> f64 {
        self.twice_u as f64 / (2 * self.positives * self.negatives) as f64
    }
}

fn class_counts(scores: &[f64], labels: &[u8]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(CpdError::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(CpdError::invalid("scores contain NaN"));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(CpdError::invalid("labels must be 0 or 1"));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(CpdError::UndefinedMetric(
            "ROC AUC needs at least one positive and one negative label".to_string(),
        ));
    }
    Ok((pos, neg))
}

/// Mann-Whitney form with tied scores sharing their average rank.
pub fn roc_auc_exact(scores: &[f64], labels: &[u8]) -> Result<AucFraction> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of doubled ranks of the positives; a tie group at sorted positions
    // [i, j) has average rank (i + 1 + j) / 2.
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        // -0.0 and 0.0 tie.
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let group_pos = order[i..j].iter().filter(|&&r| labels[r] == 1).count() as u64;
        twice_rank_sum += group_pos * (i as u64 + 1 + j as u64);
        i = j;
    }
    Ok(AucFraction {
        twice_u: twice_rank_sum - pos * (pos + 1),
        positives: pos,
        negatives: neg,
    })
}

pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    roc_auc_exact(scores, labels).map(|f| f.value())
}

/// Scores paired with the labels of their timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledRun {
    pub times: Vec<usize>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl LabeledRun {
    pub fn auc(&self) -> Result<f64> {
        roc_auc(&self.scores, &self.labels)
    }
}

/// Picks `labels[t]` for every evaluated `t`.
pub fn align(scores: &ScoreSeries, labels: &[u8]) -> Result<LabeledRun> {
    let mut run = LabeledRun {
        times: Vec::with_capacity(scores.len()),
        scores: Vec::with_capacity(scores.len()),
        labels: Vec::with_capacity(scores.len()),
    };
    for &(t, d) in &scores.entries {
        let label = *labels.get(t).ok_or_else(|| {
            CpdError::range(format!(
                "labels cover {} timestamps but scores reach t = {t}",
                labels.len()
            ))
        })?;
        run.times.push(t);
        run.scores.push(d);
        run.labels.push(label);
    }
    Ok(run)
}

/// Mean, sample standard deviation and standard error over runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSummary {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub runs: usize,
}

pub fn aggregate_runs(aucs: &[f64]) -> Result<RunSummary> {
    if aucs.is_empty() {
        return Err(CpdError::invalid("cannot aggregate zero runs"));
    }
    let r = aucs.len() as f64;
    let mean = aucs.iter().sum::<f64>() / r;
    let std = if aucs.len() > 1 {
        (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(RunSummary {
        mean,
        std,
        stderr: std / r.sqrt(),
        runs: aucs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert_eq!(roc_auc(&[0.1, 0.2, 0.3, 0.4], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 5], &[0, 1, 0, 1, 1]).unwrap(), 0.5);
    }

    #[test]
    fn auc_errors() {
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[1, 1]),
            Err(CpdError::UndefinedMetric(_))
        ));
        assert!(roc_auc(&[0.1], &[1, 0]).is_err());
        assert!(roc_auc(&[f64::NAN, 0.2], &[1, 0]).is_err());
    }

    #[test]
    fn align_picks_evaluated_labels() {
        let labels: Vec<u8> = (0..100).map(|t| u8::from(t >= 60)).collect();
        let s = ScoreSeries::from_entries((20..100).step_by(25).map(|t| (t, t as f64)).collect()).unwrap();
        let run = align(&s, &labels).unwrap();
        assert_eq!(run.times, vec![20, 45, 70, 95]);
        assert_eq!(run.labels, vec![0, 0, 1, 1]);
        assert!(align(&s, &labels[..90]).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let s = aggregate_runs(&[0.8, 0.8, 0.8]).unwrap();
        assert_abs_diff_eq!(s.mean, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(s.stderr, 0.0, epsilon = 1e-15);
        let s = aggregate_runs(&[0.7, 0.9]).unwrap();
        assert_abs_diff_eq!(s.mean, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(s.std, 0.141421356, epsilon = 1e-8);
        assert_abs_diff_eq!(s.stderr, 0.1, epsilon = 1e-12);
        let s = aggregate_runs(&[0.6]).unwrap();
        assert_eq!((s.mean, s.stderr), (0.6, 0.0));
        assert!(aggregate_runs(&[]).is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec((0i32..12).prop_map(|v| v as f64 * 0.5), n),
                proptest::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_transform((s, l) in instance()) {
            prop_assume!(l.contains(&0) && l.contains(&1));
            let t: Vec<f64> = s.iter().map(|v| (v * 0.7).exp() - 3.0).collect();
            prop_assert_eq!(roc_auc(&s, &l).unwrap(), roc_auc(&t, &l).unwrap());
        }

        #[test]
        fn negation_complements((s, l) in instance()) {
            prop_assume!(l.contains(&0) && l.contains(&1));
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            let a = roc_auc_exact(&s, &l).unwrap();
            let b = roc_auc_exact(&neg, &l).unwrap();
            prop_assert_eq!(a.twice_u + b.twice_u, 2 * a.positives * a.negatives);
            prop_assert_eq!(roc_auc(&s, &l).unwrap() + roc_auc(&neg, &l).unwrap(), 1.0);
        }
    }
}
