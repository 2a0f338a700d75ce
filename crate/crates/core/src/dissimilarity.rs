//! Dissimilarity scores between a reference and a test window.
//!
//! * Pearson form: `mean(w on test) + mean(w' on reference) - 2`, where `w'`
//!   comes from a second fit with the roles of the two samples swapped.
//! * Symmetric KL form: `mean_test log(f / (1 - f)) + mean_ref log((1 - f) / f)`
//!   for a single classifier `f` predicting membership of the test sample.

use crate::error::{CpdError, Result};

pub const DEFAULT_CLIP_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    PearsonSymmetric,
    KlSymmetric,
}

impl ScoreKind {
    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::PearsonSymmetric => "pe",
            ScoreKind::KlSymmetric => "kl",
        }
    }
}

fn check_clip(clip_eps: f64) -> Result<()> {
    if !(clip_eps > 0.0 && clip_eps < 0.5) {
        return Err(CpdError::invalid(format!(
            "clip_eps must lie in (0, 0.5), got {clip_eps}"
        )));
    }
    Ok(())
}

fn check_proba(f: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&f) {
        return Err(CpdError::invalid(format!("probability {f} outside [0, 1]")));
    }
    Ok(())
}

/// Odds `f / (1 - f)` of a clipped probability, i.e. the density ratio for
/// equally sized samples.
pub fn ratio_from_proba(f: f64, clip_eps: f64) -> Result<f64> {
    check_clip(clip_eps)?;
    check_proba(f)?;
    let f = f.clamp(clip_eps, 1.0 - clip_eps);
    Ok(f / (1.0 - f))
}

/// Inverse of [`ratio_from_proba`]; negative ratios count as 0.
pub fn proba_from_ratio(w: f64) -> f64 {
    let w = w.max(0.0);
    if w.is_infinite() {
        1.0
    } else {
        w / (1.0 + w)
    }
}

fn floored_mean(values: &[f64]) -> f64 {
    values.iter().map(|w| w.max(0.0)).sum::<f64>() / values.len() as f64
}

pub fn pe_score(w_on_test: &[f64], w_swapped_on_ref: &[f64]) -> Result<f64> {
    if w_on_test.is_empty() || w_swapped_on_ref.is_empty() {
        return Err(CpdError::invalid("Pearson score needs non-empty prediction lists"));
    }
    Ok(floored_mean(w_on_test) + floored_mean(w_swapped_on_ref) - 2.0)
}

fn mean_log_odds(values: &[f64], clip_eps: f64, complement: bool) -> Result<f64> {
    let mut acc = 0.0;
    for &f in values {
        check_proba(f)?;
        // Clipping f and 1 - f separately keeps the score exactly
        // antisymmetric under complementing the inputs.
        let p = f.clamp(clip_eps, 1.0 - clip_eps);
        let q = (1.0 - f).clamp(clip_eps, 1.0 - clip_eps);
        acc += if complement { q.ln() - p.ln() } else { p.ln() - q.ln() };
    }
    Ok(acc / values.len() as f64)
}

pub fn kl_score(f_on_test: &[f64], f_on_ref: &[f64], clip_eps: f64) -> Result<f64> {
    check_clip(clip_eps)?;
    if f_on_test.is_empty() || f_on_ref.is_empty() {
        return Err(CpdError::invalid("KL score needs non-empty prediction lists"));
    }
    Ok(mean_log_odds(f_on_test, clip_eps, false)? + mean_log_odds(f_on_ref, clip_eps, true)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn ratio_examples() {
        assert_eq!(ratio_from_proba(0.5, 1e-6).unwrap(), 1.0);
        assert_abs_diff_eq!(ratio_from_proba(0.9, 1e-6).unwrap(), 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ratio_from_proba(1.0, 1e-6).unwrap(), 999_999.0, epsilon = 1e-3);
        assert!(ratio_from_proba(1.1, 1e-6).is_err());
        assert!(ratio_from_proba(-0.1, 1e-6).is_err());
        assert!(ratio_from_proba(0.5, 0.0).is_err());
    }

    #[test]
    fn pe_examples() {
        assert_eq!(pe_score(&[1.0; 4], &[1.0; 3]).unwrap(), 0.0);
        assert_eq!(pe_score(&[2.0, 2.0], &[2.0, 2.0]).unwrap(), 2.0);
        assert_abs_diff_eq!(pe_score(&[1.5, 0.5, 1.0], &[1.0]).unwrap(), 0.0, epsilon = 1e-15);
        assert!(pe_score(&[], &[1.0]).is_err());
        assert_eq!(pe_score(&[-3.0, 0.0], &[-1.0]).unwrap(), -2.0);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_score(&[0.5, 0.5], &[0.5], 1e-6).unwrap(), 0.0);
        let expected = (9f64.ln() + 4f64.ln()) / 2.0 + (4f64.ln() + (7.0f64 / 3.0).ln()) / 2.0;
        let got = kl_score(&[0.9, 0.8], &[0.2, 0.3], 1e-6).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(got, 2.9086, epsilon = 1e-4);
        assert!(kl_score(&[], &[0.5], 1e-6).is_err());
        assert!(kl_score(&[1.2], &[0.5], 1e-6).is_err());
    }

    #[test]
    fn proba_ratio_round_trip() {
        for f in [0.01, 0.3, 0.5, 0.77, 0.99] {
            assert_abs_diff_eq!(proba_from_ratio(ratio_from_proba(f, 1e-6).unwrap()), f, epsilon = 1e-12);
        }
        assert_eq!(proba_from_ratio(-2.0), 0.0);
    }

    proptest! {
        #[test]
        fn pe_is_symmetric(u in proptest::collection::vec(-1.0f64..5.0, 1..20),
                           v in proptest::collection::vec(-1.0f64..5.0, 1..20)) {
            prop_assert_eq!(pe_score(&u, &v).unwrap(), pe_score(&v, &u).unwrap());
            prop_assert!(pe_score(&u, &v).unwrap() >= -2.0);
        }

        #[test]
        fn kl_swap_complement(a in proptest::collection::vec(0.0f64..=1.0, 1..20),
                              b in proptest::collection::vec(0.0f64..=1.0, 1..20)) {
            // Dyadic probabilities make 1 - f exact, so the identity holds bitwise.
            let q = |v: &Vec<f64>| v.iter().map(|x| (x * 1024.0).round() / 1024.0).collect::<Vec<_>>();
            let (a, b) = (q(&a), q(&b));
            let ca: Vec<f64> = a.iter().map(|x| 1.0 - x).collect();
            let cb: Vec<f64> = b.iter().map(|x| 1.0 - x).collect();
            let eps = 1.0 / 4096.0;
            prop_assert_eq!(kl_score(&a, &b, eps).unwrap(), kl_score(&cb, &ca, eps).unwrap());
        }

        #[test]
        fn kl_is_bounded(a in proptest::collection::vec(0.0f64..=1.0, 1..20),
                         b in proptest::collection::vec(0.0f64..=1.0, 1..20)) {
            let eps: f64 = 1e-6;
            let bound = 2.0 * ((1.0 - eps) / eps).ln();
            prop_assert!(kl_score(&a, &b, eps).unwrap().abs() <= bound + 1e-9);
        }
    }
}
