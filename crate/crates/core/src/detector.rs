//! Sliding-window change-point detection driver.
//!
//! At every evaluated timestamp `t` the test sample holds the embeddings
//! anchored at `t, ..., t-n+1` and the reference sample those anchored at
//! `t-n, ..., t-2n+1`. Both are split in half; the estimator is fit on the
//! training halves and the dissimilarity is computed from its predictions
//! on the validation halves, averaged over `m` independent splits.
//!
//! All randomness at `t` is derived from `(seed, t, iteration)`, so a
//! timestamp's score does not depend on the stride or on which other
//! timestamps are evaluated, and timestamps can be processed in parallel.

use crate::dissimilarity::{kl_score, pe_score, proba_from_ratio, ratio_from_proba, ScoreKind, DEFAULT_CLIP_EPS};
use crate::error::{CpdError, Result};
use crate::estimator::{self, EstimatorKind, EstimatorParams, FittedEstimator};
use crate::exec::Execution;
use crate::kernel;
use crate::rng::{derive_seed, stream};
use crate::timeseries::{make_sample, random_split, Rows, TimeSeries};

/// Per-window feature scaling applied before fitting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    /// `Window` for the neural estimators, `None` otherwise.
    #[default]
    Auto,
    /// Raw embeddings.
    None,
    /// Z-score every feature with statistics of the two training halves.
    Window,
}

impl Scaling {
    /// Concrete scaling for an estimator. Trees are invariant to per-feature affine maps and the
    /// kernel width is cross-validated; only the fixed-step networks need standardized inputs.
    pub fn resolve(self, estimator: EstimatorKind) -> Scaling {
        match self {
            Scaling::Auto => match estimator {
                EstimatorKind::NnRulsif | EstimatorKind::NnClassifier => Scaling::Window,
                _ => Scaling::None,
            },
            s => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectorConfig {
    /// Embedding length.
    pub k: usize,
    /// Embeddings per sample.
    pub n: usize,
    /// Random splits averaged per timestamp.
    pub m: usize,
    /// Stride between evaluated timestamps.
    pub dt: usize,
    pub estimator: EstimatorKind,
    pub score: ScoreKind,
    pub clip_eps: f64,
    pub seed: u64,
    pub threshold: Option<f64>,
    pub scaling: Scaling,
    pub params: EstimatorParams,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self::new(EstimatorKind::GbdtClassifier)
    }
}

impl DetectorConfig {
    /// `k = 10`, `n = 500`, `m = 1`, stride 1, with the estimator's usual score.
    pub fn new(estimator: EstimatorKind) -> Self {
        Self {
            k: 10,
            n: 500,
            m: 1,
            dt: 1,
            estimator,
            score: estimator.default_score(),
            clip_eps: DEFAULT_CLIP_EPS,
            seed: 0,
            threshold: None,
            scaling: Scaling::default(),
            params: EstimatorParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.n < 4 || self.m < 1 || self.dt < 1 {
            return Err(CpdError::invalid(format!(
                "need k >= 1, n >= 4, m >= 1, dt >= 1; got k = {}, n = {}, m = {}, dt = {}",
                self.k, self.n, self.m, self.dt
            )));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 0.5) {
            return Err(CpdError::invalid("clip_eps must lie in (0, 0.5)"));
        }
        if let Some(mu) = self.threshold {
            if !mu.is_finite() {
                return Err(CpdError::invalid("threshold must be finite"));
            }
        }
        Ok(())
    }

    /// First evaluable timestamp, `k - 1 + 2n`.
    pub fn first_time(&self) -> usize {
        self.k - 1 + 2 * self.n
    }

    /// Timestamps evaluated on a series of length `len`.
    pub fn evaluated_times(&self, len: usize) -> Vec<usize> {
        (self.first_time()..len).step_by(self.dt).collect()
    }
}

/// Dissimilarity trace `D(t)` over the evaluated timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSeries {
    pub entries: Vec<(usize, f64)>,
    pub config: Option<DetectorConfig>,
}

impl ScoreSeries {
    /// Checks ordering and finiteness of externally supplied entries.
    pub fn from_entries(entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(CpdError::range("score timestamps must be strictly increasing"));
        }
        if let Some((t, _)) = entries.iter().find(|(_, d)| !d.is_finite()) {
            return Err(CpdError::range(format!("non-finite score at t = {t}")));
        }
        Ok(Self { entries, config: None })
    }

    pub fn times(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Timestamp of the largest score (earliest on ties).
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &(t, d) in &self.entries {
            if best.is_none_or(|(_, b)| d > b) {
                best = Some((t, d));
            }
        }
        best.map(|b| b.0)
    }

    pub fn get(&self, t: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&t, |e| e.0)
            .ok()
            .map(|i| self.entries[i].1)
    }
}

/// Detected change points: the first timestamp of each run with `D >= mu`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlarmList {
    pub detections: Vec<usize>,
    pub mu: f64,
}

pub fn threshold_alarms(scores: &ScoreSeries, mu: f64) -> AlarmList {
    let mut detections = Vec::new();
    let mut above = false;
    for &(t, d) in &scores.entries {
        let now = d >= mu;
        if now && !above {
            detections.push(t);
        }
        above = now;
    }
    AlarmList { detections, mu }
}

pub fn detect(series: &TimeSeries, config: &DetectorConfig) -> Result<ScoreSeries> {
    detect_with(series, config, Execution::default())
}

pub fn detect_with(series: &TimeSeries, config: &DetectorConfig, exec: Execution) -> Result<ScoreSeries> {
    config.validate()?;
    let need = config.k + 2 * config.n;
    if series.len() < need {
        return Err(CpdError::range(format!(
            "series of length {} is too short: k + 2n = {need} timestamps are required",
            series.len()
        )));
    }
    let times = config.evaluated_times(series.len());
    let values = exec.try_map(&times, |&t| score_at(series, config, t))?;
    Ok(ScoreSeries {
        entries: times.into_iter().zip(values).collect(),
        config: Some(config.clone()),
    })
}

/// Column means and standard deviations of the stacked rows.
fn column_stats(a: &Rows, b: &Rows) -> (Vec<f64>, Vec<f64>) {
    let p = a.ncols();
    let count = (a.nrows() + b.nrows()) as f64;
    let mut mean = vec![0.0; p];
    for r in a.iter().chain(b.iter()) {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; p];
    for r in a.iter().chain(b.iter()) {
        for j in 0..p {
            var[j] += (r[j] - mean[j]).powi(2);
        }
    }
    let sd = var
        .into_iter()
        .map(|v| {
            let s = (v / count).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, sd)
}

struct Halves {
    ref_train: Rows,
    ref_valid: Rows,
    test_train: Rows,
    test_valid: Rows,
}

impl Halves {
    fn scaled(self, scaling: Scaling) -> Halves {
        match scaling {
            Scaling::None | Scaling::Auto => self,
            Scaling::Window => {
                let (mean, sd) = column_stats(&self.ref_train, &self.test_train);
                let z = |rows: &Rows| rows.map_columns(|j, v| (v - mean[j]) / sd[j]);
                Halves {
                    ref_train: z(&self.ref_train),
                    ref_valid: z(&self.ref_valid),
                    test_train: z(&self.test_train),
                    test_valid: z(&self.test_valid),
                }
            }
        }
    }
}

/// Ratio predictions, converting classifier probabilities to odds.
fn ratios(kind: EstimatorKind, model: &FittedEstimator, rows: &Rows, clip_eps: f64) -> Result<Vec<f64>> {
    let out = model.predict_rows(rows)?;
    if kind.is_classifier() {
        out.into_iter().map(|f| ratio_from_proba(f, clip_eps)).collect()
    } else {
        Ok(out)
    }
}

/// Test-class probabilities, converting ratio predictions via `w / (1 + w)`.
fn probabilities(kind: EstimatorKind, model: &FittedEstimator, rows: &Rows) -> Result<Vec<f64>> {
    let out = model.predict_rows(rows)?;
    if kind.is_classifier() {
        Ok(out)
    } else {
        Ok(out.into_iter().map(proba_from_ratio).collect())
    }
}

/// Dissimilarity `D(t)` at a single timestamp.
pub fn score_at(series: &TimeSeries, config: &DetectorConfig, t: usize) -> Result<f64> {
    let (k, n) = (config.k, config.n);
    if t < config.first_time() || t >= series.len() {
        return Err(CpdError::range(format!(
            "timestamp {t} is not evaluable (valid range {}..{})",
            config.first_time(),
            series.len()
        )));
    }
    let reference = make_sample(series, t - n, k, n)?;
    let test = make_sample(series, t, k, n)?;
    let kind = config.estimator;
    let params = &config.params;
    let pe = config.score == ScoreKind::PearsonSymmetric;
    // Kernel width and penalty, cross-validated on the first split only.
    let mut kernel_choice: [Option<(f64, f64)>; 2] = [None, None];

    let mut total = 0.0;
    for iter in 0..config.m {
        let base = derive_seed(config.seed, &[t as u64, iter as u64]);
        let sr = random_split(reference.rows(), 0.5, derive_seed(base, &[stream::REF_SPLIT]))?;
        let st = random_split(test.rows(), 0.5, derive_seed(base, &[stream::TEST_SPLIT]))?;
        let h = Halves {
            ref_train: sr.train,
            ref_valid: sr.valid,
            test_train: st.train,
            test_valid: st.valid,
        }
        .scaled(config.scaling.resolve(config.estimator));

        if kind == EstimatorKind::KernelRulsif && iter == 0 {
            let kc = &params.kernel;
            let cv_seed = derive_seed(base, &[stream::CV]);
            kernel_choice[0] = Some(kernel::cross_validate(
                &h.ref_train,
                &h.test_train,
                &kc.grid,
                kc.alpha,
                kc.n_centers,
                cv_seed,
            )?);
            if pe {
                kernel_choice[1] = Some(kernel::cross_validate(
                    &h.test_train,
                    &h.ref_train,
                    &kc.grid,
                    kc.alpha,
                    kc.n_centers,
                    cv_seed,
                )?);
            }
        }

        let forward = estimator::fit(
            kind,
            params,
            &h.ref_train,
            &h.test_train,
            kernel_choice[0],
            derive_seed(base, &[stream::FIT_FORWARD]),
        )?;
        let d = if pe {
            let swapped = estimator::fit(
                kind,
                params,
                &h.test_train,
                &h.ref_train,
                kernel_choice[1],
                derive_seed(base, &[stream::FIT_SWAPPED]),
            )?;
            let w_test = ratios(kind, &forward, &h.test_valid, config.clip_eps)?;
            let w_ref = ratios(kind, &swapped, &h.ref_valid, config.clip_eps)?;
            pe_score(&w_test, &w_ref)?
        } else {
            let f_test = probabilities(kind, &forward, &h.test_valid)?;
            let f_ref = probabilities(kind, &forward, &h.ref_valid)?;
            kl_score(&f_test, &f_ref, config.clip_eps)?
        };
        total += d / config.m as f64;
    }
    if !total.is_finite() {
        return Err(CpdError::Solver(format!("non-finite dissimilarity at t = {t}")));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, Normal};

    fn noise(len: usize, seed: u64) -> TimeSeries {
        let mut rng = rng_from_seed(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        TimeSeries::univariate(&(0..len).map(|_| d.sample(&mut rng)).collect::<Vec<_>>()).unwrap()
    }

    fn small(kind: EstimatorKind) -> DetectorConfig {
        DetectorConfig {
            k: 3,
            n: 40,
            dt: 7,
            ..DetectorConfig::new(kind)
        }
    }

    #[test]
    fn auto_scaling_standardizes_only_networks() {
        for kind in EstimatorKind::ALL {
            let want = match kind {
                EstimatorKind::NnRulsif | EstimatorKind::NnClassifier => Scaling::Window,
                _ => Scaling::None,
            };
            assert_eq!(Scaling::Auto.resolve(kind), want);
            assert_eq!(Scaling::None.resolve(kind), Scaling::None);
            assert_eq!(Scaling::Window.resolve(kind), Scaling::Window);
        }
    }

    #[test]
    fn alarms_mark_run_starts() {
        let s =
            ScoreSeries::from_entries(vec![(10, 0.0), (11, 1.0), (12, 2.0), (13, 1.0), (14, 0.0), (15, 3.0)]).unwrap();
        assert_eq!(threshold_alarms(&s, 1.5).detections, vec![12, 15]);
        assert!(threshold_alarms(&s, 10.0).detections.is_empty());
        assert_eq!(threshold_alarms(&s, -1.0).detections, vec![10]);
    }

    #[test]
    fn score_series_validation() {
        assert!(ScoreSeries::from_entries(vec![(3, 0.0), (3, 1.0)]).is_err());
        assert!(ScoreSeries::from_entries(vec![(3, f64::NAN)]).is_err());
        let s = ScoreSeries::from_entries(vec![(1, 0.5), (4, 2.0), (9, 2.0)]).unwrap();
        assert_eq!(s.argmax(), Some(4));
        assert_eq!(s.get(9), Some(2.0));
        assert_eq!(s.get(5), None);
    }

    #[test]
    fn too_short_series_errors() {
        let cfg = small(EstimatorKind::NnClassifier);
        let s = noise(cfg.k + 2 * cfg.n - 1, 1);
        assert!(matches!(detect(&s, &cfg), Err(CpdError::OutOfRange(_))));
        let s = noise(cfg.k + 2 * cfg.n, 1);
        let out = detect(&s, &cfg).unwrap();
        assert_eq!(out.times(), vec![cfg.first_time()]);
    }

    #[test]
    fn invalid_config_rejected() {
        let s = noise(500, 1);
        for cfg in [
            DetectorConfig {
                n: 3,
                ..small(EstimatorKind::NnRulsif)
            },
            DetectorConfig {
                m: 0,
                ..small(EstimatorKind::NnRulsif)
            },
            DetectorConfig {
                dt: 0,
                ..small(EstimatorKind::NnRulsif)
            },
        ] {
            assert!(matches!(detect(&s, &cfg), Err(CpdError::InvalidArgument(_))));
        }
    }

    #[test]
    fn windows_are_adjacent_and_disjoint() {
        let cfg = small(EstimatorKind::NnRulsif);
        let s = noise(400, 2);
        let t = 250;
        let r = make_sample(&s, t - cfg.n, cfg.k, cfg.n).unwrap();
        let te = make_sample(&s, t, cfg.k, cfg.n).unwrap();
        let mut anchors: Vec<usize> = r.anchors().chain(te.anchors()).collect();
        anchors.sort_unstable();
        assert_eq!(anchors, (t + 1 - 2 * cfg.n..=t).collect::<Vec<_>>());
    }

    #[test]
    fn all_estimators_and_scores_run() {
        let s = noise(200, 3);
        for kind in EstimatorKind::ALL {
            for score in [ScoreKind::PearsonSymmetric, ScoreKind::KlSymmetric] {
                let cfg = DetectorConfig {
                    score,
                    dt: 50,
                    ..small(kind)
                };
                let out = detect(&s, &cfg).unwrap();
                assert!(!out.is_empty());
                assert_eq!(out.entries[0].0, cfg.first_time());
                assert!(out.values().iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn deterministic_and_stride_consistent() {
        let s = noise(300, 4);
        let fine = DetectorConfig {
            dt: 1,
            ..small(EstimatorKind::GbdtClassifier)
        };
        let coarse = DetectorConfig { dt: 10, ..fine.clone() };
        let a = detect_with(&s, &coarse, Execution::Sequential).unwrap();
        let b = detect_with(&s, &coarse, Execution::Parallel).unwrap();
        assert_eq!(a.entries, b.entries);
        let full = detect(&s, &fine).unwrap();
        for (t, d) in a.entries {
            assert_eq!(full.get(t), Some(d));
        }
    }

    #[test]
    fn averaging_reduces_variance() {
        let s = noise(300, 5);
        let t = 200;
        let var_of = |m: usize| {
            let vals: Vec<f64> = (0..20)
                .map(|seed| {
                    let cfg = DetectorConfig {
                        m,
                        seed,
                        ..small(EstimatorKind::NnClassifier)
                    };
                    score_at(&s, &cfg, t).unwrap()
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / 20.0;
            vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 19.0
        };
        let (v1, v5) = (var_of(1), var_of(5));
        assert!(v5 < v1, "m=5 variance {v5} not below m=1 variance {v1}");
    }
}
