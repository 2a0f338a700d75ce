//! Gradient boosting over regression trees, in two flavours.
//!
//! * Ratio kind: functional-gradient descent on the RuLSIF loss. Every
//!   round fits a least-squares tree to the per-row negative gradients
//!   `-(1-alpha) w` (reference rows) and `1 - alpha w` (test rows) and adds
//!   `nu * h_m` to the running estimate.
//! * Classifier kind: logit boosting on binary cross-entropy with
//!   reference rows labelled 0 and test rows labelled 1. Leaves take one
//!   regularized Newton step `sum(y - p) / (sum p(1-p) + l2)`.

use rand::seq::index;
use rand_distr::{Distribution, Normal};

use super::tree::{grow_tree, RegressionTree, SortedColumns, TreeParams};
use crate::error::{CpdError, Result};
use crate::rng::rng_from_seed;
use crate::timeseries::Rows;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    Ratio,
    Classifier,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GbdtConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of each sample drawn (without replacement) per round.
    pub subsample: f64,
    /// RuLSIF mixing weight; ignored by the classifier.
    pub alpha: f64,
    /// Standard deviation of the per-row noise added to the initial ratio.
    pub init_noise_sd: f64,
    pub l2: f64,
    pub min_child_weight: f64,
}

impl GbdtConfig {
    /// 100 trees, depth 6, learning rate 0.2, alpha 0.1.
    pub fn rulsif() -> Self {
        Self {
            n_trees: 100,
            learning_rate: 0.2,
            max_depth: 6,
            min_leaf: 5,
            subsample: 1.0,
            alpha: 0.1,
            init_noise_sd: 0.1,
            l2: 0.0,
            min_child_weight: 0.0,
        }
    }

    /// 100 trees, depth 6, learning rate 0.1, unit L2 on leaves.
    pub fn classifier() -> Self {
        Self {
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: 6,
            min_leaf: 5,
            subsample: 1.0,
            alpha: 0.0,
            init_noise_sd: 0.0,
            l2: 1.0,
            min_child_weight: 1.0,
        }
    }

    fn validate(&self, kind: EnsembleKind) -> Result<()> {
        if self.n_trees < 1 {
            return Err(CpdError::invalid("boosting needs at least one round"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(CpdError::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(CpdError::invalid(format!(
                "subsample fraction must lie in (0, 1], got {}",
                self.subsample
            )));
        }
        if kind == EnsembleKind::Ratio && !(0.0..1.0).contains(&self.alpha) {
            return Err(CpdError::invalid(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.init_noise_sd >= 0.0) || !(self.l2 >= 0.0) {
            return Err(CpdError::invalid("noise scale and l2 must be non-negative"));
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            l2: self.l2,
            min_child_weight: self.min_child_weight,
        }
    }
}

/// A fitted additive tree model.
#[derive(Clone, Debug, PartialEq)]
pub struct BoostedEnsemble {
    pub trees: Vec<RegressionTree>,
    pub learning_rate: f64,
    /// 1 for ratio models; the initial logit for classifiers.
    pub base_value: f64,
    pub kind: EnsembleKind,
    pub alpha: f64,
    pub subsample: f64,
    pub n_features: usize,
}

impl BoostedEnsemble {
    /// Additive score before any link function.
    #[inline]
    fn raw(&self, x: &[f64]) -> f64 {
        let mut acc = self.base_value;
        for tree in &self.trees {
            acc += self.learning_rate * tree.predict(x);
        }
        acc
    }

    /// Ratio estimate for ratio models, test-class probability for classifiers.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(CpdError::invalid(format!(
                "input has {} features, ensemble expects {}",
                x.len(),
                self.n_features
            )));
        }
        let raw = self.raw(x);
        Ok(match self.kind {
            EnsembleKind::Ratio => raw,
            EnsembleKind::Classifier => sigmoid(raw),
        })
    }

    pub fn predict_rows(&self, rows: &Rows) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-row negative gradients for one boosting round.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTargets(pub Vec<f64>);

impl GradientTargets {
    /// RuLSIF negative gradients; `is_test[i]` marks test rows.
    pub fn rulsif(w: &[f64], is_test: &[bool], alpha: f64) -> Self {
        Self(
            w.iter()
                .zip(is_test)
                .map(|(&wi, &te)| if te { 1.0 - alpha * wi } else { -(1.0 - alpha) * wi })
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-round training losses recorded during a fit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitTrace {
    /// Loss before the first tree, then after every round.
    pub losses: Vec<f64>,
    /// Final in-sample predictions tracked incrementally (ratio kind: `w`,
    /// classifier kind: logits), reference rows first.
    pub train_predictions: Vec<f64>,
}

fn check_samples(reference: &Rows, test: &Rows) -> Result<()> {
    if reference.is_empty() || test.is_empty() {
        return Err(CpdError::invalid("reference and test samples must be non-empty"));
    }
    if reference.ncols() != test.ncols() {
        return Err(CpdError::invalid(format!(
            "reference has {} features, test has {}",
            reference.ncols(),
            test.ncols()
        )));
    }
    Ok(())
}

/// Mask of rows drawn for one round; each sample is subsampled separately.
fn round_mask(n_rf: usize, n_te: usize, fraction: f64, rng: &mut crate::rng::CpdRng) -> Option<Vec<bool>> {
    if fraction >= 1.0 {
        return None;
    }
    let mut mask = vec![false; n_rf + n_te];
    for (offset, n) in [(0, n_rf), (n_rf, n_te)] {
        let take = ((n as f64 * fraction).round() as usize).clamp(1, n);
        for i in index::sample(rng, n, take) {
            mask[offset + i] = true;
        }
    }
    Some(mask)
}

/// Empirical RuLSIF loss of in-sample ratios (reference rows first).
fn rulsif_objective(w: &[f64], n_rf: usize, alpha: f64) -> f64 {
    crate::kernel::rulsif_loss(&w[..n_rf], &w[n_rf..], alpha)
}

pub fn fit_gbdt_rulsif(reference: &Rows, test: &Rows, config: &GbdtConfig, seed: u64) -> Result<BoostedEnsemble> {
    fit_gbdt_rulsif_traced(reference, test, config, seed).map(|(m, _)| m)
}

pub fn fit_gbdt_rulsif_traced(
    reference: &Rows,
    test: &Rows,
    config: &GbdtConfig,
    seed: u64,
) -> Result<(BoostedEnsemble, FitTrace)> {
    config.validate(EnsembleKind::Ratio)?;
    check_samples(reference, test)?;
    let mut rng = rng_from_seed(seed);
    let rows = reference.stack(test)?;
    let n_rf = reference.nrows();
    let n = rows.nrows();
    let is_test: Vec<bool> = (0..n).map(|i| i >= n_rf).collect();
    let columns = SortedColumns::new(&rows);
    let hess = vec![1.0; n];
    let params = config.tree_params();
    let alpha = config.alpha;

    let mut w: Vec<f64> = if config.init_noise_sd > 0.0 {
        let noise = Normal::new(0.0, config.init_noise_sd).map_err(|e| CpdError::invalid(e.to_string()))?;
        (0..n).map(|_| 1.0 + noise.sample(&mut rng)).collect()
    } else {
        vec![1.0; n]
    };
    let mut trace = FitTrace {
        losses: vec![rulsif_objective(&w, n_rf, alpha)],
        train_predictions: Vec::new(),
    };
    let mut trees = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        let mask = round_mask(n_rf, n - n_rf, config.subsample, &mut rng);
        let z = GradientTargets::rulsif(&w, &is_test, alpha);
        let tree = grow_tree(&rows, &columns, z.as_slice(), &hess, mask.as_deref(), &params)?;
        for (wi, x) in w.iter_mut().zip(rows.iter()) {
            *wi += config.learning_rate * tree.predict(x);
        }
        trace.losses.push(rulsif_objective(&w, n_rf, alpha));
        trees.push(tree);
    }
    trace.train_predictions = w;
    Ok((
        BoostedEnsemble {
            trees,
            learning_rate: config.learning_rate,
            base_value: 1.0,
            kind: EnsembleKind::Ratio,
            alpha,
            subsample: config.subsample,
            n_features: rows.ncols(),
        },
        trace,
    ))
}

/// Mean binary cross-entropy with probabilities clipped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(probs: &[f64], labels: &[f64]) -> f64 {
    const CLIP: f64 = 1e-7;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(CLIP, 1.0 - CLIP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / probs.len() as f64
}

pub fn fit_gbdt_classifier(reference: &Rows, test: &Rows, config: &GbdtConfig, seed: u64) -> Result<BoostedEnsemble> {
    fit_gbdt_classifier_traced(reference, test, config, seed).map(|(m, _)| m)
}

pub fn fit_gbdt_classifier_traced(
    reference: &Rows,
    test: &Rows,
    config: &GbdtConfig,
    seed: u64,
) -> Result<(BoostedEnsemble, FitTrace)> {
    config.validate(EnsembleKind::Classifier)?;
    check_samples(reference, test)?;
    let mut rng = rng_from_seed(seed);
    let rows = reference.stack(test)?;
    let n_rf = reference.nrows();
    let n = rows.nrows();
    let labels: Vec<f64> = (0..n).map(|i| if i >= n_rf { 1.0 } else { 0.0 }).collect();
    let columns = SortedColumns::new(&rows);
    let params = config.tree_params();

    let base = ((n - n_rf) as f64 / n_rf as f64).ln();
    let mut logits = vec![base; n];
    let probs = |logits: &[f64]| logits.iter().map(|&z| sigmoid(z)).collect::<Vec<_>>();
    let mut trace = FitTrace {
        losses: vec![bce_loss(&probs(&logits), &labels)],
        train_predictions: Vec::new(),
    };
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        let mask = round_mask(n_rf, n - n_rf, config.subsample, &mut rng);
        for i in 0..n {
            let p = sigmoid(logits[i]);
            grad[i] = labels[i] - p;
            hess[i] = (p * (1.0 - p)).max(1e-16);
        }
        let tree = grow_tree(&rows, &columns, &grad, &hess, mask.as_deref(), &params)?;
        for (z, x) in logits.iter_mut().zip(rows.iter()) {
            *z += config.learning_rate * tree.predict(x);
        }
        trace.losses.push(bce_loss(&probs(&logits), &labels));
        trees.push(tree);
    }
    trace.train_predictions = logits;
    Ok((
        BoostedEnsemble {
            trees,
            learning_rate: config.learning_rate,
            base_value: base,
            kind: EnsembleKind::Classifier,
            alpha: 0.0,
            subsample: config.subsample,
            n_features: rows.ncols(),
        },
        trace,
    ))
}
