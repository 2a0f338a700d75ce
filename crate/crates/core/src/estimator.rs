//! The five interchangeable ratio estimators behind one interface.

use std::fmt;
use std::str::FromStr;

use crate::dissimilarity::ScoreKind;
use crate::error::{CpdError, Result};
use crate::kernel::{self, KernelConfig, KernelModel};
use crate::nn::{self, AdamConfig, Mlp};
use crate::timeseries::Rows;
use crate::trees::{self, BoostedEnsemble, GbdtConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    KernelRulsif,
    GbdtRulsif,
    NnRulsif,
    NnClassifier,
    GbdtClassifier,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::KernelRulsif,
        EstimatorKind::GbdtRulsif,
        EstimatorKind::NnRulsif,
        EstimatorKind::NnClassifier,
        EstimatorKind::GbdtClassifier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::KernelRulsif => "kernel-rulsif",
            EstimatorKind::GbdtRulsif => "gbdt-rulsif",
            EstimatorKind::NnRulsif => "nn-rulsif",
            EstimatorKind::NnClassifier => "nn-classifier",
            EstimatorKind::GbdtClassifier => "gbdt-classifier",
        }
    }

    /// Whether the estimator outputs test-class probabilities rather than ratios.
    pub fn is_classifier(self) -> bool {
        matches!(self, EstimatorKind::NnClassifier | EstimatorKind::GbdtClassifier)
    }

    /// Pearson score for ratio models, symmetric KL for classifiers.
    pub fn default_score(self) -> ScoreKind {
        if self.is_classifier() {
            ScoreKind::KlSymmetric
        } else {
            ScoreKind::PearsonSymmetric
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = CpdError;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CpdError::invalid(format!("unknown estimator '{s}'")))
    }
}

/// Hyperparameters for every estimator kind.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EstimatorParams {
    pub kernel: KernelConfig,
    pub gbdt_rulsif: GbdtConfig,
    pub gbdt_classifier: GbdtConfig,
    pub adam: AdamConfig,
    /// RuLSIF mixing weight for the network model.
    pub nn_alpha: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::default(),
            gbdt_rulsif: GbdtConfig::rulsif(),
            gbdt_classifier: GbdtConfig::classifier(),
            adam: AdamConfig::default(),
            nn_alpha: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FittedEstimator {
    Kernel(KernelModel),
    Boosted(BoostedEnsemble),
    Net(Mlp),
}

impl FittedEstimator {
    /// Ratio estimates, or probabilities for classifier kinds.
    pub fn predict_rows(&self, rows: &Rows) -> Result<Vec<f64>> {
        match self {
            FittedEstimator::Kernel(m) => m.predict_rows(rows),
            FittedEstimator::Boosted(m) => m.predict_rows(rows),
            FittedEstimator::Net(m) => m.predict_rows(rows),
        }
    }
}

/// Kernel width and penalty to use instead of cross-validating.
pub type KernelChoice = Option<(f64, f64)>;

/// Fits `kind` with `reference` labelled as the reference sample and `test`
/// as the test sample.
pub fn fit(
    kind: EstimatorKind,
    params: &EstimatorParams,
    reference: &Rows,
    test: &Rows,
    kernel_choice: KernelChoice,
    seed: u64,
) -> Result<FittedEstimator> {
    Ok(match kind {
        EstimatorKind::KernelRulsif => {
            let kc = &params.kernel;
            let (sigma, lambda) = match kernel_choice {
                Some(c) => c,
                None => kernel::cross_validate(reference, test, &kc.grid, kc.alpha, kc.n_centers, seed)?,
            };
            FittedEstimator::Kernel(kernel::fit_closed_form(
                reference,
                test,
                sigma,
                lambda,
                kc.alpha,
                kc.n_centers,
                seed,
            )?)
        }
        EstimatorKind::GbdtRulsif => {
            FittedEstimator::Boosted(trees::fit_gbdt_rulsif(reference, test, &params.gbdt_rulsif, seed)?)
        }
        EstimatorKind::GbdtClassifier => FittedEstimator::Boosted(trees::fit_gbdt_classifier(
            reference,
            test,
            &params.gbdt_classifier,
            seed,
        )?),
        EstimatorKind::NnRulsif => {
            FittedEstimator::Net(nn::fit_nn_rulsif(reference, test, &params.adam, params.nn_alpha, seed)?)
        }
        EstimatorKind::NnClassifier => {
            FittedEstimator::Net(nn::fit_nn_classifier(reference, test, &params.adam, seed)?)
        }
    })
}
