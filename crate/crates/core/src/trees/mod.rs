//! Regression trees and gradient-boosted ensembles.

mod boosting;
mod tree;

pub(crate) use boosting::sigmoid;
pub use boosting::{
    bce_loss, fit_gbdt_classifier, fit_gbdt_classifier_traced, fit_gbdt_rulsif, fit_gbdt_rulsif_traced,
    BoostedEnsemble, EnsembleKind, FitTrace, GbdtConfig, GradientTargets,
};
pub use tree::{fit_tree, grow_tree, Node, RegressionTree, SortedColumns, TreeParams};
