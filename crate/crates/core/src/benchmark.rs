//! The synthetic benchmark matrix: every estimator on `runs` generated
//! instances of every dataset, summarized as mean AUC and standard error.

use std::io::Write;

use crate::datasets::{DatasetId, LabeledSeries, SyntheticSpec};
use crate::detector::{detect_with, DetectorConfig};
use crate::error::{CpdError, Result};
use crate::estimator::EstimatorKind;
use crate::evaluation::{aggregate_runs, align};
use crate::exec::Execution;
use crate::rng::derive_seed;

const DATASET_STREAM: u64 = 11;
const DETECT_STREAM: u64 = 12;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BenchmarkPlan {
    pub datasets: Vec<DatasetId>,
    pub estimators: Vec<EstimatorKind>,
    pub runs: usize,
    pub dt: usize,
    pub seed: u64,
    /// Template for every cell; estimator, score, stride and seed are
    /// overwritten per cell.
    pub detector: DetectorConfig,
}

impl BenchmarkPlan {
    /// All datasets and estimators, 3 runs at stride 25.
    pub fn desk(seed: u64) -> Self {
        Self {
            datasets: DatasetId::ALL.to_vec(),
            estimators: EstimatorKind::ALL.to_vec(),
            runs: 3,
            dt: 25,
            seed,
            detector: DetectorConfig::default(),
        }
    }

    /// 10 runs at stride 1.
    pub fn full(seed: u64) -> Self {
        Self {
            runs: 10,
            dt: 1,
            ..Self::desk(seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() || self.estimators.is_empty() || self.runs == 0 {
            return Err(CpdError::invalid(
                "benchmark needs datasets, estimators and at least one run",
            ));
        }
        Ok(())
    }

    /// Generator seed for run `run` of `dataset`.
    pub fn instance_seed(&self, dataset: DatasetId, run: usize) -> u64 {
        derive_seed(self.seed, &[DATASET_STREAM, dataset.number() as u64, run as u64])
    }

    /// Detector configuration for one cell of the matrix.
    pub fn cell_config(&self, dataset: DatasetId, run: usize, estimator: EstimatorKind) -> DetectorConfig {
        DetectorConfig {
            estimator,
            score: estimator.default_score(),
            dt: self.dt,
            seed: derive_seed(
                self.seed,
                &[DETECT_STREAM, dataset.number() as u64, run as u64, estimator as u64],
            ),
            ..self.detector.clone()
        }
    }
}

/// One algorithm/dataset entry of the result table.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub algorithm: EstimatorKind,
    pub dataset: DatasetId,
    pub mean_auc: f64,
    pub stderr: f64,
    pub std: f64,
    pub runs: usize,
    pub dt: usize,
    pub seed: u64,
    pub aucs: Vec<f64>,
}

/// AUC of one detector run on one labeled series.
pub fn evaluate_cell(ls: &LabeledSeries, config: &DetectorConfig, exec: Execution) -> Result<f64> {
    let scores = detect_with(&ls.series, config, exec)?;
    let labels = ls.labels(config.n)?;
    align(&scores, &labels)?.auc()
}

pub fn run_benchmark(plan: &BenchmarkPlan, exec: Execution) -> Result<Vec<BenchmarkRow>> {
    plan.validate()?;
    let instances: Vec<(DatasetId, usize)> = plan
        .datasets
        .iter()
        .flat_map(|&d| (0..plan.runs).map(move |r| (d, r)))
        .collect();
    let series: Vec<LabeledSeries> = exec.map(&instances, |&(d, r)| {
        SyntheticSpec::new(d, plan.instance_seed(d, r)).generate()
    });

    let cells: Vec<(usize, EstimatorKind)> = (0..instances.len())
        .flat_map(|i| plan.estimators.iter().map(move |&e| (i, e)))
        .collect();
    let aucs = exec.try_map(&cells, |&(i, est)| {
        let (d, r) = instances[i];
        evaluate_cell(&series[i], &plan.cell_config(d, r, est), exec)
    })?;

    let mut rows = Vec::new();
    for &est in &plan.estimators {
        for &d in &plan.datasets {
            let cell_aucs: Vec<f64> = cells
                .iter()
                .zip(&aucs)
                .filter(|((i, e), _)| *e == est && instances[*i].0 == d)
                .map(|(_, &a)| a)
                .collect();
            let s = aggregate_runs(&cell_aucs)?;
            rows.push(BenchmarkRow {
                algorithm: est,
                dataset: d,
                mean_auc: s.mean,
                stderr: s.stderr,
                std: s.std,
                runs: s.runs,
                dt: plan.dt,
                seed: plan.seed,
                aucs: cell_aucs,
            });
        }
    }
    Ok(rows)
}

pub const BENCHMARK_HEADER: &str = "algorithm,dataset,mean_auc,stderr,runs,dt,seed,std";

pub fn write_benchmark_csv<W: Write>(rows: &[BenchmarkRow], mut w: W) -> Result<()> {
    writeln!(w, "{BENCHMARK_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.6},{:.6},{},{},{},{:.6}",
            r.algorithm, r.dataset, r.mean_auc, r.stderr, r.runs, r.dt, r.seed, r.std
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_seeds_differ() {
        let plan = BenchmarkPlan::desk(1);
        let a = plan.cell_config(DatasetId::MeanShift, 0, EstimatorKind::NnRulsif);
        let b = plan.cell_config(DatasetId::MeanShift, 1, EstimatorKind::NnRulsif);
        let c = plan.cell_config(DatasetId::MeanShift, 0, EstimatorKind::NnClassifier);
        assert_ne!(a.seed, b.seed);
        assert_ne!(a.seed, c.seed);
        assert_eq!(c.score, crate::dissimilarity::ScoreKind::KlSymmetric);
        assert_eq!(a.dt, 25);
    }

    #[test]
    fn table_has_one_row_per_cell() {
        let mut plan = BenchmarkPlan::desk(3);
        plan.runs = 1;
        plan.dt = 300;
        plan.datasets = vec![DatasetId::MeanShift, DatasetId::FrequencyShift];
        plan.estimators = vec![EstimatorKind::NnClassifier, EstimatorKind::KernelRulsif];
        let rows = run_benchmark(&plan, Execution::default()).unwrap();
        assert_eq!(rows.len(), 4);
        let mut buf = Vec::new();
        write_benchmark_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with(BENCHMARK_HEADER));
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.mean_auc)));
    }
}
