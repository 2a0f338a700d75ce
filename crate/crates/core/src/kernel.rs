//! Gaussian-kernel RuLSIF.
//!
//! The relative ratio is modelled as `w(x) = sum_i theta_i K(x, c_i)` over
//! centers `c_i` drawn from the test rows. The penalized empirical loss is
//! quadratic in `theta`:
//!
//! ```text
//! J(theta) = 1/2 theta' H theta - h' theta + lambda/2 |theta|^2
//! H = (1-alpha)/n_rf sum_ref phi phi' + alpha/n_te sum_test phi phi'
//! h = 1/n_te sum_test phi
//! ```
//!
//! so the minimizer solves `(H + lambda I) theta = h`. Kernel width and
//! penalty come from k-fold cross-validation on the held-out loss.

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{CpdError, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::timeseries::Rows;

pub fn gaussian_kernel(x: &[f64], center: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(CpdError::invalid(format!("kernel width must be positive, got {sigma}")));
    }
    if x.len() != center.len() {
        return Err(CpdError::invalid(format!(
            "kernel arguments differ in length: {} vs {}",
            x.len(),
            center.len()
        )));
    }
    Ok((-sq_dist(x, center) / (2.0 * sigma * sigma)).exp())
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fitted kernel ratio model.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelModel {
    pub centers: Rows,
    pub theta: Vec<f64>,
    pub sigma: f64,
    pub alpha: f64,
    pub lambda: f64,
}

impl KernelModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.centers.ncols() {
            return Err(CpdError::invalid(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.centers.ncols()
            )));
        }
        let inv = 1.0 / (2.0 * self.sigma * self.sigma);
        Ok(self
            .centers
            .iter()
            .zip(&self.theta)
            .map(|(c, th)| th * (-sq_dist(x, c) * inv).exp())
            .sum())
    }

    pub fn predict_rows(&self, rows: &Rows) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

/// Cross-validation grid over kernel width and ridge penalty.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CvGrid {
    pub sigmas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub folds: usize,
}

impl Default for CvGrid {
    fn default() -> Self {
        Self {
            sigmas: (-3..=3).map(|e| 10f64.powi(e)).collect(),
            lambdas: (-3..=1).map(|e| 10f64.powi(e)).collect(),
            folds: 5,
        }
    }
}

impl CvGrid {
    pub fn single(sigma: f64, lambda: f64) -> Self {
        Self {
            sigmas: vec![sigma],
            lambdas: vec![lambda],
            folds: 5,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() || self.lambdas.is_empty() {
            return Err(CpdError::invalid("cross-validation grid is empty"));
        }
        if self.sigmas.iter().any(|s| !(*s > 0.0)) || self.lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(CpdError::invalid(
                "grid needs positive kernel widths and non-negative penalties",
            ));
        }
        if self.folds < 2 {
            return Err(CpdError::invalid("cross-validation needs at least 2 folds"));
        }
        Ok(())
    }
}

/// Hyperparameters for the full kernel estimator.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelConfig {
    pub n_centers: usize,
    pub alpha: f64,
    pub grid: CvGrid,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            n_centers: 10,
            alpha: 0.1,
            grid: CvGrid::default(),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(CpdError::invalid(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    Ok(())
}

/// Picks `n_centers` test rows; without replacement when enough rows exist.
pub fn choose_centers(test: &Rows, n_centers: usize, seed: u64) -> Result<Rows> {
    if n_centers == 0 {
        return Err(CpdError::invalid("need at least one kernel center"));
    }
    if test.is_empty() {
        return Err(CpdError::invalid("test sample is empty"));
    }
    let mut rng = rng_from_seed(seed);
    let n = test.nrows();
    let idx: Vec<usize> = if n >= n_centers {
        index::sample(&mut rng, n, n_centers).into_vec()
    } else {
        (0..n_centers).map(|_| rng.random_range(0..n)).collect()
    };
    Ok(test.select(&idx))
}

/// Squared distances from each row to each center, row-major `n x n_centers`.
fn sq_dist_matrix(rows: &Rows, centers: &Rows) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.nrows() * centers.nrows());
    for r in rows.iter() {
        out.extend(centers.iter().map(|c| sq_dist(r, c)));
    }
    out
}

fn kernel_from_dist(dist: &[f64], sigma: f64) -> Vec<f64> {
    let inv = 1.0 / (2.0 * sigma * sigma);
    dist.iter().map(|d| (-d * inv).exp()).collect()
}

/// Accumulated second moment and mean of kernel features over a row subset.
#[derive(Clone)]
struct Moments {
    outer: DMatrix<f64>,
    sum: DVector<f64>,
    count: usize,
}

impl Moments {
    fn new(b: usize) -> Self {
        Self {
            outer: DMatrix::zeros(b, b),
            sum: DVector::zeros(b),
            count: 0,
        }
    }

    fn add(&mut self, phi: &[f64]) {
        let b = phi.len();
        for i in 0..b {
            self.sum[i] += phi[i];
            for j in 0..b {
                self.outer[(i, j)] += phi[i] * phi[j];
            }
        }
        self.count += 1;
    }

    fn from_rows<'a>(b: usize, rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut m = Self::new(b);
        for phi in rows {
            m.add(phi);
        }
        m
    }

    fn minus(&self, other: &Moments) -> Moments {
        Moments {
            outer: &self.outer - &other.outer,
            sum: &self.sum - &other.sum,
            count: self.count - other.count,
        }
    }
}

/// `(H, h)` of the quadratic objective from reference and test moments.
fn quadratic_terms(reference: &Moments, test: &Moments, alpha: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n_rf = reference.count as f64;
    let n_te = test.count as f64;
    let h_mat = &reference.outer * ((1.0 - alpha) / n_rf) + &test.outer * (alpha / n_te);
    let h_vec = &test.sum / n_te;
    (h_mat, h_vec)
}

fn solve_ridge(h_mat: &DMatrix<f64>, h_vec: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let b = h_vec.len();
    let system = h_mat + DMatrix::identity(b, b) * lambda;
    let chol = system.cholesky().ok_or_else(|| {
        CpdError::Solver(format!(
            "kernel normal equations are not positive definite with lambda = {lambda}; use lambda > 0"
        ))
    })?;
    // Cholesky succeeds on rank-deficient systems that round to a tiny
    // positive pivot; treat a collapsed pivot as singular.
    let pivots = chol.l_dirty().diagonal();
    let (lo, hi) = pivots
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    let theta = chol.solve(h_vec);
    if (lo / hi).powi(2) < 1e-13 || theta.iter().any(|v| !v.is_finite()) {
        return Err(CpdError::Solver(format!(
            "kernel normal equations are singular with lambda = {lambda}; use lambda > 0"
        )));
    }
    Ok(theta)
}

fn quadratic_loss(h_mat: &DMatrix<f64>, h_vec: &DVector<f64>, theta: &DVector<f64>) -> f64 {
    0.5 * theta.dot(&(h_mat * theta)) - h_vec.dot(theta)
}

/// Fits `theta` for fixed centers.
pub fn fit_with_centers(
    reference: &Rows,
    test: &Rows,
    centers: Rows,
    sigma: f64,
    lambda: f64,
    alpha: f64,
) -> Result<KernelModel> {
    check_alpha(alpha)?;
    if reference.is_empty() || test.is_empty() {
        return Err(CpdError::invalid("reference and test samples must be non-empty"));
    }
    if !(sigma > 0.0) || !(lambda >= 0.0) {
        return Err(CpdError::invalid(format!(
            "need sigma > 0 and lambda >= 0, got sigma = {sigma}, lambda = {lambda}"
        )));
    }
    let b = centers.nrows();
    let phi_rf = kernel_from_dist(&sq_dist_matrix(reference, &centers), sigma);
    let phi_te = kernel_from_dist(&sq_dist_matrix(test, &centers), sigma);
    let m_rf = Moments::from_rows(b, phi_rf.chunks_exact(b));
    let m_te = Moments::from_rows(b, phi_te.chunks_exact(b));
    let (h_mat, h_vec) = quadratic_terms(&m_rf, &m_te, alpha);
    let theta = solve_ridge(&h_mat, &h_vec, lambda)?;
    Ok(KernelModel {
        centers,
        theta: theta.iter().copied().collect(),
        sigma,
        alpha,
        lambda,
    })
}

/// Closed-form fit with centers drawn from `test` using `seed`.
pub fn fit_closed_form(
    reference: &Rows,
    test: &Rows,
    sigma: f64,
    lambda: f64,
    alpha: f64,
    n_centers: usize,
    seed: u64,
) -> Result<KernelModel> {
    let centers = choose_centers(test, n_centers, seed)?;
    fit_with_centers(reference, test, centers, sigma, lambda, alpha)
}

/// Penalized training objective of a model on the given samples.
pub fn penalized_objective(model: &KernelModel, reference: &Rows, test: &Rows) -> Result<f64> {
    let w_rf = model.predict_rows(reference)?;
    let w_te = model.predict_rows(test)?;
    let penalty = 0.5 * model.lambda * model.theta.iter().map(|t| t * t).sum::<f64>();
    Ok(rulsif_loss(&w_rf, &w_te, model.alpha) + penalty)
}

/// Empirical RuLSIF loss without its constant term.
pub fn rulsif_loss(w_ref: &[f64], w_test: &[f64], alpha: f64) -> f64 {
    let n_rf = w_ref.len() as f64;
    let n_te = w_test.len() as f64;
    let sq_rf: f64 = w_ref.iter().map(|w| w * w).sum();
    let sq_te: f64 = w_test.iter().map(|w| w * w).sum();
    let lin_te: f64 = w_test.iter().sum();
    (1.0 - alpha) / (2.0 * n_rf) * sq_rf + alpha / (2.0 * n_te) * sq_te - lin_te / n_te
}

/// Fold label in `0..folds` for each of `n` rows, balanced and shuffled.
pub fn fold_ids(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    let mut ids = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        ids[row] = pos % folds;
    }
    ids
}

/// Mean held-out loss for every grid point, indexed `[sigma][lambda]`.
pub fn cv_losses(
    reference: &Rows,
    test: &Rows,
    grid: &CvGrid,
    alpha: f64,
    n_centers: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    grid.validate()?;
    check_alpha(alpha)?;
    let folds = grid.folds;
    if reference.nrows() < folds || test.nrows() < folds {
        return Err(CpdError::invalid(format!(
            "{folds}-fold cross-validation needs at least {folds} rows in each sample"
        )));
    }
    let centers = choose_centers(test, n_centers, seed)?;
    let b = centers.nrows();
    let fold_rf = fold_ids(reference.nrows(), folds, derive_seed(seed, &[stream::CV, 0]));
    let fold_te = fold_ids(test.nrows(), folds, derive_seed(seed, &[stream::CV, 1]));
    let dist_rf = sq_dist_matrix(reference, &centers);
    let dist_te = sq_dist_matrix(test, &centers);

    let mut losses = vec![vec![0.0; grid.lambdas.len()]; grid.sigmas.len()];
    for (si, &sigma) in grid.sigmas.iter().enumerate() {
        let phi_rf = kernel_from_dist(&dist_rf, sigma);
        let phi_te = kernel_from_dist(&dist_te, sigma);
        let all_rf = Moments::from_rows(b, phi_rf.chunks_exact(b));
        let all_te = Moments::from_rows(b, phi_te.chunks_exact(b));
        for f in 0..folds {
            let in_fold = |ids: &[usize], phi: &[f64]| {
                Moments::from_rows(
                    b,
                    phi.chunks_exact(b).zip(ids).filter(|(_, &id)| id == f).map(|(p, _)| p),
                )
            };
            let va_rf = in_fold(&fold_rf, &phi_rf);
            let va_te = in_fold(&fold_te, &phi_te);
            let (h_tr, v_tr) = quadratic_terms(&all_rf.minus(&va_rf), &all_te.minus(&va_te), alpha);
            let (h_va, v_va) = quadratic_terms(&va_rf, &va_te, alpha);
            for (li, &lambda) in grid.lambdas.iter().enumerate() {
                let loss = match solve_ridge(&h_tr, &v_tr, lambda) {
                    Ok(theta) => quadratic_loss(&h_va, &v_va, &theta),
                    Err(_) => f64::INFINITY,
                };
                losses[si][li] += loss / folds as f64;
            }
        }
    }
    Ok(losses)
}

/// Picks the grid point with the smallest mean held-out loss. Ties go to the
/// larger penalty, then the larger width.
pub fn cross_validate(
    reference: &Rows,
    test: &Rows,
    grid: &CvGrid,
    alpha: f64,
    n_centers: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let losses = cv_losses(reference, test, grid, alpha, n_centers, seed)?;
    let mut best: Option<(f64, f64, f64)> = None;
    for (si, &sigma) in grid.sigmas.iter().enumerate() {
        for (li, &lambda) in grid.lambdas.iter().enumerate() {
            let loss = losses[si][li];
            if loss.is_nan() {
                continue;
            }
            let better = match best {
                None => true,
                Some((bl, bs, bl_loss)) => {
                    loss < bl_loss || (loss == bl_loss && (lambda > bl || (lambda == bl && sigma > bs)))
                }
            };
            if better {
                best = Some((lambda, sigma, loss));
            }
        }
    }
    match best {
        Some((lambda, sigma, loss)) if loss.is_finite() => Ok((sigma, lambda)),
        _ => Err(CpdError::Solver(
            "no grid point produced a solvable kernel system".to_string(),
        )),
    }
}

/// Cross-validates `(sigma, lambda)` then fits on all rows.
pub fn fit_rulsif(reference: &Rows, test: &Rows, config: &KernelConfig, seed: u64) -> Result<KernelModel> {
    let (sigma, lambda) = cross_validate(reference, test, &config.grid, config.alpha, config.n_centers, seed)?;
    fit_closed_form(reference, test, sigma, lambda, config.alpha, config.n_centers, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, Normal};

    fn normal_rows(n: usize, d: usize, mean: f64, seed: u64) -> Rows {
        let mut rng = rng_from_seed(seed);
        let dist = Normal::new(mean, 1.0).unwrap();
        Rows::new((0..n * d).map(|_| dist.sample(&mut rng)).collect(), d).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(gaussian_kernel(&[1.0, 2.0], &[1.0, 2.0], 0.3).unwrap(), 1.0);
        assert_abs_diff_eq!(
            gaussian_kernel(&[0.0], &[2.0], 1.0).unwrap(),
            0.135335283,
            epsilon = 1e-9
        );
        assert!(gaussian_kernel(&[0.0], &[1.0], 0.0).is_err());
        assert!(gaussian_kernel(&[0.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn kernel_increases_to_one_with_width() {
        let mut prev = 0.0;
        for e in -1..6 {
            let v = gaussian_kernel(&[0.0, 1.0], &[3.0, -1.0], 10f64.powi(e)).unwrap();
            assert!(v > prev && v <= 1.0);
            prev = v;
        }
        assert!(prev > 0.999_999);
    }

    #[test]
    fn predict_examples() {
        let centers = Rows::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let mut model = KernelModel {
            centers,
            theta: vec![0.0, 0.0],
            sigma: 1.0,
            alpha: 0.1,
            lambda: 0.1,
        };
        assert_eq!(model.predict(&[5.0, 5.0]).unwrap(), 0.0);
        model.theta = vec![1.0, 1.0];
        // (1, 1) is sqrt(2) from both centers.
        assert_abs_diff_eq!(
            model.predict(&[1.0, 1.0]).unwrap(),
            2.0 * (-1f64).exp(),
            epsilon = 1e-12
        );
        assert!(model.predict(&[1.0]).is_err());
        model.theta = vec![2.0, 0.0];
        assert_eq!(model.predict(&[0.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn identical_samples_give_unit_ratio_at_center() {
        let rows = Rows::new(vec![0.3], 1).unwrap();
        let m = fit_closed_form(&rows, &rows, 1.0, 1e-10, 0.0, 1, 4).unwrap();
        assert_abs_diff_eq!(m.predict(&[0.3]).unwrap(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn huge_penalty_shrinks_to_zero() {
        let r = normal_rows(30, 2, 0.0, 1);
        let t = normal_rows(30, 2, 1.0, 2);
        let m = fit_closed_form(&r, &t, 1.0, 1e9, 0.1, 5, 3).unwrap();
        assert!(m.theta.iter().all(|v| v.abs() < 1e-8));
        assert!(m.predict(t.row(0)).unwrap().abs() < 1e-8);
    }

    #[test]
    fn zero_penalty_singular_system_errors() {
        // Two identical centers make H rank-deficient.
        let r = Rows::new(vec![0.0, 1.0, 2.0], 1).unwrap();
        let centers = Rows::new(vec![0.5, 0.5], 1).unwrap();
        let err = fit_with_centers(&r, &r, centers, 1.0, 0.0, 0.1).unwrap_err();
        assert!(matches!(err, CpdError::Solver(_)));
        assert!(err.to_string().contains("lambda > 0"));
    }

    #[test]
    fn centers_with_replacement_when_test_is_small() {
        let t = Rows::new(vec![1.0, 2.0], 1).unwrap();
        let c = choose_centers(&t, 5, 0).unwrap();
        assert_eq!(c.nrows(), 5);
        let big = normal_rows(50, 1, 0.0, 3);
        let c = choose_centers(&big, 10, 1).unwrap();
        let mut v: Vec<f64> = c.as_slice().to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        assert_eq!(v.len(), 10);
    }

    #[test]
    fn fitted_objective_beats_zero() {
        for seed in 0..10 {
            let r = normal_rows(40, 3, 0.0, seed);
            let t = normal_rows(40, 3, 0.5, seed + 100);
            let m = fit_closed_form(&r, &t, 1.5, 0.01, 0.1, 10, seed).unwrap();
            let zero = KernelModel {
                theta: vec![0.0; m.theta.len()],
                ..m.clone()
            };
            let fitted = penalized_objective(&m, &r, &t).unwrap();
            assert!(fitted <= penalized_objective(&zero, &r, &t).unwrap());
        }
    }

    #[test]
    fn predict_is_linear_in_theta() {
        let centers = normal_rows(4, 2, 0.0, 8);
        let x = [0.2, -0.4];
        let mk = |theta: Vec<f64>| KernelModel {
            centers: centers.clone(),
            theta,
            sigma: 0.8,
            alpha: 0.1,
            lambda: 0.0,
        };
        let t1 = vec![1.0, -2.0, 0.5, 3.0];
        let t2 = vec![-0.3, 0.7, 2.0, 0.1];
        let comb: Vec<f64> = t1.iter().zip(&t2).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let lhs = mk(comb).predict(&x).unwrap();
        let rhs = 2.0 * mk(t1).predict(&x).unwrap() - 3.0 * mk(t2).predict(&x).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn singleton_grid_is_returned() {
        let r = normal_rows(20, 1, 0.0, 1);
        let t = normal_rows(20, 1, 0.0, 2);
        let grid = CvGrid::single(0.7, 0.05);
        assert_eq!(cross_validate(&r, &t, &grid, 0.1, 5, 0).unwrap(), (0.7, 0.05));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let r = normal_rows(20, 1, 0.0, 1);
        let grid = CvGrid {
            sigmas: vec![],
            lambdas: vec![0.1],
            folds: 5,
        };
        assert!(matches!(
            cross_validate(&r, &r, &grid, 0.1, 5, 0),
            Err(CpdError::InvalidArgument(_))
        ));
    }

    #[test]
    fn default_grid_returns_member() {
        let r = normal_rows(100, 4, 0.0, 11);
        let t = normal_rows(100, 4, 1.0, 12);
        let grid = CvGrid::default();
        let (s, l) = cross_validate(&r, &t, &grid, 0.1, 10, 5).unwrap();
        assert!(grid.sigmas.contains(&s));
        assert!(grid.lambdas.contains(&l));
    }

    #[test]
    fn self_ratio_averages_near_one() {
        let r = normal_rows(300, 2, 0.0, 21);
        let t = normal_rows(300, 2, 0.0, 22);
        let held = normal_rows(300, 2, 0.0, 23);
        let m = fit_rulsif(
            &r,
            &t,
            &KernelConfig {
                alpha: 0.0,
                ..Default::default()
            },
            9,
        )
        .unwrap();
        let w = m.predict_rows(&held).unwrap();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert!((mean - 1.0).abs() <= 0.3, "mean ratio {mean}");
    }
}
