//! Independent oracles: numerical minimizers, finite differences and brute-force counts.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use ratio_cpd::kernel::{penalized_objective, KernelModel};
use ratio_cpd::nn::{batch_loss, LossBatch, Mlp, OutputKind};
use ratio_cpd::rng::rng_from_seed;
use ratio_cpd::timeseries::Rows;
use ratio_cpd::TimeSeries;

pub fn gaussian_rows(rng: &mut impl Rng, n: usize, d: usize, mean: f64) -> Rows {
    let dist = Normal::new(mean, 1.0).unwrap();
    Rows::new((0..n * d).map(|_| dist.sample(rng)).collect(), d).unwrap()
}

/// Univariate unit-variance Gaussian noise whose mean jumps by `shift` at `change`.
pub fn shift_series(len: usize, change: usize, shift: f64, seed: u64) -> TimeSeries {
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let values: Vec<f64> = (0..len)
        .map(|t| noise.sample(&mut rng) + if t >= change { shift } else { 0.0 })
        .collect();
    TimeSeries::univariate(&values).unwrap()
}

/// Minimizes a 1-D unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Cyclic coordinate descent on the penalized objective, each coordinate
/// minimized by golden-section search.
pub fn numeric_theta(model: &KernelModel, reference: &Rows, test: &Rows) -> Vec<f64> {
    let mut probe = model.clone();
    probe.theta = vec![0.0; model.theta.len()];
    for _sweep in 0..300 {
        let before = probe.theta.clone();
        for i in 0..probe.theta.len() {
            let centre = probe.theta[i];
            let objective = |v: f64| {
                let mut m = probe.clone();
                m.theta[i] = v;
                penalized_objective(&m, reference, test).unwrap()
            };
            probe.theta[i] = golden_section(objective, centre - 20.0, centre + 20.0);
        }
        let moved = before
            .iter()
            .zip(&probe.theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if moved < 1e-11 {
            break;
        }
    }
    probe.theta
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

pub fn finite_difference(net: &Mlp, batch: &LossBatch<'_>) -> Vec<f64> {
    let h = 1e-6;
    (0..net.params().len())
        .map(|i| {
            let mut plus = net.clone();
            plus.params_mut()[i] += h;
            let mut minus = net.clone();
            minus.params_mut()[i] -= h;
            (batch_loss(&plus, batch).unwrap() - batch_loss(&minus, batch).unwrap()) / (2.0 * h)
        })
        .collect()
}

pub fn random_net(rng: &mut impl Rng, inputs: usize, kind: OutputKind) -> Mlp {
    let dist = Normal::new(0.0, 0.5).unwrap();
    let mut net = Mlp::zeros(inputs, 10, kind);
    net.params_mut().iter_mut().for_each(|p| *p = dist.sample(rng));
    net
}

pub fn brute_force_twice_u(scores: &[f64], labels: &[u8]) -> u64 {
    let mut twice = 0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                twice += match si.partial_cmp(&sj).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    twice
}
