//! One-hidden-layer tanh perceptron trained with Adam.
//!
//! Used two ways: with a linear output minimizing the RuLSIF loss on paired
//! reference/test mini-batches, and with a sigmoid output minimizing binary
//! cross-entropy (reference rows labelled 0, test rows 1). Gradients are
//! computed by hand.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{CpdError, Result};
use crate::rng::{rng_from_seed, CpdRng};
use crate::timeseries::Rows;
use crate::trees::{bce_loss, sigmoid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    Linear,
    Sigmoid,
}

/// Network parameters stored flat as `[W1 (hidden x inputs, row-major), b1, w2, b2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    params: Vec<f64>,
    n_inputs: usize,
    hidden: usize,
    output_kind: OutputKind,
}

pub const DEFAULT_HIDDEN: usize = 10;

impl Mlp {
    pub fn zeros(n_inputs: usize, hidden: usize, output_kind: OutputKind) -> Self {
        Self {
            params: vec![0.0; hidden * n_inputs + 2 * hidden + 1],
            n_inputs,
            hidden,
            output_kind,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(n_inputs: usize, hidden: usize, output_kind: OutputKind, rng: &mut CpdRng) -> Self {
        let mut net = Self::zeros(n_inputs, hidden, output_kind);
        let a1 = (6.0 / (n_inputs + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        let (w1, w2) = (net.w1_range(), net.w2_range());
        for p in &mut net.params[w1] {
            *p = rng.random_range(-a1..a1);
        }
        for p in &mut net.params[w2] {
            *p = rng.random_range(-a2..a2);
        }
        net
    }

    pub fn from_params(params: Vec<f64>, n_inputs: usize, hidden: usize, output_kind: OutputKind) -> Result<Self> {
        let net = Self::zeros(n_inputs, hidden, output_kind);
        if params.len() != net.params.len() {
            return Err(CpdError::invalid(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(CpdError::invalid("network parameters must be finite"));
        }
        Ok(Self { params, ..net })
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.n_inputs
    }

    fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.n_inputs;
        s..s + self.hidden
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.n_inputs + self.hidden;
        s..s + self.hidden
    }

    fn b2_index(&self) -> usize {
        self.params.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn output_kind(&self) -> OutputKind {
        self.output_kind
    }

    /// Weight from input `j` into hidden unit `i`.
    pub fn w1(&self, i: usize, j: usize) -> f64 {
        self.params[i * self.n_inputs + j]
    }

    pub fn set_w1(&mut self, i: usize, j: usize, v: f64) {
        self.params[i * self.n_inputs + j] = v;
    }

    pub fn set_b1(&mut self, i: usize, v: f64) {
        let s = self.b1_range().start;
        self.params[s + i] = v;
    }

    pub fn set_w2(&mut self, i: usize, v: f64) {
        let s = self.w2_range().start;
        self.params[s + i] = v;
    }

    pub fn set_b2(&mut self, v: f64) {
        let i = self.b2_index();
        self.params[i] = v;
    }

    pub fn b2(&self) -> f64 {
        self.params[self.b2_index()]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs {
            return Err(CpdError::invalid(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.n_inputs
            )));
        }
        Ok(())
    }

    /// Pre-link output; fills `hidden_out` with the tanh activations.
    fn logit_into(&self, x: &[f64], hidden_out: &mut [f64]) -> f64 {
        let w1 = &self.params[self.w1_range()];
        let b1 = &self.params[self.b1_range()];
        let w2 = &self.params[self.w2_range()];
        let mut out = self.params[self.b2_index()];
        for i in 0..self.hidden {
            let row = &w1[i * self.n_inputs..(i + 1) * self.n_inputs];
            let a: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b1[i];
            let h = a.tanh();
            hidden_out[i] = h;
            out += w2[i] * h;
        }
        out
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut hidden = vec![0.0; self.hidden];
        let z = self.logit_into(x, &mut hidden);
        Ok(match self.output_kind {
            OutputKind::Linear => z,
            OutputKind::Sigmoid => sigmoid(z),
        })
    }

    pub fn predict_rows(&self, rows: &Rows) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.forward(r)).collect()
    }
}

/// Adam hyperparameters and the mini-batch schedule.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            beta1: 0.0,
            beta2: 0.9,
            eps: 1e-8,
            batch_size: 32,
            epochs: 20,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

impl AdamConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(CpdError::invalid("Adam learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(CpdError::invalid("Adam betas must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(CpdError::invalid("Adam eps must be positive"));
        }
        if self.batch_size == 0 || self.hidden == 0 {
            return Err(CpdError::invalid("batch size and hidden width must be at least 1"));
        }
        Ok(())
    }
}

/// Adam moment estimates over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n_params: usize, config: &AdamConfig) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.eps,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// A mini-batch together with the loss evaluated on it.
#[derive(Clone, Copy, Debug)]
pub enum LossBatch<'a> {
    /// RuLSIF loss on paired reference and test batches (linear output).
    Rulsif {
        reference: &'a Rows,
        test: &'a Rows,
        alpha: f64,
    },
    /// Mean binary cross-entropy (sigmoid output).
    Bce { rows: &'a Rows, labels: &'a [f64] },
}

impl LossBatch<'_> {
    fn check(&self, net: &Mlp) -> Result<()> {
        match self {
            LossBatch::Rulsif { reference, test, .. } => {
                if reference.is_empty() || test.is_empty() {
                    return Err(CpdError::invalid(
                        "RuLSIF loss needs non-empty reference and test batches",
                    ));
                }
                if net.output_kind != OutputKind::Linear {
                    return Err(CpdError::invalid("RuLSIF loss needs a linear-output network"));
                }
                net.check_input(reference.row(0))?;
                net.check_input(test.row(0))
            }
            LossBatch::Bce { rows, labels } => {
                if rows.is_empty() || rows.nrows() != labels.len() {
                    return Err(CpdError::invalid(
                        "cross-entropy batch must be non-empty with one label per row",
                    ));
                }
                if net.output_kind != OutputKind::Sigmoid {
                    return Err(CpdError::invalid("cross-entropy loss needs a sigmoid-output network"));
                }
                net.check_input(rows.row(0))
            }
        }
    }
}

pub fn rulsif_batch_loss(net: &Mlp, reference: &Rows, test: &Rows, alpha: f64) -> Result<f64> {
    batch_loss(net, &LossBatch::Rulsif { reference, test, alpha })
}

pub fn batch_loss(net: &Mlp, batch: &LossBatch<'_>) -> Result<f64> {
    batch.check(net)?;
    match *batch {
        LossBatch::Rulsif { reference, test, alpha } => {
            let w_rf = net.predict_rows(reference)?;
            let w_te = net.predict_rows(test)?;
            Ok(crate::kernel::rulsif_loss(&w_rf, &w_te, alpha))
        }
        LossBatch::Bce { rows, labels } => Ok(bce_loss(&net.predict_rows(rows)?, labels)),
    }
}

/// Gradient of the batch loss with respect to every parameter, in the
/// network's flat layout.
///
/// For cross-entropy the derivative is `(p - y) / N` at the logit, which is
/// exact wherever the clipped probability is not saturated.
pub fn backprop_gradients(net: &Mlp, batch: &LossBatch<'_>) -> Result<Vec<f64>> {
    batch.check(net)?;
    let mut grad = vec![0.0; net.params.len()];
    let mut hidden = vec![0.0; net.hidden];
    let mut accumulate = |x: &[f64], dlogit_of: &dyn Fn(f64) -> f64, grad: &mut [f64]| {
        let z = net.logit_into(x, &mut hidden);
        let delta = dlogit_of(z);
        let (p, h) = (net.n_inputs, net.hidden);
        let b1_start = h * p;
        let w2_start = b1_start + h;
        let w2 = &net.params[w2_start..w2_start + h];
        for i in 0..h {
            grad[w2_start + i] += delta * hidden[i];
            let da = delta * w2[i] * (1.0 - hidden[i] * hidden[i]);
            grad[b1_start + i] += da;
            let row = &mut grad[i * p..(i + 1) * p];
            for (g, v) in row.iter_mut().zip(x) {
                *g += da * v;
            }
        }
        let last = grad.len() - 1;
        grad[last] += delta;
    };
    match *batch {
        LossBatch::Rulsif { reference, test, alpha } => {
            let n_rf = reference.nrows() as f64;
            let n_te = test.nrows() as f64;
            let d_ref = |w: f64| (1.0 - alpha) / n_rf * w;
            let d_test = |w: f64| alpha / n_te * w - 1.0 / n_te;
            for x in reference.iter() {
                accumulate(x, &d_ref, &mut grad);
            }
            for x in test.iter() {
                accumulate(x, &d_test, &mut grad);
            }
        }
        LossBatch::Bce { rows, labels } => {
            let n = rows.nrows() as f64;
            for (x, &y) in rows.iter().zip(labels) {
                let d = move |z: f64| (sigmoid(z) - y) / n;
                accumulate(x, &d, &mut grad);
            }
        }
    }
    Ok(grad)
}

fn check_samples(reference: &Rows, test: &Rows) -> Result<()> {
    if reference.is_empty() || test.is_empty() {
        return Err(CpdError::invalid("reference and test samples must be non-empty"));
    }
    if reference.ncols() != test.ncols() {
        return Err(CpdError::invalid("reference and test samples differ in width"));
    }
    Ok(())
}

/// Full-data loss after each epoch.
pub type EpochLosses = Vec<f64>;

pub fn fit_nn_rulsif(reference: &Rows, test: &Rows, adam: &AdamConfig, alpha: f64, seed: u64) -> Result<Mlp> {
    fit_nn_rulsif_traced(reference, test, adam, alpha, seed).map(|(m, _)| m)
}

/// Each step pairs one reference batch with one test batch; an epoch has
/// `ceil(max(n_rf, n_te) / batch_size)` steps, the smaller sample cycling
/// through its batches.
pub fn fit_nn_rulsif_traced(
    reference: &Rows,
    test: &Rows,
    adam: &AdamConfig,
    alpha: f64,
    seed: u64,
) -> Result<(Mlp, EpochLosses)> {
    adam.validate()?;
    check_samples(reference, test)?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(CpdError::invalid(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut net = Mlp::init(reference.ncols(), adam.hidden, OutputKind::Linear, &mut rng);
    let mut opt = Adam::new(net.params.len(), adam);
    let bs = adam.batch_size;
    let (n_rf, n_te) = (reference.nrows(), test.nrows());
    let steps = n_rf.max(n_te).div_ceil(bs);
    let mut perm_rf: Vec<usize> = (0..n_rf).collect();
    let mut perm_te: Vec<usize> = (0..n_te).collect();
    let mut losses = Vec::with_capacity(adam.epochs);
    let chunk = |perm: &[usize], step: usize| -> Vec<usize> {
        let n_chunks = perm.len().div_ceil(bs);
        let c = step % n_chunks;
        perm[c * bs..((c + 1) * bs).min(perm.len())].to_vec()
    };
    for _ in 0..adam.epochs {
        perm_rf.shuffle(&mut rng);
        perm_te.shuffle(&mut rng);
        for step in 0..steps {
            let rb = reference.select(&chunk(&perm_rf, step));
            let tb = test.select(&chunk(&perm_te, step));
            let batch = LossBatch::Rulsif {
                reference: &rb,
                test: &tb,
                alpha,
            };
            let g = backprop_gradients(&net, &batch)?;
            opt.update(&mut net.params, &g);
        }
        losses.push(rulsif_batch_loss(&net, reference, test, alpha)?);
    }
    if net.params.iter().any(|p| !p.is_finite()) {
        return Err(CpdError::Solver("network parameters diverged".to_string()));
    }
    Ok((net, losses))
}

pub fn fit_nn_classifier(reference: &Rows, test: &Rows, adam: &AdamConfig, seed: u64) -> Result<Mlp> {
    fit_nn_classifier_traced(reference, test, adam, seed).map(|(m, _)| m)
}

/// Mini-batches are drawn from the shuffled union of both samples.
pub fn fit_nn_classifier_traced(
    reference: &Rows,
    test: &Rows,
    adam: &AdamConfig,
    seed: u64,
) -> Result<(Mlp, EpochLosses)> {
    adam.validate()?;
    check_samples(reference, test)?;
    let mut rng = rng_from_seed(seed);
    let mut net = Mlp::init(reference.ncols(), adam.hidden, OutputKind::Sigmoid, &mut rng);
    let mut opt = Adam::new(net.params.len(), adam);
    let rows = reference.stack(test)?;
    let n_rf = reference.nrows();
    let labels: Vec<f64> = (0..rows.nrows()).map(|i| if i >= n_rf { 1.0 } else { 0.0 }).collect();
    let mut perm: Vec<usize> = (0..rows.nrows()).collect();
    let mut losses = Vec::with_capacity(adam.epochs);
    for _ in 0..adam.epochs {
        perm.shuffle(&mut rng);
        for idx in perm.chunks(adam.batch_size) {
            let xb = rows.select(idx);
            let yb: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
            let g = backprop_gradients(&net, &LossBatch::Bce { rows: &xb, labels: &yb })?;
            opt.update(&mut net.params, &g);
        }
        losses.push(batch_loss(
            &net,
            &LossBatch::Bce {
                rows: &rows,
                labels: &labels,
            },
        )?);
    }
    if net.params.iter().any(|p| !p.is_finite()) {
        return Err(CpdError::Solver("network parameters diverged".to_string()));
    }
    Ok((net, losses))
}
