//! Fully connected regression network trained with mini-batch Adam on MSE.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{Scaler, ScalerKind, TabularDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

pub const MAX_EPOCHS: usize = 100_000;
const FULL_BATCH_BELOW: usize = 1024;
const AUTO_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    /// 0 selects full-batch below 1024 rows, 256 otherwise.
    pub batch_size: usize,
    pub weight_decay: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            activation: Activation::Relu,
            learning_rate: 1e-3,
            epochs: 500,
            batch_size: 0,
            weight_decay: 0.0,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::HyperparameterOutOfRange(m));
        if self.hidden.iter().any(|&h| h == 0 || h > 4096) {
            return bad(format!("hidden sizes {:?} must lie in [1, 4096]", self.hidden));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 100.0) {
            return bad(format!("learning_rate {} outside (0, 100]", self.learning_rate));
        }
        if self.epochs > MAX_EPOCHS {
            return bad(format!("epochs {} > {MAX_EPOCHS}", self.epochs));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay <= 1.0) {
            return bad(format!("weight_decay {} outside [0, 1]", self.weight_decay));
        }
        Ok(())
    }

    fn effective_batch(&self, n: usize) -> usize {
        match self.batch_size {
            0 if n < FULL_BATCH_BELOW => n,
            0 => AUTO_BATCH,
            b => b.min(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out x in`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Layer stack with a hidden activation and a linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
    pub activation: Activation,
}

/// Per-layer gradients, shaped like the network parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub bias: Vec<Vec<f64>>,
}

impl Network {
    /// He-uniform (relu) or Glorot-uniform (tanh) weights, zero biases.
    pub fn init(sizes: &[usize], activation: Activation, seed: u64) -> Self {
        let mut rng = rng::rng_from(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = match activation {
                    Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                    Activation::Tanh => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                };
                let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..=limit)).collect();
                DenseLayer { weights: Matrix::from_vec(fan_out, fan_in, data).unwrap(), bias: vec![0.0; fan_out] }
            })
            .collect();
        Self { layers, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weights.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// Returns pre-activations per layer and the post-activation inputs
    /// (`acts[0]` is the input batch).
    fn forward_trace(&self, x: &Matrix) -> (Vec<Matrix>, Vec<Matrix>) {
        let mut acts = vec![x.clone()];
        let mut pre = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = affine(acts.last().unwrap(), layer);
            let a = if l == last {
                z.clone()
            } else {
                let mut a = z.clone();
                for i in 0..a.rows() {
                    for v in a.row_mut(i) {
                        *v = self.activation.apply(*v);
                    }
                }
                a
            };
            pre.push(z);
            acts.push(a);
        }
        (pre, acts)
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut a = x.clone();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            a = affine(&a, layer);
            if l != last {
                for i in 0..a.rows() {
                    for v in a.row_mut(i) {
                        *v = self.activation.apply(*v);
                    }
                }
            }
        }
        a
    }

    /// Mean squared error over every row and output, and its gradient.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &Matrix) -> (f64, Gradients) {
        let (pre, acts) = self.forward_trace(x);
        let out = acts.last().unwrap();
        let count = (out.rows() * out.cols()) as f64;
        let mut delta = out.clone();
        let mut loss = 0.0;
        for i in 0..delta.rows() {
            for (d, t) in delta.row_mut(i).iter_mut().zip(y.row(i)) {
                let e = *d - t;
                loss += e * e;
                *d = 2.0 * e / count;
            }
        }
        loss /= count;

        let n_layers = self.layers.len();
        let mut gw = vec![Matrix::zeros(0, 0); n_layers];
        let mut gb = vec![Vec::new(); n_layers];
        for l in (0..n_layers).rev() {
            let input = &acts[l];
            let layer = &self.layers[l];
            let (n_out, n_in) = (layer.weights.rows(), layer.weights.cols());
            let mut w_grad = Matrix::zeros(n_out, n_in);
            let mut b_grad = vec![0.0; n_out];
            for r in 0..delta.rows() {
                let dr = delta.row(r);
                let ar = input.row(r);
                for o in 0..n_out {
                    let g = dr[o];
                    if g == 0.0 {
                        continue;
                    }
                    b_grad[o] += g;
                    for (w, a) in w_grad.row_mut(o).iter_mut().zip(ar) {
                        *w += g * a;
                    }
                }
            }
            if l > 0 {
                let mut prev = Matrix::zeros(delta.rows(), n_in);
                for r in 0..delta.rows() {
                    let dr = delta.row(r);
                    let pr = prev.row_mut(r);
                    for (o, &g) in dr.iter().enumerate() {
                        if g == 0.0 {
                            continue;
                        }
                        for (p, w) in pr.iter_mut().zip(layer.weights.row(o)) {
                            *p += g * w;
                        }
                    }
                    for (p, z) in pr.iter_mut().zip(pre[l - 1].row(r)) {
                        *p *= self.activation.derivative(*z);
                    }
                }
                delta = prev;
            }
            gw[l] = w_grad;
            gb[l] = b_grad;
        }
        (loss, Gradients { weights: gw, bias: gb })
    }

    /// Flattened parameters, layer by layer: weights then bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for l in &self.layers {
            p.extend_from_slice(l.weights.as_slice());
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        let mut k = 0;
        for l in &mut self.layers {
            let (r, c) = (l.weights.rows(), l.weights.cols());
            l.weights = Matrix::from_vec(r, c, p[k..k + r * c].to_vec()).unwrap();
            k += r * c;
            l.bias.copy_from_slice(&p[k..k + r]);
            k += r;
        }
    }
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            p.extend_from_slice(w.as_slice());
            p.extend_from_slice(b);
        }
        p
    }
}

fn affine(x: &Matrix, layer: &DenseLayer) -> Matrix {
    let mut z = Matrix::zeros(x.rows(), layer.weights.rows());
    for r in 0..x.rows() {
        let xr = x.row(r);
        for (o, zo) in z.row_mut(r).iter_mut().enumerate() {
            *zo = layer.weights.row(o).iter().zip(xr).fold(layer.bias[o], |acc, (w, v)| acc + w * v);
        }
    }
    z
}

/// Network plus the feature and target scalers it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub network: Network,
    pub input_scaler: Scaler,
    pub output_scaler: Scaler,
}

impl MlpModel {
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let scaled = self.input_scaler.apply(x)?;
        self.output_scaler.invert(&self.network.forward(&scaled))
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains a multi-output network on every target of `train` jointly.
pub fn train_mlp(train: &TabularDataset, params: &MlpParams, seed: u64) -> Result<MlpModel> {
    params.validate()?;
    let n = train.n_rows();
    if n < 2 {
        return Err(Error::InvalidDataset("MLP training needs at least 2 rows".into()));
    }
    let input_scaler = Scaler::fit(train.features(), ScalerKind::Standard)?;
    let output_scaler = Scaler::fit(train.targets(), ScalerKind::Standard)?;
    let x = input_scaler.apply(train.features())?;
    let y = output_scaler.apply(train.targets())?;

    let mut sizes = vec![train.n_features()];
    sizes.extend(&params.hidden);
    sizes.push(train.n_targets());
    let mut network = Network::init(&sizes, params.activation, rng::derive_seed(seed, &[0]));
    let mut shuffle_rng = rng::stream(seed, &[1]);

    let batch = params.effective_batch(n);
    let mut flat = network.parameters();
    let mut adam = Adam::new(flat.len());
    // weight entries get decay, biases do not
    let decay_mask: Vec<bool> = network
        .layers
        .iter()
        .flat_map(|l| std::iter::repeat_n(true, l.weights.rows() * l.weights.cols()).chain(std::iter::repeat_n(false, l.bias.len())))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..params.epochs {
        if batch < n {
            order.shuffle(&mut shuffle_rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let (bx, by) = if batch == n { (x.clone(), y.clone()) } else { (x.select_rows(chunk), y.select_rows(chunk)) };
            let (loss, grads) = network.loss_and_gradient(&bx, &by);
            epoch_loss += loss * chunk.len() as f64;
            let mut g = grads.flatten();
            if params.weight_decay > 0.0 {
                for ((gi, p), &decay) in g.iter_mut().zip(&flat).zip(&decay_mask) {
                    if decay {
                        *gi += params.weight_decay * p;
                    }
                }
            }
            adam.step(&mut flat, &g, params.learning_rate);
            network.set_parameters(&flat);
        }
        if !epoch_loss.is_finite() || !flat.iter().all(|p| p.is_finite()) {
            return Err(Error::TrainingFailed(format!("MLP diverged at epoch {epoch}")));
        }
    }
    let model = MlpModel { network, input_scaler, output_scaler };
    let check = model.predict(train.features())?;
    if !check.is_finite() {
        return Err(Error::TrainingFailed("MLP produces non-finite predictions".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_dataset(n: usize) -> TabularDataset {
        let xs: Vec<[f64; 1]> = (0..n).map(|i| [i as f64 / (n - 1) as f64]).collect();
        let ys: Vec<[f64; 1]> = xs.iter().map(|x| [2.0 * x[0]]).collect();
        TabularDataset::new(
            vec!["x".into()],
            vec!["y".into()],
            Matrix::from_rows(&xs).unwrap(),
            Matrix::from_rows(&ys).unwrap(),
        )
        .unwrap()
    }

    /// Central finite differences, step 1e-5.
    fn numeric_gradient(net: &Network, x: &Matrix, y: &Matrix) -> Vec<f64> {
        let base = net.parameters();
        let h = 1e-5;
        (0..base.len())
            .map(|k| {
                let mut probe = net.clone();
                let mut p = base.clone();
                p[k] = base[k] + h;
                probe.set_parameters(&p);
                let up = probe.loss_and_gradient(x, y).0;
                p[k] = base[k] - h;
                probe.set_parameters(&p);
                let down = probe.loss_and_gradient(x, y).0;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn relative_error(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = a.iter().map(|u| u * u).sum::<f64>().sqrt().max(b.iter().map(|v| v * v).sum::<f64>().sqrt());
        diff / scale.max(1e-300)
    }

    #[test]
    fn backprop_matches_finite_differences() {
        for (act, seed) in [(Activation::Tanh, 1), (Activation::Relu, 2), (Activation::Tanh, 3)] {
            let net = Network::init(&[2, 3, 1], act, seed);
            let mut rng = rng::rng_from(seed + 100);
            let x = Matrix::from_vec(4, 2, (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let y = Matrix::from_vec(4, 1, (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let analytic = net.loss_and_gradient(&x, &y).1.flatten();
            let numeric = numeric_gradient(&net, &x, &y);
            let err = relative_error(&analytic, &numeric);
            assert!(err < 1e-4, "{act:?}: relative error {err}");
        }
    }

    #[test]
    fn fits_a_line() {
        let ds = linear_dataset(64);
        let p = MlpParams { learning_rate: 1e-2, epochs: 2000, ..Default::default() };
        let m = train_mlp(&ds, &p, 7).unwrap();
        let test: Vec<[f64; 1]> = (0..50).map(|i| [(i as f64 + 0.5) / 50.0]).collect();
        let pred = m.predict(&Matrix::from_rows(&test).unwrap()).unwrap();
        let mse = test.iter().enumerate().map(|(i, x)| (pred.get(i, 0) - 2.0 * x[0]).powi(2)).sum::<f64>() / 50.0;
        assert!(mse < 1e-3, "mse {mse}");
    }

    #[test]
    fn zero_epochs_keeps_initialization() {
        let ds = linear_dataset(10);
        let p = MlpParams { epochs: 0, ..Default::default() };
        let m = train_mlp(&ds, &p, 3).unwrap();
        assert_eq!(m.network, Network::init(&[1, 64, 1], Activation::Relu, rng::derive_seed(3, &[0])));
        assert!(m.predict(ds.features()).unwrap().is_finite());
    }

    #[test]
    fn training_is_deterministic() {
        let ds = linear_dataset(30);
        let p = MlpParams { epochs: 20, batch_size: 8, ..Default::default() };
        assert_eq!(train_mlp(&ds, &p, 5).unwrap(), train_mlp(&ds, &p, 5).unwrap());
    }

    #[test]
    fn huge_learning_rate_is_a_labeled_failure_or_finite() {
        let ds = linear_dataset(30);
        let p = MlpParams { learning_rate: 100.0, epochs: 200, hidden: vec![256, 256], ..Default::default() };
        match train_mlp(&ds, &p, 5) {
            Ok(m) => assert!(m.network.is_finite()),
            Err(e) => assert!(matches!(e, Error::TrainingFailed(_))),
        }
    }
}
