use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::softmax;
use super::{Dense, MlpParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Rectifier hidden layers and a softmax output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

impl Layer {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                self.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }
}

fn relu(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(inputs: usize, hidden: &[usize], classes: usize, rng: &mut impl Rng) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(classes);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    inputs: w[0],
                    outputs: w[1],
                    weights: (0..w[0] * w[1]).map(|_| rng.gen_range(-limit..limit)).collect(),
                    bias: vec![0.0; w[1]],
                }
            })
            .collect();
        Mlp { layers }
    }

    /// Activations of every layer, input first; the last entry holds
    /// class probabilities.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(acts.last().expect("input"));
            if i + 1 < self.layers.len() {
                relu(&mut z);
            } else {
                z = softmax(&z);
            }
            acts.push(z);
        }
        acts
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.activations(x).pop().expect("output layer")
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&p[at..at + nb]);
            at += nb;
        }
    }

    /// Mean cross-entropy over `rows` plus `l2/2 * |W|^2` (biases not
    /// penalized), with the gradient in [`Mlp::params`] order.
    pub fn loss_and_gradient(&self, x: &Dense, y: &[usize], rows: &[usize], l2: f64) -> (f64, Vec<f64>) {
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        let m = rows.len() as f64;
        let mut loss = 0.0;
        for &r in rows {
            let acts = self.activations(x.row(r));
            let out = acts.last().expect("output");
            loss -= out[y[r]].max(1e-300).ln();
            let mut delta: Vec<f64> = out.clone();
            delta[y[r]] -= 1.0;
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let (gw, gb) = &mut grads[li];
                for o in 0..layer.outputs {
                    gb[o] += delta[o];
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, a) in row.iter_mut().zip(input) {
                        *g += delta[o] * a;
                    }
                }
                if li > 0 {
                    let mut back = vec![0.0; layer.inputs];
                    for o in 0..layer.outputs {
                        let w = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        for (b, wv) in back.iter_mut().zip(w) {
                            *b += delta[o] * wv;
                        }
                    }
                    for (b, a) in back.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *b = 0.0;
                        }
                    }
                    delta = back;
                }
            }
        }
        loss /= m;
        let mut flat = Vec::with_capacity(self.n_params());
        for (layer, (gw, gb)) in self.layers.iter().zip(grads) {
            loss += 0.5 * l2 * layer.weights.iter().map(|w| w * w).sum::<f64>();
            flat.extend(gw.iter().zip(&layer.weights).map(|(g, w)| g / m + l2 * w));
            flat.extend(gb.iter().map(|g| g / m));
        }
        (loss, flat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpTrace {
    pub epochs: usize,
    /// Full training loss before training and after each epoch.
    pub loss_history: Vec<f64>,
}

/// Adam on shuffled mini-batches; all randomness comes from `seed`.
/// `epochs = 0` returns the initialized network.
pub fn fit_mlp(x: &Dense, y: &[usize], k: usize, params: &MlpParams, seed: u64) -> (Mlp, MlpTrace) {
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::init(x.cols, &params.hidden, k, &mut rng);
    let all: Vec<usize> = (0..x.rows).collect();
    let full_loss = |net: &Mlp| net.loss_and_gradient(x, y, &all, params.l2).0;
    let mut history = vec![full_loss(&net)];
    let mut p = net.params();
    let mut m1 = vec![0.0; p.len()];
    let mut m2 = vec![0.0; p.len()];
    let mut t = 0i32;
    let mut order = all.clone();
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size.max(1)) {
            t += 1;
            let (_, g) = net.loss_and_gradient(x, y, batch, params.l2);
            let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
            for i in 0..p.len() {
                m1[i] = beta1 * m1[i] + (1.0 - beta1) * g[i];
                m2[i] = beta2 * m2[i] + (1.0 - beta2) * g[i] * g[i];
                p[i] -= params.learning_rate * (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
            }
            net.set_params(&p);
        }
        history.push(full_loss(&net));
    }
    (
        net,
        MlpTrace {
            epochs: params.epochs,
            loss_history: history,
        },
    )
}
