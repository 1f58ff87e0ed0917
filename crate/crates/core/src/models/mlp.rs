//! Feed-forward network with ReLU hidden layers and a softmax output,
//! trained with Adam on mini-batches.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::softmax_in_place;

pub const MAX_EPOCHS: usize = 300;
pub const MAX_BATCH: usize = 200;
/// Stop after this many epochs without a relative loss improvement of [`PLATEAU_REL_TOL`].
pub const PLATEAU_EPOCHS: usize = 10;
pub const PLATEAU_REL_TOL: f64 = 1e-6;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden_layer_sizes: Vec<usize>,
    /// L2 penalty.
    pub alpha: f64,
    pub learning_rate_init: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden_layer_sizes: vec![100],
            alpha: 1e-4,
            learning_rate_init: 1e-3,
        }
    }
}

/// Layer weights (`fan_in x fan_out`) and biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Network {
    /// Glorot-uniform initialization for layer sizes `[input, hidden..., output]`.
    pub fn init<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
            weights.push(Array2::from_shape_fn((w[0], w[1]), |_| rng.gen_range(-bound..bound)));
            biases.push(Array1::from_shape_fn(w[1], |_| rng.gen_range(-bound..bound)));
        }
        Self { weights, biases }
    }

    fn zeros_like(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    /// Activations of every layer, input first; the last is the softmax output.
    fn forward(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.to_owned()];
        let last = self.weights.len() - 1;
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[i].dot(w);
            z += b;
            if i == last {
                for mut row in z.rows_mut() {
                    softmax_in_place(row.as_slice_mut().expect("contiguous"));
                }
            } else {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.forward(x).pop().expect("output layer")
    }

    /// `mean CE + alpha / (2n) * sum ||W||^2` and its gradient.
    pub fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, y: &[usize], alpha: f64) -> (f64, Network) {
        let n = x.nrows() as f64;
        let acts = self.forward(x);
        let out = acts.last().expect("output layer");
        let mut loss = -y
            .iter()
            .enumerate()
            .map(|(r, &c)| out[[r, c]].max(1e-300).ln())
            .sum::<f64>()
            / n;
        loss += 0.5 * alpha / n * self.weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum::<f64>();

        let mut grads = self.zeros_like();
        let mut delta = out.clone();
        for (r, &c) in y.iter().enumerate() {
            delta[[r, c]] -= 1.0;
        }
        delta /= n;
        for layer in (0..self.weights.len()).rev() {
            let mut gw = acts[layer].t().dot(&delta);
            gw.scaled_add(alpha / n, &self.weights[layer]);
            grads.weights[layer] = gw;
            grads.biases[layer] = delta.sum_axis(Axis(0));
            if layer > 0 {
                let mut back = delta.dot(&self.weights[layer].t());
                Zip::from(&mut back)
                    .and(&acts[layer])
                    .for_each(|d, &a| if a <= 0.0 { *d = 0.0 });
                delta = back;
            }
        }
        (loss, grads)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            v.extend(w.iter());
            v.extend(b.iter());
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|v| *v = it.next().expect("enough parameters"));
            b.iter_mut().for_each(|v| *v = it.next().expect("enough parameters"));
        }
    }
}

struct Adam {
    m: Network,
    v: Network,
    step: i32,
}

impl Adam {
    fn update(&mut self, net: &mut Network, grads: &Network, lr: f64) {
        self.step += 1;
        let rate = lr * (1.0 - BETA2.powi(self.step)).sqrt() / (1.0 - BETA1.powi(self.step));
        let apply = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= rate * *m / (v.sqrt() + EPSILON);
        };
        for i in 0..net.weights.len() {
            Zip::from(&mut net.weights[i])
                .and(&grads.weights[i])
                .and(&mut self.m.weights[i])
                .and(&mut self.v.weights[i])
                .for_each(|p, &g, m, v| apply(p, g, m, v));
            Zip::from(&mut net.biases[i])
                .and(&grads.biases[i])
                .and(&mut self.m.biases[i])
                .and(&mut self.v.biases[i])
                .for_each(|p, &g, m, v| apply(p, g, m, v));
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    network: Network,
    epochs: usize,
}

impl MlpModel {
    pub fn fit(params: &MlpParams, x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![x.ncols()];
        sizes.extend(&params.hidden_layer_sizes);
        sizes.push(n_classes);
        let mut network = Network::init(&sizes, &mut rng);
        let mut adam = Adam {
            m: network.zeros_like(),
            v: network.zeros_like(),
            step: 0,
        };
        let n = x.nrows();
        let batch = n.clamp(1, MAX_BATCH);
        let mut order: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        let mut stale = 0;
        let mut epochs = 0;
        for _ in 0..MAX_EPOCHS {
            epochs += 1;
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                let xb = x.select(Axis(0), chunk);
                let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
                let (loss, grads) = network.loss_and_gradient(xb.view(), &yb, params.alpha);
                epoch_loss += loss * chunk.len() as f64;
                adam.update(&mut network, &grads, params.learning_rate_init);
            }
            epoch_loss /= n as f64;
            if epoch_loss < best * (1.0 - PLATEAU_REL_TOL) {
                best = epoch_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= PLATEAU_EPOCHS {
                    break;
                }
            }
        }
        Self { network, epochs }
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn epochs_run(&self) -> usize {
        self.epochs
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.network.predict_proba(x)
    }
}
