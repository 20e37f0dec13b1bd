//! Fully connected Q-network: rectified-linear hidden layers, identity output.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `fan_in x fan_out`, so a batch forward is `x.dot(&weights) + bias`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` initialization.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_fn((w[0], w[1]), |_| rng.gen_range(-bound..=bound)),
                    bias: Array1::from_shape_fn(w[1], |_| rng.gen_range(-bound..=bound)),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Mlp {
            layers: sizes
                .windows(2)
                .map(|w| Dense {
                    weights: Array2::zeros((w[0], w[1])),
                    bias: Array1::zeros(w[1]),
                })
                .collect(),
        }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Self {
        Mlp { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp::zeros(&self.sizes())
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].weights.nrows()];
        sizes.extend(self.layers.iter().map(|l| l.weights.ncols()));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.ncols()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>, AgentError> {
        if state.len() != self.input_dim() {
            return Err(AgentError::Dimension {
                expected: self.input_dim(),
                got: state.len(),
            });
        }
        let x = ArrayView2::from_shape((1, state.len()), state).expect("row view");
        Ok(self.forward_batch(x).into_raw_vec_and_offset().0)
    }

    /// Row-wise forward over a `batch x input_dim` matrix.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            a = a.dot(&layer.weights) + &layer.bias;
            if i < last {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        a
    }

    fn activations(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.weights) + &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    /// Mean squared TD error `1/b sum_j (y_j - Q(s_j, a_j))^2` and its
    /// gradient with respect to every parameter. Targets are constants.
    pub fn td_loss_and_grad(&self, states: ArrayView2<f64>, actions: &[usize], targets: &[f64]) -> (f64, Mlp) {
        let b = states.nrows();
        assert_eq!(actions.len(), b);
        assert_eq!(targets.len(), b);
        let acts = self.activations(states);
        let q = &acts[self.layers.len()];

        let mut delta = Array2::zeros(q.raw_dim());
        let mut loss = 0.0;
        for j in 0..b {
            let residual = targets[j] - q[[j, actions[j]]];
            loss += residual * residual;
            delta[[j, actions[j]]] = -2.0 * residual / b as f64;
        }
        loss /= b as f64;

        let mut grads = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let gw = acts[l].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights.t());
                // relu'(z) = 1 iff the stored activation is positive
                back.zip_mut_with(&acts[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(Dense { weights: gw, bias: gb });
        }
        grads.reverse();
        (loss, Mlp { layers: grads })
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters as one vector: per layer, weights row-major then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_params());
        let mut it = params.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = *it.next().unwrap();
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Largest absolute elementwise difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Mlp) -> f64 {
        self.params_flat()
            .iter()
            .zip(other.params_flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes() == other.sizes()
    }

    /// Scales the weights and bias of the output layer.
    pub fn scale_output(&mut self, factor: f64) {
        let last = self.layers.len() - 1;
        self.layers[last].weights *= factor;
        self.layers[last].bias *= factor;
    }

    pub(crate) fn rows(states: &[&[f64]], dim: usize) -> Array2<f64> {
        let mut m = Array2::zeros((states.len(), dim));
        for (i, s) in states.iter().enumerate() {
            m.slice_mut(s![i, ..]).assign(&ndarray::ArrayView1::from(*s));
        }
        m
    }
}
