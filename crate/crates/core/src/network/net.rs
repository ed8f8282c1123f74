use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Container;

/// Affine map `x ↦ W x + b` with `W` stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                let row = &self.weights[i * self.cols..(i + 1) * self.cols];
                self.bias[i] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// `Γ(x) = clamp_M(W_L φ_{L-1} ∘ … ∘ φ_1(x) + b_L)` with
/// `φ_l(x) = max(W_l x + b_l, 0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
    /// Componentwise output bound `M`.
    pub clamp: f64,
}

/// Per-example intermediate values kept for backpropagation.
pub(crate) struct Trace {
    // activations[0] = input, activations[l] = output of hidden layer l
    activations: Vec<Vec<f64>>,
    // pre-activations of every layer, the last one before the clamp
    pre: Vec<Vec<f64>>,
}

impl Network {
    /// Zero network with layer widths `widths[0] → widths[1] → … → widths[L]`.
    pub fn zeros(widths: &[usize], clamp: f64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::invalid("network needs at least two positive widths"));
        }
        if !(clamp >= 0.0) {
            return Err(Error::invalid("output clamp must be non-negative"));
        }
        Ok(Network {
            layers: widths
                .windows(2)
                .map(|w| Layer::zeros(w[1], w[0]))
                .collect(),
            clamp,
        })
    }

    /// He-style uniform initialization `U(±√(6/fan_in))`, zero biases.
    pub fn init(widths: &[usize], clamp: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut net = Network::zeros(widths, clamp)?;
        for layer in &mut net.layers {
            let a = (6.0 / layer.cols as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-a..a);
            }
        }
        Ok(net)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().rows
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.layers.iter().map(|l| l.rows));
        w
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = flat[k];
                k += 1;
            }
        }
        Ok(())
    }

    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            if index < l.weights.len() {
                return &mut l.weights[index];
            }
            index -= l.weights.len();
            if index < l.bias.len() {
                return &mut l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn nonzeros(&self) -> usize {
        self.params().iter().filter(|v| **v != 0.0).count()
    }

    pub fn max_abs_param(&self) -> f64 {
        self.params().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut a = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            a = layer.affine(&a);
            if l < last {
                for v in &mut a {
                    *v = v.max(0.0);
                }
            }
        }
        let m = self.clamp;
        Ok(a.into_iter().map(|v| v.clamp(-m, m)).collect())
    }

    pub(crate) fn forward_trace(&self, x: &[f64]) -> Trace {
        let last = self.layers.len() - 1;
        let mut activations = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(activations.last().unwrap());
            if l < last {
                activations.push(z.iter().map(|v| v.max(0.0)).collect());
            }
            pre.push(z);
        }
        Trace { activations, pre }
    }

    /// Mean squared loss `(1/B) Σ ‖Γ(x_i) − y_i‖²` and its gradient.
    ///
    /// The clamp has zero derivative outside `[-M, M]` and the ReLU
    /// subgradient at 0 is 0.
    pub fn backward(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(f64, Gradient)> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::invalid("backward needs a nonempty batch of matching pairs"));
        }
        let mut grad = Gradient::zeros_like(self);
        let mut loss = 0.0;
        let scale = 1.0 / inputs.len() as f64;
        let m = self.clamp;
        for (x, y) in inputs.iter().zip(targets) {
            self.check_input(x)?;
            if y.len() != self.output_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.output_dim(),
                    got: y.len(),
                });
            }
            let tr = self.forward_trace(x);
            let z_out = tr.pre.last().unwrap();
            let mut delta: Vec<f64> = z_out
                .iter()
                .zip(y)
                .map(|(&z, &t)| {
                    let out = z.clamp(-m, m);
                    let r = out - t;
                    loss += r * r;
                    if z >= -m && z <= m {
                        2.0 * r * scale
                    } else {
                        0.0
                    }
                })
                .collect();
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let a_prev = &tr.activations[l];
                let g = &mut grad.layers[l];
                for i in 0..layer.rows {
                    let d = delta[i];
                    if d == 0.0 {
                        continue;
                    }
                    g.bias[i] += d;
                    let row = &mut g.weights[i * layer.cols..(i + 1) * layer.cols];
                    for (gw, a) in row.iter_mut().zip(a_prev) {
                        *gw += d * a;
                    }
                }
                if l == 0 {
                    break;
                }
                let z_prev = &tr.pre[l - 1];
                let mut next = vec![0.0; layer.cols];
                for i in 0..layer.rows {
                    let d = delta[i];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[i * layer.cols..(i + 1) * layer.cols];
                    for (n, w) in next.iter_mut().zip(row) {
                        *n += d * w;
                    }
                }
                for (n, z) in next.iter_mut().zip(z_prev) {
                    if *z <= 0.0 {
                        *n = 0.0;
                    }
                }
                delta = next;
            }
        }
        Ok((loss * scale, grad))
    }

    /// Mean squared loss over a set of pairs.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
        if inputs.is_empty() {
            return Err(Error::invalid("loss needs at least one pair"));
        }
        let mut total = 0.0;
        for (x, y) in inputs.iter().zip(targets) {
            let out = self.forward(x)?;
            total += out.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(total / inputs.len() as f64)
    }

    /// Smallest `|pre-activation|` over all hidden units for input `x`.
    pub fn kink_distance(&self, x: &[f64]) -> f64 {
        let tr = self.forward_trace(x);
        let hidden = &tr.pre[..tr.pre.len() - 1];
        let mut d = hidden
            .iter()
            .flatten()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()));
        for z in tr.pre.last().unwrap() {
            d = d.min((z.abs() - self.clamp).abs());
        }
        d
    }

    pub fn to_container(&self) -> Container {
        let meta = serde_json::json!({ "widths": self.widths(), "clamp": self.clamp });
        let mut c = Container::new("network", meta);
        for (l, layer) in self.layers.iter().enumerate() {
            c = c
                .with_array(&format!("W{}", l + 1), layer.weights.clone())
                .with_array(&format!("b{}", l + 1), layer.bias.clone());
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        c.expect_kind("network")?;
        let widths: Vec<usize> = c.meta_field("widths")?;
        let clamp: f64 = c.meta_field("clamp")?;
        let mut net = Network::zeros(&widths, clamp)?;
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let w = c.array(&format!("W{}", l + 1))?;
            let b = c.array(&format!("b{}", l + 1))?;
            if w.len() != layer.weights.len() || b.len() != layer.bias.len() {
                return Err(Error::Format(format!("layer {} has the wrong shape", l + 1)));
            }
            layer.weights = w.to_vec();
            layer.bias = b.to_vec();
        }
        Ok(net)
    }
}

/// Gradient with the same shapes as the network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    pub fn zeros_like(net: &Network) -> Self {
        Gradient {
            layers: net.layers.iter().map(|l| Layer::zeros(l.rows, l.cols)).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn forward(net: &Network, x: &[f64]) -> Result<Vec<f64>> {
    net.forward(x)
}

pub fn backward(net: &Network, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(f64, Gradient)> {
    net.backward(inputs, targets)
}
