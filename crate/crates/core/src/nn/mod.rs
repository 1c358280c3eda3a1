//! Dense networks with manual reverse-mode gradients.
//!
//! Parameters of all layers live in one flat vector (per layer: weights in
//! input-major `in x out` order, then biases), which keeps the optimizer and
//! finite-difference checks trivial. Checkpoints are the JSON serialization
//! of [`Mlp`]: `{"widths": [...], "hidden": "tanh"|"relu", "head": ..., "params": [...]}`.

mod adam;

pub use adam::Adam;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Probabilities are kept inside `[PROB_EPS, 1 - PROB_EPS]` before any log.
pub const PROB_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `y` and input `x`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Linear,
    /// Single output squashed to a clamped probability.
    Sigmoid,
    /// Unnormalized log-probabilities (or per-action values).
    LogitsVector,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// `log(sum(exp(x)))`, stable.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = logsumexp(xs);
    xs.iter().map(|x| (x - lse).exp()).collect()
}

/// Per-sample training loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    /// `-w [y ln p + (1 - y) ln (1 - p)]` on a sigmoid head.
    BinaryCrossEntropy { label: f64, weight: f64 },
    /// `w (out[index] - target)^2 / 2`.
    SquaredError { index: usize, target: f64, weight: f64 },
    /// `-w ln softmax(out)[action]` on a logits head.
    LogProbWeighted { action: usize, weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    hidden: Activation,
    head: Head,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass, reused by backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (the first entry is the network input).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    /// Network output after the head.
    pub output: Vec<f64>,
}

/// Gradients laid out exactly like [`Mlp`] parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients(vec![0.0; net.params.len()])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }

    pub fn scale(&mut self, k: f64) {
        self.0.iter_mut().for_each(|g| *g *= k);
    }
}

impl Mlp {
    /// Network with the given layer widths (input first, output last) and
    /// weights drawn uniformly in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], hidden: Activation, head: Head, rng: &mut R) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!("invalid layer widths {widths:?}")));
        }
        if head == Head::Sigmoid && *widths.last().unwrap() != 1 {
            return Err(Error::Config("sigmoid head requires a single output".into()));
        }
        let n_params = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let mut params = Vec::with_capacity(n_params);
        for w in widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                params.push(rng.random_range(-bound..=bound));
            }
            for _ in 0..w[1] {
                params.push(rng.random_range(-bound..=bound));
            }
        }
        Ok(Mlp {
            widths: widths.to_vec(),
            hidden,
            head,
            params,
        })
    }

    /// Same as [`Mlp::new`] but with the output layer zeroed, so the
    /// initial output is exactly 0 (probability 0.5 for a sigmoid head).
    pub fn with_zero_head<R: Rng + ?Sized>(widths: &[usize], hidden: Activation, head: Head, rng: &mut R) -> Result<Self> {
        let mut net = Self::new(widths, hidden, head, rng)?;
        let n = widths.len();
        let last = widths[n - 2] * widths[n - 1] + widths[n - 1];
        let len = net.params.len();
        net.params[len - last..].iter_mut().for_each(|p| *p = 0.0);
        Ok(net)
    }

    /// Build from explicit parameters.
    pub fn from_params(widths: &[usize], hidden: Activation, head: Head, params: Vec<f64>) -> Result<Self> {
        let n: usize = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if params.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: params.len(),
            });
        }
        Ok(Mlp {
            widths: widths.to_vec(),
            hidden,
            head,
            params,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    fn apply_head(&self, z: &[f64]) -> Vec<f64> {
        match self.head {
            Head::Sigmoid => vec![clamp_prob(sigmoid(z[0]))],
            Head::Linear | Head::LogitsVector => z.to_vec(),
        }
    }

    /// Affine map of layer `l` whose parameters start at `offset`.
    fn affine(&self, l: usize, offset: usize, x: &[f64]) -> Vec<f64> {
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        let mut z = self.params[offset + n_in * n_out..offset + n_in * n_out + n_out].to_vec();
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            let col = &self.params[offset + i * n_out..offset + (i + 1) * n_out];
            for (zo, w) in z.iter_mut().zip(col) {
                *zo += xi * w;
            }
        }
        z
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        let mut offset = 0;
        let last = self.n_layers() - 1;
        for l in 0..self.n_layers() {
            let mut z = self.affine(l, offset, &x);
            offset += self.widths[l] * self.widths[l + 1] + self.widths[l + 1];
            if l < last {
                z.iter_mut().for_each(|v| *v = self.hidden.apply(*v));
            }
            x = z;
        }
        Ok(self.apply_head(&x))
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.n_layers());
        let mut pre = Vec::with_capacity(self.n_layers());
        let mut x = input.to_vec();
        let mut offset = 0;
        let last = self.n_layers() - 1;
        for l in 0..self.n_layers() {
            let z = self.affine(l, offset, &x);
            offset += self.widths[l] * self.widths[l + 1] + self.widths[l + 1];
            let next = if l < last {
                z.iter().map(|v| self.hidden.apply(*v)).collect()
            } else {
                z.clone()
            };
            inputs.push(std::mem::replace(&mut x, next));
            pre.push(z);
        }
        let output = self.apply_head(&x);
        Ok(ForwardCache { inputs, pre, output })
    }

    /// Loss value for a cached forward pass.
    pub fn loss_value(&self, cache: &ForwardCache, loss: &Loss) -> f64 {
        let out = &cache.output;
        match *loss {
            Loss::BinaryCrossEntropy { label, weight } => {
                let p = out[0];
                -weight * (label * p.ln() + (1.0 - label) * (1.0 - p).ln())
            }
            Loss::SquaredError { index, target, weight } => 0.5 * weight * (out[index] - target).powi(2),
            Loss::LogProbWeighted { action, weight } => {
                let z = cache.pre.last().unwrap();
                -weight * (z[action] - logsumexp(z))
            }
        }
    }

    /// Derivative of the loss with respect to the last pre-activation.
    fn output_delta(&self, cache: &ForwardCache, loss: &Loss) -> Result<Vec<f64>> {
        let z = cache.pre.last().unwrap();
        let mut delta = vec![0.0; z.len()];
        match *loss {
            Loss::BinaryCrossEntropy { label, weight } => {
                if self.head != Head::Sigmoid {
                    return Err(Error::Config("binary cross-entropy requires a sigmoid head".into()));
                }
                delta[0] = weight * (sigmoid(z[0]) - label);
            }
            Loss::SquaredError { index, target, weight } => {
                if index >= z.len() {
                    return Err(Error::Shape {
                        expected: z.len(),
                        got: index + 1,
                    });
                }
                let diff = weight * (cache.output[index] - target);
                delta[index] = match self.head {
                    Head::Sigmoid => {
                        let s = sigmoid(z[0]);
                        diff * s * (1.0 - s)
                    }
                    _ => diff,
                };
            }
            Loss::LogProbWeighted { action, weight } => {
                if self.head != Head::LogitsVector {
                    return Err(Error::Config("log-prob loss requires a logits head".into()));
                }
                if action >= z.len() {
                    return Err(Error::Shape {
                        expected: z.len(),
                        got: action + 1,
                    });
                }
                for (d, p) in delta.iter_mut().zip(softmax(z)) {
                    *d = weight * p;
                }
                delta[action] -= weight;
            }
        }
        Ok(delta)
    }

    /// Backpropagate `loss` through a cached pass, adding into `grads`.
    pub fn backward(&self, cache: &ForwardCache, loss: &Loss, grads: &mut Gradients) -> Result<()> {
        let mut delta = self.output_delta(cache, loss)?;
        let mut offsets = Vec::with_capacity(self.n_layers());
        let mut o = 0;
        for w in self.widths.windows(2) {
            offsets.push(o);
            o += w[0] * w[1] + w[1];
        }
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let off = offsets[l];
            let x = &cache.inputs[l];
            for (i, xi) in x.iter().enumerate() {
                if *xi == 0.0 {
                    continue;
                }
                let g = &mut grads.0[off + i * n_out..off + (i + 1) * n_out];
                for (gi, d) in g.iter_mut().zip(&delta) {
                    *gi += xi * d;
                }
            }
            for (gb, d) in grads.0[off + n_in * n_out..off + n_in * n_out + n_out].iter_mut().zip(&delta) {
                *gb += d;
            }
            if l > 0 {
                let pre = &cache.pre[l - 1];
                let back: Vec<f64> = (0..n_in)
                    .map(|i| {
                        let col = &self.params[off + i * n_out..off + (i + 1) * n_out];
                        let s: f64 = col.iter().zip(&delta).map(|(w, d)| w * d).sum();
                        s * self.hidden.derivative(pre[i], x[i])
                    })
                    .collect();
                delta = back;
            }
        }
        Ok(())
    }

    /// Loss and parameter gradients for one sample.
    pub fn grad(&self, input: &[f64], loss: &Loss) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(self);
        let value = self.accumulate(input, loss, &mut grads)?;
        Ok((value, grads))
    }

    /// Forward + backward for one sample, adding into `grads`; returns the loss.
    pub fn accumulate(&self, input: &[f64], loss: &Loss, grads: &mut Gradients) -> Result<f64> {
        let cache = self.forward_cached(input)?;
        self.backward(&cache, loss, grads)?;
        Ok(self.loss_value(&cache, loss))
    }

    pub fn save_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn load_json(text: &str) -> Result<Self> {
        let net: Mlp = serde_json::from_str(text).map_err(|e| Error::Config(format!("bad network checkpoint: {e}")))?;
        Self::from_params(&net.widths, net.hidden, net.head, net.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::from_params(&[3, 4, 1], Activation::Tanh, Head::Linear, vec![0.0; 3 * 4 + 4 + 4 + 1]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 5.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn single_linear_layer() {
        let net = Mlp::from_params(&[1, 1], Activation::Tanh, Head::Linear, vec![2.0, 1.0]).unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn sigmoid_of_zero_logit_is_half() {
        let net = Mlp::from_params(&[1, 1], Activation::Tanh, Head::Sigmoid, vec![0.0, 0.0]).unwrap();
        assert_eq!(net.forward(&[4.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn sigmoid_output_is_clamped() {
        let net = Mlp::from_params(&[1, 1], Activation::Tanh, Head::Sigmoid, vec![100.0, 0.0]).unwrap();
        let p = net.forward(&[1.0]).unwrap()[0];
        assert!(p < 1.0 && p == 1.0 - PROB_EPS);
        let p = net.forward(&[-1.0]).unwrap()[0];
        assert!(p > 0.0 && (p - PROB_EPS).abs() < 1e-20);
    }

    #[test]
    fn width_mismatch_is_shape_error() {
        let net = Mlp::new(&[3, 2], Activation::Relu, Head::Linear, &mut seed::rng(0)).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Shape { expected: 3, got: 1 })));
    }

    #[test]
    fn bce_gradient_at_half() {
        let net = Mlp::from_params(&[1, 1], Activation::Tanh, Head::Sigmoid, vec![0.0, 0.0]).unwrap();
        let (loss, g) = net
            .grad(&[1.0], &Loss::BinaryCrossEntropy { label: 1.0, weight: 1.0 })
            .unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        // d loss / d bias equals d loss / d logit
        assert!((g.0[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn squared_error_at_target_has_zero_gradient() {
        let net = Mlp::new(&[2, 3, 2], Activation::Tanh, Head::Linear, &mut seed::rng(1)).unwrap();
        let out = net.forward(&[0.3, -0.2]).unwrap();
        let (loss, g) = net
            .grad(&[0.3, -0.2], &Loss::SquaredError { index: 1, target: out[1], weight: 1.0 })
            .unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.0.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn zero_head_starts_at_half() {
        let net = Mlp::with_zero_head(&[4, 8, 1], Activation::Relu, Head::Sigmoid, &mut seed::rng(2)).unwrap();
        assert_eq!(net.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn checkpoint_round_trip() {
        let net = Mlp::new(&[2, 3, 1], Activation::Relu, Head::Sigmoid, &mut seed::rng(3)).unwrap();
        let back = Mlp::load_json(&net.save_json()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn logsumexp_is_stable() {
        assert!((logsumexp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-9);
        let p = softmax(&[1.0, 0.0]);
        assert!((p[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
    }
}
