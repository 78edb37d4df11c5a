use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feed-forward action-value network: ELU hidden layers, linear output.
///
/// Parameters live in one flat vector, layer by layer: an `out × in`
/// row-major weight block followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    layer_shapes: Vec<usize>,
    params: Vec<f64>,
}

fn param_count(shapes: &[usize]) -> usize {
    shapes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub(crate) struct Trace {
    /// `acts[0]` is the input; `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub(crate) fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl QNetwork {
    /// All-zero network with the given shapes (input, hidden..., output).
    pub fn zeros(layer_shapes: Vec<usize>) -> Result<Self> {
        if layer_shapes.len() < 2 || layer_shapes.iter().any(|&s| s == 0) {
            return Err(Error::ShapeMismatch(format!("invalid layer shapes {layer_shapes:?}")));
        }
        let params = vec![0.0; param_count(&layer_shapes)];
        Ok(QNetwork { layer_shapes, params })
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init<R: Rng + ?Sized>(layer_shapes: Vec<usize>, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layer_shapes)?;
        let mut off = 0;
        for l in 0..net.layer_shapes.len() - 1 {
            let (fan_in, fan_out) = (net.layer_shapes[l], net.layer_shapes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for w in &mut net.params[off..off + fan_in * fan_out] {
                *w = rng.gen_range(-bound..bound);
            }
            off += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn from_parts(layer_shapes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let net = Self::zeros(layer_shapes)?;
        if params.len() != net.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "shapes {:?} need {} parameters, got {}",
                net.layer_shapes,
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(QNetwork {
            layer_shapes: net.layer_shapes,
            params,
        })
    }

    pub fn layer_shapes(&self) -> &[usize] {
        &self.layer_shapes
    }

    pub fn input_len(&self) -> usize {
        self.layer_shapes[0]
    }

    pub fn action_count(&self) -> usize {
        *self.layer_shapes.last().expect("at least two layers")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.input_len() {
            return Err(Error::ShapeMismatch(format!(
                "observation has {} entries, network expects {}",
                obs.len(),
                self.input_len()
            )));
        }
        Ok(())
    }

    /// Action values for one observation.
    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.check_input(obs)?;
        let mut x = obs.to_vec();
        let mut off = 0;
        let layers = self.layer_shapes.len() - 1;
        for l in 0..layers {
            let (fi, fo) = (self.layer_shapes[l], self.layer_shapes[l + 1]);
            let w = &self.params[off..off + fi * fo];
            let b = &self.params[off + fi * fo..off + fi * fo + fo];
            let last = l + 1 == layers;
            x = (0..fo)
                .map(|o| {
                    let z = b[o] + dot(&w[o * fi..(o + 1) * fi], &x);
                    if last {
                        z
                    } else {
                        elu(z)
                    }
                })
                .collect();
            off += fi * fo + fo;
        }
        Ok(x)
    }

    pub(crate) fn forward_trace(&self, obs: &[f64]) -> Result<Trace> {
        self.check_input(obs)?;
        let layers = self.layer_shapes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        let mut pre = Vec::with_capacity(layers);
        acts.push(obs.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (fi, fo) = (self.layer_shapes[l], self.layer_shapes[l + 1]);
            let w = &self.params[off..off + fi * fo];
            let b = &self.params[off + fi * fo..off + fi * fo + fo];
            let input = &acts[l];
            let z: Vec<f64> = (0..fo).map(|o| b[o] + dot(&w[o * fi..(o + 1) * fi], input)).collect();
            let a = if l + 1 == layers {
                z.clone()
            } else {
                z.iter().map(|&v| elu(v)).collect()
            };
            pre.push(z);
            acts.push(a);
            off += fi * fo + fo;
        }
        Ok(Trace { acts, pre })
    }

    /// Accumulates `∂(d_out · output)/∂params` into `grad`.
    pub(crate) fn backward(&self, trace: &Trace, d_out: &[f64], grad: &mut [f64]) {
        let layers = self.layer_shapes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.layer_shapes[l] * self.layer_shapes[l + 1] + self.layer_shapes[l + 1];
        }
        let mut delta = d_out.to_vec();
        for l in (0..layers).rev() {
            let (fi, fo) = (self.layer_shapes[l], self.layer_shapes[l + 1]);
            let off = offsets[l];
            let input = &trace.acts[l];
            for o in 0..fo {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let gw = &mut grad[off + o * fi..off + (o + 1) * fi];
                for (g, x) in gw.iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[off + fi * fo + o] += d;
            }
            if l > 0 {
                let w = &self.params[off..off + fi * fo];
                let mut prev = vec![0.0; fi];
                for o in 0..fo {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (p, wv) in prev.iter_mut().zip(&w[o * fi..(o + 1) * fi]) {
                        *p += d * wv;
                    }
                }
                for (p, z) in prev.iter_mut().zip(&trace.pre[l - 1]) {
                    *p *= elu_grad(*z);
                }
                delta = prev;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
