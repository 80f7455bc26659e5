//! Fully connected tanh network `(x, t) -> scalar` with flat parameters.
//!
//! Parameter layout, per layer in order: the `fan_out x fan_in` weight
//! matrix row-major, then the `fan_out` biases. Hidden layers apply tanh;
//! the output layer is affine.

mod checkpoint;
mod fused;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::{Jet2, Scalar};

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use fused::{CallRecord, FusedNet, NetRecorder};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("parameter count mismatch: layout needs {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub layer_sizes: Vec<usize>,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            layer_sizes: vec![2, 10, 10, 10, 1],
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let s = &self.layer_sizes;
        if s.len() < 2 {
            return Err(NetError::InvalidConfig("need at least input and output layers".into()));
        }
        if s[0] != 2 {
            return Err(NetError::InvalidConfig(format!("input width must be 2 (x, t), got {}", s[0])));
        }
        if s[s.len() - 1] != 1 {
            return Err(NetError::InvalidConfig(format!(
                "output width must be 1, got {}",
                s[s.len() - 1]
            )));
        }
        if s.contains(&0) {
            return Err(NetError::InvalidConfig("zero-width layer".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.layer_sizes)
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Borrowed view of one affine layer.
#[derive(Clone, Copy, Debug)]
pub struct LayerView<'a, S> {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Row-major `fan_out x fan_in`.
    pub weights: &'a [S],
    pub bias: &'a [S],
}

/// Owned layer, used when building parameters by hand.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Splits a flat parameter slice into layer views.
pub fn layer_views<'a, S>(sizes: &[usize], params: &'a [S]) -> Result<Vec<LayerView<'a, S>>, NetError> {
    let expected = param_count(sizes);
    if params.len() != expected {
        return Err(NetError::ShapeMismatch {
            expected,
            got: params.len(),
        });
    }
    let mut out = Vec::with_capacity(sizes.len() - 1);
    let mut off = 0;
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights = &params[off..off + fan_in * fan_out];
        off += fan_in * fan_out;
        let bias = &params[off..off + fan_out];
        off += fan_out;
        out.push(LayerView {
            fan_in,
            fan_out,
            weights,
            bias,
        });
    }
    Ok(out)
}

/// Network parameters plus the configuration that shapes them.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    config: MlpConfig,
    data: Vec<f64>,
}

impl ParamVector {
    pub fn new(config: MlpConfig, data: Vec<f64>) -> Result<Self, NetError> {
        config.validate()?;
        let expected = config.param_count();
        if data.len() != expected {
            return Err(NetError::ShapeMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(ParamVector { config, data })
    }

    pub fn zeros(config: MlpConfig) -> Result<Self, NetError> {
        let n = config.param_count();
        Self::new(config, vec![0.0; n])
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.config.layer_sizes
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Same shape, new values.
    pub fn with_values(&self, data: Vec<f64>) -> Result<Self, NetError> {
        Self::new(self.config.clone(), data)
    }

    pub fn unflatten(&self) -> Vec<Layer> {
        layer_views(&self.config.layer_sizes, &self.data)
            .expect("shape checked at construction")
            .into_iter()
            .map(|l| Layer {
                fan_in: l.fan_in,
                fan_out: l.fan_out,
                weights: l.weights.to_vec(),
                bias: l.bias.to_vec(),
            })
            .collect()
    }

    pub fn flatten(config: MlpConfig, layers: &[Layer]) -> Result<Self, NetError> {
        let sizes = &config.layer_sizes;
        if layers.len() + 1 != sizes.len() {
            return Err(NetError::InvalidConfig(format!(
                "{} layers given for {} layer sizes",
                layers.len(),
                sizes.len()
            )));
        }
        let mut data = Vec::with_capacity(config.param_count());
        for (l, w) in layers.iter().zip(sizes.windows(2)) {
            if l.fan_in != w[0]
                || l.fan_out != w[1]
                || l.weights.len() != w[0] * w[1]
                || l.bias.len() != w[1]
            {
                return Err(NetError::InvalidConfig(format!(
                    "layer {}x{} does not match sizes {:?}",
                    l.fan_in, l.fan_out, w
                )));
            }
            data.extend_from_slice(&l.weights);
            data.extend_from_slice(&l.bias);
        }
        Self::new(config, data)
    }

    /// Network output with all input partials.
    pub fn forward(&self, x: Jet2<f64>, t: Jet2<f64>) -> Result<Jet2<f64>, NetError> {
        forward(&self.config.layer_sizes, &self.data, x, t)
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.forward(Jet2::constant(x), Jet2::constant(t))
            .expect("shape checked at construction")
            .value
    }
}

/// Glorot-uniform weights, zero biases, deterministic in `config.seed`.
pub fn init_xavier(config: &MlpConfig) -> Result<ParamVector, NetError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut data = Vec::with_capacity(config.param_count());
    for w in config.layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-a, a);
        data.extend((0..fan_in * fan_out).map(|_| dist.sample(&mut rng)));
        data.extend(std::iter::repeat_n(0.0, fan_out));
    }
    ParamVector::new(config.clone(), data)
}

/// Generic forward pass; with `S = Var` the whole pass is recorded on a tape.
pub fn forward<S: Scalar>(
    sizes: &[usize],
    params: &[S],
    x: Jet2<S>,
    t: Jet2<S>,
) -> Result<Jet2<S>, NetError> {
    let layers = layer_views(sizes, params)?;
    let n = layers.len();
    let mut h = vec![x, t];
    for (li, layer) in layers.iter().enumerate() {
        let mut next = Vec::with_capacity(layer.fan_out);
        for j in 0..layer.fan_out {
            let row = &layer.weights[j * layer.fan_in..(j + 1) * layer.fan_in];
            let mut z = Jet2::constant(layer.bias[j]);
            for (w, hi) in row.iter().zip(&h) {
                z = z + hi.map(|c| c * *w);
            }
            next.push(if li + 1 < n { z.tanh() } else { z });
        }
        h = next;
    }
    Ok(h[0])
}
