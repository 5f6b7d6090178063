//! Trainable layers and a uniform [`Layer`] wrapper over them.
//!
//! Each layer caches its forward activations for the next backward call, so
//! a single instance must not be driven from two threads at once. `predict`
//! is the cache-free path for evaluating a frozen layer.

mod kan;
mod linear;
mod norm;

pub use kan::{KanGrads, KanLayer};
pub use linear::{LinearGrads, LinearLayer};
pub use norm::{LayerNorm, LayerNormGrads, LAYERNORM_EPSILON};

use crate::error::Result;
use crate::tensor::Matrix;

#[derive(Debug, Clone)]
pub enum Layer {
    Kan(KanLayer),
    LayerNorm(LayerNorm),
    Linear(LinearLayer),
}

/// Input gradient plus one flat gradient per parameter block, in the same
/// order as [`Layer::params_mut`].
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub input: Matrix,
    pub params: Vec<Vec<f64>>,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Kan(l) => match l.basis().family() {
                crate::basis::Family::Spline => "spline_kan",
                crate::basis::Family::Rbf => "rbf_kan",
            },
            Layer::LayerNorm(_) => "layernorm",
            Layer::Linear(_) => "linear",
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            Layer::Kan(l) => l.in_dim(),
            Layer::LayerNorm(l) => l.dim(),
            Layer::Linear(l) => l.in_dim(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Layer::Kan(l) => l.out_dim(),
            Layer::LayerNorm(l) => l.dim(),
            Layer::Linear(l) => l.out_dim(),
        }
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        match self {
            Layer::Kan(l) => l.forward(x),
            Layer::LayerNorm(l) => l.forward(x),
            Layer::Linear(l) => l.forward(x),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Layer::Kan(l) => l.predict(x),
            Layer::LayerNorm(l) => l.predict(x),
            Layer::Linear(l) => l.predict(x),
        }
    }

    pub fn backward(&self, grad_out: &Matrix) -> Result<LayerGrads> {
        Ok(match self {
            Layer::Kan(l) => {
                let g = l.backward(grad_out)?;
                LayerGrads {
                    input: g.input,
                    params: vec![g.weights.into_vec()],
                }
            }
            Layer::LayerNorm(l) => {
                let g = l.backward(grad_out)?;
                LayerGrads {
                    input: g.input,
                    params: vec![g.gain, g.bias],
                }
            }
            Layer::Linear(l) => {
                let g = l.backward(grad_out)?;
                LayerGrads {
                    input: g.input,
                    params: vec![g.weights.into_vec(), g.bias],
                }
            }
        })
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Kan(l) => vec![l.weights_mut().as_mut_slice()],
            Layer::LayerNorm(l) => l.params_mut().into(),
            Layer::Linear(l) => l.params_mut().into(),
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        match self {
            Layer::Kan(l) => vec![l.weights().as_slice()],
            Layer::LayerNorm(l) => vec![l.gain(), l.bias()],
            Layer::Linear(l) => vec![l.weights().as_slice(), l.bias()],
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn clear_cache(&mut self) {
        match self {
            Layer::Kan(l) => l.clear_cache(),
            Layer::LayerNorm(l) => l.clear_cache(),
            Layer::Linear(l) => l.clear_cache(),
        }
    }
}
