use crate::error::{KanError, Result};
use crate::tensor::Matrix;

pub const LAYERNORM_EPSILON: f64 = 1e-5;

/// Per-row standardization with learnable gain and bias.
///
/// Uses the biased row variance with `epsilon` inside the square root.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    dim: usize,
    gain: Vec<f64>,
    bias: Vec<f64>,
    epsilon: f64,
    cache: Option<NormCache>,
}

#[derive(Debug, Clone)]
struct NormCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LayerNormGrads {
    pub input: Matrix,
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        Self::with_epsilon(dim, LAYERNORM_EPSILON)
    }

    pub fn with_epsilon(dim: usize, epsilon: f64) -> Self {
        Self {
            dim,
            gain: vec![1.0; dim],
            bias: vec![0.0; dim],
            epsilon,
            cache: None,
        }
    }

    pub fn with_params(gain: Vec<f64>, bias: Vec<f64>, epsilon: f64) -> Result<Self> {
        if gain.len() != bias.len() || gain.is_empty() {
            return Err(KanError::shape(
                "LayerNorm::with_params",
                format!("gain {}", gain.len()),
                format!("bias {}", bias.len()),
            ));
        }
        Ok(Self {
            dim: gain.len(),
            gain,
            bias,
            epsilon,
            cache: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gain(&self) -> &[f64] {
        &self.gain
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn params_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.gain, &mut self.bias]
    }

    fn normalize(&self, x: &Matrix) -> Result<(Matrix, Vec<f64>)> {
        if x.cols() != self.dim {
            return Err(KanError::shape(
                "layernorm_forward",
                format!("input {}x{}", x.rows(), x.cols()),
                format!("dim {}", self.dim),
            ));
        }
        let n = self.dim as f64;
        let mut normalized = x.clone();
        let mut inv_std = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = normalized.row_mut(r);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / (var + self.epsilon).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * inv;
            }
            inv_std.push(inv);
        }
        Ok((normalized, inv_std))
    }

    fn affine(&self, normalized: &Matrix) -> Matrix {
        let mut out = normalized.clone();
        for r in 0..out.rows() {
            for ((v, g), b) in out.row_mut(r).iter_mut().zip(&self.gain).zip(&self.bias) {
                *v = *v * g + b;
            }
        }
        out
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let (normalized, inv_std) = self.normalize(x)?;
        let out = self.affine(&normalized);
        self.cache = Some(NormCache {
            normalized,
            inv_std,
        });
        Ok(out)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let (normalized, _) = self.normalize(x)?;
        Ok(self.affine(&normalized))
    }

    pub fn backward(&self, grad_out: &Matrix) -> Result<LayerNormGrads> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| KanError::State("layernorm backward called before forward".into()))?;
        if grad_out.shape() != cache.normalized.shape() {
            return Err(KanError::shape(
                "layernorm_backward",
                format!("grad_out {}x{}", grad_out.rows(), grad_out.cols()),
                format!("cached {}x{}", cache.normalized.rows(), cache.normalized.cols()),
            ));
        }
        let n = self.dim as f64;
        let mut gain = vec![0.0; self.dim];
        let mut bias = vec![0.0; self.dim];
        let mut input = Matrix::zeros(grad_out.rows(), self.dim);
        let mut dxhat = vec![0.0; self.dim];
        for r in 0..grad_out.rows() {
            let g = grad_out.row(r);
            let xhat = cache.normalized.row(r);
            for j in 0..self.dim {
                gain[j] += g[j] * xhat[j];
                bias[j] += g[j];
                dxhat[j] = g[j] * self.gain[j];
            }
            let mean_d = dxhat.iter().sum::<f64>() / n;
            let mean_dx = dxhat.iter().zip(xhat).map(|(d, x)| d * x).sum::<f64>() / n;
            let inv = cache.inv_std[r];
            for (j, slot) in input.row_mut(r).iter_mut().enumerate() {
                *slot = inv * (dxhat[j] - mean_d - xhat[j] * mean_dx);
            }
        }
        Ok(LayerNormGrads { input, gain, bias })
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}
