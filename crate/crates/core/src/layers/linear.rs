use rand::Rng;

use crate::error::{KanError, Result};
use crate::tensor::{matmul, matmul_nt, matmul_tn, Matrix};

/// Affine map `y = x·Wᵀ + b` with `W` of shape `out × in`.
#[derive(Debug, Clone)]
pub struct LinearLayer {
    weights: Matrix,
    bias: Vec<f64>,
    cache: Option<Matrix>,
}

#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub input: Matrix,
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LinearLayer {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(KanError::Config(format!(
                "linear layer dims must be positive, got {in_dim} -> {out_dim}"
            )));
        }
        let s = 1.0 / (in_dim as f64).sqrt();
        let weights = Matrix::from_fn(out_dim, in_dim, |_, _| rng.gen_range(-s..=s));
        Self::with_params(weights, vec![0.0; out_dim])
    }

    pub fn with_params(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(KanError::shape(
                "LinearLayer::with_params",
                format!("weights {}x{}", weights.rows(), weights.cols()),
                format!("bias {}", bias.len()),
            ));
        }
        Ok(Self {
            weights,
            bias,
            cache: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn params_mut(&mut self) -> [&mut [f64]; 2] {
        [self.weights.as_mut_slice(), &mut self.bias]
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(KanError::shape(
                "linear_forward",
                format!("input {}x{}", x.rows(), x.cols()),
                format!("in_dim {}", self.in_dim()),
            ));
        }
        let mut out = matmul_nt(x, &self.weights)?;
        for r in 0..out.rows() {
            for (v, b) in out.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(out)
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let out = self.predict(x)?;
        self.cache = Some(x.clone());
        Ok(out)
    }

    pub fn backward(&self, grad_out: &Matrix) -> Result<LinearGrads> {
        let input = self
            .cache
            .as_ref()
            .ok_or_else(|| KanError::State("linear backward called before forward".into()))?;
        if grad_out.rows() != input.rows() || grad_out.cols() != self.out_dim() {
            return Err(KanError::shape(
                "linear_backward",
                format!("grad_out {}x{}", grad_out.rows(), grad_out.cols()),
                format!("expected {}x{}", input.rows(), self.out_dim()),
            ));
        }
        let mut bias = vec![0.0; self.out_dim()];
        for r in 0..grad_out.rows() {
            for (b, g) in bias.iter_mut().zip(grad_out.row(r)) {
                *b += g;
            }
        }
        Ok(LinearGrads {
            input: matmul(grad_out, &self.weights)?,
            weights: matmul_tn(grad_out, input)?,
            bias,
        })
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}
