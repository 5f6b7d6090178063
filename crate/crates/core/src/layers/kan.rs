use rand::Rng;

use crate::basis::{Basis, BasisFamily};
use crate::error::{KanError, Result};
use crate::tensor::{matmul, matmul_tn, Matrix};

/// One KAN layer: every input coordinate is expanded into `B` basis values
/// and every output is a learned linear combination of all `P·B` of them.
///
/// `weights` has shape `Q × (P·B)`; column `p·B + b` pairs input `p` with
/// basis function `b`.
#[derive(Debug, Clone)]
pub struct KanLayer {
    in_dim: usize,
    out_dim: usize,
    basis: Basis,
    weights: Matrix,
    // `weights` transposed, rebuilt lazily after parameter updates.
    weights_t: Option<Matrix>,
    cache: Option<KanCache>,
}

#[derive(Debug, Clone)]
struct KanCache {
    input: Matrix,
    phi: Matrix,
}

/// Gradients produced by [`KanLayer::backward`].
#[derive(Debug, Clone)]
pub struct KanGrads {
    pub input: Matrix,
    pub weights: Matrix,
}

impl KanLayer {
    /// Uniform init in `[-s, s]` with `s = 1/sqrt(P·B)`.
    pub fn new(in_dim: usize, out_dim: usize, basis: Basis, rng: &mut impl Rng) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(KanError::Config(format!(
                "KAN layer dims must be positive, got {in_dim} -> {out_dim}"
            )));
        }
        let width = in_dim * basis.count();
        let s = 1.0 / (width as f64).sqrt();
        let weights = Matrix::from_fn(out_dim, width, |_, _| rng.gen_range(-s..=s));
        Self::with_weights(in_dim, basis, weights)
    }

    pub fn with_weights(in_dim: usize, basis: Basis, weights: Matrix) -> Result<Self> {
        if weights.cols() != in_dim * basis.count() {
            return Err(KanError::shape(
                "KanLayer::with_weights",
                format!("{} columns", weights.cols()),
                format!("in_dim {} x basis {}", in_dim, basis.count()),
            ));
        }
        Ok(Self {
            in_dim,
            out_dim: weights.rows(),
            basis,
            weights_t: Some(weights.transpose()),
            weights,
            cache: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        self.weights_t = None;
        &mut self.weights
    }

    /// Expands each row of `x` into its `P·B` basis values.
    pub fn expand(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let b = self.basis.count();
        let mut phi = Matrix::zeros(x.rows(), self.in_dim * b);
        for r in 0..x.rows() {
            let xr = x.row(r);
            let out = phi.row_mut(r);
            for (p, &v) in xr.iter().enumerate() {
                self.basis.eval_into(v, &mut out[p * b..(p + 1) * b]);
            }
        }
        Ok(phi)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.in_dim {
            return Err(KanError::shape(
                "kan_forward",
                format!("input {}x{}", x.rows(), x.cols()),
                format!("layer in_dim {}", self.in_dim),
            ));
        }
        Ok(())
    }

    fn transposed(&mut self) -> &Matrix {
        if self.weights_t.is_none() {
            self.weights_t = Some(self.weights.transpose());
        }
        self.weights_t.as_ref().expect("just populated")
    }

    /// Forward pass that caches what [`backward`](Self::backward) needs.
    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let phi = self.expand(x)?;
        let out = matmul(&phi, self.transposed())?;
        self.cache = Some(KanCache {
            input: x.clone(),
            phi,
        });
        Ok(out)
    }

    /// Cache-free forward pass.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let phi = self.expand(x)?;
        match &self.weights_t {
            Some(wt) => matmul(&phi, wt),
            None => crate::tensor::matmul_nt(&phi, &self.weights),
        }
    }

    /// `grad_weights = grad_outᵀ · φ(x)` and
    /// `grad_in[n, p] = Σ_b (grad_out · W)[n, p·B + b] · φ'_b(x[n, p])`.
    pub fn backward(&self, grad_out: &Matrix) -> Result<KanGrads> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| KanError::State("KAN backward called before forward".into()))?;
        if grad_out.rows() != cache.input.rows() || grad_out.cols() != self.out_dim {
            return Err(KanError::shape(
                "kan_backward",
                format!("grad_out {}x{}", grad_out.rows(), grad_out.cols()),
                format!("expected {}x{}", cache.input.rows(), self.out_dim),
            ));
        }
        let weights = matmul_tn(grad_out, &cache.phi)?;
        let grad_phi = matmul(grad_out, &self.weights)?;
        let b = self.basis.count();
        let mut dphi = vec![0.0; b];
        let mut input = Matrix::zeros(cache.input.rows(), self.in_dim);
        for r in 0..cache.input.rows() {
            let xr = cache.input.row(r);
            let gr = grad_phi.row(r);
            for (p, &v) in xr.iter().enumerate() {
                self.basis.deriv_into(v, &mut dphi);
                let g = &gr[p * b..(p + 1) * b];
                input[(r, p)] = g.iter().zip(&dphi).map(|(a, d)| a * d).sum();
            }
        }
        Ok(KanGrads { input, weights })
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Family, GaussianRbfBasis, GridSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rbf() -> Basis {
        Basis::with_count(Family::Rbf, 8, -2.0, 2.0, 3).unwrap()
    }

    fn spline() -> Basis {
        Basis::with_count(Family::Spline, 8, -2.0, 2.0, 3).unwrap()
    }

    fn random_input(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.8..1.8))
    }

    #[test]
    fn weight_shape_and_init_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = KanLayer::new(3, 5, spline(), &mut rng).unwrap();
        assert_eq!(layer.weights().shape(), (5, 24));
        let s = 1.0 / 24f64.sqrt();
        assert!(layer.weights().max_abs() <= s);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut layer = KanLayer::with_weights(2, rbf(), Matrix::zeros(3, 16)).unwrap();
        let x = random_input(4, 2, &mut rng);
        assert_eq!(layer.forward(&x).unwrap(), Matrix::zeros(4, 3));
    }

    #[test]
    fn one_hot_weight_reproduces_single_rbf() {
        let grid = GridSpec::centers(-2.0, 2.0, 8).unwrap();
        let gaussian = GaussianRbfBasis::new(grid).unwrap();
        let mut w = Matrix::zeros(1, 8);
        w[(0, 5)] = 1.0;
        let mut layer = KanLayer::with_weights(1, Basis::Rbf(gaussian.clone()), w).unwrap();
        for &x in &[-2.3, -0.4, 0.0, 0.9, 2.0] {
            let out = layer.forward(&Matrix::filled(1, 1, x)).unwrap();
            assert_eq!(out[(0, 0)], gaussian.eval(x)[5]);
        }
    }

    #[test]
    fn forward_matches_brute_force_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for basis in [rbf(), spline()] {
            let mut layer = KanLayer::new(2, 1, basis.clone(), &mut rng).unwrap();
            let x = random_input(5, 2, &mut rng);
            let out = layer.forward(&x).unwrap();
            for r in 0..5 {
                let mut expected = 0.0;
                for p in 0..2 {
                    let phi = basis.eval(x[(r, p)]);
                    for b in 0..8 {
                        expected += layer.weights()[(0, p * 8 + b)] * phi[b];
                    }
                }
                assert!((out[(r, 0)] - expected).abs() < 1e-14);
            }
            assert_eq!(layer.predict(&x).unwrap(), out);
        }
    }

    #[test]
    fn forward_is_linear_in_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_input(3, 4, &mut rng);
        let w1 = Matrix::from_fn(2, 32, |_, _| rng.gen_range(-1.0..1.0));
        let w2 = Matrix::from_fn(2, 32, |_, _| rng.gen_range(-1.0..1.0));
        let f = |w: Matrix| {
            KanLayer::with_weights(4, rbf(), w)
                .unwrap()
                .forward(&x)
                .unwrap()
        };
        let sum = f(w1.add(&w2).unwrap());
        let parts = f(w1).add(&f(w2)).unwrap();
        assert!(sum.sub(&parts).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn backward_before_forward_is_state_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = KanLayer::new(2, 2, rbf(), &mut rng).unwrap();
        let err = layer.backward(&Matrix::zeros(1, 2)).unwrap_err();
        assert!(matches!(err, KanError::State(_)));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut layer = KanLayer::new(3, 2, spline(), &mut rng).unwrap();
        let x = random_input(2, 3, &mut rng);
        layer.forward(&x).unwrap();
        let g = layer.backward(&Matrix::zeros(2, 2)).unwrap();
        assert_eq!(g.input.max_abs(), 0.0);
        assert_eq!(g.weights.max_abs(), 0.0);
    }

    #[test]
    fn input_shape_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut layer = KanLayer::new(3, 2, rbf(), &mut rng).unwrap();
        assert!(matches!(
            layer.forward(&Matrix::zeros(2, 4)),
            Err(KanError::Shape { .. })
        ));
    }

    #[test]
    fn weight_edits_invalidate_the_transposed_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut layer = KanLayer::new(2, 2, rbf(), &mut rng).unwrap();
        let x = random_input(2, 2, &mut rng);
        let before = layer.forward(&x).unwrap();
        layer.weights_mut().as_mut_slice().iter_mut().for_each(|w| *w *= 2.0);
        let after = layer.forward(&x).unwrap();
        assert!(after.sub(&before.scale(2.0)).unwrap().max_abs() < 1e-14);
    }
}
