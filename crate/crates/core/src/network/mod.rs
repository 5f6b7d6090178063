//! Stacked layers, losses, optimizers, the training loop and model files.
//!
//! A [`NetworkSpec`] declares the layer widths, the basis family and where
//! layer normalization goes; [`Network::build`] turns it into concrete
//! layers with parameters drawn deterministically from the spec's seed.
//! Two KAN layers `[n, m, c]` give the two-level sum-of-univariate-functions
//! form; deeper stacks just keep composing.

mod io;
mod loss;
mod optim;
mod train;

pub use io::{from_bytes, load, save, to_bytes, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use loss::{cross_entropy, mse, Loss};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{evaluate, train, EpochRecord, Evaluation, TrainConfig, REGRESSION_HIT_TOLERANCE};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, Family, DEFAULT_HI, DEFAULT_LO, DEFAULT_ORDER};
use crate::error::{KanError, Result};
use crate::layers::{KanLayer, Layer, LayerGrads, LayerNorm};
use crate::tensor::Matrix;

/// Where layer normalization is inserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormPlacement {
    None,
    /// Before every KAN layer wider than one input, the first one included.
    BeforeEachKan,
    /// Only before KAN layers that follow another KAN layer.
    BetweenKan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Layer widths, input first: `[784, 64, 10]` is two KAN layers.
    pub widths: Vec<usize>,
    pub family: Family,
    /// Basis functions per input (`G + k` for splines, `N` for RBFs).
    pub basis_count: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub order: usize,
    pub norm: NormPlacement,
    pub seed: u64,
}

impl NetworkSpec {
    /// Family defaults: RBF layers get layer normalization in front of every
    /// KAN layer, spline layers get none.
    pub fn new(widths: &[usize], family: Family) -> Self {
        let norm = match family {
            Family::Rbf => NormPlacement::BeforeEachKan,
            Family::Spline => NormPlacement::None,
        };
        Self {
            widths: widths.to_vec(),
            family,
            basis_count: 8,
            grid_lo: DEFAULT_LO,
            grid_hi: DEFAULT_HI,
            order: DEFAULT_ORDER,
            norm,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_norm(mut self, norm: NormPlacement) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_basis_count(mut self, count: usize) -> Self {
        self.basis_count = count;
        self
    }

    fn basis(&self) -> Result<Basis> {
        Basis::with_count(
            self.family,
            self.basis_count,
            self.grid_lo,
            self.grid_hi,
            self.order,
        )
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Layer>,
    spec: Option<NetworkSpec>,
}

/// Output of [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub input: Matrix,
    /// Per layer, one flat block per parameter group.
    pub layers: Vec<Vec<Vec<f64>>>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

impl Network {
    pub fn build(spec: &NetworkSpec) -> Result<Self> {
        if spec.widths.len() < 2 {
            return Err(KanError::Config(format!(
                "need at least an input and an output width, got {:?}",
                spec.widths
            )));
        }
        if let Some(i) = spec.widths.iter().position(|&w| w == 0) {
            return Err(KanError::Config(format!(
                "width {i} in {:?} is zero",
                spec.widths
            )));
        }
        let basis = spec.basis()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut layers = Vec::new();
        for (i, pair) in spec.widths.windows(2).enumerate() {
            let norm_here = match spec.norm {
                NormPlacement::None => false,
                NormPlacement::BeforeEachKan => true,
                NormPlacement::BetweenKan => i > 0,
            };
            // Normalizing a single feature maps every row to the bias, which
            // would erase the signal, so width-1 inputs are left alone.
            let norm_here = norm_here && pair[0] > 1;
            if norm_here {
                layers.push(Layer::LayerNorm(LayerNorm::new(pair[0])));
            }
            layers.push(Layer::Kan(KanLayer::new(
                pair[0],
                pair[1],
                basis.clone(),
                &mut rng,
            )?));
        }
        let mut net = Self::from_layers(layers)?;
        net.spec = Some(spec.clone());
        Ok(net)
    }

    /// Wraps an explicit layer list, checking that dimensions chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(KanError::Config("a network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(KanError::Config(format!(
                    "layer {} ({}) outputs {} but layer {} ({}) expects {}",
                    i,
                    pair[0].kind(),
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].kind(),
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers, spec: None })
    }

    pub(crate) fn with_spec(mut self, spec: Option<NetworkSpec>) -> Self {
        self.spec = spec;
        self
    }

    pub fn spec(&self) -> Option<&NetworkSpec> {
        self.spec.as_ref()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn max_abs_param(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Training forward pass; every layer caches its activations.
    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let mut h = self.layers[0].forward(x)?;
        for layer in &mut self.layers[1..] {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    /// Cache-free forward pass on a frozen network.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = self.layers[0].predict(x)?;
        for layer in &self.layers[1..] {
            h = layer.predict(&h)?;
        }
        Ok(h)
    }

    pub fn backward(&self, grad_out: &Matrix) -> Result<Gradients> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for layer in self.layers.iter().rev() {
            let LayerGrads { input, params } = layer.backward(&g)?;
            grads.push(params);
            g = input;
        }
        grads.reverse();
        Ok(Gradients {
            input: g,
            layers: grads,
        })
    }

    pub fn clear_cache(&mut self) {
        self.layers.iter_mut().for_each(Layer::clear_cache);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn mnist_shaped_build() {
        let net = Network::build(&NetworkSpec::new(&[784, 64, 10], Family::Rbf)).unwrap();
        let kinds: Vec<_> = net.layers().iter().map(Layer::kind).collect();
        assert_eq!(kinds, ["layernorm", "rbf_kan", "layernorm", "rbf_kan"]);
        let Layer::Kan(first) = &net.layers()[1] else { panic!() };
        let Layer::Kan(second) = &net.layers()[3] else { panic!() };
        assert_eq!(first.weights().shape(), (64, 784 * 8));
        assert_eq!(second.weights().shape(), (10, 64 * 8));
    }

    #[test]
    fn single_layer_build() {
        let net = Network::build(&NetworkSpec::new(&[100, 100], Family::Spline)).unwrap();
        assert_eq!(net.layers().len(), 1);
        let Layer::Kan(l) = &net.layers()[0] else { panic!() };
        assert_eq!(l.weights().shape(), (100, 800));
    }

    #[test]
    fn minimal_nets_train_shape() {
        for family in [Family::Spline, Family::Rbf] {
            let mut net = Network::build(&NetworkSpec::new(&[2, 1], family)).unwrap();
            let out = net.forward(&Matrix::zeros(3, 2)).unwrap();
            assert_eq!(out.shape(), (3, 1));
        }
    }

    #[test]
    fn single_feature_inputs_skip_normalization() {
        let net = Network::build(&NetworkSpec::new(&[1, 8, 1], Family::Rbf)).unwrap();
        let kinds: Vec<&str> = net.layers().iter().map(|l| l.kind()).collect();
        assert_eq!(kinds, ["rbf_kan", "layernorm", "rbf_kan"]);
    }

    #[test]
    fn bad_configs() {
        assert!(Network::build(&NetworkSpec::new(&[4], Family::Rbf)).is_err());
        assert!(Network::build(&NetworkSpec::new(&[4, 0, 2], Family::Rbf)).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let basis = Basis::with_count(Family::Rbf, 8, -2.0, 2.0, 3).unwrap();
        let layers = vec![
            Layer::Kan(KanLayer::new(2, 3, basis.clone(), &mut rng).unwrap()),
            Layer::Kan(KanLayer::new(4, 1, basis, &mut rng).unwrap()),
        ];
        let err = Network::from_layers(layers).unwrap_err();
        assert!(err.to_string().contains("layer 1"), "{err}");
    }

    #[test]
    fn same_seed_same_parameters() {
        let spec = NetworkSpec::new(&[3, 4, 2], Family::Spline).with_seed(9);
        let a = Network::build(&spec).unwrap();
        let b = Network::build(&spec).unwrap();
        let c = Network::build(&spec.clone().with_seed(10)).unwrap();
        let flat = |n: &Network| -> Vec<f64> {
            n.layers().iter().flat_map(|l| l.params()).flatten().copied().collect()
        };
        assert_eq!(flat(&a), flat(&b));
        assert_ne!(flat(&a), flat(&c));
    }

    #[test]
    fn single_layer_network_equals_its_layer() {
        let mut net = Network::build(&NetworkSpec::new(&[3, 2], Family::Spline).with_seed(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Matrix::from_fn(4, 3, |_, _| rng.gen_range(-1.5..1.5));
        let Layer::Kan(layer) = net.layers()[0].clone() else { panic!() };
        assert_eq!(net.forward(&x).unwrap(), layer.predict(&x).unwrap());
    }

    #[test]
    fn permuting_inputs_with_weight_blocks_is_invariant() {
        let spec = NetworkSpec::new(&[3, 4, 2], Family::Spline).with_seed(12);
        let net = Network::build(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = Matrix::from_fn(5, 3, |_, _| rng.gen_range(-1.5..1.5));
        let swapped_x = Matrix::from_fn(5, 3, |r, c| x[(r, [1, 0, 2][c])]);
        let mut swapped = net.clone();
        let Layer::Kan(first) = &mut swapped.layers_mut()[0] else { panic!() };
        let w = first.weights().clone();
        let b = 8;
        let wm = first.weights_mut();
        for q in 0..w.rows() {
            for j in 0..b {
                wm[(q, j)] = w[(q, b + j)];
                wm[(q, b + j)] = w[(q, j)];
            }
        }
        let a = net.predict(&x).unwrap();
        let s = swapped.predict(&swapped_x).unwrap();
        assert!(a.sub(&s).unwrap().max_abs() < 1e-14);
    }
}
