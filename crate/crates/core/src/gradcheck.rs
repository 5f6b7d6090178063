//! Central finite-difference checks for every backward pass.
//!
//! Each check draws a small random layer or network, defines a scalar loss
//! (a fixed random projection of a layer's output, or cross-entropy for a
//! whole network), and compares every analytic gradient entry, parameters
//! and inputs alike, with `(L(θ + ε) − L(θ − ε)) / 2ε`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::basis::{Basis, Family, DEFAULT_HI, DEFAULT_LO, DEFAULT_ORDER};
use crate::error::Result;
use crate::layers::{KanLayer, Layer, LayerNorm, LinearLayer};
use crate::network::{cross_entropy, Network, NetworkSpec};
use crate::tensor::Matrix;

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Magnitudes below this are compared absolutely rather than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
    /// Where the largest error occurred.
    pub worst: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub epsilon: f64,
    pub results: Vec<CheckResult>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn worst(&self) -> Option<&CheckResult> {
        self.results
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    /// `None` checks everything, including layers shared by both families.
    pub family: Option<Family>,
    pub tolerance: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            family: None,
            tolerance: DEFAULT_TOLERANCE,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

struct Tracker {
    name: String,
    entries: usize,
    max: f64,
    worst: String,
}

impl Tracker {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            entries: 0,
            max: 0.0,
            worst: String::new(),
        }
    }

    fn record(&mut self, analytic: f64, numeric: f64, location: impl FnOnce() -> String) {
        let err = relative_error(analytic, numeric);
        self.entries += 1;
        if err > self.max || self.worst.is_empty() {
            self.max = err;
            self.worst = format!("{} (analytic {analytic:e}, numeric {numeric:e})", location());
        }
    }

    fn finish(self, tolerance: f64) -> CheckResult {
        CheckResult {
            passed: self.max <= tolerance,
            name: self.name,
            entries: self.entries,
            max_rel_error: self.max,
            worst: self.worst,
        }
    }
}

fn projection_loss(out: &Matrix, proj: &Matrix) -> f64 {
    out.as_slice().iter().zip(proj.as_slice()).map(|(a, b)| a * b).sum()
}

/// Checks one layer against `L = Σ out ⊙ R` for a random `R`.
pub fn check_layer(name: &str, layer: &Layer, x: &Matrix, seed: u64, cfg: &GradCheckConfig) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let proj = Matrix::from_fn(x.rows(), layer.out_dim(), |_, _| rng.gen_range(-1.0..1.0));
    let loss = |l: &Layer, input: &Matrix| -> Result<f64> { Ok(projection_loss(&l.predict(input)?, &proj)) };

    let mut probe = layer.clone();
    probe.forward(x)?;
    let grads = probe.backward(&proj)?;
    let eps = cfg.epsilon;
    let mut t = Tracker::new(name);

    for r in 0..x.rows() {
        for c in 0..x.cols() {
            let mut plus = x.clone();
            plus[(r, c)] += eps;
            let mut minus = x.clone();
            minus[(r, c)] -= eps;
            let numeric = (loss(layer, &plus)? - loss(layer, &minus)?) / (2.0 * eps);
            t.record(grads.input[(r, c)], numeric, || format!("input[{r},{c}]"));
        }
    }
    for (block, analytic) in grads.params.iter().enumerate() {
        for (j, &a) in analytic.iter().enumerate() {
            let mut plus = layer.clone();
            plus.params_mut()[block][j] += eps;
            let mut minus = layer.clone();
            minus.params_mut()[block][j] -= eps;
            let numeric = (loss(&plus, x)? - loss(&minus, x)?) / (2.0 * eps);
            t.record(a, numeric, || format!("param block {block} [{j}]"));
        }
    }
    Ok(t.finish(cfg.tolerance))
}

/// Checks a whole network under mean cross-entropy.
pub fn check_network(name: &str, net: &Network, x: &Matrix, labels: &[usize], cfg: &GradCheckConfig) -> Result<CheckResult> {
    let loss = |n: &Network, input: &Matrix| -> Result<f64> { Ok(cross_entropy(&n.predict(input)?, labels)?.0) };
    let mut probe = net.clone();
    let out = probe.forward(x)?;
    let (_, grad) = cross_entropy(&out, labels)?;
    let grads = probe.backward(&grad)?;
    let eps = cfg.epsilon;
    let mut t = Tracker::new(name);

    for r in 0..x.rows() {
        for c in 0..x.cols() {
            let mut plus = x.clone();
            plus[(r, c)] += eps;
            let mut minus = x.clone();
            minus[(r, c)] -= eps;
            let numeric = (loss(net, &plus)? - loss(net, &minus)?) / (2.0 * eps);
            t.record(grads.input[(r, c)], numeric, || format!("input[{r},{c}]"));
        }
    }
    for (li, blocks) in grads.layers.iter().enumerate() {
        for (block, analytic) in blocks.iter().enumerate() {
            for (j, &a) in analytic.iter().enumerate() {
                let mut plus = net.clone();
                plus.layers_mut()[li].params_mut()[block][j] += eps;
                let mut minus = net.clone();
                minus.layers_mut()[li].params_mut()[block][j] -= eps;
                let numeric = (loss(&plus, x)? - loss(&minus, x)?) / (2.0 * eps);
                t.record(a, numeric, || {
                    format!("layer {li} ({}) block {block} [{j}]", net.layers()[li].kind())
                });
            }
        }
    }
    Ok(t.finish(cfg.tolerance))
}

fn random_matrix(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

fn kan_check(family: Family, rng: &mut ChaCha8Rng, cfg: &GradCheckConfig) -> Result<CheckResult> {
    let (p, q, batch) = (rng.gen_range(2..=4), rng.gen_range(2..=4), rng.gen_range(2..=3));
    let basis = Basis::with_count(family, 8, DEFAULT_LO, DEFAULT_HI, DEFAULT_ORDER)?;
    let layer = Layer::Kan(KanLayer::new(p, q, basis, rng)?);
    let x = random_matrix(batch, p, -1.9, 1.9, rng);
    check_layer(&format!("{family}_kan layer"), &layer, &x, rng.gen(), cfg)
}

/// Runs every check that applies to `cfg.family`.
pub fn run_gradcheck(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let wants = |f: Family| cfg.family.is_none_or(|only| only == f);
    let mut results = Vec::new();

    if wants(Family::Spline) {
        results.push(kan_check(Family::Spline, &mut rng, cfg)?);
    }
    if wants(Family::Rbf) {
        results.push(kan_check(Family::Rbf, &mut rng, cfg)?);
        let dim = rng.gen_range(2..=4);
        let gain = (0..dim).map(|_| rng.gen_range(0.5..1.5)).collect();
        let bias = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let layer = Layer::LayerNorm(LayerNorm::with_params(gain, bias, crate::layers::LAYERNORM_EPSILON)?);
        let x = random_matrix(3, dim, -2.0, 2.0, &mut rng);
        results.push(check_layer("layernorm", &layer, &x, rng.gen(), cfg)?);
    }
    if cfg.family.is_none() {
        let (i, o) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
        let mut linear = LinearLayer::new(i, o, &mut rng)?;
        linear.params_mut()[1].iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        let x = random_matrix(3, i, -2.0, 2.0, &mut rng);
        results.push(check_layer("linear", &Layer::Linear(linear), &x, rng.gen(), cfg)?);
    }
    for family in [Family::Spline, Family::Rbf] {
        if !wants(family) {
            continue;
        }
        let net = Network::build(&NetworkSpec::new(&[2, 3, 2], family).with_seed(rng.gen()))?;
        let x = random_matrix(3, 2, -1.5, 1.5, &mut rng);
        let labels: Vec<usize> = (0..3).map(|_| rng.gen_range(0..2)).collect();
        results.push(check_network(&format!("{family} network [2,3,2]"), &net, &x, &labels, cfg)?);
    }
    Ok(GradCheckReport {
        tolerance: cfg.tolerance,
        epsilon: cfg.epsilon,
        results,
    })
}
