use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{cross_entropy, mse, Loss};
use super::optim::{Optimizer, OptimizerKind};
use super::Network;
use crate::data::{Dataset, Targets};
use crate::error::{KanError, Result};
use crate::tensor::Matrix;

/// Regression "accuracy" counts targets predicted within this absolute error.
pub const REGRESSION_HIT_TOLERANCE: f64 = 0.1;

/// Rows per chunk when evaluating a whole dataset.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::adam(),
            seed: 0,
            loss: Loss::CrossEntropy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(KanError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(KanError::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(KanError::Config(format!(
                "learning rate must be a finite non-negative number, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Seconds spent in this epoch, evaluation included.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

fn batch_loss(loss: Loss, out: &Matrix, ds: &Dataset, rows: &[usize]) -> Result<(f64, Matrix)> {
    match (loss, ds.targets()) {
        (Loss::CrossEntropy, Targets::Classes { labels, .. }) => {
            let batch_labels: Vec<usize> = rows.iter().map(|&i| labels[i]).collect();
            cross_entropy(out, &batch_labels)
        }
        (Loss::Mse, Targets::Values(t)) => mse(out, &t.select_rows(rows)),
        (Loss::Mse, Targets::Classes { labels, num_classes }) => {
            let onehot = Matrix::from_fn(rows.len(), *num_classes, |r, c| {
                f64::from(u8::from(labels[rows[r]] == c))
            });
            mse(out, &onehot)
        }
        (Loss::CrossEntropy, Targets::Values(_)) => Err(KanError::Config(
            "cross-entropy needs a classification dataset".into(),
        )),
    }
}

fn hits(out: &Matrix, ds: &Dataset, rows: &[usize]) -> usize {
    match ds.targets() {
        Targets::Classes { labels, .. } => rows
            .iter()
            .enumerate()
            .filter(|&(r, &i)| argmax(out.row(r)) == labels[i])
            .count(),
        Targets::Values(t) => rows
            .iter()
            .enumerate()
            .filter(|&(r, &i)| {
                out.row(r)
                    .iter()
                    .zip(t.row(i))
                    .all(|(p, y)| (p - y).abs() <= REGRESSION_HIT_TOLERANCE)
            })
            .count(),
    }
}

fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Mean loss and accuracy of a frozen network over `ds`.
pub fn evaluate(net: &Network, ds: &Dataset, loss: Loss) -> Result<Evaluation> {
    check_shapes(net, ds)?;
    let mut total_loss = 0.0;
    let mut total_hits = 0;
    let all: Vec<usize> = (0..ds.len()).collect();
    for rows in all.chunks(EVAL_CHUNK) {
        let out = net.predict(&ds.inputs().select_rows(rows))?;
        let (l, _) = batch_loss(loss, &out, ds, rows)?;
        total_loss += l * rows.len() as f64;
        total_hits += hits(&out, ds, rows);
    }
    Ok(Evaluation {
        loss: total_loss / ds.len() as f64,
        accuracy: total_hits as f64 / ds.len() as f64,
    })
}

fn check_shapes(net: &Network, ds: &Dataset) -> Result<()> {
    if ds.inputs().cols() != net.in_dim() || ds.target_dim() != net.out_dim() {
        return Err(KanError::Data(format!(
            "dataset is {} -> {} but the network is {} -> {}",
            ds.inputs().cols(),
            ds.target_dim(),
            net.in_dim(),
            net.out_dim()
        )));
    }
    Ok(())
}

/// Mini-batch training; `on_epoch` sees every record as soon as it exists.
///
/// Batches come from a fresh permutation each epoch, seeded by
/// `(cfg.seed, epoch)`.
pub fn train(
    net: &mut Network,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    check_shapes(net, train_set)?;
    check_shapes(net, val_set)?;
    let mut optimizer = Optimizer::new(cfg.optimizer);
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch, rows) in order.chunks(cfg.batch_size).enumerate() {
            let x = train_set.inputs().select_rows(rows);
            let out = net.forward(&x)?;
            let (loss, grad) = batch_loss(cfg.loss, &out, train_set, rows)?;
            if !loss.is_finite() {
                return Err(KanError::NonFinite {
                    epoch,
                    batch,
                    max_abs_param: net.max_abs_param(),
                });
            }
            loss_sum += loss * rows.len() as f64;
            let grads = net.backward(&grad)?;
            optimizer.step(net, &grads, cfg.learning_rate);
        }
        net.clear_cache();
        let eval = evaluate(net, val_set, cfg.loss)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_loss: eval.loss,
            val_accuracy: eval.accuracy,
            wall_time: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Family;
    use crate::data::{synth_regression, xor, SynthTask};
    use crate::network::NetworkSpec;

    fn flat(net: &Network) -> Vec<f64> {
        net.layers().iter().flat_map(|l| l.params()).flatten().copied().collect()
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let ds = xor();
        let mut net = Network::build(&NetworkSpec::new(&[2, 4, 2], Family::Rbf).with_seed(3)).unwrap();
        let before = flat(&net);
        let pre = evaluate(&net, &ds, Loss::CrossEntropy).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 2,
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let records = train(&mut net, &ds, &ds, &cfg, |_| {}).unwrap();
        assert_eq!(flat(&net), before);
        assert_eq!(records[0].val_loss, pre.loss);
        assert_eq!(records[0].val_accuracy, pre.accuracy);
    }

    #[test]
    fn config_validation() {
        let ds = xor();
        let mut net = Network::build(&NetworkSpec::new(&[2, 2], Family::Rbf)).unwrap();
        for cfg in [
            TrainConfig { epochs: 0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { learning_rate: f64::NAN, ..TrainConfig::default() },
        ] {
            assert!(matches!(train(&mut net, &ds, &ds, &cfg, |_| {}), Err(KanError::Config(_))));
        }
    }

    #[test]
    fn shape_mismatch_is_data_error() {
        let ds = xor();
        let mut net = Network::build(&NetworkSpec::new(&[3, 2], Family::Rbf)).unwrap();
        let err = train(&mut net, &ds, &ds, &TrainConfig::default(), |_| {}).unwrap_err();
        assert!(matches!(err, KanError::Data(_)));
    }

    #[test]
    fn diverging_run_aborts_with_diagnostics() {
        let ds = synth_regression(SynthTask::Sine, 32, 1).unwrap();
        let mut net = Network::build(&NetworkSpec::new(&[1, 1], Family::Spline)).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 8,
            learning_rate: 1e200,
            optimizer: OptimizerKind::Sgd,
            loss: Loss::Mse,
            ..TrainConfig::default()
        };
        match train(&mut net, &ds, &ds, &cfg, |_| {}) {
            Err(KanError::NonFinite { epoch, max_abs_param, .. }) => {
                assert!(epoch >= 1);
                assert!(max_abs_param > 1e100 || !max_abs_param.is_finite());
            }
            other => panic!("expected a non-finite abort, got {other:?}"),
        }
    }

    #[test]
    fn records_stream_and_repeat() {
        let ds = synth_regression(SynthTask::Sine, 64, 2).unwrap();
        let spec = NetworkSpec::new(&[1, 4, 1], Family::Rbf).with_seed(5);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 16,
            learning_rate: 1e-2,
            loss: Loss::Mse,
            seed: 8,
            ..TrainConfig::default()
        };
        let run = || {
            let mut net = Network::build(&spec).unwrap();
            let mut seen = Vec::new();
            let records = train(&mut net, &ds, &ds, &cfg, |r| seen.push(r.epoch)).unwrap();
            assert_eq!(seen, vec![1, 2, 3]);
            (records, flat(&net))
        };
        let (a, pa) = run();
        let (b, pb) = run();
        assert_eq!(pa, pb);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.train_loss, x.val_loss, x.val_accuracy), (y.train_loss, y.val_loss, y.val_accuracy));
        }
    }
}
