//! Smallest nonlinear task: a [2, 4, 2] RBF KAN learns XOR.
//!
//! `cargo run --release --example xor`

use fastkan::data::xor;
use fastkan::network::{train, Loss, OptimizerKind};
use fastkan::{Family, Network, NetworkSpec, TrainConfig};

fn main() -> fastkan::Result<()> {
    let ds = xor();
    let mut net = Network::build(&NetworkSpec::new(&[2, 4, 2], Family::Rbf).with_seed(0))?;
    let cfg = TrainConfig {
        epochs: 2000,
        batch_size: 4,
        learning_rate: 1e-2,
        optimizer: OptimizerKind::adam(),
        seed: 0,
        loss: Loss::CrossEntropy,
    };
    let records = train(&mut net, &ds, &ds, &cfg, |r| {
        if r.epoch % 250 == 0 {
            println!("epoch {:4}: loss {:.5}, accuracy {:.2}", r.epoch, r.train_loss, r.val_accuracy);
        }
    })?;
    let solved = records.iter().find(|r| r.val_accuracy == 1.0).map(|r| r.epoch);
    println!("first epoch at 100%: {solved:?}");

    let logits = net.predict(ds.inputs())?;
    for r in 0..4 {
        let x = ds.inputs().row(r);
        let class = if logits[(r, 1)] > logits[(r, 0)] { 1 } else { 0 };
        println!("{:?} -> {class}", x);
    }
    Ok(())
}
