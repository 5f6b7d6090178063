//! Fits sin(πx) on [-1, 1] with a [1, 8, 1] network of each basis family.
//!
//! `cargo run --release --example regression [epochs]`

use fastkan::data::{split_validation, synth_regression, SynthTask};
use fastkan::network::{evaluate, train, Loss};
use fastkan::{Family, Matrix, Network, NetworkSpec, TrainConfig};

fn main() -> fastkan::Result<()> {
    let epochs = std::env::args().nth(1).map_or(200, |a| a.parse().expect("epoch count"));
    let ds = synth_regression(SynthTask::Sine, 1000, 7)?;
    let (train_set, val_set) = split_validation(&ds, 200, 7)?;
    let cfg = TrainConfig {
        epochs,
        learning_rate: 1e-2,
        loss: Loss::Mse,
        ..TrainConfig::default()
    };
    for family in [Family::Spline, Family::Rbf] {
        let mut net = Network::build(&NetworkSpec::new(&[1, 8, 1], family).with_seed(1))?;
        let before = evaluate(&net, &val_set, Loss::Mse)?.loss;
        let records = train(&mut net, &train_set, &val_set, &cfg, |_| {})?;
        let last = records.last().expect("epochs > 0");
        println!(
            "{family:>6}: val mse {before:.4} -> {:.2e}, within 0.1 on {:.1}% of points",
            last.val_loss,
            100.0 * last.val_accuracy
        );
        let probe = Matrix::from_rows(&[[-0.5], [0.0], [0.25]])?;
        let pred = net.predict(&probe)?;
        for r in 0..3 {
            let x = probe[(r, 0)];
            println!("        f({x:5.2}) = {:7.4}  (sin(πx) = {:7.4})", pred[(r, 0)], (std::f64::consts::PI * x).sin());
        }
    }
    Ok(())
}
