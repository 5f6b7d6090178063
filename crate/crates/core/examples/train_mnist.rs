//! Trains spline KAN and FastKAN ([784, 64, 10], 8 bases) on a stratified
//! MNIST subset with identical seeds and prints both validation curves.
//!
//! Needs the four MNIST IDX files (optionally gzipped) in `data/mnist` or
//! the directory named by `FASTKAN_MNIST_DIR`.
//!
//! `cargo run --release --example train_mnist [train_rows] [epochs]`

use fastkan::cli::default_mnist_dir;
use fastkan::data::{load_mnist, split_validation, subset, MnistSplit};
use fastkan::network::train;
use fastkan::{Family, Network, NetworkSpec, TrainConfig};

fn main() -> fastkan::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let rows = args.next().unwrap_or(10_000);
    let epochs = args.next().unwrap_or(20);
    let full = load_mnist(default_mnist_dir(), MnistSplit::Train)?;
    let pool = subset(&full, rows + rows / 5, 0)?;
    let (train_set, val_set) = split_validation(&pool, rows / 5, 0)?;
    println!("{} train / {} val rows", train_set.len(), val_set.len());

    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let mut curves = Vec::new();
    for family in [Family::Spline, Family::Rbf] {
        let mut net = Network::build(&NetworkSpec::new(&[784, 64, 10], family))?;
        println!("{family}: {} parameters", net.param_count());
        let records = train(&mut net, &train_set, &val_set, &cfg, |r| {
            println!("  epoch {:2}  val accuracy {:.4}  ({:.1}s)", r.epoch, r.val_accuracy, r.wall_time);
        })?;
        curves.push(records);
    }
    println!("\nepoch  spline    rbf");
    for (s, r) in curves[0].iter().zip(&curves[1]) {
        println!("{:5}  {:.4}  {:.4}", s.epoch, s.val_accuracy, r.val_accuracy);
    }
    Ok(())
}
