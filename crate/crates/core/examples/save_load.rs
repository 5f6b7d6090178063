//! Saves a network to the binary model format and loads it back.
//!
//! `cargo run --release --example save_load`

use fastkan::network::{load, save};
use fastkan::{Family, Matrix, Network, NetworkSpec};

fn main() -> fastkan::Result<()> {
    let net = Network::build(&NetworkSpec::new(&[4, 6, 3], Family::Rbf).with_seed(11))?;
    let path = std::env::temp_dir().join("fastkan_example.kanf");
    save(&net, &path)?;
    let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    let restored = load(&path)?;

    let x = Matrix::from_fn(5, 4, |r, c| (r as f64 - 2.0) * 0.3 + c as f64 * 0.1);
    let same = net.predict(&x)? == restored.predict(&x)?;
    println!("{} parameters, {size} bytes at {}", net.param_count(), path.display());
    let kinds: Vec<&str> = restored.layers().iter().map(|l| l.kind()).collect();
    println!("layers: {}", kinds.join(" -> "));
    println!("outputs identical after reload: {same}");
    std::fs::remove_file(&path).ok();
    Ok(())
}
