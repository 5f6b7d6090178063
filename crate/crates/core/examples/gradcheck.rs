//! Runs the finite-difference gradient suite and prints one line per check.
//!
//! `cargo run --release --example gradcheck`

use fastkan::gradcheck::{run_gradcheck, GradCheckConfig};

fn main() -> fastkan::Result<()> {
    let report = run_gradcheck(&GradCheckConfig::default())?;
    for r in &report.results {
        println!("{:<26} {:4} entries  max rel error {:.2e}", r.name, r.entries, r.max_rel_error);
    }
    match report.worst() {
        Some(w) if !report.passed() => println!("FAILED: {} at {}", w.name, w.worst),
        _ => println!("all checks within {:e}", report.tolerance),
    }
    Ok(())
}
