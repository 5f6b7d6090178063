//! Times a spline KAN layer against an RBF KAN layer and prints the table.
//!
//! `cargo run --release --example bench_table [rounds] [repeats]`

use fastkan::bench::{bench_table, run_bench, BenchConfig};

fn main() -> fastkan::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let mut cfg = BenchConfig::default();
    if let Some(rounds) = args.next() {
        cfg.rounds = rounds;
    }
    if let Some(repeats) = args.next() {
        cfg.repeats_per_round = repeats;
    }
    let report = run_bench(&cfg, 0)?;
    print!("{}", bench_table(&report));
    Ok(())
}
