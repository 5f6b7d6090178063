//! Timing harness for a single KAN layer under both basis families.
//!
//! Protocol: build one layer per slot with seeded weights and a fixed
//! random input, run untimed warm-up calls, then for each of `rounds` rounds
//! time `repeats` back-to-back calls with a single pair of clock reads and
//! divide. Slots alternate within each round so slow drift hits both alike.
//! Mean and standard deviation are taken across the per-round means.

use std::fmt::Write as _;
use std::hint::black_box;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, Family, DEFAULT_HI, DEFAULT_LO, DEFAULT_ORDER};
use crate::error::{KanError, Result};
use crate::layers::KanLayer;
use crate::tensor::Matrix;

/// Published GPU timings (µs) for the same layer shape, shown next to local
/// results for orientation only: (baseline fwd, std, candidate fwd, std,
/// baseline fwd+bwd, std, candidate fwd+bwd, std).
pub const GPU_REFERENCE_US: [f64; 8] = [742.0, 186.0, 223.0, 19.0, 1160.0, 18.8, 925.0, 13.6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMode {
    Forward,
    ForwardBackward,
}

impl BenchMode {
    pub fn name(self) -> &'static str {
        match self {
            BenchMode::Forward => "forward",
            BenchMode::ForwardBackward => "forward_backward",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub in_dim: usize,
    pub out_dim: usize,
    pub basis_count: usize,
    pub batch: usize,
    pub rounds: usize,
    pub repeats_per_round: usize,
    pub warmup: usize,
    pub modes: Vec<BenchMode>,
    /// Reference implementation; speedup is `baseline / candidate`.
    pub baseline: Family,
    pub candidate: Family,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            in_dim: 100,
            out_dim: 100,
            basis_count: 8,
            batch: 1,
            rounds: 10,
            repeats_per_round: 1000,
            warmup: 100,
            modes: vec![BenchMode::Forward, BenchMode::ForwardBackward],
            baseline: Family::Spline,
            candidate: Family::Rbf,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds < 2 {
            return Err(KanError::Config(format!(
                "rounds must be at least 2 to estimate a spread, got {}",
                self.rounds
            )));
        }
        if self.repeats_per_round == 0 {
            return Err(KanError::Config("repeats per round must be at least 1".into()));
        }
        if self.in_dim == 0 || self.out_dim == 0 || self.batch == 0 {
            return Err(KanError::Config("layer dims and batch must be positive".into()));
        }
        if self.modes.is_empty() {
            return Err(KanError::Config("no benchmark mode selected".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Baseline,
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub slot: Slot,
    pub family: Family,
    pub mode: BenchMode,
    /// Mean per-call time across rounds, microseconds.
    pub mean_us: f64,
    /// Sample standard deviation of the per-round means, microseconds.
    pub std_us: f64,
    pub round_means_us: Vec<f64>,
    /// Sum of the last output, identical across runs with the same seed.
    pub checksum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub seed: u64,
    pub entries: Vec<BenchEntry>,
    pub clock_resolution_ns: f64,
    pub pinned_cpu: Option<usize>,
    pub warnings: Vec<String>,
}

impl BenchReport {
    pub fn entry(&self, slot: Slot, mode: BenchMode) -> Option<&BenchEntry> {
        self.entries.iter().find(|e| e.slot == slot && e.mode == mode)
    }

    /// `baseline mean / candidate mean` for `mode`.
    pub fn speedup(&self, mode: BenchMode) -> Option<f64> {
        let b = self.entry(Slot::Baseline, mode)?;
        let c = self.entry(Slot::Candidate, mode)?;
        Some(b.mean_us / c.mean_us)
    }

    pub fn implementation_name(&self, slot: Slot) -> String {
        let family = match slot {
            Slot::Baseline => self.config.baseline,
            Slot::Candidate => self.config.candidate,
        };
        let base = format!("{family}_kan");
        if self.config.baseline == self.config.candidate && slot == Slot::Candidate {
            format!("{base}_b")
        } else {
            base
        }
    }
}

/// Smallest nonzero step observed between consecutive clock reads.
pub fn clock_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..2000 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}

/// Pins the calling thread to the CPU it is currently on.
#[cfg(target_os = "linux")]
fn pin_current_thread() -> Option<usize> {
    // SAFETY: plain libc calls on a zeroed cpu_set_t owned by this frame.
    unsafe {
        let cpu = libc::sched_getcpu();
        if cpu < 0 {
            return None;
        }
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(cpu as usize, &mut set);
        if libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0 {
            Some(cpu as usize)
        } else {
            None
        }
    }
}

#[cfg(not(target_os = "linux"))]
fn pin_current_thread() -> Option<usize> {
    None
}

struct Subject {
    slot: Slot,
    family: Family,
    layer: KanLayer,
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn run_once(layer: &mut KanLayer, mode: BenchMode, x: &Matrix, grad: &Matrix) -> f64 {
    match mode {
        BenchMode::Forward => {
            let out = layer.predict(black_box(x)).expect("bench shapes are consistent");
            black_box(&out);
            out.as_slice()[0]
        }
        BenchMode::ForwardBackward => {
            let out = layer.forward(black_box(x)).expect("bench shapes are consistent");
            let g = layer.backward(black_box(grad)).expect("forward ran");
            black_box(&out);
            black_box(&g);
            g.input.as_slice()[0]
        }
    }
}

pub fn run_bench(cfg: &BenchConfig, seed: u64) -> Result<BenchReport> {
    cfg.validate()?;
    let pinned_cpu = pin_current_thread();
    let resolution = clock_resolution();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Matrix::from_fn(cfg.batch, cfg.in_dim, |_, _| rng.gen_range(DEFAULT_LO..DEFAULT_HI));
    let grad = Matrix::from_fn(cfg.batch, cfg.out_dim, |_, _| rng.gen_range(-1.0..1.0));
    let mut subjects = Vec::new();
    for (slot, family) in [(Slot::Baseline, cfg.baseline), (Slot::Candidate, cfg.candidate)] {
        let basis = Basis::with_count(family, cfg.basis_count, DEFAULT_LO, DEFAULT_HI, DEFAULT_ORDER)?;
        // Both slots draw weights from the same seeded stream, so a
        // self-comparison times two identical layers.
        let mut layer_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let layer = KanLayer::new(cfg.in_dim, cfg.out_dim, basis, &mut layer_rng)?;
        subjects.push(Subject { slot, family, layer });
    }

    let mut warnings = Vec::new();
    let floor = resolution.as_secs_f64() * 1000.0;
    let mut entries = Vec::new();
    for &mode in &cfg.modes {
        for s in &mut subjects {
            for _ in 0..cfg.warmup {
                black_box(run_once(&mut s.layer, mode, &x, &grad));
            }
        }
        let mut rounds = vec![Vec::with_capacity(cfg.rounds); subjects.len()];
        let mut too_short = false;
        for _ in 0..cfg.rounds {
            for (s, times) in subjects.iter_mut().zip(&mut rounds) {
                let start = Instant::now();
                for _ in 0..cfg.repeats_per_round {
                    black_box(run_once(&mut s.layer, mode, &x, &grad));
                }
                let elapsed = start.elapsed().as_secs_f64();
                too_short |= elapsed < floor;
                times.push(elapsed * 1e6 / cfg.repeats_per_round as f64);
            }
        }
        if too_short {
            warnings.push(format!(
                "{}: some rounds lasted under 1000x the clock resolution ({:.0} ns); \
                 increase repeats for stable numbers",
                mode.name(),
                resolution.as_nanos()
            ));
        }
        for (s, times) in subjects.iter_mut().zip(rounds) {
            let checksum = match mode {
                BenchMode::Forward => s.layer.predict(&x)?.sum(),
                BenchMode::ForwardBackward => {
                    s.layer.forward(&x)?;
                    s.layer.backward(&grad)?.input.sum()
                }
            };
            entries.push(BenchEntry {
                slot: s.slot,
                family: s.family,
                mode,
                mean_us: times.iter().sum::<f64>() / times.len() as f64,
                std_us: std_dev(&times),
                round_means_us: times,
                checksum,
            });
        }
    }
    Ok(BenchReport {
        config: cfg.clone(),
        seed,
        entries,
        clock_resolution_ns: resolution.as_nanos() as f64,
        pinned_cpu,
        warnings,
    })
}

/// One parsed row of the benchmark CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub implementation: String,
    /// `(mean, std, acceleration)` per mode, `None` when not measured.
    pub forward: Option<(f64, f64, f64)>,
    pub forward_backward: Option<(f64, f64, f64)>,
}

pub const BENCH_CSV_HEADER: &str = "implementation,fwd_us,fwd_acc,fwd_bwd_us,fwd_bwd_acc";

fn cells(report: &BenchReport, slot: Slot, mode: BenchMode) -> (String, String) {
    match report.entry(slot, mode) {
        None => (String::new(), String::new()),
        Some(e) => {
            let acc = match slot {
                Slot::Baseline => 1.0,
                Slot::Candidate => report.speedup(mode).expect("both slots measured"),
            };
            (format!("{}±{}", e.mean_us, e.std_us), format!("{acc}"))
        }
    }
}

/// Two rows (baseline, candidate) in the five-column timing-table layout.
/// Time cells read `mean±std`; numbers are printed round-trip exact.
pub fn bench_csv(report: &BenchReport) -> String {
    let mut out = format!("{BENCH_CSV_HEADER}\n");
    for slot in [Slot::Baseline, Slot::Candidate] {
        let (f, fa) = cells(report, slot, BenchMode::Forward);
        let (fb, fba) = cells(report, slot, BenchMode::ForwardBackward);
        writeln!(out, "{},{f},{fa},{fb},{fba}", report.implementation_name(slot)).unwrap();
    }
    out
}

pub fn parse_bench_csv(text: &str) -> Result<Vec<BenchRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(BENCH_CSV_HEADER) {
        return Err(KanError::Data("benchmark CSV header mismatch".into()));
    }
    let bad = |line: &str| KanError::Data(format!("malformed benchmark row {line:?}"));
    let num = |s: &str, line: &str| s.parse::<f64>().map_err(|_| bad(line));
    let pair = |t: &str, a: &str, line: &str| -> Result<Option<(f64, f64, f64)>> {
        if t.is_empty() {
            return Ok(None);
        }
        let (m, s) = t.split_once('±').ok_or_else(|| bad(line))?;
        Ok(Some((num(m, line)?, num(s, line)?, num(a, line)?)))
    };
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(line));
            }
            Ok(BenchRow {
                implementation: f[0].to_string(),
                forward: pair(f[1], f[2], line)?,
                forward_backward: pair(f[3], f[4], line)?,
            })
        })
        .collect()
}

/// Human-readable table with the published GPU numbers underneath.
pub fn bench_table(report: &BenchReport) -> String {
    let fmt = |slot: Slot, mode: BenchMode| match report.entry(slot, mode) {
        None => ("-".to_string(), "-".to_string()),
        Some(e) => {
            let acc = match slot {
                Slot::Baseline => 1.0,
                Slot::Candidate => report.speedup(mode).unwrap_or(f64::NAN),
            };
            (format!("{:.2}±{:.2}", e.mean_us, e.std_us), format!("{acc:.2}"))
        }
    };
    let mut out = String::new();
    writeln!(
        out,
        "{:<16} | {:>18} {:>9} | {:>18} {:>14}",
        "Implementation", "Fwd. (µs)", "Fwd. acc.", "Fwd. + Bwd. (µs)", "Fwd. + Bwd. acc."
    )
    .unwrap();
    writeln!(out, "{}", "-".repeat(84)).unwrap();
    for slot in [Slot::Baseline, Slot::Candidate] {
        let (f, fa) = fmt(slot, BenchMode::Forward);
        let (b, ba) = fmt(slot, BenchMode::ForwardBackward);
        writeln!(
            out,
            "{:<16} | {:>18} {:>9} | {:>18} {:>14}",
            report.implementation_name(slot),
            f,
            fa,
            b,
            ba
        )
        .unwrap();
    }
    let c = &report.config;
    writeln!(
        out,
        "\nlayer {}->{}, {} bases/input, batch {}, {} rounds x {} repeats, clock resolution {} ns{}",
        c.in_dim,
        c.out_dim,
        c.basis_count,
        c.batch,
        c.rounds,
        c.repeats_per_round,
        report.clock_resolution_ns,
        report
            .pinned_cpu
            .map(|cpu| format!(", pinned to cpu {cpu}"))
            .unwrap_or_default()
    )
    .unwrap();
    let r = GPU_REFERENCE_US;
    writeln!(
        out,
        "reference (V100 GPU, efficient-kan vs FastKAN): fwd {}±{} vs {}±{} µs ({:.2}x), \
         fwd+bwd {}±{} vs {}±{} µs ({:.2}x)",
        r[0],
        r[1],
        r[2],
        r[3],
        r[0] / r[2],
        r[4],
        r[5],
        r[6],
        r[7],
        r[4] / r[6]
    )
    .unwrap();
    for w in &report.warnings {
        writeln!(out, "warning: {w}").unwrap();
    }
    out
}

/// Writes the CSV to `path` and the text table next to it with a `.txt`
/// extension. Returns both paths.
pub fn emit_bench(report: &BenchReport, path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let csv_path = path.as_ref().to_path_buf();
    let table_path = csv_path.with_extension("txt");
    std::fs::write(&csv_path, bench_csv(report)).map_err(|e| KanError::io(&csv_path, e))?;
    std::fs::write(&table_path, bench_table(report)).map_err(|e| KanError::io(&table_path, e))?;
    Ok(vec![csv_path, table_path])
}
