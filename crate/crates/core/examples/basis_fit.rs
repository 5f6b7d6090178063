//! Fits the 8 cubic B-spline bases on [-2, 2] with 8 Gaussian RBFs and
//! writes the curves to `fit_curves.csv` for plotting.
//!
//! `cargo run --release --example basis_fit [centers]`

use fastkan::basis::{BasisFamily, DEFAULT_GRIDS};
use fastkan::basisfit::{emit_fit_curves, fit_transform};
use fastkan::{BSplineBasis, GaussianRbfBasis, GridSpec};

fn main() -> fastkan::Result<()> {
    let centers = std::env::args().nth(1).map_or(8, |a| a.parse().expect("center count"));
    let spline = BSplineBasis::new(GridSpec::spline(-2.0, 2.0, DEFAULT_GRIDS)?);
    let rbf = GaussianRbfBasis::new(GridSpec::centers(-2.0, 2.0, centers)?)?;
    let report = fit_transform(&spline, &rbf, 1000, -2.0, 2.0)?;

    println!("{} splines <- {} gaussians, h = {:.4}", spline.count(), rbf.count(), rbf.bandwidth());
    println!("max |error| = {:.3e}, rms = {:.3e}", report.max_abs_error, report.rms_error);
    println!("transform (rows: gaussians, cols: splines):");
    for r in 0..report.transform.rows() {
        let row: Vec<String> = report.transform.row(r).iter().map(|v| format!("{v:8.3}")).collect();
        println!("  {}", row.join(" "));
    }
    emit_fit_curves(&report, &spline, &rbf, "fit_curves.csv")?;
    println!("wrote fit_curves.csv");
    Ok(())
}
