//! Least-squares fit of B-spline bases by linear combinations of Gaussian
//! RBFs.
//!
//! Both bases are sampled on the same uniform grid; the transform `T`
//! (`N × (G + k)`) minimizes `‖Φ_rbf T − Φ_spline‖_F`, so column `j` of `T`
//! holds the RBF weights that best reproduce spline basis `j`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{BSplineBasis, BasisFamily, GaussianRbfBasis, GridSpec};
use crate::error::{KanError, Result};
use crate::tensor::{lstsq, matmul, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub grid_b: GridSpec,
    pub grid_r: GridSpec,
    pub bandwidth: f64,
    /// `N × (G + k)`, serialized row-major.
    #[serde(with = "matrix_rows")]
    pub transform: Matrix,
    pub max_abs_error: f64,
    pub rms_error: f64,
    pub samples: usize,
    pub sample_lo: f64,
    pub sample_hi: f64,
}

mod matrix_rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::tensor::Matrix;

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = (0..m.rows()).map(|r| m.row(r)).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// `samples` uniformly spaced points on `[lo, hi]`, both ends included.
pub fn sample_points(samples: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..samples)
        .map(|i| {
            if i + 1 == samples {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (samples - 1) as f64
            }
        })
        .collect()
}

fn design(basis: &impl BasisFamily, xs: &[f64]) -> Matrix {
    let n = basis.count();
    let mut m = Matrix::zeros(xs.len(), n);
    for (r, &x) in xs.iter().enumerate() {
        basis.eval_into(x, m.row_mut(r));
    }
    m
}

/// Values of the fitted approximation (`Φ_rbf T`) at `xs`.
pub fn approximate(rbf: &GaussianRbfBasis, transform: &Matrix, xs: &[f64]) -> Result<Matrix> {
    matmul(&design(rbf, xs), transform)
}

pub fn fit_transform(
    spline: &BSplineBasis,
    rbf: &GaussianRbfBasis,
    samples: usize,
    lo: f64,
    hi: f64,
) -> Result<FitReport> {
    let needed = 10 * spline.count().max(rbf.count());
    if samples < needed {
        return Err(KanError::Argument(format!(
            "{samples} samples is below the minimum of {needed} (10 per basis function)"
        )));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(KanError::Argument(format!(
            "sample range must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    let xs = sample_points(samples, lo, hi);
    let target = design(spline, &xs);
    let source = design(rbf, &xs);
    let transform = lstsq(&source, &target)?.solution;
    let residual = matmul(&source, &transform)?.sub(&target)?;
    let count = residual.as_slice().len() as f64;
    Ok(FitReport {
        grid_b: *spline.grid(),
        grid_r: *rbf.grid(),
        bandwidth: rbf.bandwidth(),
        transform,
        max_abs_error: residual.max_abs(),
        rms_error: (residual.as_slice().iter().map(|r| r * r).sum::<f64>() / count).sqrt(),
        samples,
        sample_lo: lo,
        sample_hi: hi,
    })
}

/// Header plus one row per sample: `x, spline_0.., approx_0..`.
pub fn fit_curves_csv(report: &FitReport, spline: &BSplineBasis, rbf: &GaussianRbfBasis) -> Result<String> {
    let n = spline.count();
    if report.transform.shape() != (rbf.count(), n) {
        return Err(KanError::shape(
            "emit_fit_curves",
            format!("transform {}x{}", report.transform.rows(), report.transform.cols()),
            format!("bases {}x{}", rbf.count(), n),
        ));
    }
    let xs = sample_points(report.samples, report.sample_lo, report.sample_hi);
    let exact = design(spline, &xs);
    let approx = approximate(rbf, &report.transform, &xs)?;
    let mut out = String::from("x");
    for j in 0..n {
        write!(out, ",spline_{j}").unwrap();
    }
    for j in 0..n {
        write!(out, ",approx_{j}").unwrap();
    }
    out.push('\n');
    for (r, x) in xs.iter().enumerate() {
        write!(out, "{x}").unwrap();
        for v in exact.row(r).iter().chain(approx.row(r)) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn emit_fit_curves(
    report: &FitReport,
    spline: &BSplineBasis,
    rbf: &GaussianRbfBasis,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let csv = fit_curves_csv(report, spline, rbf)?;
    std::fs::write(path, csv).map_err(|e| KanError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{DEFAULT_CENTERS, DEFAULT_GRIDS};

    fn bases(centers: usize) -> (BSplineBasis, GaussianRbfBasis) {
        (
            BSplineBasis::new(GridSpec::spline(-2.0, 2.0, DEFAULT_GRIDS).unwrap()),
            GaussianRbfBasis::new(GridSpec::centers(-2.0, 2.0, centers).unwrap()).unwrap(),
        )
    }

    #[test]
    fn default_fit_is_accurate() {
        let (s, r) = bases(DEFAULT_CENTERS);
        let report = fit_transform(&s, &r, 1000, -2.0, 2.0).unwrap();
        assert_eq!(report.transform.shape(), (8, 8));
        assert!(report.max_abs_error < 0.05);
        assert!(report.rms_error <= report.max_abs_error);
    }

    #[test]
    fn rejects_too_few_samples() {
        let (s, r) = bases(8);
        assert!(matches!(fit_transform(&s, &r, 79, -2.0, 2.0), Err(KanError::Argument(_))));
    }

    #[test]
    fn collapsed_centers_are_singular() {
        let (s, _) = bases(8);
        // Bandwidth so large every Gaussian is numerically the same constant.
        let flat = GaussianRbfBasis::with_bandwidth(GridSpec::centers(-2.0, 2.0, 8).unwrap(), 1e9).unwrap();
        assert!(matches!(fit_transform(&s, &flat, 1000, -2.0, 2.0), Err(KanError::Singular { .. })));
    }

    #[test]
    fn sample_points_hit_both_ends() {
        let xs = sample_points(5, -2.0, 2.0);
        assert_eq!(xs, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn csv_shape() {
        let (s, r) = bases(8);
        let report = fit_transform(&s, &r, 100, -2.0, 2.0).unwrap();
        let csv = fit_curves_csv(&report, &s, &r).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 101);
        assert_eq!(lines[0].split(',').count(), 17);
        assert!(lines[0].starts_with("x,spline_0,") && lines[0].ends_with(",approx_7"));
    }
}
