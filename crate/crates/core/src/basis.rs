//! Univariate basis families evaluated over a shared uniform grid.
//!
//! Two families are provided:
//!
//! - [`BSplineBasis`]: order-`k` B-splines on `G` uniform intervals, computed
//!   with the full deBoor-Cox triangular recursion over the extended knot
//!   vector. There are `G + k` basis functions.
//! - [`GaussianRbfBasis`]: `N` Gaussians `exp(-(x - c)² / 2h²)` with centers
//!   spaced uniformly on `[lo, hi]`, endpoints included.
//!
//! Both implement [`BasisFamily`], which is all a KAN layer needs.

use serde::{Deserialize, Serialize};

use crate::error::{KanError, Result};

pub const DEFAULT_LO: f64 = -2.0;
pub const DEFAULT_HI: f64 = 2.0;
pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_GRIDS: usize = 5;
pub const DEFAULT_CENTERS: usize = 8;

/// Uniform layout on `[lo, hi]`.
///
/// `size` is the number of knot intervals `G` for B-splines and the number of
/// centers `N` for Gaussian RBFs. `order` only matters for B-splines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub size: usize,
    pub order: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, size: usize, order: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(KanError::Config(format!(
                "grid range must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        if size == 0 {
            return Err(KanError::Config("grid size must be at least 1".into()));
        }
        if order == 0 {
            return Err(KanError::Config("spline order must be at least 1".into()));
        }
        Ok(Self { lo, hi, size, order })
    }

    /// Cubic spline grid with `intervals` knot intervals.
    pub fn spline(lo: f64, hi: f64, intervals: usize) -> Result<Self> {
        Self::new(lo, hi, intervals, DEFAULT_ORDER)
    }

    /// RBF layout with `centers` centers (order is ignored).
    pub fn centers(lo: f64, hi: f64, centers: usize) -> Result<Self> {
        Self::new(lo, hi, centers, DEFAULT_ORDER)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Number of B-spline basis functions, `G + k`.
    pub fn spline_basis_count(&self) -> usize {
        self.size + self.order
    }
}

/// Anything that expands a scalar into a fixed number of basis values.
pub trait BasisFamily {
    fn count(&self) -> usize;

    /// Writes the basis values at `x` into `out[..count]`.
    fn eval_into(&self, x: f64, out: &mut [f64]);

    /// Writes `d/dx` of every basis value at `x` into `out[..count]`.
    fn deriv_into(&self, x: f64, out: &mut [f64]);

    /// Values and derivatives together; families may share work.
    fn eval_with_deriv_into(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        self.eval_into(x, values);
        self.deriv_into(x, derivs);
    }

    fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.count()];
        self.eval_into(x, &mut out);
        out
    }

    fn eval_deriv(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.count()];
        self.deriv_into(x, &mut out);
        out
    }
}

/// Order-`k` B-spline basis over `G` uniform intervals of `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    grid: GridSpec,
    knots: Vec<f64>,
}

/// Scratch size that covers every practical grid without touching the heap.
const STACK_TABLE: usize = 64;

impl BSplineBasis {
    /// Knots are uniform with spacing `(hi - lo) / G`, extended by `k` knots
    /// past each end, for `G + 2k + 1` knots in total.
    pub fn new(grid: GridSpec) -> Self {
        let g = grid.size;
        let k = grid.order;
        let step = grid.width() / g as f64;
        let knots = (0..=g + 2 * k)
            .map(|i| {
                let offset = i as isize - k as isize;
                if offset == 0 {
                    grid.lo
                } else if offset == g as isize {
                    grid.hi
                } else {
                    grid.lo + offset as f64 * step
                }
            })
            .collect();
        Self { grid, knots }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn order(&self) -> usize {
        self.grid.order
    }

    pub fn knot_spacing(&self) -> f64 {
        self.grid.width() / self.grid.size as f64
    }

    /// Fills `table[..knots - 1]` with order-0 indicators of the half-open
    /// knot intervals. At `x == hi` the last interior interval is used, so
    /// values there are left limits.
    fn order_zero(&self, x: f64, table: &mut [f64]) {
        let t = &self.knots;
        let last_interior = self.grid.order + self.grid.size - 1;
        for (i, slot) in table[..t.len() - 1].iter_mut().enumerate() {
            *slot = if x >= t[i] && x < t[i + 1] { 1.0 } else { 0.0 };
        }
        if x == self.grid.hi {
            table[last_interior + 1] = 0.0;
            table[last_interior] = 1.0;
        }
    }

    /// Raises `table` (holding order `p - 1` values) to order `p` in place.
    fn raise(&self, x: f64, table: &mut [f64], p: usize) {
        let t = &self.knots;
        let n = t.len() - 1 - p;
        for i in 0..n {
            let left_den = t[i + p] - t[i];
            let right_den = t[i + p + 1] - t[i + 1];
            let left = if left_den != 0.0 {
                (x - t[i]) / left_den * table[i]
            } else {
                0.0
            };
            let right = if right_den != 0.0 {
                (t[i + p + 1] - x) / right_den * table[i + 1]
            } else {
                0.0
            };
            table[i] = left + right;
        }
    }

    fn with_table<R>(&self, f: impl FnOnce(&mut [f64]) -> R) -> R {
        let len = self.knots.len() - 1;
        if len <= STACK_TABLE {
            let mut buf = [0.0; STACK_TABLE];
            f(&mut buf[..len])
        } else {
            f(&mut vec![0.0; len])
        }
    }

    /// Derivatives from order `k - 1` values:
    /// `B'_{i,k} = k/(t_{i+k} - t_i) B_{i,k-1} - k/(t_{i+k+1} - t_{i+1}) B_{i+1,k-1}`.
    fn deriv_from_lower(&self, lower: &[f64], out: &mut [f64]) {
        let t = &self.knots;
        let k = self.grid.order;
        let kf = k as f64;
        for (i, slot) in out[..self.count()].iter_mut().enumerate() {
            let left_den = t[i + k] - t[i];
            let right_den = t[i + k + 1] - t[i + 1];
            let left = if left_den != 0.0 {
                kf / left_den * lower[i]
            } else {
                0.0
            };
            let right = if right_den != 0.0 {
                kf / right_den * lower[i + 1]
            } else {
                0.0
            };
            *slot = left - right;
        }
    }
}

impl BasisFamily for BSplineBasis {
    fn count(&self) -> usize {
        self.grid.spline_basis_count()
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        let n = self.count();
        self.with_table(|table| {
            self.order_zero(x, table);
            for p in 1..=self.grid.order {
                self.raise(x, table, p);
            }
            out[..n].copy_from_slice(&table[..n]);
        });
    }

    fn deriv_into(&self, x: f64, out: &mut [f64]) {
        self.with_table(|table| {
            self.order_zero(x, table);
            for p in 1..self.grid.order {
                self.raise(x, table, p);
            }
            self.deriv_from_lower(table, out);
        });
    }

    fn eval_with_deriv_into(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        let n = self.count();
        let k = self.grid.order;
        self.with_table(|table| {
            self.order_zero(x, table);
            for p in 1..k {
                self.raise(x, table, p);
            }
            self.deriv_from_lower(table, derivs);
            self.raise(x, table, k);
            values[..n].copy_from_slice(&table[..n]);
        });
    }
}

/// Gaussian radial basis `exp(-(x - c_i)² / 2h²)` on uniformly spaced centers.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRbfBasis {
    grid: GridSpec,
    centers: Vec<f64>,
    bandwidth: f64,
}

impl GaussianRbfBasis {
    /// Bandwidth defaults to the center spacing `(hi - lo) / (N - 1)`.
    pub fn new(grid: GridSpec) -> Result<Self> {
        if grid.size < 2 {
            return Err(KanError::Config(
                "an RBF grid needs at least 2 centers".into(),
            ));
        }
        let spacing = grid.width() / (grid.size - 1) as f64;
        Self::with_bandwidth(grid, spacing)
    }

    pub fn with_bandwidth(grid: GridSpec, bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(KanError::Config(format!(
                "RBF bandwidth must be positive, got {bandwidth}"
            )));
        }
        let n = grid.size;
        let centers = if n == 1 {
            vec![grid.lo]
        } else {
            let spacing = grid.width() / (n - 1) as f64;
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        grid.hi
                    } else {
                        grid.lo + i as f64 * spacing
                    }
                })
                .collect()
        };
        Ok(Self {
            grid,
            centers,
            bandwidth,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

impl BasisFamily for GaussianRbfBasis {
    fn count(&self) -> usize {
        self.centers.len()
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        let inv_h = 1.0 / self.bandwidth;
        for (slot, &c) in out.iter_mut().zip(&self.centers) {
            let r = (x - c) * inv_h;
            *slot = (-0.5 * r * r).exp();
        }
    }

    fn deriv_into(&self, x: f64, out: &mut [f64]) {
        let inv_h = 1.0 / self.bandwidth;
        for (slot, &c) in out.iter_mut().zip(&self.centers) {
            let r = (x - c) * inv_h;
            *slot = -r * inv_h * (-0.5 * r * r).exp();
        }
    }

    fn eval_with_deriv_into(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        let inv_h = 1.0 / self.bandwidth;
        for ((v, d), &c) in values.iter_mut().zip(derivs.iter_mut()).zip(&self.centers) {
            let r = (x - c) * inv_h;
            let phi = (-0.5 * r * r).exp();
            *v = phi;
            *d = -r * inv_h * phi;
        }
    }
}

/// Which basis family a layer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Spline,
    Rbf,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Spline => "spline",
            Family::Rbf => "rbf",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = KanError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spline" | "bspline" | "kan" => Ok(Family::Spline),
            "rbf" | "fastkan" | "gaussian" => Ok(Family::Rbf),
            other => Err(KanError::Argument(format!(
                "unknown basis family {other:?} (expected spline or rbf)"
            ))),
        }
    }
}

/// A concrete basis, either family.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    BSpline(BSplineBasis),
    Rbf(GaussianRbfBasis),
}

impl Basis {
    /// Builds a basis of the requested family with `count` functions on
    /// `[lo, hi]`. For splines the interval count is `count - order`.
    pub fn with_count(family: Family, count: usize, lo: f64, hi: f64, order: usize) -> Result<Self> {
        match family {
            Family::Spline => {
                if count <= order {
                    return Err(KanError::Config(format!(
                        "spline basis count {count} must exceed order {order}"
                    )));
                }
                Ok(Basis::BSpline(BSplineBasis::new(GridSpec::new(
                    lo,
                    hi,
                    count - order,
                    order,
                )?)))
            }
            Family::Rbf => Ok(Basis::Rbf(GaussianRbfBasis::new(GridSpec::new(
                lo, hi, count, order,
            )?)?)),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Basis::BSpline(_) => Family::Spline,
            Basis::Rbf(_) => Family::Rbf,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        match self {
            Basis::BSpline(b) => b.grid(),
            Basis::Rbf(b) => b.grid(),
        }
    }
}

impl BasisFamily for Basis {
    fn count(&self) -> usize {
        match self {
            Basis::BSpline(b) => b.count(),
            Basis::Rbf(b) => b.count(),
        }
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        match self {
            Basis::BSpline(b) => b.eval_into(x, out),
            Basis::Rbf(b) => b.eval_into(x, out),
        }
    }

    fn deriv_into(&self, x: f64, out: &mut [f64]) {
        match self {
            Basis::BSpline(b) => b.deriv_into(x, out),
            Basis::Rbf(b) => b.deriv_into(x, out),
        }
    }

    fn eval_with_deriv_into(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        match self {
            Basis::BSpline(b) => b.eval_with_deriv_into(x, values, derivs),
            Basis::Rbf(b) => b.eval_with_deriv_into(x, values, derivs),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_spline() -> BSplineBasis {
        BSplineBasis::new(GridSpec::spline(DEFAULT_LO, DEFAULT_HI, DEFAULT_GRIDS).unwrap())
    }

    fn default_rbf() -> GaussianRbfBasis {
        GaussianRbfBasis::new(GridSpec::centers(DEFAULT_LO, DEFAULT_HI, DEFAULT_CENTERS).unwrap())
            .unwrap()
    }

    /// Direct recursive deBoor-Cox, one basis function at a time.
    fn naive_bspline(t: &[f64], i: usize, p: usize, x: f64) -> f64 {
        if p == 0 {
            return if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        if t[i + p] != t[i] {
            v += (x - t[i]) / (t[i + p] - t[i]) * naive_bspline(t, i, p - 1, x);
        }
        if t[i + p + 1] != t[i + 1] {
            v += (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * naive_bspline(t, i + 1, p - 1, x);
        }
        v
    }

    fn central_diff(f: impl Fn(f64) -> Vec<f64>, x: f64, eps: f64) -> Vec<f64> {
        let plus = f(x + eps);
        let minus = f(x - eps);
        plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * eps)).collect()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1.0, 1.0, 5, 3).is_err());
        assert!(GridSpec::new(2.0, -2.0, 5, 3).is_err());
        assert!(GridSpec::new(-2.0, 2.0, 0, 3).is_err());
        assert!(GridSpec::new(-2.0, 2.0, 5, 0).is_err());
        assert!(GaussianRbfBasis::with_bandwidth(GridSpec::centers(-1.0, 1.0, 4).unwrap(), 0.0).is_err());
    }

    #[test]
    fn knot_layout() {
        let b = default_spline();
        let t = b.knots();
        assert_eq!(t.len(), 5 + 2 * 3 + 1);
        assert_eq!(t[3], -2.0);
        assert_eq!(t[8], 2.0);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(b.count(), 8);
    }

    #[test]
    fn matches_naive_recursion() {
        let b = default_spline();
        for j in 0..400 {
            let x = -5.0 + j as f64 * 0.025;
            let fast = b.eval(x);
            for (i, v) in fast.iter().enumerate() {
                let slow = naive_bspline(b.knots(), i, 3, x);
                assert!((v - slow).abs() < 1e-14, "x={x} i={i}: {v} vs {slow}");
            }
        }
    }

    #[test]
    fn cardinal_cubic_values() {
        // G = 1 on [0, 1] gives unit-spaced knots -3..4; basis 1 is the
        // cardinal cubic centered at 0.
        let b = BSplineBasis::new(GridSpec::spline(0.0, 1.0, 1).unwrap());
        assert_eq!(b.knots(), &[-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        let oracle = |x: f64| naive_bspline(b.knots(), 1, 3, x);
        assert!((oracle(0.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((oracle(1.0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((oracle(-1.0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((b.eval(0.0)[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((b.eval(-1.0)[1] - 1.0 / 6.0).abs() < 1e-15);
        // x == hi is evaluated as a left limit.
        assert!((b.eval(1.0)[1] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn partition_of_unity_on_closed_interval() {
        let b = default_spline();
        for j in 0..1000 {
            let x = -2.0 + (4.0 - 1e-9) * j as f64 / 999.0;
            let s: f64 = b.eval(x).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "x={x} sum={s}");
        }
        let at_hi: f64 = b.eval(2.0).iter().sum();
        assert!((at_hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vanishes_outside_extended_span() {
        let b = default_spline();
        let h = b.knot_spacing();
        assert!(b.eval(2.0 + 10.0 * h).iter().all(|&v| v == 0.0));
        assert!(b.eval(-2.0 - 10.0 * h).iter().all(|&v| v == 0.0));
        assert!(b.eval_deriv(2.0 + 10.0 * h).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn compact_support_spans_at_most_k_plus_one_intervals() {
        let b = default_spline();
        let t = b.knots().to_vec();
        for i in 0..b.count() {
            for j in 0..2000 {
                let x = -5.0 + j as f64 * 0.005;
                if b.eval(x)[i] != 0.0 {
                    assert!(x >= t[i] && x < t[i + 4], "basis {i} nonzero at {x}");
                }
            }
        }
    }

    #[test]
    fn spline_derivative_sums_to_zero_inside() {
        let b = default_spline();
        for j in 0..100 {
            let x = -1.99 + 3.98 * j as f64 / 99.0;
            let s: f64 = b.eval_deriv(x).iter().sum();
            assert!(s.abs() < 1e-12, "x={x} sum={s}");
        }
    }

    #[test]
    fn rbf_known_values() {
        let b = default_rbf();
        let h = b.bandwidth();
        assert!((h - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(b.centers()[0], -2.0);
        assert_eq!(b.centers()[7], 2.0);
        let c = b.centers()[3];
        assert_eq!(b.eval(c)[3], 1.0);
        assert!((b.eval(c + h)[3] - 0.6065306597126334).abs() < 1e-12);
        assert!((b.eval(c + 2.0 * h)[3] - 0.1353352832366127).abs() < 1e-12);
        assert_eq!(b.eval_deriv(c)[3], 0.0);
        let d = 0.37;
        assert!((b.eval_deriv(c + d)[3] + b.eval_deriv(c - d)[3]).abs() < 1e-15);
    }

    #[test]
    fn combined_eval_agrees_with_separate_calls() {
        for basis in [
            Basis::BSpline(default_spline()),
            Basis::Rbf(default_rbf()),
        ] {
            let mut v = vec![0.0; 8];
            let mut d = vec![0.0; 8];
            for j in 0..50 {
                let x = -3.0 + 0.12 * j as f64;
                basis.eval_with_deriv_into(x, &mut v, &mut d);
                assert_eq!(v, basis.eval(x));
                assert_eq!(d, basis.eval_deriv(x));
            }
        }
    }

    #[test]
    fn with_count_maps_to_grid() {
        let spline = Basis::with_count(Family::Spline, 8, -2.0, 2.0, 3).unwrap();
        assert_eq!(spline.grid().size, 5);
        assert_eq!(spline.count(), 8);
        let rbf = Basis::with_count(Family::Rbf, 8, -2.0, 2.0, 3).unwrap();
        assert_eq!(rbf.count(), 8);
        assert!(Basis::with_count(Family::Spline, 3, -2.0, 2.0, 3).is_err());
    }

    proptest! {
        #[test]
        fn spline_values_are_non_negative(x in -8.0f64..8.0) {
            prop_assert!(default_spline().eval(x).iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn spline_derivative_matches_finite_difference(x in -4.5f64..4.5) {
            let b = default_spline();
            let fd = central_diff(|y| b.eval(y), x, 1e-6);
            for (a, n) in b.eval_deriv(x).iter().zip(&fd) {
                prop_assert!((a - n).abs() < 1e-6, "x={} analytic={} fd={}", x, a, n);
            }
        }

        #[test]
        fn rbf_derivative_matches_finite_difference(x in -4.0f64..4.0) {
            let b = default_rbf();
            let fd = central_diff(|y| b.eval(y), x, 1e-6);
            for (a, n) in b.eval_deriv(x).iter().zip(&fd) {
                prop_assert!((a - n).abs() < 1e-6);
            }
        }

        #[test]
        fn rbf_values_lie_in_unit_interval(x in -10.0f64..10.0) {
            let b = default_rbf();
            for (v, &c) in b.eval(x).iter().zip(b.centers()) {
                prop_assert!(*v > 0.0 && *v <= 1.0);
                prop_assert_eq!(*v == 1.0, x == c);
            }
        }
    }
}
