//! Adaptive Gauss–Kronrod quadrature (7/15 point pair) with global
//! error-driven bisection.
//!
//! Integrands may be real or complex. Known discontinuities and kinks are
//! passed as breakpoints so that no panel straddles them.

use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Values that can be integrated: closed under addition and real scaling,
/// with a norm for error control.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Result of an integration together with its error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<V> {
    pub value: V,
    pub error: f64,
}

/// Tolerances and limits for [`Quad::integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of bisections on top of the initial panels.
    pub max_splits: usize,
}

impl Default for Quad {
    fn default() -> Self {
        Quad {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            max_splits: 20_000,
        }
    }
}

struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<V> Eq for Panel<V> {}
impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Panel<V> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<V: QuadValue, F: Fn(f64) -> V>(f: &F, a: f64, b: f64) -> (V, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut fv = [V::zero(); 15];
    fv[7] = f(c);
    for j in 0..7 {
        let x = h * XGK[j];
        fv[j] = f(c - x);
        fv[14 - j] = f(c + x);
    }
    let mut gauss = fv[7] * WG[3];
    let mut kron = fv[7] * WGK[7];
    for j in 0..7 {
        let s = fv[j] + fv[14 - j];
        kron = kron + s * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + s * WG[j / 2];
        }
    }
    let mean = kron * 0.5;
    let mut asc = WGK[7] * (fv[7] - mean).magnitude();
    for j in 0..7 {
        asc += WGK[j] * ((fv[j] - mean).magnitude() + (fv[14 - j] - mean).magnitude());
    }
    let value = kron * h;
    let asc = asc * h.abs();
    let mut err = ((kron - gauss) * h).magnitude();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * value.magnitude();
    (value, err.max(floor))
}

impl Quad {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        Quad {
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }

    pub fn with_max_splits(mut self, n: usize) -> Self {
        self.max_splits = n;
        self
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<V: QuadValue, F: Fn(f64) -> V>(&self, f: F, a: f64, b: f64) -> Result<Estimate<V>> {
        self.integrate_breaks(f, &[a, b])
    }

    /// Integrate over `[points[0], points[last]]`, never straddling any of the
    /// interior points. `points` must be sorted; duplicates are ignored.
    pub fn integrate_breaks<V: QuadValue, F: Fn(f64) -> V>(&self, f: F, points: &[f64]) -> Result<Estimate<V>> {
        if points.len() < 2 {
            return Ok(Estimate {
                value: V::zero(),
                error: 0.0,
            });
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("integration limits must be finite"));
        }
        let mut heap = BinaryHeap::with_capacity(points.len() + 64);
        let mut total = V::zero();
        let mut total_err = 0.0;
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let (value, error) = kronrod(&f, a, b);
            total = total + value;
            total_err += error;
            heap.push(Panel { a, b, value, error });
        }
        let mut splits = 0;
        loop {
            let target = self.abs_tol.max(self.rel_tol * total.magnitude());
            if total_err <= target {
                break;
            }
            if splits >= self.max_splits {
                return Err(Error::numerical(
                    format!("adaptive quadrature did not converge after {splits} subdivisions"),
                    total_err,
                ));
            }
            let Some(worst) = heap.pop() else { break };
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // Panel cannot be split further in floating point.
                heap.push(Panel { error: 0.0, ..worst });
                total_err = heap.iter().map(|p| p.error).sum();
                continue;
            }
            let (v1, e1) = kronrod(&f, worst.a, mid);
            let (v2, e2) = kronrod(&f, mid, worst.b);
            total = total - worst.value + v1 + v2;
            total_err += e1 + e2 - worst.error;
            heap.push(Panel {
                a: worst.a,
                b: mid,
                value: v1,
                error: e1,
            });
            heap.push(Panel {
                a: mid,
                b: worst.b,
                value: v2,
                error: e2,
            });
            splits += 1;
            if splits % 256 == 0 {
                // Re-sum to keep rounding drift out of the running totals.
                total = heap.iter().fold(V::zero(), |acc, p| acc + p.value);
                total_err = heap.iter().map(|p| p.error).sum();
            }
        }
        Ok(Estimate {
            value: total,
            error: total_err,
        })
    }

    /// Integrate over `[a, b]` after splitting it into panels no wider than
    /// `max_width`, keeping the supplied breakpoints.
    pub fn integrate_panels<V: QuadValue, F: Fn(f64) -> V>(
        &self,
        f: F,
        a: f64,
        b: f64,
        max_width: f64,
        breaks: &[f64],
    ) -> Result<Estimate<V>> {
        let points = panel_points(a, b, max_width, breaks);
        self.integrate_breaks(f, &points)
    }

    /// Integrate over `[a, ∞)` via the map `x = a + scale·u/(1−u)`.
    pub fn integrate_semi_infinite<V: QuadValue, F: Fn(f64) -> V>(&self, f: F, a: f64, scale: f64) -> Result<Estimate<V>> {
        let g = |u: f64| {
            if u >= 1.0 {
                return V::zero();
            }
            let d = 1.0 - u;
            let x = a + scale * u / d;
            let v = f(x);
            if v.magnitude().is_finite() {
                v * (scale / (d * d))
            } else {
                V::zero()
            }
        };
        self.integrate_breaks(g, &[0.0, 0.25, 0.5, 0.75, 0.9, 0.97, 1.0])
    }
}

/// Sorted, deduplicated breakpoints covering `[a, b]` with spacing at most
/// `max_width`, containing every element of `breaks` that falls inside.
pub fn panel_points(a: f64, b: f64, max_width: f64, breaks: &[f64]) -> Vec<f64> {
    let mut fixed: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    fixed.push(a);
    fixed.push(b);
    fixed.sort_by(f64::total_cmp);
    fixed.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));
    let mut out = Vec::with_capacity(fixed.len());
    for w in fixed.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let n = if max_width > 0.0 && max_width.is_finite() {
            ((hi - lo) / max_width).ceil().max(1.0) as usize
        } else {
            1
        };
        for i in 0..n {
            out.push(lo + (hi - lo) * i as f64 / n as f64);
        }
    }
    out.push(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = Quad::default().integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0).unwrap();
        assert!((r.value - 0.0).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_complex() {
        let t = 40.0;
        let r = Quad::default()
            .integrate_panels(|x| Complex64::new(0.0, x * t).exp(), 0.0, 1.0, 0.05, &[])
            .unwrap();
        let exact = (Complex64::new(0.0, t).exp() - 1.0) / Complex64::new(0.0, t);
        assert!((r.value - exact).norm() < 1e-12);
    }

    #[test]
    fn kink_with_breakpoint() {
        let r = Quad::default().integrate_breaks(|x: f64| x.abs(), &[-1.0, 0.0, 2.0]).unwrap();
        assert!((r.value - 2.5).abs() < 1e-13);
    }

    #[test]
    fn semi_infinite_lorentzian() {
        let r = Quad::new(1e-10, 1e-15)
            .integrate_semi_infinite(|x| 1.0 / (1.0 + x * x), 0.0, 1.0)
            .unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn non_convergence_reports_residual() {
        let q = Quad::new(1e-14, 0.0).with_max_splits(3);
        let err = q.integrate(|x: f64| (1.0 / x.max(1e-300)).sin(), 1e-6, 1.0).unwrap_err();
        assert!(matches!(err, Error::NumericalFailure { residual, .. } if residual > 0.0));
    }

    #[test]
    fn panel_points_respect_breaks() {
        let p = panel_points(0.0, 1.0, 0.3, &[0.5, 2.0]);
        assert!(p.contains(&0.5));
        assert_eq!(*p.first().unwrap(), 0.0);
        assert_eq!(*p.last().unwrap(), 1.0);
        assert!(p.windows(2).all(|w| w[1] - w[0] <= 0.3 + 1e-12));
    }
}
