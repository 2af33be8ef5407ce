//! Dormand–Prince 5(4) integrator with adaptive step size.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-8, abs: 1e-10 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LOW: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to `t1`. `h` carries the step size
/// between calls so that consecutive segments start with a sensible guess.
pub fn integrate<const N: usize, F>(
    f: &F,
    t0: f64,
    mut y: [f64; N],
    t1: f64,
    tol: Tolerance,
    h: &mut f64,
) -> Result<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let g = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let arr: &[f64; N] = y.try_into().expect("state length");
        dy.copy_from_slice(&f(t, arr)?);
        Ok(())
    };
    integrate_slice(&g, t0, &mut y, t1, tol, h)?;
    Ok(y)
}

/// Slice version of [`integrate`] for states whose size is known only at
/// run time; `f(t, y, dy)` writes the derivative into `dy`.
pub fn integrate_slice<F>(f: &F, t0: f64, y: &mut [f64], t1: f64, tol: Tolerance, h: &mut f64) -> Result<()>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(());
    }
    if !(*h > 0.0) || *h > span {
        *h = span.min(if *h > 0.0 { *h } else { span / 16.0 });
    }
    let mut t = t0;
    let mut k = vec![vec![0.0; n]; 7];
    let mut ys = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    f(t, y, &mut k[0])?;
    let mut steps = 0usize;
    while t < t1 {
        steps += 1;
        if steps > 2_000_000 {
            return Err(Error::numerical(format!("step limit reached at t = {t}"), *h));
        }
        let last = t + *h >= t1;
        let step = if last { t1 - t } else { *h };
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * k[j][i];
                }
                ys[i] = y[i] + step * acc;
            }
            f(t + C[s] * step, &ys, &mut k[s])?;
        }
        let mut err = 0.0f64;
        for i in 0..n {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..7 {
                hi += B[s] * k[s][i];
                lo += B_LOW[s] * k[s][i];
            }
            y_new[i] = y[i] + step * hi;
            let scale = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
            err = err.max((step * (hi - lo)).abs() / scale);
        }
        if !err.is_finite() {
            return Err(Error::numerical(format!("non-finite derivative at t = {t}"), f64::INFINITY));
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + step };
            y.copy_from_slice(&y_new);
            k.swap(0, 6);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        let proposal = step * factor;
        if err <= 1.0 && last {
            // The final step may have been clipped; keep the larger guess.
            *h = h.max(proposal);
        } else {
            *h = proposal;
        }
        if *h < 1e-14 * t1.abs().max(1.0) {
            return Err(Error::numerical(
                format!("step size underflow; last good time t = {t}"),
                err,
            ));
        }
    }
    Ok(())
}
