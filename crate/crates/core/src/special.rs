//! Small special functions not covered by the dependencies.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::quad::Quad;

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Sine integral `Si(x) = ∫₀ˣ sin(u)/u du`.
pub fn sine_integral(x: f64) -> f64 {
    if x < 0.0 {
        return -sine_integral(-x);
    }
    if x <= 6.0 {
        // Power series; terms stay below ~20 in magnitude here.
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut k = 0u32;
        loop {
            let n = 2 * k + 1;
            term *= -x2 / ((n + 1) as f64 * (n + 2) as f64);
            let add = term / (n + 2) as f64;
            sum += add;
            k += 1;
            if add.abs() < 1e-17 * sum.abs() || k > 200 {
                break;
            }
        }
        sum
    } else if x <= 48.0 {
        let rest = Quad::new(1e-13, 1e-13)
            .integrate_panels(|u: f64| u.sin() / u, 6.0, x, 1.0, &[])
            .map(|e| e.value)
            .unwrap_or(f64::NAN);
        sine_integral(6.0) + rest
    } else {
        // Asymptotic auxiliary functions f and g.
        let (mut f, mut g) = (0.0, 0.0);
        let inv = 1.0 / x;
        let mut tf = inv;
        let mut tg = inv * inv;
        for k in 0..20 {
            f += tf;
            g += tg;
            let a = (2 * k + 1) as f64 * (2 * k + 2) as f64;
            let b = (2 * k + 2) as f64 * (2 * k + 3) as f64;
            tf *= -a * inv * inv;
            tg *= -b * inv * inv;
            if tf.abs() < 1e-18 && tg.abs() < 1e-18 {
                break;
            }
        }
        FRAC_PI_2 - f * x.cos() - g * x.sin()
    }
}

/// `∫_{|ω|>X} e^{iωd}/ω² dω` for real `d`, `X > 0`. The result is real.
pub fn inverse_square_tail(x: f64, d: f64) -> f64 {
    let ad = d.abs();
    if ad == 0.0 {
        return 2.0 / x;
    }
    2.0 * ((x * ad).cos() / x - ad * (FRAC_PI_2 - sine_integral(x * ad)))
}

/// `(e^z − 1)/z`, accurate near `z = 0`.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z / 720.0))))
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `∫_a^b f(x) e^{ikx} dx` for `f` linear between `f(a) = fa` and `f(b) = fb`.
pub fn linear_segment_fourier(a: f64, b: f64, fa: Complex64, fb: Complex64, k: f64) -> Complex64 {
    let h = b - a;
    let i = Complex64::i();
    let z = i * k * h;
    let ea = (i * k * a).exp();
    // ∫₀¹ e^{zu} du and ∫₀¹ u e^{zu} du
    let (m0, m1) = if z.norm() < 1e-2 {
        let mut m0 = Complex64::new(0.0, 0.0);
        let mut m1 = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for n in 0..12 {
            m0 += term / (n + 1) as f64;
            m1 += term / (n + 2) as f64;
            term *= z / (n + 1) as f64;
        }
        (m0, m1)
    } else {
        let ez = z.exp();
        ((ez - 1.0) / z, ez / z - (ez - 1.0) / (z * z))
    };
    ea * h * (fa * m0 + (fb - fa) * m1)
}
