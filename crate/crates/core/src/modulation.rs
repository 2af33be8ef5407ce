//! Effective complex modulations `ε(t)` and their spectral views.
//!
//! Conventions used throughout the crate:
//!
//! ```text
//! ε_t(ω) = (2π)^{-1/2} ∫₀ᵗ ε(τ) e^{iωτ} dτ
//! Q(t)   = ∫₀ᵗ |ε(τ)|² dτ
//! F_t(ω) = |ε_t(ω)|² / Q(t)
//! ```
//!
//! A waveform `ε(t) = Σ_k ε_k e^{−iν_k t}` puts its spectral weight at
//! `ω = ν_k`, so the decay exponent `2π∫G(ω_a + ω)|ε_t(ω)|²dω` samples the
//! bath at `ω_a + ν_k`. A frame phase `θ(t) = ∫₀ᵗ δ(s) ds` enters as
//! `ε(t) = ε̃(t) e^{−iθ(t)}`: a constant shift `δ = Δ` moves the spectrum to
//! `+Δ`, and phase kicks of area `−φ` every `τ` produce the impulsive phase
//! modulation `e^{i[t/τ]φ}`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{linear_segment_fourier, phi1, sinc};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// One quasiperiodic component `ε_k e^{−iν_k t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiComponent {
    pub amplitude: Complex64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModulationWaveform {
    /// `ε(t) = ε0`.
    Constant { amplitude: f64 },
    /// `ε(t) = ε0 e^{−iΔt}`.
    Monochromatic { amplitude: f64, shift: f64 },
    /// `ε(t) = e^{i[t/τ]φ}`.
    ImpulsivePm { phase: f64, interval: f64 },
    /// `ε(t) = 1` during the first `τ1` of every period `τ0`, else 0.
    OnOff { on_time: f64, period: f64 },
    /// `ε(t) = Σ_k ε_k e^{−iν_k t}` with `|ν_k − ν_k'| ≥ Ω`.
    Quasiperiodic {
        components: Vec<QuasiComponent>,
        min_spacing: f64,
    },
    /// Samples `ε(kh)`, linearly interpolated, zero past the last sample.
    Sampled { step: f64, values: Vec<Complex64> },
}

/// Reduce a phase to `(−π, π]`.
pub fn reduce_phase(phi: f64) -> f64 {
    let r = phi - TAU * (phi / TAU).round();
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Split `t ≥ 0` into whole periods and remainder, snapping remainders that
/// are a rounding error away from a full period.
fn cell(t: f64, period: f64) -> (u64, f64) {
    let q = t / period;
    let mut n = q.floor();
    let mut rem = t - n * period;
    if rem >= period * (1.0 - 1e-12) {
        n += 1.0;
        rem = 0.0;
    }
    (n.max(0.0) as u64, rem.max(0.0))
}

/// `Σ_{k<n} e^{ikθ}`.
fn geometric(theta: f64, n: u64) -> Complex64 {
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let d = reduce_phase(theta);
    let nf = n as f64;
    let ratio = if d.abs() < 1e-12 {
        nf
    } else {
        (0.5 * nf * d).sin() / (0.5 * d).sin()
    };
    Complex64::from_polar(ratio, 0.5 * (nf - 1.0) * d)
}

/// `∫₀^s e^{iωu} du`.
fn ramp(omega: f64, s: f64) -> Complex64 {
    s * phi1(Complex64::new(0.0, omega * s))
}

impl ModulationWaveform {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be finite")))
            }
        };
        match self {
            ModulationWaveform::Constant { amplitude } => finite("amplitude", *amplitude),
            ModulationWaveform::Monochromatic { amplitude, shift } => {
                finite("amplitude", *amplitude)?;
                finite("shift", *shift)
            }
            ModulationWaveform::ImpulsivePm { phase, interval } => {
                finite("phase", *phase)?;
                finite("interval", *interval)?;
                if *interval <= 0.0 {
                    return Err(Error::invalid("impulsive_pm interval must be > 0"));
                }
                Ok(())
            }
            ModulationWaveform::OnOff { on_time, period } => {
                finite("on_time", *on_time)?;
                finite("period", *period)?;
                if !(*on_time > 0.0 && on_time <= period) {
                    return Err(Error::invalid(format!(
                        "on_off requires 0 < on_time <= period (got on_time = {on_time}, period = {period})"
                    )));
                }
                Ok(())
            }
            ModulationWaveform::Quasiperiodic {
                components,
                min_spacing,
            } => {
                if components.is_empty() {
                    return Err(Error::invalid("quasiperiodic waveform needs at least one component"));
                }
                if !(*min_spacing > 0.0) {
                    return Err(Error::invalid("quasiperiodic min_spacing must be > 0"));
                }
                for c in components {
                    finite("component frequency", c.frequency)?;
                    if !c.amplitude.re.is_finite() || !c.amplitude.im.is_finite() {
                        return Err(Error::invalid("component amplitude must be finite"));
                    }
                }
                for (i, a) in components.iter().enumerate() {
                    for b in &components[i + 1..] {
                        if (a.frequency - b.frequency).abs() < *min_spacing {
                            return Err(Error::invalid(format!(
                                "quasiperiodic frequencies {} and {} are closer than min_spacing {}",
                                a.frequency, b.frequency, min_spacing
                            )));
                        }
                    }
                }
                Ok(())
            }
            ModulationWaveform::Sampled { step, values } => {
                finite("step", *step)?;
                if *step <= 0.0 {
                    return Err(Error::invalid("sampled waveform step must be > 0"));
                }
                if values.len() < 2 {
                    return Err(Error::invalid("sampled waveform needs at least two samples"));
                }
                if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                    return Err(Error::invalid("sampled waveform contains non-finite values"));
                }
                let coarse = values
                    .windows(2)
                    .filter(|w| w[0].norm() > 0.0 && w[1].norm() > 0.0)
                    .any(|w| (w[1] / w[0]).arg().abs() > TAU / 50.0);
                if coarse {
                    log::warn!("sampled waveform step does not resolve its phase (more than 2π/50 per step)");
                }
                Ok(())
            }
        }
    }

    /// `ε(t)`, right-continuous at jumps; zero for `t < 0`.
    pub fn value(&self, t: f64) -> Complex64 {
        if t < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match self {
            ModulationWaveform::Constant { amplitude } => Complex64::new(*amplitude, 0.0),
            ModulationWaveform::Monochromatic { amplitude, shift } => Complex64::from_polar(*amplitude, -shift * t),
            ModulationWaveform::ImpulsivePm { phase, interval } => {
                let (n, _) = cell(t, *interval);
                Complex64::from_polar(1.0, reduce_phase(n as f64 * reduce_phase(*phase)))
            }
            ModulationWaveform::OnOff { on_time, period } => {
                let (_, rem) = cell(t, *period);
                if rem < *on_time || on_time >= period {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            ModulationWaveform::Quasiperiodic { components, .. } => components
                .iter()
                .map(|c| c.amplitude * Complex64::from_polar(1.0, -c.frequency * t))
                .sum(),
            ModulationWaveform::Sampled { step, values } => {
                let x = t / step;
                let k = x.floor() as usize;
                if k + 1 >= values.len() {
                    return if k + 1 == values.len() && x == k as f64 {
                        values[k]
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                }
                let u = x - k as f64;
                values[k] * (1.0 - u) + values[k + 1] * u
            }
        }
    }

    /// Fluence `Q(t) = ∫₀ᵗ |ε|²`.
    pub fn fluence(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            ModulationWaveform::Constant { amplitude } | ModulationWaveform::Monochromatic { amplitude, .. } => {
                amplitude * amplitude * t
            }
            ModulationWaveform::ImpulsivePm { .. } => t,
            ModulationWaveform::OnOff { on_time, period } => {
                let (n, rem) = cell(t, *period);
                n as f64 * on_time + rem.min(*on_time)
            }
            ModulationWaveform::Quasiperiodic { components, .. } => {
                let mut q = 0.0;
                for a in components {
                    for b in components {
                        let w = Complex64::new(0.0, -(a.frequency - b.frequency) * t);
                        q += (a.amplitude * b.amplitude.conj() * t * phi1(w)).re;
                    }
                }
                q.max(0.0)
            }
            ModulationWaveform::Sampled { step, values } => {
                let h = *step;
                let mut q = 0.0;
                for (k, w) in values.windows(2).enumerate() {
                    let start = k as f64 * h;
                    if start >= t {
                        break;
                    }
                    let (a, b) = (w[0], w[1]);
                    let s = (t - start).min(h);
                    let d = (b - a) / h;
                    q += s * a.norm_sqr() + s * s * (a.conj() * d).re + s * s * s * d.norm_sqr() / 3.0;
                }
                q
            }
        }
    }

    /// Finite-time spectrum `ε_t(ω)`.
    pub fn finite_time_spectrum(&self, t: f64, omega: f64) -> Complex64 {
        if t <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let raw = match self {
            ModulationWaveform::Constant { amplitude } => *amplitude * ramp(omega, t),
            ModulationWaveform::Monochromatic { amplitude, shift } => *amplitude * ramp(omega - shift, t),
            ModulationWaveform::ImpulsivePm { phase, interval } => {
                let phi = reduce_phase(*phase);
                let tau = *interval;
                let (n, rem) = cell(t, tau);
                let full = ramp(omega, tau) * geometric(phi + omega * tau, n);
                let tail_phase = reduce_phase(n as f64 * phi) + omega * n as f64 * tau;
                full + Complex64::from_polar(1.0, tail_phase) * ramp(omega, rem)
            }
            ModulationWaveform::OnOff { on_time, period } => {
                let (n, rem) = cell(t, *period);
                let full = ramp(omega, *on_time) * geometric(omega * period, n);
                full + Complex64::from_polar(1.0, omega * n as f64 * period) * ramp(omega, rem.min(*on_time))
            }
            ModulationWaveform::Quasiperiodic { components, .. } => components
                .iter()
                .map(|c| c.amplitude * ramp(omega - c.frequency, t))
                .sum(),
            ModulationWaveform::Sampled { step, values } => {
                let h = *step;
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, w) in values.windows(2).enumerate() {
                    let a = k as f64 * h;
                    if a >= t {
                        break;
                    }
                    let b = (a + h).min(t);
                    let fb = if b < a + h {
                        w[0] + (w[1] - w[0]) * ((b - a) / h)
                    } else {
                        w[1]
                    };
                    acc += linear_segment_fourier(a, b, w[0], fb, omega);
                }
                acc
            }
        };
        raw * INV_SQRT_2PI
    }

    /// Filter function `F_t(ω) = |ε_t(ω)|²/Q(t)`.
    pub fn filter_function(&self, t: f64, omega: f64) -> Result<f64> {
        let q = self.fluence(t);
        if !(q > 0.0) {
            return Err(Error::UndefinedFilter(t));
        }
        Ok(self.finite_time_spectrum(t, omega).norm_sqr() / q)
    }

    /// Jump discontinuities `(s, ε(s+) − ε(s−))` of `ε·1_{[0,t]}`, including
    /// the switch-on at `0` and the cut at `t`.
    pub fn discontinuities(&self, t: f64) -> Vec<(f64, Complex64)> {
        let mut out = vec![(0.0, self.value(0.0))];
        match self {
            ModulationWaveform::ImpulsivePm { phase, interval } => {
                let phi = reduce_phase(*phase);
                let (n, rem) = cell(t, *interval);
                let last = if rem == 0.0 { n.saturating_sub(1) } else { n };
                for k in 1..=last {
                    let before = Complex64::from_polar(1.0, (k - 1) as f64 * phi);
                    let after = Complex64::from_polar(1.0, k as f64 * phi);
                    out.push((k as f64 * interval, after - before));
                }
            }
            ModulationWaveform::OnOff { on_time, period } if on_time < period => {
                let mut k = 0u64;
                loop {
                    let start = k as f64 * period;
                    let stop = start + on_time;
                    if start >= t {
                        break;
                    }
                    if k > 0 {
                        out.push((start, Complex64::new(1.0, 0.0)));
                    }
                    if stop < t * (1.0 - 1e-14) {
                        out.push((stop, Complex64::new(-1.0, 0.0)));
                    }
                    k += 1;
                }
            }
            ModulationWaveform::Sampled { step, values } => {
                let duration = step * (values.len() - 1) as f64;
                if duration < t {
                    out.push((duration, -values[values.len() - 1]));
                }
            }
            _ => {}
        }
        let end = if let ModulationWaveform::OnOff { .. } | ModulationWaveform::ImpulsivePm { .. } = self {
            self.value_left(t)
        } else {
            self.value(t)
        };
        out.push((t, -end));
        out
    }

    /// `ε(t−)`.
    fn value_left(&self, t: f64) -> Complex64 {
        match self {
            ModulationWaveform::ImpulsivePm { phase, interval } => {
                let (n, rem) = cell(t, *interval);
                let k = if rem == 0.0 { n.saturating_sub(1) } else { n };
                Complex64::from_polar(1.0, k as f64 * reduce_phase(*phase))
            }
            ModulationWaveform::OnOff { on_time, period } => {
                let (n, rem) = cell(t, *period);
                let on = if rem == 0.0 { n > 0 && on_time >= period } else { rem <= *on_time };
                Complex64::new(if on { 1.0 } else { 0.0 }, 0.0)
            }
            _ => self.value(t),
        }
    }

    /// Lag overlap `C(u) = ∫_u^t ε*(s) ε(s − u) ds` for `0 ≤ u ≤ t`.
    pub fn lag_overlap(&self, u: f64, t: f64) -> Complex64 {
        let len = t - u;
        if len <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match self {
            ModulationWaveform::Constant { amplitude } => Complex64::new(amplitude * amplitude * len, 0.0),
            ModulationWaveform::Monochromatic { amplitude, shift } => {
                Complex64::from_polar(amplitude * amplitude * len, shift * u)
            }
            ModulationWaveform::Quasiperiodic { components, .. } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in components {
                    for b in components {
                        // ε_a* ε_b e^{iν_b u} ∫_u^t e^{i(ν_a − ν_b)s} ds
                        let d = a.frequency - b.frequency;
                        let pref = a.amplitude.conj() * b.amplitude * Complex64::from_polar(1.0, b.frequency * u);
                        acc += pref * Complex64::from_polar(1.0, d * u) * ramp(d, len);
                    }
                }
                acc
            }
            _ => {
                let bp = self.breakpoints(t);
                let mut pts: Vec<f64> = bp
                    .iter()
                    .copied()
                    .chain(bp.iter().map(|b| b + u))
                    .filter(|&s| s > u && s < t)
                    .collect();
                pts.push(u);
                pts.push(t);
                pts.sort_by(f64::total_cmp);
                pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * t.max(1.0));
                // Piecewise at most quadratic: three-point Gauss–Legendre is exact.
                const X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
                const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
                let mut acc = Complex64::new(0.0, 0.0);
                for p in pts.windows(2) {
                    let (a, b) = (p[0], p[1]);
                    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
                    for (x, w) in X.iter().zip(W) {
                        let s = c + h * x;
                        acc += self.value(s).conj() * self.value(s - u) * (w * h);
                    }
                }
                acc
            }
        }
    }

    /// Times in `(0, t)` where `ε` jumps or has a kink.
    pub fn breakpoints(&self, t: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let push_grid = |out: &mut Vec<f64>, period: f64, offset: f64| {
            let mut k = 0u64;
            loop {
                let s = k as f64 * period + offset;
                if s >= t {
                    break;
                }
                if s > 0.0 {
                    out.push(s);
                }
                k += 1;
            }
        };
        match self {
            ModulationWaveform::ImpulsivePm { interval, .. } => push_grid(&mut out, *interval, 0.0),
            ModulationWaveform::OnOff { on_time, period } => {
                if on_time < period {
                    push_grid(&mut out, *period, 0.0);
                    push_grid(&mut out, *period, *on_time);
                }
            }
            ModulationWaveform::Sampled { step, values } => {
                for k in 1..values.len() {
                    let s = k as f64 * step;
                    if s >= t {
                        break;
                    }
                    out.push(s);
                }
            }
            _ => {}
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// Frequencies in `[lo, hi]` where `|ε_t(ω)|²` develops peaks.
    pub fn spectral_lines(&self, lo: f64, hi: f64) -> Vec<f64> {
        const MAX_LINES: usize = 4096;
        let mut out = Vec::new();
        let mut comb = |offset: f64, spacing: f64| {
            let k0 = ((lo - offset) / spacing).ceil() as i64;
            let k1 = ((hi - offset) / spacing).floor() as i64;
            if k1 >= k0 && ((k1 - k0) as usize) < MAX_LINES {
                for k in k0..=k1 {
                    out.push(offset + k as f64 * spacing);
                }
            }
        };
        match self {
            ModulationWaveform::Constant { .. } => comb(0.0, f64::MAX),
            ModulationWaveform::Monochromatic { shift, .. } => comb(*shift, f64::MAX),
            ModulationWaveform::ImpulsivePm { phase, interval } => comb(-reduce_phase(*phase) / interval, TAU / interval),
            ModulationWaveform::OnOff { period, .. } => comb(0.0, TAU / period),
            ModulationWaveform::Quasiperiodic { components, .. } => {
                out.extend(components.iter().map(|c| c.frequency).filter(|f| *f >= lo && *f <= hi))
            }
            ModulationWaveform::Sampled { .. } => {}
        }
        out
    }

    /// Largest angular frequency present in `ε`, used for step control.
    pub fn max_frequency(&self) -> f64 {
        match self {
            ModulationWaveform::Constant { .. } => 0.0,
            ModulationWaveform::Monochromatic { shift, .. } => shift.abs(),
            ModulationWaveform::ImpulsivePm { interval, .. } => TAU / interval,
            ModulationWaveform::OnOff { on_time, .. } => TAU / on_time,
            ModulationWaveform::Quasiperiodic { components, .. } => {
                components.iter().map(|c| c.frequency.abs()).fold(0.0, f64::max)
            }
            ModulationWaveform::Sampled { step, .. } => PI / step,
        }
    }

    /// Harmonic decomposition with harmonics `k = −K..K` for periodic
    /// waveforms (all components for quasiperiodic ones). Weights are
    /// normalized so that `Σ|λ_k|² = 1` over all harmonics and
    /// `Q(t) ≈ ε_c t` at long times.
    pub fn harmonics(&self, k_max: usize) -> Result<HarmonicDecomposition> {
        if k_max == 0 {
            return Err(Error::invalid("harmonic count K must be >= 1"));
        }
        let ks = -(k_max as i64)..=(k_max as i64);
        let (lines, fluence_rate, spacing) = match self {
            ModulationWaveform::Constant { amplitude } => (
                vec![Harmonic::new(0.0, Complex64::new(1.0, 0.0))],
                amplitude * amplitude,
                f64::INFINITY,
            ),
            ModulationWaveform::Monochromatic { amplitude, shift } => (
                vec![Harmonic::new(*shift, Complex64::new(1.0, 0.0))],
                amplitude * amplitude,
                f64::INFINITY,
            ),
            ModulationWaveform::ImpulsivePm { phase, interval } => {
                let phi = reduce_phase(*phase);
                let lines = ks
                    .map(|k| {
                        let d = TAU * k as f64 - phi;
                        let w = if d == 0.0 {
                            Complex64::new(1.0, 0.0)
                        } else {
                            (Complex64::from_polar(1.0, -phi) - 1.0) / Complex64::new(0.0, d)
                        };
                        Harmonic::new(d / interval, w)
                    })
                    .collect();
                (lines, 1.0, TAU / interval)
            }
            ModulationWaveform::OnOff { on_time, period } => {
                let duty = on_time / period;
                let lines = ks
                    .map(|k| {
                        let nu = TAU * k as f64 / period;
                        let eps = Complex64::from_polar(duty * sinc(0.5 * nu * on_time), 0.5 * nu * on_time);
                        Harmonic::new(nu, eps / duty.sqrt())
                    })
                    .collect();
                (lines, duty, TAU / period)
            }
            ModulationWaveform::Quasiperiodic {
                components,
                min_spacing,
            } => {
                let total: f64 = components.iter().map(|c| c.amplitude.norm_sqr()).sum();
                if total <= 0.0 {
                    return Err(Error::invalid("quasiperiodic waveform has zero amplitude"));
                }
                let lines = components
                    .iter()
                    .map(|c| Harmonic::new(c.frequency, c.amplitude / total.sqrt()))
                    .collect();
                (lines, total, *min_spacing)
            }
            ModulationWaveform::Sampled { .. } => {
                return Err(Error::Unsupported(
                    "harmonic decomposition of a sampled (aperiodic) waveform".into(),
                ))
            }
        };
        Ok(HarmonicDecomposition {
            harmonics: lines,
            fluence_rate,
            min_spacing: spacing,
        })
    }
}

/// One harmonic `(ν_k, λ_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub frequency: f64,
    pub weight: Complex64,
}

impl Harmonic {
    pub fn new(frequency: f64, weight: Complex64) -> Self {
        Harmonic { frequency, weight }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicDecomposition {
    pub harmonics: Vec<Harmonic>,
    /// `ε_c` with `Q(t) ≈ ε_c t`.
    pub fluence_rate: f64,
    /// Minimal spectral interval `Ω` between harmonics.
    pub min_spacing: f64,
}

impl HarmonicDecomposition {
    /// `Σ|λ_k|²` over the retained harmonics.
    pub fn total_weight(&self) -> f64 {
        self.harmonics.iter().map(|h| h.weight.norm_sqr()).sum()
    }

    /// `|λ_k|²` for the harmonic closest to `frequency`.
    pub fn weight_at(&self, frequency: f64) -> Option<f64> {
        self.harmonics
            .iter()
            .min_by(|a, b| (a.frequency - frequency).abs().total_cmp(&(b.frequency - frequency).abs()))
            .map(|h| h.weight.norm_sqr())
    }
}

/// Frame phase rate `δ(t)` (AC-Stark shift for AN, resonant envelope `V_0`
/// for PN); the accumulated phase is `θ(t) = ∫₀ᵗ δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FramePhase {
    Constant { rate: f64 },
    /// `rates[i]` on `[times[i], times[i+1])`; `times[0] = 0`.
    PiecewiseConstant { times: Vec<f64>, rates: Vec<f64> },
    /// Samples `δ(kh)`, linearly interpolated.
    Sampled { step: f64, values: Vec<f64> },
    /// Instantaneous phase kicks of the given area at `t = τ, 2τ, …`.
    Kicks { interval: f64, area: f64 },
}

impl FramePhase {
    pub fn validate(&self) -> Result<()> {
        match self {
            FramePhase::Constant { rate } => {
                if !rate.is_finite() {
                    return Err(Error::invalid("frame phase rate must be finite"));
                }
            }
            FramePhase::PiecewiseConstant { times, rates } => {
                if times.len() != rates.len() + 1 || rates.is_empty() {
                    return Err(Error::invalid("piecewise frame phase needs len(times) = len(rates) + 1 >= 2"));
                }
                if times[0] != 0.0 {
                    return Err(Error::invalid("piecewise frame phase must start at t = 0"));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().chain(rates).any(|v| !v.is_finite()) {
                    return Err(Error::invalid("piecewise frame phase times must be finite and increasing"));
                }
            }
            FramePhase::Sampled { step, values } => {
                if !(step.is_finite() && *step > 0.0) || values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("sampled frame phase needs step > 0 and >= 2 finite samples"));
                }
            }
            FramePhase::Kicks { interval, area } => {
                if !(interval.is_finite() && *interval > 0.0) || !area.is_finite() {
                    return Err(Error::invalid("phase kicks need a finite interval > 0 and finite area"));
                }
            }
        }
        Ok(())
    }

    /// Last time at which the phase is defined.
    pub fn horizon(&self) -> f64 {
        match self {
            FramePhase::Constant { .. } | FramePhase::Kicks { .. } => f64::INFINITY,
            FramePhase::PiecewiseConstant { times, .. } => times[times.len() - 1],
            FramePhase::Sampled { step, values } => step * (values.len() - 1) as f64,
        }
    }

    /// Instantaneous rate `δ(t)` (kicks excluded).
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            FramePhase::Constant { rate } => *rate,
            FramePhase::PiecewiseConstant { times, rates } => {
                let i = times.partition_point(|&s| s <= t);
                rates[i.clamp(1, rates.len()) - 1]
            }
            FramePhase::Sampled { step, values } => {
                let x = (t / step).max(0.0);
                let k = (x.floor() as usize).min(values.len() - 2);
                let u = (x - k as f64).min(1.0);
                values[k] * (1.0 - u) + values[k + 1] * u
            }
            FramePhase::Kicks { .. } => 0.0,
        }
    }

    /// Accumulated phase `θ(t) = ∫₀ᵗ δ`, right-continuous at kicks.
    pub fn phase(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            FramePhase::Constant { rate } => rate * t,
            FramePhase::PiecewiseConstant { times, rates } => {
                let mut acc = 0.0;
                for (i, r) in rates.iter().enumerate() {
                    let (a, b) = (times[i], times[i + 1]);
                    if t <= a {
                        break;
                    }
                    acc += r * (t.min(b) - a);
                }
                let last = times[times.len() - 1];
                if t > last {
                    acc += rates[rates.len() - 1] * (t - last);
                }
                acc
            }
            FramePhase::Sampled { step, values } => {
                let mut acc = 0.0;
                for (k, w) in values.windows(2).enumerate() {
                    let a = k as f64 * step;
                    if t <= a {
                        break;
                    }
                    let s = (t - a).min(*step);
                    acc += s * w[0] + 0.5 * s * s * (w[1] - w[0]) / step;
                }
                acc
            }
            FramePhase::Kicks { interval, area } => cell(t, *interval).0 as f64 * area,
        }
    }

    /// Kick times and areas in `(0, t]`.
    pub fn kicks(&self, t: f64) -> Vec<(f64, f64)> {
        match self {
            FramePhase::Kicks { interval, area } => (1..=cell(t, *interval).0)
                .map(|k| (k as f64 * interval, *area))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Times where the rate jumps or has a kink, in `(0, t)`.
    pub fn breakpoints(&self, t: f64) -> Vec<f64> {
        match self {
            FramePhase::Constant { .. } => Vec::new(),
            FramePhase::PiecewiseConstant { times, .. } => {
                times.iter().copied().filter(|&s| s > 0.0 && s < t).collect()
            }
            FramePhase::Sampled { step, values } => (1..values.len())
                .map(|k| k as f64 * step)
                .filter(|&s| s < t)
                .collect(),
            FramePhase::Kicks { .. } => self.kicks(t).into_iter().map(|(s, _)| s).filter(|&s| s < t).collect(),
        }
    }

    pub fn max_rate(&self) -> f64 {
        match self {
            FramePhase::Constant { rate } => rate.abs(),
            FramePhase::PiecewiseConstant { rates, .. } => rates.iter().map(|r| r.abs()).fold(0.0, f64::max),
            FramePhase::Sampled { values, .. } => values.iter().map(|r| r.abs()).fold(0.0, f64::max),
            FramePhase::Kicks { .. } => 0.0,
        }
    }

    fn is_trivial(&self) -> bool {
        match self {
            FramePhase::Constant { rate } => *rate == 0.0,
            FramePhase::PiecewiseConstant { rates, .. } => rates.iter().all(|&r| r == 0.0),
            FramePhase::Sampled { values, .. } => values.iter().all(|&r| r == 0.0),
            FramePhase::Kicks { area, .. } => reduce_phase(*area) == 0.0,
        }
    }
}

/// Compose `ε(t) = ε̃(t) e^{−iθ(t)}` on `[0, horizon]`. Closed forms are kept
/// when the composition has one; otherwise the result is sampled.
pub fn effective_modulation(
    base: &ModulationWaveform,
    frame: Option<&FramePhase>,
    horizon: f64,
) -> Result<ModulationWaveform> {
    base.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::invalid("horizon must be finite and > 0"));
    }
    let Some(frame) = frame else {
        return Ok(base.clone());
    };
    frame.validate()?;
    if frame.horizon() < horizon * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "frame phase defined up to t = {} but the horizon is {horizon}",
            frame.horizon()
        )));
    }
    if frame.is_trivial() {
        return Ok(base.clone());
    }
    match (base, frame) {
        (ModulationWaveform::Constant { amplitude }, FramePhase::Constant { rate }) => {
            return Ok(ModulationWaveform::Monochromatic {
                amplitude: *amplitude,
                shift: *rate,
            })
        }
        (ModulationWaveform::Monochromatic { amplitude, shift }, FramePhase::Constant { rate }) => {
            return Ok(ModulationWaveform::Monochromatic {
                amplitude: *amplitude,
                shift: shift + rate,
            })
        }
        (ModulationWaveform::Quasiperiodic { components, min_spacing }, FramePhase::Constant { rate }) => {
            return Ok(ModulationWaveform::Quasiperiodic {
                components: components
                    .iter()
                    .map(|c| QuasiComponent {
                        amplitude: c.amplitude,
                        frequency: c.frequency + rate,
                    })
                    .collect(),
                min_spacing: *min_spacing,
            })
        }
        (ModulationWaveform::Constant { amplitude }, FramePhase::Kicks { interval, area }) if *amplitude == 1.0 => {
            return Ok(ModulationWaveform::ImpulsivePm {
                phase: reduce_phase(-area),
                interval: *interval,
            })
        }
        (ModulationWaveform::ImpulsivePm { phase, interval: a }, FramePhase::Kicks { interval: b, area })
            if a == b =>
        {
            return Ok(ModulationWaveform::ImpulsivePm {
                phase: reduce_phase(phase - area),
                interval: *a,
            })
        }
        _ => {}
    }
    // Sampled fallback: resolve the fastest phase rotation and every feature
    // of the base waveform.
    let fastest = base.max_frequency() + frame.max_rate();
    let mut h = horizon / 4096.0;
    if fastest > 0.0 {
        h = h.min(TAU / (50.0 * fastest));
    }
    match frame {
        FramePhase::PiecewiseConstant { times, .. } => {
            let shortest = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            h = h.min(shortest / 20.0);
        }
        FramePhase::Sampled { step, .. } => h = h.min(*step),
        FramePhase::Kicks { interval, .. } => h = h.min(interval / 50.0),
        FramePhase::Constant { .. } => {}
    }
    let n = (horizon / h).ceil() as usize;
    if n > 4_000_000 {
        return Err(Error::Refused(format!(
            "sampled composition would need {n} samples; shorten the horizon"
        )));
    }
    let h = horizon / n as f64;
    let values = (0..=n)
        .map(|k| {
            let t = k as f64 * h;
            base.value(t) * Complex64::from_polar(1.0, -frame.phase(t))
        })
        .collect();
    Ok(ModulationWaveform::Sampled { step: h, values })
}

/// Impulsive-PM filter at `t = nτ` evaluated from its closed form
/// `2sin²(ωτ/2) sin²[n(φ+ωτ)/2] / (π n τ ω² sin²[(φ+ωτ)/2])`.
pub fn pm_filter_closed_form(phi: f64, tau: f64, n: u64, omega: f64) -> f64 {
    let nf = n as f64;
    let a = sin_sq_over_sq(0.5 * omega * tau) * tau * tau / 4.0;
    let b = dirichlet_sq(0.5 * (phi + omega * tau), nf);
    2.0 * a * b / (PI * nf * tau)
}

/// On-off filter at `t = nτ0` evaluated from its closed form
/// `2sin²(ωτ1/2) sin²(nωτ0/2) / (π n τ1 ω² sin²(ωτ0/2))`.
pub fn on_off_filter_closed_form(tau1: f64, tau0: f64, n: u64, omega: f64) -> f64 {
    let nf = n as f64;
    let a = sin_sq_over_sq(0.5 * omega * tau1) * tau1 * tau1 / 4.0;
    let b = dirichlet_sq(0.5 * omega * tau0, nf);
    2.0 * a * b / (PI * nf * tau1)
}

/// `sin²(x)/x²`, by series for `|x| < 1e−6`.
fn sin_sq_over_sq(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 3.0
    } else {
        let s = x.sin() / x;
        s * s
    }
}

/// `sin²(n u)/sin²(u)`, by series near the zeros of `sin u`.
fn dirichlet_sq(u: f64, n: f64) -> f64 {
    let v = u - PI * (u / PI).round();
    if v.abs() < 1e-6 {
        n * n * (1.0 - (n * n - 1.0) * v * v / 3.0)
    } else {
        let r = (n * u).sin() / u.sin();
        r * r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Quad;

    fn numeric_spectrum(w: &ModulationWaveform, t: f64, omega: f64) -> Complex64 {
        let mut pts = vec![0.0];
        pts.extend(w.breakpoints(t));
        pts.push(t);
        let width = if omega != 0.0 { 1.0 / omega.abs() } else { f64::INFINITY };
        let mut fine = Vec::new();
        for p in pts.windows(2) {
            fine.extend(crate::quad::panel_points(p[0], p[1], width.max(1e-3), &[]));
        }
        fine.sort_by(f64::total_cmp);
        fine.dedup();
        let v = Quad::new(1e-12, 1e-13)
            .integrate_breaks(|s: f64| w.value(s) * Complex64::new(0.0, omega * s).exp(), &fine)
            .unwrap()
            .value;
        v * INV_SQRT_2PI
    }

    #[test]
    fn fluence_examples() {
        let pm = ModulationWaveform::ImpulsivePm { phase: PI, interval: 1.0 };
        assert_eq!(pm.fluence(7.0), 7.0);
        let oo = ModulationWaveform::OnOff { on_time: 0.2, period: 1.0 };
        assert!((oo.fluence(5.0) - 1.0).abs() < 1e-12);
        assert_eq!(ModulationWaveform::Constant { amplitude: 0.0 }.fluence(3.0), 0.0);
    }

    #[test]
    fn constant_spectrum_at_zero_frequency() {
        let c = ModulationWaveform::Constant { amplitude: 1.0 };
        let v = c.finite_time_spectrum(3.0, 0.0);
        assert!((v - Complex64::new(3.0 * INV_SQRT_2PI, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let cases = [
            ModulationWaveform::Constant { amplitude: 0.7 },
            ModulationWaveform::Monochromatic { amplitude: 1.0, shift: 2.5 },
            ModulationWaveform::ImpulsivePm { phase: 2.0, interval: 0.7 },
            ModulationWaveform::OnOff { on_time: 0.3, period: 1.1 },
            ModulationWaveform::Quasiperiodic {
                components: vec![
                    QuasiComponent { amplitude: Complex64::new(0.5, 0.2), frequency: -1.0 },
                    QuasiComponent { amplitude: Complex64::new(0.0, 1.0), frequency: 2.0 },
                ],
                min_spacing: 1.0,
            },
        ];
        for w in &cases {
            for &t in &[0.4, 2.1, 5.0] {
                for &om in &[-3.0, 0.0, 0.9, 4.4] {
                    let a = w.finite_time_spectrum(t, om);
                    let b = numeric_spectrum(w, t, om);
                    assert!((a - b).norm() < 1e-9, "{w:?} t={t} ω={om}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn harmonic_examples() {
        let pm = ModulationWaveform::ImpulsivePm { phase: PI, interval: 1.0 };
        let h = pm.harmonics(50).unwrap();
        let four_over_pi2 = 4.0 / (PI * PI);
        assert!((h.weight_at(-PI).unwrap() - four_over_pi2).abs() < 1e-12);
        assert!((h.weight_at(PI).unwrap() - four_over_pi2).abs() < 1e-12);
        let small = ModulationWaveform::ImpulsivePm { phase: 0.1, interval: 1.0 };
        let h = small.harmonics(5).unwrap();
        assert!((h.weight_at(-0.1).unwrap() - (1.0 - 0.01 / 12.0)).abs() < 1e-5);
        let full = ModulationWaveform::OnOff { on_time: 1.0, period: 1.0 };
        let h = full.harmonics(4).unwrap();
        for hk in &h.harmonics {
            let expected = if hk.frequency == 0.0 { 1.0 } else { 0.0 };
            assert!((hk.weight.norm_sqr() - expected).abs() < 1e-24);
        }
    }

    #[test]
    fn sampled_has_no_harmonics() {
        let s = ModulationWaveform::Sampled {
            step: 0.1,
            values: vec![Complex64::new(1.0, 0.0); 4],
        };
        assert!(matches!(s.harmonics(3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn zero_fluence_filter_is_undefined() {
        let c = ModulationWaveform::Constant { amplitude: 0.0 };
        assert!(matches!(c.filter_function(1.0, 0.0), Err(Error::UndefinedFilter(_))));
    }

    #[test]
    fn on_off_validation_names_invariant() {
        let bad = ModulationWaveform::OnOff { on_time: 2.0, period: 1.0 };
        let msg = bad.validate().unwrap_err().to_string();
        assert!(msg.contains("on_time <= period"), "{msg}");
    }

    #[test]
    fn constant_shift_composes_to_monochromatic() {
        let base = ModulationWaveform::Constant { amplitude: 1.0 };
        let w = effective_modulation(&base, Some(&FramePhase::Constant { rate: 0.8 }), 10.0).unwrap();
        assert_eq!(w, ModulationWaveform::Monochromatic { amplitude: 1.0, shift: 0.8 });
        assert!((w.value(2.0) - Complex64::from_polar(1.0, -1.6)).norm() < 1e-15);
    }

    #[test]
    fn kicks_compose_to_impulsive_pm() {
        let base = ModulationWaveform::Constant { amplitude: 1.0 };
        let frame = FramePhase::Kicks { interval: 0.5, area: -1.2 };
        let w = effective_modulation(&base, Some(&frame), 10.0).unwrap();
        assert_eq!(w, ModulationWaveform::ImpulsivePm { phase: 1.2, interval: 0.5 });
    }

    #[test]
    fn piecewise_kicks_sampled_match_pm_pointwise() {
        // Narrow rectangular pulses of area −φ approximate the kicks.
        let (phi, tau, width) = (0.9, 1.0, 1e-3);
        let mut times = vec![0.0];
        let mut rates = Vec::new();
        for k in 1..=5 {
            let c = k as f64 * tau;
            times.push(c - width);
            rates.push(0.0);
            times.push(c);
            rates.push(-phi / width);
        }
        times.push(5.5);
        rates.push(0.0);
        let frame = FramePhase::PiecewiseConstant { times, rates };
        let base = ModulationWaveform::Constant { amplitude: 1.0 };
        let w = effective_modulation(&base, Some(&frame), 5.5).unwrap();
        let pm = ModulationWaveform::ImpulsivePm { phase: phi, interval: tau };
        for &t in &[0.3, 1.5, 2.2, 4.9, 5.4] {
            assert!((w.value(t) - pm.value(t)).norm() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn closed_form_filters_have_finite_limits() {
        let f = pm_filter_closed_form(PI, 1.0, 5, 0.0);
        assert!(f.is_finite() && f >= 0.0);
        let g = on_off_filter_closed_form(0.2, 1.0, 5, TAU);
        assert!(g.is_finite() && g > 0.0);
    }

    #[test]
    fn phase_reduction() {
        assert!((reduce_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((reduce_phase(-PI) - PI).abs() < 1e-12);
        assert!((reduce_phase(0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn lag_overlap_matches_quadrature() {
        let cases = [
            ModulationWaveform::Monochromatic { amplitude: 0.8, shift: 1.3 },
            ModulationWaveform::ImpulsivePm { phase: 2.0, interval: 0.7 },
            ModulationWaveform::OnOff { on_time: 0.3, period: 1.1 },
            ModulationWaveform::Quasiperiodic {
                components: vec![
                    QuasiComponent { amplitude: Complex64::new(0.5, 0.2), frequency: -1.0 },
                    QuasiComponent { amplitude: Complex64::new(0.0, 1.0), frequency: 2.0 },
                ],
                min_spacing: 1.0,
            },
        ];
        let t = 3.3;
        for w in &cases {
            for &u in &[0.0, 0.25, 1.4, 3.0] {
                let mut pts = vec![u, t];
                pts.extend(w.breakpoints(t).into_iter().filter(|&s| s > u));
                pts.extend(w.breakpoints(t).into_iter().map(|s| s + u).filter(|&s| s > u && s < t));
                pts.sort_by(f64::total_cmp);
                let direct = Quad::new(1e-12, 1e-13)
                    .integrate_breaks(|s: f64| w.value(s).conj() * w.value(s - u), &pts)
                    .unwrap()
                    .value;
                assert!((w.lag_overlap(u, t) - direct).norm() < 1e-10, "{w:?} u = {u}");
            }
        }
    }
}
