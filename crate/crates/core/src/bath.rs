//! Thermal bath coupling spectra `G_T(ω)` and correlation functions `Φ_T(t)`.
//!
//! Conventions: `Φ_T(t) = ∫ G_T(ω) e^{-iωt} dω` and
//! `G_T(ω) = (2π)^{-1} ∫ Φ_T(t) e^{iωt} dt`. The base spectrum `G0` is
//! one-sided (zero for `ω < 0`); a finite temperature dresses it with the
//! harmonic-oscillator occupation `n̄(ω) = 1/(e^{βω} − 1)`:
//!
//! ```text
//! G_T(ω)  = G0(ω) (n̄(ω) + 1)     ω ≥ 0
//! G_T(−ω) = G0(ω) n̄(ω)
//! ```

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::Quad;
use crate::special::linear_segment_fourier;

/// Half-width multiple used as the effective support of a Lorentzian line.
const LORENTZ_SUPPORT: f64 = 400.0;
/// Exponential-cutoff ohmic spectra are negligible beyond this many cutoffs.
const OHMIC_SUPPORT: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    #[default]
    Exponential,
    Hard,
}

fn default_exponent() -> f64 {
    1.0
}

/// Zero-temperature, one-sided base spectrum `G0(ω)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumModel {
    /// `G0 γ² / ((ω − ω0)² + γ²)` for `ω ≥ 0`.
    Lorentzian { height: f64, center: f64, width: f64 },
    /// `η ωc^{1−s} ω^s × cutoff(ω)`; `s = 1` is the ohmic case.
    Ohmic {
        strength: f64,
        cutoff: f64,
        #[serde(default)]
        cutoff_kind: CutoffKind,
        #[serde(default = "default_exponent")]
        exponent: f64,
    },
    /// Constant `G0` on `[low, high]`.
    FlatBand { height: f64, low: f64, high: f64 },
    /// Linear interpolation of samples, zero outside the sampled range.
    Tabulated { omega: Vec<f64>, values: Vec<f64> },
}

impl SpectrumModel {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be finite")))
            }
        };
        match *self {
            SpectrumModel::Lorentzian { height, center, width } => {
                finite("height", height)?;
                finite("center", center)?;
                finite("width", width)?;
                if height < 0.0 {
                    return Err(Error::invalid("lorentzian height must be >= 0"));
                }
                if width <= 0.0 {
                    return Err(Error::invalid("lorentzian width must be > 0"));
                }
            }
            SpectrumModel::Ohmic {
                strength,
                cutoff,
                exponent,
                ..
            } => {
                finite("strength", strength)?;
                finite("cutoff", cutoff)?;
                finite("exponent", exponent)?;
                if strength < 0.0 {
                    return Err(Error::invalid("ohmic strength must be >= 0"));
                }
                if cutoff <= 0.0 {
                    return Err(Error::invalid("ohmic cutoff must be > 0"));
                }
                if exponent <= 0.0 {
                    return Err(Error::invalid("ohmic exponent must be > 0"));
                }
            }
            SpectrumModel::FlatBand { height, low, high } => {
                finite("height", height)?;
                finite("low", low)?;
                finite("high", high)?;
                if height < 0.0 {
                    return Err(Error::invalid("flat band height must be >= 0"));
                }
                if low < 0.0 || high <= low {
                    return Err(Error::invalid("flat band needs 0 <= low < high"));
                }
            }
            SpectrumModel::Tabulated { ref omega, ref values } => {
                if omega.len() != values.len() {
                    return Err(Error::invalid("tabulated spectrum: omega and values differ in length"));
                }
                if omega.len() < 2 {
                    return Err(Error::invalid("tabulated spectrum needs at least two samples"));
                }
                if omega.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(Error::invalid("tabulated spectrum contains non-finite samples"));
                }
                if omega[0] < 0.0 {
                    return Err(Error::invalid("tabulated spectrum: frequencies must be >= 0"));
                }
                if omega.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("tabulated spectrum: frequencies must be strictly increasing"));
                }
                if values.iter().any(|&v| v < 0.0) {
                    return Err(Error::invalid("tabulated spectrum: values must be >= 0"));
                }
            }
        }
        Ok(())
    }

    /// `G0(ω)`; zero for `ω < 0`.
    pub fn value(&self, w: f64) -> f64 {
        if w < 0.0 {
            return 0.0;
        }
        match *self {
            SpectrumModel::Lorentzian { height, center, width } => {
                let d = w - center;
                height * width * width / (d * d + width * width)
            }
            SpectrumModel::Ohmic {
                strength,
                cutoff,
                cutoff_kind,
                exponent,
            } => {
                let pow = cutoff.powf(1.0 - exponent) * w.powf(exponent);
                match cutoff_kind {
                    CutoffKind::Exponential => strength * pow * (-w / cutoff).exp(),
                    CutoffKind::Hard if w <= cutoff => strength * pow,
                    CutoffKind::Hard => 0.0,
                }
            }
            SpectrumModel::FlatBand { height, low, high } => {
                if w >= low && w <= high {
                    height
                } else {
                    0.0
                }
            }
            SpectrumModel::Tabulated { ref omega, ref values } => interpolate(omega, values, w),
        }
    }

    /// Interval outside of which `G0` is zero or negligible.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            SpectrumModel::Lorentzian { center, width, .. } => (
                (center - LORENTZ_SUPPORT * width).max(0.0),
                (center + LORENTZ_SUPPORT * width).max(0.0),
            ),
            SpectrumModel::Ohmic {
                cutoff, cutoff_kind, ..
            } => match cutoff_kind {
                CutoffKind::Exponential => (0.0, OHMIC_SUPPORT * cutoff),
                CutoffKind::Hard => (0.0, cutoff),
            },
            SpectrumModel::FlatBand { low, high, .. } => (low, high),
            SpectrumModel::Tabulated { ref omega, .. } => (omega[0], omega[omega.len() - 1]),
        }
    }

    /// Points where `G0` has a kink or a jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            SpectrumModel::Lorentzian { center, width, .. } => {
                let mut b = vec![0.0];
                for k in [-10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0] {
                    let x = center + k * width;
                    if x > 0.0 {
                        b.push(x);
                    }
                }
                b
            }
            SpectrumModel::Ohmic {
                cutoff, cutoff_kind, ..
            } => match cutoff_kind {
                CutoffKind::Exponential => vec![0.0, cutoff, 5.0 * cutoff],
                CutoffKind::Hard => vec![0.0, cutoff],
            },
            SpectrumModel::FlatBand { low, high, .. } => vec![low, high],
            SpectrumModel::Tabulated { ref omega, .. } => omega.clone(),
        }
    }

    /// Total spectral mass `∫ G0(ω) dω`.
    pub fn total_mass(&self) -> Result<f64> {
        Ok(match *self {
            SpectrumModel::Lorentzian { height, center, width } => {
                height * width * (FRAC_PI_2 + (center / width).atan())
            }
            SpectrumModel::Ohmic {
                strength,
                cutoff,
                cutoff_kind: CutoffKind::Exponential,
                exponent,
            } => strength * cutoff * cutoff * statrs::function::gamma::gamma(exponent + 1.0),
            SpectrumModel::Ohmic {
                strength,
                cutoff,
                cutoff_kind: CutoffKind::Hard,
                exponent,
            } => strength * cutoff * cutoff / (exponent + 1.0),
            SpectrumModel::FlatBand { height, low, high } => height * (high - low),
            SpectrumModel::Tabulated { ref omega, ref values } => omega
                .windows(2)
                .zip(values.windows(2))
                .map(|(w, v)| 0.5 * (w[1] - w[0]) * (v[0] + v[1]))
                .sum(),
        })
    }

    /// Mass of `G0` on `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> Result<f64> {
        let (a, b) = (a.max(0.0), b.max(0.0));
        if b <= a {
            return Ok(0.0);
        }
        if let SpectrumModel::Lorentzian { height, center, width } = *self {
            return Ok(height * width * (((b - center) / width).atan() - ((a - center) / width).atan()));
        }
        let mut pts = vec![a];
        pts.extend(self.breakpoints().into_iter().filter(|&x| x > a && x < b));
        pts.push(b);
        pts.sort_by(f64::total_cmp);
        Ok(Quad::new(1e-11, 1e-15).integrate_breaks(|w| self.value(w), &pts)?.value)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    let i = match xs.binary_search_by(|p| p.total_cmp(&x)) {
        Ok(i) => return ys[i],
        Err(i) => i,
    };
    let (x0, x1) = (xs[i - 1], xs[i]);
    let (y0, y1) = (ys[i - 1], ys[i]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Bath coupling spectrum at inverse temperature `β` (`β = ∞` is `T = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalBathSpectrum {
    pub model: SpectrumModel,
    pub beta: f64,
}

/// Bath memory (correlation) time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathMemory {
    pub correlation_time: f64,
}

impl ThermalBathSpectrum {
    pub fn new(model: SpectrumModel, beta: f64) -> Result<Self> {
        model.validate()?;
        if beta.is_nan() || beta <= 0.0 {
            return Err(Error::invalid("inverse temperature must be > 0 (use infinity for T = 0)"));
        }
        Ok(ThermalBathSpectrum { model, beta })
    }

    pub fn zero_temperature(model: SpectrumModel) -> Result<Self> {
        Self::new(model, f64::INFINITY)
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }

    /// Mean occupation `n̄(ω)` for `ω > 0`.
    pub fn occupation(&self, w: f64) -> f64 {
        if self.is_zero_temperature() {
            0.0
        } else {
            1.0 / (self.beta * w).exp_m1()
        }
    }

    /// `G_T(ω)`.
    pub fn coupling_spectrum(&self, w: f64) -> Result<f64> {
        if !w.is_finite() {
            return Err(Error::invalid("frequency must be finite"));
        }
        Ok(self.spectrum(w))
    }

    /// Infallible `G_T(ω)` for finite `ω`.
    pub(crate) fn spectrum(&self, w: f64) -> f64 {
        if self.is_zero_temperature() {
            return self.model.value(w);
        }
        if w == 0.0 {
            let g0 = self.model.value(0.0);
            if g0 > 0.0 {
                return f64::INFINITY;
            }
            // G0(ω)/(βω) as ω → 0 for spectra vanishing at the origin.
            let h = 1e-8 * self.scale();
            return self.model.value(h) / (self.beta * h);
        }
        if w > 0.0 {
            self.model.value(w) * (self.occupation(w) + 1.0)
        } else {
            self.model.value(-w) * self.occupation(-w)
        }
    }

    fn scale(&self) -> f64 {
        let (lo, hi) = self.model.support();
        (hi - lo).max(hi.abs()).max(1e-300)
    }

    /// Interval that contains the mass of `G_T`.
    pub fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.model.support();
        if self.is_zero_temperature() {
            (lo, hi)
        } else {
            (-hi, hi)
        }
    }

    /// Kinks and jumps of `G_T`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.model.breakpoints();
        if !self.is_zero_temperature() {
            let neg: Vec<f64> = b.iter().map(|x| -x).collect();
            b.extend(neg);
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Golden-Rule rate `2π G_T(ω_a)`.
    pub fn golden_rule_rate(&self, omega_a: f64) -> Result<f64> {
        Ok(2.0 * PI * self.coupling_spectrum(omega_a)?)
    }

    fn infrared_divergent(&self) -> bool {
        !self.is_zero_temperature() && self.model.value(0.0) > 0.0
    }

    /// `Φ_T(t) = ∫ G_T(ω) e^{-iωt} dω`.
    pub fn correlation_function(&self, t: f64) -> Result<Complex64> {
        if !t.is_finite() {
            return Err(Error::invalid("time must be finite"));
        }
        if t < 0.0 {
            return Ok(self.correlation_function(-t)?.conj());
        }
        if self.is_zero_temperature() {
            return self.correlation_t0(t);
        }
        if self.infrared_divergent() {
            return Err(Error::invalid(
                "thermal correlation function diverges: G0(0+) > 0 at finite temperature",
            ));
        }
        self.correlation_thermal(t)
    }

    fn correlation_t0(&self, t: f64) -> Result<Complex64> {
        let i = Complex64::i();
        match self.model {
            SpectrumModel::Lorentzian { height, center, width } => {
                let full = PI * height * width * (-(i * center + width) * t).exp();
                Ok(full - lorentzian_negative_tail(height, center, width, t)?)
            }
            SpectrumModel::Ohmic {
                strength,
                cutoff,
                cutoff_kind: CutoffKind::Exponential,
                exponent,
            } => {
                let g = statrs::function::gamma::gamma(exponent + 1.0);
                let z = Complex64::new(1.0 / cutoff, t);
                Ok(strength * cutoff.powf(1.0 - exponent) * g / z.powf(exponent + 1.0))
            }
            SpectrumModel::Ohmic {
                strength,
                cutoff,
                cutoff_kind: CutoffKind::Hard,
                exponent,
            } if exponent == 1.0 => Ok(strength * linear_segment_fourier(0.0, cutoff, 0.0.into(), cutoff.into(), -t)),
            SpectrumModel::FlatBand { height, low, high } => {
                if t == 0.0 {
                    return Ok(Complex64::new(height * (high - low), 0.0));
                }
                let k = -i * t;
                Ok(height * ((k * high).exp() - (k * low).exp()) / k)
            }
            SpectrumModel::Tabulated { ref omega, ref values } => Ok(omega
                .windows(2)
                .zip(values.windows(2))
                .map(|(w, v)| linear_segment_fourier(w[0], w[1], v[0].into(), v[1].into(), -t))
                .sum()),
            SpectrumModel::Ohmic { .. } => self.correlation_quadrature(t),
        }
    }

    fn correlation_thermal(&self, t: f64) -> Result<Complex64> {
        // ∫₀^∞ G0(ω) [coth(βω/2) cos ωt − i sin ωt] dω
        let beta = self.beta;
        let model = &self.model;
        let f = move |w: f64| {
            let g = model.value(w);
            if g == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let coth = 1.0 / (0.5 * beta * w).tanh();
            Complex64::new(g * coth * (w * t).cos(), -g * (w * t).sin())
        };
        let (lo, hi) = model.support();
        let width = if t > 0.0 { PI / t } else { f64::INFINITY };
        let r = Quad::default().integrate_panels(f, lo, hi, width, &model.breakpoints())?;
        Ok(r.value)
    }

    fn correlation_quadrature(&self, t: f64) -> Result<Complex64> {
        let model = &self.model;
        let f = move |w: f64| model.value(w) * Complex64::new(0.0, -w * t).exp();
        let (lo, hi) = model.support();
        let width = if t > 0.0 { PI / t } else { f64::INFINITY };
        Ok(Quad::default()
            .integrate_panels(f, lo, hi, width, &model.breakpoints())?
            .value)
    }

    /// Frequency scale on which `Φ_T(t)` varies (beyond a pure carrier).
    pub fn oscillation_scale(&self) -> f64 {
        let (lo, hi) = self.model.support();
        match self.model {
            SpectrumModel::Lorentzian { center, width, .. } => center.abs() + width,
            SpectrumModel::Ohmic { cutoff, .. } => cutoff,
            _ => hi.abs().max(lo.abs()).max(hi - lo),
        }
    }

    /// Interpolating table of `Φ_T` on `[−t_max, t_max]` for repeated
    /// evaluation. Closed forms are evaluated directly; quadrature-backed
    /// parts are sampled on a grid fine enough for four-point interpolation.
    pub fn correlation_table(&self, t_max: f64) -> Result<CorrelationTable> {
        if !(t_max.is_finite() && t_max >= 0.0) {
            return Err(Error::invalid("table horizon must be finite and >= 0"));
        }
        let direct = self.is_zero_temperature()
            && match self.model {
                SpectrumModel::Ohmic { cutoff_kind, exponent, .. } => {
                    cutoff_kind == CutoffKind::Exponential || exponent == 1.0
                }
                SpectrumModel::FlatBand { .. } => true,
                SpectrumModel::Tabulated { ref omega, .. } => omega.len() <= 16,
                SpectrumModel::Lorentzian { .. } => false,
            };
        if direct {
            return Ok(CorrelationTable {
                bath: self.clone(),
                step: 0.0,
                samples: Vec::new(),
                tail_only: false,
                near: None,
            });
        }
        if self.infrared_divergent() {
            return Err(Error::invalid(
                "thermal correlation function diverges: G0(0+) > 0 at finite temperature",
            ));
        }
        let tail_only = self.is_zero_temperature() && matches!(self.model, SpectrumModel::Lorentzian { .. });
        let analytic = matches!(
            self.model,
            SpectrumModel::Ohmic {
                cutoff_kind: CutoffKind::Exponential,
                ..
            }
        );
        let scale = if tail_only {
            self.oscillation_scale()
        } else if analytic {
            // Φ_T is analytic in a strip of half-width ~1/ω_c around the real axis.
            2.0 * self.oscillation_scale()
        } else {
            let (lo, hi) = self.support();
            hi.abs().max(lo.abs()).min(20.0 * self.oscillation_scale())
        };
        let mut step = 0.02 / scale.max(1e-12);
        let n = ((t_max / step).ceil() as usize).max(4) + 3;
        if n > 2_000_000 {
            return Err(Error::Refused(format!("correlation table would need {n} samples")));
        }
        step = (t_max / (n - 3) as f64).max(f64::MIN_POSITIVE);
        let samples = (0..n)
            .map(|k| {
                let t = k as f64 * step;
                if tail_only {
                    let SpectrumModel::Lorentzian { height, center, width } = self.model else {
                        unreachable!()
                    };
                    lorentzian_negative_tail(height, center, width, t)
                } else {
                    self.correlation_function(t)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let near = if tail_only {
            let SpectrumModel::Lorentzian { height, center, width } = self.model else {
                unreachable!()
            };
            let lo = NEAR_LOG_MIN - scale.max(1e-12).ln();
            let hi = (NEAR_STEPS * step).max(f64::MIN_POSITIVE).ln();
            let n = (((hi - lo) / NEAR_LOG_STEP).ceil() as usize).max(1) + 3;
            let origin = lorentzian_negative_tail(height, center, width, 0.0)?;
            let values = (0..n)
                .map(|j| lorentzian_negative_tail(height, center, width, (lo + (j as f64 - 1.0) * NEAR_LOG_STEP).exp()))
                .collect::<Result<Vec<_>>>()?;
            Some(LogGrid { lo, origin, values })
        } else {
            None
        };
        Ok(CorrelationTable {
            bath: self.clone(),
            step,
            samples,
            tail_only,
            near,
        })
    }

    /// Correlation time estimated from the width of the main spectral feature:
    /// the inverse of the smallest detuning from the maximum at which `G_T`
    /// changes by half its peak value.
    pub fn memory(&self) -> Result<BathMemory> {
        let (lo, hi) = self.support();
        let n = 20_001;
        let grid: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&w| self.spectrum(w)).collect();
        let peak = vals.iter().cloned().filter(|v| v.is_finite()).fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(Error::invalid("spectrum vanishes identically"));
        }
        // Centre of the plateau of maximal values.
        let at_peak: Vec<usize> = (0..n).filter(|&k| vals[k] >= peak * (1.0 - 1e-12)).collect();
        let mut center = grid[at_peak[at_peak.len() / 2]];
        if let SpectrumModel::Lorentzian { center: c, .. } = self.model {
            if self.is_zero_temperature() && c >= 0.0 {
                center = c;
            }
        }
        let peak = self.spectrum(center);
        let changed = |d: f64| {
            let a = self.spectrum(center - d);
            let b = self.spectrum(center + d);
            (a - peak).abs() >= 0.5 * peak || (b - peak).abs() >= 0.5 * peak
        };
        let step = (hi - lo) / (n - 1) as f64;
        let mut d_hi = step;
        while !changed(d_hi) {
            d_hi *= 1.5;
            if d_hi > 4.0 * (hi - lo) {
                return Err(Error::numerical("spectrum never changes by half its peak", d_hi));
            }
        }
        let mut d_lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (d_lo + d_hi);
            if changed(mid) {
                d_hi = mid;
            } else {
                d_lo = mid;
            }
            if d_hi - d_lo <= 1e-13 * d_hi {
                break;
            }
        }
        Ok(BathMemory {
            correlation_time: 1.0 / d_hi,
        })
    }
}

/// Cached `Φ_T(t)` for repeated evaluation; see
/// [`ThermalBathSpectrum::correlation_table`].
#[derive(Debug, Clone)]
pub struct CorrelationTable {
    bath: ThermalBathSpectrum,
    step: f64,
    samples: Vec<Complex64>,
    tail_only: bool,
    near: Option<LogGrid>,
}

/// Below this many table steps the Lorentzian tail is interpolated in
/// `ln t`, where its `t ln t` behaviour is smooth.
const NEAR_STEPS: f64 = 32.0;
const NEAR_LOG_STEP: f64 = 0.01;
/// `ln(t·scale)` of the first log-grid node.
const NEAR_LOG_MIN: f64 = -25.0;

#[derive(Debug, Clone)]
struct LogGrid {
    /// `ln t` of node 1; node 0 sits one step below.
    lo: f64,
    origin: Complex64,
    values: Vec<Complex64>,
}

impl LogGrid {
    fn eval(&self, t: f64) -> Complex64 {
        let first = self.lo.exp();
        if t <= first {
            return self.origin + (self.values[1] - self.origin) * (t / first);
        }
        lagrange4(&self.values, (t.ln() - self.lo) / NEAR_LOG_STEP + 1.0)
    }
}

/// Four-point Lagrange interpolation of equally spaced samples at fractional
/// index `x`.
fn lagrange4(samples: &[Complex64], x: f64) -> Complex64 {
    let last = samples.len() - 1;
    let k = (x.floor().max(0.0) as usize).clamp(1, last - 2);
    let u = x - k as f64;
    let p = &samples[k - 1..k + 3];
    let w = [
        -u * (u - 1.0) * (u - 2.0) / 6.0,
        (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
        -(u + 1.0) * u * (u - 2.0) / 2.0,
        (u + 1.0) * u * (u - 1.0) / 6.0,
    ];
    p[0] * w[0] + p[1] * w[1] + p[2] * w[2] + p[3] * w[3]
}

impl CorrelationTable {
    /// Largest `|t|` covered by the table.
    pub fn horizon(&self) -> f64 {
        if self.samples.is_empty() {
            f64::INFINITY
        } else {
            self.step * (self.samples.len() - 3) as f64
        }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        if t < 0.0 {
            return self.eval(-t).conj();
        }
        if self.samples.is_empty() {
            return self.bath.correlation_t0(t).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        }
        let x = t / self.step;
        let interp = match &self.near {
            Some(near) if x < NEAR_STEPS => near.eval(t),
            _ => lagrange4(&self.samples, x),
        };
        if self.tail_only {
            let SpectrumModel::Lorentzian { height, center, width } = self.bath.model else {
                unreachable!()
            };
            PI * height * width * (-(Complex64::i() * center + width) * t).exp() - interp
        } else {
            interp
        }
    }
}

/// `∫_{−∞}^{0} G0 γ²/((ω−ω0)²+γ²) e^{−iωt} dω` for `t ≥ 0`, by rotating the
/// contour of `∫₀^∞ f(u) e^{iut} du` into the upper half plane.
fn lorentzian_negative_tail(height: f64, center: f64, width: f64, t: f64) -> Result<Complex64> {
    let amp = height * width * width;
    if t == 0.0 {
        return Ok(Complex64::new(height * width * (FRAC_PI_2 - (center / width).atan()), 0.0));
    }
    let f = |u: Complex64| amp / ((u + center) * (u + center) + width * width);
    let pole = Complex64::new(-center, width);
    let mut theta = std::f64::consts::FRAC_PI_4;
    if (pole.arg() - theta).abs() < 1e-3 {
        theta *= 0.8;
    }
    let dir = Complex64::from_polar(1.0, theta);
    let decay = t * theta.sin();
    let scale = (1.0 / decay).min(center.abs() + width);
    let i = Complex64::i();
    let ray = Quad::new(1e-12, 1e-16).integrate_semi_infinite(
        |s: f64| {
            let u = dir * s;
            f(u) * (i * u * t).exp() * dir
        },
        0.0,
        scale,
    )?;
    let mut total = ray.value;
    if pole.arg() > 0.0 && pole.arg() < theta {
        let residue = amp * (i * pole * t).exp() / (2.0 * i * width);
        total += 2.0 * PI * i * residue;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentz() -> SpectrumModel {
        SpectrumModel::Lorentzian {
            height: 0.1,
            center: 5.0,
            width: 1.0,
        }
    }

    #[test]
    fn zero_temperature_is_one_sided() {
        for model in [
            lorentz(),
            SpectrumModel::FlatBand {
                height: 1.0,
                low: 0.0,
                high: 2.0,
            },
        ] {
            let b = ThermalBathSpectrum::zero_temperature(model).unwrap();
            assert_eq!(b.coupling_spectrum(-1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn lorentzian_peak_value() {
        let b = ThermalBathSpectrum::zero_temperature(lorentz()).unwrap();
        assert!((b.coupling_spectrum(5.0).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn detailed_balance_example() {
        let b = ThermalBathSpectrum::new(lorentz(), 2.0).unwrap();
        let got = b.coupling_spectrum(-5.0).unwrap();
        // 0.1 · n̄(5) = 0.1 / (e^{10} − 1)
        let expected = 0.1 / (10.0f64.exp() - 1.0);
        assert!((got - expected).abs() < 1e-18);
        assert!((got - 4.54e-6).abs() < 1e-8);
    }

    #[test]
    fn golden_rule_examples() {
        let b = ThermalBathSpectrum::zero_temperature(lorentz()).unwrap();
        assert!((b.golden_rule_rate(5.0).unwrap() - 0.2 * PI).abs() < 1e-14);
        assert_eq!(b.golden_rule_rate(-3.0).unwrap(), 0.0);
        let flat = ThermalBathSpectrum::zero_temperature(SpectrumModel::FlatBand {
            height: 1.0,
            low: 0.0,
            high: 2.0,
        })
        .unwrap();
        assert_eq!(flat.golden_rule_rate(3.0).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_frequency_rejected() {
        let b = ThermalBathSpectrum::zero_temperature(lorentz()).unwrap();
        assert!(matches!(b.coupling_spectrum(f64::NAN), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn flat_band_correlation_closed_form() {
        let b = ThermalBathSpectrum::zero_temperature(SpectrumModel::FlatBand {
            height: 1.0,
            low: 0.0,
            high: 2.0,
        })
        .unwrap();
        for &t in &[0.0, 0.3, 1.0, 7.5] {
            let got = b.correlation_function(t).unwrap();
            let expected = 2.0 * Complex64::new(0.0, -t).exp() * crate::special::sinc(t);
            assert!((got - expected).norm() < 1e-13, "t = {t}");
        }
    }

    #[test]
    fn lorentzian_correlation_matches_direct_quadrature() {
        let b = ThermalBathSpectrum::zero_temperature(lorentz()).unwrap();
        for &t in &[0.0, 0.05, 1.0, 3.0] {
            let got = b.correlation_function(t).unwrap();
            // Direct transform of the one-sided Lorentzian, with its 1/ω²
            // tail beyond the cut integrated analytically.
            let cut = 20_000.0;
            let direct = Quad::new(1e-12, 1e-16)
                .integrate_panels(
                    |w: f64| b.spectrum(w) * Complex64::new(0.0, -w * t).exp(),
                    0.0,
                    cut,
                    if t > 0.0 { 1.0 / t } else { 50.0 },
                    &[5.0],
                )
                .unwrap()
                .value;
            let tail = if t == 0.0 {
                Complex64::new(0.1 / cut, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            assert!((got - (direct + tail)).norm() < 2e-5 * got.norm(), "t = {t}: {got} vs {direct}");
        }
    }

    #[test]
    fn lorentzian_closed_form_core_term() {
        // At t = 1 the full-line closed form is π·0.1·e^{-5i-1}; the one-sided
        // spectrum removes the ω < 0 tail, a few-percent correction here.
        let b = ThermalBathSpectrum::zero_temperature(lorentz()).unwrap();
        let full = PI * 0.1 * Complex64::new(-1.0, -5.0).exp();
        let got = b.correlation_function(1.0).unwrap();
        let tail = lorentzian_negative_tail(0.1, 5.0, 1.0, 1.0).unwrap();
        assert!((got + tail - full).norm() < 1e-14);
        assert!(tail.norm() < 0.1 * full.norm());
    }

    #[test]
    fn thermal_infrared_divergence_is_reported() {
        let b = ThermalBathSpectrum::new(lorentz(), 1.0).unwrap();
        assert!(b.correlation_function(1.0).is_err());
    }

    #[test]
    fn lorentzian_memory_time() {
        let b = ThermalBathSpectrum::zero_temperature(SpectrumModel::Lorentzian {
            height: 1.0,
            center: 10.0,
            width: 0.5,
        })
        .unwrap();
        let tc = b.memory().unwrap().correlation_time;
        assert!((tc - 2.0).abs() < 1e-9, "{tc}");
    }

    #[test]
    fn tabulated_validation() {
        let bad = SpectrumModel::Tabulated {
            omega: vec![0.0, 1.0, 1.0],
            values: vec![0.0, 1.0, 0.0],
        };
        assert!(bad.validate().is_err());
        let neg = SpectrumModel::Tabulated {
            omega: vec![0.0, 1.0],
            values: vec![0.0, -1.0],
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn tabulated_transform_is_exact_for_triangle() {
        let tri = SpectrumModel::Tabulated {
            omega: vec![0.0, 1.0, 2.0],
            values: vec![0.0, 1.0, 0.0],
        };
        let b = ThermalBathSpectrum::zero_temperature(tri).unwrap();
        for &t in &[0.0, 0.004, 0.5, 3.0] {
            let got = b.correlation_function(t).unwrap();
            // Triangle: e^{-it} sinc²(t/2).
            let s = crate::special::sinc(0.5 * t);
            let expected = Complex64::new(0.0, -t).exp() * s * s;
            assert!((got - expected).norm() < 1e-13, "t = {t}");
        }
    }

    #[test]
    fn correlation_table_interpolates() {
        let b = ThermalBathSpectrum::zero_temperature(lorentz()).unwrap();
        let table = b.correlation_table(4.0).unwrap();
        for &t in &[0.0, 1e-14, 3e-11, 2e-6, 0.0004, 0.013, 0.05, 0.1, 0.11, 0.77, -1.3, 3.99] {
            let exact = b.correlation_function(t).unwrap();
            assert!((table.eval(t) - exact).norm() < 1e-10, "t = {t}: {}", (table.eval(t) - exact).norm());
        }
        let ohm = ThermalBathSpectrum::new(
            SpectrumModel::Ohmic {
                strength: 0.05,
                cutoff: 2.0,
                cutoff_kind: CutoffKind::Exponential,
                exponent: 1.0,
            },
            3.0,
        )
        .unwrap();
        let table = ohm.correlation_table(2.0).unwrap();
        for &t in &[0.0, 0.003, 0.1, 0.4567, 1.234, 1.9] {
            let exact = ohm.correlation_function(t).unwrap();
            assert!((table.eval(t) - exact).norm() < 1e-7 * exact.norm(), "t = {t}");
        }
    }
}
