//! Modulation-dependent decay rates, level shifts and decay exponents.
//!
//! Two independent routes are provided. The time-domain route evaluates the
//! memory convolution
//!
//! ```text
//! R_e/2 + iΔ_e = ε*(t) ∫₀ᵗ du Φ_T(u) ε(t−u) e^{iω_a u}
//! R_g/2 + iΔ_g = ε(t)  ∫₀ᵗ du Φ_T(u) ε*(t−u) e^{−iω_a u}
//! ```
//!
//! (instantaneous rates), and the spectral route evaluates the exponent
//! `J(t) = 2π ∫ G_T(ω_a + ω) |ε_t(ω)|² dω`, whose time derivative is the
//! instantaneous `R_e`. Phase-noise quantities are the amplitude-noise ones
//! at `ω_a = 0` with the phase-noise effective modulation.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{CorrelationTable, ThermalBathSpectrum};
use crate::error::{Error, Result};
use crate::modulation::{HarmonicDecomposition, ModulationWaveform};
use crate::quad::{panel_points, Quad};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Amplitude noise: the kernel carries `e^{±iω_a(t−t')}`.
    Amplitude,
    /// Phase noise in the tilted frame: no carrier factor.
    Phase,
}

impl Regime {
    fn carrier(self, omega_a: f64) -> f64 {
        match self {
            Regime::Amplitude => omega_a,
            Regime::Phase => 0.0,
        }
    }
}

/// Instantaneous rates and shifts at time `t`. For the phase-noise regime
/// `rate_e`/`rate_g` are `R_↑`/`R_↓`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub t: f64,
    pub rate_e: f64,
    pub rate_g: f64,
    pub shift_e: f64,
    pub shift_g: f64,
}

impl RateBreakdown {
    /// `R = (R_e + R_g)/2`.
    pub fn mean_rate(&self) -> f64 {
        0.5 * (self.rate_e + self.rate_g)
    }

    /// `Δ_a = Δ_e − Δ_g`.
    pub fn shift_difference(&self) -> f64 {
        self.shift_e - self.shift_g
    }
}

/// One row of a [`DecoherenceReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherencePoint {
    pub t: f64,
    /// Decay exponent `J(t)`.
    pub exponent: f64,
    /// Fluence `Q(t)`.
    pub fluence: f64,
    /// `R_e(t) = J/Q`; NaN while `Q = 0`.
    pub rate: f64,
    /// Instantaneous `Δ_a(t)` from the convolution route.
    pub shift_difference: f64,
    /// `P_e(t) = e^{−J}` (only meaningful at zero temperature).
    pub survival: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceReport {
    pub beta: f64,
    pub points: Vec<DecoherencePoint>,
}

/// Shared evaluation context: bath, modulation and a correlation table.
pub struct RateContext<'a> {
    bath: &'a ThermalBathSpectrum,
    modulation: &'a ModulationWaveform,
    table: CorrelationTable,
    carrier: f64,
    quad: Quad,
}

impl<'a> RateContext<'a> {
    pub fn new(
        bath: &'a ThermalBathSpectrum,
        modulation: &'a ModulationWaveform,
        omega_a: f64,
        regime: Regime,
        t_max: f64,
    ) -> Result<Self> {
        modulation.validate()?;
        if !omega_a.is_finite() {
            return Err(Error::invalid("ω_a must be finite"));
        }
        if !(t_max.is_finite() && t_max >= 0.0) {
            return Err(Error::invalid("time must be finite and >= 0"));
        }
        Ok(RateContext {
            bath,
            modulation,
            table: bath.correlation_table(t_max)?,
            carrier: regime.carrier(omega_a),
            quad: Quad::new(1e-10, 1e-15),
        })
    }

    fn time_panel_width(&self) -> f64 {
        let scale = self.carrier.abs() + self.bath.oscillation_scale() + self.modulation.max_frequency();
        PI / scale.max(1e-12)
    }

    /// Instantaneous rates and shifts from the memory convolution.
    pub fn convolution_rates(&self, t: f64) -> Result<RateBreakdown> {
        check_time(t)?;
        let zero = RateBreakdown {
            t,
            rate_e: 0.0,
            rate_g: 0.0,
            shift_e: 0.0,
            shift_g: 0.0,
        };
        let now = self.modulation.value(t);
        if t == 0.0 || now.norm() == 0.0 {
            return Ok(zero);
        }
        let w = self.carrier;
        let breaks: Vec<f64> = self.modulation.breakpoints(t).iter().map(|b| t - b).collect();
        let width = self.time_panel_width();
        let e = self.quad.integrate_panels(
            |u: f64| self.table.eval(u) * self.modulation.value(t - u) * Complex64::from_polar(1.0, w * u),
            0.0,
            t,
            width,
            &breaks,
        )?;
        let g = self.quad.integrate_panels(
            |u: f64| self.table.eval(u) * self.modulation.value(t - u).conj() * Complex64::from_polar(1.0, -w * u),
            0.0,
            t,
            width,
            &breaks,
        )?;
        let ke = now.conj() * e.value;
        let kg = now * g.value;
        Ok(RateBreakdown {
            t,
            rate_e: 2.0 * ke.re,
            rate_g: 2.0 * kg.re,
            shift_e: ke.im,
            shift_g: kg.im,
        })
    }

    /// `J(t)` from the time domain: `2 Re ∫₀ᵗ du Φ(u) e^{iω_a u} C(u)` with
    /// the lag overlap `C(u) = ∫_u^t ε*(s) ε(s−u) ds`.
    pub fn convolution_exponent(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let bp = self.modulation.breakpoints(t);
        let mut lags: Vec<f64> = bp.clone();
        if bp.len() <= 3000 {
            for a in &bp {
                lags.push(t - a);
                for b in &bp {
                    if a > b {
                        lags.push(a - b);
                    }
                }
            }
        }
        lags.retain(|&u| u > 0.0 && u < t);
        lags.sort_by(f64::total_cmp);
        lags.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t);
        let w = self.carrier;
        let r = self.quad.integrate_panels(
            |u: f64| self.table.eval(u) * Complex64::from_polar(1.0, w * u) * self.modulation.lag_overlap(u, t),
            0.0,
            t,
            self.time_panel_width(),
            &lags,
        )?;
        Ok(2.0 * r.value.re)
    }

    /// `J(t) = 2π ∫ G_T(ω_a + ω) |ε_t(ω)|² dω`, integrated over the bath
    /// support in panels no wider than `π/t`.
    pub fn spectral_exponent(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let (lo, hi) = self.bath.support();
        let w = self.carrier;
        let mut breaks = self.bath.breakpoints();
        breaks.extend(self.modulation.spectral_lines(lo - w, hi - w).into_iter().map(|nu| nu + w));
        let r = self.quad.integrate_panels(
            |x: f64| {
                let g = self.bath.spectrum(x);
                if g == 0.0 {
                    0.0
                } else {
                    g * self.modulation.finite_time_spectrum(t, x - w).norm_sqr()
                }
            },
            lo,
            hi,
            PI / t,
            &breaks,
        )?;
        Ok(TAU * r.value)
    }

    /// Report row at time `t`.
    pub fn point(&self, t: f64) -> Result<DecoherencePoint> {
        let exponent = self.spectral_exponent(t)?;
        let fluence = self.modulation.fluence(t);
        let rate = if fluence > 0.0 { exponent / fluence } else { f64::NAN };
        let shift = self.convolution_rates(t)?.shift_difference();
        Ok(DecoherencePoint {
            t,
            exponent,
            fluence,
            rate,
            shift_difference: shift,
            survival: (-exponent).exp(),
        })
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("time must be finite and >= 0 (got {t})")))
    }
}

/// Instantaneous rates and shifts at time `t` (time-domain route).
pub fn convolution_rates(
    bath: &ThermalBathSpectrum,
    modulation: &ModulationWaveform,
    omega_a: f64,
    regime: Regime,
    t: f64,
) -> Result<RateBreakdown> {
    RateContext::new(bath, modulation, omega_a, regime, t)?.convolution_rates(t)
}

/// Decay exponents on a time grid (spectral route), with `R_e = J/Q`.
pub fn spectral_exponent(
    bath: &ThermalBathSpectrum,
    modulation: &ModulationWaveform,
    omega_a: f64,
    regime: Regime,
    times: &[f64],
) -> Result<DecoherenceReport> {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    for &t in times {
        check_time(t)?;
    }
    let ctx = RateContext::new(bath, modulation, omega_a, regime, t_max)?;
    let points = times
        .par_iter()
        .map(|&t| ctx.point(t))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecoherenceReport {
        beta: bath.beta,
        points,
    })
}

/// Long-time rate `2π Σ_k |λ_k|² G_T(ω_a + ν_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongTimeRate {
    pub rate: f64,
    /// Whether `Ω t ≫ 1` and `t ≫ t_c` could be confirmed for the horizon.
    pub verified: bool,
    /// `1 − Σ|λ_k|²` over the retained harmonics.
    pub truncation: f64,
}

/// Long-time rate from a harmonic decomposition. When `horizon` is given the
/// long-time conditions `Ωt ≥ 10` and `t ≥ 10 t_c` are checked; failures are
/// logged and flagged rather than treated as errors.
pub fn longtime_rate(
    bath: &ThermalBathSpectrum,
    harmonics: &HarmonicDecomposition,
    omega_a: f64,
    horizon: Option<f64>,
) -> Result<LongTimeRate> {
    if harmonics.harmonics.is_empty() {
        return Err(Error::invalid("empty harmonic decomposition"));
    }
    let mut rate = 0.0;
    for h in &harmonics.harmonics {
        rate += h.weight.norm_sqr() * bath.coupling_spectrum(omega_a + h.frequency)?;
    }
    let verified = match horizon {
        Some(t) => {
            let tc = bath.memory().map(|m| m.correlation_time).unwrap_or(f64::INFINITY);
            harmonics.min_spacing * t >= 10.0 && t >= 10.0 * tc
        }
        None => false,
    };
    if !verified {
        log::warn!("long-time conditions (Ωt ≫ 1, t ≫ t_c) not verified for this rate");
    }
    Ok(LongTimeRate {
        rate: TAU * rate,
        verified,
        truncation: 1.0 - harmonics.total_weight(),
    })
}

/// `P∫ G_T(ω)/(ω_a − ω) dω`, the long-time level shift under constant
/// coupling, evaluated as `∫₀^∞ [G_T(ω_a − x) − G_T(ω_a + x)]/x dx`.
pub fn principal_value_shift(bath: &ThermalBathSpectrum, omega_a: f64) -> Result<f64> {
    let (lo, hi) = bath.support();
    let reach = (omega_a - lo).abs().max((hi - omega_a).abs());
    let mut breaks: Vec<f64> = bath.breakpoints().iter().map(|b| (b - omega_a).abs()).collect();
    breaks.push(0.0);
    let f = |x: f64| {
        if x == 0.0 {
            return 0.0;
        }
        (bath.spectrum(omega_a - x) - bath.spectrum(omega_a + x)) / x
    };
    let mut pts = panel_points(0.0, reach, reach / 64.0, &breaks);
    pts.dedup();
    Ok(Quad::new(1e-10, 1e-15).integrate_breaks(f, &pts)?.value)
}

/// How the exponent of a zero-temperature survival probability is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurvivalScheme {
    /// `P(nτ) = exp[−R_e(nτ) nτ]`.
    Pm { n: u64, interval: f64 },
    /// `P(nτ0) = exp[−R(nτ0) nτ1]`.
    OnOff { n: u64, period: f64, on_time: f64 },
    /// `P(t) = exp[−J(t)]`.
    Generic,
}

/// Survival probability of the excited state for a report row.
pub fn survival_probability(point: &DecoherencePoint, beta: f64, scheme: SurvivalScheme) -> Result<f64> {
    if beta.is_finite() {
        return Err(Error::Unsupported(
            "survival probability needs β = ∞; use the bloch module at finite temperature".into(),
        ));
    }
    let at = |t: f64| -> Result<()> {
        if (point.t - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::invalid(format!("report row is at t = {} but the scheme probes t = {t}", point.t)));
        }
        Ok(())
    };
    let exponent = match scheme {
        SurvivalScheme::Pm { n, interval } => {
            let t = n as f64 * interval;
            at(t)?;
            point.rate * t
        }
        SurvivalScheme::OnOff { n, period, on_time } => {
            at(n as f64 * period)?;
            point.rate * n as f64 * on_time
        }
        SurvivalScheme::Generic => point.exponent,
    };
    if exponent == 0.0 {
        return Ok(1.0);
    }
    Ok((-exponent).exp())
}
