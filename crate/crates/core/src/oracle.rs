//! Exact few-mode spin-boson reference simulations used to check the
//! second-order predictions at weak coupling.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::bath::ThermalBathSpectrum;
use crate::bloch::ControlProgram;
use crate::error::{Error, Result};
use crate::modulation::ModulationWaveform;
use crate::ode::{self, Tolerance};
use crate::quad::Quad;
use crate::rates::RateContext;

/// Largest Hilbert-space dimension the full PN integration accepts.
pub const MAX_DIMENSION: usize = 100_000;
/// Largest mode count for the full PN integration.
pub const MAX_FULL_MODES: usize = 6;

const ORACLE_TOLERANCE: Tolerance = Tolerance { rel: 1e-10, abs: 1e-12 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleMode {
    pub frequency: f64,
    /// Real coupling amplitude `κ_λ`.
    pub coupling: f64,
}

/// Finite set of harmonic modes standing in for a continuous bath.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizedBath {
    pub modes: Vec<OracleMode>,
    /// Fock-space truncation per mode (used by the full PN integration).
    pub n_max: usize,
    pub beta: f64,
    /// `2π / (smallest mode spacing)`.
    pub recurrence_time: f64,
    /// Relative ℓ¹ distance between the cell histogram of the modes and
    /// `G0` on the window.
    pub l1_error: f64,
    /// Cell edges; mode `λ` represents the mass on `[edges[λ], edges[λ+1]]`.
    pub edges: Vec<f64>,
}

/// Equal-weight discretization: mode frequencies at the mass midpoints of
/// `M` cells of equal `G0` mass, `κ_λ² = mass/M`.
pub fn discretize(
    bath: &ThermalBathSpectrum,
    modes: usize,
    window: Option<(f64, f64)>,
    n_max: usize,
) -> Result<DiscretizedBath> {
    if modes == 0 {
        return Err(Error::invalid("mode count must be >= 1"));
    }
    if n_max == 0 {
        return Err(Error::invalid("Fock truncation n_max must be >= 1"));
    }
    let model = &bath.model;
    let (lo, hi) = window.unwrap_or_else(|| model.support());
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::invalid("discretization window must be a finite, non-empty interval"));
    }
    let total = model.total_mass()?;
    let mass = model.mass_between(lo, hi)?;
    if !(total > 0.0) || !(mass > 0.0) {
        return Err(Error::invalid("spectrum has zero mass on the window"));
    }
    if mass < 0.99 * total {
        return Err(Error::invalid(format!(
            "window [{lo}, {hi}] holds only {:.2}% of the spectral mass (>= 99% required)",
            100.0 * mass / total
        )));
    }
    let cumulative = |w: f64| model.mass_between(lo, w);
    let invert = |target: f64| -> Result<f64> {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if cumulative(m)? < target {
                a = m;
            } else {
                b = m;
            }
            if b - a <= 1e-14 * (1.0 + m.abs()) {
                break;
            }
        }
        Ok(0.5 * (a + b))
    };
    let mut edges = Vec::with_capacity(modes + 1);
    edges.push(lo);
    for k in 1..modes {
        edges.push(invert(mass * k as f64 / modes as f64)?);
    }
    edges.push(hi);
    let weight = (mass / modes as f64).sqrt();
    let list = (0..modes)
        .map(|k| {
            Ok(OracleMode {
                frequency: invert(mass * (k as f64 + 0.5) / modes as f64)?,
                coupling: weight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let spacing = list
        .windows(2)
        .map(|w| w[1].frequency - w[0].frequency)
        .fold(f64::INFINITY, f64::min);
    let recurrence_time = if spacing.is_finite() && spacing > 0.0 {
        TAU / spacing
    } else {
        f64::INFINITY
    };
    let quad = Quad::new(1e-8, 1e-14);
    let mut l1 = 0.0;
    for w in edges.windows(2) {
        let density = mass / modes as f64 / (w[1] - w[0]);
        let mut pts = vec![w[0]];
        pts.extend(model.breakpoints().into_iter().filter(|&x| x > w[0] && x < w[1]));
        pts.push(w[1]);
        pts.sort_by(f64::total_cmp);
        l1 += quad.integrate_breaks(|x| (model.value(x) - density).abs(), &pts)?.value;
    }
    Ok(DiscretizedBath {
        modes: list,
        n_max,
        beta: bath.beta,
        recurrence_time,
        l1_error: l1 / mass,
        edges,
    })
}

impl DiscretizedBath {
    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }

    /// Default horizon `min(0.4·recurrence, 10·t_c)`.
    pub fn default_horizon(&self, bath: &ThermalBathSpectrum) -> Result<f64> {
        Ok((0.4 * self.recurrence_time).min(10.0 * bath.memory()?.correlation_time))
    }

    fn check_horizon(&self, t_final: f64) -> Result<()> {
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(Error::invalid("t_final must be finite and >= 0"));
        }
        if t_final > self.recurrence_time {
            return Err(Error::Refused(format!(
                "t_final = {t_final} exceeds the recurrence time {:.6} of the {}-mode bath; \
                 increase the mode count or shorten the horizon",
                self.recurrence_time,
                self.modes.len()
            )));
        }
        Ok(())
    }
}

/// Scalar trajectory of an oracle run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

fn output_times(t_final: f64, samples: usize) -> Result<Vec<f64>> {
    if samples < 2 {
        return Err(Error::invalid("at least two output samples are required"));
    }
    Ok((0..samples)
        .map(|k| t_final * k as f64 / (samples - 1) as f64)
        .collect())
}

/// Segment boundaries: output times plus modulation breakpoints.
fn stops(times: &[f64], extra: Vec<f64>, t_final: f64) -> Vec<f64> {
    let mut s: Vec<f64> = times.to_vec();
    s.extend(extra.into_iter().filter(|&x| x > 0.0 && x < t_final));
    s.sort_by(f64::total_cmp);
    s.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_final.max(1.0));
    s
}

/// Excited-state survival `P_e(t)` for `|e⟩ ⊗ vacuum` at `T = 0`, from the
/// single-excitation amplitudes of the excitation-conserving coupling
/// `ε*(t)|e⟩⟨g| Σ κ_λ a_λ + h.c.` in the interaction picture.
pub fn exact_an_t0(db: &DiscretizedBath, program: &ControlProgram, t_final: f64, samples: usize) -> Result<OracleTrajectory> {
    if !matches!(program, ControlProgram::Amplitude { .. }) {
        return Err(Error::invalid("exact_an_t0 needs an amplitude-noise program"));
    }
    if !db.is_zero_temperature() {
        return Err(Error::Unsupported(
            "the amplitude-noise oracle covers T = 0 only".into(),
        ));
    }
    db.check_horizon(t_final)?;
    let times = output_times(t_final, samples)?;
    let eps = program.effective_modulation(t_final.max(f64::MIN_POSITIVE))?;
    let omega_a = program.omega_a();
    let m = db.modes.len();
    let detuning: Vec<f64> = db.modes.iter().map(|md| omega_a - md.frequency).collect();
    let kappa: Vec<f64> = db.modes.iter().map(|md| md.coupling).collect();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let e = eps.value(t);
        let be = Complex64::new(y[0], y[1]);
        let mut sum = Complex64::new(0.0, 0.0);
        for l in 0..m {
            let bl = Complex64::new(y[2 + 2 * l], y[3 + 2 * l]);
            let ph = Complex64::from_polar(1.0, detuning[l] * t);
            sum += kappa[l] * ph * bl;
            let d = Complex64::new(0.0, -1.0) * e * kappa[l] * ph.conj() * be;
            dy[2 + 2 * l] = d.re;
            dy[3 + 2 * l] = d.im;
        }
        let d = Complex64::new(0.0, -1.0) * e.conj() * sum;
        dy[0] = d.re;
        dy[1] = d.im;
        Ok(())
    };
    let mut y = vec![0.0; 2 * (m + 1)];
    y[0] = 1.0;
    let mut values = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut h = 0.0;
    let mut next = 0;
    for stop in stops(&times, eps.breakpoints(t_final), t_final) {
        ode::integrate_slice(&rhs, t, &mut y, stop, ORACLE_TOLERANCE, &mut h)?;
        t = stop;
        while next < times.len() && times[next] <= t + 1e-12 * t_final.max(1.0) {
            values.push(y[0] * y[0] + y[1] * y[1]);
            next += 1;
        }
    }
    while values.len() < times.len() {
        values.push(y[0] * y[0] + y[1] * y[1]);
    }
    Ok(OracleTrajectory { times, values })
}

fn is_real(w: &ModulationWaveform) -> bool {
    match w {
        ModulationWaveform::Constant { .. } | ModulationWaveform::OnOff { .. } => true,
        ModulationWaveform::ImpulsivePm { phase, .. } => {
            let r = crate::modulation::reduce_phase(*phase).abs();
            r < 1e-12 || (r - PI).abs() < 1e-12
        }
        ModulationWaveform::Sampled { values, .. } => values.iter().all(|v| v.im.abs() <= 1e-12 * v.norm().max(1e-300)),
        _ => false,
    }
}

fn real_envelope(program: &ControlProgram) -> Result<&ModulationWaveform> {
    let env = program.envelope();
    if is_real(env) {
        Ok(env)
    } else {
        Err(Error::Unsupported(
            "the phase-noise oracle needs a real envelope (constant, on_off or real samples)".into(),
        ))
    }
}

/// True when the drive has no continuous `V_0` and every kick is a sign
/// flip (area 0 or π mod 2π), so the independent-boson closed form applies.
fn pure_dephasing(program: &ControlProgram, t_final: f64) -> bool {
    program.frame().is_none_or(|f| {
        f.max_rate() == 0.0
            && f.kicks(t_final).iter().all(|&(_, a)| {
                let r = crate::modulation::reduce_phase(a).abs();
                r < 1e-12 || (r - PI).abs() < 1e-12
            })
    })
}

/// `|ρ_eg(t)|` for `(|e⟩+|g⟩)/√2` under `H = (V_0/2)σ_x + ε̃(t) σ_z B + H_B`
/// (frame rotating at `ω_a`). Uses the independent-boson closed form when
/// the drive reduces to sign flips and the full truncated Hilbert space
/// otherwise.
pub fn exact_pn(db: &DiscretizedBath, program: &ControlProgram, t_final: f64, samples: usize) -> Result<OracleTrajectory> {
    if pure_dephasing(program, t_final) {
        pn_closed_form(db, program, t_final, samples)
    } else {
        pn_full_integration(db, program, t_final, samples)
    }
}

/// Independent-boson dephasing factor for the sign-flipped coupling
/// `f(s) = ε̃(s)·(±1)`:
/// `|ρ_eg(t)| = ½ exp[−Σ_λ 2κ_λ² coth(βω_λ/2) |∫₀ᵗ f(s) e^{iω_λ s} ds|²]`.
pub fn pn_closed_form(db: &DiscretizedBath, program: &ControlProgram, t_final: f64, samples: usize) -> Result<OracleTrajectory> {
    if !matches!(program, ControlProgram::Phase { .. }) {
        return Err(Error::invalid("exact_pn needs a phase-noise program"));
    }
    real_envelope(program)?;
    if !pure_dephasing(program, t_final) {
        return Err(Error::invalid("the closed form needs V_0 = 0 and kicks of area 0 or π"));
    }
    db.check_horizon(t_final)?;
    let times = output_times(t_final, samples)?;
    let f = program.effective_modulation(t_final.max(f64::MIN_POSITIVE))?;
    let values = times
        .iter()
        .map(|&t| {
            let exponent: f64 = db
                .modes
                .iter()
                .map(|md| {
                    let amp = f.finite_time_spectrum(t, md.frequency).norm_sqr() * TAU;
                    2.0 * md.coupling * md.coupling * coth_half(db.beta, md.frequency) * amp
                })
                .sum();
            0.5 * (-exponent).exp()
        })
        .collect();
    Ok(OracleTrajectory { times, values })
}

fn coth_half(beta: f64, w: f64) -> f64 {
    if beta.is_infinite() {
        1.0
    } else {
        1.0 / (0.5 * beta * w).tanh()
    }
}

/// Thermal occupation weights of Fock configurations, truncated at `n_max`
/// per mode and renormalized.
fn thermal_configurations(db: &DiscretizedBath) -> Vec<(usize, f64)> {
    let m = db.modes.len();
    let base = db.n_max + 1;
    let size = base.pow(m as u32);
    if db.is_zero_temperature() {
        return vec![(0, 1.0)];
    }
    let probs: Vec<Vec<f64>> = db
        .modes
        .iter()
        .map(|md| {
            let x = (-db.beta * md.frequency).exp();
            let raw: Vec<f64> = (0..base).map(|n| x.powi(n as i32)).collect();
            let z: f64 = raw.iter().sum();
            raw.into_iter().map(|p| p / z).collect()
        })
        .collect();
    let mut out = Vec::new();
    for idx in 0..size {
        let mut rest = idx;
        let mut p = 1.0;
        for pl in probs.iter().rev() {
            p *= pl[rest % base];
            rest /= base;
        }
        if p > 1e-14 {
            out.push((idx, p));
        }
    }
    out
}

/// Full Schrödinger integration in the truncated space
/// `{e, g} ⊗ ⊗_λ {|0⟩ … |n_max⟩}`, averaged over thermal Fock configurations.
pub fn pn_full_integration(
    db: &DiscretizedBath,
    program: &ControlProgram,
    t_final: f64,
    samples: usize,
) -> Result<OracleTrajectory> {
    if !matches!(program, ControlProgram::Phase { .. }) {
        return Err(Error::invalid("exact_pn needs a phase-noise program"));
    }
    let env = real_envelope(program)?.clone();
    let m = db.modes.len();
    if m > MAX_FULL_MODES {
        return Err(Error::Refused(format!(
            "full integration supports at most {MAX_FULL_MODES} modes (got {m})"
        )));
    }
    let base = db.n_max + 1;
    let bath_dim = (base as f64).powi(m as i32);
    if 2.0 * bath_dim > MAX_DIMENSION as f64 {
        return Err(Error::Refused(format!(
            "Hilbert-space dimension 2·{base}^{m} = {} exceeds {MAX_DIMENSION}",
            2.0 * bath_dim
        )));
    }
    db.check_horizon(t_final)?;
    let bath_dim = bath_dim as usize;
    let times = output_times(t_final, samples)?;
    let frame = program.frame().cloned();
    let kicks = frame.as_ref().map(|f| f.kicks(t_final)).unwrap_or_default();
    let mut extra = env.breakpoints(t_final);
    if let Some(f) = &frame {
        extra.extend(f.breakpoints(t_final));
    }
    extra.extend(kicks.iter().map(|k| k.0));
    let segments = stops(&times, extra, t_final);

    // Digits of each Fock configuration, most significant = mode 0.
    let digits: Vec<Vec<usize>> = (0..bath_dim)
        .map(|idx| {
            let mut d = vec![0; m];
            let mut rest = idx;
            for slot in d.iter_mut().rev() {
                *slot = rest % base;
                rest /= base;
            }
            d
        })
        .collect();
    let stride: Vec<usize> = (0..m).map(|l| base.pow((m - 1 - l) as u32)).collect();
    let energy: Vec<f64> = digits
        .iter()
        .map(|d| d.iter().zip(&db.modes).map(|(&n, md)| n as f64 * md.frequency).sum())
        .collect();

    // ψ layout: [e-block | g-block], each of length bath_dim, as (re, im) pairs.
    let dim = 2 * bath_dim;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let v0 = frame.as_ref().map_or(0.0, |f| f.rate(t));
        let e = env.value(t).re;
        for s in 0..2 {
            let sign = if s == 0 { 1.0 } else { -1.0 };
            for idx in 0..bath_dim {
                let row = s * bath_dim + idx;
                let other = (1 - s) * bath_dim + idx;
                let psi = |r: usize| Complex64::new(y[2 * r], y[2 * r + 1]);
                let mut h = psi(row) * energy[idx] + psi(other) * (0.5 * v0);
                if e != 0.0 {
                    let mut b = Complex64::new(0.0, 0.0);
                    for l in 0..m {
                        let n = digits[idx][l];
                        let k = db.modes[l].coupling;
                        if n < db.n_max {
                            // a_l raises the ket index: ⟨n|a|n+1⟩ = √(n+1).
                            b += psi(row + stride[l]) * (k * ((n + 1) as f64).sqrt());
                        }
                        if n > 0 {
                            b += psi(row - stride[l]) * (k * (n as f64).sqrt());
                        }
                    }
                    h += b * (sign * e);
                }
                let d = Complex64::new(0.0, -1.0) * h;
                dy[2 * row] = d.re;
                dy[2 * row + 1] = d.im;
            }
        }
        Ok(())
    };

    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut rho = vec![Complex64::new(0.0, 0.0); times.len()];
    for (config, weight) in thermal_configurations(db) {
        let mut y = vec![0.0; 2 * dim];
        y[2 * config] = s2;
        y[2 * (bath_dim + config)] = s2;
        let mut t = 0.0;
        let mut h = 0.0;
        let mut next = 0;
        let mut kick_iter = kicks.iter().peekable();
        for &stop in &segments {
            ode::integrate_slice(&rhs, t, &mut y, stop, ORACLE_TOLERANCE, &mut h)?;
            t = stop;
            while let Some(&&(tk, area)) = kick_iter.peek() {
                if tk > t + 1e-12 * t_final.max(1.0) {
                    break;
                }
                apply_sigma_x_kick(&mut y, bath_dim, area);
                kick_iter.next();
            }
            while next < times.len() && times[next] <= t + 1e-12 * t_final.max(1.0) {
                let mut c = Complex64::new(0.0, 0.0);
                for idx in 0..bath_dim {
                    let pe = Complex64::new(y[2 * idx], y[2 * idx + 1]);
                    let pg = Complex64::new(y[2 * (bath_dim + idx)], y[2 * (bath_dim + idx) + 1]);
                    c += pe * pg.conj();
                }
                rho[next] += c * weight;
                next += 1;
            }
        }
    }
    Ok(OracleTrajectory {
        times,
        values: rho.iter().map(|c| c.norm()).collect(),
    })
}

/// `exp(−i(A/2)σ_x)` on the qubit factor.
fn apply_sigma_x_kick(y: &mut [f64], bath_dim: usize, area: f64) {
    let (c, s) = ((0.5 * area).cos(), (0.5 * area).sin());
    for idx in 0..bath_dim {
        let pe = Complex64::new(y[2 * idx], y[2 * idx + 1]);
        let pg = Complex64::new(y[2 * (bath_dim + idx)], y[2 * (bath_dim + idx) + 1]);
        let ne = pe * c + Complex64::new(0.0, -s) * pg;
        let ng = pg * c + Complex64::new(0.0, -s) * pe;
        y[2 * idx] = ne.re;
        y[2 * idx + 1] = ne.im;
        y[2 * (bath_dim + idx)] = ng.re;
        y[2 * (bath_dim + idx) + 1] = ng.im;
    }
}

/// One row of an oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub t: f64,
    pub exact: f64,
    pub predicted: f64,
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub rows: Vec<ComparisonRow>,
    pub max_relative_deviation: f64,
}

fn compare(exact: OracleTrajectory, predicted: impl Fn(f64) -> Result<f64>) -> Result<OracleComparison> {
    let rows = exact
        .times
        .iter()
        .zip(&exact.values)
        .map(|(&t, &x)| {
            let p = predicted(t)?;
            Ok(ComparisonRow {
                t,
                exact: x,
                predicted: p,
                relative_deviation: if x != 0.0 { (x - p).abs() / x.abs() } else { (x - p).abs() },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_relative_deviation = rows.iter().map(|r| r.relative_deviation).fold(0.0, f64::max);
    Ok(OracleComparison {
        rows,
        max_relative_deviation,
    })
}

/// `P_e` from the oracle against `exp(−J(t))` of the continuous bath.
pub fn compare_an(
    bath: &ThermalBathSpectrum,
    db: &DiscretizedBath,
    program: &ControlProgram,
    t_final: f64,
    samples: usize,
) -> Result<OracleComparison> {
    let exact = exact_an_t0(db, program, t_final, samples)?;
    let eps = program.effective_modulation(t_final.max(f64::MIN_POSITIVE))?;
    let ctx = RateContext::new(bath, &eps, program.omega_a(), program.regime(), t_final)?;
    compare(exact, |t| Ok((-ctx.spectral_exponent(t)?).exp()))
}

/// `|ρ_eg|` from the oracle against `½ exp(−2J(t))`, the second-order
/// dephasing of a pure-dephasing program.
pub fn compare_pn(
    bath: &ThermalBathSpectrum,
    db: &DiscretizedBath,
    program: &ControlProgram,
    t_final: f64,
    samples: usize,
) -> Result<OracleComparison> {
    if !pure_dephasing(program, t_final) {
        return Err(Error::Unsupported(
            "the dephasing prediction needs V_0 = 0 (kicks of area 0 or π allowed)".into(),
        ));
    }
    let exact = exact_pn(db, program, t_final, samples)?;
    let eps = program.effective_modulation(t_final.max(f64::MIN_POSITIVE))?;
    let ctx = RateContext::new(bath, &eps, program.omega_a(), program.regime(), t_final)?;
    compare(exact, |t| Ok(0.5 * (-2.0 * ctx.spectral_exponent(t)?).exp()))
}

/// Default oracle scale for the single-excitation sector.
pub const DEFAULT_MODES: usize = 128;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::SpectrumModel;
    use crate::modulation::FramePhase;

    fn lorentz(height: f64) -> ThermalBathSpectrum {
        ThermalBathSpectrum::zero_temperature(SpectrumModel::Lorentzian {
            height,
            center: 5.0,
            width: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn single_mode_of_narrow_band() {
        let bath = ThermalBathSpectrum::zero_temperature(SpectrumModel::FlatBand {
            height: 2.0,
            low: 3.0,
            high: 3.01,
        })
        .unwrap();
        let db = discretize(&bath, 1, None, 1).unwrap();
        assert_eq!(db.modes.len(), 1);
        assert!((db.modes[0].frequency - 3.005).abs() < 1e-10);
        assert!((db.modes[0].coupling.powi(2) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn zero_coupling_keeps_population() {
        let mut db = discretize(&lorentz(0.01), 8, None, 1).unwrap();
        for m in &mut db.modes {
            m.coupling = 0.0;
        }
        let program = ControlProgram::Amplitude {
            omega_a: 5.0,
            stark_shift: None,
            envelope: ModulationWaveform::Constant { amplitude: 1.0 },
        };
        let tr = exact_an_t0(&db, &program, 1.0, 5).unwrap();
        assert!(tr.values.iter().all(|&p| (p - 1.0).abs() < 1e-12));
    }

    #[test]
    fn recurrence_refusal() {
        let db = discretize(&lorentz(0.01), 4, None, 1).unwrap();
        let program = ControlProgram::Amplitude {
            omega_a: 5.0,
            stark_shift: None,
            envelope: ModulationWaveform::Constant { amplitude: 1.0 },
        };
        assert!(matches!(
            exact_an_t0(&db, &program, 2.0 * db.recurrence_time, 3),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn dimension_refusal() {
        let bath = lorentz(0.01);
        let db = discretize(&bath, 6, None, 9).unwrap();
        let program = ControlProgram::Phase {
            omega_a: 0.0,
            drive: Some(FramePhase::Constant { rate: 1.0 }),
            envelope: ModulationWaveform::Constant { amplitude: 1.0 },
        };
        match pn_full_integration(&db, &program, 0.1, 2) {
            Err(Error::Refused(msg)) => assert!(msg.contains("exceeds"), "{msg}"),
            other => panic!("expected refusal, got {other:?}"),
        }
    }
}
