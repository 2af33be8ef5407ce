//! Multiqubit decoherence matrices, symmetrizing local modulations and
//! entanglement fidelities.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::SpectrumModel;
use crate::error::{Error, Result};
use crate::modulation::{effective_modulation, FramePhase, ModulationWaveform};
use crate::quad::Quad;

/// Half-width of the two-sided Lorentzian support, in widths.
const LORENTZ_SUPPORT: f64 = 400.0;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Scalar spectrum used for a diagonal entry of a coupling-spectrum matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LineShape {
    /// One-sided bath spectrum `G0(ω)` (zero for `ω < 0`).
    Bath { model: SpectrumModel },
    /// `height·width²/((ω−center)² + width²)` on the whole real line.
    Lorentzian { height: f64, center: f64, width: f64 },
}

impl LineShape {
    /// Spectrum of the correlation `Φ(t) = strength·e^{−|t|/t_c}`,
    /// `G(ω) = (2π)^{-1} ∫ Φ(t) e^{iωt} dt`.
    pub fn exponential_correlation(strength: f64, correlation_time: f64) -> Self {
        let width = 1.0 / correlation_time;
        LineShape::Lorentzian {
            height: strength / (PI * width),
            center: 0.0,
            width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LineShape::Bath { model } => model.validate(),
            LineShape::Lorentzian { height, center, width } => {
                if !(height.is_finite() && *height >= 0.0 && center.is_finite() && width.is_finite() && *width > 0.0) {
                    return Err(Error::invalid("lorentzian line needs height >= 0 and width > 0"));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, w: f64) -> f64 {
        match *self {
            LineShape::Bath { ref model } => model.value(w),
            LineShape::Lorentzian { height, center, width } => {
                let d = w - center;
                height * width * width / (d * d + width * width)
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            LineShape::Bath { ref model } => model.support(),
            LineShape::Lorentzian { center, width, .. } => {
                (center - LORENTZ_SUPPORT * width, center + LORENTZ_SUPPORT * width)
            }
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            LineShape::Bath { ref model } => model.breakpoints(),
            LineShape::Lorentzian { center, width, .. } => [-10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0]
                .iter()
                .map(|k| center + k * width)
                .collect(),
        }
    }

    /// Width of the main spectral feature.
    pub fn bandwidth(&self) -> f64 {
        match *self {
            LineShape::Lorentzian { width, .. }
            | LineShape::Bath {
                model: SpectrumModel::Lorentzian { width, .. },
            } => 2.0 * width,
            LineShape::Bath {
                model: SpectrumModel::Ohmic { cutoff, .. },
            } => cutoff,
            LineShape::Bath {
                model: SpectrumModel::FlatBand { low, high, .. },
            } => high - low,
            LineShape::Bath {
                model: SpectrumModel::Tabulated { ref omega, .. },
            } => omega[omega.len() - 1] - omega[0],
        }
    }
}

/// One bath mode with its couplings `μ_{k,j}` to every qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathMode {
    pub frequency: f64,
    pub couplings: Vec<Complex64>,
}

/// Matrix-valued coupling spectrum `G_{jj'}(ω)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingSpectrumMatrix {
    /// `Σ_k μ_{k,j} μ*_{k,j'} L_κ(ω − ω_k)` with unit-area Lorentzian lines of
    /// half-width `κ` (default `1e−3` of the mode bandwidth).
    ModeList {
        modes: Vec<BathMode>,
        #[serde(default)]
        broadening: Option<f64>,
    },
    /// `G_{jj'} = c_{jj'} √(G_{jj} G_{j'j'})` with a positive semidefinite
    /// correlation matrix `c` of unit diagonal.
    Correlated {
        diagonal: Vec<LineShape>,
        correlation: Vec<Vec<Complex64>>,
    },
}

impl CouplingSpectrumMatrix {
    /// Independent qubits: `c = I`.
    pub fn independent(diagonal: Vec<LineShape>) -> Self {
        let n = diagonal.len();
        let correlation = (0..n)
            .map(|j| (0..n).map(|k| Complex64::new(if j == k { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect();
        CouplingSpectrumMatrix::Correlated { diagonal, correlation }
    }

    pub fn size(&self) -> usize {
        match self {
            CouplingSpectrumMatrix::ModeList { modes, .. } => modes.first().map_or(0, |m| m.couplings.len()),
            CouplingSpectrumMatrix::Correlated { diagonal, .. } => diagonal.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.size();
        if n == 0 {
            return Err(Error::invalid("coupling spectrum matrix needs at least one qubit"));
        }
        match self {
            CouplingSpectrumMatrix::ModeList { modes, broadening } => {
                for (k, m) in modes.iter().enumerate() {
                    if m.couplings.len() != n {
                        return Err(Error::invalid(format!("mode {k} has {} couplings, expected {n}", m.couplings.len())));
                    }
                    if !m.frequency.is_finite() || m.couplings.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                        return Err(Error::invalid(format!("mode {k} has non-finite entries")));
                    }
                }
                if let Some(b) = broadening {
                    if !(b.is_finite() && *b > 0.0) {
                        return Err(Error::invalid("mode broadening must be finite and > 0"));
                    }
                }
            }
            CouplingSpectrumMatrix::Correlated { diagonal, correlation } => {
                for d in diagonal {
                    d.validate()?;
                }
                if correlation.len() != n || correlation.iter().any(|r| r.len() != n) {
                    return Err(Error::invalid(format!("correlation matrix must be {n}x{n}")));
                }
                let c = DMatrix::from_fn(n, n, |j, k| correlation[j][k]);
                for j in 0..n {
                    if (c[(j, j)] - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
                        return Err(Error::invalid("correlation matrix must have unit diagonal"));
                    }
                }
                if (&c - c.adjoint()).iter().any(|z| z.norm() > 1e-12) {
                    return Err(Error::invalid("correlation matrix must be Hermitian"));
                }
                let eig = c.symmetric_eigenvalues();
                if eig.iter().any(|&e| e < -1e-12) {
                    return Err(Error::invalid("correlation matrix must be positive semidefinite"));
                }
            }
        }
        Ok(())
    }

    fn kappa(&self) -> f64 {
        match self {
            CouplingSpectrumMatrix::ModeList { modes, broadening } => broadening.unwrap_or_else(|| {
                let lo = modes.iter().map(|m| m.frequency).fold(f64::INFINITY, f64::min);
                let hi = modes.iter().map(|m| m.frequency).fold(f64::NEG_INFINITY, f64::max);
                let bw = if hi > lo { hi - lo } else { hi.abs().max(1.0) };
                1e-3 * bw
            }),
            CouplingSpectrumMatrix::Correlated { .. } => 0.0,
        }
    }

    /// `G_{jk}(ω)`.
    pub fn entry(&self, j: usize, k: usize, w: f64) -> Complex64 {
        match self {
            CouplingSpectrumMatrix::ModeList { modes, .. } => {
                let kappa = self.kappa();
                modes
                    .iter()
                    .map(|m| {
                        let d = w - m.frequency;
                        m.couplings[j] * m.couplings[k].conj() * (kappa / (PI * (d * d + kappa * kappa)))
                    })
                    .sum()
            }
            CouplingSpectrumMatrix::Correlated { diagonal, correlation } => {
                if j == k {
                    return Complex64::new(diagonal[j].value(w), 0.0);
                }
                let c = correlation[j][k];
                if c == zero() {
                    return zero();
                }
                c * (diagonal[j].value(w) * diagonal[k].value(w)).sqrt()
            }
        }
    }

    /// Whether `G_{jk}` vanishes for every frequency.
    pub fn vanishes(&self, j: usize, k: usize) -> bool {
        match self {
            CouplingSpectrumMatrix::ModeList { modes, .. } => {
                modes.iter().all(|m| (m.couplings[j] * m.couplings[k].conj()).norm() == 0.0)
            }
            CouplingSpectrumMatrix::Correlated { diagonal, correlation } => {
                correlation[j][k].norm() == 0.0 || {
                    let (a, b) = (diagonal[j].support(), diagonal[k].support());
                    a.1.min(b.1) <= a.0.max(b.0)
                }
            }
        }
    }

    /// Interval carrying the mass of `G_{jk}`.
    fn support(&self, j: usize, k: usize) -> (f64, f64) {
        match self {
            CouplingSpectrumMatrix::ModeList { modes, .. } => {
                let kappa = self.kappa();
                let lo = modes.iter().map(|m| m.frequency).fold(f64::INFINITY, f64::min);
                let hi = modes.iter().map(|m| m.frequency).fold(f64::NEG_INFINITY, f64::max);
                (lo - LORENTZ_SUPPORT * kappa, hi + LORENTZ_SUPPORT * kappa)
            }
            CouplingSpectrumMatrix::Correlated { diagonal, .. } => {
                let (a, b) = (diagonal[j].support(), diagonal[k].support());
                if j == k {
                    a
                } else {
                    (a.0.max(b.0), a.1.min(b.1))
                }
            }
        }
    }

    fn breakpoints(&self, j: usize, k: usize) -> Vec<f64> {
        match self {
            CouplingSpectrumMatrix::ModeList { modes, .. } => {
                let kappa = self.kappa();
                modes
                    .iter()
                    .flat_map(|m| [-10.0, -1.0, 0.0, 1.0, 10.0].map(|s| m.frequency + s * kappa))
                    .collect()
            }
            CouplingSpectrumMatrix::Correlated { diagonal, .. } => {
                let mut b = diagonal[j].breakpoints();
                if j != k {
                    b.extend(diagonal[k].breakpoints());
                }
                b
            }
        }
    }

    /// Width of the spectral features, used to size design windows.
    pub fn bandwidth(&self) -> f64 {
        match self {
            CouplingSpectrumMatrix::ModeList { modes, .. } => {
                let lo = modes.iter().map(|m| m.frequency).fold(f64::INFINITY, f64::min);
                let hi = modes.iter().map(|m| m.frequency).fold(f64::NEG_INFINITY, f64::max);
                (hi - lo).max(0.0) + 2.0 * self.kappa()
            }
            CouplingSpectrumMatrix::Correlated { diagonal, .. } => {
                diagonal.iter().map(LineShape::bandwidth).fold(0.0, f64::max)
            }
        }
    }
}

/// Control applied to one qubit: carrier `ω_j`, envelope `ε̃_j` and an
/// optional frame phase (AC-Stark shift for AN, resonant drive `V_{0,j}` for
/// PN).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModulation {
    #[serde(default)]
    pub carrier: f64,
    pub envelope: ModulationWaveform,
    #[serde(default)]
    pub frame: Option<FramePhase>,
}

impl LocalModulation {
    /// Unmodulated coupling at carrier `ω_j`, shifted by `Δ`.
    pub fn shifted(carrier: f64, shift: f64) -> Self {
        LocalModulation {
            carrier,
            envelope: ModulationWaveform::Monochromatic { amplitude: 1.0, shift },
            frame: None,
        }
    }

    fn effective(&self, t: f64) -> Result<ModulationWaveform> {
        effective_modulation(&self.envelope, self.frame.as_ref(), t.max(f64::MIN_POSITIVE))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModulationSet {
    pub qubits: Vec<LocalModulation>,
    /// Time at which the accumulated frame phases are locked to `2πm`.
    #[serde(default)]
    pub probe_time: Option<f64>,
}

impl LocalModulationSet {
    pub fn new(qubits: Vec<LocalModulation>) -> Self {
        LocalModulationSet {
            qubits,
            probe_time: None,
        }
    }

    /// The same modulation on every qubit.
    pub fn global(n: usize, modulation: LocalModulation) -> Self {
        Self::new(vec![modulation; n])
    }

    /// Phase-kick areas that, applied at the probe time, bring every
    /// modulation phase back to a multiple of `2π`. A kick at the probe time
    /// leaves `ε_{t,j}` on `[0, T]` and hence `J(T)` unchanged.
    pub fn phase_lock_corrections(&self) -> Result<Vec<f64>> {
        let t = self
            .probe_time
            .ok_or_else(|| Error::invalid("no probe time declared for phase locking"))?;
        self.qubits
            .iter()
            .map(|q| {
                let eps = q.effective(t)?;
                let before = eps.value(t - 1e-12 * t.max(1.0));
                Ok(if before.norm() > 0.0 { before.arg() } else { 0.0 })
            })
            .collect()
    }
}

/// `J_{jj'}(t)` on one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceMatrix {
    pub t: f64,
    pub values: DMatrix<Complex64>,
}

impl DecoherenceMatrix {
    pub fn max_diagonal(&self) -> f64 {
        (0..self.values.nrows()).map(|j| self.values[(j, j)].re).fold(0.0, f64::max)
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.values.nrows();
        let mut m = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    m = m.max(self.values[(j, k)].norm());
                }
            }
        }
        m
    }

    /// `(max − min)/max` of the real diagonal.
    pub fn diagonal_spread(&self) -> f64 {
        let n = self.values.nrows();
        let d: Vec<f64> = (0..n).map(|j| self.values[(j, j)].re).collect();
        let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi > 0.0 {
            (hi - lo) / hi
        } else {
            0.0
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.values - self.values.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("time must be finite and >= 0 (got {t})")))
    }
}

/// `2π ∫ G_{jk}(ω) a(ω) b(ω) dω` over the support of `G_{jk}` in panels no
/// wider than one oscillation period `2π/t` of the finite-time spectra.
fn overlap<A, B>(
    g: &CouplingSpectrumMatrix,
    j: usize,
    k: usize,
    t: f64,
    a: A,
    b: B,
    lines: &[f64],
    abs_tol: f64,
) -> Result<Complex64>
where
    A: Fn(f64) -> Complex64,
    B: Fn(f64) -> Complex64,
{
    let (lo, hi) = g.support(j, k);
    if !(hi > lo) || t == 0.0 {
        return Ok(zero());
    }
    let mut breaks = g.breakpoints(j, k);
    breaks.extend_from_slice(lines);
    let r = Quad::new(1e-10, abs_tol).integrate_panels(
        |w: f64| {
            let gv = g.entry(j, k, w);
            if gv == zero() {
                zero()
            } else {
                gv * a(w) * b(w)
            }
        },
        lo,
        hi,
        TAU / t,
        &breaks,
    )?;
    Ok(r.value * TAU)
}

struct Prepared {
    eps: Vec<ModulationWaveform>,
    carriers: Vec<f64>,
    lines: Vec<f64>,
}

fn prepare(g: &CouplingSpectrumMatrix, mods: &LocalModulationSet, t: f64, use_carrier: bool) -> Result<Prepared> {
    g.validate()?;
    check_time(t)?;
    let n = g.size();
    if mods.qubits.len() != n {
        return Err(Error::invalid(format!(
            "{} modulations supplied for {n} qubits",
            mods.qubits.len()
        )));
    }
    let eps = mods.qubits.iter().map(|q| q.effective(t)).collect::<Result<Vec<_>>>()?;
    let carriers: Vec<f64> = mods.qubits.iter().map(|q| if use_carrier { q.carrier } else { 0.0 }).collect();
    let mut lines = Vec::new();
    for j in 0..n {
        let (lo, hi) = g.support(j, j);
        lines.extend(eps[j].spectral_lines(lo - carriers[j], hi - carriers[j]).iter().map(|x| x + carriers[j]));
    }
    Ok(Prepared { eps, carriers, lines })
}

/// AN decoherence matrix
/// `J_{jj'}(t) = 2π ∫ G_{jj'}(ω) ε*_{t,j}(ω−ω_j) ε_{t,j'}(ω−ω_{j'}) dω`.
pub fn decoherence_matrix(g: &CouplingSpectrumMatrix, mods: &LocalModulationSet, t: f64) -> Result<DecoherenceMatrix> {
    let p = prepare(g, mods, t, true)?;
    let n = g.size();
    let spec = |j: usize, w: f64| p.eps[j].finite_time_spectrum(t, w - p.carriers[j]);
    let mut values = DMatrix::from_element(n, n, zero());
    for j in 0..n {
        let v = overlap(g, j, j, t, |w| spec(j, w).conj(), |w| spec(j, w), &p.lines, 1e-300)?;
        values[(j, j)] = Complex64::new(v.re, 0.0);
    }
    let scale = (0..n).map(|j| values[(j, j)].re).fold(0.0, f64::max);
    for j in 0..n {
        for k in j + 1..n {
            if g.vanishes(j, k) {
                continue;
            }
            let v = overlap(g, j, k, t, |w| spec(j, w).conj(), |w| spec(k, w), &p.lines, 1e-12 * scale)?;
            values[(j, k)] = v;
            values[(k, j)] = v.conj();
        }
    }
    Ok(DecoherenceMatrix { t, values })
}

/// Decoherence matrices on a time grid, evaluated in parallel.
pub fn decoherence_series(
    g: &CouplingSpectrumMatrix,
    mods: &LocalModulationSet,
    times: &[f64],
) -> Result<Vec<DecoherenceMatrix>> {
    times.par_iter().map(|&t| decoherence_matrix(g, mods, t)).collect()
}

/// Finite-time spectrum of impulsive phase modulation with kicks `φ` every
/// `τ`, whose weight sits at `Δ = φ/τ` for weak kicks.
pub fn local_ipm_spectrum(phase: f64, interval: f64, t: f64, omega: f64) -> Result<Complex64> {
    if !(interval.is_finite() && interval > 0.0) || !phase.is_finite() {
        return Err(Error::invalid("local IPM needs a finite interval > 0 and finite phase"));
    }
    Ok(ModulationWaveform::ImpulsivePm {
        phase: -phase,
        interval,
    }
    .finite_time_spectrum(t, omega))
}

/// Fidelity quantities of a two-qubit or single-excitation state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fidelity {
    /// Overlap `Tr ρ(0)ρ(t)`.
    pub f: f64,
    /// Total excitation probability.
    pub f_p: f64,
    /// Correlation fidelity `F/F_p`.
    pub f_c: f64,
    /// `2F_c − 1`, the concurrence of the excitation-sector state
    /// renormalized to unit norm.
    pub concurrence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    pub times: Vec<f64>,
    pub values: Vec<Fidelity>,
}

/// Bell-state fidelities without cross decoherence:
/// `F_p = (e^{−2J_A} + e^{−2J_B})/2`, `F_c = 1/2 + e^{−ΔJ}/(1 + e^{−2ΔJ})`.
pub fn bell_an_fidelity(j_a: f64, j_b: f64) -> Fidelity {
    let f_p = 0.5 * ((-2.0 * j_a).exp() + (-2.0 * j_b).exp());
    let d = (j_a - j_b).abs();
    let f_c = 0.5 + (-d).exp() / (1.0 + (-2.0 * d).exp());
    Fidelity {
        f: f_p * f_c,
        f_p,
        f_c,
        concurrence: 2.0 * f_c - 1.0,
    }
}

/// Single-excitation amplitudes from a full `2^N` state vector (qubit 0 is
/// the most significant bit, `1` = excited).
pub fn sector_amplitudes(state: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    if n == 0 || n > 30 || state.len() != 1 << n {
        return Err(Error::invalid(format!("state vector length {} does not match {n} qubits", state.len())));
    }
    let mut out = vec![zero(); n];
    let mut outside = 0.0;
    for (idx, a) in state.iter().enumerate() {
        if idx.count_ones() == 1 {
            out[n - 1 - idx.trailing_zeros() as usize] = *a;
        } else {
            outside += a.norm_sqr();
        }
    }
    if outside > 1e-12 {
        return Err(Error::invalid(format!(
            "state has weight {outside:e} outside the single-excitation sector"
        )));
    }
    Ok(out)
}

fn normalized(amplitudes: &[Complex64]) -> Result<Vec<Complex64>> {
    let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::invalid("sector amplitudes must be finite and not all zero"));
    }
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("sector amplitudes have norm {norm}, expected 1")));
    }
    Ok(amplitudes.to_vec())
}

fn fidelity_of(a0: &DMatrix<Complex64>, a: &DMatrix<Complex64>) -> Fidelity {
    let f_p = a.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let f = (a0.adjoint() * a)[(0, 0)].norm_sqr();
    let f_c = if f_p > 0.0 { f / f_p } else { 0.0 };
    Fidelity {
        f,
        f_p,
        f_c,
        concurrence: 2.0 * f_c - 1.0,
    }
}

/// Evolve excitation amplitudes with `a(t) = T∏ exp[−ΔJ_k] a(0)` through a
/// precomputed series of decoherence matrices (sorted by time, starting at
/// any `t ≥ 0`, with `J = 0` assumed at `t = 0`).
pub fn sector_evolution(series: &[DecoherenceMatrix], initial: &[Complex64]) -> Result<FidelityReport> {
    let a0 = DMatrix::from_column_slice(initial.len(), 1, &normalized(initial)?);
    let n = initial.len();
    let mut a = a0.clone();
    let mut prev = DMatrix::from_element(n, n, zero());
    let mut times = Vec::with_capacity(series.len());
    let mut values = Vec::with_capacity(series.len());
    for m in series {
        if m.values.nrows() != n || m.values.ncols() != n {
            return Err(Error::invalid("decoherence matrix size differs from the state size"));
        }
        let step = -(&m.values - &prev);
        a = step.exp() * a;
        prev = m.values.clone();
        times.push(m.t);
        values.push(fidelity_of(&a0, &a));
    }
    Ok(FidelityReport { times, values })
}

/// Sector dynamics at `T = 0` under local modulations: `J(t)` is evaluated on
/// the output times merged with `substeps` uniform steps, and the amplitudes
/// are propagated by the time-ordered product of `exp[−ΔJ]`.
pub fn an_fidelity_evolution(
    g: &CouplingSpectrumMatrix,
    mods: &LocalModulationSet,
    initial: &[Complex64],
    times: &[f64],
    substeps: usize,
) -> Result<FidelityReport> {
    if initial.len() != g.size() {
        return Err(Error::invalid("initial amplitudes must have one entry per qubit"));
    }
    normalized(initial)?;
    if times.is_empty() {
        return Ok(FidelityReport {
            times: Vec::new(),
            values: Vec::new(),
        });
    }
    for &t in times {
        check_time(t)?;
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("output times must be non-decreasing"));
    }
    let t_final = times[times.len() - 1];
    let mut grid: Vec<f64> = (1..=substeps).map(|k| t_final * k as f64 / substeps as f64).collect();
    grid.extend_from_slice(times);
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_final.max(1.0));
    let series = decoherence_series(g, mods, &grid)?;
    let full = sector_evolution(&series, initial)?;
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let idx = full
            .times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t_final.max(1.0))
            .expect("output time is on the grid");
        values.push(full.values[idx]);
    }
    Ok(FidelityReport {
        times: times.to_vec(),
        values,
    })
}

/// Symmetry requested from [`iip_design`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryTarget {
    /// Equal single-qubit rates, no cross decoherence.
    Iip,
    /// All `J_{jj'}` equal.
    Icp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignRequest {
    pub target: SymmetryTarget,
    /// Common qubit frequency `ω_0`.
    pub omega_0: f64,
    /// Minimum pairwise separation of the shifted spectral windows.
    pub separation: f64,
    /// Search window `|Δ_j| ≤ window`; defaults to ten bath bandwidths.
    #[serde(default)]
    pub window: Option<f64>,
    /// Relative tolerance on equalized spectral values.
    #[serde(default = "default_design_tolerance")]
    pub tolerance: f64,
}

fn default_design_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Design {
    pub shifts: Vec<f64>,
    /// Common spectral value `r* = G_{jj}(ω_0 + Δ_j)`.
    pub level: f64,
    pub modulations: LocalModulationSet,
}

const DESIGN_GRID: usize = 8001;
const DESIGN_LEVELS: usize = 400;
const MAX_CANDIDATES: usize = 64;

/// Choose spectral shifts `Δ_j` that equalize `G_{jj}(ω_0 + Δ_j)` at the
/// lowest common value for which the shifted windows can be kept at least
/// `separation` apart.
pub fn iip_design(g: &CouplingSpectrumMatrix, request: &DesignRequest) -> Result<Design> {
    g.validate()?;
    let n = g.size();
    let w0 = request.omega_0;
    if !w0.is_finite() || !(request.separation.is_finite() && request.separation >= 0.0) {
        return Err(Error::invalid("design needs finite ω_0 and separation >= 0"));
    }
    let window = request.window.unwrap_or(10.0 * g.bandwidth());
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::invalid("design window must be finite and > 0"));
    }
    let tol = request.tolerance.max(1e-14);
    let grid: Vec<f64> = (0..DESIGN_GRID)
        .map(|k| -window + 2.0 * window * k as f64 / (DESIGN_GRID - 1) as f64)
        .collect();
    let diag = |j: usize, d: f64| g.entry(j, j, w0 + d).re;

    if request.target == SymmetryTarget::Icp {
        for j in 0..n {
            for k in j + 1..n {
                if g.vanishes(j, k) {
                    return Err(Error::NoSolution(format!(
                        "G_{{{}{}}} vanishes identically; ICP needs every pair coupled through the bath",
                        j + 1,
                        k + 1
                    )));
                }
            }
        }
        let spread = |d: f64| {
            let vals: Vec<Complex64> = (0..n).flat_map(|j| (0..n).map(move |k| (j, k))).map(|(j, k)| g.entry(j, k, w0 + d)).collect();
            let mean = vals.iter().sum::<Complex64>() / vals.len() as f64;
            let dev = vals.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
            if mean.norm() > 0.0 {
                dev / mean.norm()
            } else {
                f64::INFINITY
            }
        };
        let best = grid
            .iter()
            .map(|&d| (spread(d), d))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.abs().total_cmp(&b.1.abs())))
            .expect("non-empty grid");
        if best.0 > tol {
            return Err(Error::NoSolution(format!(
                "no common shift makes all G_jj' equal (best relative spread {:.3e} at Δ = {})",
                best.0, best.1
            )));
        }
        let modulations = LocalModulationSet::global(n, LocalModulation::shifted(w0, best.1));
        return Ok(Design {
            shifts: vec![best.1; n],
            level: diag(0, best.1),
            modulations,
        });
    }

    let samples: Vec<Vec<f64>> = (0..n).map(|j| grid.iter().map(|&d| diag(j, d)).collect()).collect();
    let mins: Vec<f64> = samples.iter().map(|s| s.iter().cloned().fold(f64::INFINITY, f64::min)).collect();
    let maxs: Vec<f64> = samples.iter().map(|s| s.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
    let lo = mins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let hi = maxs.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo > hi {
        let (jl, _) = mins.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("n > 0");
        let (jh, _) = maxs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("n > 0");
        return Err(Error::NoSolution(format!(
            "disjoint achievable rate ranges: qubit {} never goes below {:.6e} while qubit {} never exceeds {:.6e}",
            jl + 1,
            lo,
            jh + 1,
            hi
        )));
    }
    for level_idx in 0..=DESIGN_LEVELS {
        let level = if DESIGN_LEVELS == 0 {
            lo
        } else {
            lo + (hi - lo) * level_idx as f64 / DESIGN_LEVELS as f64
        };
        let candidates: Vec<Vec<f64>> = (0..n)
            .map(|j| level_candidates(&grid, &samples[j], |d| diag(j, d), level, tol))
            .collect();
        if candidates.iter().any(Vec::is_empty) {
            continue;
        }
        let mut chosen = Vec::with_capacity(n);
        if assign(&candidates, request.separation, &mut chosen) {
            let modulations =
                LocalModulationSet::new(chosen.iter().map(|&d| LocalModulation::shifted(w0, d)).collect());
            return Ok(Design {
                shifts: chosen,
                level,
                modulations,
            });
        }
    }
    Err(Error::NoSolution(format!(
        "no shifts within |Δ| <= {window} keep the windows {} apart at a common spectral value",
        request.separation
    )))
}

/// Shifts where `f` crosses or touches `level`, sorted by `|Δ|`.
fn level_candidates(grid: &[f64], samples: &[f64], f: impl Fn(f64) -> f64, level: f64, tol: f64) -> Vec<f64> {
    let slack = tol * level.abs().max(f64::MIN_POSITIVE);
    let mut out = Vec::new();
    for k in 0..grid.len() {
        let v = samples[k] - level;
        if v.abs() <= slack {
            out.push(grid[k]);
            continue;
        }
        if k + 1 < grid.len() {
            let w = samples[k + 1] - level;
            if v * w < 0.0 && w.abs() > slack {
                let (mut a, mut b, mut fa) = (grid[k], grid[k + 1], v);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    let fm = f(m) - level;
                    if fm.abs() <= slack || b - a <= 1e-15 * (1.0 + m.abs()) {
                        a = m;
                        b = m;
                        break;
                    }
                    if fa * fm < 0.0 {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                }
                out.push(0.5 * (a + b));
            }
        }
    }
    out.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    out.truncate(MAX_CANDIDATES);
    out
}

fn assign(candidates: &[Vec<f64>], separation: f64, chosen: &mut Vec<f64>) -> bool {
    let j = chosen.len();
    if j == candidates.len() {
        return true;
    }
    for &d in &candidates[j] {
        if chosen.iter().all(|&c| (c - d).abs() >= separation) {
            chosen.push(d);
            if assign(candidates, separation, chosen) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

/// Two-qubit PN cross-dephasing matrix `J^P_{jj',l}(t)` for Bell state `l`.
/// Only the relative sign and conjugation pattern of the off-diagonal
/// filter depends on `l`; carriers are ignored.
pub fn cross_dephasing_matrix(
    gp: &CouplingSpectrumMatrix,
    mods: &LocalModulationSet,
    bell: usize,
    t: f64,
) -> Result<DecoherenceMatrix> {
    if !(1..=4).contains(&bell) {
        return Err(Error::invalid(format!("Bell index must be in 1..=4 (got {bell})")));
    }
    let p = prepare(gp, mods, t, false)?;
    let n = gp.size();
    let spec = |j: usize, w: f64| p.eps[j].finite_time_spectrum(t, w);
    let mut values = DMatrix::from_element(n, n, zero());
    for j in 0..n {
        let v = overlap(gp, j, j, t, |w| spec(j, w).conj(), |w| spec(j, w), &p.lines, 1e-300)?;
        values[(j, j)] = Complex64::new(v.re, 0.0);
    }
    let scale = (0..n).map(|j| values[(j, j)].re).fold(0.0, f64::max);
    let sign = if bell <= 2 { -1.0 } else { 1.0 };
    for j in 0..n {
        for k in 0..n {
            if j == k || gp.vanishes(j, k) {
                continue;
            }
            let v = if bell % 2 == 1 {
                // ε*_j ε*_k
                overlap(gp, j, k, t, |w| spec(j, w).conj(), |w| spec(k, w).conj(), &p.lines, 1e-12 * scale)?
            } else {
                // ε_j ε*_k
                overlap(gp, j, k, t, |w| spec(j, w), |w| spec(k, w).conj(), &p.lines, 1e-12 * scale)?
            };
            values[(j, k)] = v * sign;
        }
    }
    Ok(DecoherenceMatrix { t, values })
}

/// `F_l(t) = cos φ_± · Re[e^{iφ_±}(1 − ½ Σ_{jj'} J^P_{jj',l}(t))]` with
/// `φ_j = 2∫₀ᵗ V_{0,j}` and `φ_± = (φ_1 ± φ_2)/2`; `φ_+` for `l = 1, 3`.
pub fn pn_bell_fidelity(gp: &CouplingSpectrumMatrix, mods: &LocalModulationSet, bell: usize, t: f64) -> Result<f64> {
    if gp.size() != 2 {
        return Err(Error::invalid("Bell-state fidelities need exactly two qubits"));
    }
    let j = cross_dephasing_matrix(gp, mods, bell, t)?;
    let total: Complex64 = j.values.iter().sum();
    let phase = |q: &LocalModulation| 2.0 * q.frame.as_ref().map_or(0.0, |f| f.phase(t));
    let (p1, p2) = (phase(&mods.qubits[0]), phase(&mods.qubits[1]));
    let phi = if bell % 2 == 1 { 0.5 * (p1 + p2) } else { 0.5 * (p1 - p2) };
    Ok(phi.cos() * (Complex64::from_polar(1.0, phi) * (1.0 - 0.5 * total)).re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bell_formula_limits() {
        let f = bell_an_fidelity(0.0, 0.0);
        assert_eq!((f.f_p, f.f_c, f.concurrence), (1.0, 1.0, 1.0));
        let f = bell_an_fidelity(1.0, 1.0);
        assert!((f.f_p - (-2.0f64).exp()).abs() < 1e-15 && (f.f_c - 1.0).abs() < 1e-15);
        let f = bell_an_fidelity(800.0, 0.0);
        assert!((f.f_c - 0.5).abs() < 1e-15 && f.concurrence.abs() < 1e-15);
    }

    #[test]
    fn sector_amplitudes_reject_leakage() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // |eg⟩ = index 0b10, |ge⟩ = 0b01.
        let state = [c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)];
        let a = sector_amplitudes(&state, 2).unwrap();
        assert_eq!(a, vec![c(-s, 0.0), c(s, 0.0)]);
        let bad = [c(0.1, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)];
        assert!(sector_amplitudes(&bad, 2).is_err());
    }

    #[test]
    fn correlation_matrix_checks() {
        let line = LineShape::Lorentzian {
            height: 1.0,
            center: 0.0,
            width: 1.0,
        };
        let bad = CouplingSpectrumMatrix::Correlated {
            diagonal: vec![line.clone(), line.clone()],
            correlation: vec![vec![c(1.0, 0.0), c(1.5, 0.0)], vec![c(1.5, 0.0), c(1.0, 0.0)]],
        };
        assert!(bad.validate().is_err());
        assert!(CouplingSpectrumMatrix::independent(vec![line.clone(), line]).validate().is_ok());
    }

    #[test]
    fn icp_fails_for_uncoupled_pair() {
        let line = LineShape::Lorentzian {
            height: 1.0,
            center: 5.0,
            width: 1.0,
        };
        let mut corr = vec![vec![c(0.5, 0.0); 3]; 3];
        for (j, row) in corr.iter_mut().enumerate() {
            row[j] = c(1.0, 0.0);
        }
        corr[0][2] = c(0.0, 0.0);
        corr[2][0] = c(0.0, 0.0);
        let g = CouplingSpectrumMatrix::Correlated {
            diagonal: vec![line.clone(), line.clone(), line],
            correlation: corr,
        };
        let req = DesignRequest {
            target: SymmetryTarget::Icp,
            omega_0: 5.0,
            separation: 1.0,
            window: None,
            tolerance: 1e-6,
        };
        match iip_design(&g, &req) {
            Err(Error::NoSolution(msg)) => assert!(msg.contains("G_{13}"), "{msg}"),
            other => panic!("expected no-solution, got {other:?}"),
        }
    }

    #[test]
    fn exponential_correlation_spectrum_normalization() {
        let line = LineShape::exponential_correlation(1.0, 0.5);
        // ∫G = Φ(0) = 1.
        let mass = Quad::new(1e-10, 1e-14)
            .integrate_panels(|w| line.value(w), -2e4, 2e4, 10.0, &[0.0])
            .unwrap()
            .value;
        assert!((mass - 1.0).abs() < 1e-3, "{mass}");
        // G(0) = t_c/π.
        assert!((line.value(0.0) - 0.5 / PI).abs() < 1e-15);
    }
}
