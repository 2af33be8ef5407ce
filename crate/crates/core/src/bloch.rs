//! Single-qubit dynamics: generalized Bloch equations for amplitude and
//! phase noise, and the Born master equation with memory.
//!
//! Matrices are indexed `(e, g)` in the lab basis and `(↑, ↓)` in the tilted
//! basis `|↑⟩ = (e^{−iω_a t}|e⟩ + |g⟩)/√2`, `|↓⟩ = (e^{−iω_a t}|e⟩ − |g⟩)/√2`.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bath::ThermalBathSpectrum;
use crate::error::{Error, Result};
use crate::modulation::{effective_modulation, FramePhase, ModulationWaveform};
use crate::ode::{self, Tolerance};
use crate::rates::{RateContext, Regime};

pub type Mat2 = Matrix2<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Lab,
    Tilted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub rho: Mat2,
    pub basis: Basis,
}

impl QubitState {
    /// Validating constructor: Hermitian, unit trace, no eigenvalue below
    /// `−1e−6`.
    pub fn new(rho: Mat2, basis: Basis) -> Result<Self> {
        let s = QubitState { rho, basis };
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("density matrix has non-finite entries"));
        }
        if s.hermiticity_defect() > 1e-9 {
            return Err(Error::invalid("density matrix is not Hermitian"));
        }
        if (s.trace() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("density matrix trace is {} (expected 1)", s.trace())));
        }
        if s.min_eigenvalue() < -1e-6 {
            return Err(Error::invalid("density matrix has a negative eigenvalue"));
        }
        Ok(s)
    }

    /// Normalized pure state `a|0⟩ + b|1⟩` in the given basis.
    pub fn pure(a: Complex64, b: Complex64, basis: Basis) -> Result<Self> {
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid("pure state amplitudes must be finite and not both zero"));
        }
        let (a, b) = (a / n, b / n);
        Ok(QubitState {
            rho: Mat2::new(a * a.conj(), a * b.conj(), b * a.conj(), b * b.conj()),
            basis,
        })
    }

    /// `|e⟩⟨e|` in the lab basis.
    pub fn excited() -> Self {
        QubitState {
            rho: Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)),
            basis: Basis::Lab,
        }
    }

    /// `(|e⟩ + |g⟩)/√2` in the lab basis.
    pub fn coherent() -> Self {
        Self::pure(c(1.0, 0.0), c(1.0, 0.0), Basis::Lab).expect("valid amplitudes")
    }

    pub fn maximally_mixed(basis: Basis) -> Self {
        QubitState {
            rho: Mat2::new(c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)),
            basis,
        }
    }

    /// Upper-level population (`ρ_ee` or `ρ_↑↑`).
    pub fn upper_population(&self) -> f64 {
        self.rho[(0, 0)].re
    }

    /// Coherence `ρ_eg` or `ρ_↑↓`.
    pub fn coherence(&self) -> Complex64 {
        self.rho[(0, 1)]
    }

    pub fn trace(&self) -> f64 {
        (self.rho[(0, 0)] + self.rho[(1, 1)]).re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (self.rho - self.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.rho[(0, 0)].re;
        let d = self.rho[(1, 1)].re;
        let b = self.rho[(0, 1)];
        0.5 * (a + d) - ((0.5 * (a - d)).powi(2) + b.norm_sqr()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiltDirection {
    LabToTilted,
    TiltedToLab,
}

/// `W(t)` whose columns are `|↑⟩, |↓⟩` in lab coordinates.
fn tilt_matrix(omega_a: f64, t: f64) -> Mat2 {
    let p = Complex64::from_polar(FRAC_1_SQRT_2, -omega_a * t);
    let s = c(FRAC_1_SQRT_2, 0.0);
    Mat2::new(p, p, s, -s)
}

/// Change between the lab and tilted bases at time `t`.
pub fn tilt_basis(state: &QubitState, omega_a: f64, t: f64, direction: TiltDirection) -> Result<QubitState> {
    let w = tilt_matrix(omega_a, t);
    match (direction, state.basis) {
        (TiltDirection::LabToTilted, Basis::Lab) => Ok(QubitState {
            rho: w.adjoint() * state.rho * w,
            basis: Basis::Tilted,
        }),
        (TiltDirection::TiltedToLab, Basis::Tilted) => Ok(QubitState {
            rho: w * state.rho * w.adjoint(),
            basis: Basis::Lab,
        }),
        _ => Err(Error::invalid("state basis does not match the requested tilt direction")),
    }
}

/// Control of a single qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum ControlProgram {
    /// `H_S = (ω_a + δ_a(t))|e⟩⟨e|`, `S = ε̃*(t)|e⟩⟨g| + h.c.`
    Amplitude {
        omega_a: f64,
        #[serde(default)]
        stark_shift: Option<FramePhase>,
        envelope: ModulationWaveform,
    },
    /// Tilted frame: `Ĥ_S = (V_0(t)/2) σ̂_z`, `Ŝ = ε̃*(t)|↑⟩⟨↓| + h.c.`
    Phase {
        omega_a: f64,
        #[serde(default)]
        drive: Option<FramePhase>,
        envelope: ModulationWaveform,
    },
}

impl ControlProgram {
    pub fn omega_a(&self) -> f64 {
        match self {
            ControlProgram::Amplitude { omega_a, .. } | ControlProgram::Phase { omega_a, .. } => *omega_a,
        }
    }

    pub fn frame(&self) -> Option<&FramePhase> {
        match self {
            ControlProgram::Amplitude { stark_shift, .. } => stark_shift.as_ref(),
            ControlProgram::Phase { drive, .. } => drive.as_ref(),
        }
    }

    pub fn envelope(&self) -> &ModulationWaveform {
        match self {
            ControlProgram::Amplitude { envelope, .. } | ControlProgram::Phase { envelope, .. } => envelope,
        }
    }

    pub fn regime(&self) -> Regime {
        match self {
            ControlProgram::Amplitude { .. } => Regime::Amplitude,
            ControlProgram::Phase { .. } => Regime::Phase,
        }
    }

    /// Effective modulation `ε(t) = ε̃(t) e^{−i∫δ}` on `[0, horizon]`.
    pub fn effective_modulation(&self, horizon: f64) -> Result<ModulationWaveform> {
        effective_modulation(self.envelope(), self.frame(), horizon)
    }

    /// Smooth part of the coherence phase, `∫₀ᵗ (ω_a + δ_a)` or `∫₀ᵗ V_0`;
    /// kicks are applied separately.
    fn smooth_phase(&self, t: f64) -> f64 {
        let frame = match self.frame() {
            Some(FramePhase::Kicks { .. }) | None => 0.0,
            Some(f) => f.phase(t),
        };
        match self {
            ControlProgram::Amplitude { omega_a, .. } => omega_a * t + frame,
            ControlProgram::Phase { .. } => frame,
        }
    }
}

/// Output grid and ODE tolerances.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Number of output samples, including `t = 0` and `t_final`.
    pub samples: usize,
    pub tolerance: Tolerance,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            samples: 101,
            tolerance: Tolerance::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<QubitState>,
}

impl Trajectory {
    /// Convert every state to the lab basis.
    pub fn to_lab(&self, omega_a: f64) -> Result<Trajectory> {
        let states = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| match s.basis {
                Basis::Lab => Ok(*s),
                Basis::Tilted => tilt_basis(s, omega_a, t, TiltDirection::TiltedToLab),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            times: self.times.clone(),
            states,
        })
    }

    /// Largest entrywise deviation between two trajectories on the same grid.
    pub fn max_deviation(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (a.rho - b.rho).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }
}

fn output_times(t_final: f64, samples: usize) -> Result<Vec<f64>> {
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::invalid("t_final must be finite and >= 0"));
    }
    if samples < 2 {
        return Err(Error::invalid("at least two output samples are required"));
    }
    Ok((0..samples)
        .map(|k| t_final * k as f64 / (samples - 1) as f64)
        .collect())
}

/// Amplitude-noise Bloch equations in the lab basis.
pub fn evolve_an(
    state: &QubitState,
    bath: &ThermalBathSpectrum,
    program: &ControlProgram,
    t_final: f64,
    control: StepControl,
) -> Result<Trajectory> {
    if !matches!(program, ControlProgram::Amplitude { .. }) {
        return Err(Error::invalid("evolve_an needs an amplitude-noise program"));
    }
    if state.basis != Basis::Lab {
        return Err(Error::invalid("evolve_an expects a lab-basis state"));
    }
    evolve_bloch(state, bath, program, t_final, control)
}

/// Phase-noise Bloch equations in the tilted basis. Lab-basis input states
/// are tilted at `t = 0` first.
pub fn evolve_pn(
    state: &QubitState,
    bath: &ThermalBathSpectrum,
    program: &ControlProgram,
    t_final: f64,
    control: StepControl,
) -> Result<Trajectory> {
    if !matches!(program, ControlProgram::Phase { .. }) {
        return Err(Error::invalid("evolve_pn needs a phase-noise program"));
    }
    let tilted = match state.basis {
        Basis::Tilted => *state,
        Basis::Lab => tilt_basis(state, program.omega_a(), 0.0, TiltDirection::LabToTilted)?,
    };
    evolve_bloch(&tilted, bath, program, t_final, control)
}

fn evolve_bloch(
    state: &QubitState,
    bath: &ThermalBathSpectrum,
    program: &ControlProgram,
    t_final: f64,
    control: StepControl,
) -> Result<Trajectory> {
    let times = output_times(t_final, control.samples)?;
    let horizon = t_final.max(f64::MIN_POSITIVE);
    let eps = program.effective_modulation(horizon)?;
    let ctx = RateContext::new(bath, &eps, program.omega_a(), program.regime(), t_final)?;
    let kicks = program.frame().map(|f| f.kicks(t_final)).unwrap_or_default();
    let mut stops: Vec<f64> = times.clone();
    stops.extend(eps.breakpoints(t_final));
    if let Some(f) = program.frame() {
        stops.extend(f.breakpoints(t_final));
    }
    stops.extend(kicks.iter().map(|k| k.0));
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_final.max(1.0));

    // The coherence is integrated in the frame rotating with the smooth
    // phase, c = c̃ e^{−iθ}, so the step size is set by the rates alone.
    let rhs = |t: f64, y: &[f64; 3]| -> Result<[f64; 3]> {
        let r = ctx.convolution_rates(t)?;
        let mean = r.mean_rate();
        let da = r.shift_difference();
        let pop = y[0];
        let coh = c(y[1], y[2]);
        let dpop = -r.rate_e * pop + r.rate_g * (1.0 - pop);
        let back = Complex64::from_polar(1.0, 2.0 * program.smooth_phase(t));
        let dcoh = -c(mean, da) * coh + c(mean, -da) * coh.conj() * back;
        Ok([dpop, dcoh.re, dcoh.im])
    };

    let mut y = [state.upper_population(), state.coherence().re, state.coherence().im];
    let mut out = Vec::with_capacity(times.len());
    let mut next_out = 0;
    let mut t = 0.0;
    let mut h = 0.0;
    let mut kick_iter = kicks.iter().peekable();
    for &stop in &stops {
        if stop > t {
            y = ode::integrate(&rhs, t, y, stop, control.tolerance, &mut h)?;
            t = stop;
        }
        while let Some(&&(tk, area)) = kick_iter.peek() {
            if tk > t + 1e-12 * t_final.max(1.0) {
                break;
            }
            let z = c(y[1], y[2]) * Complex64::from_polar(1.0, -area);
            y[1] = z.re;
            y[2] = z.im;
            kick_iter.next();
        }
        while next_out < times.len() && times[next_out] <= t + 1e-12 * t_final.max(1.0) {
            out.push(bloch_state(&y, program.smooth_phase(t), state.basis));
            next_out += 1;
        }
    }
    while out.len() < times.len() {
        out.push(bloch_state(&y, program.smooth_phase(t), state.basis));
    }
    Ok(Trajectory { times, states: out })
}

fn bloch_state(y: &[f64; 3], phase: f64, basis: Basis) -> QubitState {
    let coh = c(y[1], y[2]) * Complex64::from_polar(1.0, -phase);
    QubitState {
        rho: Mat2::new(c(y[0], 0.0), coh, coh.conj(), c(1.0 - y[0], 0.0)),
        basis,
    }
}

/// Time-dependent system Hamiltonian and coupling operator for the Born
/// master equation, with optional instantaneous unitaries (kicks).
pub struct GeneralProgram<'a> {
    pub hamiltonian: Box<dyn Fn(f64) -> Mat2 + Sync + 'a>,
    pub coupling: Box<dyn Fn(f64) -> Mat2 + Sync + 'a>,
    /// `(time, unitary)` applied at the given times.
    pub kicks: Vec<(f64, Mat2)>,
    /// Times where `H_S` or `S` jump.
    pub breakpoints: Vec<f64>,
    /// Shortest characteristic period of the dynamics.
    pub min_period: f64,
    pub basis: Basis,
}

impl GeneralProgram<'static> {
    /// `(H_S, S)` of a Bloch-equation control program.
    pub fn from_control(program: &ControlProgram, horizon: f64) -> Result<Self> {
        program.envelope().validate()?;
        if let Some(f) = program.frame() {
            f.validate()?;
        }
        let envelope = program.envelope().clone();
        let frame = program.frame().cloned();
        let omega_a = program.omega_a();
        let coupling = move |t: f64| {
            let e = envelope.value(t);
            Mat2::new(c(0.0, 0.0), e.conj(), e, c(0.0, 0.0))
        };
        let fastest = program.envelope().max_frequency()
            + frame.as_ref().map_or(0.0, |f| f.max_rate())
            + match program {
                ControlProgram::Amplitude { .. } => omega_a.abs(),
                ControlProgram::Phase { .. } => 0.0,
            };
        let mut breakpoints = program.envelope().breakpoints(horizon);
        let mut kicks = Vec::new();
        if let Some(f) = &frame {
            breakpoints.extend(f.breakpoints(horizon));
            for (t, area) in f.kicks(horizon) {
                let u = match program {
                    ControlProgram::Amplitude { .. } => {
                        Mat2::new(Complex64::from_polar(1.0, -area), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))
                    }
                    ControlProgram::Phase { .. } => Mat2::new(
                        Complex64::from_polar(1.0, -0.5 * area),
                        c(0.0, 0.0),
                        c(0.0, 0.0),
                        Complex64::from_polar(1.0, 0.5 * area),
                    ),
                };
                kicks.push((t, u));
            }
        }
        let (hamiltonian, basis): (Box<dyn Fn(f64) -> Mat2 + Sync>, Basis) = match program {
            ControlProgram::Amplitude { .. } => (
                Box::new(move |t: f64| {
                    let w = omega_a + frame.as_ref().map_or(0.0, |f| f.rate(t));
                    Mat2::new(c(w, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0))
                }),
                Basis::Lab,
            ),
            ControlProgram::Phase { .. } => (
                Box::new(move |t: f64| {
                    let v = 0.5 * frame.as_ref().map_or(0.0, |f| f.rate(t));
                    Mat2::new(c(v, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-v, 0.0))
                }),
                Basis::Tilted,
            ),
        };
        Ok(GeneralProgram {
            hamiltonian,
            coupling: Box::new(coupling),
            kicks,
            breakpoints,
            min_period: if fastest > 0.0 { TAU / fastest } else { f64::INFINITY },
            basis,
        })
    }
}

/// `exp(−i H h)` for Hermitian 2×2 `H`.
fn propagator(hm: &Mat2, h: f64) -> Mat2 {
    let a = 0.5 * (hm[(0, 0)].re + hm[(1, 1)].re);
    let bz = 0.5 * (hm[(0, 0)].re - hm[(1, 1)].re);
    let bx = hm[(0, 1)].re;
    let by = -hm[(0, 1)].im;
    let b = (bx * bx + by * by + bz * bz).sqrt();
    let (cs, sn) = ((b * h).cos(), if b > 0.0 { (b * h).sin() / b } else { h });
    // cos(bh) I − i sin(bh)/b (b·σ)
    let m = Mat2::new(
        c(cs, -sn * bz),
        c(0.0, -sn) * c(bx, -by),
        c(0.0, -sn) * c(bx, by),
        c(cs, sn * bz),
    );
    m * Complex64::from_polar(1.0, -a * h)
}

/// Born master equation with memory,
/// `ρ̇ = −i[H_S, ρ] + ∫₀ᵗ dτ {Φ_T(t−τ)[S̃(t,τ)ρ, S(t)] + h.c.}`.
///
/// Integrated in the interaction picture of `H_S` with fixed-step RK4 on a
/// uniform grid; the memory integral is a trapezoid sum over cached
/// `Φ_T` samples and Heisenberg-picture coupling operators.
pub fn evolve_general_me(
    state: &QubitState,
    bath: &ThermalBathSpectrum,
    program: &GeneralProgram<'_>,
    t_final: f64,
    samples: usize,
) -> Result<Trajectory> {
    if state.basis != program.basis {
        return Err(Error::invalid("state basis differs from the program basis"));
    }
    let times = output_times(t_final, samples)?;
    let interval = t_final / (samples - 1) as f64;
    if interval == 0.0 {
        return Ok(Trajectory {
            states: vec![*state; samples],
            times,
        });
    }
    let bath_period = TAU / bath.oscillation_scale().max(1e-12);
    let h0 = program.min_period.min(bath_period).min(interval) / 200.0;
    let per_out = (interval / (2.0 * h0)).ceil() as usize;
    let h = interval / (2 * per_out) as f64;
    let nodes = 2 * per_out * (samples - 1);
    if nodes > 60_000 {
        return Err(Error::Refused(format!(
            "memory kernel grid would need {nodes} nodes; shorten the horizon or reduce output spacing"
        )));
    }
    let tol = 1e-9 * t_final.max(1.0);
    let node_of = |s: f64| -> Option<usize> {
        let x = s / h;
        let k = x.round();
        if (x - k).abs() * h <= tol {
            Some(k as usize)
        } else {
            None
        }
    };
    let mut jump_nodes = vec![false; nodes + 1];
    let mut kick_at: Vec<Option<Mat2>> = vec![None; nodes + 1];
    for &b in &program.breakpoints {
        if b > 0.0 && b < t_final {
            match node_of(b) {
                Some(k) => jump_nodes[k] = true,
                None => log::warn!("breakpoint at t = {b} is not on the integration grid"),
            }
        }
    }
    for &(tk, u) in &program.kicks {
        if tk > 0.0 && tk <= t_final + tol {
            match node_of(tk) {
                Some(k) if k % 2 == 0 => kick_at[k] = Some(u * kick_at[k].unwrap_or_else(Mat2::identity)),
                _ => log::warn!("kick at t = {tk} is not on an even integration node"),
            }
        }
    }

    // Propagators U(t_k±) and Heisenberg couplings S_H(t_k±).
    let eta = 1e-9 * h;
    let mut u_left = Vec::with_capacity(nodes + 1);
    let mut u_right = Vec::with_capacity(nodes + 1);
    let mut u = Mat2::identity();
    for k in 0..=nodes {
        if k > 0 {
            let mid = (k as f64 - 0.5) * h;
            u = propagator(&(program.hamiltonian)(mid), h) * u;
        }
        u_left.push(u);
        if let Some(kick) = kick_at[k] {
            u = kick * u;
        }
        u_right.push(u);
    }
    let s_at = |k: usize, side: f64| -> Mat2 {
        let t = k as f64 * h;
        let s = if jump_nodes[k] {
            (program.coupling)(t + side * eta)
        } else {
            (program.coupling)(t)
        };
        let uu = if side < 0.0 { u_left[k] } else { u_right[k] };
        uu.adjoint() * s * uu
    };
    let sh_left: Vec<Mat2> = (0..=nodes).map(|k| s_at(k, -1.0)).collect();
    let sh_right: Vec<Mat2> = (0..=nodes).map(|k| s_at(k, 1.0)).collect();
    let table = bath.correlation_table(t_final)?;
    let phi: Vec<Complex64> = (0..=nodes).map(|k| table.eval(k as f64 * h)).collect();

    // M(t_k) = ∫₀^{t_k} Φ(t_k − τ) S_H(τ) dτ by the trapezoid rule; jumps at
    // interior nodes use the mean of the one-sided values.
    let mut memory = vec![Mat2::zeros(); nodes + 1];
    for (k, m) in memory.iter_mut().enumerate().skip(1) {
        let mut acc = sh_right[0] * (phi[k] * 0.5) + sh_left[k] * (phi[0] * 0.5);
        for j in 1..k {
            acc += (sh_left[j] + sh_right[j]) * (phi[k - j] * 0.5);
        }
        *m = acc * c(h, 0.0);
    }

    let rhs = |rho: &Mat2, m: &Mat2, s: &Mat2| -> Mat2 {
        let a = m * rho * s - s * m * rho;
        a + a.adjoint()
    };
    let mut rho_i = state.rho;
    let mut states = vec![*state];
    for step in 0..nodes / 2 {
        let k = 2 * step;
        let h2 = c(2.0 * h, 0.0);
        let k1 = rhs(&rho_i, &memory[k], &sh_right[k]);
        let mid_s = (sh_left[k + 1] + sh_right[k + 1]) * c(0.5, 0.0);
        let k2 = rhs(&(rho_i + k1 * c(h, 0.0)), &memory[k + 1], &mid_s);
        let k3 = rhs(&(rho_i + k2 * c(h, 0.0)), &memory[k + 1], &mid_s);
        let k4 = rhs(&(rho_i + k3 * h2), &memory[k + 2], &sh_left[k + 2]);
        rho_i += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * (h2 / 6.0);
        if (k + 2) % (2 * per_out) == 0 {
            let uu = u_right[k + 2];
            states.push(QubitState {
                rho: uu * rho_i * uu.adjoint(),
                basis: program.basis,
            });
        }
    }
    Ok(Trajectory { times, states })
}
