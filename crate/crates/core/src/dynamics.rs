//! Closed-form moments of driven damped oscillators and a Monte Carlo
//! Langevin integrator for the coupled longitudinal motion.
//!
//! Equations of motion, per coordinate or coupled through the `ν²` matrix:
//!
//! ```text
//! ż = p/m,   ṗ = −m ν² z + f̄ − α p + ξ(t),   ⟨ξ_i(t) ξ_j(t')⟩ = 2 D_ij δ(t − t')
//! ```
//!
//! The integrator is a symmetric splitting: half a step of the exact harmonic
//! flow (with the constant force), a full exact Ornstein-Uhlenbeck step on the
//! momenta, and another harmonic half step. Both substeps leave the thermal
//! state of a single oscillator invariant, so the sampled stationary
//! distribution does not depend on `dt`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::coefficients::{MechanicalSystem, PSD_TOLERANCE};
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::linalg::psd_factor;
use crate::modes::{mode_friction, ModeDecomposition};

/// Mode-basis dynamics is used when the off-diagonal mode friction is below this ratio.
pub const MODE_BASIS_THRESHOLD: f64 = 0.05;

/// Largest allowed `dt·max|ν_k|`.
pub const MAX_PHASE_STEP: f64 = 0.05;

/// Reference photon budget estimate for `w = 4λ`, `a = λ/2`, `V = 200 E_R`.
pub const REFERENCE_PHOTON_ESTIMATE: f64 = 27000.0;

const TRAJECTORY_BATCH: usize = 64;

/// One damped, driven, noisy oscillator in internal units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OscillatorParams {
    pub frequency: f64,
    pub friction: f64,
    pub force: f64,
    pub diffusion: f64,
    pub mass: f64,
    /// Ground-state spread `x₀`.
    pub initial_spread: f64,
}

impl OscillatorParams {
    /// Atom `n` of a system with the spring coupling neglected.
    pub fn for_atom(system: &MechanicalSystem, n: usize, initial_spread: f64) -> Self {
        OscillatorParams {
            frequency: system.trap_frequencies[n],
            friction: system.friction[n],
            force: system.force[n],
            diffusion: system.diffusion[(n, n)],
            mass: system.mass(),
            initial_spread,
        }
    }

    /// `ν̃ = sqrt(ν² − (α/2)²)`
    pub fn damped_frequency(&self) -> Result<f64> {
        let d = self.frequency * self.frequency - 0.25 * self.friction * self.friction;
        if !(self.frequency > 0.0) || d <= 0.0 {
            return Err(Error::UnsupportedRegime(format!(
                "overdamped or unconfined oscillator (ν = {:e}, α = {:e})",
                self.frequency, self.friction
            )));
        }
        Ok(d.sqrt())
    }

    /// `z̄ = f̄/(m ν²)`
    pub fn static_shift(&self) -> f64 {
        self.force / (self.mass * self.frequency * self.frequency)
    }

    /// `D_z = D_p/(m² ν²)`
    pub fn position_diffusion(&self) -> f64 {
        self.diffusion / (self.mass * self.mass * self.frequency * self.frequency)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StatsSource {
    Analytic,
    MonteCarlo { n_traj: usize, seed: u64 },
    Deterministic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Site,
    Mode,
}

/// Mean and variance of each coordinate on a time grid (times in `1/γ`).
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryStats {
    pub basis: Basis,
    pub source: StatsSource,
    pub times: Vec<f64>,
    /// `mean[t][i]`
    pub mean: Vec<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
    /// Gaussian standard error of each variance estimate (zero for analytic results).
    pub stderr_variance: Vec<Vec<f64>>,
    /// Ensemble covariance of the coordinates at the last output time.
    #[serde(skip)]
    pub final_covariance: Option<DMatrix<f64>>,
    pub first_passage: Option<Vec<FirstPassage>>,
}

impl TrajectoryStats {
    /// Time series of one coordinate: `(t, mean, var, stderr)`.
    pub fn series(&self, i: usize) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        (0..self.times.len()).map(move |t| {
            (self.times[t], self.mean[t][i], self.variance[t][i], self.stderr_variance[t][i])
        })
    }
}

/// Trajectories whose coordinate first reached `|z| ≥ λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FirstPassage {
    pub escaped_fraction: f64,
    /// Mean first-passage time over escaped trajectories (`NaN` when none escaped).
    pub mean_time: f64,
}

/// Moments from the closed-form solution on a time grid.
pub fn analytic_moments(params: &OscillatorParams, times: &[f64]) -> Result<TrajectoryStats> {
    let nt = params.damped_frequency()?;
    let nu = params.frequency;
    let a = params.friction;
    let m = params.mass;
    let x02 = params.initial_spread * params.initial_spread;
    let zbar = params.static_shift();
    let dp = params.diffusion;
    let mut mean = Vec::with_capacity(times.len());
    let mut var = Vec::with_capacity(times.len());
    for &t in times {
        let decay_half = (-0.5 * a * t).exp();
        let decay = decay_half * decay_half;
        let (s, c) = (nt * t).sin_cos();
        let (s2, c2) = (2.0 * nt * t).sin_cos();
        let envelope = c + a / (2.0 * nt) * s;
        mean.push(vec![zbar * (1.0 - decay_half * envelope)]);
        // (1 − e^{−αt})/α, continuous at α = 0
        let growth = if a * t == 0.0 {
            t
        } else {
            -(-a * t).exp_m1() / a
        };
        let initial = decay * (envelope * envelope + (nu / nt * s).powi(2)) * x02;
        let noise = dp / (m * m * nt * nt) * growth
            - dp / (4.0 * m * m * nt * nt * nu * nu) * (a * (1.0 - decay * c2) + 2.0 * nt * decay * s2);
        var.push(vec![initial + noise]);
    }
    let n = times.len();
    Ok(TrajectoryStats {
        basis: Basis::Site,
        source: StatsSource::Analytic,
        times: times.to_vec(),
        mean,
        variance: var,
        stderr_variance: vec![vec![0.0]; n],
        final_covariance: None,
        first_passage: None,
    })
}

/// Thermalized steady state of one oscillator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SteadyState {
    pub shift: f64,
    /// Time-averaged stationary variance.
    pub variance: f64,
    /// `m ν² Var`
    pub kinetic_temperature: f64,
    /// `D_p/(m α)`
    pub effective_temperature: f64,
    /// `m ν² Var / T_e − 1`
    pub equipartition_residual: f64,
}

pub fn steady_state_stats(params: &OscillatorParams) -> Result<SteadyState> {
    if !(params.friction > 0.0) {
        return Err(Error::NoThermalization {
            friction: params.friction,
        });
    }
    let nt = params.damped_frequency()?;
    let (m, nu, a, dp) = (params.mass, params.frequency, params.friction, params.diffusion);
    let variance = dp / (m * m * nt * nt * a) - dp * a / (4.0 * m * m * nt * nt * nu * nu);
    let kinetic_temperature = m * nu * nu * variance;
    let effective_temperature = dp / (m * a);
    Ok(SteadyState {
        shift: params.static_shift(),
        variance,
        kinetic_temperature,
        effective_temperature,
        equipartition_residual: kinetic_temperature / effective_temperature - 1.0,
    })
}

/// `z̄/λ = (3/2π²)(λ/a)² (ħγ/E_R) η⁴ P_e` for identical traps at spacing `a < λ`.
pub fn static_shift_closed_form(spacing: f64, hbar_gamma_over_er: f64, eta: f64, excited_population: f64) -> f64 {
    let pi2 = std::f64::consts::PI.powi(2);
    3.0 / (2.0 * pi2) / (spacing * spacing) * hbar_gamma_over_er * eta.powi(4) * excited_population
}

/// `n_esc = (3π²/32) η⁻⁴ (λ/a)⁴ (w/λ)²`
pub fn photons_to_escape(spacing: f64, eta: f64, waist: f64) -> f64 {
    3.0 * std::f64::consts::PI.powi(2) / 32.0 / eta.powi(4) / spacing.powi(4) * waist * waist
}

/// Heating of an atom without friction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeatingReport {
    /// `z̄`, the offset of the oscillating mean `z̄(1 − cos νt)`.
    pub mean_amplitude: f64,
    /// `2 z̄`, the full swing of the mean.
    pub peak_to_peak: f64,
    /// `D_z = D_p/(m² ν²)`
    pub position_diffusion: f64,
    /// `λ²/D_z` (infinite when `D_z = 0`).
    pub escape_time: f64,
    /// `π²/(η² P_e)`, an alternative closed form that drops a factor η⁻²; kept for comparison.
    pub escape_time_alternative: f64,
    /// `π²/(η⁴ P_e)`, the closed form consistent with `λ²/D_z`.
    pub escape_time_closed_form: f64,
    /// `n_esc` when a beam waist is given.
    pub photons_to_escape: Option<f64>,
}

pub fn frictionless_stats(
    params: &OscillatorParams,
    spacing: f64,
    eta: f64,
    waist: Option<f64>,
    excited_population: f64,
) -> Result<HeatingReport> {
    if !(params.frequency > 0.0) || !(params.mass > 0.0) {
        return invalid("frequency and mass must be positive");
    }
    if params.friction != 0.0 {
        log::warn!("frictionless heating evaluated with α = {:e}; friction ignored", params.friction);
    }
    let dz = params.position_diffusion();
    let zbar = params.static_shift();
    let pi2 = std::f64::consts::PI.powi(2);
    let per_population = |x: f64| if excited_population > 0.0 { x / excited_population } else { f64::INFINITY };
    Ok(HeatingReport {
        mean_amplitude: zbar,
        peak_to_peak: 2.0 * zbar,
        position_diffusion: dz,
        escape_time: if dz > 0.0 { 1.0 / dz } else { f64::INFINITY },
        escape_time_alternative: per_population(pi2 / (eta * eta)),
        escape_time_closed_form: per_population(pi2 / eta.powi(4)),
        photons_to_escape: waist.map(|w| photons_to_escape(spacing, eta, w)),
    })
}

/// Linear Langevin system in a working basis (sites or collective modes).
#[derive(Clone, Debug)]
pub struct LangevinSystem {
    pub basis: Basis,
    pub mass: f64,
    /// Eigenvalues of the `ν²` matrix.
    pub eigenvalues: Vec<f64>,
    /// Columns map eigen-coordinates to working coordinates; `None` means identity.
    pub eigenvectors: Option<DMatrix<f64>>,
    pub force: DVector<f64>,
    pub friction: Vec<f64>,
    pub diffusion: DMatrix<f64>,
    /// Ground-state spread per working coordinate.
    pub initial_spread: Vec<f64>,
    /// Frequencies setting the initial momentum spread `m ν x₀`: the bare
    /// trap frequency per site, or `|ν_k|` per mode.
    pub initial_frequency: Vec<f64>,
    /// Off-diagonal mode-friction ratio that determined the basis.
    pub friction_ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisChoice {
    Auto,
    Site,
    Mode,
}

impl LangevinSystem {
    /// A single uncoupled oscillator.
    pub fn single(params: &OscillatorParams) -> Self {
        LangevinSystem {
            basis: Basis::Site,
            mass: params.mass,
            eigenvalues: vec![params.frequency * params.frequency],
            eigenvectors: None,
            force: DVector::from_element(1, params.force),
            friction: vec![params.friction],
            diffusion: DMatrix::from_element(1, 1, params.diffusion),
            initial_spread: vec![params.initial_spread],
            initial_frequency: vec![params.frequency],
            friction_ratio: 0.0,
        }
    }

    /// Collective system; the mode basis drops the off-diagonal mode friction.
    pub fn from_mechanical(
        system: &MechanicalSystem,
        decomposition: &ModeDecomposition,
        choice: BasisChoice,
        initial_spread: f64,
    ) -> Result<Self> {
        let n = system.len();
        if decomposition.len() != n {
            return invalid("mode decomposition does not match the system size");
        }
        let friction = mode_friction(decomposition, &system.friction)?;
        let basis = match choice {
            BasisChoice::Site => Basis::Site,
            BasisChoice::Mode => Basis::Mode,
            BasisChoice::Auto if friction.off_diagonal_ratio < MODE_BASIS_THRESHOLD => Basis::Mode,
            BasisChoice::Auto => Basis::Site,
        };
        let u = &decomposition.eigenvectors;
        let force = DVector::from_vec(system.force.clone());
        let spread = vec![initial_spread; n];
        let freq = system.trap_frequencies.clone();
        Ok(match basis {
            Basis::Site => LangevinSystem {
                basis,
                mass: system.mass(),
                eigenvalues: decomposition.eigenvalues.clone(),
                eigenvectors: Some(u.clone()),
                force,
                friction: system.friction.clone(),
                diffusion: system.diffusion.clone(),
                initial_spread: spread,
                initial_frequency: freq,
                friction_ratio: friction.off_diagonal_ratio,
            },
            Basis::Mode => LangevinSystem {
                basis,
                mass: system.mass(),
                eigenvalues: decomposition.eigenvalues.clone(),
                eigenvectors: None,
                force: u.transpose() * force,
                friction: friction.diagonal,
                diffusion: u.transpose() * &system.diffusion * u,
                initial_spread: spread,
                initial_frequency: decomposition.eigenvalues.iter().map(|l| l.abs().sqrt()).collect(),
                friction_ratio: friction.off_diagonal_ratio,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_frequency(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.abs().sqrt()).fold(0.0, f64::max)
    }

    /// Same system with the noise switched off.
    pub fn without_noise(&self) -> Self {
        let mut s = self.clone();
        s.diffusion.fill(0.0);
        s
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimulationConfig {
    pub n_traj: usize,
    pub seed: u64,
    pub dt: f64,
    pub t_final: f64,
    /// Output every this many steps (the initial state is always recorded).
    pub record_every: usize,
    pub exec: Execution,
}

/// Exact propagator of one harmonic eigen-coordinate over a fixed step.
#[derive(Clone, Copy, Debug)]
struct HarmonicStep {
    /// `[y, π] ← M [y − s, π] + [s, 0]` for confined/inverted coordinates,
    /// or free flight with a constant force.
    m: [[f64; 2]; 2],
    shift: f64,
    /// Only for free flight.
    drift: (f64, f64),
}

impl HarmonicStep {
    fn new(lambda: f64, force: f64, mass: f64, h: f64) -> Self {
        if lambda > 0.0 {
            let w = lambda.sqrt();
            let (s, c) = (w * h).sin_cos();
            HarmonicStep {
                m: [[c, s / (mass * w)], [-mass * w * s, c]],
                shift: force / (mass * lambda),
                drift: (0.0, 0.0),
            }
        } else if lambda < 0.0 {
            let k = (-lambda).sqrt();
            let (s, c) = ((k * h).sinh(), (k * h).cosh());
            HarmonicStep {
                m: [[c, s / (mass * k)], [mass * k * s, c]],
                shift: force / (mass * lambda),
                drift: (0.0, 0.0),
            }
        } else {
            HarmonicStep {
                m: [[1.0, h / mass], [0.0, 1.0]],
                shift: 0.0,
                drift: (force * h * h / (2.0 * mass), force * h),
            }
        }
    }

    #[inline]
    fn apply(&self, y: &mut f64, p: &mut f64) {
        let dy = *y - self.shift;
        let ny = self.m[0][0] * dy + self.m[0][1] * *p + self.shift + self.drift.0;
        let np = self.m[1][0] * dy + self.m[1][1] * *p + self.drift.1;
        *y = ny;
        *p = np;
    }
}

struct Integrator<'a> {
    system: &'a LangevinSystem,
    half: Vec<HarmonicStep>,
    damping: Vec<f64>,
    noise: Option<DMatrix<f64>>,
}

impl<'a> Integrator<'a> {
    fn new(system: &'a LangevinSystem, dt: f64) -> Result<Self> {
        let n = system.len();
        let eig_force = match &system.eigenvectors {
            Some(v) => v.transpose() * &system.force,
            None => system.force.clone(),
        };
        let half = (0..n)
            .map(|k| HarmonicStep::new(system.eigenvalues[k], eig_force[k], system.mass, 0.5 * dt))
            .collect();
        let damping = system.friction.iter().map(|a| (-a * dt).exp()).collect();
        let cov = DMatrix::from_fn(n, n, |i, j| {
            let s = system.friction[i] + system.friction[j];
            let d = 2.0 * system.diffusion[(i, j)];
            if s == 0.0 {
                d * dt
            } else {
                -d * (-s * dt).exp_m1() / s
            }
        });
        let noise = if cov.iter().all(|x| *x == 0.0) {
            None
        } else {
            Some(psd_factor(&cov, PSD_TOLERANCE)?)
        };
        Ok(Integrator {
            system,
            half,
            damping,
            noise,
        })
    }

    fn harmonic(&self, z: &mut DVector<f64>, p: &mut DVector<f64>) {
        match &self.system.eigenvectors {
            None => {
                for k in 0..z.len() {
                    self.half[k].apply(&mut z[k], &mut p[k]);
                }
            }
            Some(v) => {
                let mut y = v.transpose() * &*z;
                let mut q = v.transpose() * &*p;
                for k in 0..y.len() {
                    self.half[k].apply(&mut y[k], &mut q[k]);
                }
                *z = v * y;
                *p = v * q;
            }
        }
    }

    fn step(&self, z: &mut DVector<f64>, p: &mut DVector<f64>, rng: &mut ChaCha8Rng, xi: &mut DVector<f64>) {
        self.harmonic(z, p);
        for (pk, d) in p.iter_mut().zip(&self.damping) {
            *pk *= d;
        }
        if let Some(l) = &self.noise {
            for x in xi.iter_mut() {
                *x = StandardNormal.sample(rng);
            }
            p.gemv(1.0, l, xi, 1.0);
        }
        self.harmonic(z, p);
    }
}

#[derive(Clone)]
struct Accumulator {
    sum: Vec<Vec<f64>>,
    sum_sq: Vec<Vec<f64>>,
    cross: DMatrix<f64>,
    escaped: Vec<usize>,
    escape_time_sum: Vec<f64>,
}

impl Accumulator {
    fn new(n_out: usize, n: usize) -> Self {
        Accumulator {
            sum: vec![vec![0.0; n]; n_out],
            sum_sq: vec![vec![0.0; n]; n_out],
            cross: DMatrix::zeros(n, n),
            escaped: vec![0; n],
            escape_time_sum: vec![0.0; n],
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.cross += &other.cross;
        self.escaped.iter_mut().zip(&other.escaped).for_each(|(x, y)| *x += y);
        self.escape_time_sum.iter_mut().zip(&other.escape_time_sum).for_each(|(x, y)| *x += y);
    }
}

fn validate_config(system: &LangevinSystem, config: &SimulationConfig) -> Result<usize> {
    if system.is_empty() {
        return invalid("empty system");
    }
    if !(config.dt > 0.0) || !(config.t_final > 0.0) || config.record_every == 0 {
        return invalid("dt, t_final and record_every must be positive");
    }
    let limit = MAX_PHASE_STEP / system.max_frequency();
    if config.dt > limit * (1.0 + 1e-12) {
        return invalid(format!("dt = {:e} exceeds {MAX_PHASE_STEP}/max ν_k = {limit:e}", config.dt));
    }
    Ok((config.t_final / config.dt).round() as usize)
}

/// Ensemble statistics from `n_traj` independent trajectories.
///
/// Trajectory `i` draws from ChaCha8 seeded with `seed` on stream `i`, and
/// partial sums are combined in trajectory order, so the result is identical
/// for any thread count.
pub fn simulate_langevin(system: &LangevinSystem, config: &SimulationConfig) -> Result<TrajectoryStats> {
    if config.n_traj < 2 {
        return invalid("at least two trajectories are needed for a variance");
    }
    let steps = validate_config(system, config)?;
    let integrator = Integrator::new(system, config.dt)?;
    let n = system.len();
    let out_steps: Vec<usize> = (0..=steps).filter(|s| s % config.record_every == 0).collect();
    let n_out = out_steps.len();
    let batches = config.n_traj.div_ceil(TRAJECTORY_BATCH);

    let partials = config.exec.map(batches, |b| {
        let mut acc = Accumulator::new(n_out, n);
        let mut z = DVector::zeros(n);
        let mut p = DVector::zeros(n);
        let mut xi = DVector::zeros(n);
        let start = b * TRAJECTORY_BATCH;
        let end = (start + TRAJECTORY_BATCH).min(config.n_traj);
        for traj in start..end {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(traj as u64);
            for i in 0..n {
                let x0 = system.initial_spread[i];
                let g1: f64 = StandardNormal.sample(&mut rng);
                let g2: f64 = StandardNormal.sample(&mut rng);
                z[i] = x0 * g1;
                p[i] = system.mass * system.initial_frequency[i] * x0 * g2;
            }
            let mut escaped = vec![false; n];
            let mut out = 0;
            for step in 0..=steps {
                if step > 0 {
                    integrator.step(&mut z, &mut p, &mut rng, &mut xi);
                    for i in 0..n {
                        if !escaped[i] && z[i].abs() >= 1.0 {
                            escaped[i] = true;
                            acc.escaped[i] += 1;
                            acc.escape_time_sum[i] += step as f64 * config.dt;
                        }
                    }
                }
                if out < n_out && out_steps[out] == step {
                    for i in 0..n {
                        acc.sum[out][i] += z[i];
                        acc.sum_sq[out][i] += z[i] * z[i];
                    }
                    out += 1;
                }
            }
            acc.cross.ger(1.0, &z, &z, 1.0);
        }
        acc
    });

    let mut total = Accumulator::new(n_out, n);
    for part in &partials {
        total.merge(part);
    }
    let nt = config.n_traj as f64;
    let mut mean = Vec::with_capacity(n_out);
    let mut variance = Vec::with_capacity(n_out);
    let mut stderr = Vec::with_capacity(n_out);
    for o in 0..n_out {
        let m: Vec<f64> = total.sum[o].iter().map(|s| s / nt).collect();
        let v: Vec<f64> = (0..n)
            .map(|i| ((total.sum_sq[o][i] - nt * m[i] * m[i]) / (nt - 1.0)).max(0.0))
            .collect();
        stderr.push(v.iter().map(|x| x * (2.0 / (nt - 1.0)).sqrt()).collect());
        mean.push(m);
        variance.push(v);
    }
    let last_mean = DVector::from_vec(mean[n_out - 1].clone());
    let final_covariance = (total.cross - &last_mean * last_mean.transpose() * nt) / (nt - 1.0);
    let first_passage = (0..n)
        .map(|i| FirstPassage {
            escaped_fraction: total.escaped[i] as f64 / nt,
            mean_time: if total.escaped[i] > 0 {
                total.escape_time_sum[i] / total.escaped[i] as f64
            } else {
                f64::NAN
            },
        })
        .collect();
    Ok(TrajectoryStats {
        basis: system.basis,
        source: StatsSource::MonteCarlo {
            n_traj: config.n_traj,
            seed: config.seed,
        },
        times: out_steps.iter().map(|s| *s as f64 * config.dt).collect(),
        mean,
        variance,
        stderr_variance: stderr,
        final_covariance: Some(final_covariance),
        first_passage: Some(first_passage),
    })
}

/// Noise-free evolution of the mean from rest at the origin.
pub fn integrate_mean(system: &LangevinSystem, dt: f64, t_final: f64, record_every: usize) -> Result<TrajectoryStats> {
    let quiet = system.without_noise();
    let config = SimulationConfig {
        n_traj: 1,
        seed: 0,
        dt,
        t_final,
        record_every,
        exec: Execution::Sequential,
    };
    let steps = validate_config(&quiet, &config)?;
    let integrator = Integrator::new(&quiet, dt)?;
    let n = quiet.len();
    let mut z = DVector::zeros(n);
    let mut p = DVector::zeros(n);
    let mut xi = DVector::zeros(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut times = Vec::new();
    let mut mean = Vec::new();
    for step in 0..=steps {
        if step > 0 {
            integrator.step(&mut z, &mut p, &mut rng, &mut xi);
        }
        if step % record_every == 0 {
            times.push(step as f64 * dt);
            mean.push(z.iter().cloned().collect::<Vec<_>>());
        }
    }
    let n_out = times.len();
    Ok(TrajectoryStats {
        basis: quiet.basis,
        source: StatsSource::Deterministic,
        times,
        mean,
        variance: vec![vec![0.0; n]; n_out],
        stderr_variance: vec![vec![0.0; n]; n_out],
        final_covariance: None,
        first_passage: None,
    })
}

/// Least-squares slope of `y` against `x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Energy of a trajectory sample, used for conservation checks.
pub fn harmonic_energy(system: &LangevinSystem, z: &DVector<f64>, p: &DVector<f64>) -> f64 {
    let kinetic = p.norm_squared() / (2.0 * system.mass);
    let potential = match &system.eigenvectors {
        Some(v) => {
            let y = v.transpose() * z;
            y.iter().zip(&system.eigenvalues).map(|(y, l)| l * y * y).sum::<f64>()
        }
        None => z.iter().zip(&system.eigenvalues).map(|(y, l)| l * y * y).sum::<f64>(),
    };
    kinetic + 0.5 * system.mass * potential
}

/// Deterministic free evolution from a given state, returning the energy at every step.
pub fn energy_trace(system: &LangevinSystem, z0: &[f64], p0: &[f64], dt: f64, steps: usize) -> Result<Vec<f64>> {
    let quiet = system.without_noise();
    if quiet.friction.iter().any(|a| *a != 0.0) || quiet.force.iter().any(|f| *f != 0.0) {
        return invalid("energy trace requires zero friction and force");
    }
    let integrator = Integrator::new(&quiet, dt)?;
    let mut z = DVector::from_column_slice(z0);
    let mut p = DVector::from_column_slice(p0);
    let mut xi = DVector::zeros(z.len());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(harmonic_energy(&quiet, &z, &p));
    for _ in 0..steps {
        integrator.step(&mut z, &mut p, &mut rng, &mut xi);
        out.push(harmonic_energy(&quiet, &z, &p));
    }
    Ok(out)
}

/// Eigen-decomposition helper for callers building a site-basis system by hand.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(m.clone());
    (e.eigenvalues.iter().cloned().collect(), e.eigenvectors)
}
