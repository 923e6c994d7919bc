//! Subcommand implementations. Each writes its artifacts into a [`Bundle`]
//! and returns a JSON summary that also goes into the manifest.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use arraymech::checks::run_invariant_suite;
use arraymech::coefficients::MechanicalSystem;
use arraymech::cooperative::{cooperative_shift_width, gamma_nm_matrix, LatticeSums, Resonance, Temperature, TruncationPolicy};
use arraymech::dynamics::{
    analytic_moments, frictionless_stats, simulate_langevin, static_shift_closed_form, steady_state_stats,
    Basis, LangevinSystem, OscillatorParams, SimulationConfig, TrajectoryStats, MAX_PHASE_STEP, REFERENCE_PHOTON_ESTIMATE,
};
use arraymech::modes::{
    classify, diagonalize_modes, fourier_spectrum, mode_friction, profile_overlaps, InfiniteLattice,
};
use arraymech::params::{ArrayGeometry, BeamProfile, DriveConfig, RabiProfile, TrapConfig, UnitSystem};
use arraymech::Execution;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{LoadedConfig, Override, RunConfig, SweepCommand};
use crate::error::CliError;
use crate::output::{num, Bundle, Csv};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Response,
    Modes,
    BzSpectrum,
    Dynamics,
    Heating,
    Sweep { jobs: usize },
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Response => "response",
            Command::Modes => "modes",
            Command::BzSpectrum => "bz-spectrum",
            Command::Dynamics => "dynamics",
            Command::Heating => "heating",
            Command::Sweep { .. } => "sweep",
            Command::Validate => "validate",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub out: Option<PathBuf>,
    /// Root directory for bundles when `out` is not given (`ARRAYMECH_OUT`).
    pub out_root: Option<PathBuf>,
    pub force: bool,
    pub sequential: bool,
}

impl RunOptions {
    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    fn out_dir(&self, command: Command) -> PathBuf {
        match (&self.out, &self.out_root) {
            (Some(dir), _) => dir.clone(),
            (None, Some(root)) => root.join(command.name()),
            (None, None) => PathBuf::from("arraymech-out").join(command.name()),
        }
    }
}

/// Everything derived from a configuration before any subcommand work.
pub struct Setup {
    pub units: UnitSystem,
    pub geometry: ArrayGeometry,
    pub trap: TrapConfig,
    pub drive: DriveConfig,
    pub sums: LatticeSums,
    pub resonance: Resonance,
    pub profile: RabiProfile,
}

impl Setup {
    pub fn new(c: &RunConfig) -> Result<Self, CliError> {
        let units = UnitSystem::new(c.units.hbar_gamma_over_er)?;
        let geometry = ArrayGeometry::square(c.lattice.a, c.lattice.nx, c.lattice.ny, c.lattice.polarization)?;
        let trap = TrapConfig::from_depth(c.trap.depth_er, c.trap.length_lambda, &units)?;
        let policy = TruncationPolicy {
            initial_envelope: c.lattice_sum.initial_envelope_lambda,
            max_envelope: c.lattice_sum.max_envelope_lambda,
            tolerance: c.lattice_sum.tolerance_gamma,
            cutoff_ratio: c.lattice_sum.cutoff_ratio,
        };
        let sums = cooperative_shift_width(c.lattice.a, c.lattice.polarization, &policy)?;
        let laser_detuning = if c.drive.relative_to_cooperative {
            sums.shift + c.drive.detuning_gamma
        } else {
            c.drive.detuning_gamma
        };
        let beam = match c.drive.waist_lambda {
            Some(waist) => BeamProfile::Gaussian { waist },
            None => BeamProfile::Uniform,
        };
        let drive = match c.drive.backward_ratio {
            Some(ratio) => DriveConfig::two_sided(
                laser_detuning,
                c.drive.rabi_gamma,
                beam,
                Complex64::new(1.0, 0.0),
                Complex64::from_polar(ratio, c.drive.backward_phase_rad),
            ),
            None => DriveConfig::one_sided(laser_detuning, c.drive.rabi_gamma, beam),
        };
        let profile = drive.rabi_profile(&geometry)?;
        let resonance = sums.resonance(laser_detuning);
        Ok(Setup {
            units,
            geometry,
            trap,
            drive,
            sums,
            resonance,
            profile,
        })
    }

    pub fn summary(&self) -> Value {
        json!({
            "cooperative_shift_gamma": self.sums.shift,
            "cooperative_width_gamma": self.sums.width,
            "total_width_gamma": self.sums.total_width(),
            "lattice_sum_residual_gamma": self.sums.residual,
            "lattice_sum_envelope_lambda": self.sums.envelope,
            "lattice_sum_radius_lambda": self.sums.radius,
            "laser_detuning_gamma": self.drive.detuning,
            "cooperative_detuning_gamma": self.resonance.detuning,
            "eta": self.trap.eta,
            "nu0_gamma": self.trap.nu0,
            "nu0_Er": self.trap.nu0_recoil,
            "zero_point_length_lambda": self.trap.zero_point_length(),
            "mass": self.units.mass(),
        })
    }

    pub fn system(&self, exec: Execution) -> Result<MechanicalSystem, CliError> {
        let gamma_nm = gamma_nm_matrix(&self.geometry, exec);
        Ok(MechanicalSystem::assemble(
            &self.geometry,
            &self.profile,
            &self.resonance,
            &self.units,
            &self.trap,
            &gamma_nm,
            exec,
        )?)
    }
}

fn warn_saturation(pe: f64) {
    if pe > arraymech::cooperative::SATURATION_WARNING {
        log::warn!(
            "peak excited population {pe:.3} exceeds {}; weak-drive assumption strained",
            arraymech::cooperative::SATURATION_WARNING
        );
    }
}

fn temperature_json(t: Temperature, units: &UnitSystem) -> Value {
    match t {
        Temperature::Finite(v) => json!({
            "hbar_gamma": v,
            "Er": units.energy_in_recoil(v),
            "thermalizing": v > 0.0,
        }),
        Temperature::Infinite => json!({ "hbar_gamma": null, "Er": null, "infinite": true, "thermalizing": false }),
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Load configuration, run one command into its bundle, and write the manifest.
pub fn execute(command: Command, opts: &RunOptions) -> Result<(PathBuf, Value), CliError> {
    if command == Command::Validate {
        return validate(opts);
    }
    let path = opts
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("`{}` needs --config", command.name())))?;
    let loaded = RunConfig::load(path, &opts.overrides)?;
    let dir = opts.out_dir(command);
    run_loaded(command, &loaded, Some(path), &dir, opts)
}

fn run_loaded(
    command: Command,
    loaded: &LoadedConfig,
    config_path: Option<&Path>,
    dir: &Path,
    opts: &RunOptions,
) -> Result<(PathBuf, Value), CliError> {
    let started = unix_now();
    let exec = opts.exec();
    let c = &loaded.config;
    if let Command::Sweep { jobs } = command {
        return sweep(loaded, config_path, dir, opts, jobs, started);
    }
    let setup = Setup::new(c)?;
    let mut bundle = Bundle::create(dir, opts.force)?;
    let summary = match command {
        Command::Response => response(&setup, &mut bundle)?,
        Command::Modes => modes(&setup, c, &mut bundle, exec)?,
        Command::BzSpectrum => bz_spectrum(&setup, c, &mut bundle, exec)?,
        Command::Dynamics => dynamics(&setup, c, &mut bundle, exec)?,
        Command::Heating => heating(&setup, c, &mut bundle, exec)?,
        Command::Sweep { .. } | Command::Validate => unreachable!("dispatched above"),
    };
    let manifest = manifest(command, c, config_path, &loaded.overrides, setup.summary(), &summary, started);
    let dir = bundle.finish(manifest)?;
    Ok((dir, summary))
}

fn manifest(
    command: Command,
    c: &RunConfig,
    config_path: Option<&Path>,
    overrides: &[Override],
    derived: Value,
    summary: &Value,
    started: u64,
) -> Value {
    let seed = matches!(command, Command::Dynamics).then_some(c.dynamics.seed);
    json!({
        "tool": "arraymech",
        "version": env!("CARGO_PKG_VERSION"),
        "library_version": arraymech::VERSION,
        "command": command.name(),
        "config_file": config_path.map(|p| p.display().to_string()),
        "config": c,
        "overrides": overrides,
        "derived": derived,
        "seed": seed,
        "summary": summary,
        "started_unix": started,
        "finished_unix": unix_now(),
    })
}

fn response(s: &Setup, bundle: &mut Bundle) -> Result<Value, CliError> {
    let mut csv = Csv::new(&["atom", "ix", "iy", "x_lambda", "y_lambda", "rabi_abs_gamma", "excited_population"]);
    let mut peak: f64 = 0.0;
    for n in 0..s.geometry.len() {
        let (ix, iy) = s.geometry.indices(n);
        let r = s.geometry.position(n);
        let rabi = s.profile.total(n).norm();
        let pe = s.resonance.excited_population(rabi);
        peak = peak.max(pe);
        csv.row([n.to_string(), ix.to_string(), iy.to_string(), num(r[0]), num(r[1]), num(rabi), num(pe)]);
    }
    bundle.write_csv("sites.csv", &csv)?;
    warn_saturation(peak);
    let r = s.resonance.reflectivity();
    let summary = json!({
        "lattice_sums": s.sums,
        "laser_detuning_gamma": s.drive.detuning,
        "cooperative_detuning_gamma": s.resonance.detuning,
        "total_width_gamma": s.resonance.total_width,
        "peak_excited_population": peak,
        "saturation_warning": peak > arraymech::cooperative::SATURATION_WARNING,
        "reflectivity": { "re": r.re, "im": r.im, "abs2": r.norm_sqr() },
        "effective_temperature": temperature_json(s.resonance.effective_temperature(), &s.units),
    });
    bundle.write_json("response.json", &summary)?;
    Ok(summary)
}

fn modes(s: &Setup, c: &RunConfig, bundle: &mut Bundle, exec: Execution) -> Result<Value, CliError> {
    let system = s.system(exec)?;
    let d = diagonalize_modes(&system.nu2)?;
    let report = classify(&d, s.trap.nu0, c.modes.gap_threshold_nu0, c.modes.near_tolerance);
    let friction = mode_friction(&d, &system.friction)?;
    let freqs = d.frequencies();
    let mut spectrum = Csv::new(&["k", "nu2_gamma2", "re_nu_over_nu0", "im_nu_over_nu0", "mode_friction_gamma"]);
    for k in 0..d.len() {
        spectrum.row([
            (k + 1).to_string(),
            num(d.eigenvalues[k]),
            num(freqs[k].re / s.trap.nu0),
            num(freqs[k].im / s.trap.nu0),
            num(friction.diagonal[k]),
        ]);
    }
    bundle.write_csv("spectrum.csv", &spectrum)?;
    if c.modes.write_eigenvectors {
        let mut header = vec!["atom".to_string(), "ix".into(), "iy".into()];
        header.extend((1..=d.len()).map(|k| format!("mode_{k}")));
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut vectors = Csv::new(&refs);
        for n in 0..d.len() {
            let (ix, iy) = s.geometry.indices(n);
            let mut row = vec![n.to_string(), ix.to_string(), iy.to_string()];
            row.extend((0..d.len()).map(|k| num(d.eigenvectors[(n, k)])));
            vectors.row(row);
        }
        bundle.write_csv("eigenvectors.csv", &vectors)?;
    }
    let spring_ratio = system.spring.abs().max() / (system.mass() * s.trap.nu0 * s.trap.nu0);
    let summary = json!({
        "stability": report,
        "mode_friction_off_diagonal_ratio": friction.off_diagonal_ratio,
        "lowest_mode_overlaps": profile_overlaps(&d, &s.geometry, 0),
        "max_spring_ratio": spring_ratio,
        "neglected_terms": system.diagnostics,
    });
    bundle.write_json("classification.json", &summary)?;
    Ok(summary)
}

fn bz_spectrum(s: &Setup, c: &RunConfig, bundle: &mut Bundle, exec: Execution) -> Result<Value, CliError> {
    if c.drive.waist_lambda.is_some() || c.drive.backward_ratio.is_some() {
        log::warn!("infinite-lattice spectrum assumes uniform one-sided illumination at the peak Rabi frequency");
    }
    let lattice = InfiniteLattice::new(
        s.geometry.spacing(),
        s.geometry.polarization(),
        c.drive.rabi_gamma,
        &s.resonance,
        &s.units,
        s.trap.nu0,
    )?;
    let spec = fourier_spectrum(
        &lattice,
        c.modes.k_grid(),
        c.modes.shell,
        c.modes.max_shell,
        c.modes.shell_tolerance_nu0,
        exec,
    )?;
    let mut csv = Csv::new(&["kx_pi_over_a", "ky_pi_over_a", "re_nu_over_nu0", "im_nu_over_nu0"]);
    for p in &spec.points {
        csv.row([num(p.kx), num(p.ky), num(p.nu.re), num(p.nu.im)]);
    }
    bundle.write_csv("bz_spectrum.csv", &csv)?;
    let sorted = spec.sorted_real();
    let summary = json!({
        "grid": spec.grid,
        "shell": spec.shell,
        "shell_residual_nu0": spec.residual,
        "min_re_nu_over_nu0": sorted.first(),
        "max_re_nu_over_nu0": sorted.last(),
        "unstable_points": spec.points.iter().filter(|p| p.nu.im > 0.0).count(),
    });
    bundle.write_json("bz.json", &summary)?;
    Ok(summary)
}

fn dynamics(s: &Setup, c: &RunConfig, bundle: &mut Bundle, exec: Execution) -> Result<Value, CliError> {
    let system = s.system(exec)?;
    let d = diagonalize_modes(&system.nu2)?;
    let x0 = s.trap.zero_point_length();
    let langevin = LangevinSystem::from_mechanical(&system, &d, c.dynamics.basis.into(), x0)?;
    let dt = c.dynamics.dt_gamma_inv.unwrap_or(MAX_PHASE_STEP / langevin.max_frequency());
    let t_final = c.dynamics.t_final_gamma_inv.unwrap_or_else(|| {
        let min_alpha = langevin.friction.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_alpha > 0.0 {
            10.0 / min_alpha
        } else {
            50.0 * 2.0 * std::f64::consts::PI / s.trap.nu0
        }
    });
    let steps = (t_final / dt).round().max(1.0) as usize;
    let record_every = (steps / c.dynamics.outputs).max(1);
    let config = SimulationConfig {
        n_traj: c.dynamics.n_traj,
        seed: c.dynamics.seed,
        dt,
        t_final,
        record_every,
        exec,
    };
    let stats = simulate_langevin(&langevin, &config)?;
    let overlay = analytic_overlay(&langevin, &stats, x0);
    let label = |i: usize| match stats.basis {
        Basis::Site => format!("site-{i}"),
        Basis::Mode => format!("mode-{}", i + 1),
    };
    let mut csv = Csv::new(&[
        "t_gamma_inv",
        "t_nu0_inv",
        "coordinate",
        "mean_lambda",
        "var_lambda2",
        "stderr_var_lambda2",
        "analytic_mean_lambda",
        "analytic_var_lambda2",
    ]);
    for (t, &time) in stats.times.iter().enumerate() {
        for i in 0..langevin.len() {
            let (am, av) = match &overlay[i] {
                Some(a) => (num(a.mean[t][0]), num(a.variance[t][0])),
                None => (String::new(), String::new()),
            };
            csv.row([
                num(time),
                num(time * s.trap.nu0),
                label(i),
                num(stats.mean[t][i]),
                num(stats.variance[t][i]),
                num(stats.stderr_variance[t][i]),
                am,
                av,
            ]);
        }
    }
    bundle.write_csv("trajectories.csv", &csv)?;
    if let Some(cov) = stats.final_covariance.as_ref().filter(|m| m.nrows() <= 64) {
        let mut out = Csv::new(&["i", "j", "covariance_lambda2"]);
        for i in 0..cov.nrows() {
            for j in 0..cov.ncols() {
                out.row([label(i), label(j), num(cov[(i, j)])]);
            }
        }
        bundle.write_csv("covariance.csv", &out)?;
    }
    let first_passage: Vec<Value> = stats
        .first_passage
        .iter()
        .flatten()
        .enumerate()
        .map(|(i, f)| {
            json!({
                "coordinate": label(i),
                "escaped_fraction": f.escaped_fraction,
                "mean_time_gamma_inv": f.mean_time.is_finite().then_some(f.mean_time),
            })
        })
        .collect();
    let steady = (langevin.len() == 1)
        .then(|| steady_state_stats(&OscillatorParams::for_atom(&system, 0, x0)).ok())
        .flatten();
    let summary = json!({
        "basis": stats.basis,
        "friction_off_diagonal_ratio": langevin.friction_ratio,
        "rng": "ChaCha8, seed_from_u64(seed), stream = trajectory index",
        "n_traj": c.dynamics.n_traj,
        "seed": c.dynamics.seed,
        "dt_gamma_inv": dt,
        "t_final_gamma_inv": steps as f64 * dt,
        "steps": steps,
        "record_every": record_every,
        "nu0_gamma": s.trap.nu0,
        "escape_criterion": "sqrt(Var) = λ; first passage |z| ≥ λ reported per coordinate as a diagnostic",
        "first_passage": first_passage,
        "steady_state": steady,
        "neglected_terms": system.diagnostics,
    });
    bundle.write_json("dynamics.json", &summary)?;
    Ok(summary)
}

/// Closed-form moments per coordinate where the single-oscillator solution applies.
fn analytic_overlay(sys: &LangevinSystem, stats: &TrajectoryStats, x0: f64) -> Vec<Option<TrajectoryStats>> {
    if sys.basis == Basis::Site && sys.len() > 1 {
        return vec![None; sys.len()];
    }
    (0..sys.len())
        .map(|i| {
            let lambda = sys.eigenvalues[i];
            if lambda <= 0.0 {
                return None;
            }
            let params = OscillatorParams {
                frequency: lambda.sqrt(),
                friction: sys.friction[i],
                force: sys.force[i],
                diffusion: sys.diffusion[(i, i)],
                mass: sys.mass,
                initial_spread: x0,
            };
            analytic_moments(&params, &stats.times).ok()
        })
        .collect()
}

fn heating(s: &Setup, c: &RunConfig, bundle: &mut Bundle, exec: Execution) -> Result<Value, CliError> {
    let system = s.system(exec)?;
    let n = c.heating.atom.unwrap_or_else(|| s.geometry.central_site());
    let x0 = s.trap.zero_point_length();
    let params = OscillatorParams::for_atom(&system, n, x0);
    let rabi = s.profile.total(n).norm();
    let pe = s.resonance.excited_population(rabi);
    warn_saturation(pe);
    let waist = c.heating.waist_lambda.or(c.drive.waist_lambda);
    let a = s.geometry.spacing();
    let report = frictionless_stats(&params, a, s.trap.eta, waist, pe)?;
    let closed_shift = static_shift_closed_form(a, s.units.hbar_gamma_over_er(), s.trap.eta, pe);
    let budget = report.photons_to_escape.map(|n_esc| {
        let ratio = n_esc / REFERENCE_PHOTON_ESTIMATE;
        json!({
            "formula_value": n_esc,
            "reference_estimate": REFERENCE_PHOTON_ESTIMATE,
            "reference_estimate_configuration": "w = 4λ, a = λ/2, V = 200 E_R",
            "ratio_to_reference": ratio,
            "discrepancy": !(0.5..=2.0).contains(&ratio),
            "note": "n_esc is the closed-form formula value; the reference estimate is not reproduced by it",
        })
    });
    let r = s.resonance.reflectivity();
    let summary = json!({
        "atom": n,
        "inputs": {
            "spacing_lambda": a,
            "depth_Er": c.trap.depth_er,
            "length_lambda": c.trap.length_lambda,
            "eta": s.trap.eta,
            "nu0_gamma": s.trap.nu0,
            "rabi_gamma": rabi,
            "laser_detuning_gamma": s.drive.detuning,
            "cooperative_detuning_gamma": s.resonance.detuning,
            "total_width_gamma": s.resonance.total_width,
            "waist_lambda": waist,
            "hbar_gamma_over_Er": s.units.hbar_gamma_over_er(),
        },
        "excited_population": pe,
        "reflectivity_abs2": r.norm_sqr(),
        "effective_temperature": temperature_json(s.resonance.effective_temperature(), &s.units),
        "friction_gamma": params.friction,
        "friction_ignored": params.friction != 0.0,
        "static_shift_lambda": report.mean_amplitude,
        "static_shift_closed_form_lambda": closed_shift,
        "static_shift_over_excited_population": if pe > 0.0 { Some(report.mean_amplitude / pe) } else { None },
        "mean_peak_to_peak_lambda": report.peak_to_peak,
        "position_diffusion_lambda2_gamma": report.position_diffusion,
        "escape_time_gamma_inv": finite(report.escape_time),
        "escape_time_closed_form_gamma_inv": finite(report.escape_time_closed_form),
        "escape_time_alternative_form_gamma_inv": finite(report.escape_time_alternative),
        "escape_time_check": {
            "consistent_form": "λ²/D_z = π²/(η⁴ P_e)",
            "alternative_form": "π²/(η² P_e)",
            "discrepancy": report.escape_time_alternative.is_finite()
                && (report.escape_time_alternative / report.escape_time - 1.0).abs() > 1e-6,
        },
        "photons_to_escape": report.photons_to_escape,
        "photon_budget_check": budget,
        "steady_state": steady_state_stats(&params).ok(),
    });
    bundle.write_json("heating.json", &summary)?;
    Ok(summary)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn sweep(
    loaded: &LoadedConfig,
    config_path: Option<&Path>,
    dir: &Path,
    opts: &RunOptions,
    jobs: usize,
    started: u64,
) -> Result<(PathBuf, Value), CliError> {
    let c = &loaded.config;
    let spec = c
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("`sweep` needs a [sweep] section".into()))?;
    let points: Vec<RunConfig> = spec
        .values
        .iter()
        .map(|&v| c.with_value(&spec.parameter, v))
        .collect::<Result<_, _>>()?;
    let mut bundle = Bundle::create(dir, opts.force)?;
    let sub = match spec.command {
        SweepCommand::Modes => Command::Modes,
        SweepCommand::Response => Command::Response,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Failed(format!("thread pool: {e}")))?;
    let results: Vec<Result<(PathBuf, Value), CliError>> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, cfg)| {
                let point = LoadedConfig {
                    config: cfg.clone(),
                    overrides: Vec::new(),
                };
                run_loaded(sub, &point, config_path, &dir.join(format!("point-{i:03}")), opts)
            })
            .collect()
    });
    let results: Vec<(PathBuf, Value)> = results.into_iter().collect::<Result<_, _>>()?;

    let mut aggregate = match sub {
        Command::Modes => Csv::new(&[
            "value",
            "unstable_count",
            "min_re_nu_over_nu0",
            "max_re_nu_over_nu0",
            "top_gap_nu0",
            "near_nu0_count",
            "max_growth_rate_nu0",
        ]),
        _ => Csv::new(&["value", "peak_excited_population", "reflectivity_abs2", "effective_temperature_Er"]),
    };
    for (v, (_, summary)) in spec.values.iter().zip(&results) {
        match sub {
            Command::Modes => {
                let r = &summary["stability"];
                let f = |k: &str| num(r[k].as_f64().unwrap_or(f64::NAN));
                let i = |k: &str| r[k].as_u64().map(|x| x.to_string()).unwrap_or_default();
                aggregate.row([
                    num(*v),
                    i("unstable_count"),
                    f("min_frequency"),
                    f("max_frequency"),
                    f("top_gap"),
                    i("near_nu0_count"),
                    f("max_growth_rate"),
                ]);
            }
            _ => {
                let te = summary["effective_temperature"]["Er"].as_f64();
                aggregate.row([
                    num(*v),
                    num(summary["peak_excited_population"].as_f64().unwrap_or(f64::NAN)),
                    num(summary["reflectivity"]["abs2"].as_f64().unwrap_or(f64::NAN)),
                    te.map(num).unwrap_or_else(|| "inf".into()),
                ]);
            }
        }
    }
    bundle.write_csv("aggregate.csv", &aggregate)?;
    let summary = json!({
        "parameter": spec.parameter,
        "values": spec.values,
        "command": sub.name(),
        "points": results.iter().map(|(p, _)| p.display().to_string()).collect::<Vec<_>>(),
    });
    let derived = json!({ "points": results.len() });
    let m = manifest(Command::Sweep { jobs }, c, config_path, &loaded.overrides, derived, &summary, started);
    Ok((bundle.finish(m)?, summary))
}

fn validate(opts: &RunOptions) -> Result<(PathBuf, Value), CliError> {
    let started = unix_now();
    let outcomes = run_invariant_suite(opts.exec());
    for o in &outcomes {
        println!(
            "{} {}::{} ({:.2} s) {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.module,
            o.name,
            o.seconds,
            o.detail
        );
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let summary = json!({ "checks": outcomes, "failed": failed });
    let dir = if opts.out.is_some() || opts.out_root.is_some() {
        let dir = opts.out_dir(Command::Validate);
        let mut bundle = Bundle::create(&dir, opts.force)?;
        bundle.write_json("validation.json", &summary)?;
        bundle.finish(json!({
            "tool": "arraymech",
            "version": env!("CARGO_PKG_VERSION"),
            "library_version": arraymech::VERSION,
            "command": "validate",
            "started_unix": started,
            "finished_unix": unix_now(),
        }))?
    } else {
        PathBuf::new()
    };
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} invariant check(s) failed")));
    }
    Ok((dir, summary))
}
