//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use arraymech::coefficients::{diffusion_matrix, single_atom_coefficients, spring_matrix, two_sided_coefficients};
use arraymech::cooperative::{closed_form_total_width, gamma_nm_matrix, lattice_sums, TruncationPolicy};
use arraymech::dynamics::{
    analytic_moments, fitted_slope, integrate_mean, simulate_langevin, BasisChoice, LangevinSystem, OscillatorParams,
    SimulationConfig,
};
use arraymech::greens::{force_kernel_full, green_tensor};
use arraymech::modes::{diagonalize_modes, fourier_spectrum, rms_relative_deviation, InfiniteLattice, KGrid};
use arraymech::params::{ArrayGeometry, BeamProfile, DriveConfig, Polarization, UnitSystem};
use arraymech::{Execution, Q};
use arraymech_cli::commands::Setup;
use arraymech_cli::{execute, Command, RunConfig, RunOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

// Tolerances and bands, one block per criterion.
const WIDTH_REL_TOL: f64 = 0.02;
const WIDTH_MIN_ENVELOPE: f64 = 150.0;
const WIDTH_MAX_SECONDS: f64 = 10.0;

const SPECTRUM_MAX_BAND: (f64, f64) = (1.20, 1.30);
const SPECTRUM_MIN_BAND: (f64, f64) = (0.60, 0.70);
const SPECTRUM_RMS_TOL: f64 = 0.03;
const SPECTRUM_MAX_SECONDS: f64 = 30.0;

const GAP_TARGET: f64 = 0.062;
const GAP_TOL: f64 = 0.010;
const GAP_MIN_NEAR_COUNT: u64 = 30;

const REFLECTIVITY_TARGET: f64 = 0.8;
const REFLECTIVITY_REL_TOL: f64 = 1e-12;
const TEMPERATURE_TARGET_ER: f64 = 506.25;
const TEMPERATURE_REL_TOL: f64 = 1e-9;
const SHIFT_PER_POPULATION: f64 = 1.07;
const SHIFT_REL_TOL: f64 = 0.01;

const DEEP_DEPTH_ER: f64 = 1000.0;
const DEEP_MAX: f64 = 1.06;
const DEEP_MIN: f64 = 0.93;
const DEEP_TOL: f64 = 0.01;

const KERNEL_SAMPLES: usize = 20;
const KERNEL_RANGE: (f64, f64) = (0.3, 3.0);
const KERNEL_STEP: f64 = 1e-4;
const KERNEL_REL_TOL: f64 = 1e-6;

const MEAN_PERIODS: f64 = 50.0;
const MEAN_ABS_TOL: f64 = 1e-6;

const MC_TRAJECTORIES: usize = 10_000;
const MC_Z_MAX: f64 = 3.0;
const MC_EQUIPARTITION_TOL: f64 = 0.03;
const MC_SLOPE_TOL: f64 = 0.05;
const MC_MAX_SECONDS: f64 = 120.0;

const PHOTON_BUDGET_EXPECTED: f64 = 1.1e5;
const PHOTON_BUDGET_BAND: f64 = 0.05;

const REDUCTION_TOL: f64 = 1e-12;

type Outcome = (bool, String);

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(&configs().join(name), &[]).expect("shipped config loads").config
}

fn run_cli(command: Command, name: &str, out: &std::path::Path) -> Value {
    let opts = RunOptions {
        config: Some(configs().join(name)),
        out: Some(out.join(name.trim_end_matches(".toml")).join(command.name())),
        ..RunOptions::default()
    };
    execute(command, &opts).expect("command succeeds").1
}

fn within(x: f64, band: (f64, f64)) -> bool {
    x >= band.0 && x <= band.1
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Sorted real parts of `ν_k/ν₀` for a finite array.
fn finite_spectrum(c: &RunConfig) -> (Setup, Vec<f64>, usize) {
    let setup = Setup::new(c).unwrap();
    let system = setup.system(Execution::default()).unwrap();
    let d = diagonalize_modes(&system.nu2).unwrap();
    let nu0 = setup.trap.nu0;
    let mut v: Vec<f64> = d.frequencies().iter().map(|f| f.re / nu0).collect();
    v.sort_by(f64::total_cmp);
    let unstable = d.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    (setup, v, unstable)
}

fn infinite_spectrum(setup: &Setup, c: &RunConfig, grid: KGrid) -> Vec<f64> {
    let lattice = InfiniteLattice::new(
        setup.geometry.spacing(),
        setup.geometry.polarization(),
        c.drive.rabi_gamma,
        &setup.resonance,
        &setup.units,
        setup.trap.nu0,
    )
    .unwrap();
    let spec = fourier_spectrum(
        &lattice,
        grid,
        c.modes.shell,
        c.modes.max_shell,
        c.modes.shell_tolerance_nu0,
        Execution::default(),
    )
    .unwrap();
    spec.sorted_real()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let policy = TruncationPolicy::default();
    let sums = lattice_sums(0.5, Polarization::CircularXy, &policy, Execution::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let target = 3.0 / std::f64::consts::PI;
    let err = rel(sums.total_width(), target);
    (
        err < WIDTH_REL_TOL && sums.envelope >= WIDTH_MIN_ENVELOPE && secs < WIDTH_MAX_SECONDS,
        format!(
            "γ+Γ = {:.7} vs 3/π = {target:.7} (rel {err:.1e}), envelope {} λ, {secs:.2} s",
            sums.total_width(),
            sums.envelope
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let c = load("uniform_16x16.toml");
    let (setup, finite, unstable) = finite_spectrum(&c);
    let standing = infinite_spectrum(&setup, &c, KGrid::StandingWave { nx: 16, ny: 16 });
    let periodic = infinite_spectrum(&setup, &c, KGrid::Periodic { n: 16 });
    let secs = start.elapsed().as_secs_f64();
    let (lo, hi) = (finite[0], finite[finite.len() - 1]);
    let rms = rms_relative_deviation(&finite, &standing);
    let rms_periodic = rms_relative_deviation(&finite, &periodic);
    (
        within(hi, SPECTRUM_MAX_BAND)
            && within(lo, SPECTRUM_MIN_BAND)
            && rms < SPECTRUM_RMS_TOL
            && unstable == 0
            && secs < SPECTRUM_MAX_SECONDS,
        format!(
            "finite ν/ν₀ in [{lo:.4}, {hi:.4}], RMS vs standing-wave grid {:.2}% \
             (periodic grid {:.2}%, info), {secs:.2} s",
            100.0 * rms,
            100.0 * rms_periodic
        ),
    )
}

fn criterion_3(out: &std::path::Path) -> Outcome {
    let summary = run_cli(Command::Modes, "gaussian_10x10.toml", out);
    let s = &summary["stability"];
    let gap = s["top_gap"].as_f64().unwrap();
    let near = s["near_nu0_count"].as_u64().unwrap();
    let unstable = s["unstable_count"].as_u64().unwrap();
    (
        (gap - GAP_TARGET).abs() <= GAP_TOL && near >= GAP_MIN_NEAR_COUNT && unstable == 0,
        format!("top gap {gap:.4} ν₀, {near} modes within 1% of ν₀, {unstable} unstable"),
    )
}

fn criterion_4(out: &std::path::Path) -> Outcome {
    let summary = run_cli(Command::Modes, "gaussian_10x10_wide.toml", out);
    let unstable = summary["stability"]["unstable_count"].as_u64().unwrap();
    let o = &summary["lowest_mode_overlaps"];
    let corner = o["corner"].as_f64().unwrap();
    let uniform = o["uniform"].as_f64().unwrap();
    (
        unstable >= 1 && corner > uniform,
        format!("{unstable} unstable modes; most unstable overlaps corner {corner:.3}, uniform {uniform:.2e}"),
    )
}

fn criterion_5() -> Outcome {
    let c = load("uniform_16x16.toml");
    let w = closed_form_total_width(0.5);
    let res = arraymech::cooperative::Resonance::new(-w / 4.0, w).unwrap();
    let r2 = res.reflectivity().norm_sqr();
    let te = res.effective_temperature().value() * UnitSystem::rubidium87().hbar_gamma_over_er();

    let setup = Setup::new(&c).unwrap();
    let system = setup.system(Execution::default()).unwrap();
    let n = setup.geometry.central_site();
    let params = OscillatorParams::for_atom(&system, n, setup.trap.zero_point_length());
    let pe = setup.resonance.excited_population(setup.profile.total(n).norm());
    let ratio = params.static_shift() / pe;
    (
        rel(r2, REFLECTIVITY_TARGET) < REFLECTIVITY_REL_TOL
            && rel(te, TEMPERATURE_TARGET_ER) < TEMPERATURE_REL_TOL
            && rel(ratio, SHIFT_PER_POPULATION) < SHIFT_REL_TOL,
        format!("|r|² = {r2:.15}, T_e = {te:.9} E_R, z̄/(λ P_e) = {ratio:.4}"),
    )
}

fn criterion_6() -> Outcome {
    let c = load("uniform_16x16.toml").with_value("trap.depth_Er", DEEP_DEPTH_ER).unwrap();
    let (setup, finite, _) = finite_spectrum(&c);
    let (lo, hi) = (finite[0], finite[finite.len() - 1]);
    let shallow = finite_spectrum(&load("uniform_16x16.toml")).1;
    // The coupling enters as K/(m ν₀²) with ν₀² ∝ V, so ν²/ν₀² − 1 scales as 1/V.
    let scaled_min = (1.0 - (1.0 - shallow[0].powi(2)) * 200.0 / DEEP_DEPTH_ER).sqrt();
    let bz = infinite_spectrum(&setup, &c, KGrid::Periodic { n: 16 });
    (
        (hi - DEEP_MAX).abs() <= DEEP_TOL && (lo - DEEP_MIN).abs() <= DEEP_TOL,
        format!(
            "finite array ν/ν₀ in [{lo:.4}, {hi:.4}]; 1/V scaling of the V=200 minimum gives {scaled_min:.4}; \
             periodic zone grid range [{:.4}, {:.4}] (info)",
            bz[0],
            bz[bz.len() - 1]
        ),
    )
}

/// `∂²_z G(r⊥, z)` at `z = 0` by the five-point stencil.
fn second_z_derivative(r: [f64; 2], h: f64) -> [[Complex64; 3]; 3] {
    let g = |z: f64| green_tensor([r[0], r[1], z]).unwrap();
    let (m2, m1, c0, p1, p2) = (g(-2.0 * h), g(-h), g(0.0), g(h), g(2.0 * h));
    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (-m2[(i, j)] + 16.0 * m1[(i, j)] - 30.0 * c0[(i, j)] + 16.0 * p1[(i, j)] - p2[(i, j)])
                / (12.0 * h * h);
        }
    }
    out
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    for _ in 0..KERNEL_SAMPLES {
        let rho = rng.random_range(KERNEL_RANGE.0..=KERNEL_RANGE.1);
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let r = [rho * phi.cos(), rho * phi.sin()];
        let fd = second_z_derivative(r, KERNEL_STEP);
        let f = force_kernel_full([Q * r[0], Q * r[1]]).unwrap();
        let scale = f.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for i in 0..3 {
            for j in 0..3 {
                let err = (f[(i, j)] - fd[i][j] * (2.0 / (Q * Q))).norm() / scale;
                worst = worst.max(err);
            }
        }
    }
    (
        worst < KERNEL_REL_TOL,
        format!("max relative error {worst:.2e} over {KERNEL_SAMPLES} separations"),
    )
}

fn criterion_8() -> Outcome {
    let base = load("uniform_16x16.toml");
    let w = Setup::new(&base).unwrap().sums.total_width();
    let c = base.with_value("drive.detuning_gamma", -w / 4.0).unwrap();
    let setup = Setup::new(&c).unwrap();
    let system = setup.system(Execution::default()).unwrap();
    let d = diagonalize_modes(&system.nu2).unwrap();
    let x0 = setup.trap.zero_point_length();
    let sys = LangevinSystem::from_mechanical(&system, &d, BasisChoice::Mode, x0).unwrap();
    let period = std::f64::consts::TAU / setup.trap.nu0;
    let dt = period / 1000.0 * (setup.trap.nu0 / sys.max_frequency()).min(1.0);
    let traj = integrate_mean(&sys, dt, MEAN_PERIODS * period, 50).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..sys.len() {
        let params = OscillatorParams {
            frequency: sys.eigenvalues[k].sqrt(),
            friction: sys.friction[k],
            force: sys.force[k],
            diffusion: 0.0,
            mass: sys.mass,
            initial_spread: x0,
        };
        let exact = analytic_moments(&params, &traj.times).unwrap();
        for t in 0..traj.times.len() {
            worst = worst.max((traj.mean[t][k] - exact.mean[t][0]).abs());
        }
    }
    (
        worst < MEAN_ABS_TOL && sys.friction_ratio < 1e-12,
        format!(
            "{} modes (friction off-diagonal ratio {:.1e}), {} output times over {MEAN_PERIODS} periods: \
             max |Δ⟨z⟩| = {worst:.2e} λ",
            sys.len(),
            sys.friction_ratio,
            traj.times.len()
        ),
    )
}

fn single_atom(detuning: f64) -> (Setup, OscillatorParams) {
    let c = load("single_atom_cooling.toml").with_value("drive.detuning_gamma", detuning).unwrap();
    let setup = Setup::new(&c).unwrap();
    let system = setup.system(Execution::default()).unwrap();
    let params = OscillatorParams::for_atom(&system, 0, setup.trap.zero_point_length());
    (setup, params)
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let base = load("single_atom_cooling.toml");
    let w = Setup::new(&base).unwrap().sums.total_width();

    let (setup, cooled) = single_atom(-w / 2.0);
    let dt = 0.05 / cooled.frequency;
    let t_final = 10.0 / cooled.friction;
    let steps = (t_final / dt).round() as usize;
    let stats = simulate_langevin(
        &LangevinSystem::single(&cooled),
        &SimulationConfig {
            n_traj: MC_TRAJECTORIES,
            seed: 1,
            dt,
            t_final,
            record_every: steps / 40,
            exec: Execution::default(),
        },
    )
    .unwrap();
    let exact = analytic_moments(&cooled, &stats.times).unwrap();
    let last = stats.times.len() - 1;
    let z = (stats.variance[last][0] - exact.variance[last][0]) / stats.stderr_variance[last][0];
    let late: Vec<f64> = (0..stats.times.len())
        .filter(|&t| stats.times[t] * cooled.friction >= 5.0)
        .map(|t| stats.variance[t][0])
        .collect();
    let var = late.iter().sum::<f64>() / late.len() as f64;
    let kt = setup.resonance.effective_temperature().value();
    let equipartition = cooled.mass * cooled.frequency.powi(2) * var / kt - 1.0;

    let (_, free) = single_atom(0.0);
    let period = std::f64::consts::TAU / free.frequency;
    let per_period = 200;
    let periods = 20;
    let heated = simulate_langevin(
        &LangevinSystem::single(&free),
        &SimulationConfig {
            n_traj: MC_TRAJECTORIES,
            seed: 2,
            dt: period / per_period as f64,
            t_final: periods as f64 * period,
            record_every: per_period,
            exec: Execution::default(),
        },
    )
    .unwrap();
    let var_free: Vec<f64> = heated.variance.iter().map(|v| v[0]).collect();
    let slope = fitted_slope(&heated.times, &var_free);
    let slope_err = rel(slope, free.position_diffusion());
    let secs = start.elapsed().as_secs_f64();
    (
        z.abs() < MC_Z_MAX
            && equipartition.abs() < MC_EQUIPARTITION_TOL
            && slope_err < MC_SLOPE_TOL
            && free.friction.abs() < 1e-15
            && secs < MC_MAX_SECONDS,
        format!(
            "final-time z = {z:+.2}, equipartition residual {:+.2}%, frictionless slope {slope:.4e} vs D_z {:.4e} \
             ({:.2}%), {secs:.1} s",
            100.0 * equipartition,
            free.position_diffusion(),
            100.0 * slope_err
        ),
    )
}

fn criterion_10(out: &std::path::Path) -> Outcome {
    let summary = run_cli(Command::Heating, "uniform_16x16.toml", out);
    let n_esc = summary["photons_to_escape"].as_f64().unwrap();
    let check = &summary["photon_budget_check"];
    let flagged = check["discrepancy"].as_bool().unwrap();
    let reference = check["reference_estimate"].as_f64().unwrap();
    let alternative = summary["escape_time_alternative_form_gamma_inv"].as_f64().unwrap();
    (
        rel(n_esc, PHOTON_BUDGET_EXPECTED) < PHOTON_BUDGET_BAND && flagged && alternative.is_finite(),
        format!(
            "n_esc = {n_esc:.4e} (reference estimate {reference}, flagged: {flagged}), \
             escape time {:.1} γ⁻¹ consistent, {alternative:.1} γ⁻¹ alternative form",
            summary["escape_time_gamma_inv"].as_f64().unwrap()
        ),
    )
}

fn criterion_11() -> Outcome {
    let exec = Execution::default();
    let units = UnitSystem::rubidium87();
    let g = ArrayGeometry::square(0.5, 6, 6, Polarization::CircularXy).unwrap();
    let gnm = gamma_nm_matrix(&g, exec);
    let w = closed_form_total_width(0.5);
    let res = arraymech::cooperative::Resonance::new(-0.3 * w, w).unwrap();

    let one_sided = DriveConfig::one_sided(-0.3 * w, 0.25, BeamProfile::Gaussian { waist: 2.4 });
    let p = one_sided.rabi_profile(&g).unwrap();
    let general = two_sided_coefficients(&g, &p, &res, &units, &gnm, 0.2, exec).unwrap();
    let totals = p.totals();
    let spring = spring_matrix(&g, &totals, &res, exec).unwrap();
    let diffusion = diffusion_matrix(&totals, &gnm, &res).unwrap();
    let mut worst: f64 = 0.0;
    for n in 0..g.len() {
        let s = single_atom_coefficients(totals[n], &res, &units);
        worst = worst.max(rel(general.force[n], s.force));
        worst = worst.max(rel(general.friction[n], s.friction));
    }
    worst = worst.max((&general.spring - &spring).abs().max() / spring.abs().max());
    worst = worst.max((&general.diffusion - &diffusion).abs().max() / diffusion.abs().max());

    let one = Complex64::new(1.0, 0.0);
    let symmetric = DriveConfig::two_sided(-0.3 * w, 0.25, BeamProfile::Uniform, one, one);
    let ps = symmetric.rabi_profile(&g).unwrap();
    let cs = two_sided_coefficients(&g, &ps, &res, &units, &gnm, 0.2, exec).unwrap();
    let reference = single_atom_coefficients(Complex64::new(0.25, 0.0), &res, &units).force;
    let net = cs.force.iter().fold(0.0f64, |m, f| m.max(f.abs())) / reference;
    (
        worst < REDUCTION_TOL && net < REDUCTION_TOL,
        format!("one-sided reduction max relative deviation {worst:.2e}; symmetric drive max |f̄|/f̄₁ = {net:.2e}"),
    )
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let out = tmp.path();
    let criteria: Vec<(u32, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, Box::new(criterion_1)),
        (2, Box::new(criterion_2)),
        (3, Box::new(|| criterion_3(out))),
        (4, Box::new(|| criterion_4(out))),
        (5, Box::new(criterion_5)),
        (6, Box::new(criterion_6)),
        (7, Box::new(criterion_7)),
        (8, Box::new(criterion_8)),
        (9, Box::new(criterion_9)),
        (10, Box::new(|| criterion_10(out))),
        (11, Box::new(criterion_11)),
    ];
    let mut failed = Vec::new();
    let total = Instant::now();
    for (n, check) in &criteria {
        let start = Instant::now();
        let (passed, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(outcome) => outcome,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {n}: {detail} [{:.2} s]", secs(start.elapsed()));
        if !passed {
            failed.push(*n);
        }
    }
    println!(
        "{} of {} criteria passed in {:.1} s",
        criteria.len() - failed.len(),
        criteria.len(),
        secs(total.elapsed())
    );
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}
