//! Self-contained invariant suite run by the `validate` command.
//!
//! Every check is cheap (the whole suite takes a few seconds) and returns a
//! pass/fail verdict with a one-line detail string.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::coefficients::{
    diffusion_matrix, nu2_matrix, single_atom_coefficients, spring_matrix, two_sided_coefficients,
};
use crate::cooperative::{
    closed_form_total_width, cooperative_shift_width, damped_lattice_sum, gamma_nm_matrix, Resonance,
    TruncationPolicy,
};
use crate::dynamics::{
    analytic_moments, integrate_mean, simulate_langevin, steady_state_stats, LangevinSystem, OscillatorParams,
    SimulationConfig,
};
use crate::exec::Execution;
use crate::greens::{force_kernel_full, green_tensor, kernel_identity_error};
use crate::linalg::{asymmetry, eigen_range};
use crate::modes::diagonalize_modes;
use crate::params::{ArrayGeometry, BeamProfile, DriveConfig, Polarization, TrapConfig, UnitSystem};
use crate::Result;

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type CheckFn = fn(Execution) -> Result<(bool, String)>;

const CHECKS: &[(&str, &str, CheckFn)] = &[
    ("params", "trap_identity", trap_identity),
    ("params", "geometry_centering", geometry_centering),
    ("params", "gaussian_monotone", gaussian_monotone),
    ("greens", "tensor_symmetry", tensor_symmetry),
    ("greens", "kernel_identity", kernel_identity),
    ("cooperative", "closed_form_width", closed_form_width),
    ("cooperative", "gamma_nm_psd", gamma_nm_psd),
    ("cooperative", "worked_observables", worked_observables),
    ("cooperative", "thread_independence", thread_independence),
    ("coefficients", "matrix_structure", matrix_structure),
    ("coefficients", "two_sided_reduction", two_sided_reduction),
    ("coefficients", "symmetric_drive", symmetric_drive),
    ("modes", "decomposition", decomposition),
    ("dynamics", "initial_condition", initial_condition),
    ("dynamics", "equipartition", equipartition),
    ("dynamics", "noise_free_mean", noise_free_mean),
    ("dynamics", "monte_carlo_variance", monte_carlo_variance),
];

/// Run every check; errors raised inside a check count as failures.
pub fn run_invariant_suite(exec: Execution) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|&(module, name, check)| {
            let start = Instant::now();
            let (passed, detail) = match check(exec) {
                Ok(v) => v,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckOutcome {
                module,
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn verdict(passed: bool, detail: String) -> Result<(bool, String)> {
    Ok((passed, detail))
}

fn trap_identity(_: Execution) -> Result<(bool, String)> {
    let units = UnitSystem::rubidium87();
    let mut worst: f64 = 0.0;
    for &(v, l) in &[(200.0, 0.682), (1000.0, 0.682), (500.0, 0.5), (37.5, 0.4)] {
        let t = TrapConfig::from_depth(v, l, &units)?;
        worst = worst.max((t.nu0 * 2.0 * t.eta * t.eta / units.recoil() - 1.0).abs());
    }
    verdict(worst < 1e-12, format!("max relative error {worst:.2e}"))
}

fn geometry_centering(_: Execution) -> Result<(bool, String)> {
    let g = ArrayGeometry::square(0.5, 16, 15, Polarization::CircularXy)?;
    let (sx, sy) = g.positions().iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    let err = sx.abs().max(sy.abs());
    verdict(err < 1e-12, format!("|Σ r| = {err:.2e}"))
}

fn gaussian_monotone(_: Execution) -> Result<(bool, String)> {
    let g = ArrayGeometry::square(0.5, 10, 10, Polarization::CircularXy)?;
    let drive = DriveConfig::one_sided(0.0, 0.25, BeamProfile::Gaussian { waist: 2.4 });
    let totals = drive.rabi_profile(&g)?.totals();
    let mut pairs: Vec<(f64, f64)> = g
        .positions()
        .iter()
        .zip(&totals)
        .map(|(r, a)| (r[0].hypot(r[1]), a.norm()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ok = pairs.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-15));
    verdict(ok && pairs[0].1 <= 0.25, format!("{} sites sorted by radius", pairs.len()))
}

const SAMPLE_POINTS: [[f64; 2]; 5] = [[0.7, 0.3], [0.5, 0.0], [1.3, -2.1], [-0.35, 2.8], [2.2, 1.9]];

fn tensor_symmetry(_: Execution) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for p in SAMPLE_POINTS {
        let g = green_tensor([p[0], p[1], 0.4])?;
        let f = force_kernel_full([crate::Q * p[0], crate::Q * p[1]])?;
        worst = worst.max((g - g.transpose()).iter().map(|c| c.norm()).fold(0.0, f64::max));
        worst = worst.max((f - f.transpose()).iter().map(|c| c.norm()).fold(0.0, f64::max));
    }
    verdict(worst < 1e-14, format!("max |T − Tᵀ| = {worst:.2e}"))
}

fn kernel_identity(_: Execution) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for p in SAMPLE_POINTS {
        worst = worst.max(kernel_identity_error(p, 1e-4)?);
    }
    verdict(worst < 1e-6, format!("max relative error {worst:.2e}"))
}

fn closed_form_width(_: Execution) -> Result<(bool, String)> {
    let sums = cooperative_shift_width(0.5, Polarization::CircularXy, &TruncationPolicy::default())?;
    let exact = closed_form_total_width(0.5);
    let err = (sums.total_width() / exact - 1.0).abs();
    verdict(
        err < 0.02,
        format!("γ+Γ = {:.7} vs {exact:.7}, Δ = {:.7}", sums.total_width(), sums.shift),
    )
}

fn gamma_nm_psd(exec: Execution) -> Result<(bool, String)> {
    let g = ArrayGeometry::square(0.5, 6, 6, Polarization::CircularXy)?;
    let m = gamma_nm_matrix(&g, exec);
    let (lo, hi) = eigen_range(&m);
    let asym = asymmetry(&m);
    verdict(
        lo >= -1e-10 * hi && asym == 0.0 && (0..36).all(|i| m[(i, i)] == 1.0),
        format!("eigenvalues in [{lo:.3e}, {hi:.3e}]"),
    )
}

fn worked_observables(_: Execution) -> Result<(bool, String)> {
    let w = closed_form_total_width(0.5);
    let res = Resonance::new(-w / 4.0, w)?;
    let r2 = res.reflectivity().norm_sqr();
    let te = res.effective_temperature().value() * UnitSystem::rubidium87().hbar_gamma_over_er();
    let ok = (r2 / 0.8 - 1.0).abs() < 1e-12 && (te / 506.25 - 1.0).abs() < 1e-9;
    verdict(ok, format!("|r|² = {r2:.15}, T_e = {te:.10} E_R"))
}

fn thread_independence(_: Execution) -> Result<(bool, String)> {
    let a = damped_lattice_sum(0.5, Polarization::CircularXy, 50.0, 4.5, Execution::Sequential)?;
    let b = damped_lattice_sum(0.5, Polarization::CircularXy, 50.0, 4.5, Execution::Parallel)?;
    verdict(
        a.0.to_bits() == b.0.to_bits() && a.1.to_bits() == b.1.to_bits(),
        format!("sequential {a:?}, parallel {b:?}"),
    )
}

fn fixture(spacing: f64, n: usize, drive: &DriveConfig) -> Result<(ArrayGeometry, crate::params::RabiProfile, Resonance)> {
    let g = ArrayGeometry::square(spacing, n, n, Polarization::CircularXy)?;
    let p = drive.rabi_profile(&g)?;
    let res = Resonance::new(drive.detuning, closed_form_total_width(spacing))?;
    Ok((g, p, res))
}

fn matrix_structure(exec: Execution) -> Result<(bool, String)> {
    let drive = DriveConfig::one_sided(-0.2, 0.25, BeamProfile::Gaussian { waist: 2.4 });
    let (g, p, res) = fixture(0.5, 6, &drive)?;
    let k = spring_matrix(&g, &p.totals(), &res, exec)?;
    let d = diffusion_matrix(&p.totals(), &gamma_nm_matrix(&g, exec), &res)?;
    let (lo, hi) = eigen_range(&d);
    verdict(
        asymmetry(&k) <= 1e-12 * k.abs().max() && lo >= -1e-8 * hi,
        format!("K asymmetry {:.1e}, D_p eigenvalues in [{lo:.3e}, {hi:.3e}]", asymmetry(&k)),
    )
}

fn two_sided_reduction(exec: Execution) -> Result<(bool, String)> {
    let units = UnitSystem::rubidium87();
    let drive = DriveConfig::one_sided(-0.3, 0.25, BeamProfile::Gaussian { waist: 2.4 });
    let (g, p, res) = fixture(0.5, 5, &drive)?;
    let gnm = gamma_nm_matrix(&g, exec);
    let general = two_sided_coefficients(&g, &p, &res, &units, &gnm, 0.2, exec)?;
    let spring = spring_matrix(&g, &p.totals(), &res, exec)?;
    let mut worst: f64 = 0.0;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    for n in 0..g.len() {
        let single = single_atom_coefficients(p.total(n), &res, &units);
        worst = worst.max(rel(general.force[n], single.force));
        worst = worst.max(rel(general.friction[n], single.friction));
    }
    let k_scale = spring.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    worst = worst.max((general.spring - spring).abs().max() / k_scale);
    verdict(worst < 1e-12, format!("max relative deviation {worst:.2e}"))
}

fn symmetric_drive(exec: Execution) -> Result<(bool, String)> {
    let units = UnitSystem::rubidium87();
    let one = Complex64::new(1.0, 0.0);
    let drive = DriveConfig::two_sided(-0.3, 0.25, BeamProfile::Uniform, one, one);
    let (g, p, res) = fixture(0.5, 4, &drive)?;
    let gnm = gamma_nm_matrix(&g, exec);
    let c = two_sided_coefficients(&g, &p, &res, &units, &gnm, 0.2, exec)?;
    let single = single_atom_coefficients(Complex64::new(0.25, 0.0), &res, &units).force;
    let worst = c.force.iter().fold(0.0f64, |m, f| m.max(f.abs())) / single;
    verdict(worst < 1e-12, format!("max |f̄_n| / f̄_one-sided = {worst:.2e}"))
}

fn decomposition(exec: Execution) -> Result<(bool, String)> {
    let units = UnitSystem::rubidium87();
    let trap = TrapConfig::from_depth(200.0, 0.682, &units)?;
    let drive = DriveConfig::one_sided(0.0, 0.25, BeamProfile::Uniform);
    let (g, p, res) = fixture(0.5, 8, &drive)?;
    let k = spring_matrix(&g, &p.totals(), &res, exec)?;
    let nu2 = nu2_matrix(&k, &vec![trap.nu0; g.len()], &units)?;
    let d = diagonalize_modes(&nu2)?;
    let u = &d.eigenvectors;
    let orth = (u.transpose() * u - DMatrix::identity(g.len(), g.len())).abs().max();
    let resid = d.residual(&nu2);
    let trace_err = (d.eigenvalues.iter().sum::<f64>() - nu2.trace()).abs() / nu2.trace();
    verdict(
        orth < 1e-12 && resid < 1e-12 && trace_err < 1e-12,
        format!("orthonormality {orth:.1e}, residual {resid:.1e}, trace {trace_err:.1e}"),
    )
}

fn reference_oscillator(detuning_fraction: f64) -> Result<OscillatorParams> {
    let units = UnitSystem::rubidium87();
    let trap = TrapConfig::from_depth(200.0, 0.682, &units)?;
    let w = closed_form_total_width(0.5);
    let res = Resonance::new(detuning_fraction * w, w)?;
    let c = single_atom_coefficients(Complex64::new(0.25, 0.0), &res, &units);
    Ok(OscillatorParams {
        frequency: trap.nu0,
        friction: c.friction,
        force: c.force,
        diffusion: c.diffusion,
        mass: units.mass(),
        initial_spread: trap.zero_point_length(),
    })
}

fn initial_condition(_: Execution) -> Result<(bool, String)> {
    let p = reference_oscillator(-0.25)?;
    let s = analytic_moments(&p, &[0.0])?;
    let err = (s.variance[0][0] / p.initial_spread.powi(2) - 1.0).abs();
    verdict(s.mean[0][0] == 0.0 && err < 1e-14, format!("Var(0)/x₀² − 1 = {err:.1e}"))
}

fn equipartition(_: Execution) -> Result<(bool, String)> {
    let s = steady_state_stats(&reference_oscillator(-0.25)?)?;
    verdict(
        s.equipartition_residual.abs() < 1e-3,
        format!("residual {:.2e}", s.equipartition_residual),
    )
}

fn noise_free_mean(_: Execution) -> Result<(bool, String)> {
    let p = reference_oscillator(-0.25)?;
    let sys = LangevinSystem::single(&p);
    let period = 2.0 * std::f64::consts::PI / p.frequency;
    let dt = period / 400.0;
    let traj = integrate_mean(&sys, dt, 50.0 * period, 10)?;
    let exact = analytic_moments(&p, &traj.times)?;
    let worst = traj
        .mean
        .iter()
        .zip(&exact.mean)
        .map(|(a, b)| (a[0] - b[0]).abs())
        .fold(0.0, f64::max);
    verdict(worst < 1e-6, format!("max |Δ⟨z⟩| = {worst:.2e} λ over 50 periods"))
}

fn monte_carlo_variance(exec: Execution) -> Result<(bool, String)> {
    let p = reference_oscillator(-0.5)?;
    let sys = LangevinSystem::single(&p);
    let t_final = 8.0 / p.friction;
    let dt = 0.05 / p.frequency;
    let steps = (t_final / dt).round() as usize;
    let stats = simulate_langevin(
        &sys,
        &SimulationConfig {
            n_traj: 2000,
            seed: 7,
            dt,
            t_final,
            record_every: steps / 4,
            exec,
        },
    )?;
    let exact = analytic_moments(&p, &stats.times)?;
    let worst = (0..stats.times.len())
        .skip(1)
        .map(|t| ((stats.variance[t][0] - exact.variance[t][0]) / stats.stderr_variance[t][0]).abs())
        .fold(0.0, f64::max);
    verdict(worst < 3.0, format!("max |z| = {worst:.2} over {} output times", stats.times.len() - 1))
}
