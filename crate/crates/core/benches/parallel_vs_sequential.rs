//! Parallel and sequential execution of the hot loops on identical inputs.
//! Without the `parallel` feature both variants run sequentially.

use std::hint::black_box;

use arraymech::coefficients::spring_matrix;
use arraymech::cooperative::{closed_form_total_width, damped_lattice_sum, gamma_nm_matrix, Resonance};
use arraymech::dynamics::{simulate_langevin, LangevinSystem, OscillatorParams, SimulationConfig};
use arraymech::modes::{brillouin_grid, InfiniteLattice};
use arraymech::params::{ArrayGeometry, BeamProfile, DriveConfig, Polarization, TrapConfig, UnitSystem};
use arraymech::Execution;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn lattice_sum(c: &mut Criterion) {
    let mut g = c.benchmark_group("lattice_sum_R150");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| damped_lattice_sum(black_box(0.5), Polarization::CircularXy, 150.0, 4.5, exec).unwrap())
        });
    }
    g.finish();
}

fn coupling_matrices(c: &mut Criterion) {
    let geometry = ArrayGeometry::square(0.5, 16, 16, Polarization::CircularXy).unwrap();
    let w = closed_form_total_width(0.5);
    let res = Resonance::new(-w / 4.0, w).unwrap();
    let rabi = DriveConfig::one_sided(res.detuning, 0.25, BeamProfile::Uniform)
        .rabi_profile(&geometry)
        .unwrap()
        .totals();
    let mut g = c.benchmark_group("coupling_16x16");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("spring", name), |b| {
            b.iter(|| spring_matrix(&geometry, &rabi, &res, exec).unwrap())
        });
        g.bench_function(BenchmarkId::new("gamma_nm", name), |b| b.iter(|| gamma_nm_matrix(&geometry, exec)));
    }
    g.finish();
}

fn zone_spectrum(c: &mut Criterion) {
    let units = UnitSystem::rubidium87();
    let trap = TrapConfig::from_depth(200.0, 0.682, &units).unwrap();
    let w = closed_form_total_width(0.5);
    let res = Resonance::new(0.0, w).unwrap();
    let lattice = InfiniteLattice::new(0.5, Polarization::CircularXy, 0.25, &res, &units, trap.nu0).unwrap();
    let points = brillouin_grid(32);
    let mut g = c.benchmark_group("zone_spectrum_32x32_shell60");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| lattice.frequencies(&points, 60, exec)));
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let units = UnitSystem::rubidium87();
    let trap = TrapConfig::from_depth(200.0, 0.682, &units).unwrap();
    let w = closed_form_total_width(0.5);
    let res = Resonance::new(-w / 2.0, w).unwrap();
    let coeff = arraymech::coefficients::single_atom_coefficients(num_complex::Complex64::new(0.25, 0.0), &res, &units);
    let params = OscillatorParams {
        frequency: trap.nu0,
        friction: coeff.friction,
        force: coeff.force,
        diffusion: coeff.diffusion,
        mass: units.mass(),
        initial_spread: trap.zero_point_length(),
    };
    let system = LangevinSystem::single(&params);
    let dt = 0.05 / trap.nu0;
    let mut g = c.benchmark_group("langevin_4096_traj_1000_steps");
    g.sample_size(10);
    for (name, exec) in MODES {
        let config = SimulationConfig {
            n_traj: 4096,
            seed: 3,
            dt,
            t_final: 1000.0 * dt,
            record_every: 100,
            exec,
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_langevin(&system, &config).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, lattice_sum, coupling_matrices, zone_spectrum, monte_carlo);
criterion_main!(benches);
