//! Coefficients of the collective diffusion equation for longitudinal motion.
//!
//! For atom `n` with total drive amplitude `Ω_n`, detuning `d = δ_L − Δ`,
//! total width `w = γ + Γ` and `L = d² + (w/2)²`:
//!
//! ```text
//! f̄_n    = q |Ω_n|² w / L
//! α_n    = E_R |Ω_n|² (−2 d w) / L²
//! D_p^nm = q² Γ_nm Re(Ω_n* Ω_m) / L
//! K_nm   = (3/2) q² Re(F_nm Ω_n* Ω_m) / L
//! ```
//!
//! The general two-sided expressions are evaluated separately in
//! [`two_sided_coefficients`] and reduce to the above when only the forward
//! beam is active.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::cooperative::Resonance;
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::greens::{projected_force, projected_green_3d};
use crate::linalg::{asymmetry, check_psd, max_abs};
use crate::params::{ArrayGeometry, Polarization, RabiProfile, TrapConfig, UnitSystem};
use crate::Q;

/// Relative eigenvalue tolerance for positive-semidefinite checks.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Per-atom coefficients in internal units (`ħ = γ = λ = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingleAtomCoefficients {
    /// Mean force `f̄_n`.
    pub force: f64,
    /// Friction rate `α_n`.
    pub friction: f64,
    /// Momentum diffusion `D_p^n`.
    pub diffusion: f64,
}

pub fn single_atom_coefficients(
    rabi: Complex64,
    resonance: &Resonance,
    units: &UnitSystem,
) -> SingleAtomCoefficients {
    let intensity = rabi.norm_sqr();
    let l = resonance.lorentzian();
    let w = resonance.total_width;
    SingleAtomCoefficients {
        force: Q * intensity * w / l,
        friction: units.recoil() * intensity * (-2.0 * resonance.detuning * w) / (l * l),
        diffusion: Q * Q * intensity / l,
    }
}

/// Laser-induced spring matrix `K_nm` for total drive amplitudes `Ω_n`.
pub fn spring_matrix(
    geometry: &ArrayGeometry,
    amplitudes: &[Complex64],
    resonance: &Resonance,
    exec: Execution,
) -> Result<DMatrix<f64>> {
    let n = geometry.len();
    if amplitudes.len() != n {
        return invalid(format!("{} amplitudes for {n} atoms", amplitudes.len()));
    }
    let pol = geometry.polarization();
    let scale = 1.5 * Q * Q / resonance.lorentzian();
    let kernel = pair_kernel(geometry, pol, exec)?;
    let k = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            scale * (kernel[(i, j)] * amplitudes[i].conj() * amplitudes[j]).re
        }
    });
    symmetric_or_error(k, "spring matrix")
}

/// Projected force kernel `F_nm` between all pairs; zero on the diagonal.
pub fn pair_kernel(
    geometry: &ArrayGeometry,
    polarization: Polarization,
    exec: Execution,
) -> Result<DMatrix<Complex64>> {
    let n = geometry.len();
    let rows = exec.map(n, |i| {
        (0..n)
            .map(|j| {
                if i == j {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                let r = geometry.separation(i, j);
                projected_force([Q * r[0], Q * r[1]], polarization)
            })
            .collect::<Result<Vec<_>>>()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn symmetric_or_error(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let asym = asymmetry(&m);
    if asym > 1e-12 * max_abs(&m).max(f64::MIN_POSITIVE) {
        return Err(Error::Consistency(format!("{what} is not symmetric (max asymmetry {asym:e})")));
    }
    Ok(m)
}

/// Momentum-diffusion matrix `D_p^nm`, checked to be positive semidefinite.
pub fn diffusion_matrix(
    amplitudes: &[Complex64],
    gamma_nm: &DMatrix<f64>,
    resonance: &Resonance,
) -> Result<DMatrix<f64>> {
    let n = amplitudes.len();
    if gamma_nm.nrows() != n || gamma_nm.ncols() != n {
        return invalid(format!(
            "Γ_nm is {}×{} but there are {n} amplitudes",
            gamma_nm.nrows(),
            gamma_nm.ncols()
        ));
    }
    let scale = Q * Q / resonance.lorentzian();
    let d = DMatrix::from_fn(n, n, |i, j| {
        scale * gamma_nm[(i, j)] * (amplitudes[i].conj() * amplitudes[j]).re
    });
    check_psd(&d, PSD_TOLERANCE, "momentum diffusion matrix")?;
    Ok(d)
}

/// Collective frequency matrix `[ν²]_nn' = (ν_n² − Σ_m K_nm/m) δ_nn' + K_nn'/m`.
pub fn nu2_matrix(spring: &DMatrix<f64>, trap_frequencies: &[f64], units: &UnitSystem) -> Result<DMatrix<f64>> {
    let n = trap_frequencies.len();
    if spring.nrows() != n || spring.ncols() != n {
        return invalid(format!(
            "spring matrix is {}×{} but there are {n} trap frequencies",
            spring.nrows(),
            spring.ncols()
        ));
    }
    if (0..n).any(|i| spring[(i, i)] != 0.0) {
        return invalid("spring matrix must have a zero diagonal");
    }
    let mass = units.mass();
    let mut m = spring / mass;
    for i in 0..n {
        let row: f64 = (0..n).map(|j| spring[(i, j)]).sum();
        m[(i, i)] = trap_frequencies[i] * trap_frequencies[i] - row / mass;
    }
    Ok(m)
}

/// Laser-induced pair potential between two atoms driven with amplitude `|Ω|`,
/// at in-plane separation `r⊥` and longitudinal offset `z` (energies in `ħγ`).
///
/// `U = 2 Δ_nm(r) |Ω|² / L` with `Δ_nm(r) = −(3/2) Re[e_d†·G(r)·e_d]`, so that
/// `K_nm = −∂²U/∂z²` at `z = 0`.
pub fn pair_potential(
    separation: [f64; 2],
    z: f64,
    rabi: f64,
    resonance: &Resonance,
    polarization: Polarization,
) -> Result<f64> {
    let g = projected_green_3d(separation, z, polarization)?;
    let exchange = -1.5 * g.re;
    Ok(2.0 * exchange * rabi * rabi / resonance.lorentzian())
}

/// Magnitudes of the collective terms that the dynamics neglects.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticCoefficients {
    /// Dimensionless displacement scale `q·ẑ_nm` at which the operator terms are evaluated.
    pub displacement_scale: f64,
    /// `α̂_nm` as a complex matrix (zero diagonal).
    #[serde(skip)]
    pub collective_friction: DMatrix<Complex64>,
    /// `max_nm |α̂_nm| / max_n |α_n|`.
    pub friction_ratio: f64,
    /// Largest ratio of the collective to the single-atom Langevin-force prefactor.
    pub noise_ratio: f64,
    /// `max_nm |D̄_p^nm|`, the coefficient of the `δ'(t − t')` correlator.
    pub delta_prime_diffusion: f64,
}

/// Full coefficient set from the general two-sided expressions.
#[derive(Clone, Debug)]
pub struct TwoSidedCoefficients {
    pub force: Vec<f64>,
    pub friction: Vec<f64>,
    pub spring: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    pub diagnostics: DiagnosticCoefficients,
}

pub fn two_sided_coefficients(
    geometry: &ArrayGeometry,
    profile: &RabiProfile,
    resonance: &Resonance,
    units: &UnitSystem,
    gamma_nm: &DMatrix<f64>,
    displacement_scale: f64,
    exec: Execution,
) -> Result<TwoSidedCoefficients> {
    let n = geometry.len();
    if profile.len() != n {
        return invalid(format!("{} drive amplitudes for {n} atoms", profile.len()));
    }
    let sides: Vec<_> = profile.active_sides().collect();
    if sides.is_empty() {
        return invalid("no active illumination side");
    }
    let i = Complex64::i();
    let g = resonance.half_width();
    let d = resonance.detuning;
    let l = resonance.lorentzian();
    let denom = Complex64::new(d, -g);
    let er = units.recoil();

    let mut force = vec![0.0; n];
    let mut friction = vec![0.0; n];
    for a in 0..n {
        let mut f = Complex64::new(0.0, 0.0);
        let mut alpha = Complex64::new(0.0, 0.0);
        for &s in &sides {
            for &sp in &sides {
                let prod = profile.side(a, s) * profile.side(a, sp).conj();
                f += i * s.sign() * prod / denom;
                alpha += i * s.sign() * sp.sign() * prod / (denom * denom);
            }
        }
        force[a] = -Q * 2.0 * f.re;
        friction[a] = er * 2.0 * alpha.re;
    }

    let kernel = pair_kernel(geometry, geometry.polarization(), exec)?;
    // Σ_{ss'} Ω*_ns Ω_ms' and Σ_{ss'} s' Ω*_ns Ω_ms'
    let pair_sum = |a: usize, b: usize, weighted: bool| {
        let mut acc = Complex64::new(0.0, 0.0);
        for &s in &sides {
            for &sp in &sides {
                let w = if weighted { sp.sign() } else { 1.0 };
                acc += w * profile.side(a, s).conj() * profile.side(b, sp);
            }
        }
        acc
    };
    let k_scale = 0.75 * Q * Q / l;
    let spring = DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            0.0
        } else {
            let c = kernel[(a, b)] * pair_sum(a, b, false);
            k_scale * (c + c.conj()).re
        }
    });
    let spring = symmetric_or_error(spring, "two-sided spring matrix")?;

    let totals = profile.totals();
    let diffusion = diffusion_matrix(&totals, gamma_nm, resonance)?;

    let alpha_hat_prefactor = -0.75 * er / Complex64::new(d, g) * displacement_scale / l;
    let collective_friction = DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            Complex64::new(0.0, 0.0)
        } else {
            alpha_hat_prefactor * kernel[(a, b)] * pair_sum(a, b, true)
        }
    });
    let max_alpha = friction.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let max_alpha_hat = collective_friction.iter().fold(0.0f64, |m, x| m.max(x.norm()));
    let friction_ratio = if max_alpha > 0.0 {
        max_alpha_hat / max_alpha
    } else if max_alpha_hat > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };

    // Collective noise prefactor (3/4) q |F_nm| (qẑ) |Ω_m| / L against q |Ω_n| / √L.
    let mut noise_ratio: f64 = 0.0;
    for a in 0..n {
        let single = totals[a].norm() / l.sqrt();
        for b in 0..n {
            if a == b {
                continue;
            }
            let coll = 0.75 * kernel[(a, b)].norm() * displacement_scale * totals[b].norm() / l;
            if single > 0.0 {
                noise_ratio = noise_ratio.max(coll / single);
            } else if coll > 0.0 {
                noise_ratio = f64::INFINITY;
            }
        }
    }

    let delta_prime_diffusion = max_abs(&diffusion) * d.abs() / l;

    Ok(TwoSidedCoefficients {
        force,
        friction,
        spring,
        diffusion,
        diagnostics: DiagnosticCoefficients {
            displacement_scale,
            collective_friction,
            friction_ratio,
            noise_ratio,
            delta_prime_diffusion,
        },
    })
}

/// Every coefficient of the linearized collective equations of motion.
#[derive(Clone, Debug)]
pub struct MechanicalSystem {
    pub units: UnitSystem,
    pub resonance: Resonance,
    /// Bare trap frequencies `ν_n` in `γ`.
    pub trap_frequencies: Vec<f64>,
    pub force: Vec<f64>,
    pub friction: Vec<f64>,
    pub spring: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    pub nu2: DMatrix<f64>,
    pub diagnostics: DiagnosticCoefficients,
}

impl MechanicalSystem {
    /// Assemble the system. One-sided drives use the closed single-atom
    /// expressions; drives with a backward beam use the general two-sided sums.
    /// Diagnostics are evaluated at the displacement scale `q·x₀ = η`.
    pub fn assemble(
        geometry: &ArrayGeometry,
        profile: &RabiProfile,
        resonance: &Resonance,
        units: &UnitSystem,
        trap: &TrapConfig,
        gamma_nm: &DMatrix<f64>,
        exec: Execution,
    ) -> Result<Self> {
        let general = two_sided_coefficients(geometry, profile, resonance, units, gamma_nm, trap.eta, exec)?;
        let (force, friction, spring) = if profile.is_one_sided() {
            let totals = profile.totals();
            let single: Vec<_> = totals
                .iter()
                .map(|a| single_atom_coefficients(*a, resonance, units))
                .collect();
            (
                single.iter().map(|c| c.force).collect(),
                single.iter().map(|c| c.friction).collect(),
                spring_matrix(geometry, &totals, resonance, exec)?,
            )
        } else {
            (general.force, general.friction, general.spring)
        };
        let trap_frequencies = vec![trap.nu0; geometry.len()];
        let nu2 = nu2_matrix(&spring, &trap_frequencies, units)?;
        Ok(MechanicalSystem {
            units: *units,
            resonance: *resonance,
            trap_frequencies,
            force,
            friction,
            spring,
            diffusion: general.diffusion,
            nu2,
            diagnostics: general.diagnostics,
        })
    }

    pub fn len(&self) -> usize {
        self.force.len()
    }

    pub fn is_empty(&self) -> bool {
        self.force.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.units.mass()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooperative::gamma_nm_matrix;
    use crate::linalg::eigen_range;
    use crate::params::{BeamProfile, DriveConfig, Side};
    use approx::assert_relative_eq;

    const W05: f64 = 3.0 / std::f64::consts::PI;

    fn res(d: f64) -> Resonance {
        Resonance::new(d, W05).unwrap()
    }

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn zero_drive_gives_zero_coefficients() {
        let s = single_atom_coefficients(c(0.0), &res(-0.2), &UnitSystem::rubidium87());
        assert_eq!((s.force, s.friction, s.diffusion), (0.0, 0.0, 0.0));
    }

    #[test]
    fn friction_vanishes_on_resonance() {
        let s = single_atom_coefficients(c(0.25), &res(0.0), &UnitSystem::rubidium87());
        assert_eq!(s.friction, 0.0);
        assert!(s.force > 0.0);
    }

    #[test]
    fn fluctuation_dissipation_at_quarter_width() {
        let units = UnitSystem::rubidium87();
        let r = res(-W05 / 4.0);
        let s = single_atom_coefficients(c(0.25), &r, &units);
        let t = s.diffusion / (units.mass() * s.friction);
        assert_relative_eq!(units.energy_in_recoil(t), 506.25, max_relative = 1e-12);
        assert_relative_eq!(t, r.effective_temperature().value(), max_relative = 1e-12);
    }

    #[test]
    fn spring_matrix_zero_without_drive() {
        let g = ArrayGeometry::square(0.5, 3, 3, Polarization::CircularXy).unwrap();
        let k = spring_matrix(&g, &[c(0.0); 9], &res(0.0), Execution::Sequential).unwrap();
        assert_eq!(k, DMatrix::zeros(9, 9));
    }

    #[test]
    fn spring_matrix_translation_invariant() {
        let g = ArrayGeometry::square(0.5, 4, 4, Polarization::CircularXy).unwrap();
        let k = spring_matrix(&g, &[c(0.25); 16], &res(0.0), Execution::default()).unwrap();
        // Horizontal neighbours (0,1), (5,6) and (14,15) share the same separation vector.
        assert_relative_eq!(k[(0, 1)], k[(5, 6)], max_relative = 1e-13);
        assert_relative_eq!(k[(0, 1)], k[(14, 15)], max_relative = 1e-13);
        assert_relative_eq!(k[(0, 5)], k[(10, 15)], max_relative = 1e-13);
        assert!((0..16).all(|i| k[(i, i)] == 0.0));
    }

    #[test]
    fn spring_matches_pair_potential_curvature() {
        let r = res(-0.3);
        let rabi = 0.25;
        let h = 1e-3;
        for (sep, pol) in [
            ([0.5, 0.0], Polarization::CircularXy),
            ([0.5, 0.5], Polarization::CircularXy),
            ([0.8, 0.0], Polarization::LinearX),
            ([0.0, 0.8], Polarization::LinearX),
        ] {
            let u = |z: f64| pair_potential(sep, z, rabi, &r, pol).unwrap();
            let d2 = (-u(2.0 * h) + 16.0 * u(h) - 30.0 * u(0.0) + 16.0 * u(-h) - u(-2.0 * h)) / (12.0 * h * h);
            let f = projected_force([Q * sep[0], Q * sep[1]], pol).unwrap();
            let k = 1.5 * Q * Q * f.re * rabi * rabi / r.lorentzian();
            assert!((k + d2).abs() < 1e-4 * k.abs(), "sep {sep:?}: K={k}, U''={d2}");
        }
    }

    #[test]
    fn pair_potential_parity() {
        let r = res(0.1);
        let a = pair_potential([0.3, 0.4], 0.2, 0.3, &r, Polarization::CircularXy).unwrap();
        let b = pair_potential([0.3, 0.4], -0.2, 0.3, &r, Polarization::CircularXy).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
        assert_eq!(pair_potential([0.3, 0.4], 0.2, 0.0, &r, Polarization::CircularXy).unwrap(), 0.0);
    }

    #[test]
    fn diffusion_single_atom_and_neighbours() {
        let units = UnitSystem::rubidium87();
        let g1 = ArrayGeometry::square(0.5, 1, 1, Polarization::CircularXy).unwrap();
        let d1 = diffusion_matrix(&[c(0.25)], &gamma_nm_matrix(&g1, Execution::Sequential), &res(-0.2)).unwrap();
        let s = single_atom_coefficients(c(0.25), &res(-0.2), &units);
        assert_relative_eq!(d1[(0, 0)], s.diffusion, max_relative = 1e-15);

        let g2 = ArrayGeometry::square(0.5, 2, 1, Polarization::CircularXy).unwrap();
        let d2 = diffusion_matrix(&[c(0.25); 2], &gamma_nm_matrix(&g2, Execution::Sequential), &res(0.0)).unwrap();
        assert_relative_eq!(d2[(0, 1)] / d2[(0, 0)], 0.0760, epsilon = 1e-4);
    }

    #[test]
    fn diffusion_matrix_psd_on_ten_by_ten() {
        let g = ArrayGeometry::square(0.5, 10, 10, Polarization::CircularXy).unwrap();
        let drive = DriveConfig::one_sided(0.0, 0.25, BeamProfile::Gaussian { waist: 2.4 });
        let p = drive.rabi_profile(&g).unwrap();
        let d = diffusion_matrix(&p.totals(), &gamma_nm_matrix(&g, Execution::default()), &res(-0.2)).unwrap();
        let (lo, hi) = eigen_range(&d);
        assert!(lo >= -1e-8 * hi);
    }

    #[test]
    fn nu2_without_coupling_is_diagonal() {
        let units = UnitSystem::rubidium87();
        let m = nu2_matrix(&DMatrix::zeros(3, 3), &[0.1, 0.2, 0.3], &units).unwrap();
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.1f64.powi(2), 0.2f64.powi(2), 0.3f64.powi(2)]));
        assert!((m - expect).abs().max() < 1e-17);
    }

    #[test]
    fn nu2_dimension_mismatch() {
        let units = UnitSystem::rubidium87();
        assert!(nu2_matrix(&DMatrix::zeros(3, 3), &[0.1, 0.2], &units).is_err());
        assert!(nu2_matrix(&DMatrix::identity(2, 2), &[0.1, 0.2], &units).is_err());
    }

    #[test]
    fn nu2_row_sums_equal_trap_frequency() {
        let units = UnitSystem::rubidium87();
        let g = ArrayGeometry::square(0.5, 5, 5, Polarization::CircularXy).unwrap();
        let k = spring_matrix(&g, &[c(0.25); 25], &res(0.0), Execution::default()).unwrap();
        let nu0 = 0.0133;
        let m = nu2_matrix(&k, &[nu0; 25], &units).unwrap();
        for i in 0..25 {
            let row: f64 = m.row(i).iter().sum();
            assert!((row - nu0 * nu0).abs() < 1e-14 * nu0 * nu0 * 25.0);
        }
    }

    fn fig2_like(n: usize) -> (ArrayGeometry, UnitSystem, TrapConfig, DMatrix<f64>) {
        let g = ArrayGeometry::square(0.5, n, n, Polarization::CircularXy).unwrap();
        let units = UnitSystem::rubidium87();
        let trap = TrapConfig::from_depth(200.0, 0.682, &units).unwrap();
        let gnm = gamma_nm_matrix(&g, Execution::default());
        (g, units, trap, gnm)
    }

    #[test]
    fn two_sided_reduces_to_one_sided() {
        let (g, units, _, gnm) = fig2_like(4);
        let drive = DriveConfig::one_sided(0.0, 0.25, BeamProfile::Gaussian { waist: 2.0 });
        let p = drive.rabi_profile(&g).unwrap();
        let r = res(-0.17);
        let two = two_sided_coefficients(&g, &p, &r, &units, &gnm, 0.2, Execution::default()).unwrap();
        let totals = p.totals();
        let k = spring_matrix(&g, &totals, &r, Execution::default()).unwrap();
        for n in 0..g.len() {
            let s = single_atom_coefficients(totals[n], &r, &units);
            assert_relative_eq!(two.force[n], s.force, max_relative = 1e-12);
            assert_relative_eq!(two.friction[n], s.friction, max_relative = 1e-12);
            assert_relative_eq!(two.diffusion[(n, n)], s.diffusion, max_relative = 1e-12);
        }
        assert!((&two.spring - &k).abs().max() <= 1e-12 * k.abs().max());
    }

    #[test]
    fn symmetric_drive_cancels_radiation_pressure() {
        let (g, units, _, gnm) = fig2_like(3);
        let drive = DriveConfig::two_sided(-0.1, 0.2, BeamProfile::Uniform, c(1.0), c(1.0));
        let p = drive.rabi_profile(&g).unwrap();
        let two = two_sided_coefficients(&g, &p, &res(-0.1), &units, &gnm, 0.2, Execution::Sequential).unwrap();
        assert!(two.force.iter().all(|f| f.abs() < 1e-12));
        assert!(p.is_active(Side::Backward));
    }

    #[test]
    fn collective_diagnostics_scale_with_displacement() {
        let (g, units, trap, gnm) = fig2_like(4);
        let p = DriveConfig::one_sided(0.0, 0.25, BeamProfile::Uniform).rabi_profile(&g).unwrap();
        let r = res(-W05 / 4.0);
        let at = |scale: f64| {
            two_sided_coefficients(&g, &p, &r, &units, &gnm, scale, Execution::Sequential)
                .unwrap()
                .diagnostics
        };
        let big = at(trap.eta);
        let small = at(trap.eta * 1e-3);
        assert_relative_eq!(small.friction_ratio, big.friction_ratio * 1e-3, max_relative = 1e-10);
        assert_relative_eq!(small.noise_ratio, big.noise_ratio * 1e-3, max_relative = 1e-10);
        assert!(big.delta_prime_diffusion > 0.0);
    }

    #[test]
    fn assembled_system_is_consistent() {
        let (g, units, trap, gnm) = fig2_like(4);
        let p = DriveConfig::one_sided(0.0, 0.25, BeamProfile::Uniform).rabi_profile(&g).unwrap();
        let sys = MechanicalSystem::assemble(&g, &p, &res(-0.2), &units, &trap, &gnm, Execution::default()).unwrap();
        assert_eq!(sys.len(), 16);
        assert!(asymmetry(&sys.nu2) == 0.0);
        assert!(sys.friction.iter().all(|a| *a > 0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn fluctuation_dissipation(d in -3.0f64..-1e-3, w in 0.05f64..3.0, rabi in 0.01f64..1.0) {
                let units = UnitSystem::rubidium87();
                let r = Resonance::new(d, w).unwrap();
                let s = single_atom_coefficients(c(rabi), &r, &units);
                let t = s.diffusion / (units.mass() * s.friction);
                prop_assert!((t / r.effective_temperature().value() - 1.0).abs() < 1e-10);
            }

            #[test]
            fn linear_in_intensity(d in -2.0f64..2.0, rabi in 0.01f64..0.5, a in 0.3f64..1.0) {
                let units = UnitSystem::rubidium87();
                let r = Resonance::new(d, 1.0).unwrap();
                let g = ArrayGeometry::square(a, 3, 2, Polarization::CircularXy).unwrap();
                let gnm = gamma_nm_matrix(&g, Execution::Sequential);
                let lo = vec![c(rabi); 6];
                let hi = vec![c(rabi * 2f64.sqrt()); 6];
                let s1 = single_atom_coefficients(lo[0], &r, &units);
                let s2 = single_atom_coefficients(hi[0], &r, &units);
                prop_assert!((s2.force - 2.0 * s1.force).abs() <= 1e-12 * s2.force.abs());
                prop_assert!((s2.friction - 2.0 * s1.friction).abs() <= 1e-12 * s2.friction.abs().max(1e-300));
                let k1 = spring_matrix(&g, &lo, &r, Execution::Sequential).unwrap();
                let k2 = spring_matrix(&g, &hi, &r, Execution::Sequential).unwrap();
                prop_assert!((&k2 - &k1 * 2.0).abs().max() <= 1e-12 * k2.abs().max());
                let d1 = diffusion_matrix(&lo, &gnm, &r).unwrap();
                let d2 = diffusion_matrix(&hi, &gnm, &r).unwrap();
                prop_assert!((&d2 - &d1 * 2.0).abs().max() <= 1e-12 * d2.abs().max());
            }

            #[test]
            fn friction_sign(d in -3.0f64..3.0, rabi in 0.01f64..1.0) {
                prop_assume!(d.abs() > 1e-6);
                let s = single_atom_coefficients(c(rabi), &Resonance::new(d, 0.9).unwrap(), &UnitSystem::rubidium87());
                prop_assert_eq!(s.friction > 0.0, d < 0.0);
                prop_assert!(s.force >= 0.0 && s.diffusion >= 0.0);
            }
        }
    }
}
