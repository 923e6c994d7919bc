//! Cooperative shift and width of an infinite square lattice, the finite-array
//! decay matrix `Γ_nm`, and the scalar observables derived from them.
//!
//! The infinite-lattice sums
//!
//! ```text
//! Δ = −(3/2) Σ_{n≠0} Re[e_d†·G(r_n)·e_d],    Γ = 3 Σ_{n≠0} Im[e_d†·G(r_n)·e_d]
//! ```
//!
//! converge only conditionally. Each summand is damped by `exp(−r²/R²)` and the
//! sum is cut at `r = 3R`; the damped sum approaches the limit as `1/R²`, so two
//! envelopes `R` and `2R` are combined by Richardson extrapolation.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::greens::projected_green;
use crate::params::{ArrayGeometry, Polarization};

/// Smallest envelope accepted for an infinite-lattice sum, in `λ`.
pub const MIN_ENVELOPE: f64 = 50.0;

/// Default ratio of the hard cutoff radius to the Gaussian envelope width.
///
/// The envelope weight at the cutoff, `exp(−ratio²)`, leaves a bias that does
/// not shrink under envelope doubling, so it must sit well below the tolerance.
pub const CUTOFF_RATIO: f64 = 4.5;

/// Saturation level above which a warning is logged.
pub const SATURATION_WARNING: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// First envelope width `R` in `λ`.
    pub initial_envelope: f64,
    /// Doubling stops with an error once `R` would exceed this.
    pub max_envelope: f64,
    /// Absolute tolerance on `Δ` and `Γ`, in `γ`.
    pub tolerance: f64,
    /// Hard cutoff radius in units of the envelope width.
    pub cutoff_ratio: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            initial_envelope: 150.0,
            max_envelope: 1200.0,
            tolerance: 1e-4,
            cutoff_ratio: CUTOFF_RATIO,
        }
    }
}

impl TruncationPolicy {
    fn validate(&self) -> Result<()> {
        if !(self.initial_envelope >= MIN_ENVELOPE) {
            return invalid(format!(
                "envelope width {} λ is below the minimum {MIN_ENVELOPE} λ",
                self.initial_envelope
            ));
        }
        if !(self.cutoff_ratio >= 1.0) {
            return invalid(format!("cutoff ratio must be at least 1, got {}", self.cutoff_ratio));
        }
        if !(self.tolerance > 0.0) {
            return invalid(format!("tolerance must be positive, got {}", self.tolerance));
        }
        Ok(())
    }

    fn key(&self) -> [u64; 4] {
        [
            self.initial_envelope.to_bits(),
            self.max_envelope.to_bits(),
            self.tolerance.to_bits(),
            self.cutoff_ratio.to_bits(),
        ]
    }
}

/// Converged infinite-lattice cooperative shift and width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSums {
    pub spacing: f64,
    pub polarization: Polarization,
    /// `Δ` in `γ`.
    pub shift: f64,
    /// `Γ` in `γ` (excluding the single-atom `γ`).
    pub width: f64,
    /// Largest envelope width used, in `λ`.
    pub envelope: f64,
    /// Hard cutoff radius of the largest sum, in `λ`.
    pub radius: f64,
    /// Estimated absolute error of the returned values.
    pub residual: f64,
}

impl LatticeSums {
    /// `γ + Γ`
    pub fn total_width(&self) -> f64 {
        1.0 + self.width
    }

    /// Resonance parameters for a laser detuning `δ_L` from the bare transition.
    pub fn resonance(&self, laser_detuning: f64) -> Resonance {
        Resonance {
            detuning: laser_detuning - self.shift,
            total_width: self.total_width(),
        }
    }

    /// Resonance parameters for a detuning measured from the cooperative resonance.
    pub fn resonance_relative(&self, detuning: f64) -> Resonance {
        Resonance {
            detuning,
            total_width: self.total_width(),
        }
    }
}

/// Damped lattice sum `(Δ, Γ)` at a single envelope width, cut at `cutoff_ratio·R`.
pub fn damped_lattice_sum(
    spacing: f64,
    polarization: Polarization,
    envelope: f64,
    cutoff_ratio: f64,
    exec: Execution,
) -> Result<(f64, f64)> {
    if !(spacing > 0.0) || !(envelope > 0.0) {
        return invalid(format!(
            "spacing and envelope must be positive, got a={spacing}, R={envelope}"
        ));
    }
    let cutoff = cutoff_ratio * envelope;
    let m = (cutoff / spacing).floor() as usize;
    let weights: Vec<f64> = (0..=m)
        .map(|i| {
            let x = i as f64 * spacing;
            (-(x * x) / (envelope * envelope)).exp()
        })
        .collect();
    // Quadrant symmetry (x → −x, y → −y) holds for both polarizations.
    let rows = exec.map(m + 1, |iy| {
        let y = iy as f64 * spacing;
        let mut acc = Complex64::new(0.0, 0.0);
        for ix in 0..=m {
            if ix == 0 && iy == 0 {
                continue;
            }
            let x = ix as f64 * spacing;
            if x * x + y * y > cutoff * cutoff {
                break;
            }
            let mult = if ix > 0 { 2.0 } else { 1.0 };
            let g = projected_green([x, y], polarization).expect("lattice sites are distinct");
            acc += g * (mult * weights[ix]);
        }
        acc * (weights[iy] * if iy > 0 { 2.0 } else { 1.0 })
    });
    let total: Complex64 = rows.into_iter().sum();
    Ok((-1.5 * total.re, 3.0 * total.im))
}

/// Cooperative shift and width, converged by envelope doubling.
pub fn lattice_sums(
    spacing: f64,
    polarization: Polarization,
    policy: &TruncationPolicy,
    exec: Execution,
) -> Result<LatticeSums> {
    policy.validate()?;
    if spacing >= 1.0 {
        log::warn!("spacing a = {spacing} λ is outside the sub-wavelength regime");
    }
    let mut envelope = policy.initial_envelope;
    let mut prev = damped_lattice_sum(spacing, polarization, envelope, policy.cutoff_ratio, exec)?;
    loop {
        let next_env = 2.0 * envelope;
        if next_env > policy.max_envelope {
            return Err(Error::Convergence {
                what: "cooperative lattice sum",
                residual: f64::INFINITY,
                tolerance: policy.tolerance,
            });
        }
        let next = damped_lattice_sum(spacing, polarization, next_env, policy.cutoff_ratio, exec)?;
        let d_shift = (next.0 - prev.0) / 3.0;
        let d_width = (next.1 - prev.1) / 3.0;
        let residual = d_shift.abs().max(d_width.abs());
        log::debug!("lattice sum a={spacing} R={next_env}: Δ={} Γ={} residual={residual:e}", next.0, next.1);
        if residual <= policy.tolerance {
            return Ok(LatticeSums {
                spacing,
                polarization,
                shift: next.0 + d_shift,
                width: next.1 + d_width,
                envelope: next_env,
                radius: policy.cutoff_ratio * next_env,
                residual,
            });
        }
        if 2.0 * next_env > policy.max_envelope {
            return Err(Error::Convergence {
                what: "cooperative lattice sum",
                residual,
                tolerance: policy.tolerance,
            });
        }
        prev = next;
        envelope = next_env;
    }
}

type CacheKey = (u64, Polarization, [u64; 4]);

fn cache() -> &'static Mutex<HashMap<CacheKey, LatticeSums>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, LatticeSums>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached [`lattice_sums`] using the default execution mode.
pub fn cooperative_shift_width(
    spacing: f64,
    polarization: Polarization,
    policy: &TruncationPolicy,
) -> Result<LatticeSums> {
    let key = (spacing.to_bits(), polarization, policy.key());
    if let Some(hit) = cache().lock().expect("cache poisoned").get(&key) {
        return Ok(*hit);
    }
    let sums = lattice_sums(spacing, polarization, policy, Execution::default())?;
    cache().lock().expect("cache poisoned").insert(key, sums);
    Ok(sums)
}

/// `γ + Γ = (3/4π)(λ/a)²`, exact for the infinite lattice when `a < λ`.
pub fn closed_form_total_width(spacing: f64) -> f64 {
    if spacing >= 1.0 {
        log::warn!("closed-form width is only valid for a < λ (a = {spacing})");
    }
    3.0 / (4.0 * std::f64::consts::PI * spacing * spacing)
}

/// Pairwise decay matrix `Γ_nm` of a finite array, in `γ`; `Γ_nn = 1`.
pub fn gamma_nm_matrix(geometry: &ArrayGeometry, exec: Execution) -> DMatrix<f64> {
    let n = geometry.len();
    let pol = geometry.polarization();
    let rows = exec.map(n, |i| {
        (0..n)
            .map(|j| {
                if i == j {
                    1.0
                } else {
                    let g = projected_green(geometry.separation(i, j), pol)
                        .expect("lattice sites are distinct");
                    3.0 * g.im
                }
            })
            .collect::<Vec<_>>()
    });
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Cooperative response of a concrete array.
#[derive(Clone, Debug)]
pub struct CooperativeResponse {
    pub sums: LatticeSums,
    pub gamma_nm: DMatrix<f64>,
}

impl CooperativeResponse {
    pub fn compute(geometry: &ArrayGeometry, policy: &TruncationPolicy) -> Result<Self> {
        let sums = cooperative_shift_width(geometry.spacing(), geometry.polarization(), policy)?;
        Ok(CooperativeResponse {
            sums,
            gamma_nm: gamma_nm_matrix(geometry, Execution::default()),
        })
    }
}

/// Laser detuning from the cooperative resonance, `δ_L − Δ`, and total width `γ + Γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub detuning: f64,
    pub total_width: f64,
}

/// Effective temperature of the scattering bath in `ħγ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Temperature {
    Finite(f64),
    /// Exactly on the cooperative resonance, where friction vanishes.
    Infinite,
}

impl Temperature {
    pub fn value(self) -> f64 {
        match self {
            Temperature::Finite(t) => t,
            Temperature::Infinite => f64::INFINITY,
        }
    }

    /// True when the bath can thermalize the motion (`T_e > 0`).
    pub fn is_thermalizing(self) -> bool {
        matches!(self, Temperature::Finite(t) if t > 0.0)
    }
}

impl Resonance {
    pub fn new(detuning: f64, total_width: f64) -> Result<Self> {
        if !(total_width > 0.0) {
            return invalid(format!("γ + Γ must be positive, got {total_width}"));
        }
        Ok(Resonance {
            detuning,
            total_width,
        })
    }

    /// `(γ+Γ)/2`
    pub fn half_width(&self) -> f64 {
        0.5 * self.total_width
    }

    /// `(δ_L − Δ)² + ((γ+Γ)/2)²`
    pub fn lorentzian(&self) -> f64 {
        self.detuning * self.detuning + self.half_width() * self.half_width()
    }

    /// `1/(δ_L − Δ − i(γ+Γ)/2)`, the complex response shared by all coefficients.
    pub fn response(&self) -> Complex64 {
        1.0 / Complex64::new(self.detuning, -self.half_width())
    }

    /// Excited-state population for a Rabi amplitude `|Ω_n|`.
    /// `P_e = |Ω|²/L`; values above [`SATURATION_WARNING`] strain the weak-drive treatment.
    pub fn excited_population(&self, rabi: f64) -> f64 {
        rabi * rabi / self.lorentzian()
    }

    pub fn reflectivity(&self) -> Complex64 {
        let g = self.half_width();
        Complex64::new(0.0, -g) / Complex64::new(self.detuning, g)
    }

    pub fn effective_temperature(&self) -> Temperature {
        if self.detuning == 0.0 {
            return Temperature::Infinite;
        }
        Temperature::Finite(-0.5 * self.lorentzian() / (self.detuning * self.total_width))
    }
}

/// Excited-state population from the laser detuning and the lattice sums.
pub fn excited_population(rabi: f64, laser_detuning: f64, shift: f64, width: f64) -> Result<f64> {
    Ok(Resonance::new(laser_detuning - shift, 1.0 + width)?.excited_population(rabi))
}

pub fn reflectivity(laser_detuning: f64, shift: f64, width: f64) -> Result<Complex64> {
    Ok(Resonance::new(laser_detuning - shift, 1.0 + width)?.reflectivity())
}

pub fn effective_temperature(laser_detuning: f64, shift: f64, width: f64) -> Result<Temperature> {
    Ok(Resonance::new(laser_detuning - shift, 1.0 + width)?.effective_temperature())
}
