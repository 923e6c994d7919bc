//! Unit system, lattice geometry, trap parametrization and drive configuration.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::Q;

/// Fixes the mass scale through the single ratio `ħγ/E_R`.
///
/// Internally `λ = γ = ħ = 1`, so `E_R = 1/(ħγ/E_R)` in units of `ħγ` and the
/// mass follows from `E_R = ħ²q²/m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    hbar_gamma_over_er: f64,
}

impl UnitSystem {
    pub fn new(hbar_gamma_over_er: f64) -> Result<Self> {
        if !(hbar_gamma_over_er > 0.0) || !hbar_gamma_over_er.is_finite() {
            return invalid(format!(
                "ħγ/E_R must be positive and finite, got {hbar_gamma_over_er}"
            ));
        }
        Ok(UnitSystem { hbar_gamma_over_er })
    }

    /// ⁸⁷Rb on the D2 line.
    pub fn rubidium87() -> Self {
        UnitSystem {
            hbar_gamma_over_er: 810.0,
        }
    }

    pub fn hbar_gamma_over_er(&self) -> f64 {
        self.hbar_gamma_over_er
    }

    /// Recoil energy `E_R` in units of `ħγ` (equivalently the recoil rate `E_R/ħ` in `γ`).
    pub fn recoil(&self) -> f64 {
        1.0 / self.hbar_gamma_over_er
    }

    /// Atomic mass `m = ħq²/E_R` in internal units.
    pub fn mass(&self) -> f64 {
        Q * Q / self.recoil()
    }

    /// Convert an energy in `ħγ` to units of `E_R`.
    pub fn energy_in_recoil(&self, energy: f64) -> f64 {
        energy * self.hbar_gamma_over_er
    }
}

/// Orientation of the two-level transition dipole in the lattice plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarization {
    /// `e_d = (e_x + i e_y)/√2`
    CircularXy,
    /// `e_d = e_x`
    LinearX,
}

/// Centered square lattice in the `xy` plane.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayGeometry {
    spacing: f64,
    nx: usize,
    ny: usize,
    polarization: Polarization,
    positions: Vec<[f64; 2]>,
}

impl ArrayGeometry {
    /// Row-major sites: index `n = iy·nx + ix`, shifted so the centroid sits at the origin.
    pub fn square(spacing: f64, nx: usize, ny: usize, polarization: Polarization) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return invalid(format!("lattice spacing must be positive, got {spacing}"));
        }
        if nx == 0 || ny == 0 {
            return invalid(format!("lattice dimensions must be positive, got {nx}×{ny}"));
        }
        let x0 = 0.5 * (nx - 1) as f64 * spacing;
        let y0 = 0.5 * (ny - 1) as f64 * spacing;
        let positions = (0..ny)
            .flat_map(|iy| {
                (0..nx).map(move |ix| [ix as f64 * spacing - x0, iy as f64 * spacing - y0])
            })
            .collect();
        Ok(ArrayGeometry {
            spacing,
            nx,
            ny,
            polarization,
            positions,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn polarization(&self) -> Polarization {
        self.polarization
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn position(&self, n: usize) -> [f64; 2] {
        self.positions[n]
    }

    /// In-plane separation `r⊥_n − r⊥_m`.
    pub fn separation(&self, n: usize, m: usize) -> [f64; 2] {
        let (a, b) = (self.positions[n], self.positions[m]);
        [a[0] - b[0], a[1] - b[1]]
    }

    /// Lattice indices `(ix, iy)` of site `n`.
    pub fn indices(&self, n: usize) -> (usize, usize) {
        (n % self.nx, n / self.nx)
    }

    /// Site closest to the array centroid (lowest index on ties).
    pub fn central_site(&self) -> usize {
        let r2 = |p: &[f64; 2]| p[0] * p[0] + p[1] * p[1];
        let mut best = 0;
        for (n, p) in self.positions.iter().enumerate() {
            if r2(p) < r2(&self.positions[best]) - 1e-12 {
                best = n;
            }
        }
        best
    }
}

/// Longitudinal harmonic trap of each lattice site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// `Ṽ = V/E_R`
    pub depth: f64,
    /// Trap length `l` in units of `λ`.
    pub length: f64,
    /// Lamb-Dicke parameter `η = q·x₀ = (l/λ)(Ṽ/2)^(-1/4)`.
    pub eta: f64,
    /// Trap frequency in units of `E_R/ħ`: `ν₀ = 1/(2η²)`.
    pub nu0_recoil: f64,
    /// Trap frequency in units of `γ`.
    pub nu0: f64,
}

impl TrapConfig {
    pub fn from_depth(depth: f64, length: f64, units: &UnitSystem) -> Result<Self> {
        if !(depth > 0.0) || !(length > 0.0) {
            return invalid(format!(
                "trap depth and length must be positive, got Ṽ={depth}, l={length}"
            ));
        }
        let eta = length * (depth / 2.0).powf(-0.25);
        let nu0_recoil = 1.0 / (2.0 * eta * eta);
        if eta >= 1.0 {
            log::warn!("Lamb-Dicke parameter η = {eta:.3} is not small");
        }
        Ok(TrapConfig {
            depth,
            length,
            eta,
            nu0_recoil,
            nu0: nu0_recoil * units.recoil(),
        })
    }

    /// Zero-point length `x₀ = η/q`.
    pub fn zero_point_length(&self) -> f64 {
        self.eta / Q
    }
}

/// Transverse intensity profile of the illuminating beam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeamProfile {
    Uniform,
    /// `Ω_n = Ω·exp(−|r⊥_n|²/w²)`, centered on the array centroid.
    Gaussian { waist: f64 },
}

/// Propagation direction of a paraxial beam: `+` travels towards `+z`
/// (illumination from the left), `−` towards `−z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Forward,
    Backward,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Forward => 1.0,
            Side::Backward => -1.0,
        }
    }

    fn slot(self) -> usize {
        match self {
            Side::Forward => 0,
            Side::Backward => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriveConfig {
    /// `δ_L = ω_L − ω_a` in units of `γ`.
    pub detuning: f64,
    /// Peak Rabi frequency `Ω` in units of `γ`.
    pub rabi: f64,
    pub profile: BeamProfile,
    /// Active sides with their complex amplitude relative to `Ω`.
    pub sides: Vec<(Side, Complex64)>,
}

impl DriveConfig {
    /// Illumination from the left only, the configuration used for all figures.
    pub fn one_sided(detuning: f64, rabi: f64, profile: BeamProfile) -> Self {
        DriveConfig {
            detuning,
            rabi,
            profile,
            sides: vec![(Side::Forward, Complex64::new(1.0, 0.0))],
        }
    }

    pub fn two_sided(
        detuning: f64,
        rabi: f64,
        profile: BeamProfile,
        forward: Complex64,
        backward: Complex64,
    ) -> Self {
        DriveConfig {
            detuning,
            rabi,
            profile,
            sides: vec![(Side::Forward, forward), (Side::Backward, backward)],
        }
    }

    /// Envelope factor `Ω_n/Ω` at an in-plane position.
    pub fn envelope(&self, r: [f64; 2]) -> f64 {
        match self.profile {
            BeamProfile::Uniform => 1.0,
            BeamProfile::Gaussian { waist } => (-(r[0] * r[0] + r[1] * r[1]) / (waist * waist)).exp(),
        }
    }

    pub fn rabi_profile(&self, geometry: &ArrayGeometry) -> Result<RabiProfile> {
        if self.sides.is_empty() {
            return invalid("drive has no active propagation side");
        }
        if let BeamProfile::Gaussian { waist } = self.profile {
            if !(waist > 0.0) {
                return invalid(format!("beam waist must be positive, got {waist}"));
            }
        }
        let mut amplitudes = vec![[Complex64::new(0.0, 0.0); 2]; geometry.len()];
        let mut active = [false; 2];
        for &(side, scale) in &self.sides {
            active[side.slot()] = true;
            for (amp, r) in amplitudes.iter_mut().zip(geometry.positions()) {
                amp[side.slot()] += scale * (self.rabi * self.envelope(*r));
            }
        }
        Ok(RabiProfile { amplitudes, active })
    }
}

/// Per-atom, per-side Rabi amplitudes `Ω_{ns}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RabiProfile {
    amplitudes: Vec<[Complex64; 2]>,
    active: [bool; 2],
}

impl RabiProfile {
    /// Single-side profile from explicit amplitudes.
    pub fn forward(amplitudes: Vec<Complex64>) -> Self {
        RabiProfile {
            amplitudes: amplitudes
                .into_iter()
                .map(|a| [a, Complex64::new(0.0, 0.0)])
                .collect(),
            active: [true, false],
        }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn side(&self, n: usize, side: Side) -> Complex64 {
        self.amplitudes[n][side.slot()]
    }

    pub fn is_active(&self, side: Side) -> bool {
        self.active[side.slot()]
    }

    pub fn active_sides(&self) -> impl Iterator<Item = Side> + '_ {
        [Side::Forward, Side::Backward]
            .into_iter()
            .filter(|s| self.is_active(*s))
    }

    /// `Σ_s Ω_{ns}`, the total drive amplitude at `z = 0`.
    pub fn total(&self, n: usize) -> Complex64 {
        self.amplitudes[n][0] + self.amplitudes[n][1]
    }

    pub fn totals(&self) -> Vec<Complex64> {
        (0..self.len()).map(|n| self.total(n)).collect()
    }

    pub fn is_one_sided(&self) -> bool {
        self.active == [true, false]
    }

    /// Scale every amplitude by a real factor.
    pub fn scaled(&self, factor: f64) -> Self {
        RabiProfile {
            amplitudes: self
                .amplitudes
                .iter()
                .map(|a| [a[0] * factor, a[1] * factor])
                .collect(),
            active: self.active,
        }
    }
}
