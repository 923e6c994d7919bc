//! Collective longitudinal modes: finite-array diagonalization, the
//! infinite-lattice spectrum `ν_k`, stability and gap classification.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::cooperative::Resonance;
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::greens::projected_force;
use crate::linalg::{asymmetry, max_abs};
use crate::params::{ArrayGeometry, Polarization, UnitSystem};
use crate::Q;

/// Default spectral-gap threshold in units of `ν₀`.
pub const DEFAULT_GAP_THRESHOLD: f64 = 0.02;
/// Default band around `ν₀` counted as non-interacting modes, relative.
pub const DEFAULT_NEAR_TOLERANCE: f64 = 0.01;
/// Default half-width of the square shell for infinite-lattice sums, in sites.
pub const DEFAULT_SHELL: usize = 60;

/// Eigen-decomposition of the `ν²` matrix, sorted by ascending `ν_k²`.
#[derive(Clone, Debug)]
pub struct ModeDecomposition {
    /// `ν_k²` in `γ²`.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is mode `k`, indexed by atom.
    pub eigenvectors: DMatrix<f64>,
}

impl ModeDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `ν_k`, purely imaginary for unstable modes.
    pub fn frequencies(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().map(|&v| complex_sqrt(v)).collect()
    }

    pub fn mode(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k).iter().cloned().collect()
    }

    /// `|⟨u_k, p⟩| / |p|` for a profile `p` over the atoms.
    pub fn overlap(&self, k: usize, profile: &[f64]) -> f64 {
        let norm = profile.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let dot: f64 = self.eigenvectors.column(k).iter().zip(profile).map(|(u, p)| u * p).sum();
        dot.abs() / norm
    }

    /// Largest eigen-residual `‖M u_k − ν_k² u_k‖` relative to `‖M‖`.
    pub fn residual(&self, nu2: &DMatrix<f64>) -> f64 {
        let scale = nu2.norm().max(f64::MIN_POSITIVE);
        (0..self.len())
            .map(|k| {
                let u = self.eigenvectors.column(k);
                (nu2 * u - u * self.eigenvalues[k]).norm() / scale
            })
            .fold(0.0, f64::max)
    }
}

fn complex_sqrt(v: f64) -> Complex64 {
    if v >= 0.0 {
        Complex64::new(v.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-v).sqrt())
    }
}

/// Flip the sign so that the largest-magnitude component is positive
/// (the first such component on ties).
fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn lexicographic_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.partial_cmp(x) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Full eigen-decomposition of a real symmetric `ν²` matrix.
///
/// Eigenvalues are ascending. Eigenvalues closer than `1e−12·max|ν²|` are a
/// degenerate cluster; within it, the sign-normalized eigenvectors are ordered
/// lexicographically descending.
pub fn diagonalize_modes(nu2: &DMatrix<f64>) -> Result<ModeDecomposition> {
    let n = nu2.nrows();
    if nu2.ncols() != n {
        return invalid(format!("ν² matrix is {}×{}", n, nu2.ncols()));
    }
    let scale = max_abs(nu2);
    let asym = asymmetry(nu2);
    if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return invalid(format!("ν² matrix is not symmetric (asymmetry {asym:e})"));
    }
    let eig = SymmetricEigen::new(nu2.clone());
    let mut modes: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().cloned().collect();
            normalize_sign(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tol = 1e-12 * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && modes[end].0 - modes[end - 1].0 <= tol {
            end += 1;
        }
        modes[start..end].sort_by(|a, b| lexicographic_desc(&a.1, &b.1));
        start = end;
    }
    let eigenvalues = modes.iter().map(|m| m.0).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |i, k| modes[k].1[i]);
    Ok(ModeDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralGap {
    /// 1-based index of the lower mode.
    pub lower: usize,
    /// `(Re ν_{k+1} − Re ν_k)/ν₀`
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub nu0: f64,
    pub unstable_count: usize,
    /// 0-based indices of modes with `ν_k² < 0`.
    pub unstable_modes: Vec<usize>,
    pub gap_threshold: f64,
    pub gaps: Vec<SpectralGap>,
    /// Gap between the two highest modes in units of `ν₀`.
    pub top_gap: f64,
    pub near_tolerance: f64,
    pub near_nu0_count: usize,
    /// `min Re ν_k / ν₀`, `max Re ν_k / ν₀`
    pub min_frequency: f64,
    pub max_frequency: f64,
    /// Largest growth rate `max Im ν_k / ν₀`.
    pub max_growth_rate: f64,
}

pub fn classify(
    decomposition: &ModeDecomposition,
    nu0: f64,
    gap_threshold: f64,
    near_tolerance: f64,
) -> StabilityReport {
    let freqs: Vec<Complex64> = decomposition.frequencies().iter().map(|f| f / nu0).collect();
    let unstable_modes: Vec<usize> = decomposition
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < 0.0)
        .map(|(k, _)| k)
        .collect();
    let gaps = freqs
        .windows(2)
        .enumerate()
        .filter_map(|(k, w)| {
            let size = w[1].re - w[0].re;
            (size > gap_threshold).then_some(SpectralGap { lower: k + 1, size })
        })
        .collect();
    let top_gap = match freqs.len() {
        0 | 1 => 0.0,
        n => freqs[n - 1].re - freqs[n - 2].re,
    };
    StabilityReport {
        nu0,
        unstable_count: unstable_modes.len(),
        unstable_modes,
        gap_threshold,
        gaps,
        top_gap,
        near_tolerance,
        near_nu0_count: freqs.iter().filter(|f| f.im == 0.0 && (f.re - 1.0).abs() <= near_tolerance).count(),
        min_frequency: freqs.iter().map(|f| f.re).fold(f64::INFINITY, f64::min),
        max_frequency: freqs.iter().map(|f| f.re).fold(f64::NEG_INFINITY, f64::max),
        max_growth_rate: freqs.iter().map(|f| f.im).fold(0.0, f64::max),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeFriction {
    /// `α_kk`
    pub diagonal: Vec<f64>,
    /// `max_{k≠k'} |α_kk'| / max_k |α_kk|`
    pub off_diagonal_ratio: f64,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
}

/// Rotate per-atom friction into the mode basis, `α_kk' = Σ_n U_nk α_n U_nk'`.
pub fn mode_friction(decomposition: &ModeDecomposition, friction: &[f64]) -> Result<ModeFriction> {
    let n = decomposition.len();
    if friction.len() != n {
        return invalid(format!("{} friction values for {n} modes", friction.len()));
    }
    let u = &decomposition.eigenvectors;
    let scaled = DMatrix::from_fn(n, n, |i, k| friction[i] * u[(i, k)]);
    let matrix = u.transpose() * scaled;
    let diagonal: Vec<f64> = (0..n).map(|k| matrix[(k, k)]).collect();
    let max_diag = diagonal.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut max_off: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                max_off = max_off.max(matrix[(i, j)].abs());
            }
        }
    }
    let off_diagonal_ratio = if max_diag > 0.0 {
        max_off / max_diag
    } else if max_off > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(ModeFriction {
        diagonal,
        off_diagonal_ratio,
        matrix,
    })
}

/// `cos(k_x a i_x + k_y a i_y)` on lattice indices counted from the array corner.
///
/// Wavevectors are in units of `π/a`.
pub fn fourier_profile(geometry: &ArrayGeometry, kx: f64, ky: f64) -> Vec<f64> {
    (0..geometry.len())
        .map(|n| {
            let (ix, iy) = geometry.indices(n);
            (std::f64::consts::PI * (kx * ix as f64 + ky * iy as f64)).cos()
        })
        .collect()
}

/// Overlaps of one mode with the two textbook candidates for the softest
/// finite-array pattern: `cos[(π/2a)(x+y)]` and `cos(πx/a) + cos(πy/a)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProfileOverlaps {
    pub half_diagonal: f64,
    pub edge_sum: f64,
    pub uniform: f64,
    pub corner: f64,
}

pub fn profile_overlaps(decomposition: &ModeDecomposition, geometry: &ArrayGeometry, k: usize) -> ProfileOverlaps {
    let edge: Vec<f64> = fourier_profile(geometry, 1.0, 0.0)
        .iter()
        .zip(fourier_profile(geometry, 0.0, 1.0))
        .map(|(a, b)| a + b)
        .collect();
    ProfileOverlaps {
        half_diagonal: decomposition.overlap(k, &fourier_profile(geometry, 0.5, 0.5)),
        edge_sum: decomposition.overlap(k, &edge),
        uniform: decomposition.overlap(k, &vec![1.0; geometry.len()]),
        corner: decomposition.overlap(k, &fourier_profile(geometry, 1.0, 1.0)),
    }
}

/// Uniformly driven infinite square lattice.
#[derive(Clone, Copy, Debug)]
pub struct InfiniteLattice {
    pub spacing: f64,
    pub polarization: Polarization,
    /// `(3/2) q² |Ω|² / L`, the prefactor of `Re F` in `K_n0`.
    pub spring_scale: f64,
    pub mass: f64,
    pub nu0: f64,
}

impl InfiniteLattice {
    pub fn new(
        spacing: f64,
        polarization: Polarization,
        rabi: f64,
        resonance: &Resonance,
        units: &UnitSystem,
        nu0: f64,
    ) -> Result<Self> {
        if !(spacing > 0.0) || !(nu0 > 0.0) {
            return invalid(format!("spacing and ν₀ must be positive, got a={spacing}, ν₀={nu0}"));
        }
        Ok(InfiniteLattice {
            spacing,
            polarization,
            spring_scale: 1.5 * Q * Q * rabi * rabi / resonance.lorentzian(),
            mass: units.mass(),
            nu0,
        })
    }

    /// `K_n0` on the quadrant `0 ≤ i_x, i_y ≤ shell`, with multiplicities folded in.
    fn quadrant(&self, shell: usize) -> Vec<Vec<f64>> {
        (0..=shell)
            .map(|iy| {
                (0..=shell)
                    .map(|ix| {
                        if ix == 0 && iy == 0 {
                            return 0.0;
                        }
                        let s = [Q * self.spacing * ix as f64, Q * self.spacing * iy as f64];
                        let f = projected_force(s, self.polarization).expect("distinct lattice sites");
                        let mult = (if ix > 0 { 2.0 } else { 1.0 }) * (if iy > 0 { 2.0 } else { 1.0 });
                        mult * self.spring_scale * f.re
                    })
                    .collect()
            })
            .collect()
    }

    fn k_sum(quadrant: &[Vec<f64>], spacing: f64, kx: f64, ky: f64) -> f64 {
        let cx: Vec<f64> = (0..quadrant.len()).map(|i| (kx * spacing * i as f64).cos()).collect();
        quadrant
            .iter()
            .enumerate()
            .map(|(iy, row)| {
                let cy = (ky * spacing * iy as f64).cos();
                cy * row.iter().zip(&cx).map(|(k, c)| k * c).sum::<f64>()
            })
            .sum()
    }

    /// `ν_k/ν₀` at wavevectors given in units of `π/a`, square shell of half-width `shell`.
    pub fn frequencies(&self, points: &[(f64, f64)], shell: usize, exec: Execution) -> Vec<Complex64> {
        let quadrant = self.quadrant(shell);
        let k0 = Self::k_sum(&quadrant, self.spacing, 0.0, 0.0);
        let unit = std::f64::consts::PI / self.spacing;
        exec.map(points.len(), |p| {
            let (kx, ky) = points[p];
            let kk = Self::k_sum(&quadrant, self.spacing, kx * unit, ky * unit);
            complex_sqrt(self.nu0 * self.nu0 + (kk - k0) / self.mass) / self.nu0
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BzPoint {
    /// `k_x a/π`
    pub kx: f64,
    /// `k_y a/π`
    pub ky: f64,
    /// `ν_k/ν₀`
    pub nu: Complex64,
}

/// Wavevector sampling of the Brillouin zone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KGrid {
    /// `k a/π = −1 + 2i/n`, the Born-von Karman grid of an `n×n` torus.
    Periodic { n: usize },
    /// `k a/π = m/(n+1)`, `m = 1..n`, the standing waves of an open `nx×ny` array.
    StandingWave { nx: usize, ny: usize },
}

impl KGrid {
    pub fn points(self) -> Vec<(f64, f64)> {
        match self {
            KGrid::Periodic { n } => brillouin_grid(n),
            KGrid::StandingWave { nx, ny } => standing_wave_grid(nx, ny),
        }
    }

    fn is_empty(self) -> bool {
        match self {
            KGrid::Periodic { n } => n == 0,
            KGrid::StandingWave { nx, ny } => nx == 0 || ny == 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FourierSpectrum {
    pub grid: KGrid,
    pub shell: usize,
    /// `max |ν(shell) − ν(shell/2)| / ν₀` over the grid.
    pub residual: f64,
    pub points: Vec<BzPoint>,
}

impl FourierSpectrum {
    pub fn sorted_real(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.points.iter().map(|p| p.nu.re).collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Grid `k a/π = −1 + 2i/grid`, `i = 0..grid`, row-major with `k_x` fastest.
pub fn brillouin_grid(grid: usize) -> Vec<(f64, f64)> {
    let axis: Vec<f64> = (0..grid).map(|i| -1.0 + 2.0 * i as f64 / grid as f64).collect();
    axis.iter().flat_map(|&ky| axis.iter().map(move |&kx| (kx, ky))).collect()
}

/// Grid `k a/π = (m_x/(nx+1), m_y/(ny+1))`, row-major with `k_x` fastest.
pub fn standing_wave_grid(nx: usize, ny: usize) -> Vec<(f64, f64)> {
    let ax: Vec<f64> = (1..=nx).map(|m| m as f64 / (nx + 1) as f64).collect();
    (1..=ny)
        .flat_map(|my| {
            let ky = my as f64 / (ny + 1) as f64;
            ax.iter().map(move |&kx| (kx, ky))
        })
        .collect()
}

/// Infinite-lattice spectrum over the Brillouin zone.
///
/// The shell half-width is doubled from `shell` until successive results
/// agree within `tolerance` (in `ν₀`), up to `max_shell`.
pub fn fourier_spectrum(
    lattice: &InfiniteLattice,
    grid: KGrid,
    shell: usize,
    max_shell: usize,
    tolerance: f64,
    exec: Execution,
) -> Result<FourierSpectrum> {
    if grid.is_empty() {
        return invalid("Brillouin-zone grid must be non-empty");
    }
    if shell < 30 {
        return invalid(format!("shell half-width {shell} is below 30 sites"));
    }
    let points = grid.points();
    let mut current = shell;
    let mut prev = lattice.frequencies(&points, current / 2, exec);
    loop {
        let next = lattice.frequencies(&points, current, exec);
        let residual = prev.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if residual <= tolerance {
            return Ok(FourierSpectrum {
                grid,
                shell: current,
                residual,
                points: points
                    .iter()
                    .zip(next)
                    .map(|(&(kx, ky), nu)| BzPoint { kx, ky, nu })
                    .collect(),
            });
        }
        if 2 * current > max_shell {
            return Err(Error::Convergence {
                what: "Brillouin-zone shell sum",
                residual,
                tolerance,
            });
        }
        prev = next;
        current *= 2;
    }
}

/// RMS of `(a_i − b_i)/b_i` over two equally long sorted lists.
pub fn rms_relative_deviation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    (a.iter().zip(b).map(|(x, y)| ((x - y) / y).powi(2)).sum::<f64>() / n as f64).sqrt()
}
