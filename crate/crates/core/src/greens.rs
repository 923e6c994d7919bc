//! Free-space dyadic Green's tensor and its longitudinal force kernel.
//!
//! Separations are given either as positions `r` in units of `λ`, or as
//! dimensionless phases `s = q·r`. With `λ = 1` the tensor is written
//!
//! ```text
//! G_ij(r) = e^{is}/(2s) · [A(s) δ_ij + B(s) ŝ_i ŝ_j]
//! A(s) = 1 + (is − 1)/s²,   B(s) = −1 + (3 − 3is)/s²
//! ```
//!
//! The dimensionless force kernel is the second derivative of `2λ·G` along
//! the lattice normal, `F_ij(s⊥) = ∂²_{s_z} [2λ G_ij] |_{s_z = 0}`.

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::Polarization;
use crate::Q;

pub type ComplexTensor3 = Matrix3<Complex64>;

/// Separations below this length (in `λ`) are treated as coincident.
pub const SINGULAR_SEPARATION: f64 = 1e-9;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn check(r: f64) -> Result<()> {
    if r < SINGULAR_SEPARATION || !r.is_finite() {
        return Err(Error::Singularity { separation: r });
    }
    Ok(())
}

/// Radial functions of the scaled tensor `2λG = f(s) δ + h(s) s s`.
#[derive(Clone, Copy, Debug)]
struct Radial {
    f: Complex64,
    h: Complex64,
    /// `f'(s)/s`
    df_over_s: Complex64,
    /// `h'(s)·s`
    dh_times_s: Complex64,
}

impl Radial {
    fn at(s: f64) -> Self {
        let e = Complex64::from_polar(1.0, s);
        let s2 = s * s;
        let s3 = s2 * s;
        let a = 1.0 + (I * s - 1.0) / s2;
        let b = -1.0 + (3.0 - 3.0 * I * s) / s2;
        let da = I / s2 - 2.0 * (I * s - 1.0) / s3;
        let db = -3.0 * I / s2 - 6.0 * (1.0 - I * s) / s3;
        let es2 = e / s2;
        Radial {
            f: e * a / s,
            h: e * b / s3,
            df_over_s: es2 * ((I - 1.0 / s) * a + da),
            dh_times_s: es2 * ((I - 3.0 / s) * b + db),
        }
    }
}

/// Full Green's tensor `G_ij(r)` in units of `1/λ`.
pub fn green_tensor(r: [f64; 3]) -> Result<ComplexTensor3> {
    let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    check(norm)?;
    let s = Q * norm;
    let rad = Radial::at(s);
    let u = [r[0] / norm, r[1] / norm, r[2] / norm];
    Ok(ComplexTensor3::from_fn(|i, j| {
        let delta = if i == j { rad.f } else { Complex64::new(0.0, 0.0) };
        0.5 * (delta + rad.h * s * s * u[i] * u[j])
    }))
}

/// Full 3×3 second-derivative tensor `∂²_{s_z}[2λ G_ij]` at an in-plane separation,
/// including the `z` row and column.
pub fn force_kernel_full(s_perp: [f64; 2]) -> Result<ComplexTensor3> {
    let s = s_perp[0].hypot(s_perp[1]);
    check(s / Q)?;
    let rad = Radial::at(s);
    let v = [s_perp[0] / s, s_perp[1] / s, 0.0];
    Ok(ComplexTensor3::from_fn(|i, j| {
        let mut t = rad.dh_times_s * v[i] * v[j];
        if i == j {
            t += rad.df_over_s;
        }
        if i == 2 && j == 2 {
            t += 2.0 * rad.h;
        }
        t
    }))
}

/// Dimensionless linearized force kernel `F_ij(s⊥)`; the `z` row and column are zero.
pub fn force_kernel(s_perp: [f64; 2]) -> Result<ComplexTensor3> {
    let mut t = force_kernel_full(s_perp)?;
    for k in 0..3 {
        t[(2, k)] = Complex64::new(0.0, 0.0);
        t[(k, 2)] = Complex64::new(0.0, 0.0);
    }
    Ok(t)
}

/// Scalar projection `e_d† T e_d` onto the in-plane dipole orientation.
pub fn project(tensor: &ComplexTensor3, polarization: Polarization) -> Complex64 {
    match polarization {
        Polarization::CircularXy => 0.5 * (tensor[(0, 0)] + tensor[(1, 1)]),
        Polarization::LinearX => tensor[(0, 0)],
    }
}

fn in_plane_weight(u: [f64; 2], polarization: Polarization) -> f64 {
    match polarization {
        Polarization::CircularXy => 0.5 * (u[0] * u[0] + u[1] * u[1]),
        Polarization::LinearX => u[0] * u[0],
    }
}

/// `e_d†·G(r⊥)·e_d` for an in-plane separation, in units of `1/λ`.
///
/// Equivalent to `project(&green_tensor([x, y, 0])?, pol)` without building the tensor.
pub fn projected_green(r_perp: [f64; 2], polarization: Polarization) -> Result<Complex64> {
    let r = r_perp[0].hypot(r_perp[1]);
    check(r)?;
    let s = Q * r;
    let rad = Radial::at(s);
    let w = in_plane_weight([r_perp[0] / r, r_perp[1] / r], polarization);
    Ok(0.5 * (rad.f + rad.h * s * s * w))
}

/// `e_d†·F(s⊥)·e_d` for a dimensionless in-plane separation.
pub fn projected_force(s_perp: [f64; 2], polarization: Polarization) -> Result<Complex64> {
    let s = s_perp[0].hypot(s_perp[1]);
    check(s / Q)?;
    let rad = Radial::at(s);
    let w = in_plane_weight([s_perp[0] / s, s_perp[1] / s], polarization);
    Ok(rad.df_over_s + rad.dh_times_s * w)
}

/// Projected Green's function at a general 3D separation `(r⊥, z)`.
pub fn projected_green_3d(r_perp: [f64; 2], z: f64, polarization: Polarization) -> Result<Complex64> {
    let t = green_tensor([r_perp[0], r_perp[1], z])?;
    Ok(project(&t, polarization))
}

/// Largest deviation of the force kernel from `(2λ/q²) ∂²_z G` at `z = 0`,
/// relative to `max |F_ij|`, using a fourth-order central difference of step `h`.
pub fn kernel_identity_error(r_perp: [f64; 2], h: f64) -> Result<f64> {
    let [x, y] = r_perp;
    let g = |z: f64| green_tensor([x, y, z]);
    let w = |v: f64| Complex64::new(v, 0.0);
    let d2 = (g(h)? * w(16.0) + g(-h)? * w(16.0) - g(2.0 * h)? - g(-2.0 * h)? - g(0.0)? * w(30.0))
        * w(2.0 / (12.0 * h * h * Q * Q));
    let f = force_kernel_full([Q * x, Q * y])?;
    let scale = f.iter().map(|c| c.norm()).fold(0.0, f64::max);
    Ok((d2 - f).iter().map(|c| c.norm()).fold(0.0, f64::max) / scale)
}
