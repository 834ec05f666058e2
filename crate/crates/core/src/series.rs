//! Separation-of-variables farfields for disk geometries.
//!
//! These serve both as production solvers (obstacle backgrounds) and as
//! independent oracles for the volume-integral solver. Scattered fields are
//! expanded on `H_m^{(1)}(kr) e^{im phi}`; the interior uses `J_m(k sqrt(n) r)`
//! for a penetrable disk and harmonic `r^{|m|}` solutions for the zero-index
//! material.

use crate::error::{CoreError, Result};
use crate::forward::FarfieldMatrix;
use crate::geometry::{BoundaryCondition, DirectionGrid, Point, Shape};
use crate::linalg::CVec;
use crate::special::{bessel_j_all, cyl_fun_all};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Series order cutoff: `ceil(kR) + 20` keeps the tail below 1e-12.
fn truncation_order(k: f64, radius: f64) -> usize {
    (k * radius).ceil() as usize + 20
}

/// Farfield matrix from angular scattering coefficients `b_m` (symmetric in
/// `m -> -m`) of a disk centered at `center`:
/// `u_inf = sqrt(2/(pi k)) e^{-i pi/4} (b_0 + 2 sum b_m cos(m dphi))`,
/// times the translation phase for an off-origin center.
fn farfield_from_coeffs(
    b: &[Complex64],
    center: Point,
    k: f64,
    incident: &DirectionGrid,
    observation: &DirectionGrid,
) -> Result<FarfieldMatrix> {
    let c = Complex64::from_polar((2.0 / (PI * k)).sqrt(), -PI / 4.0);
    let mut entries = crate::linalg::CMat::zeros((observation.len(), incident.len()));
    for s in 0..observation.len() {
        let phi_s = observation.angle(s);
        for i in 0..incident.len() {
            let dphi = phi_s - incident.angle(i);
            let mut acc = b[0];
            for (m, bm) in b.iter().enumerate().skip(1) {
                acc += *bm * (2.0 * (m as f64 * dphi).cos());
            }
            let shift = Complex64::from_polar(
                1.0,
                k * (incident.unit(i).dot(center) - observation.unit(s).dot(center)),
            );
            entries[[s, i]] = c * acc * shift;
        }
    }
    FarfieldMatrix::new(k, incident.clone(), observation.clone(), entries)
}

fn disk_params(omega_b: &Shape) -> Result<(Point, f64)> {
    match omega_b {
        Shape::Disk { center, radius } => Ok((*center, *radius)),
        _ => Err(CoreError::UnsupportedShape(
            "series solvers require a disk".into(),
        )),
    }
}

/// Scattering coefficients of a penetrable disk with constant index `n`.
pub fn mie_disk_coeffs(n: f64, radius: f64, k: f64) -> Result<Vec<Complex64>> {
    if !(n > 0.0) || !(radius > 0.0) || !(k > 0.0) {
        return Err(CoreError::invalid(
            "mie_disk_coeffs needs n > 0, R > 0, k > 0",
        ));
    }
    let m_max = truncation_order(k, radius);
    let sq = n.sqrt();
    let outer = cyl_fun_all(m_max + 1, k * radius)?;
    let inner = bessel_j_all(m_max + 1, sq * k * radius);
    let mut b = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let jm = outer[m].j;
        let hm = outer[m].h1();
        let jmp = deriv_from_table(m, k * radius, |i| outer[i].j);
        let hmp = hankel_deriv_from_table(m, &outer);
        let ji = inner[m];
        let jip = deriv_from_table(m, sq * k * radius, |i| inner[i]);
        let num = sq * jip * jm - ji * jmp;
        let den = Complex64::new(ji, 0.0) * hmp - sq * jip * hm;
        b.push(Complex64::new(num, 0.0) / den);
    }
    Ok(b)
}

fn deriv_from_table(m: usize, _x: f64, table: impl Fn(usize) -> f64) -> f64 {
    if m == 0 {
        -table(1)
    } else {
        0.5 * (table(m - 1) - table(m + 1))
    }
}

fn hankel_deriv_from_table(m: usize, table: &[crate::special::CylFunValue]) -> Complex64 {
    if m == 0 {
        -table[1].h1()
    } else {
        0.5 * (table[m - 1].h1() - table[m + 1].h1())
    }
}

/// Mie-series farfield of a penetrable disk: the independent oracle for the
/// Lippmann-Schwinger path.
pub fn mie_disk_farfield(
    n: f64,
    omega: &Shape,
    k: f64,
    incident: &DirectionGrid,
    observation: &DirectionGrid,
) -> Result<FarfieldMatrix> {
    let (center, radius) = disk_params(omega)?;
    let b = mie_disk_coeffs(n, radius, k)?;
    farfield_from_coeffs(&b, center, k, incident, observation)
}

/// Interior total field of the penetrable disk for one incident plane wave,
/// evaluated at points strictly inside the disk.
pub fn mie_disk_interior(
    n: f64,
    radius: f64,
    k: f64,
    theta_i: f64,
    points: &[Point],
) -> Result<CVec> {
    let m_max = truncation_order(k, radius);
    let sq = n.sqrt();
    let outer = cyl_fun_all(m_max + 1, k * radius)?;
    let inner = bessel_j_all(m_max + 1, sq * k * radius);
    // interior coefficients a_m from value continuity
    let b = mie_disk_coeffs(n, radius, k)?;
    let a: Vec<Complex64> = (0..=m_max)
        .map(|m| (outer[m].j + b[m] * outer[m].h1()) / inner[m])
        .collect();
    Ok(CVec::from_iter(points.iter().map(|p| {
        let r = p.norm();
        let phi = p.y.atan2(p.x);
        let jr = bessel_j_all(m_max, sq * k * r);
        let mut acc = a[0] * jr[0];
        let mut im_pow = Complex64::new(0.0, 1.0);
        for m in 1..=m_max {
            acc += 2.0 * im_pow * a[m] * jr[m] * (m as f64 * (phi - theta_i)).cos();
            im_pow *= Complex64::new(0.0, 1.0);
        }
        acc
    })))
}

/// Scattering coefficients of the ZIM disk (`rho = 0` inside): interior
/// Laplace solutions `r^{|m|}` matched to `J_m + b_m H_m` by value and
/// radial derivative.
pub fn zim_disk_coeffs(radius: f64, k: f64) -> Result<Vec<Complex64>> {
    let m_max = truncation_order(k, radius);
    let outer = cyl_fun_all(m_max + 1, k * radius)?;
    let mut b = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let jm = outer[m].j;
        let hm = outer[m].h1();
        let jmp = deriv_from_table(m, k * radius, |i| outer[i].j);
        let hmp = hankel_deriv_from_table(m, &outer);
        let mf = m as f64;
        let num = mf * jm / radius - k * jmp;
        let den = k * hmp - mf * hm / radius;
        b.push(num / den);
    }
    Ok(b)
}

/// Series farfield of the ZIM disk background.
pub fn zim_disk_farfield(
    omega_b: &Shape,
    k: f64,
    incident: &DirectionGrid,
    observation: &DirectionGrid,
) -> Result<FarfieldMatrix> {
    let (center, radius) = disk_params(omega_b)?;
    let b = zim_disk_coeffs(radius, k)?;
    farfield_from_coeffs(&b, center, k, incident, observation)
}

/// Scattering coefficients of the impenetrable disk under the boundary
/// condition `B`:
/// Dirichlet `b_m = -J_m(kR) / H_m(kR)`,
/// Robin `b_m = -(k J_m'(kR) + gamma J_m(kR)) / (k H_m'(kR) + gamma H_m(kR))`.
pub fn obstacle_disk_coeffs(
    bc: BoundaryCondition,
    radius: f64,
    k: f64,
) -> Result<Vec<Complex64>> {
    let m_max = truncation_order(k, radius);
    let outer = cyl_fun_all(m_max + 1, k * radius)?;
    let mut b = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let jm = outer[m].j;
        let hm = outer[m].h1();
        let bm = match bc {
            BoundaryCondition::Dirichlet => -Complex64::new(jm, 0.0) / hm,
            BoundaryCondition::Robin { gamma } => {
                let jmp = deriv_from_table(m, k * radius, |i| outer[i].j);
                let hmp = hankel_deriv_from_table(m, &outer);
                -(k * jmp + gamma * jm) / (k * hmp + gamma * hm)
            }
        };
        b.push(bm);
    }
    Ok(b)
}

/// Series farfield of a disk obstacle background.
pub fn obstacle_disk_farfield(
    omega_b: &Shape,
    bc: BoundaryCondition,
    k: f64,
    incident: &DirectionGrid,
    observation: &DirectionGrid,
) -> Result<FarfieldMatrix> {
    let (center, radius) = disk_params(omega_b)?;
    let b = obstacle_disk_coeffs(bc, radius, k)?;
    farfield_from_coeffs(&b, center, k, incident, observation)
}

/// Total field of the obstacle problem on the circle `r = R` for one
/// incident plane wave (used to verify the boundary condition).
pub fn obstacle_boundary_trace(
    bc: BoundaryCondition,
    radius: f64,
    k: f64,
    theta_i: f64,
    angles: &[f64],
) -> Result<CVec> {
    let b = obstacle_disk_coeffs(bc, radius, k)?;
    let m_max = b.len() - 1;
    let outer = cyl_fun_all(m_max, k * radius)?;
    Ok(CVec::from_iter(angles.iter().map(|&phi| {
        let mut acc = outer[0].j + b[0] * outer[0].h1();
        let mut im_pow = Complex64::new(0.0, 1.0);
        for m in 1..=m_max {
            let radial = outer[m].j + b[m] * outer[m].h1();
            acc += 2.0 * im_pow * radial * (m as f64 * (phi - theta_i)).cos();
            im_pow *= Complex64::new(0.0, 1.0);
        }
        acc
    })))
}

/// Unitarity defect of the scattering matrix `S = I + 2ik conj(gamma_ff) F`
/// built from a sampled farfield matrix. Zero for lossless media.
pub fn s_matrix_unitarity_defect(ff: &FarfieldMatrix) -> f64 {
    use crate::geometry::FarfieldConvention;
    use crate::linalg::conj_transpose;
    let n = ff.incident.len();
    let w = ff.incident.weight();
    let factor = Complex64::new(0.0, 2.0 * ff.k) * FarfieldConvention::gamma_ff(ff.k).conj() * w;
    let s = crate::linalg::CMat::eye(n) + ff.entries.mapv(|z| z * factor);
    let prod = conj_transpose(&s).dot(&s);
    let d = &prod - &crate::linalg::CMat::eye(n);
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
