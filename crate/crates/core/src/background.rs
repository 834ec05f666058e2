//! Artificial-background farfields and the sharp operator.
//!
//! The workbench replaces the free-space background by an artificial one
//! (zero-index material, impenetrable obstacle, or a general density `rho`),
//! computes its farfield `F~`, and works with `F_art = F - F~` together with
//! the Hermitian positive semidefinite penalty operator
//! `T~# = |F~ + F~*| + |F~ - F~*|`.

use crate::error::{CoreError, Result};
use crate::forward::{farfield_matrix_on_grid, FarfieldMatrix, VolumeGrid};
use crate::geometry::{BackgroundSpec, DirectionGrid};
use crate::linalg::{conj_transpose, hermitian_eig, operator_abs, CMat};
use crate::series::obstacle_disk_farfield;
use num_complex::Complex64;

/// A background farfield matrix together with the descriptor of the
/// background that produced it.
#[derive(Debug, Clone)]
pub struct BackgroundFarfield {
    pub farfield: FarfieldMatrix,
    pub descriptor: String,
}

/// `F~` for a penetrable artificial background (ZIM or general `rho`),
/// computed with the same volume-integral machinery as the data solver,
/// with contrast `rho - 1`.
pub fn penetrable_background_farfield(
    bg: &BackgroundSpec,
    k: f64,
    incident: &DirectionGrid,
    observation: &DirectionGrid,
    h: f64,
) -> Result<BackgroundFarfield> {
    let grid = VolumeGrid::for_background(bg, h, k)?;
    let farfield = farfield_matrix_on_grid(&grid, k, incident, observation)?;
    Ok(BackgroundFarfield {
        farfield,
        descriptor: bg.descriptor(),
    })
}

/// `F~` for a penetrable background on a caller-provided grid. Sharing the
/// grid with the data solver lets part of the discretization bias cancel in
/// `F - F~`.
pub fn penetrable_background_farfield_on_grid(
    bg: &BackgroundSpec,
    grid: &VolumeGrid,
    k: f64,
    incident: &DirectionGrid,
    observation: &DirectionGrid,
) -> Result<BackgroundFarfield> {
    let farfield = farfield_matrix_on_grid(grid, k, incident, observation)?;
    Ok(BackgroundFarfield {
        farfield,
        descriptor: bg.descriptor(),
    })
}

/// `F~` for an impenetrable disk background, by separation of variables.
pub fn obstacle_background_farfield(
    bg: &BackgroundSpec,
    k: f64,
    incident: &DirectionGrid,
    observation: &DirectionGrid,
) -> Result<BackgroundFarfield> {
    match bg {
        BackgroundSpec::Obstacle { omega_b, bc } => {
            let farfield = obstacle_disk_farfield(omega_b, *bc, k, incident, observation)?;
            Ok(BackgroundFarfield {
                farfield,
                descriptor: bg.descriptor(),
            })
        }
        _ => Err(CoreError::invalid(
            "obstacle_background_farfield needs an obstacle background",
        )),
    }
}

/// `F~` for any background variant: volume solver for penetrable ones,
/// series for obstacles. `h` is ignored by the obstacle path.
pub fn background_farfield(
    bg: &BackgroundSpec,
    k: f64,
    incident: &DirectionGrid,
    observation: &DirectionGrid,
    h: f64,
) -> Result<BackgroundFarfield> {
    match bg {
        BackgroundSpec::Obstacle { .. } => obstacle_background_farfield(bg, k, incident, observation),
        _ => penetrable_background_farfield(bg, k, incident, observation, h),
    }
}

/// `F_art = F - F~`. The grids, wavenumber, and convention tags must match.
pub fn artificial_farfield(
    data: &FarfieldMatrix,
    background: &BackgroundFarfield,
) -> Result<FarfieldMatrix> {
    data.compatible_with(&background.farfield)?;
    let entries = &data.entries - &background.farfield.entries;
    FarfieldMatrix::new(
        data.k,
        data.incident.clone(),
        data.observation.clone(),
        entries,
    )
}

/// The penalty operator `T~# = |F~ + F~*| + |F~ - F~*|`, Hermitian PSD.
#[derive(Debug, Clone)]
pub struct SharpOperator {
    pub matrix: CMat,
    pub source: String,
}

impl SharpOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diag().iter().map(|z| z.re).sum()
    }

    /// Spectral norm (largest eigenvalue; the operator is PSD).
    pub fn spectral_norm(&self) -> Result<f64> {
        let (vals, _) = hermitian_eig(&self.matrix)?;
        Ok(vals.iter().fold(0.0_f64, |m, &v| m.max(v.abs())))
    }
}

/// Build `T~#` from a background farfield. Both `F~ + F~*` and
/// `i(F~* - F~)` are Hermitian; their operator absolute values are summed.
pub fn sharp_operator(background: &BackgroundFarfield) -> Result<SharpOperator> {
    let m = &background.farfield.entries;
    if m.nrows() != m.ncols() {
        return Err(CoreError::invalid(
            "sharp_operator needs a square farfield matrix",
        ));
    }
    let adj = conj_transpose(m);
    let h1 = m + &adj;
    let h2 = (&adj - m).mapv(|z| Complex64::new(0.0, 1.0) * z);
    let matrix = operator_abs(&h1)? + operator_abs(&h2)?;
    Ok(SharpOperator {
        matrix,
        source: background.descriptor.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundaryCondition, Shape};
    use crate::series::zim_disk_farfield;

    fn dirs(n: usize) -> DirectionGrid {
        DirectionGrid::new(n).unwrap()
    }

    #[test]
    fn empty_rho_background_is_silent() {
        let bg = BackgroundSpec::GeneralRho { pieces: vec![] };
        let d = dirs(8);
        let bf = penetrable_background_farfield(&bg, 2.0, &d, &d, 0.1).unwrap();
        assert!(bf.farfield.max_norm() < 1e-14);
    }

    #[test]
    fn zim_disk_matches_series_oracle() {
        let disk = Shape::disk(0.0, 0.0, 1.0).unwrap();
        let bg = BackgroundSpec::zim(disk.clone());
        let d = dirs(16);
        let k = 2.0;
        let ls = penetrable_background_farfield(&bg, k, &d, &d, 1.0 / 40.0).unwrap();
        let series = zim_disk_farfield(&disk, k, &d, &d).unwrap();
        let diff = (&ls.farfield.entries - &series.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let scale = series.max_norm();
        assert!(diff / scale < 1e-2, "relative sup error {}", diff / scale);
    }

    #[test]
    fn zim_farfield_reciprocity() {
        let bg = BackgroundSpec::zim(Shape::disk(0.1, -0.2, 0.8).unwrap());
        let d = dirs(12);
        let bf = penetrable_background_farfield(&bg, 2.5, &d, &d, 1.0 / 30.0).unwrap();
        let n = d.len();
        for s in 0..n {
            for i in 0..n {
                let a = bf.farfield.entries[[s, i]];
                // u_inf(theta_s, theta_i) = u_inf(-theta_i, -theta_s)
                let b = bf.farfield.entries[[(i + n / 2) % n, (s + n / 2) % n]];
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn artificial_farfield_subtracts_and_checks_metadata() {
        let disk = Shape::disk(0.0, 0.0, 1.0).unwrap();
        let bg = BackgroundSpec::obstacle(disk, BoundaryCondition::Dirichlet).unwrap();
        let d = dirs(8);
        let bf = obstacle_background_farfield(&bg, 2.0, &d, &d).unwrap();
        let diff = artificial_farfield(&bf.farfield, &bf).unwrap();
        assert!(diff.max_norm() < 1e-15);

        let bf_other = obstacle_background_farfield(&bg, 2.5, &d, &d).unwrap();
        assert!(matches!(
            artificial_farfield(&bf_other.farfield, &bf),
            Err(CoreError::IncompatibleOperands(_))
        ));
    }

    #[test]
    fn sharp_operator_zero_input() {
        let d = dirs(6);
        let zero = FarfieldMatrix::new(1.0, d.clone(), d, CMat::zeros((6, 6))).unwrap();
        let bf = BackgroundFarfield {
            farfield: zero,
            descriptor: "zero".into(),
        };
        let t = sharp_operator(&bf).unwrap();
        assert!(t.matrix.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn sharp_operator_of_hermitian_psd_is_doubling() {
        // F~ Hermitian PSD: |2F~| = 2F~ and |F~ - F~*| = 0
        let d = dirs(4);
        let mut m = CMat::zeros((4, 4));
        for i in 0..4 {
            m[[i, i]] = Complex64::new(1.0 + i as f64, 0.0);
        }
        m[[0, 1]] = Complex64::new(0.3, 0.2);
        m[[1, 0]] = Complex64::new(0.3, -0.2);
        let ff = FarfieldMatrix::new(1.0, d.clone(), d, m.clone()).unwrap();
        let bf = BackgroundFarfield {
            farfield: ff,
            descriptor: "hermitian".into(),
        };
        let t = sharp_operator(&bf).unwrap();
        let expect = m.mapv(|z| 2.0 * z);
        let err = (&t.matrix - &expect)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn sharp_operator_is_psd_for_zim_disk() {
        let disk = Shape::disk(0.0, 0.0, 1.0).unwrap();
        let d = dirs(24);
        let series = zim_disk_farfield(&disk, 2.0, &d, &d).unwrap();
        let bf = BackgroundFarfield {
            farfield: series,
            descriptor: "zim series".into(),
        };
        let t = sharp_operator(&bf).unwrap();
        // hermitian_eig rejects matrices that are not Hermitian to 1e-10
        let (vals, _) = hermitian_eig(&t.matrix).unwrap();
        let norm = vals.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        for &v in vals.iter() {
            assert!(v >= -1e-10 * norm, "eigenvalue {v} below PSD floor");
        }
    }

    #[test]
    fn sharp_dominates_each_part() {
        // T~# - |H_i| is PSD for both Hermitian parts
        let disk = Shape::disk(0.0, 0.0, 1.0).unwrap();
        let d = dirs(16);
        let series = zim_disk_farfield(&disk, 1.7, &d, &d).unwrap();
        let m = series.entries.clone();
        let adj = conj_transpose(&m);
        let h1 = &m + &adj;
        let h2 = (&adj - &m).mapv(|z| Complex64::new(0.0, 1.0) * z);
        let bf = BackgroundFarfield {
            farfield: series,
            descriptor: "zim".into(),
        };
        let t = sharp_operator(&bf).unwrap();
        for h in [h1, h2] {
            let part = operator_abs(&h).unwrap();
            let diff = &t.matrix - &part;
            let (vals, _) = hermitian_eig(&diff).unwrap();
            let norm = t.spectral_norm().unwrap();
            assert!(vals.iter().all(|&v| v >= -1e-9 * norm));
        }
    }
}
