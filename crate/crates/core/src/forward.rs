//! Farfield synthesis by the Lippmann-Schwinger volume integral method.
//!
//! The scattered field of `Delta u + k^2 n u = 0` obeys
//! `u(x) = u_i(x) + k^2 int Phi_k(x, y) (n - 1) u(y) dy`, which is collocated
//! at cell centers with the midpoint rule; the singular self-cell uses the
//! closed-form integral of `(i/4) H_0^{(1)}` over the equal-area disk.

use crate::error::{CoreError, Result};
use crate::geometry::{
    BackgroundSpec, BoundingBox, DirectionGrid, FarfieldConvention, MediumSpec, Point,
};
use crate::linalg::{CMat, CVec, CluFactor};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Cells-per-interior-wavelength floor below which a grid is flagged.
const RESOLUTION_RULE: f64 = 10.0;

/// Collocation grid over the contrast support: only cells with nonzero
/// contrast are kept as unknowns.
#[derive(Debug, Clone)]
pub struct VolumeGrid {
    h: f64,
    centers: Vec<Point>,
    contrast: Vec<f64>,
    bbox: BoundingBox,
    under_resolved: bool,
}

impl VolumeGrid {
    /// Grid for the data medium (contrast `n - 1`).
    pub fn for_medium(medium: &MediumSpec, h: f64, k: f64) -> Result<VolumeGrid> {
        let bbox = medium.support_box();
        Self::from_contrast(bbox, h, k, medium.max_value(), |p| medium.value_at(p) - 1.0)
    }

    /// Grid for a penetrable artificial background (contrast `rho - 1`).
    pub fn for_background(bg: &BackgroundSpec, h: f64, k: f64) -> Result<VolumeGrid> {
        match bg {
            BackgroundSpec::Zim { omega_b } => {
                let bbox = Some(omega_b.bounding_box());
                Self::from_contrast(bbox, h, k, 1.0, |p| bg.rho_at(p) - 1.0)
            }
            BackgroundSpec::GeneralRho { pieces } => {
                let bbox = pieces
                    .iter()
                    .map(|(s, _)| s.bounding_box())
                    .reduce(|a, b| a.union(&b));
                let rho_max = pieces.iter().map(|&(_, r)| r.abs()).fold(1.0, f64::max);
                Self::from_contrast(bbox, h, k, rho_max, |p| bg.rho_at(p) - 1.0)
            }
            BackgroundSpec::Obstacle { .. } => Err(CoreError::UnsupportedShape(
                "obstacle backgrounds have no volume contrast; use the series solver".into(),
            )),
        }
    }

    /// Grid anchored at an explicit bounding box; shared boxes give F and
    /// F~ identical lattices so the subtraction bias partially cancels.
    pub fn from_contrast(
        bbox: Option<BoundingBox>,
        h: f64,
        k: f64,
        index_max: f64,
        contrast_at: impl Fn(Point) -> f64,
    ) -> Result<VolumeGrid> {
        if !(h > 0.0) {
            return Err(CoreError::invalid(format!("cell size must be positive, got {h}")));
        }
        if !(k > 0.0) {
            return Err(CoreError::invalid(format!("wavenumber must be positive, got {k}")));
        }
        let bbox = bbox.unwrap_or(BoundingBox {
            x_min: 0.0,
            x_max: 0.0,
            y_min: 0.0,
            y_max: 0.0,
        });
        let nx = (((bbox.x_max - bbox.x_min) / h).ceil() as usize).max(0);
        let ny = (((bbox.y_max - bbox.y_min) / h).ceil() as usize).max(0);
        let mut centers = Vec::new();
        let mut contrast = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let p = Point::new(
                    bbox.x_min + (i as f64 + 0.5) * h,
                    bbox.y_min + (j as f64 + 0.5) * h,
                );
                let m = contrast_at(p);
                if m != 0.0 {
                    centers.push(p);
                    contrast.push(m);
                }
            }
        }
        let wavelength_interior = 2.0 * PI / (k * index_max.sqrt().max(1.0));
        let under_resolved = h > wavelength_interior / RESOLUTION_RULE;
        Ok(VolumeGrid {
            h,
            centers,
            contrast,
            bbox,
            under_resolved,
        })
    }

    pub fn cell_size(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn contrast(&self) -> &[f64] {
        &self.contrast
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    /// True if the cell size violates the ten-cells-per-interior-wavelength
    /// rule (recorded, not fatal).
    pub fn under_resolved(&self) -> bool {
        self.under_resolved
    }
}

/// `int_{|y| < R} (i/4) H_0(k |y|) dy` with `pi R^2 = h^2`.
fn self_cell_integral(k: f64, h: f64) -> Complex64 {
    let r = h / PI.sqrt();
    let h1 = crate::special::hankel1(1, k * r).expect("kR > 0");
    Complex64::new(0.0, PI / 2.0) * (r / k) * h1 - Complex64::new(1.0 / (k * k), 0.0)
}

/// Collocation matrix `I - k^2 V diag(m)` of the discrete LS equation.
pub fn assemble_ls_matrix(grid: &VolumeGrid, k: f64) -> CMat {
    let n = grid.len();
    let h2 = grid.h * grid.h;
    let quarter_i = Complex64::new(0.0, 0.25);
    let self_term = self_cell_integral(k, grid.h);
    let k2 = k * k;
    let mut a = CMat::zeros((n, n));
    for j in 0..n {
        let yj = grid.centers[j];
        for l in 0..n {
            let v = if j == l {
                self_term
            } else {
                let d = yj.dist(grid.centers[l]);
                quarter_i * crate::special::hankel1(0, k * d).expect("distinct centers") * h2
            };
            a[[j, l]] = -k2 * v * grid.contrast[l];
        }
        a[[j, j]] += Complex64::new(1.0, 0.0);
    }
    a
}

/// Total field at the grid cells for one incident plane wave.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub k: f64,
    pub u: CVec,
}

/// Factorized LS operator for one `(grid, k)` pair, reused across all
/// incident directions.
pub struct LsOperator<'g> {
    grid: &'g VolumeGrid,
    k: f64,
    factor: Option<CluFactor>,
}

impl<'g> LsOperator<'g> {
    pub fn new(grid: &'g VolumeGrid, k: f64) -> Result<LsOperator<'g>> {
        let factor = if grid.is_empty() {
            None
        } else {
            let a = assemble_ls_matrix(grid, k);
            Some(CluFactor::new(&a).map_err(|e| match e {
                CoreError::SingularMatrix(_) => {
                    CoreError::SingularMatrix("Lippmann-Schwinger system".into())
                }
                other => other,
            })?)
        };
        Ok(LsOperator { grid, k, factor })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn grid(&self) -> &VolumeGrid {
        self.grid
    }

    /// Solve for the total field under the plane wave `e^{ik theta . y}`.
    pub fn solve_plane_wave(&self, theta: Point) -> Result<FieldSolution> {
        let ui = CVec::from_iter(self.grid.centers.iter().map(|y| {
            Complex64::from_polar(1.0, self.k * theta.dot(*y))
        }));
        self.solve_incident(&ui)
    }

    /// Solve for the total field under an arbitrary incident field sampled
    /// at the cell centers.
    pub fn solve_incident(&self, ui: &CVec) -> Result<FieldSolution> {
        let u = match &self.factor {
            None => ui.clone(),
            Some(f) => f.solve_vec(ui)?,
        };
        Ok(FieldSolution { k: self.k, u })
    }
}

/// Farfield pattern of a computed total field on an observation grid:
/// `u_inf(theta_s) = gamma_ff k^2 sum_j e^{-ik theta_s . y_j} m_j u_j h^2`.
pub fn farfield_from_field(grid: &VolumeGrid, sol: &FieldSolution, obs: &DirectionGrid) -> CVec {
    let gamma = FarfieldConvention::gamma_ff(sol.k);
    let k2h2 = sol.k * sol.k * grid.h * grid.h;
    CVec::from_iter((0..obs.len()).map(|s| {
        let theta = obs.unit(s);
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, y) in grid.centers.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -sol.k * theta.dot(*y));
            acc += phase * grid.contrast[j] * sol.u[j];
        }
        gamma * k2h2 * acc
    }))
}

/// Sampled farfield operator at one wavenumber: `entries[[s, i]]` is
/// `u_s_inf(theta_s, theta_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarfieldMatrix {
    pub k: f64,
    pub incident: DirectionGrid,
    pub observation: DirectionGrid,
    pub entries: CMat,
    pub convention: String,
}

impl FarfieldMatrix {
    pub fn new(
        k: f64,
        incident: DirectionGrid,
        observation: DirectionGrid,
        entries: CMat,
    ) -> Result<FarfieldMatrix> {
        if entries.dim() != (observation.len(), incident.len()) {
            return Err(CoreError::invalid(format!(
                "farfield entries are {:?}, expected ({}, {})",
                entries.dim(),
                observation.len(),
                incident.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CoreError::invalid("farfield entries must be finite"));
        }
        Ok(FarfieldMatrix {
            k,
            incident,
            observation,
            entries,
            convention: FarfieldConvention::TAG.to_string(),
        })
    }

    pub fn max_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Check k, grids and convention agree with `other`.
    pub fn compatible_with(&self, other: &FarfieldMatrix) -> Result<()> {
        if self.k != other.k {
            return Err(CoreError::IncompatibleOperands(format!(
                "wavenumbers differ: {} vs {}",
                self.k, other.k
            )));
        }
        if self.incident != other.incident || self.observation != other.observation {
            return Err(CoreError::IncompatibleOperands(
                "direction grids differ".into(),
            ));
        }
        if self.convention != other.convention {
            return Err(CoreError::IncompatibleOperands(format!(
                "conventions differ: {} vs {}",
                self.convention, other.convention
            )));
        }
        Ok(())
    }
}

/// Full farfield matrix for a medium: one assembly and one factorization,
/// one solve per incident direction.
pub fn farfield_matrix(
    medium: &MediumSpec,
    k: f64,
    incident: &DirectionGrid,
    observation: &DirectionGrid,
    h: f64,
) -> Result<FarfieldMatrix> {
    let grid = VolumeGrid::for_medium(medium, h, k)?;
    farfield_matrix_on_grid(&grid, k, incident, observation)
}

/// Same, on a caller-provided grid (used by the background solver).
pub fn farfield_matrix_on_grid(
    grid: &VolumeGrid,
    k: f64,
    incident: &DirectionGrid,
    observation: &DirectionGrid,
) -> Result<FarfieldMatrix> {
    let op = LsOperator::new(grid, k)?;
    let mut entries = CMat::zeros((observation.len(), incident.len()));
    for i in 0..incident.len() {
        let sol = op.solve_plane_wave(incident.unit(i))?;
        let col = farfield_from_field(grid, &sol, observation);
        entries.column_mut(i).assign(&col);
    }
    FarfieldMatrix::new(k, incident.clone(), observation.clone(), entries)
}

/// Herglotz wave function `u_i(g)(x) = (2 pi / N) sum_i g_i e^{ik theta_i . x}`.
pub fn herglotz_field(g: &CVec, directions: &DirectionGrid, k: f64, points: &[Point]) -> CVec {
    assert_eq!(g.len(), directions.len());
    let w = directions.weight();
    CVec::from_iter(points.iter().map(|x| {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..directions.len() {
            acc += g[i] * Complex64::from_polar(1.0, k * directions.unit(i).dot(*x));
        }
        acc * w
    }))
}
