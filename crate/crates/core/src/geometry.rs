//! Geometry, direction grids, media and background descriptors.
//!
//! Everything here is immutable after construction and shared freely across
//! parallel workers.

use crate::error::{CoreError, Result};
use std::f64::consts::PI;

/// Point in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min.min(other.x_min),
            x_max: self.x_max.max(other.x_max),
            y_min: self.y_min.min(other.y_min),
            y_max: self.y_max.max(other.y_max),
        }
    }
}

/// Number of boundary samples used for the kite point-in-polygon test.
const KITE_POLY_SAMPLES: usize = 512;

/// Supported inclusion / background geometries.
///
/// The kite boundary is the benchmark curve
/// `t -> center + scale * (cos t + 0.65 cos 2t - 0.65, 1.5 sin t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disk { center: Point, radius: f64 },
    Kite { center: Point, scale: f64 },
    Union(Vec<Shape>),
}

impl Shape {
    pub fn disk(cx: f64, cy: f64, radius: f64) -> Result<Shape> {
        if !(radius > 0.0) {
            return Err(CoreError::invalid(format!(
                "disk radius must be positive, got {radius}"
            )));
        }
        Ok(Shape::Disk {
            center: Point::new(cx, cy),
            radius,
        })
    }

    pub fn kite(cx: f64, cy: f64, scale: f64) -> Result<Shape> {
        if !(scale > 0.0) {
            return Err(CoreError::invalid(format!(
                "kite scale must be positive, got {scale}"
            )));
        }
        Ok(Shape::Kite {
            center: Point::new(cx, cy),
            scale,
        })
    }

    /// Point on the kite boundary at parameter `t` in `[0, 2pi)`.
    pub fn kite_boundary(center: Point, scale: f64, t: f64) -> Point {
        Point::new(
            center.x + scale * (t.cos() + 0.65 * (2.0 * t).cos() - 0.65),
            center.y + scale * 1.5 * t.sin(),
        )
    }

    /// True iff `p` is strictly inside the shape.
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Disk { center, radius } => center.dist(p) < *radius,
            Shape::Kite { center, scale } => {
                // even-odd ray casting on the sampled boundary polygon
                let mut inside = false;
                let mut prev = Shape::kite_boundary(*center, *scale, 0.0);
                for i in 1..=KITE_POLY_SAMPLES {
                    let t = 2.0 * PI * i as f64 / KITE_POLY_SAMPLES as f64;
                    let cur = Shape::kite_boundary(*center, *scale, t);
                    if (prev.y > p.y) != (cur.y > p.y) {
                        let x_cross = prev.x + (p.y - prev.y) / (cur.y - prev.y) * (cur.x - prev.x);
                        if p.x < x_cross {
                            inside = !inside;
                        }
                    }
                    prev = cur;
                }
                inside
            }
            Shape::Union(parts) => parts.iter().any(|s| s.contains(p)),
        }
    }

    pub fn bounding_box(&self) -> BoundingBox {
        match self {
            Shape::Disk { center, radius } => BoundingBox {
                x_min: center.x - radius,
                x_max: center.x + radius,
                y_min: center.y - radius,
                y_max: center.y + radius,
            },
            Shape::Kite { center, scale } => {
                let mut bb = BoundingBox {
                    x_min: f64::INFINITY,
                    x_max: f64::NEG_INFINITY,
                    y_min: f64::INFINITY,
                    y_max: f64::NEG_INFINITY,
                };
                for i in 0..KITE_POLY_SAMPLES {
                    let t = 2.0 * PI * i as f64 / KITE_POLY_SAMPLES as f64;
                    let q = Shape::kite_boundary(*center, *scale, t);
                    bb.x_min = bb.x_min.min(q.x);
                    bb.x_max = bb.x_max.max(q.x);
                    bb.y_min = bb.y_min.min(q.y);
                    bb.y_max = bb.y_max.max(q.y);
                }
                bb
            }
            Shape::Union(parts) => {
                let mut iter = parts.iter();
                let first = iter
                    .next()
                    .expect("union shape must not be empty")
                    .bounding_box();
                iter.fold(first, |bb, s| bb.union(&s.bounding_box()))
            }
        }
    }
}

/// Refractive index field: list of `(shape, n)` pieces, `n = 1` outside.
///
/// Where pieces overlap the first matching piece wins.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumSpec {
    pieces: Vec<(Shape, f64)>,
}

impl MediumSpec {
    pub fn new(pieces: Vec<(Shape, f64)>) -> Result<MediumSpec> {
        for (_, n) in &pieces {
            if !(*n > 0.0) {
                return Err(CoreError::invalid(format!(
                    "refractive index must be positive, got {n}"
                )));
            }
        }
        Ok(MediumSpec { pieces })
    }

    /// Homogeneous exterior: `n = 1` everywhere.
    pub fn free_space() -> MediumSpec {
        MediumSpec { pieces: Vec::new() }
    }

    pub fn constant(shape: Shape, n: f64) -> Result<MediumSpec> {
        MediumSpec::new(vec![(shape, n)])
    }

    pub fn pieces(&self) -> &[(Shape, f64)] {
        &self.pieces
    }

    pub fn value_at(&self, p: Point) -> f64 {
        for (shape, n) in &self.pieces {
            if shape.contains(p) {
                return *n;
            }
        }
        1.0
    }

    /// Bounding box of the union of pieces, or `None` for free space.
    pub fn support_box(&self) -> Option<BoundingBox> {
        let mut it = self.pieces.iter();
        let first = it.next()?.0.bounding_box();
        Some(it.fold(first, |bb, (s, _)| bb.union(&s.bounding_box())))
    }

    pub fn max_value(&self) -> f64 {
        self.pieces.iter().map(|&(_, n)| n).fold(1.0, f64::max)
    }
}

/// Boundary condition for a non-penetrable obstacle background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    Dirichlet,
    /// `B(u) = du/dnu + gamma u` with outward normal.
    Robin { gamma: f64 },
}

/// Artificial background descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum BackgroundSpec {
    /// Zero-Index Material: `rho = 0` in `omega_b`, `rho = 1` outside.
    Zim { omega_b: Shape },
    /// Non-penetrable obstacle; only disks are accepted (series solver).
    Obstacle {
        omega_b: Shape,
        bc: BoundaryCondition,
    },
    /// Arbitrary piecewise-constant `rho`, `rho = 1` outside the pieces.
    GeneralRho { pieces: Vec<(Shape, f64)> },
}

impl BackgroundSpec {
    pub fn zim(omega_b: Shape) -> BackgroundSpec {
        BackgroundSpec::Zim { omega_b }
    }

    pub fn obstacle(omega_b: Shape, bc: BoundaryCondition) -> Result<BackgroundSpec> {
        match omega_b {
            Shape::Disk { .. } => Ok(BackgroundSpec::Obstacle { omega_b, bc }),
            _ => Err(CoreError::UnsupportedShape(
                "obstacle backgrounds require a disk-shaped omega_b".into(),
            )),
        }
    }

    /// `rho` value at a point; meaningless for obstacle backgrounds.
    pub fn rho_at(&self, p: Point) -> f64 {
        match self {
            BackgroundSpec::Zim { omega_b } => {
                if omega_b.contains(p) {
                    0.0
                } else {
                    1.0
                }
            }
            BackgroundSpec::GeneralRho { pieces } => {
                for (shape, rho) in pieces {
                    if shape.contains(p) {
                        return *rho;
                    }
                }
                1.0
            }
            BackgroundSpec::Obstacle { .. } => 1.0,
        }
    }

    pub fn descriptor(&self) -> String {
        fn shape_str(s: &Shape) -> String {
            match s {
                Shape::Disk { center, radius } => {
                    format!("disk {} {} {}", center.x, center.y, radius)
                }
                Shape::Kite { center, scale } => {
                    format!("kite {} {} {}", center.x, center.y, scale)
                }
                Shape::Union(parts) => {
                    let inner: Vec<String> = parts.iter().map(shape_str).collect();
                    format!("union[{}]", inner.join("; "))
                }
            }
        }
        match self {
            BackgroundSpec::Zim { omega_b } => format!("zim {}", shape_str(omega_b)),
            BackgroundSpec::Obstacle { omega_b, bc } => {
                let bc_str = match bc {
                    BoundaryCondition::Dirichlet => "dirichlet".to_string(),
                    BoundaryCondition::Robin { gamma } => format!("robin {gamma}"),
                };
                format!("obstacle {} {}", shape_str(omega_b), bc_str)
            }
            BackgroundSpec::GeneralRho { pieces } => {
                let inner: Vec<String> = pieces
                    .iter()
                    .map(|(s, r)| format!("{} rho={}", shape_str(s), r))
                    .collect();
                format!("rho[{}]", inner.join("; "))
            }
        }
    }
}

/// Uniform grid of directions on the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    count: usize,
}

impl DirectionGrid {
    pub fn new(count: usize) -> Result<DirectionGrid> {
        if count < 2 {
            return Err(CoreError::invalid(format!(
                "direction grid needs at least 2 directions, got {count}"
            )));
        }
        Ok(DirectionGrid { count })
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.count as f64
    }

    pub fn angles(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|j| self.angle(j))
    }

    /// Unit vector of direction `j`.
    pub fn unit(&self, j: usize) -> Point {
        let a = self.angle(j);
        Point::new(a.cos(), a.sin())
    }

    /// Quadrature weight per node for integrals over the unit circle.
    pub fn weight(&self) -> f64 {
        2.0 * PI / self.count as f64
    }
}

/// Global farfield normalization for `d = 2`:
/// `u_s(x) = e^{ikr} r^{-1/2} (u_inf(theta_s) + O(1/r))`, with the point-source
/// farfield constant `gamma_ff = e^{i pi/4} / sqrt(8 pi k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FarfieldConvention;

impl FarfieldConvention {
    pub const TAG: &'static str = "2d-halfpower-eipi4";

    pub fn gamma_ff(k: f64) -> num_complex::Complex64 {
        num_complex::Complex64::from_polar(1.0 / (8.0 * PI * k).sqrt(), PI / 4.0)
    }
}

/// Lattice of sampling points clipped to a shape, with cell area `h^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    points: Vec<Point>,
    cell_area: f64,
}

impl SamplingGrid {
    /// Cell-centered lattice of step `h` over the bounding box of `omega0`,
    /// keeping only strictly interior points.
    pub fn from_shape(omega0: &Shape, h: f64) -> Result<SamplingGrid> {
        if !(h > 0.0) {
            return Err(CoreError::invalid(format!(
                "sampling spacing must be positive, got {h}"
            )));
        }
        let bb = omega0.bounding_box();
        let nx = ((bb.x_max - bb.x_min) / h).ceil() as usize;
        let ny = ((bb.y_max - bb.y_min) / h).ceil() as usize;
        let mut points = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let p = Point::new(
                    bb.x_min + (i as f64 + 0.5) * h,
                    bb.y_min + (j as f64 + 0.5) * h,
                );
                if omega0.contains(p) {
                    points.push(p);
                }
            }
        }
        if points.is_empty() {
            return Err(CoreError::invalid(
                "sampling grid is empty: spacing too coarse for the shape".to_string(),
            ));
        }
        Ok(SamplingGrid {
            points,
            cell_area: h * h,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }
}
