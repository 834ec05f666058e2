//! Two-dimensional inverse-scattering workbench.
//!
//! The crate synthesizes farfield data for a penetrable inclusion, forms the
//! artificial-background farfield operator `F_art = F - F~`, evaluates the
//! GLSM indicator curve whose peaks sit at transmission eigenvalues of the
//! modified background, and recovers the refractive index from those peaks
//! via reference spectra.

pub mod background;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod glsm;
pub mod linalg;
pub mod series;
pub mod special;
pub mod spectra;

pub use error::{CoreError, Result};
pub use geometry::{
    BackgroundSpec, BoundaryCondition, DirectionGrid, FarfieldConvention, MediumSpec, Point,
    SamplingGrid, Shape,
};
