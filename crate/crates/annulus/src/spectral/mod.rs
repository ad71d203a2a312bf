//! Annulus discretization, fields, transforms, polar differential operators,
//! quadrature and norms.

pub mod field;
pub mod grid;
pub mod norms;
pub mod ops;
pub mod snapshot;

pub use field::{ScalarField, VectorField};
pub use grid::AnnulusGrid;
pub use norms::Wall;
