//! Per-azimuthal-mode radial solvers: Poisson and Helmholtz problems, the
//! doubly-connected streamfunction determination with its influence-matrix
//! wall closure, steady Stokes, and pressure recovery.

pub mod mode_op;
pub mod pressure;
pub mod stream;

pub use mode_op::{mode_matrix, BoundaryRow, EllipticSolvers};
pub use pressure::{recover_pressure, stokes_solve, PressureOptions, PressureRecovery, StokesSolution};
pub use stream::{
    implicit_vorticity_mode, paper_mixed_influence, slip_phi, streamfunction,
    streamfunction_with_closure, BcSet, CirculationClosure, InfluenceMatrix, StreamSolution,
};
