//! Variational Rayleigh-Taylor machinery: the quadratic forms J, E1, E2 on
//! the constrained space, the parametrized infimum alpha(s), the fixed point
//! s*^2 = -alpha(s*) defining the growth rate, and eigenmode extraction.

pub mod forms;
pub mod solve;

pub use forms::{
    assemble_forms, assemble_forms_coupled, functionals_by_quadrature, is_axisymmetric, FormSet,
    ModeKey,
};
pub use solve::{
    alpha_of_s, default_bracket, eigenmode, full_spectrum_check, growth_rate, upper_bound_line,
    EigenMode, FixedPoint, ModeResult, StabilityResult,
};
