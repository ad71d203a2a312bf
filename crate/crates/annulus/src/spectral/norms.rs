//! Quadrature, inner products and the norms used by the energy estimates.

use crate::error::{Error, Result};

use super::field::{ScalarField, VectorField};
use super::ops::{dx, dy, gradient, velocity_gradient_components};

/// Area integral with the Jacobian folded into the weights.
pub fn integrate(s: &ScalarField) -> f64 {
    s.values.iter().zip(s.grid.w_area.iter()).map(|(v, w)| v * w).sum()
}

/// L2 inner product of scalars.
pub fn inner(x: &ScalarField, y: &ScalarField) -> f64 {
    assert_eq!(*x.grid, *y.grid, "grid mismatch");
    x.values
        .iter()
        .zip(y.values.iter())
        .zip(x.grid.w_area.iter())
        .map(|((a, b), w)| a * b * w)
        .sum()
}

/// L2 inner product of vector fields.
pub fn inner_vec(x: &VectorField, y: &VectorField) -> f64 {
    inner(&x.u_r, &y.u_r) + inner(&x.u_theta, &y.u_theta)
}

pub fn l2_norm_sq(s: &ScalarField) -> f64 {
    inner(s, s)
}

pub fn l2_norm(s: &ScalarField) -> f64 {
    l2_norm_sq(s).max(0.0).sqrt()
}

pub fn l2_norm_sq_vec(v: &VectorField) -> f64 {
    l2_norm_sq(&v.u_r) + l2_norm_sq(&v.u_theta)
}

pub fn l2_norm_vec(v: &VectorField) -> f64 {
    l2_norm_sq_vec(v).max(0.0).sqrt()
}

/// L^q norm, 1 <= q < infinity; accuracy is quadrature-limited for non-even q.
pub fn lq_norm(s: &ScalarField, q: f64) -> Result<f64> {
    if q < 1.0 {
        return Err(Error::Arg(format!("Lq norm requires q >= 1, got {q}")));
    }
    let total: f64 = s
        .values
        .iter()
        .zip(s.grid.w_area.iter())
        .map(|(v, w)| v.abs().powf(q) * w)
        .sum();
    Ok(total.powf(1.0 / q))
}

pub fn linf_norm(s: &ScalarField) -> f64 {
    s.max_abs()
}

/// |grad s|^2 integrated.
pub fn grad_norm_sq(s: &ScalarField) -> f64 {
    l2_norm_sq_vec(&gradient(s))
}

pub fn h1_norm(s: &ScalarField) -> f64 {
    (l2_norm_sq(s) + grad_norm_sq(s)).sqrt()
}

/// |grad v|^2 integrated, polar frame with curvature terms.
pub fn grad_norm_sq_vec(v: &VectorField) -> f64 {
    let (g_rr, g_rt, g_tr, g_tt) = velocity_gradient_components(v);
    l2_norm_sq(&g_rr) + l2_norm_sq(&g_rt) + l2_norm_sq(&g_tr) + l2_norm_sq(&g_tt)
}

pub fn h1_norm_vec(v: &VectorField) -> f64 {
    (l2_norm_sq_vec(v) + grad_norm_sq_vec(v)).sqrt()
}

/// ||grad^2 v||^2 via Cartesian components; used by the regularity flags and
/// the Stokes estimate check.
pub fn hessian_norm_sq_vec(v: &VectorField) -> f64 {
    let (ux, uy) = v.cartesian();
    let mut total = 0.0;
    for comp in [ux, uy] {
        let cx = dx(&comp);
        let cy = dy(&comp);
        total += l2_norm_sq(&dx(&cx));
        total += l2_norm_sq(&dy(&cx));
        total += l2_norm_sq(&dx(&cy));
        total += l2_norm_sq(&dy(&cy));
    }
    total
}

pub fn h2_norm_vec(v: &VectorField) -> f64 {
    (l2_norm_sq_vec(v) + grad_norm_sq_vec(v) + hessian_norm_sq_vec(v)).sqrt()
}

/// Azimuthal mean of each ring.
pub fn theta_mean(s: &ScalarField) -> Vec<f64> {
    let g = &s.grid;
    (0..g.nr)
        .map(|j| s.ring(j).iter().sum::<f64>() / g.ntheta as f64)
        .collect()
}

/// Boundary wall selector for boundary integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wall {
    Inner,
    Outer,
}

/// Integral of `f(theta_k) * data_k` over the selected circle.
pub fn boundary_integral(s: &ScalarField, wall: Wall, weight: impl Fn(usize) -> f64) -> f64 {
    let g = &s.grid;
    let (j, w) = match wall {
        Wall::Inner => (0, &g.w_bnd_a),
        Wall::Outer => (g.nr - 1, &g.w_bnd_b),
    };
    (0..g.ntheta).map(|k| weight(k) * s.at(j, k) * w[k]).sum()
}

/// Squared L2 boundary norm of the tangential velocity on the selected wall.
pub fn boundary_tangential_sq(v: &VectorField, wall: Wall) -> f64 {
    let sq = v.u_theta.mul(&v.u_theta);
    boundary_integral(&sq, wall, |_| 1.0)
}
