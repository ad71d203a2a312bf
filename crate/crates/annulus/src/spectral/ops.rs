//! Polar differential operators built from the radial differentiation matrix
//! and the azimuthal spectral derivative.

use num_complex::Complex64;

use super::field::{ScalarField, VectorField};

/// d/dr along each theta column.
pub fn dr(s: &ScalarField) -> ScalarField {
    let g = &s.grid;
    let mut out = ScalarField::zeros(g);
    for i in 0..g.nr {
        for j in 0..g.nr {
            let d = g.dmat[(i, j)];
            if d != 0.0 {
                let row = s.ring(j);
                let dst = i * g.ntheta;
                for k in 0..g.ntheta {
                    out.values[dst + k] += d * row[k];
                }
            }
        }
    }
    out
}

/// d/dtheta via the half spectrum; the Nyquist mode derivative is set to zero.
pub fn dtheta(s: &ScalarField) -> ScalarField {
    let g = &s.grid;
    let nm = g.nmodes();
    let mut c = s.coeffs();
    for j in 0..g.nr {
        for m in 0..nm {
            let im = Complex64::new(0.0, m as f64);
            c[j * nm + m] *= im;
        }
        c[j * nm + nm - 1] = Complex64::ZERO;
    }
    ScalarField::from_coeffs(g, &c)
}

/// Gradient in polar components: (d_r s, (1/r) d_theta s).
pub fn gradient(s: &ScalarField) -> VectorField {
    let g = &s.grid;
    let sr = dr(s);
    let mut st = dtheta(s);
    for j in 0..g.nr {
        let inv_r = 1.0 / g.r_nodes[j];
        for k in 0..g.ntheta {
            *st.at_mut(j, k) *= inv_r;
        }
    }
    VectorField::new(sr, st)
}

/// omega = (1/r) [d_r (r u_theta) - d_theta u_r].
pub fn vorticity(v: &VectorField) -> ScalarField {
    let g = v.grid();
    let mut r_ut = v.u_theta.clone();
    for j in 0..g.nr {
        let r = g.r_nodes[j];
        for k in 0..g.ntheta {
            *r_ut.at_mut(j, k) *= r;
        }
    }
    let d_rut = dr(&r_ut);
    let d_ur = dtheta(&v.u_r);
    let mut out = ScalarField::zeros(g);
    for j in 0..g.nr {
        let inv_r = 1.0 / g.r_nodes[j];
        for k in 0..g.ntheta {
            *out.at_mut(j, k) = inv_r * (d_rut.at(j, k) - d_ur.at(j, k));
        }
    }
    out
}

/// div u = (1/r) d_r (r u_r) + (1/r) d_theta u_theta.
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid();
    let mut r_ur = v.u_r.clone();
    for j in 0..g.nr {
        let r = g.r_nodes[j];
        for k in 0..g.ntheta {
            *r_ur.at_mut(j, k) *= r;
        }
    }
    let d_rur = dr(&r_ur);
    let d_ut = dtheta(&v.u_theta);
    let mut out = ScalarField::zeros(g);
    for j in 0..g.nr {
        let inv_r = 1.0 / g.r_nodes[j];
        for k in 0..g.ntheta {
            *out.at_mut(j, k) = inv_r * (d_rur.at(j, k) + d_ut.at(j, k));
        }
    }
    out
}

/// Scalar Laplacian d_rr + (1/r) d_r + (1/r^2) d_thth.
pub fn laplacian(s: &ScalarField) -> ScalarField {
    let g = &s.grid;
    let s_r = dr(s);
    let s_rr = dr(&s_r);
    let s_tt = dtheta(&dtheta(s));
    let mut out = ScalarField::zeros(g);
    for j in 0..g.nr {
        let r = g.r_nodes[j];
        for k in 0..g.ntheta {
            *out.at_mut(j, k) = s_rr.at(j, k) + s_r.at(j, k) / r + s_tt.at(j, k) / (r * r);
        }
    }
    out
}

/// Vector Laplacian in polar components:
/// (Delta v)_r = Delta v_r - v_r / r^2 - (2/r^2) d_theta v_theta,
/// (Delta v)_theta = Delta v_theta - v_theta / r^2 + (2/r^2) d_theta v_r.
pub fn vector_laplacian(v: &VectorField) -> VectorField {
    let g = v.grid();
    let lap_r = laplacian(&v.u_r);
    let lap_t = laplacian(&v.u_theta);
    let dt_r = dtheta(&v.u_r);
    let dt_t = dtheta(&v.u_theta);
    let mut out_r = ScalarField::zeros(g);
    let mut out_t = ScalarField::zeros(g);
    for j in 0..g.nr {
        let r2 = g.r_nodes[j] * g.r_nodes[j];
        for k in 0..g.ntheta {
            *out_r.at_mut(j, k) = lap_r.at(j, k) - v.u_r.at(j, k) / r2 - 2.0 * dt_t.at(j, k) / r2;
            *out_t.at_mut(j, k) = lap_t.at(j, k) - v.u_theta.at(j, k) / r2 + 2.0 * dt_r.at(j, k) / r2;
        }
    }
    VectorField::new(out_r, out_t)
}

/// Cartesian d/dx = cos t d_r - (sin t / r) d_theta.
pub fn dx(s: &ScalarField) -> ScalarField {
    let g = &s.grid;
    let sr = dr(s);
    let st = dtheta(s);
    let mut out = ScalarField::zeros(g);
    for j in 0..g.nr {
        let r = g.r_nodes[j];
        for k in 0..g.ntheta {
            let (sin_t, cos_t) = g.theta_nodes[k].sin_cos();
            *out.at_mut(j, k) = cos_t * sr.at(j, k) - sin_t / r * st.at(j, k);
        }
    }
    out
}

/// Cartesian d/dy = sin t d_r + (cos t / r) d_theta.
pub fn dy(s: &ScalarField) -> ScalarField {
    let g = &s.grid;
    let sr = dr(s);
    let st = dtheta(s);
    let mut out = ScalarField::zeros(g);
    for j in 0..g.nr {
        let r = g.r_nodes[j];
        for k in 0..g.ntheta {
            let (sin_t, cos_t) = g.theta_nodes[k].sin_cos();
            *out.at_mut(j, k) = sin_t * sr.at(j, k) + cos_t / r * st.at(j, k);
        }
    }
    out
}

/// Pointwise product with the 2/3-rule mask applied to both factors and to
/// the result. Radial direction is collocated and left un-dealiased.
pub fn dealiased_product(x: &ScalarField, y: &ScalarField) -> ScalarField {
    x.dealias().mul(&y.dealias()).dealias()
}

/// u . grad s with dealiased products.
pub fn advect(u: &VectorField, s: &ScalarField) -> ScalarField {
    let grad = gradient(s);
    dealiased_product(&u.u_r, &grad.u_r).add(&dealiased_product(&u.u_theta, &grad.u_theta))
}

/// The four components of grad v in the polar orthonormal frame:
/// (d_r v_r, d_r v_t, (d_t v_r - v_t)/r, (d_t v_t + v_r)/r).
/// Their squared sum equals |grad v|^2 in Cartesian coordinates.
pub fn velocity_gradient_components(
    v: &VectorField,
) -> (ScalarField, ScalarField, ScalarField, ScalarField) {
    let g = v.grid();
    let g_rr = dr(&v.u_r);
    let g_rt = dr(&v.u_theta);
    let dt_r = dtheta(&v.u_r);
    let dt_t = dtheta(&v.u_theta);
    let mut g_tr = ScalarField::zeros(g);
    let mut g_tt = ScalarField::zeros(g);
    for j in 0..g.nr {
        let inv_r = 1.0 / g.r_nodes[j];
        for k in 0..g.ntheta {
            *g_tr.at_mut(j, k) = inv_r * (dt_r.at(j, k) - v.u_theta.at(j, k));
            *g_tt.at_mut(j, k) = inv_r * (dt_t.at(j, k) + v.u_r.at(j, k));
        }
    }
    (g_rr, g_rt, g_tr, g_tt)
}

/// (u . grad) u in polar components, with curvature terms.
pub fn advect_velocity(u: &VectorField) -> VectorField {
    let g = u.grid();
    let adv_r_flat = advect(u, &u.u_r);
    let adv_t_flat = advect(u, &u.u_theta);
    let ut_ur = dealiased_product(&u.u_theta, &u.u_r);
    let ut_ut = dealiased_product(&u.u_theta, &u.u_theta);
    let mut out_r = ScalarField::zeros(g);
    let mut out_t = ScalarField::zeros(g);
    for j in 0..g.nr {
        let inv_r = 1.0 / g.r_nodes[j];
        for k in 0..g.ntheta {
            *out_r.at_mut(j, k) = adv_r_flat.at(j, k) - ut_ut.at(j, k) * inv_r;
            *out_t.at_mut(j, k) = adv_t_flat.at(j, k) + ut_ur.at(j, k) * inv_r;
        }
    }
    VectorField::new(out_r, out_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::grid::AnnulusGrid;
    use std::sync::Arc;

    fn grid() -> Arc<AnnulusGrid> {
        AnnulusGrid::new(1.0, 2.0, 16, 16).unwrap()
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = grid();
        let s = ScalarField::constant(&g, 4.2);
        let v = gradient(&s);
        assert!(v.u_r.max_abs() < 1e-12);
        assert!(v.u_theta.max_abs() < 1e-12);
    }

    #[test]
    fn gradient_of_x_is_unit_x_direction() {
        let g = grid();
        let s = ScalarField::from_fn(&g, |r, t| r * t.cos());
        let v = gradient(&s);
        for j in 0..g.nr {
            for k in 0..g.ntheta {
                let t = g.theta_nodes[k];
                assert!((v.u_r.at(j, k) - t.cos()).abs() < 1e-11);
                assert!((v.u_theta.at(j, k) + t.sin()).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn gradient_of_log_potential() {
        let g = grid();
        let s = ScalarField::from_fn(&g, |r, _| 9.8 * r.ln());
        let v = gradient(&s);
        // 9.8 / r at the interior node closest to 1.5.
        let j = (0..g.nr).min_by_key(|&j| ((g.r_nodes[j] - 1.5).abs() * 1e9) as i64).unwrap();
        for k in 0..g.ntheta {
            assert!((v.u_r.at(j, k) - 9.8 / g.r_nodes[j]).abs() < 1e-9);
            assert!(v.u_theta.at(j, k).abs() < 1e-12);
        }
    }

    #[test]
    fn vorticity_solid_body_and_potential_vortex() {
        let g = grid();
        let zero = vorticity(&VectorField::zeros(&g));
        assert!(zero.max_abs() < 1e-13);

        let solid = VectorField::new(
            ScalarField::zeros(&g),
            ScalarField::from_fn(&g, |r, _| r),
        );
        let w = vorticity(&solid);
        for v in &w.values {
            assert!((v - 2.0).abs() < 1e-10);
        }

        let vortex = VectorField::new(
            ScalarField::zeros(&g),
            ScalarField::from_fn(&g, |r, _| 1.0 / r),
        );
        let w = vorticity(&vortex);
        for j in 1..g.nr - 1 {
            for k in 0..g.ntheta {
                assert!(w.at(j, k).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn laplacian_known_fields() {
        let g = grid();
        // ln r is analytic but not polynomial: truncation ~3e-9 at nr=16.
        let harmonic = ScalarField::from_fn(&g, |r, _| r.ln());
        assert!(laplacian(&harmonic).max_abs() < 1e-8);

        let harmonic2 = ScalarField::from_fn(&g, |r, t| r * r * (2.0 * t).cos());
        assert!(laplacian(&harmonic2).max_abs() < 1e-9);

        let quad = ScalarField::from_fn(&g, |r, _| r * r);
        let lap = laplacian(&quad);
        for v in &lap.values {
            assert!((v - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cartesian_derivatives_consistent() {
        let g = grid();
        // s = x^2 y: dx = 2xy, dy = x^2.
        let s = ScalarField::from_fn(&g, |r, t| (r * t.cos()).powi(2) * r * t.sin());
        let sx = dx(&s);
        let sy = dy(&s);
        for j in 0..g.nr {
            for k in 0..g.ntheta {
                let (r, t) = (g.r_nodes[j], g.theta_nodes[k]);
                let (x, y) = (r * t.cos(), r * t.sin());
                assert!((sx.at(j, k) - 2.0 * x * y).abs() < 1e-9);
                assert!((sy.at(j, k) - x * x).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn vector_laplacian_matches_cartesian_route() {
        let g = grid();
        // v = grad(x^3 y - y^2): component-wise Laplacians are known.
        let ux = ScalarField::from_fn(&g, |r, t| {
            let (x, _y) = (r * t.cos(), r * t.sin());
            3.0 * x * x * r * t.sin()
        });
        let uy = ScalarField::from_fn(&g, |r, t| {
            let (x, y) = (r * t.cos(), r * t.sin());
            x * x * x - 2.0 * y
        });
        // Convert to polar components.
        let mut ur = ScalarField::zeros(&g);
        let mut ut = ScalarField::zeros(&g);
        for j in 0..g.nr {
            for k in 0..g.ntheta {
                let t = g.theta_nodes[k];
                let (s, c) = t.sin_cos();
                *ur.at_mut(j, k) = ux.at(j, k) * c + uy.at(j, k) * s;
                *ut.at_mut(j, k) = -ux.at(j, k) * s + uy.at(j, k) * c;
            }
        }
        let v = VectorField::new(ur, ut);
        let lap = vector_laplacian(&v);
        // Delta(3 x^2 y) = 6y, Delta(x^3 - 2y) = 6x; rotate to polar.
        for j in 0..g.nr {
            for k in 0..g.ntheta {
                let t = g.theta_nodes[k];
                let (s, c) = t.sin_cos();
                let (r, _) = (g.r_nodes[j], ());
                let (x, y) = (r * t.cos(), r * t.sin());
                let expect_r = 6.0 * y * c + 6.0 * x * s;
                let expect_t = -6.0 * y * s + 6.0 * x * c;
                assert!((lap.u_r.at(j, k) - expect_r).abs() < 1e-8);
                assert!((lap.u_theta.at(j, k) - expect_t).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn spectral_convergence_of_laplacian() {
        // Error against a doubled-resolution reference decays faster than any
        // fixed power of nr: successive error ratios must grow.
        let f = |r: f64, t: f64| (t.sin()).exp() * (std::f64::consts::PI * r).cos();
        let mut errors = Vec::new();
        for nr in [9usize, 13, 17] {
            // 2(nr-1)+1 nodes contain every node of the coarse grid.
            let g = AnnulusGrid::new(1.0, 2.0, nr, 32).unwrap();
            let gref = AnnulusGrid::new(1.0, 2.0, 2 * nr - 1, 32).unwrap();
            let lap = laplacian(&ScalarField::from_fn(&g, f));
            let lap_ref = laplacian(&ScalarField::from_fn(&gref, f));
            let mut worst = 0.0f64;
            for (j, &r) in g.r_nodes.iter().enumerate() {
                if let Some(jr) = gref.r_nodes.iter().position(|&rr| (rr - r).abs() < 1e-13) {
                    for k in 0..g.ntheta {
                        worst = worst.max((lap.at(j, k) - lap_ref.at(jr, k)).abs());
                    }
                }
            }
            errors.push(worst);
        }
        assert!(errors[1] < errors[0] * 0.2, "errors {errors:?}");
        assert!(errors[2] < errors[1] * 0.2, "errors {errors:?}");
    }
}
