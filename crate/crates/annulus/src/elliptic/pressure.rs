//! Pressure recovery from the momentum balance, and the steady Stokes solve
//! used by the estimate checks.
//!
//! The pressure solves the divergence of the momentum equation as a Poisson
//! problem whose Neumann data is the wall-normal momentum balance. The mean
//! azimuthal mode is deflated with a Lagrange multiplier; the multiplier
//! measures the solvability imbalance of the Neumann data and is reported.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::equilibrium::{PhysicsParams, Potential};
use crate::error::{Error, Result};
use crate::spectral::norms::{integrate, l2_norm_vec};
use crate::spectral::ops::{advect_velocity, dr, dtheta, vector_laplacian};
use crate::spectral::{ScalarField, VectorField};

use super::mode_op::{mode_matrix, BoundaryRow, EllipticSolvers};
use super::stream::{slip_phi, BcSet};

#[derive(Default)]
pub struct PressureOptions<'a> {
    /// Time derivative of the velocity, if the unsteady balance is wanted.
    pub u_t: Option<&'a VectorField>,
    /// Include rho_star (u . grad) u; the linear eigenproblem residual omits it.
    pub include_advection: bool,
    /// Extra body force, for manufactured-solution tests.
    pub body_force: Option<&'a VectorField>,
    /// Imbalance above which recovery fails; defaults to 1e-3 (1 + ||F||).
    pub compatibility_tol: Option<f64>,
}

pub struct PressureRecovery {
    pub p: ScalarField,
    /// Solvability imbalance of the mean-mode Neumann problem (integral of
    /// div F minus the boundary flux), projected out of the solve.
    pub neumann_imbalance: f64,
}

/// Momentum flux F with grad P = F:
/// F = rho_star nu Lap u - rho_star (u.grad)u - rho_star u_t - rho grad f [+ body force].
pub fn momentum_flux(
    u: &VectorField,
    rho_total: &ScalarField,
    params: &PhysicsParams,
    potential: &Potential,
    opts: &PressureOptions,
) -> VectorField {
    let lap = vector_laplacian(u);
    let mut f_r = lap.u_r.scale(params.rho_star * params.nu);
    let mut f_t = lap.u_theta.scale(params.rho_star * params.nu);
    if opts.include_advection {
        let adv = advect_velocity(u);
        f_r.axpy(-params.rho_star, &adv.u_r);
        f_t.axpy(-params.rho_star, &adv.u_theta);
    }
    if let Some(ut) = opts.u_t {
        f_r.axpy(-params.rho_star, &ut.u_r);
        f_t.axpy(-params.rho_star, &ut.u_theta);
    }
    f_r.axpy(-1.0, &rho_total.mul(&potential.gradf.u_r));
    f_t.axpy(-1.0, &rho_total.mul(&potential.gradf.u_theta));
    if let Some(bf) = opts.body_force {
        f_r.axpy(1.0, &bf.u_r);
        f_t.axpy(1.0, &bf.u_theta);
    }
    VectorField::new(f_r, f_t)
}

/// Recover the pressure with mean zero; see module docs.
pub fn recover_pressure(
    solvers: &EllipticSolvers,
    u: &VectorField,
    rho_total: &ScalarField,
    params: &PhysicsParams,
    potential: &Potential,
    opts: &PressureOptions,
) -> Result<PressureRecovery> {
    let flux = momentum_flux(u, rho_total, params, potential, opts);
    solve_gradient_potential(solvers, &flux, opts.compatibility_tol)
}

/// Find mean-zero P minimizing the residual of grad P = F: Poisson problem
/// Lap P = div F with d_r P = F_r on the walls.
pub fn solve_gradient_potential(
    solvers: &EllipticSolvers,
    flux: &VectorField,
    compatibility_tol: Option<f64>,
) -> Result<PressureRecovery> {
    let grid = &solvers.grid;
    let nr = grid.nr;
    let nm = grid.nmodes();

    // div F = (1/r) d_r (r F_r) + (1/r) d_theta F_theta.
    let mut r_fr = flux.u_r.clone();
    for j in 0..nr {
        let r = grid.r_nodes[j];
        for k in 0..grid.ntheta {
            *r_fr.at_mut(j, k) *= r;
        }
    }
    let d_rfr = dr(&r_fr);
    let d_tft = dtheta(&flux.u_theta);
    let mut div = ScalarField::zeros(grid);
    for j in 0..nr {
        let inv_r = 1.0 / grid.r_nodes[j];
        for k in 0..grid.ntheta {
            *div.at_mut(j, k) = inv_r * (d_rfr.at(j, k) + d_tft.at(j, k));
        }
    }
    let div_c = div.coeffs();
    let fr_c = flux.u_r.coeffs();

    let mut p_c = vec![Complex64::ZERO; nr * nm];

    // Modes m >= 1: Neumann rows at both walls are nonsingular.
    for m in 1..nm - 1 {
        let mut rhs: Vec<Complex64> = (0..nr).map(|j| div_c[j * nm + m]).collect();
        rhs[0] = fr_c[m];
        rhs[nr - 1] = fr_c[(nr - 1) * nm + m];
        let sol = solvers.solve_radial_complex(
            m,
            0.0,
            1.0,
            BoundaryRow::NEUMANN,
            BoundaryRow::NEUMANN,
            &rhs,
        )?;
        for j in 0..nr {
            p_c[j * nm + m] = sol[j];
        }
    }

    // Mean mode: deflated Neumann problem with a Lagrange multiplier lambda
    // added to the interior equations and a mean-zero row closing the system.
    let (p0, lambda) = {
        let l0 = mode_matrix(grid, 0);
        let n1 = nr + 1;
        let mut a = DMatrix::zeros(n1, n1);
        let mut rhs = DVector::zeros(n1);
        for i in 1..nr - 1 {
            for j in 0..nr {
                a[(i, j)] = l0[(i, j)];
            }
            a[(i, nr)] = 1.0;
            rhs[i] = div_c[i * nm].re;
        }
        for j in 0..nr {
            a[(0, j)] = grid.dmat[(0, j)];
            a[(nr - 1, j)] = grid.dmat[(nr - 1, j)];
            // Mean row: radial quadrature with the Jacobian.
            a[(nr, j)] = grid.w_radial[j] * grid.r_nodes[j];
        }
        rhs[0] = fr_c[0].re;
        rhs[nr - 1] = fr_c[(nr - 1) * nm].re;
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular { m: 0, reason: "deflated Neumann solve".into() })?;
        let p0: Vec<f64> = sol.as_slice()[0..nr].to_vec();
        (p0, sol[nr])
    };
    for j in 0..nr {
        p_c[j * nm] = Complex64::new(p0[j], 0.0);
    }

    // Imbalance: lambda times the domain area over 2 pi is the amount of
    // constant forcing projected out of the mean-mode equation.
    let area = std::f64::consts::PI * (grid.b * grid.b - grid.a * grid.a);
    let imbalance = lambda.abs() * area;
    let scale = 1.0 + l2_norm_vec(flux);
    let tol = compatibility_tol.unwrap_or(1e-3 * scale);
    if imbalance > tol {
        return Err(Error::Compatibility { imbalance, bound: tol });
    }

    let mut p = ScalarField::from_coeffs(grid, &p_c);
    let mean = integrate(&p) / area;
    for v in p.values.iter_mut() {
        *v -= mean;
    }
    Ok(PressureRecovery { p, neumann_imbalance: imbalance })
}

pub struct StokesSolution {
    pub velocity: VectorField,
    pub pressure: ScalarField,
    pub psi: ScalarField,
}

/// Steady Stokes problem rho_star nu Lap v - grad P = force under the mixed
/// wall conditions, solved in vorticity-streamfunction form with the wall
/// closure of [`implicit_vorticity_mode`] (steady limit).
pub fn stokes_solve(
    solvers: &EllipticSolvers,
    force: &VectorField,
    params: &PhysicsParams,
    bc_set: BcSet,
) -> Result<StokesSolution> {
    if bc_set != BcSet::PaperMixed {
        return Err(Error::Variant(
            "steady Stokes requires the mixed wall conditions; stress-free walls leave the circulation free".into(),
        ));
    }
    let grid = &solvers.grid;
    let nr = grid.nr;
    let nm = grid.nmodes();
    let mu = params.rho_star * params.nu;
    let phi = slip_phi(params, grid)?;

    // curl of the force drives the vorticity: mu Lap omega = curl force.
    let curl_f = crate::spectral::ops::vorticity(force);
    let curl_c = curl_f.coeffs();

    let mut psi_c = vec![Complex64::ZERO; nr * nm];
    let mut ur_c = vec![Complex64::ZERO; nr * nm];
    let mut ut_c = vec![Complex64::ZERO; nr * nm];
    let mut omega_c = vec![Complex64::ZERO; nr * nm];

    for m in 1..nm - 1 {
        let rhs: Vec<Complex64> = (0..nr).map(|j| curl_c[j * nm + m] / mu).collect();

        let (omega_m, psi_m) = steady_vorticity_mode(solvers, m, &rhs, phi)?;
        let dpsi = {
            let mut out = vec![Complex64::ZERO; nr];
            for i in 0..nr {
                out[i] = (0..nr).map(|j| grid.dmat[(i, j)] * psi_m[j]).sum();
            }
            out
        };
        for j in 0..nr {
            omega_c[j * nm + m] = omega_m[j];
            psi_c[j * nm + m] = psi_m[j];
            ur_c[j * nm + m] = -Complex64::new(0.0, m as f64) / grid.r_nodes[j] * psi_m[j];
            ut_c[j * nm + m] = dpsi[j];
        }
    }

    // Mean mode in velocity form: mu (L_1 u_theta) = mean force_theta with
    // Robin rows (slip at a, stress-free at b).
    let alpha = params.alpha.constant_value().ok_or_else(|| {
        Error::Variant("steady Stokes requires a theta-independent slip coefficient".into())
    })?;
    let ftheta_c = force.u_theta.coeffs();
    let mut rhs0: Vec<f64> = (0..nr).map(|j| ftheta_c[j * nm].re / mu).collect();
    rhs0[0] = 0.0;
    rhs0[nr - 1] = 0.0;
    let row_a = BoundaryRow::robin(-(1.0 / grid.a + alpha / params.nu), 1.0);
    let row_b = BoundaryRow::robin(1.0 / grid.b, 1.0);
    let ut0 = solvers.solve_radial(1, 0.0, 1.0, row_a, row_b, &rhs0)?;
    for j in 0..nr {
        ut_c[j * nm] = Complex64::new(ut0[j], 0.0);
    }
    // Mean vorticity (1/r) d_r (r u_theta), for the wall-condition report.
    let omega0: Vec<f64> = {
        let r_ut: Vec<f64> = (0..nr).map(|j| grid.r_nodes[j] * ut0[j]).collect();
        (0..nr)
            .map(|i| {
                let d: f64 = (0..nr).map(|j| grid.dmat[(i, j)] * r_ut[j]).sum();
                d / grid.r_nodes[i]
            })
            .collect()
    };
    for j in 0..nr {
        omega_c[j * nm] = Complex64::new(omega0[j], 0.0);
    }

    let psi = ScalarField::from_coeffs(grid, &psi_c);
    let mut velocity = VectorField::new(
        ScalarField::from_coeffs(grid, &ur_c),
        ScalarField::from_coeffs(grid, &ut_c),
    );
    velocity.wall_compatible = true;

    // grad P = mu Lap v - force.
    let lap = vector_laplacian(&velocity);
    let flux = VectorField::new(
        lap.u_r.scale(mu).sub(&force.u_r),
        lap.u_theta.scale(mu).sub(&force.u_theta),
    );
    let pressure = solve_gradient_potential(solvers, &flux, None)?.p;
    Ok(StokesSolution { velocity, pressure, psi })
}

/// Steady vorticity mode solve L_m omega = rhs with omega(b) = 0 and the slip
/// closure at r = a through a 1x1 influence relation.
fn steady_vorticity_mode(
    solvers: &EllipticSolvers,
    m: usize,
    rhs: &[Complex64],
    phi: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let grid = &solvers.grid;
    let nr = grid.nr;
    let mut full = rhs.to_vec();
    full[0] = Complex64::ZERO;
    full[nr - 1] = Complex64::ZERO;
    let omega_p = solvers.solve_radial_complex(
        m,
        0.0,
        1.0,
        BoundaryRow::DIRICHLET,
        BoundaryRow::DIRICHLET,
        &full,
    )?;
    let psi_of = |w: &[Complex64]| -> Result<Vec<Complex64>> {
        let mut rp = w.to_vec();
        rp[0] = Complex64::ZERO;
        rp[nr - 1] = Complex64::ZERO;
        solvers.solve_radial_complex(m, 0.0, 1.0, BoundaryRow::DIRICHLET, BoundaryRow::DIRICHLET, &rp)
    };
    let psi_p = psi_of(&omega_p)?;
    // Unit inner-wall vorticity response.
    let mut unit = vec![0.0; nr];
    unit[0] = 1.0;
    let omega_h = solvers.solve_radial(m, 0.0, 1.0, BoundaryRow::DIRICHLET, BoundaryRow::DIRICHLET, &unit)?;
    let mut rp = omega_h.clone();
    rp[0] = 0.0;
    rp[nr - 1] = 0.0;
    let psi_h = solvers.solve_radial(m, 0.0, 1.0, BoundaryRow::DIRICHLET, BoundaryRow::DIRICHLET, &rp)?;
    let dpsi_row0 = |p: &[f64]| -> f64 { (0..nr).map(|j| grid.dmat[(0, j)] * p[j]).sum() };
    let dpsi_p_a: Complex64 = (0..nr).map(|j| grid.dmat[(0, j)] * psi_p[j]).sum();
    let response = 1.0 - phi * dpsi_row0(&psi_h);
    if response.abs() < 1e-14 {
        return Err(Error::InfluenceSingular { m: m as i32, det: response });
    }
    let r_p = omega_p[0] - phi * dpsi_p_a;
    let wa = -r_p / response;
    let omega: Vec<Complex64> =
        (0..nr).map(|j| omega_p[j] + wa * omega_h[j]).collect();
    let psi: Vec<Complex64> = (0..nr).map(|j| psi_p[j] + wa * psi_h[j]).collect();
    Ok((omega, psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{make_potential, PotentialKind, SlipCoefficient};
    use crate::spectral::norms::{l2_norm, l2_norm_sq};
    use crate::spectral::AnnulusGrid;
    use std::sync::Arc;

    fn setup() -> (Arc<AnnulusGrid>, EllipticSolvers, PhysicsParams, Potential) {
        let g = AnnulusGrid::new(1.0, 2.0, 24, 16).unwrap();
        let s = EllipticSolvers::new(&g);
        let p = PhysicsParams::new(0.1, 1.0, SlipCoefficient::Constant(0.0)).unwrap();
        let pot = make_potential(PotentialKind::LogRadial { g: 1.0 }, &g).unwrap();
        (g, s, p, pot)
    }

    #[test]
    fn hydrostatic_pressure_of_constant_density() {
        // u = 0, rho = c: grad P = -c grad f, so P = -c f + const.
        let (g, s, params, pot) = setup();
        let rho = ScalarField::constant(&g, 2.5);
        let u = VectorField::zeros(&g);
        let rec = recover_pressure(&s, &u, &rho, &params, &pot, &PressureOptions::default()).unwrap();
        // Compare against -2.5 f shifted to zero mean.
        let mut expect = pot.f.scale(-2.5);
        let area = std::f64::consts::PI * (g.b * g.b - g.a * g.a);
        let mean = integrate(&expect) / area;
        for v in expect.values.iter_mut() {
            *v -= mean;
        }
        let err = l2_norm(&rec.p.sub(&expect));
        assert!(err < 1e-9, "pressure error {err}");
        assert!(rec.neumann_imbalance < 1e-9);
    }

    #[test]
    fn zero_density_zero_velocity_gives_zero_pressure() {
        let (g, s, params, pot) = setup();
        let rec = recover_pressure(
            &s,
            &VectorField::zeros(&g),
            &ScalarField::zeros(&g),
            &params,
            &pot,
            &PressureOptions::default(),
        )
        .unwrap();
        assert!(l2_norm(&rec.p) < 1e-12);
    }

    #[test]
    fn manufactured_velocity_pressure_pair_recovered() {
        // u = grad^perp[(r-a)^2 (b-r)^2 sin theta], P manufactured; the body
        // force balances the remaining terms exactly.
        let (g, s, params, pot) = setup();
        let psi = ScalarField::from_fn(&g, |r, t| {
            let w = (r - g.a) * (g.b - r);
            w * w * t.sin()
        });
        let grad = crate::spectral::ops::gradient(&psi);
        let u = VectorField::new(grad.u_theta.scale(-1.0), grad.u_r.clone());
        let p_exact = ScalarField::from_fn(&g, |r, t| (r - 1.4) * (2.0 * t).cos() + 0.2 * r * r);
        let rho = ScalarField::zeros(&g);

        // body force = grad P - rho_star nu Lap u + rho_star (u.grad)u.
        let lap = vector_laplacian(&u);
        let adv = crate::spectral::ops::advect_velocity(&u);
        let grad_p = crate::spectral::ops::gradient(&p_exact);
        let bf = VectorField::new(
            grad_p
                .u_r
                .sub(&lap.u_r.scale(params.rho_star * params.nu))
                .add(&adv.u_r.scale(params.rho_star)),
            grad_p
                .u_theta
                .sub(&lap.u_theta.scale(params.rho_star * params.nu))
                .add(&adv.u_theta.scale(params.rho_star)),
        );
        let opts = PressureOptions {
            include_advection: true,
            body_force: Some(&bf),
            ..Default::default()
        };
        let rec = recover_pressure(&s, &u, &rho, &params, &pot, &opts).unwrap();
        // Compare mean-zero shifted.
        let area = std::f64::consts::PI * (g.b * g.b - g.a * g.a);
        let mut expect = p_exact.clone();
        let mean = integrate(&expect) / area;
        for v in expect.values.iter_mut() {
            *v -= mean;
        }
        let err = l2_norm(&rec.p.sub(&expect));
        assert!(err < 1e-6, "manufactured pressure error {err}");
    }

    #[test]
    fn stokes_solution_satisfies_momentum_and_walls() {
        let (g, s, params, _pot) = setup();
        let force = VectorField::new(
            ScalarField::from_fn(&g, |r, t| (2.0 * t).cos() * (r - 1.2)),
            ScalarField::from_fn(&g, |r, t| t.sin() + 0.1 * r),
        );
        let sol = stokes_solve(&s, &force, &params, BcSet::PaperMixed).unwrap();
        assert!(sol.velocity.wall_flux() < 1e-10);
        // Residual of mu Lap v - grad P - f orthogonal to divergence-free
        // test fields: check the strong residual is small in L2 relative to f.
        let mu = params.rho_star * params.nu;
        let lap = vector_laplacian(&sol.velocity);
        let grad_p = crate::spectral::ops::gradient(&sol.pressure);
        let res_r = lap.u_r.scale(mu).sub(&grad_p.u_r).sub(&force.u_r);
        let res_t = lap.u_theta.scale(mu).sub(&grad_p.u_theta).sub(&force.u_theta);
        let res = (l2_norm_sq(&res_r) + l2_norm_sq(&res_t)).sqrt();
        let fnorm = (l2_norm_sq(&force.u_r) + l2_norm_sq(&force.u_theta)).sqrt();
        assert!(res < 1e-6 * fnorm, "Stokes residual {res} vs force {fnorm}");
        // Wall vorticity conditions.
        let w = crate::spectral::ops::vorticity(&sol.velocity);
        let phi = slip_phi(&params, &g).unwrap();
        for k in 0..g.ntheta {
            assert!(w.at(g.nr - 1, k).abs() < 1e-8, "omega(b) residual");
            let slip = w.at(0, k) - phi * sol.velocity.u_theta.at(0, k);
            assert!(slip.abs() < 1e-8, "slip residual {slip}");
        }
    }
}
