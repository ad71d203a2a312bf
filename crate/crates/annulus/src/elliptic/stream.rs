//! Streamfunction determination on the doubly-connected annulus.
//!
//! Velocity is represented as u = grad^perp psi with u_r = -(1/r) d_theta psi
//! and u_theta = d_r psi, so that the vorticity of the reconstructed velocity
//! equals the input field. psi vanishes on r = b; for m >= 1 impermeability
//! forces psi = 0 on both walls, while the mean mode carries the circulation
//! degree of freedom through the inner-wall constant beta_a. Wall vorticity
//! conditions (omega(b) = 0, omega(a) = phi u_theta(a) with
//! phi = 2/a + alpha/nu) are enforced through per-mode influence matrices.

use num_complex::Complex64;

use crate::equilibrium::PhysicsParams;
use crate::error::{Error, Result};
use crate::spectral::{AnnulusGrid, ScalarField, VectorField};

use super::mode_op::{BoundaryRow, EllipticSolvers};

/// Wall condition set: the mixed Navier-slip/stress-free pair used by the
/// nonlinear runs, or stress-free on both circles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcSet {
    PaperMixed,
    BothStressFree,
}

/// Per-mode map from the boundary vorticity unknowns (omega_a, omega_b) to
/// the residuals of the velocity boundary conditions.
#[derive(Clone, Copy, Debug)]
pub struct InfluenceMatrix {
    pub m: usize,
    pub mat: [[f64; 2]; 2],
    pub cond: f64,
}

impl InfluenceMatrix {
    fn from_mat(m: usize, mat: [[f64; 2]; 2]) -> Self {
        let cond = cond_2x2(&mat);
        Self { m, mat, cond }
    }

    pub fn det(&self) -> f64 {
        self.mat[0][0] * self.mat[1][1] - self.mat[0][1] * self.mat[1][0]
    }

    /// Solve  mat . x = -residuals.
    pub fn solve(&self, r0: Complex64, r1: Complex64) -> Result<(Complex64, Complex64)> {
        let det = self.det();
        if det.abs() < 1e-300 {
            return Err(Error::InfluenceSingular { m: self.m as i32, det });
        }
        let x0 = (-r0 * self.mat[1][1] + r1 * self.mat[0][1]) / det;
        let x1 = (-r1 * self.mat[0][0] + r0 * self.mat[1][0]) / det;
        Ok((x0, x1))
    }
}

fn cond_2x2(m: &[[f64; 2]; 2]) -> f64 {
    // Singular values of a 2x2 from the closed form.
    let a = m[0][0];
    let b = m[0][1];
    let c = m[1][0];
    let d = m[1][1];
    let s = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
    let smax = ((s + disc) / 2.0).sqrt();
    let smin = ((s - disc) / 2.0).max(0.0).sqrt();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Slip coefficient phi = 2/a + alpha/nu entering the inner-wall vorticity
/// condition. Requires a theta-independent alpha.
pub fn slip_phi(params: &PhysicsParams, grid: &AnnulusGrid) -> Result<f64> {
    let alpha = params.alpha.constant_value().ok_or_else(|| {
        Error::Variant("wall closure requires a theta-independent slip coefficient".into())
    })?;
    Ok(2.0 / grid.a + alpha / params.nu)
}

pub struct StreamSolution {
    pub psi: ScalarField,
    pub velocity: VectorField,
    /// Inner-wall streamfunction constant of the mean mode.
    pub beta_a: f64,
}

fn apply_dmat(grid: &AnnulusGrid, profile: &[Complex64]) -> Vec<Complex64> {
    let n = grid.nr;
    let mut out = vec![Complex64::ZERO; n];
    for i in 0..n {
        let mut acc = Complex64::ZERO;
        for j in 0..n {
            acc += grid.dmat[(i, j)] * profile[j];
        }
        out[i] = acc;
    }
    out
}

fn dmat_row_dot(grid: &AnnulusGrid, row: usize, profile: &[f64]) -> f64 {
    (0..grid.nr).map(|j| grid.dmat[(row, j)] * profile[j]).sum()
}

/// How the mean-mode circulation constant is determined.
#[derive(Clone, Copy, Debug)]
pub enum CirculationClosure {
    /// Choose beta_a so that omega(a) = phi u_theta(a) holds for the mean
    /// mode; the natural closure under the mixed conditions.
    SlipConsistent,
    /// Prescribe the mean tangential velocity at the inner wall (the
    /// time stepper carries this value exactly; 0 is the gauge used for
    /// standalone stress-free inversions).
    InnerWallMeanVelocity(f64),
}

/// Invert omega for (psi, u). The Nyquist azimuthal mode is excluded from the
/// inversion so the reconstructed velocity is exactly divergence-free.
pub fn streamfunction(
    omega: &ScalarField,
    params: &PhysicsParams,
    bc_set: BcSet,
) -> Result<StreamSolution> {
    let closure = match bc_set {
        BcSet::PaperMixed => CirculationClosure::SlipConsistent,
        BcSet::BothStressFree => CirculationClosure::InnerWallMeanVelocity(0.0),
    };
    streamfunction_with_closure(omega, params, closure)
}

pub fn streamfunction_with_closure(
    omega: &ScalarField,
    params: &PhysicsParams,
    closure: CirculationClosure,
) -> Result<StreamSolution> {
    let grid = omega.grid.clone();
    let solvers = EllipticSolvers::new(&grid);
    streamfunction_cached(&solvers, omega, params, closure)
}

/// Same as [`streamfunction_with_closure`] but reusing cached factorizations.
pub fn streamfunction_cached(
    solvers: &EllipticSolvers,
    omega: &ScalarField,
    params: &PhysicsParams,
    closure: CirculationClosure,
) -> Result<StreamSolution> {
    let grid = &solvers.grid;
    let nm = grid.nmodes();
    let nr = grid.nr;
    let coeffs = omega.coeffs();

    let mut psi_c = vec![Complex64::ZERO; nr * nm];
    let mut ur_c = vec![Complex64::ZERO; nr * nm];
    let mut ut_c = vec![Complex64::ZERO; nr * nm];

    // Azimuthal modes 1..N/2-1: psi pinned to zero on both walls.
    for m in 1..nm - 1 {
        let rhs: Vec<Complex64> = (0..nr).map(|j| coeffs[j * nm + m]).collect();
        let mut full = rhs;
        full[0] = Complex64::ZERO;
        full[nr - 1] = Complex64::ZERO;
        let psi_m = solvers.solve_radial_complex(
            m,
            0.0,
            1.0,
            BoundaryRow::DIRICHLET,
            BoundaryRow::DIRICHLET,
            &full,
        )?;
        let dpsi = apply_dmat(grid, &psi_m);
        for j in 0..nr {
            psi_c[j * nm + m] = psi_m[j];
            ur_c[j * nm + m] =
                -Complex64::new(0.0, m as f64) / grid.r_nodes[j] * psi_m[j];
            ut_c[j * nm + m] = dpsi[j];
        }
    }

    // Mean mode: particular solution with zero wall values plus the harmonic
    // function carrying the circulation constant.
    let mean_rhs: Vec<f64> = (0..nr).map(|j| coeffs[j * nm].re).collect();
    let mut full = mean_rhs.clone();
    full[0] = 0.0;
    full[nr - 1] = 0.0;
    let psi_p = solvers.solve_radial(0, 0.0, 1.0, BoundaryRow::DIRICHLET, BoundaryRow::DIRICHLET, &full)?;
    // psi_h = ln(r/b) / ln(a/b): harmonic, psi_h(a) = 1, psi_h(b) = 0.
    let log_ab = (grid.a / grid.b).ln();
    let psi_h: Vec<f64> = grid.r_nodes.iter().map(|r| (r / grid.b).ln() / log_ab).collect();
    let dpsi_p_a = dmat_row_dot(grid, 0, &psi_p);
    let dpsi_h_a = 1.0 / (grid.a * log_ab);
    let beta_a = match closure {
        CirculationClosure::SlipConsistent => {
            let phi = slip_phi(params, grid)?;
            // omega(a) = phi u_theta(a) with u_theta = d_r psi.
            (mean_rhs[0] / phi - dpsi_p_a) / dpsi_h_a
        }
        CirculationClosure::InnerWallMeanVelocity(u_a) => (u_a - dpsi_p_a) / dpsi_h_a,
    };
    let psi_0: Vec<f64> = (0..nr).map(|j| psi_p[j] + beta_a * psi_h[j]).collect();
    let dpsi_0: Vec<f64> = {
        let asc: Vec<Complex64> = psi_0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        apply_dmat(grid, &asc).iter().map(|c| c.re).collect()
    };
    for j in 0..nr {
        psi_c[j * nm] = Complex64::new(psi_0[j], 0.0);
        ut_c[j * nm] = Complex64::new(dpsi_0[j], 0.0);
    }

    let psi = ScalarField::from_coeffs(grid, &psi_c);
    let u_r = ScalarField::from_coeffs(grid, &ur_c);
    let u_theta = ScalarField::from_coeffs(grid, &ut_c);
    let mut velocity = VectorField::new(u_r, u_theta);
    velocity.wall_compatible = true;
    Ok(StreamSolution { psi, velocity, beta_a })
}

/// One implicit vorticity solve `(I - kappa L_m) omega = rhs` for a mode
/// m >= 1 with the wall closure resolved through the influence matrix:
/// omega(b) = 0 and, under `PaperMixed`, omega(a) = phi u_theta(a) with the
/// streamfunction solved alongside. Returns (omega_m, psi_m).
#[allow(clippy::too_many_arguments)]
pub fn implicit_vorticity_mode(
    solvers: &EllipticSolvers,
    m: usize,
    kappa: f64,
    rhs: &[Complex64],
    bc_set: BcSet,
    phi: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let grid = &solvers.grid;
    let nr = grid.nr;
    let mut full = rhs.to_vec();
    full[0] = Complex64::ZERO;
    full[nr - 1] = Complex64::ZERO;
    let omega_p = solvers.solve_radial_complex(
        m,
        1.0,
        -kappa,
        BoundaryRow::DIRICHLET,
        BoundaryRow::DIRICHLET,
        &full,
    )?;
    let psi_of = |w: &[Complex64]| -> Result<Vec<Complex64>> {
        let mut rhs_psi = w.to_vec();
        rhs_psi[0] = Complex64::ZERO;
        rhs_psi[nr - 1] = Complex64::ZERO;
        solvers.solve_radial_complex(
            m,
            0.0,
            1.0,
            BoundaryRow::DIRICHLET,
            BoundaryRow::DIRICHLET,
            &rhs_psi,
        )
    };
    let psi_p = psi_of(&omega_p)?;

    match bc_set {
        BcSet::BothStressFree => Ok((omega_p, psi_p)),
        BcSet::PaperMixed => {
            let infl = paper_mixed_influence(solvers, m, kappa, phi)?;
            let dpsi_p_a: Complex64 =
                (0..nr).map(|j| grid.dmat[(0, j)] * psi_p[j]).sum();
            // Residuals at (omega_a, omega_b) = 0: slip and outer Dirichlet.
            let r_slip = omega_p[0] - phi * dpsi_p_a;
            let r_outer = omega_p[nr - 1];
            let (wa, wb) = infl.influence.solve(r_slip, r_outer)?;
            let omega: Vec<Complex64> = (0..nr)
                .map(|j| omega_p[j] + wa * infl.omega_ha[j] + wb * infl.omega_hb[j])
                .collect();
            let psi: Vec<Complex64> = (0..nr)
                .map(|j| psi_p[j] + wa * infl.psi_ha[j] + wb * infl.psi_hb[j])
                .collect();
            Ok((omega, psi))
        }
    }
}

/// Unit boundary-vorticity responses for one (m, kappa, phi) triple.
pub struct ModeInfluence {
    pub influence: InfluenceMatrix,
    omega_ha: Vec<Complex64>,
    omega_hb: Vec<Complex64>,
    psi_ha: Vec<Complex64>,
    psi_hb: Vec<Complex64>,
}

/// Build the 2x2 influence matrix for the mixed conditions by solving the
/// homogeneous problem with unit vorticity on each wall in turn.
pub fn paper_mixed_influence(
    solvers: &EllipticSolvers,
    m: usize,
    kappa: f64,
    phi: f64,
) -> Result<ModeInfluence> {
    let grid = &solvers.grid;
    let nr = grid.nr;
    let unit = |at_a: bool| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut rhs = vec![0.0; nr];
        rhs[0] = if at_a { 1.0 } else { 0.0 };
        rhs[nr - 1] = if at_a { 0.0 } else { 1.0 };
        let w = solvers.solve_radial(m, 1.0, -kappa, BoundaryRow::DIRICHLET, BoundaryRow::DIRICHLET, &rhs)?;
        let mut rhs_psi = w.clone();
        rhs_psi[0] = 0.0;
        rhs_psi[nr - 1] = 0.0;
        let psi = solvers.solve_radial(m, 0.0, 1.0, BoundaryRow::DIRICHLET, BoundaryRow::DIRICHLET, &rhs_psi)?;
        Ok((w, psi))
    };
    let (wa, pa) = unit(true)?;
    let (wb, pb) = unit(false)?;
    let slip_response = |w: &[f64], p: &[f64]| w[0] - phi * dmat_row_dot(grid, 0, p);
    let mat = [
        [slip_response(&wa, &pa), slip_response(&wb, &pb)],
        [wa[nr - 1], wb[nr - 1]],
    ];
    let influence = InfluenceMatrix::from_mat(m, mat);
    if influence.det().abs() < 1e-14 {
        return Err(Error::InfluenceSingular { m: m as i32, det: influence.det() });
    }
    let to_c = |v: Vec<f64>| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
    Ok(ModeInfluence {
        influence,
        omega_ha: to_c(wa),
        omega_hb: to_c(wb),
        psi_ha: to_c(pa),
        psi_hb: to_c(pb),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::SlipCoefficient;
    use crate::spectral::norms::{l2_norm, l2_norm_vec};
    use crate::spectral::ops::{divergence, vorticity};
    use std::sync::Arc;

    fn setup() -> (Arc<AnnulusGrid>, PhysicsParams) {
        let g = AnnulusGrid::new(1.0, 2.0, 24, 16).unwrap();
        let p = PhysicsParams::new(0.1, 1.0, SlipCoefficient::Constant(0.3)).unwrap();
        (g, p)
    }

    #[test]
    fn zero_vorticity_zero_circulation_gives_rest() {
        let (g, p) = setup();
        let omega = ScalarField::zeros(&g);
        let sol = streamfunction_with_closure(&omega, &p, CirculationClosure::InnerWallMeanVelocity(0.0))
            .unwrap();
        assert!(l2_norm(&sol.psi) < 1e-12);
        assert!(l2_norm_vec(&sol.velocity) < 1e-12);
    }

    #[test]
    fn round_trip_wall_compatible_field() {
        // Build u* = grad^perp psi* with psi* = 0 on both walls plus a
        // slip-consistent mean circulation; vorticity + inversion must
        // reproduce it.
        let (g, p) = setup();
        let psi_star = ScalarField::from_fn(&g, |r, t| {
            let w = (r - 1.0) * (2.0 - r);
            w * w * (2.0 * t).sin() + 0.3 * w * (3.0 * t).cos()
        });
        // gradient() returns (d_r psi, (1/r) d_theta psi); u = grad^perp psi.
        let grad = crate::spectral::ops::gradient(&psi_star);
        let u_star = VectorField::new(grad.u_theta.scale(-1.0), grad.u_r);
        let omega_star = vorticity(&u_star);
        let sol = streamfunction_with_closure(
            &omega_star,
            &p,
            CirculationClosure::InnerWallMeanVelocity(0.0),
        )
        .unwrap();
        let diff_r = sol.velocity.u_r.sub(&u_star.u_r);
        let diff_t = sol.velocity.u_theta.sub(&u_star.u_theta);
        let err = (l2_norm(&diff_r).powi(2) + l2_norm(&diff_t).powi(2)).sqrt();
        assert!(err < 1e-8, "round-trip error {err}");
        assert!(sol.velocity.wall_flux() < 1e-12);
    }

    #[test]
    fn reconstructed_velocity_is_divergence_free() {
        let (g, p) = setup();
        let omega = ScalarField::from_fn(&g, |r, t| (r * 2.1).sin() * (1.0 + (3.0 * t).cos()));
        let sol = streamfunction(&omega, &p, BcSet::PaperMixed).unwrap();
        assert!(l2_norm(&divergence(&sol.velocity)) < 1e-10);
        assert!(sol.velocity.wall_flux() < 1e-12);
    }

    #[test]
    fn slip_condition_closed_for_mean_mode() {
        let (g, p) = setup();
        // Pure mean vorticity field.
        let omega = ScalarField::from_fn(&g, |r, _| 1.0 + (r - 1.5) * (r - 1.5));
        let sol = streamfunction(&omega, &p, BcSet::PaperMixed).unwrap();
        let phi = slip_phi(&p, &g).unwrap();
        let ut_a = sol.velocity.u_theta.at(0, 0);
        assert!((omega.at(0, 0) - phi * ut_a).abs() < 1e-9, "slip residual");
    }

    #[test]
    fn implicit_step_enforces_both_wall_conditions() {
        let (g, p) = setup();
        let solvers = EllipticSolvers::new(&g);
        let phi = slip_phi(&p, &g).unwrap();
        let m = 3;
        let kappa = 5e-3;
        let rhs: Vec<num_complex::Complex64> = g
            .r_nodes
            .iter()
            .map(|&r| num_complex::Complex64::new((r * 4.0).sin(), (r * 2.0).cos()))
            .collect();
        let (w, psi) = implicit_vorticity_mode(&solvers, m, kappa, &rhs, BcSet::PaperMixed, phi).unwrap();
        // omega(b) = 0.
        assert!(w[g.nr - 1].norm() < 1e-10);
        // Slip: omega(a) = phi d_r psi (a).
        let dpsi_a: num_complex::Complex64 =
            (0..g.nr).map(|j| g.dmat[(0, j)] * psi[j]).sum();
        assert!((w[0] - phi * dpsi_a).norm() < 1e-9);
        // Interior equation satisfied: (I - kappa L_m) omega = rhs.
        let lw = {
            let re: Vec<f64> = w.iter().map(|c| c.re).collect();
            let im: Vec<f64> = w.iter().map(|c| c.im).collect();
            let lre = solvers.apply_mode(m, &re);
            let lim = solvers.apply_mode(m, &im);
            lre.into_iter()
                .zip(lim)
                .map(|(r, i)| num_complex::Complex64::new(r, i))
                .collect::<Vec<_>>()
        };
        for j in 1..g.nr - 1 {
            let res = w[j] - kappa * lw[j] - rhs[j];
            assert!(res.norm() < 1e-8, "interior residual {} at j={j}", res.norm());
        }
        let infl = paper_mixed_influence(&solvers, m, kappa, phi).unwrap();
        assert!(infl.influence.cond.is_finite());
    }
}
