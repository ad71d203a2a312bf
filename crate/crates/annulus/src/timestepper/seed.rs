//! Initial data: band-limited solenoidal noise, the computed growth
//! eigenmode, exact family offsets, and snapshot files.

use std::path::PathBuf;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::elliptic::EllipticSolvers;
use crate::error::{Error, Result};
use crate::spectral::norms::{l2_norm, l2_norm_vec};
use crate::spectral::ScalarField;

use super::{reconstruct_state, require_unstable, SimConfig, SimState};

#[derive(Clone, Debug)]
pub enum SeedSpec {
    /// Solenoidal band-limited noise scaled to ||u0|| = ||rho0|| = amplitude.
    Random { amplitude: f64, rng_seed: u64 },
    /// delta* times the J-normalized growth eigenmode and its eigen-density.
    Eigenmode { amplitude: f64, modes: Vec<usize> },
    /// Snapshot directory written by a previous run.
    File { path: PathBuf },
    /// rho0 = -gamma f + beta - rho_s exactly, u0 = 0: an exact hydrostatic
    /// offset within the linear family.
    FamilyExact { gamma: f64, beta: f64 },
}

/// Overwrite the wall rows of omega with the values demanded by the wall
/// conditions. The streamfunction solve never reads the wall vorticity, so
/// this is an exact consistency projection: without it, initial data start
/// on an algebraic boundary layer that costs the integrator one order.
fn enforce_wall_vorticity(state: &mut SimState, config: &SimConfig) {
    let grid = state.omega.grid.clone();
    let nr = grid.nr;
    for k in 0..grid.ntheta {
        let target_a = match config.bc_set {
            crate::elliptic::BcSet::PaperMixed => {
                let phi = 2.0 / grid.a + config.params.alpha.value(k) / config.params.nu;
                phi * state.velocity.u_theta.at(0, k)
            }
            crate::elliptic::BcSet::BothStressFree => 0.0,
        };
        *state.omega.at_mut(0, k) = target_a;
        *state.omega.at_mut(nr - 1, k) = 0.0;
    }
}

pub fn init(config: &SimConfig) -> Result<SimState> {
    let mut state = init_unprojected(config)?;
    if !matches!(config.seed, SeedSpec::File { .. }) {
        enforce_wall_vorticity(&mut state, config);
    }
    Ok(state)
}

fn init_unprojected(config: &SimConfig) -> Result<SimState> {
    let grid = config.grid().clone();
    let solvers = EllipticSolvers::new(&grid);
    let nm = grid.nmodes();
    let nr = grid.nr;
    match &config.seed {
        SeedSpec::Random { amplitude, rng_seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*rng_seed);
            let m_max = 8.min(grid.ntheta / 3).max(1);
            let k_max = 4.min(nr / 3).max(1);
            // psi from random coefficients on wall-vanishing radial bumps;
            // u = grad^perp psi is solenoidal with zero boundary flux.
            let mut psi_modes = vec![(0usize, 0usize, 0.0f64, 0.0f64); 0];
            for m in 1..=m_max {
                for k in 1..=k_max {
                    let c_re = rng.gen_range(-1.0..1.0);
                    let c_im = rng.gen_range(-1.0..1.0);
                    psi_modes.push((m, k, c_re, c_im));
                }
            }
            let mut rho_modes = Vec::new();
            for m in 0..=m_max {
                for k in 1..=k_max {
                    let c_re = rng.gen_range(-1.0..1.0);
                    let c_im = if m == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
                    rho_modes.push((m, k, c_re, c_im));
                }
            }
            let bump = |k: usize, r: f64| {
                ((r - grid.a) / (grid.b - grid.a) * std::f64::consts::PI * k as f64).sin()
            };
            let psi = ScalarField::from_fn(&grid, |r, t| {
                let mut v = 0.0;
                for &(m, k, cr, ci) in &psi_modes {
                    v += bump(k, r) * (cr * (m as f64 * t).cos() + ci * (m as f64 * t).sin());
                }
                v
            });
            let rho_raw = ScalarField::from_fn(&grid, |r, t| {
                let mut v = 0.0;
                for &(m, k, cr, ci) in &rho_modes {
                    v += bump(k, r) * (cr * (m as f64 * t).cos() + ci * (m as f64 * t).sin());
                }
                v
            });
            // Vorticity of grad^perp psi is Lap psi; seed through the modes.
            let omega = crate::spectral::ops::laplacian(&psi);
            let utheta_mean = vec![0.0; nr];
            let mut state =
                reconstruct_state(&solvers, &omega.coeffs(), &utheta_mean, rho_raw, 0.0, 0)?;
            // Scale u and rho to the requested amplitude.
            let un = l2_norm_vec(&state.velocity);
            let scale_u = if un > 0.0 { amplitude / un } else { 0.0 };
            let rn = l2_norm(&state.rho);
            let scale_r = if rn > 0.0 { amplitude / rn } else { 0.0 };
            let omega_scaled: Vec<Complex64> =
                state.omega.coeffs().iter().map(|c| c * scale_u).collect();
            let rho_scaled = state.rho.scale(scale_r);
            state = reconstruct_state(&solvers, &omega_scaled, &utheta_mean, rho_scaled, 0.0, 0)?;
            Ok(state)
        }
        SeedSpec::Eigenmode { amplitude, modes } => {
            require_unstable(&config.equilibrium)?;
            let scan = crate::eigensolver::full_spectrum_check(
                &config.equilibrium,
                &config.params,
                modes,
            )?;
            let em = scan
                .eigenmode
                .ok_or_else(|| Error::Seed("no growth mode found for eigenmode seed".into()))?;
            let omega = crate::spectral::ops::vorticity(&em.velocity);
            let omega_c: Vec<Complex64> =
                omega.coeffs().iter().map(|c| c * *amplitude).collect();
            let rho = em.rho.scale(*amplitude);
            let ut_c = em.velocity.u_theta.coeffs();
            let utheta_mean: Vec<f64> =
                (0..nr).map(|j| ut_c[j * nm].re * amplitude).collect();
            reconstruct_state(&solvers, &omega_c, &utheta_mean, rho, 0.0, 0)
        }
        SeedSpec::File { path } => super::read_snapshot(path, &grid),
        SeedSpec::FamilyExact { gamma, beta } => {
            let eq = &config.equilibrium;
            let rho = eq.potential.f.map(|z| -gamma * z + beta).sub(&eq.rho_s);
            let omega = vec![Complex64::ZERO; nr * nm];
            reconstruct_state(&solvers, &omega, &vec![0.0; nr], rho, 0.0, 0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::BcSet;
    use crate::equilibrium::*;
    use crate::spectral::norms::l2_norm_sq_vec;
    use crate::spectral::AnnulusGrid;
    use crate::timestepper::{Dynamics, OutputConfig, Scheme};
    use std::sync::Arc;

    fn config(seed: SeedSpec) -> SimConfig {
        let g = AnnulusGrid::new(1.0, 2.0, 16, 16).unwrap();
        let pot = make_potential(PotentialKind::LogRadial { g: 1.0 }, &g).unwrap();
        let eq = make_equilibrium(pot, Arc::new(LinearProfile { gamma: 1.0, beta: 0.0 })).unwrap();
        SimConfig {
            params: PhysicsParams::new(0.1, 1.0, SlipCoefficient::Constant(0.0)).unwrap(),
            equilibrium: Arc::new(eq),
            dt: 1e-3,
            t_end: 0.0,
            scheme: Scheme::Cnab2,
            bc_set: BcSet::PaperMixed,
            dynamics: Dynamics::Nonlinear,
            seed,
            output: OutputConfig::default(),
            advection: true,
            buoyancy: true,
            cfl_limit: 0.8,
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_state() {
        let c = config(SeedSpec::Random { amplitude: 0.0, rng_seed: 1 });
        let s = init(&c).unwrap();
        assert!(s.velocity.max_abs() == 0.0);
        assert!(s.rho.max_abs() == 0.0);
    }

    #[test]
    fn random_seed_is_scaled_and_wall_compatible() {
        let c = config(SeedSpec::Random { amplitude: 1e-3, rng_seed: 42 });
        let s = init(&c).unwrap();
        assert!((l2_norm_sq_vec(&s.velocity).sqrt() - 1e-3).abs() < 1e-9);
        assert!((l2_norm(&s.rho) - 1e-3).abs() < 1e-9);
        assert!(s.velocity.wall_flux() < 1e-12);
        let div = crate::spectral::ops::divergence(&s.velocity);
        assert!(l2_norm(&div) < 1e-9);
    }

    #[test]
    fn eigenmode_seed_requires_unstable() {
        let c = config(SeedSpec::Eigenmode { amplitude: 1e-6, modes: vec![1, 2, 3] });
        assert!(matches!(init(&c), Err(Error::Seed(_))));
    }

    #[test]
    fn eigenmode_seed_amplitude_scaling() {
        let g = AnnulusGrid::new(1.0, 2.0, 20, 16).unwrap();
        let pot = make_potential(PotentialKind::LogRadial { g: 1.0 }, &g).unwrap();
        let eq = make_equilibrium(pot, Arc::new(ExpProfile { rate: 1.0 })).unwrap();
        let mut c = config(SeedSpec::Eigenmode { amplitude: 1e-6, modes: (1..=4).collect() });
        c.equilibrium = Arc::new(eq);
        let s = init(&c).unwrap();
        // J(u) = 1 normalization means ||u0|| = amplitude exactly.
        assert!(
            (l2_norm_sq_vec(&s.velocity).sqrt() - 1e-6).abs() < 1e-9,
            "u0 norm {}",
            l2_norm_sq_vec(&s.velocity).sqrt()
        );
    }

    #[test]
    fn family_exact_seed_matches_offset() {
        let c = config(SeedSpec::FamilyExact { gamma: 2.0, beta: 0.5 });
        let s = init(&c).unwrap();
        let eq = &c.equilibrium;
        // rho + rho_s = -2 f + 0.5.
        let total = s.rho.add(&eq.rho_s);
        let expect = eq.potential.f.map(|z| -2.0 * z + 0.5);
        assert!(l2_norm(&total.sub(&expect)) < 1e-12);
        assert!(s.velocity.max_abs() == 0.0);
    }

    #[test]
    fn file_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(SeedSpec::Random { amplitude: 1e-2, rng_seed: 7 });
        let s = init(&c).unwrap();
        super::super::write_snapshot(&s, dir.path()).unwrap();
        let c2 = config(SeedSpec::File { path: dir.path().to_path_buf() });
        let s2 = init(&c2).unwrap();
        assert_eq!(s.omega.values, s2.omega.values);
        assert_eq!(s.rho.values, s2.rho.values);
        assert_eq!(s.velocity.u_r.values, s2.velocity.u_r.values);
        assert_eq!(s.velocity.u_theta.values, s2.velocity.u_theta.values);
    }
}
