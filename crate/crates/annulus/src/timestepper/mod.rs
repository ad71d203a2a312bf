//! IMEX time integration of the nonlinear perturbation system in vorticity
//! form and of the linearized systems. Diffusion is implicit per azimuthal
//! mode; advection, buoyancy and the density transport are explicit with
//! 2/3-rule dealiasing. The mean tangential flow is evolved in velocity form
//! with Robin wall rows, which carries the circulation exactly.

mod seed;
mod step;

pub use seed::SeedSpec;
pub use step::{step_once, Stepper};

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;

use crate::diagnostics::{DiagnosticsRow, Sampler, TimeSeries};
use crate::elliptic::{BcSet, BoundaryRow, EllipticSolvers};
use crate::equilibrium::{HydrostaticEquilibrium, PhysicsParams, Stability};
use crate::error::{Error, Result};
use crate::spectral::snapshot::{self, SnapshotMeta};
use crate::spectral::{AnnulusGrid, ScalarField, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Cnab2,
    ImexBdf2,
}

/// Linearized-system variants: the general linearization about the
/// equilibrium, and the polar constant-h system with f = g r.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinearVariant {
    General,
    PolarFGr { h0: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dynamics {
    Nonlinear,
    Linear(LinearVariant),
}

#[derive(Clone, Debug)]
pub struct OutputConfig {
    /// Steps between diagnostics rows.
    pub cadence: usize,
    /// Steps between field snapshots; 0 disables periodic snapshots
    /// (initial and final states are always written when a directory is given).
    pub snapshot_every: usize,
    /// (gamma, beta) used for the Lyapunov column.
    pub lyap_gamma: f64,
    pub lyap_beta: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { cadence: 100, snapshot_every: 0, lyap_gamma: 1.0, lyap_beta: 0.0 }
    }
}

#[derive(Clone)]
pub struct SimConfig {
    pub params: PhysicsParams,
    pub equilibrium: Arc<HydrostaticEquilibrium>,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub bc_set: BcSet,
    pub dynamics: Dynamics,
    pub seed: SeedSpec,
    pub output: OutputConfig,
    /// Testing switches; production runs keep both on.
    pub advection: bool,
    pub buoyancy: bool,
    pub cfl_limit: f64,
}

impl SimConfig {
    pub fn grid(&self) -> &Arc<AnnulusGrid> {
        self.equilibrium.grid()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Validation { key: "dt".into(), message: "must be > 0".into() });
        }
        if self.t_end < 0.0 {
            return Err(Error::Validation { key: "t_end".into(), message: "must be >= 0".into() });
        }
        self.params.validate_on(self.grid())?;
        if self.bc_set == BcSet::PaperMixed && !self.params.alpha.is_constant() {
            return Err(Error::Variant(
                "time stepping under the mixed conditions requires a theta-independent alpha"
                    .into(),
            ));
        }
        match self.dynamics {
            Dynamics::Nonlinear => {
                if self.equilibrium.potential.non_harmonic {
                    return Err(Error::Variant(
                        "nonlinear evolution rejects non-harmonic potentials; only the linearized solver admits f = g r".into(),
                    ));
                }
            }
            Dynamics::Linear(LinearVariant::PolarFGr { h0 }) => {
                use crate::equilibrium::PotentialKind;
                if !matches!(self.equilibrium.potential.kind, PotentialKind::RadialLinear { .. }) {
                    return Err(Error::Variant("polar variant requires f = g r".into()));
                }
                if !(h0 < 0.0) {
                    return Err(Error::Variant("polar variant requires h0 < 0".into()));
                }
                let h = &self.equilibrium.h;
                let dev = h.values.iter().map(|v| (v - h0).abs()).fold(0.0, f64::max);
                if dev > 1e-10 * (1.0 + h0.abs()) {
                    return Err(Error::Variant("polar variant requires h constant".into()));
                }
                if self.bc_set != BcSet::BothStressFree {
                    return Err(Error::Variant(
                        "polar variant runs under stress-free conditions on both walls".into(),
                    ));
                }
            }
            Dynamics::Linear(LinearVariant::General) => {}
        }
        Ok(())
    }
}

/// Perturbation state: vorticity, density, the mean tangential flow, and the
/// cached streamfunction/velocity consistent with them.
#[derive(Clone)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    pub omega: ScalarField,
    pub rho: ScalarField,
    /// Mean (m = 0) tangential velocity profile; carries the circulation.
    pub utheta_mean: Vec<f64>,
    pub psi: ScalarField,
    pub velocity: VectorField,
}

impl SimState {
    /// Wall-condition residuals (inner, outer) of the current state.
    pub fn bc_residuals(&self, params: &PhysicsParams, bc_set: BcSet) -> (f64, f64) {
        let g = &self.omega.grid;
        let nr = g.nr;
        let mut res_b: f64 = 0.0;
        for k in 0..g.ntheta {
            res_b = res_b.max(self.omega.at(nr - 1, k).abs());
        }
        let mut res_a: f64 = 0.0;
        match bc_set {
            BcSet::PaperMixed => {
                for k in 0..g.ntheta {
                    let phi = 2.0 / g.a + params.alpha.value(k) / params.nu;
                    res_a = res_a
                        .max((self.omega.at(0, k) - phi * self.velocity.u_theta.at(0, k)).abs());
                }
            }
            BcSet::BothStressFree => {
                for k in 0..g.ntheta {
                    res_a = res_a.max(self.omega.at(0, k).abs());
                }
            }
        }
        (res_a, res_b)
    }

    /// Advective CFL number dt max|u| / min spacing.
    pub fn cfl(&self, dt: f64) -> f64 {
        dt * self.velocity.max_abs() / self.omega.grid.min_spacing()
    }
}

/// Rebuild (psi, u, omega-mean-sync) from per-mode vorticity coefficients and
/// the mean tangential profile. The m >= 1 psi modes are solved with zero
/// wall values; the mean streamfunction integrates u_theta with psi(b) = 0.
pub(crate) fn reconstruct_state(
    solvers: &EllipticSolvers,
    omega_modes: &[Complex64],
    utheta_mean: &[f64],
    rho: ScalarField,
    t: f64,
    step: u64,
) -> Result<SimState> {
    let grid = solvers.grid.clone();
    let nr = grid.nr;
    let nm = grid.nmodes();
    let mut omega_c = omega_modes.to_vec();
    let mut psi_c = vec![Complex64::ZERO; nr * nm];
    let mut ur_c = vec![Complex64::ZERO; nr * nm];
    let mut ut_c = vec![Complex64::ZERO; nr * nm];

    for m in 1..nm - 1 {
        let w: Vec<Complex64> = (0..nr).map(|j| omega_c[j * nm + m]).collect();
        let mut rhs = w.clone();
        rhs[0] = Complex64::ZERO;
        rhs[nr - 1] = Complex64::ZERO;
        let psi_m = solvers.solve_radial_complex(
            m,
            0.0,
            1.0,
            BoundaryRow::DIRICHLET,
            BoundaryRow::DIRICHLET,
            &rhs,
        )?;
        for j in 0..nr {
            let mut d = Complex64::ZERO;
            for l in 0..nr {
                d += grid.dmat[(j, l)] * psi_m[l];
            }
            psi_c[j * nm + m] = psi_m[j];
            ur_c[j * nm + m] = -Complex64::new(0.0, m as f64) / grid.r_nodes[j] * psi_m[j];
            ut_c[j * nm + m] = d;
        }
    }

    // Mean vorticity derived from the mean flow.
    let omega_mean: Vec<f64> = {
        let r_ut: Vec<f64> = (0..nr).map(|j| grid.r_nodes[j] * utheta_mean[j]).collect();
        (0..nr)
            .map(|i| {
                let d: f64 = (0..nr).map(|j| grid.dmat[(i, j)] * r_ut[j]).sum();
                d / grid.r_nodes[i]
            })
            .collect()
    };
    for j in 0..nr {
        omega_c[j * nm] = Complex64::new(omega_mean[j], 0.0);
        ut_c[j * nm] = Complex64::new(utheta_mean[j], 0.0);
    }
    // Mean streamfunction: L_0 psi = omega_mean, d_r psi(a) = u_theta(a),
    // psi(b) = 0.
    let mut rhs0 = omega_mean.clone();
    rhs0[0] = utheta_mean[0];
    rhs0[nr - 1] = 0.0;
    let psi0 = solvers.solve_radial(0, 0.0, 1.0, BoundaryRow::NEUMANN, BoundaryRow::DIRICHLET, &rhs0)?;
    for j in 0..nr {
        psi_c[j * nm] = Complex64::new(psi0[j], 0.0);
    }

    let omega = ScalarField::from_coeffs(&grid, &omega_c);
    let psi = ScalarField::from_coeffs(&grid, &psi_c);
    let mut velocity = VectorField::new(
        ScalarField::from_coeffs(&grid, &ur_c),
        ScalarField::from_coeffs(&grid, &ut_c),
    );
    velocity.wall_compatible = true;
    Ok(SimState { t, step, omega, rho, utheta_mean: utheta_mean.to_vec(), psi, velocity })
}

/// Write the state as a set of field snapshots under `dir`.
pub fn write_snapshot(state: &SimState, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let g = &state.omega.grid;
    let meta = |name: &str| SnapshotMeta {
        field: name.into(),
        time: state.t,
        step: state.step,
        nr: g.nr as u32,
        ntheta: g.ntheta as u32,
        a: g.a,
        b: g.b,
    };
    snapshot::write_field(&dir.join("omega.annf"), &state.omega, &meta("omega"))?;
    snapshot::write_field(&dir.join("rho.annf"), &state.rho, &meta("rho"))?;
    snapshot::write_field(&dir.join("ur.annf"), &state.velocity.u_r, &meta("ur"))?;
    snapshot::write_field(&dir.join("utheta.annf"), &state.velocity.u_theta, &meta("utheta"))?;
    Ok(())
}

/// Read a state back from a snapshot directory, bit-exactly for the stored
/// fields; the streamfunction is re-derived.
pub fn read_snapshot(dir: &Path, grid: &Arc<AnnulusGrid>) -> Result<SimState> {
    let (omega, meta) = snapshot::read_field_on(&dir.join("omega.annf"), grid)?;
    let (rho, _) = snapshot::read_field_on(&dir.join("rho.annf"), grid)?;
    let (u_r, _) = snapshot::read_field_on(&dir.join("ur.annf"), grid)?;
    let (u_theta, _) = snapshot::read_field_on(&dir.join("utheta.annf"), grid)?;
    let nm = grid.nmodes();
    let ut_c = u_theta.coeffs();
    let utheta_mean: Vec<f64> = (0..grid.nr).map(|j| ut_c[j * nm].re).collect();
    let solvers = EllipticSolvers::new(grid);
    // psi for the cached state; velocity taken from the files to keep the
    // round trip bit-exact.
    let mut st = reconstruct_state(&solvers, &omega.coeffs(), &utheta_mean, rho, meta.time, meta.step)?;
    st.omega = omega;
    let mut velocity = VectorField::new(u_r, u_theta);
    velocity.wall_compatible = true;
    st.velocity = velocity;
    Ok(st)
}

pub struct RunOutput {
    pub final_state: SimState,
    pub series: TimeSeries,
    /// Paths of snapshot directories written during the run.
    pub snapshots: Vec<PathBuf>,
}

/// Advance to t_end, sampling diagnostics at the configured cadence and
/// writing snapshots when `out_dir` is given. Deterministic for a fixed seed.
pub fn run(
    config: &SimConfig,
    out_dir: Option<&Path>,
    mut hook: Option<&mut dyn FnMut(&SimState, &DiagnosticsRow)>,
) -> Result<RunOutput> {
    config.validate()?;
    let mut stepper = Stepper::new(config)?;
    let mut state = seed::init(config)?;
    let sampler = Sampler::new(
        &config.equilibrium,
        &config.params,
        config.output.lyap_gamma,
        config.output.lyap_beta,
        config.dt,
    );
    let mut rows: Vec<DiagnosticsRow> = Vec::new();
    let mut snapshots = Vec::new();

    let sample =
        |state: &SimState, stepper: &Stepper, rows: &mut Vec<DiagnosticsRow>, hook: &mut Option<&mut dyn FnMut(&SimState, &DiagnosticsRow)>| -> Result<()> {
            let u_t = stepper.u_t(state);
            let inputs = crate::diagnostics::SampleInputs {
                t: state.t,
                velocity: &state.velocity,
                rho: &state.rho,
                omega: &state.omega,
                u_t: u_t.as_ref(),
                cfl: state.cfl(config.dt),
                diss_integral: stepper.diss_integral(),
                bc_res: state.bc_residuals(&config.params, config.bc_set),
            };
            let row = sampler.sample(
                &config.equilibrium,
                &config.params,
                stepper.solvers(),
                &inputs,
                rows,
            )?;
            if let Some(h) = hook.as_mut() {
                h(state, &row);
            }
            rows.push(row);
            Ok(())
        };

    sample(&state, &stepper, &mut rows, &mut hook)?;
    if let Some(dir) = out_dir {
        let snap = dir.join("snapshots").join(format!("step_{:08}", state.step));
        write_snapshot(&state, &snap)?;
        snapshots.push(snap);
    }

    // t_end is absolute; file-seeded runs continue from the snapshot time.
    let remaining = ((config.t_end - state.t) / config.dt).round().max(0.0) as u64;
    let target_step = state.step + remaining;
    while state.step < target_step {
        stepper.advance(&mut state)?;
        let at_end = state.step >= target_step;
        if state.step % config.output.cadence as u64 == 0 || at_end {
            sample(&state, &stepper, &mut rows, &mut hook)?;
        }
        if let Some(dir) = out_dir {
            let periodic = config.output.snapshot_every > 0
                && state.step % config.output.snapshot_every as u64 == 0;
            if periodic || at_end {
                let snap = dir.join("snapshots").join(format!("step_{:08}", state.step));
                write_snapshot(&state, &snap)?;
                snapshots.push(snap);
            }
        }
    }

    Ok(RunOutput {
        final_state: state,
        series: TimeSeries { meta: sampler.meta(), rows },
        snapshots,
    })
}

/// Classification guard for eigenmode seeding.
pub(crate) fn require_unstable(eq: &HydrostaticEquilibrium) -> Result<()> {
    match eq.stability {
        Stability::Unstable { .. } => Ok(()),
        ref other => Err(Error::Seed(format!(
            "eigenmode seed requires an unstable equilibrium, got {other}"
        ))),
    }
}
