//! Gravitational potentials, hydrostatic equilibria, the scalar field h with
//! grad rho_s = h grad f, and the linear-stability classification.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::norms::{h1_norm, l2_norm, l2_norm_vec, linf_norm};
use crate::spectral::ops::{dx, dy, laplacian};
use crate::spectral::{AnnulusGrid, ScalarField, VectorField};

/// Slip coefficient on the inner wall, constant or sampled per theta node.
#[derive(Clone, Debug)]
pub enum SlipCoefficient {
    Constant(f64),
    PerNode(Vec<f64>),
}

impl SlipCoefficient {
    pub fn value(&self, k: usize) -> f64 {
        match self {
            SlipCoefficient::Constant(c) => *c,
            SlipCoefficient::PerNode(v) => v[k],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, SlipCoefficient::Constant(_))
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            SlipCoefficient::Constant(c) => Some(*c),
            SlipCoefficient::PerNode(_) => None,
        }
    }

    fn min_value(&self) -> f64 {
        match self {
            SlipCoefficient::Constant(c) => *c,
            SlipCoefficient::PerNode(v) => v.iter().fold(f64::INFINITY, |a, &b| a.min(b)),
        }
    }
}

/// Viscosity, reference density and the Navier-slip coefficient.
#[derive(Clone, Debug)]
pub struct PhysicsParams {
    pub nu: f64,
    pub rho_star: f64,
    pub alpha: SlipCoefficient,
}

impl PhysicsParams {
    pub fn new(nu: f64, rho_star: f64, alpha: SlipCoefficient) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::Validation { key: "nu".into(), message: format!("must be > 0, got {nu}") });
        }
        if !(rho_star > 0.0) {
            return Err(Error::Validation {
                key: "rho_star".into(),
                message: format!("must be > 0, got {rho_star}"),
            });
        }
        Ok(Self { nu, rho_star, alpha })
    }

    /// The steady-state lemma and the energy identities require
    /// nu/a + alpha >= 0 pointwise on the inner wall.
    pub fn validate_on(&self, grid: &AnnulusGrid) -> Result<()> {
        let min = self.nu / grid.a + self.alpha.min_value();
        if min < 0.0 {
            return Err(Error::Validation {
                key: "alpha".into(),
                message: format!("nu/a + alpha = {min:.3e} < 0 on r = a"),
            });
        }
        Ok(())
    }
}

/// Potential kinds. All but `RadialLinear` are harmonic in the annulus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PotentialKind {
    /// f = g ln r; gravity points inward along -r.
    LogRadial { g: f64 },
    /// f = g y; the classical uniform vertical gravity.
    UniformVertical { g: f64 },
    /// f = c0 ln r + sum_m r^m (a_m cos m theta + b_m sin m theta).
    HarmonicSeries { c0: f64, terms: Vec<(usize, f64, f64)> },
    /// f = g r; not harmonic, admitted only by the linearized solver.
    RadialLinear { g: f64 },
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialKind::LogRadial { g } => write!(f, "log_radial(g={g})"),
            PotentialKind::UniformVertical { g } => write!(f, "uniform_vertical(g={g})"),
            PotentialKind::HarmonicSeries { c0, terms } => {
                write!(f, "harmonic_series(c0={c0}, {} terms)", terms.len())
            }
            PotentialKind::RadialLinear { g } => write!(f, "radial_linear(g={g})"),
        }
    }
}

/// A gravitational potential evaluated on a grid, with its exact gradient.
#[derive(Clone, Debug)]
pub struct Potential {
    pub kind: PotentialKind,
    pub f: ScalarField,
    /// grad f in polar components, evaluated analytically.
    pub gradf: VectorField,
    pub non_harmonic: bool,
    /// ||Delta f||_L2 measured spectrally at construction.
    pub harmonicity_residual: f64,
}

impl Potential {
    /// True when f depends on r only, which lets stability forms decouple
    /// over azimuthal modes.
    pub fn is_radial(&self) -> bool {
        matches!(self.kind, PotentialKind::LogRadial { .. } | PotentialKind::RadialLinear { .. })
    }

    /// df/dr profile for radial potentials.
    pub fn radial_slope(&self, r: f64) -> Option<f64> {
        match self.kind {
            PotentialKind::LogRadial { g } => Some(g / r),
            PotentialKind::RadialLinear { g } => Some(g),
            _ => None,
        }
    }

    pub fn grid(&self) -> &Arc<AnnulusGrid> {
        &self.f.grid
    }
}

/// Evaluate a potential on the grid. Harmonic kinds must pass the residual
/// bound ||Delta f||_L2 <= 1e-8 (1 + ||f||_H1); `RadialLinear` is exempt and
/// flagged `non_harmonic`.
pub fn make_potential(kind: PotentialKind, grid: &Arc<AnnulusGrid>) -> Result<Potential> {
    for term in kind_terms(&kind) {
        if !term.is_finite() {
            return Err(Error::Arg("potential coefficients must be finite".into()));
        }
    }
    let f = evaluate_kind(&kind, grid);
    let gradf = match &kind {
        PotentialKind::LogRadial { g } => {
            let g = *g;
            VectorField::new(ScalarField::from_fn(grid, |r, _| g / r), ScalarField::zeros(grid))
        }
        PotentialKind::UniformVertical { g } => {
            let g = *g;
            VectorField::new(
                ScalarField::from_fn(grid, |_, t| g * t.sin()),
                ScalarField::from_fn(grid, |_, t| g * t.cos()),
            )
        }
        PotentialKind::HarmonicSeries { c0, terms } => {
            let c0 = *c0;
            let terms = terms.clone();
            let slope_r = ScalarField::from_fn(grid, |r, t| {
                let mut v = c0 / r;
                for &(m, am, bm) in &terms {
                    let mf = m as f64;
                    v += mf * r.powf(mf - 1.0) * (am * (mf * t).cos() + bm * (mf * t).sin());
                }
                v
            });
            let slope_t = ScalarField::from_fn(grid, |r, t| {
                let mut v = 0.0;
                for &(m, am, bm) in &terms {
                    let mf = m as f64;
                    v += mf * r.powf(mf - 1.0) * (-am * (mf * t).sin() + bm * (mf * t).cos());
                }
                v
            });
            VectorField::new(slope_r, slope_t)
        }
        PotentialKind::RadialLinear { g } => {
            VectorField::new(ScalarField::constant(grid, *g), ScalarField::zeros(grid))
        }
    };

    // Certify harmonicity on a probe grid fine enough that truncation of the
    // analytic kind is negligible; the run grid may be as coarse as tests allow.
    let non_harmonic = matches!(kind, PotentialKind::RadialLinear { .. });
    let residual = {
        let max_m = match &kind {
            PotentialKind::HarmonicSeries { terms, .. } => {
                terms.iter().map(|&(m, _, _)| m).max().unwrap_or(0)
            }
            PotentialKind::UniformVertical { .. } => 1,
            _ => 0,
        };
        let probe_nr = (2 * grid.nr - 1).max(33).max(max_m + 4);
        let mut probe_nt = grid.ntheta.max(2 * max_m + 4);
        if probe_nt % 2 != 0 {
            probe_nt += 1;
        }
        let probe = AnnulusGrid::new(grid.a, grid.b, probe_nr, probe_nt)?;
        l2_norm(&laplacian(&evaluate_kind(&kind, &probe)))
    };
    if !non_harmonic {
        let bound = 1e-8 * (1.0 + h1_norm(&f));
        if residual > bound {
            return Err(Error::Harmonicity { residual, bound });
        }
    }
    Ok(Potential { kind, f, gradf, non_harmonic, harmonicity_residual: residual })
}

fn evaluate_kind(kind: &PotentialKind, grid: &Arc<AnnulusGrid>) -> ScalarField {
    match kind {
        PotentialKind::LogRadial { g } => {
            let g = *g;
            ScalarField::from_fn(grid, move |r, _| g * r.ln())
        }
        PotentialKind::UniformVertical { g } => {
            let g = *g;
            ScalarField::from_fn(grid, move |r, t| g * r * t.sin())
        }
        PotentialKind::HarmonicSeries { c0, terms } => {
            let c0 = *c0;
            let terms = terms.clone();
            ScalarField::from_fn(grid, move |r, t| {
                let mut v = c0 * r.ln();
                for &(m, am, bm) in &terms {
                    let mf = m as f64;
                    v += r.powf(mf) * (am * (mf * t).cos() + bm * (mf * t).sin());
                }
                v
            })
        }
        PotentialKind::RadialLinear { g } => {
            let g = *g;
            ScalarField::from_fn(grid, move |r, _| g * r)
        }
    }
}

fn kind_terms(kind: &PotentialKind) -> Vec<f64> {
    match kind {
        PotentialKind::LogRadial { g }
        | PotentialKind::UniformVertical { g }
        | PotentialKind::RadialLinear { g } => vec![*g],
        PotentialKind::HarmonicSeries { c0, terms } => {
            let mut v = vec![*c0];
            for &(_, am, bm) in terms {
                v.push(am);
                v.push(bm);
            }
            v
        }
    }
}

/// Density as a function of the potential value, with derivative.
pub trait Profile: Send + Sync {
    fn value(&self, z: f64) -> f64;
    fn derivative(&self, z: f64) -> f64;
    fn describe(&self) -> String;
}

/// R(z) = -gamma z + beta, the linear steady family.
#[derive(Clone, Copy, Debug)]
pub struct LinearProfile {
    pub gamma: f64,
    pub beta: f64,
}

impl Profile for LinearProfile {
    fn value(&self, z: f64) -> f64 {
        -self.gamma * z + self.beta
    }
    fn derivative(&self, _z: f64) -> f64 {
        -self.gamma
    }
    fn describe(&self) -> String {
        format!("linear(gamma={}, beta={})", self.gamma, self.beta)
    }
}

/// R(z) = exp(rate z).
#[derive(Clone, Copy, Debug)]
pub struct ExpProfile {
    pub rate: f64,
}

impl Profile for ExpProfile {
    fn value(&self, z: f64) -> f64 {
        (self.rate * z).exp()
    }
    fn derivative(&self, z: f64) -> f64 {
        self.rate * (self.rate * z).exp()
    }
    fn describe(&self) -> String {
        format!("exp(rate={})", self.rate)
    }
}

/// R(z) = z.
#[derive(Clone, Copy, Debug)]
pub struct IdentityProfile;

impl Profile for IdentityProfile {
    fn value(&self, z: f64) -> f64 {
        z
    }
    fn derivative(&self, _z: f64) -> f64 {
        1.0
    }
    fn describe(&self) -> String {
        "identity".into()
    }
}

/// Arbitrary profile from closures, mainly for tests.
pub struct FnProfile<V, D>
where
    V: Fn(f64) -> f64 + Send + Sync,
    D: Fn(f64) -> f64 + Send + Sync,
{
    pub value_fn: V,
    pub derivative_fn: D,
    pub name: String,
}

impl<V, D> Profile for FnProfile<V, D>
where
    V: Fn(f64) -> f64 + Send + Sync,
    D: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, z: f64) -> f64 {
        (self.value_fn)(z)
    }
    fn derivative(&self, z: f64) -> f64 {
        (self.derivative_fn)(z)
    }
    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// Stability classification of an equilibrium per the sign of h.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Stability {
    /// max h < -tol; carries h0 = max h.
    Stable { h0: f64 },
    /// h > tol somewhere; carries the maximizing node.
    Unstable { r: f64, theta: f64, h_max: f64 },
    /// h <= 0 with near-zero values; neither hypothesis applies sharply.
    Indeterminate,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stability::Stable { h0 } => write!(f, "Stable(h0={h0})"),
            Stability::Unstable { r, theta, h_max } => {
                write!(f, "Unstable(h={h_max} at r={r}, theta={theta})")
            }
            Stability::Indeterminate => write!(f, "Indeterminate"),
        }
    }
}

/// A hydrostatic equilibrium rho_s = R o f, represented as a composition so
/// that grad rho_s = h grad f holds identically with h = R' o f.
#[derive(Clone)]
pub struct HydrostaticEquilibrium {
    pub potential: Potential,
    pub profile: Arc<dyn Profile>,
    pub rho_s: ScalarField,
    pub h: ScalarField,
    pub stability: Stability,
}

impl HydrostaticEquilibrium {
    pub fn grid(&self) -> &Arc<AnnulusGrid> {
        self.potential.grid()
    }

    /// Discrete residuals of the two construction invariants:
    /// (parallelism of grad rho_s and grad f, ||grad rho_s - h grad f||).
    pub fn residuals(&self) -> (f64, f64) {
        let parallel = parallel_residual(&self.rho_s, &self.potential);
        let grad_rho = crate::spectral::ops::gradient(&self.rho_s);
        let diff_r = grad_rho.u_r.sub(&self.h.mul(&self.potential.gradf.u_r));
        let diff_t = grad_rho.u_theta.sub(&self.h.mul(&self.potential.gradf.u_theta));
        let chain = (crate::spectral::norms::l2_norm_sq(&diff_r)
            + crate::spectral::norms::l2_norm_sq(&diff_t))
        .sqrt();
        (parallel, chain)
    }
}

impl fmt::Debug for HydrostaticEquilibrium {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HydrostaticEquilibrium")
            .field("potential", &self.potential.kind)
            .field("profile", &self.profile.describe())
            .field("stability", &self.stability)
            .finish()
    }
}

/// Compose rho_s = R o f and h = R' o f; classify with the default tolerance.
pub fn make_equilibrium(
    potential: Potential,
    profile: Arc<dyn Profile>,
) -> Result<HydrostaticEquilibrium> {
    let rho_s = potential.f.map(|z| profile.value(z));
    let h = potential.f.map(|z| profile.derivative(z));
    if rho_s.values.iter().chain(h.values.iter()).any(|v| !v.is_finite()) {
        let min = potential.f.values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let max = potential.f.values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        return Err(Error::Range {
            min,
            max,
            reason: format!("profile {} produced non-finite values", profile.describe()),
        });
    }
    let mut eq = HydrostaticEquilibrium {
        potential,
        profile,
        rho_s,
        h,
        stability: Stability::Indeterminate,
    };
    eq.stability = classify(&eq, default_tolerance(&eq.h));
    Ok(eq)
}

/// Default classification tolerance: separates sign changes from roundoff.
pub fn default_tolerance(h: &ScalarField) -> f64 {
    1e-10 * (1.0 + linf_norm(h))
}

/// Theorem-level dichotomy: h > tol somewhere means Rayleigh-Taylor unstable,
/// max h < -tol means linearly stable, anything else is indeterminate.
pub fn classify(eq: &HydrostaticEquilibrium, tol: f64) -> Stability {
    let g = eq.grid();
    let mut max_h = f64::NEG_INFINITY;
    let mut arg = (0usize, 0usize);
    for j in 0..g.nr {
        for k in 0..g.ntheta {
            let v = eq.h.at(j, k);
            if v > max_h {
                max_h = v;
                arg = (j, k);
            }
        }
    }
    if max_h > tol {
        Stability::Unstable { r: g.r_nodes[arg.0], theta: g.theta_nodes[arg.1], h_max: max_h }
    } else if max_h < -tol {
        Stability::Stable { h0: max_h }
    } else {
        Stability::Indeterminate
    }
}

/// || d_y rho d_x f - d_x rho d_y f ||_L2 with Cartesian derivatives
/// assembled from the polar ones; zero exactly when rho solves the
/// steady-state constraint for this potential.
pub fn parallel_residual(rho_s: &ScalarField, potential: &Potential) -> f64 {
    let (fx, fy) = potential.gradf.cartesian();
    let rx = dx(rho_s);
    let ry = dy(rho_s);
    let mismatch = ry.mul(&fx).sub(&rx.mul(&fy));
    l2_norm(&mismatch)
}

/// Hydrostatic momentum residual || grad p + rho_total grad f || for a given
/// pressure candidate; zero for exact hydrostatic balance.
pub fn hydrostatic_residual(p: &ScalarField, rho_total: &ScalarField, potential: &Potential) -> f64 {
    let grad_p = crate::spectral::ops::gradient(p);
    let res_r = grad_p.u_r.add(&rho_total.mul(&potential.gradf.u_r));
    let res_t = grad_p.u_theta.add(&rho_total.mul(&potential.gradf.u_theta));
    l2_norm_vec(&VectorField::new(res_r, res_t))
}

/// Pressure of the linear steady family per the closed form
/// (gamma f - beta)^2 / 2; kept for comparison against the recovered
/// pressure, which solves grad p = -rho_s grad f directly.
pub fn remark_family_pressure(potential: &Potential, gamma: f64, beta: f64) -> ScalarField {
    potential.f.map(|z| 0.5 * (gamma * z - beta) * (gamma * z - beta))
}
