//! The parametrized infimum alpha(s), its fixed point s* with
//! s*^2 = -alpha(s*), and growth-mode extraction.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::equilibrium::{HydrostaticEquilibrium, PhysicsParams, Stability};
use crate::error::{Error, Result};
use crate::spectral::{ScalarField, VectorField};

use super::forms::{assemble_forms, assemble_forms_coupled, is_axisymmetric, FormSet};

/// Lowest eigenpair of the symmetric pencil (s nu K1 - K2/rho*, M).
struct PencilEig {
    alpha: f64,
    vector: DVector<f64>,
    /// Eigenvalues within 1e-8 scale of the minimum.
    multiplicity: usize,
}

fn min_generalized_eig(forms: &FormSet, s: f64) -> Result<PencilEig> {
    let n = forms.dim();
    let mut c = forms.stiffness.clone() * (s * forms.params.nu);
    c -= forms.buoyancy.clone() / forms.params.rho_star;
    let chol = Cholesky::new(forms.mass.clone())
        .ok_or_else(|| Error::EigenFailure("mass matrix not positive definite".into()))?;
    let l = chol.l();
    // A = L^-1 C L^-T, symmetric.
    let y = l.solve_lower_triangular(&c).ok_or_else(|| {
        Error::EigenFailure("triangular solve failed in pencil reduction".into())
    })?;
    let yt = y.transpose();
    let a = l
        .solve_lower_triangular(&yt)
        .ok_or_else(|| Error::EigenFailure("triangular solve failed in pencil reduction".into()))?
        .transpose();
    let a_sym = (a.clone() + a.transpose()) * 0.5;
    let scale = a_sym.norm();
    let eig = nalgebra::SymmetricEigen::new(a_sym);
    let mut min_idx = 0;
    let mut min_val = f64::INFINITY;
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v < min_val {
            min_val = v;
            min_idx = i;
        }
    }
    let multiplicity = eig
        .eigenvalues
        .iter()
        .filter(|&&v| (v - min_val).abs() <= 1e-8 * (1.0 + scale))
        .count();
    let z = eig.eigenvectors.column(min_idx).into_owned();
    // x = L^-T z, normalized so x^T M x = 1.
    let x = l
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::EigenFailure("back substitution failed".into()))?;
    let norm = x.dot(&(&forms.mass * &x)).max(0.0).sqrt();
    let x = if norm > 0.0 { x / norm } else { x };
    let _ = n;
    Ok(PencilEig { alpha: min_val, vector: x, multiplicity })
}

/// alpha(s) = inf over the constrained space of s nu E1 - E2/rho* at J = 1.
pub fn alpha_of_s(forms: &FormSet, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Arg(format!("alpha(s) requires s > 0, got {s}")));
    }
    Ok(min_generalized_eig(forms, s)?.alpha)
}

/// Constants of the upper-bound line alpha(s) <= -c1 + s c2 obtained from
/// a fixed trial vector with E2 > 0 (unit J).
pub fn upper_bound_line(forms: &FormSet) -> Option<(f64, f64)> {
    // Use the minimizer of -K2/M as the trial vector.
    let trial = min_generalized_eig_for(&(forms.buoyancy.clone() * -1.0), forms).ok()?;
    let x = trial.vector;
    let e2 = x.dot(&(&forms.buoyancy * &x));
    if e2 <= 0.0 {
        return None;
    }
    let e1 = x.dot(&(&forms.stiffness * &x));
    Some((e2 / forms.params.rho_star, forms.params.nu * e1))
}

fn min_generalized_eig_for(c: &DMatrix<f64>, forms: &FormSet) -> Result<PencilEig> {
    let chol = Cholesky::new(forms.mass.clone())
        .ok_or_else(|| Error::EigenFailure("mass matrix not positive definite".into()))?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(c)
        .ok_or_else(|| Error::EigenFailure("triangular solve failed".into()))?;
    let yt = y.transpose();
    let a = l
        .solve_lower_triangular(&yt)
        .ok_or_else(|| Error::EigenFailure("triangular solve failed".into()))?
        .transpose();
    let a_sym = (a.clone() + a.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(a_sym);
    let mut min_idx = 0;
    let mut min_val = f64::INFINITY;
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v < min_val {
            min_val = v;
            min_idx = i;
        }
    }
    let z = eig.eigenvectors.column(min_idx).into_owned();
    let x = l
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::EigenFailure("back substitution failed".into()))?;
    let norm = x.dot(&(&forms.mass * &x)).max(0.0).sqrt();
    let x = if norm > 0.0 { x / norm } else { x };
    Ok(PencilEig { alpha: min_val, vector: x, multiplicity: 1 })
}

/// Outcome of the fixed-point search on one pencil.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FixedPoint {
    pub s_star: f64,
    /// |s*^2 + alpha(s*)|.
    pub defect: f64,
}

/// Find s* with s*^2 = -alpha(s*) by bisection on Phi(s) = -s^2 - alpha(s).
/// Returns None when alpha(s_lo) > 0: alpha is increasing, so no negative
/// infimum exists anywhere and the configuration is spectrally stable.
pub fn growth_rate(forms: &FormSet, bracket: (f64, f64)) -> Result<Option<FixedPoint>> {
    let (s_lo, mut s_hi) = bracket;
    if !(s_lo > 0.0) {
        return Err(Error::Arg("bracket must start at s_lo > 0".into()));
    }
    let alpha_lo = alpha_of_s(forms, s_lo)?;
    if alpha_lo >= 0.0 {
        return Ok(None);
    }
    let phi = |s: f64| -> Result<f64> { Ok(-s * s - alpha_of_s(forms, s)?) };
    let phi_lo = -s_lo * s_lo - alpha_lo;
    if phi_lo <= 0.0 {
        // alpha(s_lo) < 0 yet Phi <= 0 already: the root is below s_lo.
        return bisect(forms, 0.0, s_lo, phi_lo).map(Some);
    }
    let mut phi_hi = phi(s_hi)?;
    let mut expansions = 0;
    while phi_hi > 0.0 {
        expansions += 1;
        if expansions > 6 {
            return Err(Error::Bracket { lo: s_lo, hi: s_hi, alpha_lo });
        }
        s_hi *= 10.0;
        phi_hi = phi(s_hi)?;
    }
    bisect(forms, s_lo, s_hi, phi_lo).map(Some)
}

fn bisect(forms: &FormSet, mut lo: f64, mut hi: f64, mut phi_lo: f64) -> Result<FixedPoint> {
    // Phi(lo) > 0 > Phi(hi); bisection to machine-level interval.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let phi_mid = -mid * mid - alpha_of_s(forms, mid)?;
        if phi_mid > 0.0 {
            lo = mid;
            phi_lo = phi_mid;
        } else {
            hi = mid;
        }
    }
    let _ = phi_lo;
    let s_star = 0.5 * (lo + hi);
    let defect = (s_star * s_star + alpha_of_s(forms, s_star)?).abs();
    Ok(FixedPoint { s_star, defect })
}

/// Growth eigenmode at the fixed point, scaled to J(u) = 1, with the
/// eigen-density rho = -h (u . grad f) / s*.
pub struct EigenMode {
    pub psi: ScalarField,
    pub velocity: VectorField,
    pub rho: ScalarField,
    /// Number of pencil eigenvalues at the minimum within tolerance; 1 for a
    /// simple growth mode. The first eigenvector is returned regardless.
    pub multiplicity: usize,
}

pub fn eigenmode(
    forms: &FormSet,
    eq: &HydrostaticEquilibrium,
    s_star: f64,
) -> Result<EigenMode> {
    let pe = min_generalized_eig(forms, s_star)?;
    let velocity = forms.velocity(&pe.vector);
    let psi = forms.streamfunction(&pe.vector);
    let udf = velocity
        .u_r
        .mul(&eq.potential.gradf.u_r)
        .add(&velocity.u_theta.mul(&eq.potential.gradf.u_theta));
    let rho = eq.h.mul(&udf).scale(-1.0 / s_star);
    Ok(EigenMode { psi, velocity, rho, multiplicity: pe.multiplicity })
}

/// Sampled alpha(s) curve and fixed point of one pencil block.
#[derive(Clone, Debug, Serialize)]
pub struct ModeResult {
    pub mode: i64,
    pub alpha_curve: Vec<(f64, f64)>,
    pub s_star: Option<f64>,
    pub defect: Option<f64>,
}

/// Aggregated stability scan: per-mode curves, the dominant growth rate and
/// its eigenmode.
pub struct StabilityResult {
    pub per_mode: Vec<ModeResult>,
    pub lambda: Option<f64>,
    pub dominant_mode: Option<i64>,
    pub eigenmode: Option<EigenMode>,
    pub classification: Stability,
}

/// Default bracket for the bisection. The lower end probes the sign of
/// alpha near zero; the upper end starts at the root of the upper-bound
/// line when one exists.
pub fn default_bracket(forms: &FormSet) -> (f64, f64) {
    let s_lo = 1e-6;
    let s_hi = match upper_bound_line(forms) {
        Some((c1, c2)) if c2 > 0.0 => (c1 / c2).max(10.0 * s_lo),
        _ => 1.0,
    };
    (s_lo, s_hi)
}

/// Run the fixed-point search over the given azimuthal modes (axisymmetric
/// configurations) or over the coupled pencil, and aggregate.
pub fn full_spectrum_check(
    eq: &HydrostaticEquilibrium,
    params: &PhysicsParams,
    modes: &[usize],
) -> Result<StabilityResult> {
    if modes.is_empty() {
        return Err(Error::Arg("mode list must be nonempty".into()));
    }
    let mut per_mode = Vec::new();
    let mut best: Option<(f64, i64, FormSet)> = None;

    let mut handle = |forms: FormSet, key: i64| -> Result<()> {
        let bracket = default_bracket(&forms);
        let fp = growth_rate(&forms, bracket)?;
        let curve = sample_alpha_curve(&forms, bracket, fp.map(|f| f.s_star))?;
        per_mode.push(ModeResult {
            mode: key,
            alpha_curve: curve,
            s_star: fp.map(|f| f.s_star),
            defect: fp.map(|f| f.defect),
        });
        if let Some(f) = fp {
            let better = best.as_ref().map(|(l, _, _)| f.s_star > *l).unwrap_or(true);
            if better {
                best = Some((f.s_star, key, forms));
            }
        }
        Ok(())
    };

    if is_axisymmetric(eq, params) {
        for &m in modes {
            let forms = assemble_forms(eq, params, m)?;
            handle(forms, m as i64)?;
        }
    } else {
        let m_keep = *modes.iter().max().unwrap();
        let forms = assemble_forms_coupled(eq, params, m_keep)?;
        handle(forms, -1)?;
    }

    let (lambda, dominant_mode, mode_eig) = match best {
        Some((l, key, forms)) => {
            let em = eigenmode(&forms, eq, l)?;
            (Some(l), Some(key), Some(em))
        }
        None => (None, None, None),
    };

    if matches!(eq.stability, Stability::Stable { .. }) && lambda.is_some() {
        return Err(Error::EigenFailure(format!(
            "classified stable (h < 0) but found growth rate {}",
            lambda.unwrap()
        )));
    }

    Ok(StabilityResult {
        per_mode,
        lambda,
        dominant_mode,
        eigenmode: mode_eig,
        classification: eq.stability.clone(),
    })
}

fn sample_alpha_curve(
    forms: &FormSet,
    bracket: (f64, f64),
    s_star: Option<f64>,
) -> Result<Vec<(f64, f64)>> {
    let hi = s_star.map(|s| 2.0 * s).unwrap_or(bracket.1).max(bracket.0 * 10.0);
    let lo = bracket.0;
    let n = 20;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Log-spaced samples.
        let t = i as f64 / (n - 1) as f64;
        let s = lo * (hi / lo).powf(t);
        out.push((s, alpha_of_s(forms, s)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{
        make_equilibrium, make_potential, ExpProfile, LinearProfile, PotentialKind,
        SlipCoefficient,
    };
    use crate::spectral::norms::{l2_norm, l2_norm_sq_vec};
    use crate::spectral::AnnulusGrid;
    use std::sync::Arc;

    fn benchmark_unstable(nr: usize) -> (HydrostaticEquilibrium, PhysicsParams) {
        let g = AnnulusGrid::new(1.0, 2.0, nr, 16).unwrap();
        let pot = make_potential(PotentialKind::LogRadial { g: 1.0 }, &g).unwrap();
        let eq = make_equilibrium(pot, Arc::new(ExpProfile { rate: 1.0 })).unwrap();
        let p = PhysicsParams::new(0.1, 1.0, SlipCoefficient::Constant(0.0)).unwrap();
        (eq, p)
    }

    fn benchmark_stable(nr: usize) -> (HydrostaticEquilibrium, PhysicsParams) {
        let g = AnnulusGrid::new(1.0, 2.0, nr, 16).unwrap();
        let pot = make_potential(PotentialKind::LogRadial { g: 1.0 }, &g).unwrap();
        let eq = make_equilibrium(pot, Arc::new(LinearProfile { gamma: 1.0, beta: 0.0 })).unwrap();
        let p = PhysicsParams::new(0.1, 1.0, SlipCoefficient::Constant(0.0)).unwrap();
        (eq, p)
    }

    #[test]
    fn alpha_positive_for_stable_profiles() {
        let (eq, p) = benchmark_stable(16);
        for m in [0usize, 1, 2, 5] {
            let forms = assemble_forms(&eq, &p, m).unwrap();
            for s in [0.01, 0.1, 1.0, 10.0] {
                assert!(alpha_of_s(&forms, s).unwrap() > 0.0, "m={m}, s={s}");
            }
        }
    }

    #[test]
    fn alpha_strictly_increasing_and_bounded() {
        let (eq, p) = benchmark_unstable(20);
        let forms = assemble_forms(&eq, &p, 2).unwrap();
        let mut prev = f64::NEG_INFINITY;
        // Lower bound -||h|| ||grad f||^2 / rho*: h = r <= 2, |grad f| = 1/r <= 1.
        let lower = -2.0;
        for i in 0..20 {
            let s = 1e-3 * (10f64).powf(i as f64 * 0.2);
            let a = alpha_of_s(&forms, s).unwrap();
            assert!(a > prev, "alpha not increasing at s={s}");
            assert!(a > lower, "alpha below the uniform lower bound at s={s}");
            prev = a;
        }
        let (c1, c2) = upper_bound_line(&forms).unwrap();
        for s in [0.01, 0.1, 0.5] {
            let a = alpha_of_s(&forms, s).unwrap();
            assert!(a <= -c1 + s * c2 + 1e-12, "upper-bound line violated at s={s}");
        }
    }

    #[test]
    fn alpha_slope_sandwiched_by_stiffness_quotient() {
        // nu (s2 - s1) E1(u2) <= alpha(s2) - alpha(s1) <= nu (s2 - s1) E1(u1).
        let (eq, p) = benchmark_unstable(16);
        let forms = assemble_forms(&eq, &p, 2).unwrap();
        for (s1, s2) in [(0.02, 0.03), (0.1, 0.12), (0.4, 0.5)] {
            let e1 = min_generalized_eig(&forms, s1).unwrap();
            let e2 = min_generalized_eig(&forms, s2).unwrap();
            let a1 = e1.alpha;
            let a2 = e2.alpha;
            let e1_of = |x: &DVector<f64>| x.dot(&(&forms.stiffness * x));
            let low = p.nu * (s2 - s1) * e1_of(&e2.vector);
            let high = p.nu * (s2 - s1) * e1_of(&e1.vector);
            assert!(a2 - a1 >= low - 1e-10, "sandwich lower failed");
            assert!(a2 - a1 <= high + 1e-10, "sandwich upper failed");
        }
    }

    #[test]
    fn growth_rate_none_for_stable_family() {
        let (eq, p) = benchmark_stable(16);
        for m in [0usize, 1, 3] {
            let forms = assemble_forms(&eq, &p, m).unwrap();
            let bracket = default_bracket(&forms);
            assert!(growth_rate(&forms, bracket).unwrap().is_none());
        }
    }

    #[test]
    fn fixed_point_defect_is_tiny() {
        let (eq, p) = benchmark_unstable(24);
        let forms = assemble_forms(&eq, &p, 2).unwrap();
        let fp = growth_rate(&forms, default_bracket(&forms)).unwrap().expect("unstable");
        assert!(fp.s_star > 0.0);
        assert!(
            fp.defect <= 1e-10 * fp.s_star.powi(2).max(1.0),
            "defect {} at s* = {}",
            fp.defect,
            fp.s_star
        );
    }

    #[test]
    fn eigenmode_is_normalized_and_consistent() {
        let (eq, p) = benchmark_unstable(24);
        let forms = assemble_forms(&eq, &p, 2).unwrap();
        let fp = growth_rate(&forms, default_bracket(&forms)).unwrap().unwrap();
        let em = eigenmode(&forms, &eq, fp.s_star).unwrap();
        assert!((l2_norm_sq_vec(&em.velocity) - 1.0).abs() < 1e-10, "J(u) = 1");
        // Density row: s* rho + h (u . grad f) = 0 by construction.
        let udf = em
            .velocity
            .u_r
            .mul(&eq.potential.gradf.u_r)
            .add(&em.velocity.u_theta.mul(&eq.potential.gradf.u_theta));
        let res = em.rho.scale(fp.s_star).add(&eq.h.mul(&udf));
        assert!(l2_norm(&res) < 1e-12);
        assert_eq!(em.multiplicity, 1);
    }

    #[test]
    fn spectrum_scan_finds_instability_only_when_unstable() {
        let modes: Vec<usize> = (0..=6).collect();
        let (eq_s, p_s) = benchmark_stable(16);
        let scan = full_spectrum_check(&eq_s, &p_s, &modes).unwrap();
        assert!(scan.lambda.is_none());
        for pm in &scan.per_mode {
            assert!(pm.s_star.is_none());
        }

        let (eq_u, p_u) = benchmark_unstable(16);
        let scan = full_spectrum_check(&eq_u, &p_u, &modes).unwrap();
        let lambda = scan.lambda.expect("unstable equilibrium must yield a growth rate");
        assert!(lambda > 0.0);
        assert!(scan.eigenmode.is_some());
        assert!(scan.dominant_mode.unwrap() >= 1, "mean mode cannot tap buoyancy");
    }

    #[test]
    fn lambda_converges_under_refinement() {
        let modes: Vec<usize> = (0..=6).collect();
        let (eq1, p1) = benchmark_unstable(24);
        let (eq2, p2) = benchmark_unstable(32);
        let l1 = full_spectrum_check(&eq1, &p1, &modes).unwrap().lambda.unwrap();
        let l2 = full_spectrum_check(&eq2, &p2, &modes).unwrap().lambda.unwrap();
        assert!(
            (l1 - l2).abs() <= 1e-6 * l2.abs(),
            "growth rate not grid-converged: {l1} vs {l2}"
        );
    }
}
