//! Assembly of the quadratic forms J, E1, E2 on the divergence-free,
//! wall-compatible space, parameterized by the streamfunction.
//!
//! With psi = 0 on r = b and psi constant on r = a, divergence-freeness and
//! impermeability hold exactly and the constrained minimization becomes an
//! unconstrained symmetric pencil. When h, alpha and f are axisymmetric the
//! forms block-diagonalize over azimuthal modes and each block is a small
//! dense pencil in the radial profile; otherwise the full coupled pencil over
//! all retained modes is assembled.

use nalgebra::{DMatrix, DVector};

use crate::equilibrium::{HydrostaticEquilibrium, PhysicsParams};
use crate::error::{Error, Result};
use crate::spectral::{AnnulusGrid, ScalarField, VectorField};

/// Which block of the stability pencil a FormSet represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeKey {
    /// Single azimuthal mode of an axisymmetric configuration.
    Mode(usize),
    /// Full pencil over retained modes (theta-dependent h, alpha or f).
    Coupled,
}

/// Mass, stiffness and buoyancy forms of the variational problem, plus the
/// data needed to reconstruct a velocity field from a coefficient vector.
pub struct FormSet {
    pub key: ModeKey,
    /// M: discretization of J restricted to the constrained space. SPD.
    pub mass: DMatrix<f64>,
    /// K1: the E1 form including both wall terms. Positive definite here.
    pub stiffness: DMatrix<f64>,
    /// K2: the E2 form, sign-indefinite in general.
    pub buoyancy: DMatrix<f64>,
    pub params: PhysicsParams,
    basis: Basis,
}

enum Basis {
    /// m >= 1: radial streamfunction profile on interior nodes.
    RadialPsi { m: usize, grid: std::sync::Arc<AnnulusGrid> },
    /// m = 0: the tangential velocity profile on all nodes.
    MeanUTheta { grid: std::sync::Arc<AnnulusGrid> },
    /// Coupled 2D basis.
    Coupled2D {
        grid: std::sync::Arc<AnnulusGrid>,
        entries: Vec<BasisEntry>,
        fields: Vec<BasisFields>,
    },
}

#[derive(Clone, Copy, Debug)]
struct BasisEntry {
    /// Radial node index carrying the cardinal profile.
    node: usize,
    /// Azimuthal wavenumber.
    m: usize,
    /// Cosine (true) or sine (false) phase.
    cos_phase: bool,
}

/// Evaluated kinematics of one coupled basis function on the grid.
struct BasisFields {
    u_r: Vec<f64>,
    u_theta: Vec<f64>,
    g_rr: Vec<f64>,
    g_rt: Vec<f64>,
    g_tr: Vec<f64>,
    g_tt: Vec<f64>,
    u_dot_gradf: Vec<f64>,
    ut_wall_a: Vec<f64>,
    ut_wall_b: Vec<f64>,
}

impl FormSet {
    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    pub fn grid(&self) -> &std::sync::Arc<AnnulusGrid> {
        match &self.basis {
            Basis::RadialPsi { grid, .. } => grid,
            Basis::MeanUTheta { grid } => grid,
            Basis::Coupled2D { grid, .. } => grid,
        }
    }

    /// Velocity field from a coefficient vector (canonical cosine phase for
    /// the axisymmetric blocks).
    pub fn velocity(&self, x: &DVector<f64>) -> VectorField {
        match &self.basis {
            Basis::RadialPsi { m, grid } => {
                let nr = grid.nr;
                let mut p = vec![0.0; nr];
                for (i, j) in (1..nr - 1).enumerate() {
                    p[j] = x[i];
                }
                let dp = radial_derivative(grid, &p);
                let mf = *m as f64;
                let mut u_r = ScalarField::zeros(grid);
                let mut u_t = ScalarField::zeros(grid);
                for j in 0..nr {
                    let r = grid.r_nodes[j];
                    for k in 0..grid.ntheta {
                        let t = grid.theta_nodes[k];
                        *u_r.at_mut(j, k) = mf / r * p[j] * (mf * t).sin();
                        *u_t.at_mut(j, k) = dp[j] * (mf * t).cos();
                    }
                }
                let mut v = VectorField::new(u_r, u_t);
                v.wall_compatible = true;
                v
            }
            Basis::MeanUTheta { grid } => {
                let mut u_t = ScalarField::zeros(grid);
                for j in 0..grid.nr {
                    for k in 0..grid.ntheta {
                        *u_t.at_mut(j, k) = x[j];
                    }
                }
                let mut v = VectorField::new(ScalarField::zeros(grid), u_t);
                v.wall_compatible = true;
                v
            }
            Basis::Coupled2D { grid, fields, .. } => {
                let n = grid.nr * grid.ntheta;
                let mut u_r = vec![0.0; n];
                let mut u_t = vec![0.0; n];
                for (c, bf) in x.iter().zip(fields.iter()) {
                    for i in 0..n {
                        u_r[i] += c * bf.u_r[i];
                        u_t[i] += c * bf.u_theta[i];
                    }
                }
                let mut v = VectorField::new(
                    ScalarField { grid: grid.clone(), values: u_r },
                    ScalarField { grid: grid.clone(), values: u_t },
                );
                v.wall_compatible = true;
                v
            }
        }
    }

    /// Streamfunction associated with a coefficient vector; the mean block
    /// integrates u_theta radially with psi(b) = 0.
    pub fn streamfunction(&self, x: &DVector<f64>) -> ScalarField {
        match &self.basis {
            Basis::RadialPsi { m, grid } => {
                let nr = grid.nr;
                let mut p = vec![0.0; nr];
                for (i, j) in (1..nr - 1).enumerate() {
                    p[j] = x[i];
                }
                let mf = *m as f64;
                ScalarField::from_fn(grid, |r, t| {
                    let j = grid.r_nodes.iter().position(|&rr| rr == r).unwrap();
                    p[j] * (mf * t).cos()
                })
            }
            Basis::MeanUTheta { grid } => {
                // d_r psi = u_theta, psi(b) = 0: solve with a Robin row.
                let solvers = crate::elliptic::EllipticSolvers::new(grid);
                let omega: Vec<f64> = {
                    let r_ut: Vec<f64> =
                        (0..grid.nr).map(|j| grid.r_nodes[j] * x[j]).collect();
                    let d = radial_derivative(grid, &r_ut);
                    (0..grid.nr).map(|j| d[j] / grid.r_nodes[j]).collect()
                };
                let mut rhs = omega;
                rhs[0] = x[0];
                let nr = grid.nr;
                rhs[nr - 1] = 0.0;
                let psi0 = solvers
                    .solve_radial(
                        0,
                        0.0,
                        1.0,
                        crate::elliptic::BoundaryRow::NEUMANN,
                        crate::elliptic::BoundaryRow::DIRICHLET,
                        &rhs,
                    )
                    .unwrap_or_else(|_| vec![0.0; nr]);
                ScalarField::from_fn(grid, |r, _| {
                    let j = grid.r_nodes.iter().position(|&rr| rr == r).unwrap();
                    psi0[j]
                })
            }
            Basis::Coupled2D { grid, entries, .. } => {
                let mut psi = ScalarField::zeros(grid);
                for (idx, e) in entries.iter().enumerate() {
                    let c = x[idx];
                    if c == 0.0 {
                        continue;
                    }
                    let mf = e.m as f64;
                    for k in 0..grid.ntheta {
                        let t = grid.theta_nodes[k];
                        let trig = if e.cos_phase { (mf * t).cos() } else { (mf * t).sin() };
                        *psi.at_mut(e.node, k) += c * trig;
                    }
                }
                psi
            }
        }
    }
}

fn radial_derivative(grid: &AnnulusGrid, p: &[f64]) -> Vec<f64> {
    (0..grid.nr)
        .map(|i| (0..grid.nr).map(|j| grid.dmat[(i, j)] * p[j]).sum())
        .collect()
}

/// True when the equilibrium and slip coefficient let the forms decouple
/// over azimuthal modes.
pub fn is_axisymmetric(eq: &HydrostaticEquilibrium, params: &PhysicsParams) -> bool {
    if !params.alpha.is_constant() || !eq.potential.is_radial() {
        return false;
    }
    let g = eq.grid();
    let mut worst: f64 = 0.0;
    for j in 0..g.nr {
        let h0 = eq.h.at(j, 0);
        for k in 0..g.ntheta {
            worst = worst.max((eq.h.at(j, k) - h0).abs());
        }
    }
    worst <= 1e-12 * (1.0 + crate::spectral::norms::linf_norm(&eq.h))
}

/// Assemble the per-mode forms of an axisymmetric configuration.
pub fn assemble_forms(
    eq: &HydrostaticEquilibrium,
    params: &PhysicsParams,
    m: usize,
) -> Result<FormSet> {
    if !is_axisymmetric(eq, params) {
        return Err(Error::Variant(
            "configuration is not axisymmetric; assemble the coupled pencil instead".into(),
        ));
    }
    params.validate_on(eq.grid())?;
    let grid = eq.grid().clone();
    let nr = grid.nr;
    let alpha = params.alpha.constant_value().expect("checked constant");
    let h_prof: Vec<f64> = (0..nr).map(|j| eq.h.at(j, 0)).collect();
    let fr_prof: Vec<f64> = (0..nr).map(|j| eq.potential.gradf.u_r.at(j, 0)).collect();
    let w: Vec<f64> = (0..nr).map(|j| grid.w_radial[j] * grid.r_nodes[j]).collect();
    let d = &grid.dmat;
    let pi = std::f64::consts::PI;

    if m == 0 {
        // Basis: u_theta profile on all nodes; u_r = 0.
        let two_pi = 2.0 * pi;
        let mut mass = DMatrix::zeros(nr, nr);
        for j in 0..nr {
            mass[(j, j)] = two_pi * w[j];
        }
        // E1 = 2pi int (q'^2 + q^2/r^2) r dr + walls.
        let mut k1 = DMatrix::zeros(nr, nr);
        for i in 0..nr {
            for jj in 0..nr {
                let mut acc = 0.0;
                for l in 0..nr {
                    acc += d[(l, i)] * w[l] * d[(l, jj)];
                }
                k1[(i, jj)] = two_pi * acc;
            }
        }
        for j in 0..nr {
            let r = grid.r_nodes[j];
            k1[(j, j)] += two_pi * w[j] / (r * r);
        }
        k1[(nr - 1, nr - 1)] += two_pi; // (1/b) * 2 pi b q(b)^2
        k1[(0, 0)] += two_pi * grid.a * (1.0 / grid.a + alpha / params.nu);
        let k2 = DMatrix::zeros(nr, nr);
        return Ok(FormSet {
            key: ModeKey::Mode(0),
            mass,
            stiffness: k1,
            buoyancy: k2,
            params: params.clone(),
            basis: Basis::MeanUTheta { grid },
        });
    }

    // m >= 1: psi profile p on interior nodes, cosine phase; the sine phase
    // gives identical matrices.
    let mf = m as f64;
    let n_int = nr - 2;
    // Component maps acting on the full profile. g_rr differentiates the
    // sampled u_r profile m p / r, matching the spectral operators exactly.
    let mut maps: Vec<DMatrix<f64>> = Vec::new();
    // g_rr = d_r (m p / r): D scaled by m/r at the source node.
    let mut g1 = DMatrix::zeros(nr, nr);
    // g_rt = p''
    let d2 = d * d;
    // g_tr = m^2 p / r^2 - p'/r
    let mut g3 = DMatrix::zeros(nr, nr);
    // g_tt = m (p/r^2 - p'/r)
    let mut g4 = DMatrix::zeros(nr, nr);
    for i in 0..nr {
        let r = grid.r_nodes[i];
        for j in 0..nr {
            g1[(i, j)] = mf * d[(i, j)] / grid.r_nodes[j];
            g3[(i, j)] = if i == j { mf * mf / (r * r) } else { 0.0 } - d[(i, j)] / r;
            g4[(i, j)] = mf * (if i == j { 1.0 / (r * r) } else { 0.0 } - d[(i, j)] / r);
        }
    }
    maps.push(g1);
    maps.push(d2.clone());
    maps.push(g3);
    maps.push(g4);

    let weighted_gram = |a: &DMatrix<f64>, weight: &[f64]| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(nr, nr);
        for i in 0..nr {
            for jj in 0..nr {
                let mut acc = 0.0;
                for l in 0..nr {
                    acc += a[(l, i)] * weight[l] * a[(l, jj)];
                }
                out[(i, jj)] = acc;
            }
        }
        out
    };

    // J = pi int [(m/r p)^2 + p'^2] r dr.
    let mut mass_full = weighted_gram(d, &w);
    for j in 0..nr {
        let r = grid.r_nodes[j];
        mass_full[(j, j)] += mf * mf / (r * r) * w[j];
    }
    mass_full *= pi;

    let mut k1_full = DMatrix::zeros(nr, nr);
    for a in &maps {
        k1_full += weighted_gram(a, &w);
    }
    k1_full *= pi;
    // Wall terms: u_tau = p' at each wall, theta integral of cos^2 = pi.
    let add_rank_one = |k: &mut DMatrix<f64>, row: usize, coeff: f64| {
        for i in 0..nr {
            for jj in 0..nr {
                k[(i, jj)] += coeff * d[(row, i)] * d[(row, jj)];
            }
        }
    };
    add_rank_one(&mut k1_full, nr - 1, pi); // (1/b) * pi b p'(b)^2
    add_rank_one(&mut k1_full, 0, pi * grid.a * (1.0 / grid.a + alpha / params.nu));

    // E2 = pi int h (m p f_r / r)^2 r dr.
    let mut k2_full = DMatrix::zeros(nr, nr);
    for j in 0..nr {
        let r = grid.r_nodes[j];
        let c = mf * fr_prof[j] / r;
        k2_full[(j, j)] = pi * h_prof[j] * c * c * w[j];
    }

    let restrict = |a: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n_int, n_int);
        for i in 0..n_int {
            for jj in 0..n_int {
                out[(i, jj)] = a[(i + 1, jj + 1)];
            }
        }
        out
    };

    Ok(FormSet {
        key: ModeKey::Mode(m),
        mass: restrict(&mass_full),
        stiffness: restrict(&k1_full),
        buoyancy: restrict(&k2_full),
        params: params.clone(),
        basis: Basis::RadialPsi { m, grid },
    })
}

/// Assemble the full coupled pencil over modes 0..=m_keep. Used when h,
/// alpha or f depend on theta; limited to moderate resolutions.
pub fn assemble_forms_coupled(
    eq: &HydrostaticEquilibrium,
    params: &PhysicsParams,
    m_keep: usize,
) -> Result<FormSet> {
    params.validate_on(eq.grid())?;
    let grid = eq.grid().clone();
    if grid.ntheta > 64 {
        return Err(Error::Size(
            "coupled pencil limited to ntheta <= 64".into(),
        ));
    }
    let nr = grid.nr;
    let nt = grid.ntheta;
    let m_keep = m_keep.min(nt / 2 - 1);

    let mut entries = Vec::new();
    // Mean block: cardinal radial profiles at nodes 0..nr-1 in psi would be
    // the constant + interior values; the mean mode is parameterized by psi
    // on nodes 0..nr-2 (psi(b) = 0, psi(a) free carries the circulation).
    for node in 0..nr - 1 {
        entries.push(BasisEntry { node, m: 0, cos_phase: true });
    }
    for m in 1..=m_keep {
        for node in 1..nr - 1 {
            entries.push(BasisEntry { node, m, cos_phase: true });
            entries.push(BasisEntry { node, m, cos_phase: false });
        }
    }

    let d = &grid.dmat;
    let d2 = d * d;
    let n = entries.len();
    let mut fields = Vec::with_capacity(n);
    for e in &entries {
        let mf = e.m as f64;
        let sz = nr * nt;
        let mut bf = BasisFields {
            u_r: vec![0.0; sz],
            u_theta: vec![0.0; sz],
            g_rr: vec![0.0; sz],
            g_rt: vec![0.0; sz],
            g_tr: vec![0.0; sz],
            g_tt: vec![0.0; sz],
            u_dot_gradf: vec![0.0; sz],
            ut_wall_a: vec![0.0; nt],
            ut_wall_b: vec![0.0; nt],
        };
        for j in 0..nr {
            let r = grid.r_nodes[j];
            // Cardinal profile: c(node) = 1, zero at other nodes.
            let c = if j == e.node { 1.0 } else { 0.0 };
            let dc = d[(j, e.node)];
            let d2c = d2[(j, e.node)];
            for k in 0..nt {
                let t = grid.theta_nodes[k];
                let (trig, dtrig) = if e.cos_phase {
                    ((mf * t).cos(), -mf * (mf * t).sin())
                } else {
                    ((mf * t).sin(), mf * (mf * t).cos())
                };
                let i = j * nt + k;
                let u_r = -dtrig * c / r;
                let u_t = dc * trig;
                bf.u_r[i] = u_r;
                bf.u_theta[i] = u_t;
                // d_r applied to the sampled profile c/r, matching the
                // spectral route.
                bf.g_rr[i] = -dtrig * d[(j, e.node)] / grid.r_nodes[e.node];
                bf.g_rt[i] = d2c * trig;
                // (d_theta u_r - u_theta)/r with d_theta u_r = -trig'' c / r
                // and trig'' = -m^2 trig.
                bf.g_tr[i] = (mf * mf * trig * c / r - dc * trig) / r;
                bf.g_tt[i] = (dtrig * dc - dtrig * c / r) / r;
                bf.u_dot_gradf[i] = u_r * eq.potential.gradf.u_r.at(j, k)
                    + u_t * eq.potential.gradf.u_theta.at(j, k);
                if j == 0 {
                    bf.ut_wall_a[k] = u_t;
                }
                if j == nr - 1 {
                    bf.ut_wall_b[k] = u_t;
                }
            }
        }
        fields.push(bf);
    }

    let wa = &grid.w_area;
    let gram = |get: &dyn Fn(&BasisFields) -> &Vec<f64>, weight: &dyn Fn(usize) -> f64| {
        let mut out = DMatrix::zeros(n, n);
        let sz = nr * nt;
        // Precompute weighted copies once per basis function.
        let weighted: Vec<Vec<f64>> = fields
            .iter()
            .map(|bf| {
                let v = get(bf);
                (0..sz).map(|i| v[i] * weight(i)).collect()
            })
            .collect();
        for p in 0..n {
            let vp = get(&fields[p]);
            for q in p..n {
                let acc: f64 = weighted[q].iter().zip(vp.iter()).map(|(x, y)| x * y).sum();
                out[(p, q)] = acc;
                out[(q, p)] = acc;
            }
        }
        out
    };

    let area_w = |i: usize| wa[i];
    let mut mass = gram(&|bf| &bf.u_r, &area_w);
    mass += gram(&|bf| &bf.u_theta, &area_w);

    let mut k1 = gram(&|bf| &bf.g_rr, &area_w);
    k1 += gram(&|bf| &bf.g_rt, &area_w);
    k1 += gram(&|bf| &bf.g_tr, &area_w);
    k1 += gram(&|bf| &bf.g_tt, &area_w);
    // Wall terms.
    let mut wall = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in p..n {
            let mut acc = 0.0;
            for k in 0..nt {
                acc += grid.w_bnd_b[k] / grid.b
                    * fields[p].ut_wall_b[k]
                    * fields[q].ut_wall_b[k];
                let coeff = 1.0 / grid.a + params.alpha.value(k) / params.nu;
                acc += grid.w_bnd_a[k] * coeff * fields[p].ut_wall_a[k] * fields[q].ut_wall_a[k];
            }
            wall[(p, q)] = acc;
            wall[(q, p)] = acc;
        }
    }
    k1 += wall;

    let h_w = |i: usize| wa[i] * eq.h.values[i];
    let k2 = gram(&|bf| &bf.u_dot_gradf, &h_w);

    Ok(FormSet {
        key: ModeKey::Coupled,
        mass,
        stiffness: k1,
        buoyancy: k2,
        params: params.clone(),
        basis: Basis::Coupled2D { grid, entries, fields },
    })
}

/// Evaluate the three functionals on an arbitrary velocity field by direct
/// quadrature of their integral definitions; the oracle against which the
/// assembled matrices are checked.
pub fn functionals_by_quadrature(
    eq: &HydrostaticEquilibrium,
    params: &PhysicsParams,
    v: &VectorField,
) -> (f64, f64, f64) {
    use crate::spectral::norms;
    let j = norms::l2_norm_sq_vec(v);
    let grid = v.grid();
    let mut e1 = norms::grad_norm_sq_vec(v);
    let ut_sq = v.u_theta.mul(&v.u_theta);
    e1 += norms::boundary_integral(&ut_sq, crate::spectral::Wall::Outer, |_| 1.0) / grid.b;
    e1 += norms::boundary_integral(&ut_sq, crate::spectral::Wall::Inner, |k| {
        1.0 / grid.a + params.alpha.value(k) / params.nu
    });
    let udf = v
        .u_r
        .mul(&eq.potential.gradf.u_r)
        .add(&v.u_theta.mul(&eq.potential.gradf.u_theta));
    let e2 = norms::integrate(&eq.h.mul(&udf).mul(&udf));
    (j, e1, e2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{
        make_equilibrium, make_potential, ExpProfile, LinearProfile, PotentialKind,
        SlipCoefficient,
    };
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn setup_unstable() -> (HydrostaticEquilibrium, PhysicsParams) {
        let g = AnnulusGrid::new(1.0, 2.0, 16, 16).unwrap();
        let pot = make_potential(PotentialKind::LogRadial { g: 1.0 }, &g).unwrap();
        let eq = make_equilibrium(pot, Arc::new(ExpProfile { rate: 1.0 })).unwrap();
        let p = PhysicsParams::new(0.1, 1.0, SlipCoefficient::Constant(0.0)).unwrap();
        (eq, p)
    }

    #[test]
    fn zero_vector_gives_zero_functionals() {
        let (eq, p) = setup_unstable();
        let forms = assemble_forms(&eq, &p, 2).unwrap();
        let x = DVector::zeros(forms.dim());
        assert_eq!(x.dot(&(&forms.mass * &x)), 0.0);
        assert_eq!(x.dot(&(&forms.stiffness * &x)), 0.0);
        assert_eq!(x.dot(&(&forms.buoyancy * &x)), 0.0);
    }

    #[test]
    fn forms_match_direct_quadrature() {
        let (eq, p) = setup_unstable();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for m in [0usize, 1, 2, 3] {
            let forms = assemble_forms(&eq, &p, m).unwrap();
            for _ in 0..4 {
                let x = DVector::from_fn(forms.dim(), |_, _| rng.gen_range(-1.0..1.0));
                let v = forms.velocity(&x);
                let (j_q, e1_q, e2_q) = functionals_by_quadrature(&eq, &p, &v);
                let j_m = x.dot(&(&forms.mass * &x));
                let e1_m = x.dot(&(&forms.stiffness * &x));
                let e2_m = x.dot(&(&forms.buoyancy * &x));
                assert!((j_q - j_m).abs() <= 1e-8 * (1.0 + j_q.abs()), "J mismatch m={m}: {j_q} vs {j_m}");
                assert!(
                    (e1_q - e1_m).abs() <= 1e-8 * (1.0 + e1_q.abs()),
                    "E1 mismatch m={m}: {e1_q} vs {e1_m}"
                );
                assert!(
                    (e2_q - e2_m).abs() <= 1e-8 * (1.0 + e2_q.abs()),
                    "E2 mismatch m={m}: {e2_q} vs {e2_m}"
                );
            }
        }
    }

    #[test]
    fn negative_h_makes_buoyancy_negative_semidefinite() {
        let g = AnnulusGrid::new(1.0, 2.0, 12, 8).unwrap();
        let pot = make_potential(PotentialKind::LogRadial { g: 1.0 }, &g).unwrap();
        let eq = make_equilibrium(pot, Arc::new(LinearProfile { gamma: 1.0, beta: 0.0 })).unwrap();
        let p = PhysicsParams::new(0.1, 1.0, SlipCoefficient::Constant(0.0)).unwrap();
        let forms = assemble_forms(&eq, &p, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = DVector::from_fn(forms.dim(), |_, _| rng.gen_range(-1.0..1.0));
            assert!(x.dot(&(&forms.buoyancy * &x)) <= 1e-14);
        }
    }

    #[test]
    fn coupled_matches_per_mode_on_axisymmetric_config() {
        // On a radial configuration the coupled pencil must reproduce the
        // per-mode quadratic forms for single-mode vectors.
        let g = AnnulusGrid::new(1.0, 2.0, 10, 16).unwrap();
        let pot = make_potential(PotentialKind::LogRadial { g: 1.0 }, &g).unwrap();
        let eq = make_equilibrium(pot, Arc::new(ExpProfile { rate: 1.0 })).unwrap();
        let p = PhysicsParams::new(0.1, 1.0, SlipCoefficient::Constant(0.1)).unwrap();
        let coupled = assemble_forms_coupled(&eq, &p, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x = DVector::from_fn(coupled.dim(), |_, _| rng.gen_range(-1.0..1.0));
        let v = coupled.velocity(&x);
        let (j_q, e1_q, e2_q) = functionals_by_quadrature(&eq, &p, &v);
        assert!((x.dot(&(&coupled.mass * &x)) - j_q).abs() < 1e-8 * (1.0 + j_q.abs()));
        assert!((x.dot(&(&coupled.stiffness * &x)) - e1_q).abs() < 1e-8 * (1.0 + e1_q.abs()));
        assert!((x.dot(&(&coupled.buoyancy * &x)) - e2_q).abs() < 1e-8 * (1.0 + e2_q.abs()));
    }

    #[test]
    fn mass_is_positive_definite() {
        let (eq, p) = setup_unstable();
        for m in [0usize, 1, 4] {
            let forms = assemble_forms(&eq, &p, m).unwrap();
            assert!(
                nalgebra::Cholesky::new(forms.mass.clone()).is_some(),
                "mass not SPD at m={m}"
            );
        }
    }
}
