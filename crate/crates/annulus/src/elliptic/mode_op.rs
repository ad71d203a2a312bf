//! Dense per-azimuthal-mode radial operators and cached factorizations.
//!
//! The radial part of the polar Laplacian at mode m is
//! `L_m = d_rr + (1/r) d_r - m^2 / r^2`. Solvers assemble
//! `id_coeff * I + lap_coeff * L_m`, replace the first and last rows by
//! boundary rows, and cache the LU factorization keyed by mode, operator
//! coefficients and boundary rows; the time step is fixed, so the cache is
//! hit on every solve after the first.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::AnnulusGrid;

/// Boundary row `value * phi + derivative * d_r phi = rhs` at a wall.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryRow {
    pub value: f64,
    pub derivative: f64,
}

impl BoundaryRow {
    pub const DIRICHLET: Self = Self { value: 1.0, derivative: 0.0 };
    pub const NEUMANN: Self = Self { value: 0.0, derivative: 1.0 };

    pub fn robin(value: f64, derivative: f64) -> Self {
        Self { value, derivative }
    }
}

/// Radial matrix for `L_m` on the grid nodes.
pub fn mode_matrix(grid: &AnnulusGrid, m: usize) -> DMatrix<f64> {
    let n = grid.nr;
    let d = &grid.dmat;
    let mut l = d * d;
    for i in 0..n {
        let r = grid.r_nodes[i];
        for j in 0..n {
            l[(i, j)] += d[(i, j)] / r;
        }
        l[(i, i)] -= (m * m) as f64 / (r * r);
    }
    l
}

#[derive(Clone, PartialEq)]
struct SolveKey {
    m: u32,
    id_coeff: u64,
    lap_coeff: u64,
    row_a: (u64, u64),
    row_b: (u64, u64),
}

impl Eq for SolveKey {}

impl std::hash::Hash for SolveKey {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.m.hash(state);
        self.id_coeff.hash(state);
        self.lap_coeff.hash(state);
        self.row_a.hash(state);
        self.row_b.hash(state);
    }
}

struct Factorized {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

/// Shared access point for all radial solves on one grid.
pub struct EllipticSolvers {
    pub grid: Arc<AnnulusGrid>,
    cache: Mutex<HashMap<SolveKey, Arc<Factorized>>>,
    matrices: Mutex<HashMap<u32, Arc<DMatrix<f64>>>>,
}

impl EllipticSolvers {
    pub fn new(grid: &Arc<AnnulusGrid>) -> Self {
        Self { grid: grid.clone(), cache: Mutex::new(HashMap::new()), matrices: Mutex::new(HashMap::new()) }
    }

    /// Cached `L_m` matrix.
    pub fn mode_matrix_cached(&self, m: usize) -> Arc<DMatrix<f64>> {
        let mut lock = self.matrices.lock().unwrap();
        lock.entry(m as u32)
            .or_insert_with(|| Arc::new(mode_matrix(&self.grid, m)))
            .clone()
    }

    /// Apply `L_m` to a complex radial profile.
    pub fn apply_mode_complex(&self, m: usize, profile: &[Complex64]) -> Vec<Complex64> {
        let l = self.mode_matrix_cached(m);
        let n = self.grid.nr;
        let mut out = vec![Complex64::ZERO; n];
        for i in 0..n {
            let mut acc = Complex64::ZERO;
            for j in 0..n {
                acc += l[(i, j)] * profile[j];
            }
            out[i] = acc;
        }
        out
    }

    fn factorized(
        &self,
        m: usize,
        id_coeff: f64,
        lap_coeff: f64,
        row_a: BoundaryRow,
        row_b: BoundaryRow,
    ) -> Result<Arc<Factorized>> {
        let key = SolveKey {
            m: m as u32,
            id_coeff: id_coeff.to_bits(),
            lap_coeff: lap_coeff.to_bits(),
            row_a: (row_a.value.to_bits(), row_a.derivative.to_bits()),
            row_b: (row_b.value.to_bits(), row_b.derivative.to_bits()),
        };
        if let Some(f) = self.cache.lock().unwrap().get(&key) {
            return Ok(f.clone());
        }
        let n = self.grid.nr;
        let mut a = mode_matrix(&self.grid, m) * lap_coeff;
        for i in 0..n {
            a[(i, i)] += id_coeff;
        }
        for j in 0..n {
            a[(0, j)] = row_a.derivative * self.grid.dmat[(0, j)];
            a[(n - 1, j)] = row_b.derivative * self.grid.dmat[(n - 1, j)];
        }
        a[(0, 0)] += row_a.value;
        a[(n - 1, n - 1)] += row_b.value;
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular {
                m: m as i32,
                reason: format!("id={id_coeff}, lap={lap_coeff}, rows {row_a:?} {row_b:?}"),
            });
        }
        let f = Arc::new(Factorized { lu });
        self.cache.lock().unwrap().insert(key, f.clone());
        Ok(f)
    }

    /// Solve `(id_coeff I + lap_coeff L_m) phi = rhs` with the interior rows
    /// of the operator and the given boundary rows; `rhs[0]` and `rhs[n-1]`
    /// are the boundary-row right-hand sides.
    pub fn solve_radial(
        &self,
        m: usize,
        id_coeff: f64,
        lap_coeff: f64,
        row_a: BoundaryRow,
        row_b: BoundaryRow,
        rhs: &[f64],
    ) -> Result<Vec<f64>> {
        let f = self.factorized(m, id_coeff, lap_coeff, row_a, row_b)?;
        let sol = f
            .lu
            .solve(&DVector::from_column_slice(rhs))
            .ok_or_else(|| Error::Singular { m: m as i32, reason: "LU solve failed".into() })?;
        Ok(sol.as_slice().to_vec())
    }

    /// Complex right-hand sides solve through the same real factorization.
    pub fn solve_radial_complex(
        &self,
        m: usize,
        id_coeff: f64,
        lap_coeff: f64,
        row_a: BoundaryRow,
        row_b: BoundaryRow,
        rhs: &[Complex64],
    ) -> Result<Vec<Complex64>> {
        let re: Vec<f64> = rhs.iter().map(|c| c.re).collect();
        let im: Vec<f64> = rhs.iter().map(|c| c.im).collect();
        let sr = self.solve_radial(m, id_coeff, lap_coeff, row_a, row_b, &re)?;
        let si = self.solve_radial(m, id_coeff, lap_coeff, row_a, row_b, &im)?;
        Ok(sr.into_iter().zip(si).map(|(r, i)| Complex64::new(r, i)).collect())
    }

    /// Dirichlet Poisson solve for one mode: `L_m psi = rhs`, psi(a) = va,
    /// psi(b) = vb. Spectral accuracy on smooth data.
    pub fn poisson_mode(&self, m: usize, rhs: &[f64], va: f64, vb: f64) -> Result<Vec<f64>> {
        let mut full = rhs.to_vec();
        full[0] = va;
        let n = full.len();
        full[n - 1] = vb;
        self.solve_radial(m, 0.0, 1.0, BoundaryRow::DIRICHLET, BoundaryRow::DIRICHLET, &full)
    }

    /// `(I - kappa L_m) phi = rhs` with the supplied boundary rows.
    pub fn helmholtz_mode(
        &self,
        m: usize,
        kappa: f64,
        rhs: &[f64],
        row_a: BoundaryRow,
        row_b: BoundaryRow,
        bc_rhs: (f64, f64),
    ) -> Result<Vec<f64>> {
        if kappa < 0.0 {
            return Err(Error::Arg(format!("helmholtz shift kappa = {kappa} must be >= 0")));
        }
        let mut full = rhs.to_vec();
        full[0] = bc_rhs.0;
        let n = full.len();
        full[n - 1] = bc_rhs.1;
        self.solve_radial(m, 1.0, -kappa, row_a, row_b, &full)
    }

    /// Apply `L_m` to a radial profile.
    pub fn apply_mode(&self, m: usize, profile: &[f64]) -> Vec<f64> {
        let l = mode_matrix(&self.grid, m);
        let v = DVector::from_column_slice(profile);
        (l * v).as_slice().to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solvers() -> EllipticSolvers {
        EllipticSolvers::new(&AnnulusGrid::new(1.0, 2.0, 24, 8).unwrap())
    }

    #[test]
    fn mode_matrix_annihilates_harmonics() {
        // L_m r^m = 0 at interior nodes, relative to the row scale.
        let s = solvers();
        let g = &s.grid;
        for m in 0..g.nr - 2 {
            let profile: Vec<f64> = g.r_nodes.iter().map(|r| r.powi(m as i32)).collect();
            let out = s.apply_mode(m, &profile);
            let scale: f64 = profile.iter().fold(1.0f64, |a, &b| a.max(b.abs()));
            for v in &out[1..g.nr - 1] {
                assert!(
                    v.abs() < 1e-8 * scale * (g.nr * g.nr) as f64 / 4.0,
                    "m={m}: interior residual {v}"
                );
            }
        }
    }

    #[test]
    fn poisson_zero_rhs_zero_bc() {
        let s = solvers();
        let rhs = vec![0.0; s.grid.nr];
        let psi = s.poisson_mode(3, &rhs, 0.0, 0.0).unwrap();
        assert!(psi.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn poisson_mean_mode_closed_form() {
        // L_0 psi = 4 with psi(1) = psi(2) = 0 has
        // psi = r^2 + c1 ln r + c2, c1 = -3/ln 2, c2 = -1.
        let s = solvers();
        let rhs = vec![4.0; s.grid.nr];
        let psi = s.poisson_mode(0, &rhs, 0.0, 0.0).unwrap();
        let c1 = -3.0 / 2.0f64.ln();
        assert!((c1 + 4.3280850).abs() < 1e-6);
        for (j, &r) in s.grid.r_nodes.iter().enumerate() {
            let exact = r * r + c1 * r.ln() - 1.0;
            assert!((psi[j] - exact).abs() < 1e-10, "r={r}: {} vs {exact}", psi[j]);
        }
    }

    #[test]
    fn poisson_manufactured_round_trip() {
        // Apply L_1 to (r-a)(b-r), solve back, recover the input.
        let s = solvers();
        let g = &s.grid;
        let manufactured: Vec<f64> = g.r_nodes.iter().map(|r| (r - g.a) * (g.b - r)).collect();
        let rhs = s.apply_mode(1, &manufactured);
        let psi = s.poisson_mode(1, &rhs, 0.0, 0.0).unwrap();
        for (p, m) in psi.iter().zip(manufactured.iter()) {
            assert!((p - m).abs() < 1e-10);
        }
    }

    #[test]
    fn helmholtz_identity_at_zero_shift() {
        let s = solvers();
        let g = &s.grid;
        let rhs: Vec<f64> = g.r_nodes.iter().map(|r| (3.0 * r).sin()).collect();
        let out = s
            .helmholtz_mode(2, 0.0, &rhs, BoundaryRow::DIRICHLET, BoundaryRow::DIRICHLET, (7.0, -1.0))
            .unwrap();
        assert!((out[0] - 7.0).abs() < 1e-12);
        assert!((out[g.nr - 1] + 1.0).abs() < 1e-12);
        for j in 1..g.nr - 1 {
            assert!((out[j] - rhs[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn helmholtz_large_shift_tends_to_harmonic_extension() {
        let s = solvers();
        let g = &s.grid;
        let rhs = vec![0.5; g.nr];
        let kappa = 1e6;
        let h = s
            .helmholtz_mode(0, kappa, &rhs, BoundaryRow::DIRICHLET, BoundaryRow::DIRICHLET, (1.0, 2.0))
            .unwrap();
        let zero = vec![0.0; g.nr];
        let harm = s.poisson_mode(0, &zero, 1.0, 2.0).unwrap();
        for (x, y) in h.iter().zip(harm.iter()) {
            assert!((x - y).abs() < 1e-5, "{x} vs {y}");
        }
    }

    #[test]
    fn helmholtz_matches_fine_fd_oracle() {
        // Smooth bump, m = 0; second-order FD at very fine resolution with
        // one Richardson step serves as the independent oracle.
        let s = solvers();
        let g = &s.grid;
        let kappa = 0.02;
        let bump = |r: f64| (-10.0 * (r - 1.5) * (r - 1.5)).exp();
        let rhs: Vec<f64> = g.r_nodes.iter().map(|&r| bump(r)).collect();
        let sol = s
            .helmholtz_mode(0, kappa, &rhs, BoundaryRow::DIRICHLET, BoundaryRow::DIRICHLET, (0.0, 0.0))
            .unwrap();

        let fd = |n: usize| -> Vec<f64> {
            // Uniform-grid tridiagonal FD solve of (I - kappa L_0) u = f.
            let h = (g.b - g.a) / (n - 1) as f64;
            let mut diag = vec![0.0; n];
            let mut lower = vec![0.0; n];
            let mut upper = vec![0.0; n];
            let mut rhs_fd = vec![0.0; n];
            for i in 0..n {
                let r = g.a + i as f64 * h;
                if i == 0 || i == n - 1 {
                    diag[i] = 1.0;
                } else {
                    diag[i] = 1.0 + kappa * 2.0 / (h * h);
                    lower[i] = -kappa * (1.0 / (h * h) - 1.0 / (2.0 * h * r));
                    upper[i] = -kappa * (1.0 / (h * h) + 1.0 / (2.0 * h * r));
                    rhs_fd[i] = bump(r);
                }
            }
            // Thomas algorithm.
            for i in 1..n {
                let w = lower[i] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs_fd[i] -= w * rhs_fd[i - 1];
            }
            let mut u = vec![0.0; n];
            u[n - 1] = rhs_fd[n - 1] / diag[n - 1];
            for i in (0..n - 1).rev() {
                u[i] = (rhs_fd[i] - upper[i] * u[i + 1]) / diag[i];
            }
            u
        };
        // Richardson extrapolation at the nodes shared by the two FD grids;
        // the spectral solution is sampled there barycentrically.
        let coarse = fd(2401);
        let fine = fd(4801);
        for i in 0..2401 {
            let r = g.a + (g.b - g.a) * i as f64 / 2400.0;
            let oracle = (4.0 * fine[2 * i] - coarse[i]) / 3.0;
            let spectral = g.interpolate_radial(&sol, r);
            assert!(
                (spectral - oracle).abs() < 1e-7,
                "r={r}: spectral {spectral} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn rejects_negative_shift() {
        let s = solvers();
        let rhs = vec![0.0; s.grid.nr];
        assert!(s
            .helmholtz_mode(0, -1.0, &rhs, BoundaryRow::DIRICHLET, BoundaryRow::DIRICHLET, (0.0, 0.0))
            .is_err());
    }
}
