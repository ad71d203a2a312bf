//! Scalar and vector fields on the annulus grid.
//!
//! Values are stored in physical space, `nr x ntheta` row-major in r. The
//! azimuthal spectral representation is a half spectrum of `ntheta/2 + 1`
//! complex coefficients per radius, with conjugate symmetry implied.

use std::sync::Arc;

use num_complex::Complex64;

use super::grid::AnnulusGrid;

#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Arc<AnnulusGrid>,
    /// nr x ntheta samples, row-major in r.
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<AnnulusGrid>) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.nr * grid.ntheta] }
    }

    pub fn from_fn(grid: &Arc<AnnulusGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.nr * grid.ntheta);
        for &r in &grid.r_nodes {
            for &t in &grid.theta_nodes {
                values.push(f(r, t));
            }
        }
        Self { grid: grid.clone(), values }
    }

    pub fn constant(grid: &Arc<AnnulusGrid>, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.nr * grid.ntheta] }
    }

    #[inline]
    pub fn at(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.grid.ntheta + k]
    }

    #[inline]
    pub fn at_mut(&mut self, j: usize, k: usize) -> &mut f64 {
        &mut self.values[j * self.grid.ntheta + k]
    }

    /// Row of samples at radius index `j`.
    pub fn ring(&self, j: usize) -> &[f64] {
        let nt = self.grid.ntheta;
        &self.values[j * nt..(j + 1) * nt]
    }

    /// Azimuthal half spectrum: `nr x (ntheta/2 + 1)`, row-major in r.
    /// Coefficient m holds (1/N) sum_k v_k exp(-i m theta_k).
    pub fn coeffs(&self) -> Vec<Complex64> {
        let g = &self.grid;
        let nt = g.ntheta;
        let nm = g.nmodes();
        let mut out = vec![Complex64::ZERO; g.nr * nm];
        let mut buf = vec![Complex64::ZERO; nt];
        let fft = g.fft_forward().clone();
        let mut scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
        for j in 0..g.nr {
            for k in 0..nt {
                buf[k] = Complex64::new(self.at(j, k), 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for m in 0..nm {
                out[j * nm + m] = buf[m] / nt as f64;
            }
        }
        out
    }

    /// Rebuild physical samples from a half spectrum (conjugate symmetry assumed).
    pub fn from_coeffs(grid: &Arc<AnnulusGrid>, coeffs: &[Complex64]) -> Self {
        let nt = grid.ntheta;
        let nm = grid.nmodes();
        assert_eq!(coeffs.len(), grid.nr * nm, "coefficient shape mismatch");
        let mut field = Self::zeros(grid);
        let mut buf = vec![Complex64::ZERO; nt];
        let fft = grid.fft_inverse().clone();
        let mut scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
        for j in 0..grid.nr {
            for slot in buf.iter_mut() {
                *slot = Complex64::ZERO;
            }
            for m in 0..nm {
                buf[m] = coeffs[j * nm + m];
            }
            // Mirror for conjugate symmetry; Nyquist kept real by averaging.
            for m in 1..nm - 1 {
                buf[nt - m] = coeffs[j * nm + m].conj();
            }
            buf[nt / 2] = Complex64::new(coeffs[j * nm + nt / 2].re, 0.0);
            fft.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..nt {
                *field.at_mut(j, k) = buf[k].re;
            }
        }
        field
    }

    /// Zero all azimuthal modes with |m| above the 2/3-rule cutoff.
    pub fn dealias(&self) -> Self {
        let cutoff = self.grid.dealias_cutoff();
        let nm = self.grid.nmodes();
        let mut c = self.coeffs();
        for j in 0..self.grid.nr {
            for m in (cutoff + 1)..nm {
                c[j * nm + m] = Complex64::ZERO;
            }
        }
        Self::from_coeffs(&self.grid, &c)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(*self.grid, *other.grid, "grid mismatch");
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Self { grid: self.grid.clone(), values }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |x, y| x - y)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip(other, |x, y| x * y)
    }

    pub fn axpy(&mut self, c: f64, other: &Self) {
        assert_eq!(*self.grid, *other.grid, "grid mismatch");
        for (v, o) in self.values.iter_mut().zip(other.values.iter()) {
            *v += c * o;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Velocity-like field in polar components.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub u_r: ScalarField,
    pub u_theta: ScalarField,
    /// Set by constructors that guarantee u.n = 0 on both walls.
    pub wall_compatible: bool,
}

impl VectorField {
    pub fn zeros(grid: &Arc<AnnulusGrid>) -> Self {
        Self {
            u_r: ScalarField::zeros(grid),
            u_theta: ScalarField::zeros(grid),
            wall_compatible: true,
        }
    }

    pub fn new(u_r: ScalarField, u_theta: ScalarField) -> Self {
        assert_eq!(*u_r.grid, *u_theta.grid, "grid mismatch");
        Self { u_r, u_theta, wall_compatible: false }
    }

    pub fn grid(&self) -> &Arc<AnnulusGrid> {
        &self.u_r.grid
    }

    /// Largest wall-normal velocity magnitude over both boundary circles.
    pub fn wall_flux(&self) -> f64 {
        let g = self.grid();
        let mut worst: f64 = 0.0;
        for k in 0..g.ntheta {
            worst = worst.max(self.u_r.at(0, k).abs());
            worst = worst.max(self.u_r.at(g.nr - 1, k).abs());
        }
        worst
    }

    pub fn is_wall_compatible(&self, tol: f64) -> bool {
        self.wall_flux() <= tol
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            u_r: self.u_r.scale(c),
            u_theta: self.u_theta.scale(c),
            wall_compatible: self.wall_compatible,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            u_r: self.u_r.add(&other.u_r),
            u_theta: self.u_theta.add(&other.u_theta),
            wall_compatible: self.wall_compatible && other.wall_compatible,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            u_r: self.u_r.sub(&other.u_r),
            u_theta: self.u_theta.sub(&other.u_theta),
            wall_compatible: self.wall_compatible && other.wall_compatible,
        }
    }

    pub fn max_abs(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (ur, ut) in self.u_r.values.iter().zip(self.u_theta.values.iter()) {
            worst = worst.max((ur * ur + ut * ut).sqrt());
        }
        worst
    }

    /// Cartesian components as scalar fields.
    pub fn cartesian(&self) -> (ScalarField, ScalarField) {
        let g = self.grid();
        let mut ux = ScalarField::zeros(g);
        let mut uy = ScalarField::zeros(g);
        for j in 0..g.nr {
            for k in 0..g.ntheta {
                let t = g.theta_nodes[k];
                let (s, c) = t.sin_cos();
                let ur = self.u_r.at(j, k);
                let ut = self.u_theta.at(j, k);
                *ux.at_mut(j, k) = ur * c - ut * s;
                *uy.at_mut(j, k) = ur * s + ut * c;
            }
        }
        (ux, uy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Arc<AnnulusGrid> {
        AnnulusGrid::new(1.0, 2.0, 9, 16).unwrap()
    }

    #[test]
    fn transform_round_trip_smooth() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |r, t| (3.0 * t).cos() * r + (5.0 * t).sin() / r);
        let back = ScalarField::from_coeffs(&g, &f.coeffs());
        for (x, y) in f.values.iter().zip(back.values.iter()) {
            assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn conjugate_symmetry_means_mean_mode_real() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |r, t| r * t.cos() + 0.3 * (2.0 * t).sin());
        let c = f.coeffs();
        let nm = g.nmodes();
        for j in 0..g.nr {
            assert!(c[j * nm].im.abs() < 1e-14);
            assert!(c[j * nm + g.ntheta / 2].im.abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn transform_round_trip_random(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let g = grid();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut f = ScalarField::zeros(&g);
            for v in f.values.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let back = ScalarField::from_coeffs(&g, &f.coeffs());
            for (x, y) in f.values.iter().zip(back.values.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
