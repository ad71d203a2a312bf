//! Annulus discretization: Chebyshev–Gauss–Lobatto collocation in radius,
//! uniform nodes with a discrete Fourier representation in azimuth.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Discretization of the annulus a < r < b.
///
/// Radial nodes are the affine image of Chebyshev–Gauss–Lobatto points, so
/// `r_nodes[0] == a` and `r_nodes[nr-1] == b` exactly. Azimuthal nodes are
/// uniform on [0, 2pi). Area quadrature combines Clenshaw–Curtis weights in
/// radius (Jacobian r folded in) with the periodic trapezoid rule in theta.
pub struct AnnulusGrid {
    pub a: f64,
    pub b: f64,
    pub nr: usize,
    pub ntheta: usize,
    /// Strictly increasing radii, `r_nodes[0] = a`, `r_nodes[nr-1] = b`.
    pub r_nodes: Vec<f64>,
    pub theta_nodes: Vec<f64>,
    /// Clenshaw–Curtis weights on [a, b] without the Jacobian.
    pub w_radial: Vec<f64>,
    /// Area weights `w_radial[j] * r_j * dtheta`, flattened row-major in r.
    pub w_area: Vec<f64>,
    /// Arc-length weights on r = a (sums to 2 pi a).
    pub w_bnd_a: Vec<f64>,
    /// Arc-length weights on r = b (sums to 2 pi b).
    pub w_bnd_b: Vec<f64>,
    /// Radial differentiation matrix on `r_nodes`.
    pub dmat: DMatrix<f64>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for AnnulusGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AnnulusGrid")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("nr", &self.nr)
            .field("ntheta", &self.ntheta)
            .finish()
    }
}

impl PartialEq for AnnulusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b && self.nr == other.nr && self.ntheta == other.ntheta
    }
}

impl AnnulusGrid {
    /// Build a grid. `nr >= 3`, `ntheta` even and `>= 4`; production runs
    /// use `nr >= 8`, `ntheta >= 8`.
    pub fn new(a: f64, b: f64, nr: usize, ntheta: usize) -> Result<Arc<Self>> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Domain(format!("inner radius a = {a} must be positive")));
        }
        if !(b > a) || !b.is_finite() {
            return Err(Error::Domain(format!("outer radius b = {b} must exceed a = {a}")));
        }
        if nr < 3 {
            return Err(Error::Size(format!("nr = {nr} must be at least 3")));
        }
        if ntheta < 4 || ntheta % 2 != 0 {
            return Err(Error::Size(format!("ntheta = {ntheta} must be even and at least 4")));
        }

        let n = nr - 1;
        // Ascending CGL image: r_j = (a+b)/2 - (b-a)/2 cos(j pi / n).
        let r_nodes: Vec<f64> = (0..nr)
            .map(|j| {
                if j == 0 {
                    a
                } else if j == n {
                    b
                } else {
                    0.5 * (a + b) - 0.5 * (b - a) * (PI * j as f64 / n as f64).cos()
                }
            })
            .collect();
        let theta_nodes: Vec<f64> = (0..ntheta).map(|k| 2.0 * PI * k as f64 / ntheta as f64).collect();

        let dmat = barycentric_diff_matrix(&r_nodes);
        let w_radial = clenshaw_curtis_weights(&r_nodes)?;

        let dtheta = 2.0 * PI / ntheta as f64;
        let mut w_area = vec![0.0; nr * ntheta];
        for j in 0..nr {
            let wj = w_radial[j] * r_nodes[j] * dtheta;
            for k in 0..ntheta {
                w_area[j * ntheta + k] = wj;
            }
        }
        let w_bnd_a = vec![a * dtheta; ntheta];
        let w_bnd_b = vec![b * dtheta; ntheta];

        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(ntheta);
        let fft_inv = planner.plan_fft_inverse(ntheta);

        Ok(Arc::new(Self {
            a,
            b,
            nr,
            ntheta,
            r_nodes,
            theta_nodes,
            w_radial,
            w_area,
            w_bnd_a,
            w_bnd_b,
            dmat,
            fft_fwd,
            fft_inv,
        }))
    }

    /// Number of azimuthal spectral coefficients (half spectrum incl. Nyquist).
    pub fn nmodes(&self) -> usize {
        self.ntheta / 2 + 1
    }

    /// Highest mode kept by the 2/3 dealiasing rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.ntheta / 3
    }

    /// Smallest grid spacing, used for advective CFL estimates.
    pub fn min_spacing(&self) -> f64 {
        let mut dr_min = f64::INFINITY;
        for j in 1..self.nr {
            dr_min = dr_min.min(self.r_nodes[j] - self.r_nodes[j - 1]);
        }
        dr_min.min(self.a * 2.0 * PI / self.ntheta as f64)
    }

    /// Barycentric interpolation of a radial profile sampled on `r_nodes`.
    pub fn interpolate_radial(&self, profile: &[f64], r: f64) -> f64 {
        debug_assert_eq!(profile.len(), self.nr);
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..self.nr {
            let diff = r - self.r_nodes[j];
            if diff.abs() < 1e-14 * (1.0 + r.abs()) {
                return profile[j];
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let delta = if j == 0 || j == self.nr - 1 { 0.5 } else { 1.0 };
            let w = sign * delta / diff;
            num += w * profile[j];
            den += w;
        }
        num / den
    }

    pub(crate) fn fft_forward(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft_fwd
    }

    pub(crate) fn fft_inverse(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft_inv
    }
}

/// Differentiation matrix from barycentric weights; exact for polynomials of
/// degree < n on arbitrary distinct nodes, here CGL images.
fn barycentric_diff_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let mut w = vec![0.0f64; n];
    for j in 0..n {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let delta = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        w[j] = sign * delta;
    }
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// Clenshaw–Curtis weights obtained by moment matching: the weights integrate
/// every Chebyshev polynomial T_k (k < nr) exactly on [a, b].
fn clenshaw_curtis_weights(r_nodes: &[f64]) -> Result<Vec<f64>> {
    let n = r_nodes.len();
    let a = r_nodes[0];
    let b = r_nodes[n - 1];
    // Standard nodes x_j in [-1, 1] matching the ascending CGL image.
    let m = (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|j| -(PI * j as f64 / m).cos()).collect();
    let mut v = DMatrix::zeros(n, n);
    let mut rhs = nalgebra::DVector::zeros(n);
    for k in 0..n {
        for j in 0..n {
            v[(k, j)] = chebyshev_t(k, xs[j]);
        }
        rhs[k] = if k % 2 == 0 { 2.0 / (1.0 - (k * k) as f64) } else { 0.0 };
    }
    let lu = v.lu();
    let w = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular { m: 0, reason: "Clenshaw-Curtis moment system".into() })?;
    let scale = 0.5 * (b - a);
    Ok(w.iter().map(|wi| wi * scale).collect())
}

fn chebyshev_t(k: usize, x: f64) -> f64 {
    // Stable on [-1, 1].
    (k as f64 * x.clamp(-1.0, 1.0).acos()).cos()
}
