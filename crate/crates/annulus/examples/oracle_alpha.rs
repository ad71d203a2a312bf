// Development-only: compute the frozen alpha(s) oracle values.
use annulus::spectral::AnnulusGrid;
use nalgebra::{Cholesky, DMatrix};

/// Independent dense constrained discretization in velocity variables:
/// u_r = v(r) sin(m t), u_theta = w(r) cos(m t), w = (r v)'/m, v = 0 at walls.
fn alpha_oracle(
    a: f64, b: f64, nr: usize, m: usize, s: f64,
    nu: f64, rho_star: f64, alpha: f64,
    h: impl Fn(f64) -> f64, f_r: impl Fn(f64) -> f64,
) -> f64 {
    let grid = AnnulusGrid::new(a, b, nr, 8).unwrap();
    let d = &grid.dmat;
    let n = nr - 2;
    let mf = m as f64;
    // w-map: W = D diag(r) / m acting on full v; restrict columns to interior.
    let mut wmap = DMatrix::zeros(nr, nr);
    for i in 0..nr {
        for j in 0..nr {
            wmap[(i, j)] = d[(i, j)] * grid.r_nodes[j] / mf;
        }
    }
    let wq: Vec<f64> = (0..nr).map(|j| grid.w_radial[j] * grid.r_nodes[j]).collect();
    let pi = std::f64::consts::PI;
    // Build forms over interior v DOF.
    let mut jmat = DMatrix::zeros(n, n);
    let mut e1 = DMatrix::zeros(n, n);
    let mut e2 = DMatrix::zeros(n, n);
    // Helper: full-column vectors for basis v = e_(j+1).
    let basis: Vec<(Vec<f64>, Vec<f64>)> = (0..n).map(|q| {
        let mut v = vec![0.0; nr];
        v[q + 1] = 1.0;
        let w: Vec<f64> = (0..nr).map(|i| (0..nr).map(|j| wmap[(i, j)] * v[j]).sum()).collect();
        (v, w)
    }).collect();
    let deriv = |x: &Vec<f64>| -> Vec<f64> {
        (0..nr).map(|i| (0..nr).map(|j| d[(i, j)] * x[j]).sum()).collect()
    };
    let comps: Vec<[Vec<f64>; 6]> = basis.iter().map(|(v, w)| {
        let vp = deriv(v);
        let wp = deriv(w);
        let gtr: Vec<f64> = (0..nr).map(|j| (mf * v[j] - w[j]) / grid.r_nodes[j]).collect();
        let gtt: Vec<f64> = (0..nr).map(|j| (v[j] - mf * w[j]) / grid.r_nodes[j]).collect();
        [v.clone(), w.clone(), vp, wp, gtr, gtt]
    }).collect();
    for p in 0..n {
        for q in 0..n {
            let cp = &comps[p];
            let cq = &comps[q];
            let dot = |x: &Vec<f64>, y: &Vec<f64>| -> f64 {
                (0..nr).map(|j| x[j] * y[j] * wq[j]).sum()
            };
            jmat[(p, q)] = pi * (dot(&cp[0], &cq[0]) + dot(&cp[1], &cq[1]));
            let mut s1 = dot(&cp[2], &cq[2]) + dot(&cp[3], &cq[3]) + dot(&cp[4], &cq[4]) + dot(&cp[5], &cq[5]);
            s1 *= pi;
            // walls: pi w(b)^2 + pi a (1/a + alpha/nu) w(a)^2
            s1 += pi * cp[1][nr - 1] * cq[1][nr - 1];
            s1 += pi * a * (1.0 / a + alpha / nu) * cp[1][0] * cq[1][0];
            e1[(p, q)] = s1;
            let hdot: f64 = (0..nr)
                .map(|j| h(grid.r_nodes[j]) * cp[0][j] * f_r(grid.r_nodes[j]) * cq[0][j] * f_r(grid.r_nodes[j]) * wq[j])
                .sum();
            e2[(p, q)] = pi * hdot;
        }
    }
    let c = e1 * (s * nu) - e2 / rho_star;
    let chol = Cholesky::new(jmat).unwrap();
    let l = chol.l();
    let y = l.solve_lower_triangular(&c).unwrap();
    let asym = l.solve_lower_triangular(&y.transpose()).unwrap().transpose();
    let asym = (asym.clone() + asym.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(asym);
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn main() {
    // Spec benchmark: a=1, b=2, f=ln r, rho_s=r (h=r), nu=0.1, rho*=1, alpha=0, m=2, Nr=24.
    let v = alpha_oracle(1.0, 2.0, 24, 2, 0.05, 0.1, 1.0, 0.0, |r| r, |r| 1.0 / r);
    println!("alpha(0.05) m=2 Nr=24 unstable: {v:.16e}");
    // Stable config (gamma=1 family): h = -1.
    let vs = alpha_oracle(1.0, 2.0, 12, 2, 0.05, 0.1, 1.0, 0.0, |_| -1.0, |r| 1.0 / r);
    println!("alpha(0.05) m=2 Nr=12 stable:   {vs:.16e}");
    for s in [0.02, 0.05, 0.1, 0.2, 0.5] {
        let u = alpha_oracle(1.0, 2.0, 12, 2, s, 0.1, 1.0, 0.0, |r| r, |r| 1.0 / r);
        println!("alpha({s}) m=2 Nr=12 unstable: {u:.16e}");
    }
}
