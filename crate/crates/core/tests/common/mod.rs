//! Dense reference computations that share nothing with the library's
//! solvers: Fourier differentiation matrices, LU Newton, full eigensolves.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

/// Periodic Fourier second-derivative matrix on `n` (even) points of `[0, 1)`.
pub fn fourier_d2(n: usize) -> DMatrix<f64> {
    assert!(n.is_multiple_of(2));
    let h = 2.0 * PI / n as f64;
    let scale = (2.0 * PI).powi(2);
    DMatrix::from_fn(n, n, |i, j| {
        let v = if i == j {
            -PI * PI / (3.0 * h * h) - 1.0 / 6.0
        } else {
            let k = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            -sign / (2.0 * (k * h / 2.0).sin().powi(2))
        };
        scale * v
    })
}

/// Laplacian on the unit 2-torus, `n × n` points, row-major.
pub fn dense_laplacian_2d(n: usize) -> DMatrix<f64> {
    let d2 = fourier_d2(n);
    let eye = DMatrix::<f64>::identity(n, n);
    d2.kronecker(&eye) + eye.kronecker(&d2)
}

pub fn grid_2d(n: usize, f: impl Fn(f64, f64) -> f64) -> DVector<f64> {
    DVector::from_fn(n * n, |idx, _| {
        let (i, j) = (idx / n, idx % n);
        f(i as f64 / n as f64, j as f64 / n as f64)
    })
}

/// Damped Newton for `-Δu + α = S e^{2u/n}` with a dense LU Jacobian.
pub fn dense_newton(lap: &DMatrix<f64>, s: &DVector<f64>, alpha: f64, n: u32, start: &DVector<f64>) -> Option<DVector<f64>> {
    let q = 2.0 / n as f64;
    let residual = |u: &DVector<f64>| -> DVector<f64> {
        let e = u.map(|v| (q * v).exp());
        -(lap * u) + DVector::from_element(u.len(), alpha) - s.component_mul(&e)
    };
    let mut u = start.clone();
    let mut f = residual(&u);
    for _ in 0..60 {
        let norm = f.amax();
        if norm <= 1e-10 {
            return Some(u);
        }
        if !norm.is_finite() || u.amax() > 60.0 {
            return None;
        }
        let w = s.component_mul(&u.map(|v| (q * v).exp())) * q;
        let jac = -lap - DMatrix::from_diagonal(&w);
        let step = jac.lu().solve(&(-&f))?;
        let mut t = 1.0;
        loop {
            let trial = &u + &step * t;
            let ft = residual(&trial);
            if ft.amax() < (1.0 - 1e-4 * t) * norm {
                u = trial;
                f = ft;
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                return None;
            }
        }
    }
    None
}

/// Walks α down from -1 in steps of 0.25 with warm starts, then bisects the
/// first solved/failed pair to width `tol`. Returns `(failed, solved)`.
pub fn dense_alpha_star(n: usize, s: impl Fn(f64, f64) -> f64, tol: f64) -> (f64, f64) {
    let lap = dense_laplacian_2d(n);
    let s = grid_2d(n, s);
    let mut solved = -1.0;
    let mut u = dense_newton(&lap, &s, solved, 1, &DVector::zeros(n * n)).expect("oracle solves at alpha = -1");
    let mut failed = solved - 0.25;
    while let Some(next) = dense_newton(&lap, &s, failed, 1, &u) {
        solved = failed;
        u = next;
        failed -= 0.25;
        assert!(failed > -100.0, "oracle never failed");
    }
    while solved - failed > tol {
        let mid = 0.5 * (solved + failed);
        match dense_newton(&lap, &s, mid, 1, &u) {
            Some(next) => {
                solved = mid;
                u = next;
            }
            None => failed = mid,
        }
    }
    (failed, solved)
}

/// Smallest eigenvalue of `-Δ + V` on the unit 2-torus by full dense eigensolve.
pub fn dense_min_eig_2d(n: usize, v: impl Fn(f64, f64) -> f64) -> f64 {
    let op = -dense_laplacian_2d(n) + DMatrix::from_diagonal(&grid_2d(n, v));
    op.symmetric_eigen().eigenvalues.min()
}
