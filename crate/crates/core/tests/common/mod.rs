//! Shared test oracles, independent of the library's linear algebra paths.
#![allow(dead_code)] // each test binary uses its own subset

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations.
/// Returned descending. Written as a from-scratch oracle: no SVD, no
/// library eigensolver.
pub fn jacobi_hermitian_eigenvalues(input: &DMatrix<Complex64>) -> Vec<f64> {
    assert_eq!(input.nrows(), input.ncols(), "oracle needs a square matrix");
    let n = input.nrows();
    let mut a = input.clone();

    let off = |a: &DMatrix<Complex64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };
    let scale: f64 = input.norm().max(1e-300);

    for _sweep in 0..100 {
        if off(&a) <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() <= 1e-300 {
                    continue;
                }
                // unitary 2x2 rotation zeroing the (p, q) element:
                // first strip the phase of a_pq, then a real Jacobi rotation.
                let phase = apq / Complex64::new(apq.norm(), 0.0);
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = 0.5 * (2.0 * apq.norm()).atan2(aqq - app);
                let (s, c) = theta.sin_cos();
                let cp = Complex64::new(c, 0.0);
                let sp = phase * Complex64::new(s, 0.0);
                // columns: [p q] <- [p q] * [[c, s*phase], [-s*conj(phase)... ]]
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * cp - aiq * sp.conj();
                    a[(i, q)] = aip * sp + aiq * cp;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj * cp - aqj * sp;
                    a[(q, j)] = apj * sp.conj() + aqj * cp;
                }
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
    eig
}

/// Minimum-norm least-squares solution for a full-row-rank system via the
/// row Gram matrix: `z = A^H (A A^H)^{-1} y`. Uses a from-scratch
/// Gauss-Jordan inverse, so the route shares nothing with the library's
/// SVD solver.
pub fn min_norm_solution_oracle(
    a: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
) -> DVector<Complex64> {
    let gram = a * a.adjoint();
    let inv = gauss_jordan_inverse(&gram);
    a.adjoint() * (inv * y)
}

/// Ridge variant for rank-deficient systems:
/// `z(mu) = A^H (A A^H + mu I)^{-1} y`, which approaches the minimum-norm
/// least-squares solution as `mu -> 0` while staying invertible.
pub fn ridge_min_norm_oracle(
    a: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
    mu: f64,
) -> DVector<Complex64> {
    let mut gram = a * a.adjoint();
    for i in 0..gram.nrows() {
        gram[(i, i)] += Complex64::new(mu, 0.0);
    }
    let inv = gauss_jordan_inverse(&gram);
    a.adjoint() * (inv * y)
}

/// Dense Gauss-Jordan inverse with partial pivoting.
fn gauss_jordan_inverse(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut inv = DMatrix::<Complex64>::identity(n, n);
    for col in 0..n {
        let mut pivot = col;
        for r in (col + 1)..n {
            if a[(r, col)].norm() > a[(pivot, col)].norm() {
                pivot = r;
            }
        }
        assert!(a[(pivot, col)].norm() > 0.0, "singular matrix in oracle");
        if pivot != col {
            a.swap_rows(pivot, col);
            inv.swap_rows(pivot, col);
        }
        let d = a[(col, col)];
        for j in 0..n {
            a[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[(r, col)];
            if f.norm() == 0.0 {
                continue;
            }
            for j in 0..n {
                let acj = a[(col, j)];
                let icj = inv[(col, j)];
                a[(r, j)] -= f * acj;
                inv[(r, j)] -= f * icj;
            }
        }
    }
    inv
}

/// Seeded complex matrix with entries uniform in the unit square.
pub fn random_complex_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = risim_core::rng::substream(seed, risim_core::rng::StreamDomain::Sweep, 17);
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Seeded complex vector.
pub fn random_complex_vector(n: usize, seed: u64) -> DVector<Complex64> {
    let mut rng = risim_core::rng::substream(seed, risim_core::rng::StreamDomain::Sweep, 18);
    DVector::from_fn(n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}
