//! Dense and tridiagonal linear-algebra helpers shared by the pipeline.
//!
//! General dense factorizations (LU, symmetric eigen, Schur) come from
//! nalgebra; the pieces that are specific to this problem live here.

mod expm;
mod tridiag;

pub use expm::expm;
pub use tridiag::SymTridiagonal;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Largest real part over the eigenvalues of a square matrix.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Eigenvalues of a general square matrix as `(re, im)` pairs sorted by real part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let mut ev: Vec<(f64, f64)> = m
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    ev
}

/// Sorted eigenvalues of the symmetric part of `m`.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let s = symmetrize(m);
    let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn max_sym_eig(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NEG_INFINITY)
}

pub fn min_sym_eig(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Ratio of smallest to largest singular value; zero for rank-deficient input.
pub fn relative_rank_gap(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Solver for the continuous Lyapunov equation `Aᵀ X + X A = C` with `A`
/// fixed, by LU factorization of the vectorized (Kronecker) operator.
///
/// The factorization is reused across right-hand sides, which the Riccati
/// fixed-point iteration relies on.
pub struct LyapunovSolver {
    n: usize,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl LyapunovSolver {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "Lyapunov operator must be square, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let nn = n * n;
        // column-major vec: vec(Aᵀ X) = (I ⊗ Aᵀ) vec X, vec(X A) = (Aᵀ ⊗ I) vec X
        let mut k = DMatrix::<f64>::zeros(nn, nn);
        for j in 0..n {
            for i in 0..n {
                let row = i + j * n;
                for l in 0..n {
                    // (I ⊗ Aᵀ): X(l, j) contributes A(l, i)
                    k[(row, l + j * n)] += a[(l, i)];
                    // (Aᵀ ⊗ I): X(i, l) contributes A(l, j)
                    k[(row, i + l * n)] += a[(l, j)];
                }
            }
        }
        Ok(Self { n, lu: k.lu() })
    }

    pub fn solve(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.n;
        if c.nrows() != n || c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side is {}x{}, expected {n}x{n}",
                c.nrows(),
                c.ncols()
            )));
        }
        let rhs = DVector::from_column_slice(c.as_slice());
        let x = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("Lyapunov operator is singular".into()))?;
        let x = DMatrix::from_column_slice(n, n, x.as_slice());
        Ok(symmetrize(&x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lyapunov_solver_matches_residual() {
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, 0.3, -1.5, 0.7, 0.0, -0.4, -3.0]);
        let c = -DMatrix::<f64>::identity(3, 3);
        let x = LyapunovSolver::new(&a).unwrap().solve(&c).unwrap();
        let res = a.transpose() * &x + &x * &a - &c;
        assert!(max_abs(&res) < 1e-12, "residual {}", max_abs(&res));
        assert!(min_sym_eig(&x) > 0.0);
    }

    #[test]
    fn abscissa_of_rotation_block() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 4.0, -4.0, -1.0]);
        assert!((spectral_abscissa(&m) + 1.0).abs() < 1e-12);
        let ev = eigenvalues(&m);
        assert!((ev[0].1.abs() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rank_gap_detects_deficiency() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(relative_rank_gap(&m) < 1e-15);
        assert!(relative_rank_gap(&DMatrix::identity(2, 2)) > 0.99);
    }
}
