/// Real symmetric tridiagonal matrix with eigenpairs by Sturm-sequence
/// bisection and inverse iteration.
///
/// Only the lowest part of the spectrum is ever needed here, so the cost is
/// `O(n)` per bisection step and per inverse-iteration sweep.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    /// `off[i]` couples rows `i` and `i + 1`.
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty());
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.dim() {
            let qq = if q.abs() < tiny { tiny.copysign(q) } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / qq;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `k`-th smallest eigenvalue (0-based), bisected to machine precision.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k < self.dim());
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..256 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Unit eigenvector for an (accurately known) eigenvalue `lambda`.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.dim();
        let scale = self
            .diag
            .iter()
            .chain(self.off.iter())
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        // shift slightly off the eigenvalue so the factorization stays regular
        let shift = lambda + 4.0 * f64::EPSILON * scale.max(1.0);
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.001 * ((i * 7919) % 101) as f64).collect();
        for _ in 0..4 {
            x = self.shifted_solve(shift, &x, scale);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
        }
        x
    }

    /// Solves `(T - shift I) y = rhs` by Gaussian elimination with partial pivoting.
    fn shifted_solve(&self, shift: f64, rhs: &[f64], scale: f64) -> Vec<f64> {
        let n = self.dim();
        let tiny = f64::EPSILON * scale.max(1.0);
        let mut x = rhs.to_vec();
        if n == 1 {
            let d = self.diag[0] - shift;
            x[0] /= if d.abs() < tiny { tiny } else { d };
            return x;
        }
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - shift).collect();
        let mut dl = self.off.clone();
        let mut du = self.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i].abs() < tiny {
                    d[i] = tiny;
                }
                let f = dl[i] / d[i];
                d[i + 1] -= f * du[i];
                x[i + 1] -= f * x[i];
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - f * tmp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du2[i];
                }
                du[i] = tmp;
                let t = x[i];
                x[i] = x[i + 1];
                x[i + 1] = t - f * x[i + 1];
            }
            dl[i] = 0.0;
        }
        if d[n - 1].abs() < tiny {
            d[n - 1] = tiny;
        }
        x[n - 1] /= d[n - 1];
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn discrete_laplacian_eigenvalues() {
        let n = 50;
        let t = laplacian(n);
        for k in 0..5 {
            let exact = 4.0 * (((k + 1) as f64) * PI / (2.0 * (n + 1) as f64)).sin().powi(2);
            assert!((t.eigenvalue(k) - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn eigenvector_has_small_residual() {
        let t = SymTridiagonal::new(
            (0..40).map(|i| 2.0 + 0.01 * i as f64).collect(),
            (0..39).map(|i| -1.0 - 0.002 * i as f64).collect(),
        );
        for k in [0, 3, 10] {
            let lam = t.eigenvalue(k);
            let v = t.eigenvector(lam);
            let n = t.dim();
            let mut res = 0.0_f64;
            for i in 0..n {
                let mut tv = t.diag[i] * v[i];
                if i > 0 {
                    tv += t.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    tv += t.off[i] * v[i + 1];
                }
                res = res.max((tv - lam * v[i]).abs());
            }
            assert!(res < 1e-12, "mode {k}: residual {res}");
        }
    }

    #[test]
    fn pivoting_path_is_exercised() {
        // tiny diagonal forces row swaps in the elimination
        let t = SymTridiagonal::new(vec![1e-3, 5.0, 1e-3, 4.0], vec![2.0, 1.0, 3.0]);
        let rhs = vec![1.0, 2.0, 3.0, 4.0];
        let y = t.shifted_solve(0.0, &rhs, 5.0);
        let tv = [
            t.diag[0] * y[0] + t.off[0] * y[1],
            t.off[0] * y[0] + t.diag[1] * y[1] + t.off[1] * y[2],
            t.off[1] * y[1] + t.diag[2] * y[2] + t.off[2] * y[3],
            t.off[2] * y[2] + t.diag[3] * y[3],
        ];
        for (a, b) in tv.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
