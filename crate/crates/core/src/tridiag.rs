//! Lowest eigenpairs of a real symmetric tridiagonal matrix.
//!
//! Eigenvalues come from Sturm-sequence bisection, eigenvectors from inverse
//! iteration with a partially pivoted tridiagonal LU, followed by a
//! Gram-Schmidt pass. Cost is linear in the matrix size per eigenpair, which
//! is what makes fine vertical grids cheap.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty(), "empty matrix");
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length must be n-1");
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            let e = self.off[i - 1];
            let denom = if q == 0.0 { f64::EPSILON * (e.abs() + f64::MIN_POSITIVE) } else { q };
            q = (self.diag[i] - x) - e * e / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
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

    /// The `k` smallest eigenvalues in ascending order.
    pub fn lowest_eigenvalues(&self, k: usize) -> Vec<f64> {
        let n = self.len();
        assert!(k <= n, "requested {k} eigenvalues of a {n}x{n} matrix");
        let (glo, ghi) = self.gershgorin();
        // Tighten the upper bracket: the k-th eigenvalue is usually far below ghi.
        let mut hi = glo + 1.0;
        while hi < ghi && self.count_below(hi) < k {
            hi = glo + 2.0 * (hi - glo);
        }
        let hi = hi.min(ghi + 1.0);

        let mut values = Vec::with_capacity(k);
        let mut lower = glo - 1.0;
        for j in 0..k {
            // Find x with count_below(x) == j+1 boundary.
            let mut a = lower;
            let mut b = hi;
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if self.count_below(mid) > j {
                    b = mid;
                } else {
                    a = mid;
                }
                if b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
                    break;
                }
            }
            let lambda = 0.5 * (a + b);
            values.push(lambda);
            lower = a;
        }
        values
    }

    fn mul(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    /// The `k` smallest eigenpairs. Eigenvectors are unit vectors in the
    /// plain Euclidean norm.
    pub fn lowest_eigenpairs(&self, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let values = self.lowest_eigenvalues(k);
        let n = self.len();
        let scale = self
            .diag
            .iter()
            .chain(self.off.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(1.0);

        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut work = vec![0.0; n];
        for (j, &lambda) in values.iter().enumerate() {
            let lu = ShiftedLu::factor(self, lambda, scale);
            // deterministic, non-symmetric start vector
            let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919 + j) % 13) as f64).collect();
            let mut converged = false;
            for _ in 0..8 {
                lu.solve(&mut x);
                for prev in &vectors {
                    let d = dot(prev, &x);
                    axpy(-d, prev, &mut x);
                }
                normalize(&mut x);
                self.mul(&x, &mut work);
                let resid = work
                    .iter()
                    .zip(&x)
                    .map(|(tx, xi)| (tx - lambda * xi).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if resid <= 1e-10 * scale {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::ConvergenceFailure(format!(
                    "inverse iteration for eigenvalue {j} ({lambda:.6e}) did not converge"
                )));
            }
            vectors.push(x);
        }
        Ok((values, vectors))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn normalize(x: &mut [f64]) {
    let n = dot(x, x).sqrt();
    for v in x.iter_mut() {
        *v /= n;
    }
}

/// LU factorisation of `T - λI` with partial pivoting.
struct ShiftedLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(t: &SymTridiagonal, lambda: f64, scale: f64) -> Self {
        let n = t.len();
        let tiny = f64::EPSILON * scale;
        let mut u0: Vec<f64> = t.diag.iter().map(|d| d - lambda).collect();
        let mut u1: Vec<f64> = t.off.clone();
        let mut u2 = vec![0.0; n.saturating_sub(2)];
        let mut mult = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            let sub = t.off[i];
            if sub.abs() > u0[i].abs() {
                swapped[i] = true;
                let (s0, s1) = (u0[i], u1[i]);
                let r1 = u0[i + 1];
                let r2 = if i + 1 < n - 1 { u1[i + 1] } else { 0.0 };
                u0[i] = sub;
                u1[i] = r1;
                if i < n - 2 {
                    u2[i] = r2;
                }
                let m = s0 / sub;
                mult[i] = m;
                u0[i + 1] = s1 - m * r1;
                if i + 1 < n - 1 {
                    u1[i + 1] = -m * r2;
                }
            } else {
                if u0[i] == 0.0 {
                    u0[i] = tiny;
                }
                let m = sub / u0[i];
                mult[i] = m;
                u0[i + 1] -= m * u1[i];
            }
        }
        for p in u0.iter_mut() {
            if p.abs() < tiny {
                *p = if *p < 0.0 { -tiny } else { tiny };
            }
        }
        Self { u0, u1, u2, mult, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.mult[i] * b[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.u1[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * b[i + 2];
            }
            b[i] = s / self.u0[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn dirichlet_laplacian_closed_form() {
        // eigenvalues 2 - 2 cos(kπ/(n+1)), eigenvectors sin(ikπ/(n+1))
        let n = 200;
        let t = laplacian(n);
        let (vals, vecs) = t.lowest_eigenpairs(5).unwrap();
        for (k, (v, x)) in vals.iter().zip(&vecs).enumerate() {
            let theta = (k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64;
            assert!((v - (2.0 - 2.0 * theta.cos())).abs() < 1e-13, "{k}: {v}");
            let exact: Vec<f64> = (1..=n).map(|i| (i as f64 * theta).sin()).collect();
            let norm = dot(&exact, &exact).sqrt();
            let overlap = dot(&exact, x).abs() / norm;
            assert!((overlap - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sturm_count_brackets_spectrum() {
        let t = laplacian(50);
        assert_eq!(t.count_below(-0.1), 0);
        assert_eq!(t.count_below(4.1), 50);
        assert_eq!(t.count_below(2.0 + 1e-9), 25 + 0);
    }

    #[test]
    fn agrees_with_dense_solver() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 3.0).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 0.5 + ((i * 13) % 5) as f64 * 0.3).collect();
        let t = SymTridiagonal::new(diag.clone(), off.clone());
        let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = off[i];
                m[(i + 1, i)] = off[i];
            }
        }
        let mut dense: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        let (vals, vecs) = t.lowest_eigenpairs(8).unwrap();
        for (a, b) in vals.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        for i in 0..vecs.len() {
            for j in 0..vecs.len() {
                let d = dot(&vecs[i], &vecs[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12);
            }
        }
    }
}
