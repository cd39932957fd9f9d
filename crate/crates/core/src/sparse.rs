//! Compressed sparse rows and Jacobi-preconditioned conjugate gradients.

use crate::error::{GeomError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r},{c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = self.indptr[r]..self.indptr[r + 1];
        match self.indices[row.clone()].binary_search(&c) {
            Ok(k) => self.values[row.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                (self.indptr[r]..self.indptr[r + 1])
                    .map(|k| self.values[k] * x[self.indices[k]])
                    .sum()
            })
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    /// Keep the rows and columns where `keep` is true, renumbered in order.
    pub fn restrict(&self, keep: &[bool]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n];
        let mut m = 0;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                map[i] = m;
                m += 1;
            }
        }
        let mut trip = Vec::new();
        for r in 0..self.n {
            if !keep[r] {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                if keep[c] {
                    trip.push((map[r], map[c], self.values[k]));
                }
            }
        }
        CsrMatrix::from_triplets(m, trip)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|r| {
            (self.indptr[r]..self.indptr[r + 1]).all(|k| (self.values[k] - self.get(self.indices[k], r)).abs() <= tol)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Solve `A x = b` for symmetric positive (semi)definite `A`. With
/// `constant_kernel`, `A` is taken to annihilate constants; `b` and the
/// residuals are kept mean-free and the returned `x` has zero mean.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    constant_kernel: bool,
) -> Result<(Vec<f64>, CgOutcome)> {
    let n = a.dim();
    let mut rhs = b.to_vec();
    if constant_kernel {
        remove_mean(&mut rhs);
    }
    let bnorm = dot(&rhs, &rhs).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            CgOutcome {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precondition = |r: &[f64]| -> Vec<f64> {
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
        if constant_kernel {
            remove_mean(&mut z);
        }
        z
    };
    let mut r = rhs;
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(GeomError::Linear(format!(
                "conjugate gradients met non-positive curvature {pap:e} at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if constant_kernel {
            remove_mean(&mut r);
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            if constant_kernel {
                remove_mean(&mut x);
            }
            return Ok((
                x,
                CgOutcome {
                    iterations: it,
                    relative_residual: rel,
                },
            ));
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = dot(&r, &r).sqrt() / bnorm;
    Err(GeomError::Linear(format!(
        "conjugate gradients did not reach {tol:e} in {max_iter} iterations (relative residual {rel:e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplacian_1d(n: usize, periodic: bool, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 || periodic {
                t.push((i, (i + n - 1) % n, -1.0));
            }
            if i + 1 < n || periodic {
                t.push((i, (i + 1) % n, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn triplets_merge_and_lookup() {
        let a = CsrMatrix::from_triplets(3, vec![(0, 1, 1.0), (2, 2, 4.0), (0, 1, 2.0), (1, 0, -1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.matvec(&[1.0, 2.0, 3.0]), vec![6.0, -1.0, 12.0]);
        let r = a.restrict(&[true, false, true]);
        assert_eq!(r.dim(), 2);
        assert_eq!(r.get(1, 1), 4.0);
    }

    #[test]
    fn solves_spd_system() {
        let a = laplacian_1d(50, false, 0.0);
        assert!(a.is_symmetric(0.0));
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.matvec(&x_true);
        let (x, out) = pcg(&a, &b, 1e-13, 500, false).unwrap();
        assert!(out.relative_residual <= 1e-13);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn singular_periodic_system_returns_mean_free_solution() {
        let a = laplacian_1d(40, true, 0.0);
        let x_true: Vec<f64> = (0..40).map(|i| (2.0 * std::f64::consts::PI * i as f64 / 40.0).cos()).collect();
        let mut b = a.matvec(&x_true);
        b.iter_mut().for_each(|v| *v += 0.25);
        let (x, _) = pcg(&a, &b, 1e-12, 500, true).unwrap();
        assert!(x.iter().sum::<f64>().abs() < 1e-10);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn reports_iteration_cap() {
        let a = laplacian_1d(100, false, 0.0);
        let b = vec![1.0; 100];
        assert!(matches!(pcg(&a, &b, 1e-14, 3, false), Err(GeomError::Linear(_))));
    }

    proptest! {
        #[test]
        fn shifted_laplacians_converge(n in 10usize..60, shift in 0.01f64..2.0, seed in 0u64..1000) {
            let a = laplacian_1d(n, true, shift);
            let b: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 97) as f64 / 97.0 - 0.5).collect();
            let (x, _) = pcg(&a, &b, 1e-12, 10 * n, false).unwrap();
            let r = a.matvec(&x);
            for (u, v) in r.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
    }
}
