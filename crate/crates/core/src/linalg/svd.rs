//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! The tall orientation is orthogonalised column by column: rotations are
//! applied to pairs of columns of a working copy `W = A V` until every pair is
//! orthogonal to `tol` relative to the product of their norms. Singular values
//! are the final column norms, `U` the normalised columns and `V` the
//! accumulated rotations. Wide inputs are handled through the transpose.

use super::matrix::{dot, DenseMatrix};
use super::LinalgError;

pub const DEFAULT_SVD_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_SWEEPS: usize = 60;

/// Thin factors `A = U diag(s) Vᵀ` with `r = min(rows, cols)` columns.
#[derive(Clone, Debug)]
pub struct SvdFactorization {
    /// `n × r`, orthonormal columns.
    pub u: DenseMatrix,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// `m × r`, orthonormal columns.
    pub v: DenseMatrix,
}

impl SvdFactorization {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Number of singular values above `rel_tol · s₁`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let s1 = self.s.first().copied().unwrap_or(0.0);
        if s1 == 0.0 {
            return 0;
        }
        self.s.iter().take_while(|&&v| v > s1 * rel_tol).count()
    }

    /// Factorisation of `factor · A`: singular values scale, vectors do not.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0, "scale factor must be positive");
        Self {
            u: self.u.clone(),
            s: self.s.iter().map(|v| v * factor).collect(),
            v: self.v.clone(),
        }
    }

    /// `U diag(s) Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let (n, r) = self.u.shape();
        let m = self.v.rows();
        let mut us = self.u.clone();
        for i in 0..n {
            for (j, s) in self.s.iter().enumerate() {
                us.data_mut()[i * r + j] *= s;
            }
        }
        let mut out = DenseMatrix::zeros(n, m);
        super::matrix::gemm(1.0, &us, false, &self.v, true, 0.0, &mut out);
        out
    }

    /// `Uᵀ y`.
    pub fn project_data(&self, y: &[f64]) -> Vec<f64> {
        self.u.tr_matvec(y).expect("data length must equal operator rows")
    }

    /// `V z`.
    pub fn lift_latent(&self, z: &[f64]) -> Vec<f64> {
        self.v.matvec(z).expect("latent length must equal rank")
    }
}

/// One-sided Jacobi thin SVD.
pub fn svd_thin(a: &DenseMatrix, tol: f64, max_sweeps: usize) -> Result<SvdFactorization, LinalgError> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Err(LinalgError::Empty);
    }
    if !a.is_finite() {
        let idx = a.data().iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(LinalgError::NonFinite {
            row: idx / cols,
            col: idx % cols,
        });
    }
    if rows >= cols {
        jacobi_tall(a, tol, max_sweeps)
    } else {
        let f = jacobi_tall(&a.transpose(), tol, max_sweeps)?;
        let mut swapped = SvdFactorization {
            u: f.v,
            s: f.s,
            v: f.u,
        };
        fix_signs(&mut swapped);
        Ok(swapped)
    }
}

fn jacobi_tall(a: &DenseMatrix, tol: f64, max_sweeps: usize) -> Result<SvdFactorization, LinalgError> {
    let (p, q) = a.shape();
    // Column-major working copies: column j of W lives at w[j*p..(j+1)*p].
    let mut w = vec![0.0; p * q];
    for r in 0..p {
        for c in 0..q {
            w[c * p + r] = a.get(r, c);
        }
    }
    let mut v = vec![0.0; q * q];
    for j in 0..q {
        v[j * q + j] = 1.0;
    }

    let mut converged = q < 2;
    let mut last_off = 0.0_f64;
    for _sweep in 0..max_sweeps {
        if converged {
            break;
        }
        let mut rotated = false;
        let mut off = 0.0_f64;
        for i in 0..q - 1 {
            for j in i + 1..q {
                let (wi, wj) = column_pair(&mut w, p, i, j);
                let (alpha, beta, gamma) = gram3(wi, wj);
                let scale = (alpha * beta).sqrt();
                if scale == 0.0 || !scale.is_finite() {
                    continue;
                }
                let rel = gamma.abs() / scale;
                off = off.max(rel);
                if rel <= tol {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(wi, wj, c, s);
                let (vi, vj) = column_pair(&mut v, q, i, j);
                rotate(vi, vj, c, s);
            }
        }
        last_off = off;
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(LinalgError::SvdNoConvergence {
            sweeps: max_sweeps,
            off_norm: last_off,
        });
    }

    let mut order: Vec<(usize, f64)> = (0..q)
        .map(|j| (j, super::matrix::norm2(&w[j * p..(j + 1) * p])))
        .collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));

    let smax = order[0].1;
    let zero_cut = smax * (p as f64) * f64::EPSILON;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(q);
    let mut s = Vec::with_capacity(q);
    let mut v_out = DenseMatrix::zeros(q, q);
    for (k, &(j, sigma)) in order.iter().enumerate() {
        let col = &w[j * p..(j + 1) * p];
        let ucol = if sigma > zero_cut {
            col.iter().map(|x| x / sigma).collect()
        } else {
            vec![0.0; p]
        };
        u_cols.push(ucol);
        s.push(if sigma > zero_cut { sigma } else { 0.0 });
        for r in 0..q {
            v_out.set(r, k, v[j * q + r]);
        }
    }
    orthonormalise_columns(&mut u_cols, &s);

    let mut u = DenseMatrix::zeros(p, q);
    for (k, col) in u_cols.iter().enumerate() {
        for r in 0..p {
            u.set(r, k, col[r]);
        }
    }
    let mut f = SvdFactorization { u, s, v: v_out };
    fix_signs(&mut f);
    Ok(f)
}

/// Two passes of modified Gram–Schmidt in singular-value order. Columns that
/// belong to zero singular values are completed from the canonical basis.
fn orthonormalise_columns(cols: &mut [Vec<f64>], s: &[f64]) {
    let p = cols.first().map_or(0, Vec::len);
    let mut next_basis = 0usize;
    for k in 0..cols.len() {
        if s[k] == 0.0 {
            loop {
                let mut cand = vec![0.0; p];
                cand[next_basis % p] = 1.0;
                next_basis += 1;
                let norm = project_out(&mut cand, &cols[..k]);
                if norm > 0.5 || next_basis > 2 * p + cols.len() {
                    cols[k] = cand;
                    break;
                }
            }
        } else {
            let (done, rest) = cols.split_at_mut(k);
            project_out(&mut rest[0], done);
        }
    }
}

/// Removes the components along `basis` (twice) and normalises; returns the
/// norm that remained before normalising.
fn project_out(x: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(x, b);
            if c != 0.0 {
                super::matrix::axpy(-c, b, x);
            }
        }
    }
    let n = super::matrix::norm2(x);
    if n > 0.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
    n
}

/// Largest-magnitude entry of each `v` column positive; `u` follows.
fn fix_signs(f: &mut SvdFactorization) {
    let r = f.s.len();
    for k in 0..r {
        let mut best = 0.0_f64;
        let mut sign = 1.0;
        for row in 0..f.v.rows() {
            let x = f.v.get(row, k);
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            for row in 0..f.v.rows() {
                let x = f.v.get(row, k);
                f.v.set(row, k, -x);
            }
            for row in 0..f.u.rows() {
                let x = f.u.get(row, k);
                f.u.set(row, k, -x);
            }
        }
    }
}

#[inline]
fn column_pair(buf: &mut [f64], len: usize, i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(i < j);
    let (head, tail) = buf.split_at_mut(j * len);
    (&mut head[i * len..(i + 1) * len], &mut tail[..len])
}

#[inline]
fn gram3(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let mut aa = [0.0_f64; 4];
    let mut bb = [0.0_f64; 4];
    let mut ab = [0.0_f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            aa[l] += x[l] * x[l];
            bb[l] += y[l] * y[l];
            ab[l] += x[l] * y[l];
        }
    }
    let mut t = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(rb) {
        t.0 += x * x;
        t.1 += y * y;
        t.2 += x * y;
    }
    (
        (aa[0] + aa[1]) + (aa[2] + aa[3]) + t.0,
        (bb[0] + bb[1]) + (bb[2] + bb[3]) + t.1,
        (ab[0] + ab[1]) + (ab[2] + ab[3]) + t.2,
    )
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let a = *xi;
        let b = *yi;
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matmul;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = seeded(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    /// Cyclic two-sided Jacobi eigenvalues of a symmetric matrix. Independent
    /// of the factorisation under test.
    fn symmetric_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
        let n = m.rows();
        let mut a = m.clone();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a.get(p, q).powi(2);
                }
            }
            if off.sqrt() < 1e-15 * a.frobenius_norm() {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    fn orthogonality_drift(q: &DenseMatrix) -> f64 {
        let g = matmul(&q.transpose(), q).unwrap();
        g.sub(&DenseMatrix::identity(g.rows())).unwrap().max_abs()
    }

    #[test]
    fn identity() {
        let f = svd_thin(&DenseMatrix::identity(3), DEFAULT_SVD_TOL, DEFAULT_MAX_SWEEPS).unwrap();
        assert_eq!(f.s, vec![1.0, 1.0, 1.0]);
        assert!(orthogonality_drift(&f.u) < 1e-15);
        assert!(orthogonality_drift(&f.v) < 1e-15);
    }

    #[test]
    fn diagonal() {
        let a = DenseMatrix::from_diag(&[1.0, 3.0, 2.0]);
        let f = svd_thin(&a, DEFAULT_SVD_TOL, DEFAULT_MAX_SWEEPS).unwrap();
        assert_eq!(f.s, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn matches_gram_eigenvalues() {
        let a = random(16, 12, 7);
        let f = svd_thin(&a, DEFAULT_SVD_TOL, DEFAULT_MAX_SWEEPS).unwrap();
        let gram = matmul(&a.transpose(), &a).unwrap();
        let ev = symmetric_eigenvalues(&gram);
        for (s, e) in f.s.iter().zip(&ev) {
            let rel = (s - e.sqrt()).abs() / e.sqrt();
            assert!(rel < 1e-9, "{s} vs {}", e.sqrt());
        }
    }

    #[test]
    fn wide_matrix_uses_transpose() {
        let a = random(5, 9, 3);
        let f = svd_thin(&a, DEFAULT_SVD_TOL, DEFAULT_MAX_SWEEPS).unwrap();
        assert_eq!(f.u.shape(), (5, 5));
        assert_eq!(f.v.shape(), (9, 5));
        let err = f.reconstruct().sub(&a).unwrap().frobenius_norm();
        assert!(err <= 1e-12 * a.frobenius_norm());
    }

    #[test]
    fn rank_deficient_completes_u() {
        // Rank 2 matrix: third column is the sum of the first two.
        let mut a = random(6, 3, 11);
        for r in 0..6 {
            let v = a.get(r, 0) + a.get(r, 1);
            a.set(r, 2, v);
        }
        let f = svd_thin(&a, DEFAULT_SVD_TOL, DEFAULT_MAX_SWEEPS).unwrap();
        assert!(f.s[2] < 1e-12 * f.s[0]);
        assert_eq!(f.numerical_rank(1e-10), 2);
        assert!(orthogonality_drift(&f.u) < 1e-10);
        let err = f.reconstruct().sub(&a).unwrap().frobenius_norm();
        assert!(err <= 1e-12 * a.frobenius_norm());
    }

    #[test]
    fn zero_matrix() {
        let f = svd_thin(&DenseMatrix::zeros(3, 2), DEFAULT_SVD_TOL, DEFAULT_MAX_SWEEPS).unwrap();
        assert_eq!(f.s, vec![0.0, 0.0]);
        assert!(orthogonality_drift(&f.u) < 1e-15);
    }

    #[test]
    fn sign_convention() {
        let f = svd_thin(&random(8, 5, 2), DEFAULT_SVD_TOL, DEFAULT_MAX_SWEEPS).unwrap();
        for k in 0..5 {
            let col = f.v.column(k);
            let big = col.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn non_convergence_reports_off_norm() {
        let err = svd_thin(&random(10, 10, 4), 1e-14, 1).unwrap_err();
        match err {
            LinalgError::SvdNoConvergence { sweeps, off_norm } => {
                assert_eq!(sweeps, 1);
                assert!(off_norm > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn factor_invariants(seed in 0u64..10_000, rows in 1usize..12, cols in 1usize..12) {
            let a = random(rows, cols, seed);
            let f = svd_thin(&a, DEFAULT_SVD_TOL, DEFAULT_MAX_SWEEPS).unwrap();
            prop_assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(f.s.iter().all(|&x| x >= 0.0));
            prop_assert!(orthogonality_drift(&f.u) <= 1e-10);
            prop_assert!(orthogonality_drift(&f.v) <= 1e-10);
            let err = f.reconstruct().sub(&a).unwrap().frobenius_norm();
            prop_assert!(err <= 1e-10 * a.frobenius_norm());
        }
    }
}
