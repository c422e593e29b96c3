use super::matrix::DenseMatrix;
use super::LinalgError;

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    /// Factorises a symmetric positive definite matrix. Only the lower
    /// triangle of `a` is read.
    pub fn new(a: &DenseMatrix) -> Result<Self, LinalgError> {
        let (n, m) = a.shape();
        if n != m {
            return Err(LinalgError::Shape {
                op: "cholesky",
                left: (n, m),
                right: (m, n),
            });
        }
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let lj = l.row(j)[..j].to_vec();
            let d = a.get(j, j) - super::dot(&lj, &lj);
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotSpd { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l.set(j, j, djj);
            for i in j + 1..n {
                let s = a.get(i, j) - super::dot(&l.row(i)[..j], &lj);
                l.set(i, j, s / djj);
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinalgError::Shape {
                op: "cholesky_solve",
                left: (n, n),
                right: (b.len(), 1),
            });
        }
        // L y = b
        let mut y = b.to_vec();
        for i in 0..n {
            let s = super::dot(&self.l.row(i)[..i], &y[..i]);
            y[i] = (y[i] - s) / self.l.get(i, i);
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l.get(k, i) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        Ok(y)
    }

    /// Solves for every column of `b`.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for c in 0..b.cols() {
            let x = self.solve(&b.column(c))?;
            for (r, v) in x.into_iter().enumerate() {
                out.set(r, c, v);
            }
        }
        Ok(out)
    }
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    Cholesky::new(a)?.solve(b)
}
