//! Dense square matrices and a cyclic Jacobi symmetric eigensolver.

use std::fmt;

use crate::error::{Error, Result};

/// Row-major dense square matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Matrix { dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.dim != other.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: other.dim,
            });
        }
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest asymmetry `|a_ij - a_ji|` and where it occurs.
    pub fn max_asymmetry(&self) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0);
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                let gap = (self[(i, j)] - self[(j, i)]).abs();
                if gap > worst.2 || gap.is_nan() {
                    worst = (i, j, gap);
                }
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.dim, self.dim)?;
        for i in 0..self.dim {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub const JACOBI_TOLERANCE: f64 = 1e-13;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenpairs sorted by descending eigenvalue; column `j` of `vectors`
/// belongs to `values[j]` and has a non-negative leading entry.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Cyclic Jacobi rotations until the off-diagonal norm falls below
/// `JACOBI_TOLERANCE` times the Frobenius norm of the input.
///
/// The input is assumed symmetric; only its upper triangle matters after
/// the first rotation.
pub fn jacobi_eigen(input: &Matrix) -> Result<SymmetricEigen> {
    let n = input.dim();
    let mut a = input.clone();
    let mut v = Matrix::identity(n);
    let scale = input.frobenius_norm();
    let target = JACOBI_TOLERANCE * scale;

    let mut converged = false;
    for _ in 0..=JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= target || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(Error::Domain(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::from_fn(n, |r, c| v[(r, order[c])]);
    for c in 0..n {
        let lead = (0..n)
            .map(|r| vectors[(r, c)])
            .find(|x| x.abs() > 1e-12)
            .unwrap_or(0.0);
        if lead < 0.0 {
            for r in 0..n {
                vectors[(r, c)] = -vectors[(r, c)];
            }
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.dim();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += 2.0 * a[(i, j)] * a[(i, j)];
        }
    }
    sum.sqrt()
}

fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let n = a.dim();
    let apq = a[(p, q)];
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[(k, p)] = new_kp;
        a[(p, k)] = new_kp;
        a[(k, q)] = new_kq;
        a[(q, k)] = new_kq;
    }
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
