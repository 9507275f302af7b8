//! Dense matrices over a [`FieldSpec`] and Gaussian elimination.

use thiserror::Error;

use crate::field::{Fe, FieldSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("singular {0}x{0} system")]
    Singular(usize),
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Fe>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Fe::ZERO; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Fe>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<Fe>]) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), r, "ragged columns");
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `rows x points.len()` matrix with entry `(t, i) = points[i]^t`.
    pub fn vandermonde(field: &FieldSpec, points: &[Fe], rows: usize) -> Self {
        let cols: Vec<Vec<Fe>> = points.iter().map(|&p| field.powers(p, rows)).collect();
        if cols.is_empty() {
            return Matrix::zeros(rows, 0);
        }
        Matrix::from_columns(&cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Fe] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn top_rows(&self, n: usize) -> Matrix {
        Matrix {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn mul(&self, field: &FieldSpec, rhs: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::Shape(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] = field.add(out[(i, j)], field.mul(a, rhs[(k, j)]));
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, field: &FieldSpec, v: &[Fe]) -> Result<Vec<Fe>, LinalgError> {
        if self.cols != v.len() {
            return Err(LinalgError::Shape(format!(
                "{}x{} * vector of {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(Fe::ZERO, |acc, (&a, &b)| field.add(acc, field.mul(a, b)))
            })
            .collect())
    }

    /// Solves `self * x = rhs` for square `self`.
    pub fn solve(&self, field: &FieldSpec, rhs: &[Fe]) -> Result<Vec<Fe>, LinalgError> {
        let n = self.rows;
        if self.cols != n || rhs.len() != n {
            return Err(LinalgError::Shape(format!(
                "solve on {}x{} with rhs of {}",
                self.rows,
                self.cols,
                rhs.len()
            )));
        }
        let mut a = self.clone();
        let mut b = rhs.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| !a[(r, col)].is_zero())
                .ok_or(LinalgError::Singular(n))?;
            if pivot != col {
                a.swap_rows(pivot, col);
                b.swap(pivot, col);
            }
            let inv = field.inv(a[(col, col)]).expect("nonzero pivot");
            for j in col..n {
                a[(col, j)] = field.mul(a[(col, j)], inv);
            }
            b[col] = field.mul(b[col], inv);
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[(r, col)];
                if factor.is_zero() {
                    continue;
                }
                for j in col..n {
                    let v = field.mul(factor, a[(col, j)]);
                    a[(r, j)] = field.sub(a[(r, j)], v);
                }
                b[r] = field.sub(b[r], field.mul(factor, b[col]));
            }
        }
        Ok(b)
    }

    pub fn rank(&self, field: &FieldSpec) -> usize {
        let mut a = self.clone();
        let mut rank = 0;
        for col in 0..a.cols {
            let Some(pivot) = (rank..a.rows).find(|&r| !a[(r, col)].is_zero()) else {
                continue;
            };
            a.swap_rows(pivot, rank);
            let inv = field.inv(a[(rank, col)]).expect("nonzero pivot");
            for r in rank + 1..a.rows {
                let factor = field.mul(a[(r, col)], inv);
                if factor.is_zero() {
                    continue;
                }
                for j in col..a.cols {
                    let v = field.mul(factor, a[(rank, j)]);
                    a[(r, j)] = field.sub(a[(r, j)], v);
                }
            }
            rank += 1;
            if rank == a.rows {
                break;
            }
        }
        rank
    }

    pub fn is_invertible(&self, field: &FieldSpec) -> bool {
        self.rows == self.cols && self.rank(field) == self.rows
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = Fe;
    fn index(&self, (i, j): (usize, usize)) -> &Fe {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Fe {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vandermonde_solve_and_rank() {
        let f = FieldSpec::prime(19).unwrap();
        let pts = [Fe(2), Fe(3), Fe(5), Fe(7)];
        let v = Matrix::vandermonde(&f, &pts, 4);
        assert!(v.is_invertible(&f));
        let x = vec![Fe(1), Fe(0), Fe(18), Fe(4)];
        let rhs = v.mul_vec(&f, &x).unwrap();
        assert_eq!(v.solve(&f, &rhs).unwrap(), x);

        let dup = Matrix::vandermonde(&f, &[Fe(2), Fe(2), Fe(5)], 3);
        assert_eq!(dup.rank(&f), 2);
        assert_eq!(dup.solve(&f, &[Fe(1), Fe(1), Fe(1)]), Err(LinalgError::Singular(3)));
    }

    #[test]
    fn product_shapes() {
        let f = FieldSpec::prime(7).unwrap();
        let a = Matrix::from_rows(vec![vec![Fe(1), Fe(2)], vec![Fe(3), Fe(4)]]);
        let b = Matrix::from_rows(vec![vec![Fe(1)], vec![Fe(1)]]);
        let c = a.mul(&f, &b).unwrap();
        assert_eq!(c, Matrix::from_rows(vec![vec![Fe(3)], vec![Fe(0)]]));
        assert!(b.mul(&f, &b).is_err());
    }
}
