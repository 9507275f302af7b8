//! Coefficient matrices of `x^i · p₀(x)` for `p₀ = Π (x - root)`.

use crate::field::{Fe, FieldSpec};
use crate::linalg::Matrix;

use super::RepairError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnihilatorMatrix {
    pub roots: Vec<Fe>,
    /// `rows × r`, row `i` holds the coefficients of `x^i · p₀(x)` in
    /// ascending degree.
    pub coeffs: Matrix,
}

impl AnnihilatorMatrix {
    pub fn rows(&self) -> usize {
        self.coeffs.rows()
    }

    pub fn cols(&self) -> usize {
        self.coeffs.cols()
    }

    /// `P · (1, ρ, ..., ρ^(r-1))`.
    pub fn apply_to_point(&self, field: &FieldSpec, rho: Fe) -> Vec<Fe> {
        let col = field.powers(rho, self.cols());
        self.coeffs.mul_vec(field, &col).expect("column has r entries")
    }

    /// True when every root's power column maps to zero.
    pub fn annihilates_roots(&self, field: &FieldSpec) -> bool {
        self.roots
            .iter()
            .all(|&rho| self.apply_to_point(field, rho).iter().all(|v| v.is_zero()))
    }
}

/// Builds the `rows × r` annihilator of `roots`.
pub fn annihilator(field: &FieldSpec, roots: &[Fe], rows: usize, r: usize) -> Result<AnnihilatorMatrix, RepairError> {
    if rows + roots.len() > r {
        return Err(RepairError::DegreeOverflow {
            roots: roots.len(),
            rows,
            r,
        });
    }
    for (i, a) in roots.iter().enumerate() {
        if roots[..i].contains(a) {
            return Err(RepairError::DuplicateRoot(a.0));
        }
    }
    // p0 coefficients, ascending degree
    let mut p0 = vec![Fe::ONE];
    for &root in roots {
        let mut next = vec![Fe::ZERO; p0.len() + 1];
        for (d, &c) in p0.iter().enumerate() {
            next[d + 1] = field.add(next[d + 1], c);
            next[d] = field.sub(next[d], field.mul(c, root));
        }
        p0 = next;
    }
    let mut coeffs = Matrix::zeros(rows, r);
    for i in 0..rows {
        for (d, &c) in p0.iter().enumerate() {
            coeffs[(i, i + d)] = c;
        }
    }
    Ok(AnnihilatorMatrix {
        roots: roots.to_vec(),
        coeffs,
    })
}
