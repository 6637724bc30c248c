//! Exact rational linear algebra: scalars, dense and sparse matrices,
//! kernels, images, linear solves and quotient dimensions.
//!
//! Everything downstream (cochain complexes, bar resolutions, homotopy
//! residuals) reduces to these primitives. All arithmetic is exact: scalars
//! are arbitrary-precision rationals kept in lowest terms with positive
//! denominators, so pivot choices affect performance only, never answers.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// The ground field: arbitrary-precision rationals, always normalized
/// (lowest terms, positive denominator) by the underlying representation.
pub type Scalar = num_rational::BigRational;

/// Integer scalar.
pub fn q(n: i64) -> Scalar {
    Scalar::from_integer(BigInt::from(n))
}

/// Rational scalar `n/d`.
pub fn qq(n: i64, d: i64) -> Scalar {
    Scalar::new(BigInt::from(n), BigInt::from(d))
}

/// `(-1)^e` for a possibly negative exponent.
pub fn sign_pow(e: i64) -> Scalar {
    if e.rem_euclid(2) == 0 {
        q(1)
    } else {
        q(-1)
    }
}

/// Renders a scalar as `"p"` or `"p/q"` (never a float).
pub fn scalar_string(s: &Scalar) -> String {
    if s.denom().is_one() {
        s.numer().to_string()
    } else {
        format!("{}/{}", s.numer(), s.denom())
    }
}

/// Parses `"p"` or `"p/q"` into a scalar.
pub fn parse_scalar(text: &str) -> Result<Scalar, ExactlinError> {
    let text = text.trim();
    let make_err = || ExactlinError::ScalarParse(text.to_string());
    match text.split_once('/') {
        None => {
            let n: BigInt = text.parse().map_err(|_| make_err())?;
            Ok(Scalar::from_integer(n))
        }
        Some((num, den)) => {
            let n: BigInt = num.trim().parse().map_err(|_| make_err())?;
            let d: BigInt = den.trim().parse().map_err(|_| make_err())?;
            if d.is_zero() {
                return Err(make_err());
            }
            Ok(Scalar::new(n, d))
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExactlinError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("containment violation: claimed subspace has a basis vector outside the larger space")]
    ContainmentViolation,
    #[error("cannot parse scalar from {0:?} (expected \"p\" or \"p/q\")")]
    ScalarParse(String),
}

/// Dense matrix over the rationals, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

impl Matrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Scalar::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zero(n, n);
        for i in 0..n {
            m.set(i, i, Scalar::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Scalar>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// Builds the matrix whose columns are the given vectors.
    pub fn from_columns(ambient_dim: usize, columns: &[Vec<Scalar>]) -> Self {
        let mut m = Matrix::zero(ambient_dim, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), ambient_dim, "column length mismatch");
            for (i, v) in col.iter().enumerate() {
                if !v.is_zero() {
                    m.set(i, j, v.clone());
                }
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<Scalar> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn mul_vec(&self, v: &[Scalar]) -> Result<Vec<Scalar>, ExactlinError> {
        if v.len() != self.cols {
            return Err(ExactlinError::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        let mut out = vec![Scalar::zero(); self.rows];
        for i in 0..self.rows {
            let mut acc = Scalar::zero();
            for j in 0..self.cols {
                let a = self.get(i, j);
                if !a.is_zero() && !v[j].is_zero() {
                    acc += a * &v[j];
                }
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// Row echelon form in place; returns the pivot positions `(row, col)`.
    ///
    /// Pivot policy: within the current column, among rows not yet used as
    /// pivots, pick the entry whose denominator has smallest magnitude,
    /// breaking ties by lowest row index. With exact arithmetic this is a
    /// performance heuristic only (it favors integer pivots).
    fn echelonize(&mut self) -> Vec<(usize, usize)> {
        let mut pivots = Vec::new();
        let mut used = vec![false; self.rows];
        for col in 0..self.cols {
            let mut best: Option<usize> = None;
            for row in 0..self.rows {
                if used[row] || self.get(row, col).is_zero() {
                    continue;
                }
                best = match best {
                    None => Some(row),
                    Some(b) => {
                        let db = self.get(b, col).denom().abs();
                        let dr = self.get(row, col).denom().abs();
                        if dr < db {
                            Some(row)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
            let Some(prow) = best else { continue };
            used[prow] = true;
            pivots.push((prow, col));
            let pval = self.get(prow, col).clone();
            // Normalize the pivot row, then clear the column everywhere else.
            for j in col..self.cols {
                let v = self.get(prow, j) / &pval;
                self.set(prow, j, v);
            }
            for row in 0..self.rows {
                if row == prow || self.get(row, col).is_zero() {
                    continue;
                }
                let factor = self.get(row, col).clone();
                for j in col..self.cols {
                    let v = self.get(row, j) - &factor * self.get(prow, j);
                    self.set(row, j, v);
                }
            }
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().echelonize().len()
    }

    /// Basis of `{ v : m v = 0 }`.
    pub fn kernel(&self) -> Subspace {
        let mut work = self.clone();
        let pivots = work.echelonize();
        let pivot_col_to_row: std::collections::BTreeMap<usize, usize> =
            pivots.iter().map(|&(r, c)| (c, r)).collect();
        let mut basis = Vec::new();
        for j in 0..self.cols {
            if pivot_col_to_row.contains_key(&j) {
                continue;
            }
            let mut v = vec![Scalar::zero(); self.cols];
            v[j] = Scalar::one();
            for (&c, &r) in &pivot_col_to_row {
                // Reduced echelon: pivot entries are 1 and their columns are
                // clear elsewhere, so the pivot variable reads off directly.
                v[c] = -work.get(r, j).clone();
            }
            basis.push(v);
        }
        Subspace {
            ambient_dim: self.cols,
            basis,
        }
    }

    /// Basis of the column space (the pivot columns of the original matrix).
    pub fn image(&self) -> Subspace {
        let pivots = self.clone().echelonize();
        let basis = pivots.iter().map(|&(_, c)| self.column(c)).collect();
        Subspace {
            ambient_dim: self.rows,
            basis,
        }
    }

    /// Some `x` with `m x = b`, or `None` when inconsistent.
    pub fn solve(&self, b: &[Scalar]) -> Result<Option<Vec<Scalar>>, ExactlinError> {
        if b.len() != self.rows {
            return Err(ExactlinError::DimensionMismatch {
                expected: self.rows,
                got: b.len(),
            });
        }
        // Eliminate the augmented matrix [m | b].
        let mut work = Matrix::zero(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                work.set(i, j, self.get(i, j).clone());
            }
            work.set(i, self.cols, b[i].clone());
        }
        let mut pivots = Vec::new();
        let mut used = vec![false; self.rows];
        for col in 0..self.cols {
            let mut best: Option<usize> = None;
            for row in 0..self.rows {
                if used[row] || work.get(row, col).is_zero() {
                    continue;
                }
                best = match best {
                    None => Some(row),
                    Some(bst) => {
                        let db = work.get(bst, col).denom().abs();
                        let dr = work.get(row, col).denom().abs();
                        if dr < db {
                            Some(row)
                        } else {
                            Some(bst)
                        }
                    }
                };
            }
            let Some(prow) = best else { continue };
            used[prow] = true;
            pivots.push((prow, col));
            let pval = work.get(prow, col).clone();
            for j in col..=self.cols {
                let v = work.get(prow, j) / &pval;
                work.set(prow, j, v);
            }
            for row in 0..self.rows {
                if row == prow || work.get(row, col).is_zero() {
                    continue;
                }
                let factor = work.get(row, col).clone();
                for j in col..=self.cols {
                    let v = work.get(row, j) - &factor * work.get(prow, j);
                    work.set(row, j, v);
                }
            }
        }
        // Inconsistency: a row with zero coefficients but nonzero rhs.
        for row in 0..self.rows {
            if used[row] {
                continue;
            }
            if !work.get(row, self.cols).is_zero() {
                return Ok(None);
            }
        }
        let mut x = vec![Scalar::zero(); self.cols];
        for &(r, c) in &pivots {
            x[c] = work.get(r, self.cols).clone();
        }
        // Paranoia in debug builds: exact back-substitution check.
        debug_assert_eq!(self.mul_vec(&x).unwrap(), b.to_vec());
        Ok(Some(x))
    }
}

/// Sparse matrix stored column-wise; no explicit zeros.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    rows: usize,
    cols: Vec<Vec<(usize, Scalar)>>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols: vec![Vec::new(); cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols.len()
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    /// Sets a column from `(row, value)` pairs; zeros are dropped, duplicate
    /// rows merged.
    pub fn set_column(&mut self, j: usize, entries: Vec<(usize, Scalar)>) {
        let mut merged: std::collections::BTreeMap<usize, Scalar> = std::collections::BTreeMap::new();
        for (i, v) in entries {
            assert!(i < self.rows, "row index out of range");
            if v.is_zero() {
                continue;
            }
            let slot = merged.entry(i).or_insert_with(Scalar::zero);
            *slot += v;
            if slot.is_zero() {
                merged.remove(&i);
            }
        }
        self.cols[j] = merged.into_iter().collect();
    }

    pub fn column_entries(&self, j: usize) -> &[(usize, Scalar)] {
        &self.cols[j]
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zero(self.rows, self.cols.len());
        for (j, col) in self.cols.iter().enumerate() {
            for (i, v) in col {
                m.set(*i, j, v.clone());
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[Scalar]) -> Result<Vec<Scalar>, ExactlinError> {
        if v.len() != self.cols.len() {
            return Err(ExactlinError::DimensionMismatch {
                expected: self.cols.len(),
                got: v.len(),
            });
        }
        let mut out = vec![Scalar::zero(); self.rows];
        for (j, col) in self.cols.iter().enumerate() {
            if v[j].is_zero() {
                continue;
            }
            for (i, a) in col {
                out[*i] += a * &v[j];
            }
        }
        Ok(out)
    }

    /// Rank by incremental column reduction against stored pivot rows.
    ///
    /// Each incoming column is reduced by the already-chosen pivots; if a
    /// nonzero remainder survives, its entry with the smallest-magnitude
    /// denominator (ties: lowest row) becomes a new pivot. Deterministic and
    /// allocation-friendly for the very sparse differentials produced by the
    /// bar complex.
    pub fn rank(&self) -> usize {
        use std::collections::BTreeMap;
        // pivot row index -> reduced column (owning that pivot)
        let mut pivots: BTreeMap<usize, BTreeMap<usize, Scalar>> = BTreeMap::new();
        let mut rank = 0;
        for col in &self.cols {
            let mut work: BTreeMap<usize, Scalar> = col.iter().cloned().collect();
            loop {
                // Reduce against every pivot present in the column.
                let mut reduced_any = true;
                while reduced_any {
                    reduced_any = false;
                    let hit: Option<usize> = work
                        .keys()
                        .find(|r| pivots.contains_key(r))
                        .copied();
                    if let Some(r) = hit {
                        let factor = &work[&r] / &pivots[&r][&r];
                        for (i, v) in pivots[&r].clone() {
                            let slot = work.entry(i).or_insert_with(Scalar::zero);
                            *slot -= &factor * &v;
                            if slot.is_zero() {
                                work.remove(&i);
                            }
                        }
                        reduced_any = true;
                    }
                }
                if work.is_empty() {
                    break;
                }
                // Choose the new pivot entry.
                let mut best: Option<usize> = None;
                for (i, v) in &work {
                    best = match best {
                        None => Some(*i),
                        Some(b) => {
                            if v.denom().abs() < work[&b].denom().abs() {
                                Some(*i)
                            } else {
                                Some(b)
                            }
                        }
                    };
                }
                let p = best.expect("nonempty column has a pivot");
                pivots.insert(p, work);
                rank += 1;
                break;
            }
        }
        rank
    }
}

/// A linear subspace of `k^ambient_dim`, stored by an independent basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subspace {
    ambient_dim: usize,
    basis: Vec<Vec<Scalar>>,
}

impl Subspace {
    /// Builds a subspace, re-verifying independence of the claimed basis.
    pub fn new(ambient_dim: usize, basis: Vec<Vec<Scalar>>) -> Self {
        for v in &basis {
            assert_eq!(v.len(), ambient_dim, "basis vector length mismatch");
        }
        let m = Matrix::from_columns(ambient_dim, &basis);
        assert_eq!(m.rank(), basis.len(), "basis vectors are dependent");
        Subspace { ambient_dim, basis }
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: Vec::new(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<Scalar>] {
        &self.basis
    }

    /// Membership test by solving against the basis matrix.
    pub fn contains(&self, v: &[Scalar]) -> Result<bool, ExactlinError> {
        if v.len() != self.ambient_dim {
            return Err(ExactlinError::DimensionMismatch {
                expected: self.ambient_dim,
                got: v.len(),
            });
        }
        if self.basis.is_empty() {
            return Ok(v.iter().all(|x| x.is_zero()));
        }
        let m = Matrix::from_columns(self.ambient_dim, &self.basis);
        Ok(m.solve(v)?.is_some())
    }
}

/// `dim(big) - dim(small)` after checking `small ⊆ big` vector by vector.
pub fn quotient_dim(big: &Subspace, small: &Subspace) -> Result<usize, ExactlinError> {
    if big.ambient_dim != small.ambient_dim {
        return Err(ExactlinError::DimensionMismatch {
            expected: big.ambient_dim,
            got: small.ambient_dim,
        });
    }
    for v in &small.basis {
        if !big.contains(v)? {
            return Err(ExactlinError::ContainmentViolation);
        }
    }
    Ok(big.dim() - small.dim())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: i64, b: i64, c: i64, d: i64) -> Matrix {
        Matrix::from_rows(vec![vec![q(a), q(b)], vec![q(c), q(d)]])
    }

    #[test]
    fn kernel_of_zero_and_identity() {
        assert_eq!(Matrix::zero(2, 2).kernel().dim(), 2);
        assert_eq!(Matrix::identity(3).kernel().dim(), 0);
    }

    #[test]
    fn kernel_of_rank_one_matrix() {
        // [[1,2],[2,4]] has kernel spanned by (2,-1).
        let k = m2(1, 2, 2, 4).kernel();
        assert_eq!(k.dim(), 1);
        let v = &k.basis()[0];
        // Proportional to (2,-1): v0 * (-1) == v1 * 2.
        assert_eq!(&v[0] * q(-1), &v[1] * q(2));
        assert!(k.contains(&[q(2), q(-1)]).unwrap());
    }

    #[test]
    fn image_examples() {
        assert_eq!(Matrix::identity(4).image().dim(), 4);
        assert_eq!(Matrix::zero(3, 2).image().dim(), 0);
        let im = m2(1, 2, 2, 4).image();
        assert_eq!(im.dim(), 1);
        assert!(im.contains(&[q(1), q(2)]).unwrap());
    }

    #[test]
    fn solve_examples() {
        let b = vec![q(5), q(-3), q(7)];
        assert_eq!(Matrix::identity(3).solve(&b).unwrap(), Some(b.clone()));
        assert_eq!(Matrix::zero(2, 2).solve(&[q(1), q(0)]).unwrap(), None);
        let m = m2(1, 2, 2, 4);
        let x = m.solve(&[q(1), q(2)]).unwrap().expect("solvable");
        assert_eq!(m.mul_vec(&x).unwrap(), vec![q(1), q(2)]);
    }

    #[test]
    fn solve_round_trip_random_shapes() {
        // Deterministic pseudo-random fill; verify m x = b whenever solvable.
        let mut state: u64 = 0x9e3779b97f4a7c15;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) % 7) as i64 - 3
        };
        for (r, c) in [(3, 5), (5, 3), (4, 4)] {
            let m = Matrix::from_rows((0..r).map(|_| (0..c).map(|_| q(next())).collect()).collect());
            let x0: Vec<Scalar> = (0..c).map(|_| q(next())).collect();
            let b = m.mul_vec(&x0).unwrap();
            let x = m.solve(&b).unwrap().expect("constructed to be solvable");
            assert_eq!(m.mul_vec(&x).unwrap(), b);
        }
    }

    #[test]
    fn rank_nullity() {
        let m = Matrix::from_rows(vec![
            vec![q(1), q(2), q(3)],
            vec![q(2), q(4), q(6)],
            vec![q(0), q(1), q(1)],
        ]);
        assert_eq!(m.rank() + m.kernel().dim(), m.cols());
        for v in m.kernel().basis() {
            assert!(m.mul_vec(v).unwrap().iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn quotient_dims() {
        let v = Subspace::new(2, vec![vec![q(1), q(0)], vec![q(0), q(1)]]);
        let w = Subspace::new(2, vec![vec![q(1), q(1)]]);
        assert_eq!(quotient_dim(&v, &v).unwrap(), 0);
        assert_eq!(quotient_dim(&v, &Subspace::zero(2)).unwrap(), 2);
        assert_eq!(quotient_dim(&v, &w).unwrap(), 1);
        // Not contained: span{(1,0)} does not contain (1,1).
        let u = Subspace::new(2, vec![vec![q(1), q(0)]]);
        assert_eq!(
            quotient_dim(&u, &w).unwrap_err(),
            ExactlinError::ContainmentViolation
        );
    }

    #[test]
    fn sparse_rank_matches_dense() {
        let mut s = SparseMatrix::new(4, 5);
        s.set_column(0, vec![(0, q(1)), (2, q(2))]);
        s.set_column(1, vec![(0, q(2)), (2, q(4))]);
        s.set_column(2, vec![(1, q(1)), (3, q(-1))]);
        s.set_column(3, vec![(0, q(1)), (1, q(1)), (2, q(2)), (3, q(-1))]);
        s.set_column(4, vec![]);
        assert_eq!(s.rank(), s.to_dense().rank());
        assert_eq!(s.rank(), 2);
    }

    #[test]
    fn scalar_strings_round_trip() {
        for text in ["0", "7", "-3", "5/9", "-22/7"] {
            let s = parse_scalar(text).unwrap();
            assert_eq!(scalar_string(&s), text);
        }
        assert_eq!(scalar_string(&parse_scalar("4/6").unwrap()), "2/3");
        assert!(parse_scalar("1/0").is_err());
        assert!(parse_scalar("x").is_err());
    }
}
