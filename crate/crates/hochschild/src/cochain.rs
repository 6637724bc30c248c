//! The Hochschild cochain complex `C^n(A, A) = Hom(A^⊗n, A)` with its
//! differential, cohomology computation, and coboundary solving.
//!
//! A cochain of arity `n` is stored densely: the value of `f(e_{m_1}, …,
//! e_{m_n})` on a basis tuple is a coefficient vector, and the flat layout is
//! lexicographic in the input tuple (first slot major) with the output index
//! minor. The differential is
//!
//! ```text
//! (df)(a_1, …, a_{n+1}) = a_1 f(a_2, …, a_{n+1})
//!                       + Σ_{i=1}^{n} (-1)^i f(a_1, …, a_i a_{i+1}, …, a_{n+1})
//!                       + (-1)^{n+1} f(a_1, …, a_n) a_{n+1}
//! ```
//!
//! and the signed variant `∂f = (-1)^n df` makes arity-homogeneous maps into
//! a complex graded so that composition degrees add. Both square to zero and
//! have the same kernels and images degreewise, so cohomology may be computed
//! from either; this module uses `d` for matrices and reports witnesses `w`
//! normalized against `∂`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraSpec, Element};
use crate::exactlin::{parse_scalar, scalar_string, sign_pow, Matrix, Scalar, SparseMatrix};
use num_traits::{One, Zero};

#[derive(Debug, Error)]
pub enum CochainError {
    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("cochains belong to different algebras")]
    AlgebraMismatch,
    #[error("{what} needs {needed} coordinates, over the budget of {allowed} (raise Budget::max_space to proceed)")]
    BudgetExceeded {
        what: String,
        needed: usize,
        allowed: usize,
    },
    #[error("cochain value table has length {got}, expected {expected}")]
    BadShape { expected: usize, got: usize },
    #[error("cochain JSON error: {0}")]
    Json(String),
}

/// Guard against accidentally enormous exact-arithmetic computations. The
/// check is on the largest coordinate space a computation will touch.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub max_space: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_space: 200_000 }
    }
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget {
            max_space: usize::MAX,
        }
    }

    pub fn check(&self, what: &str, needed: Option<usize>) -> Result<usize, CochainError> {
        let needed = needed.ok_or(CochainError::BudgetExceeded {
            what: what.to_string(),
            needed: usize::MAX,
            allowed: self.max_space,
        })?;
        if needed > self.max_space {
            return Err(CochainError::BudgetExceeded {
                what: what.to_string(),
                needed,
                allowed: self.max_space,
            });
        }
        Ok(needed)
    }
}

/// `dim C^n = dim^n · dim`, or `None` on overflow.
pub fn space_dim(dim: usize, arity: usize) -> Option<usize> {
    dim.checked_pow(arity as u32)?.checked_mul(dim)
}

pub(crate) fn encode_multi(multi: &[usize], dim: usize) -> u64 {
    multi.iter().fold(0u64, |acc, &m| acc * dim as u64 + m as u64)
}

pub(crate) fn decode_multi(flat: u64, dim: usize, arity: usize) -> Vec<usize> {
    let mut multi = vec![0usize; arity];
    let mut rest = flat;
    for slot in (0..arity).rev() {
        multi[slot] = (rest % dim as u64) as usize;
        rest /= dim as u64;
    }
    multi
}

/// Runs `body` over every input tuple of the given arity in flat order.
pub(crate) fn for_each_multi(dim: usize, arity: usize, mut body: impl FnMut(&[usize])) {
    let mut multi = vec![0usize; arity];
    loop {
        body(&multi);
        let mut slot = arity;
        loop {
            if slot == 0 {
                return;
            }
            slot -= 1;
            multi[slot] += 1;
            if multi[slot] < dim {
                break;
            }
            multi[slot] = 0;
        }
    }
}

/// A multilinear map `A^⊗n → A`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    algebra: Arc<AlgebraSpec>,
    arity: usize,
    values: Vec<Scalar>,
}

impl Cochain {
    pub fn zero(algebra: &Arc<AlgebraSpec>, arity: usize) -> Self {
        let len = space_dim(algebra.dim(), arity).expect("cochain space dimension overflow");
        Cochain {
            algebra: Arc::clone(algebra),
            arity,
            values: vec![Scalar::zero(); len],
        }
    }

    pub fn from_values(
        algebra: &Arc<AlgebraSpec>,
        arity: usize,
        values: Vec<Scalar>,
    ) -> Result<Self, CochainError> {
        let len = space_dim(algebra.dim(), arity).expect("cochain space dimension overflow");
        if values.len() != len {
            return Err(CochainError::BadShape {
                expected: len,
                got: values.len(),
            });
        }
        Ok(Cochain {
            algebra: Arc::clone(algebra),
            arity,
            values,
        })
    }

    /// The arity-0 cochain carrying an element of `A`.
    pub fn from_element(e: &Element) -> Self {
        Cochain {
            algebra: Arc::clone(e.algebra()),
            arity: 0,
            values: e.coeffs().to_vec(),
        }
    }

    /// The arity-0 cochain carrying the unit `1_A`.
    pub fn unit_cochain(algebra: &Arc<AlgebraSpec>) -> Self {
        Cochain {
            algebra: Arc::clone(algebra),
            arity: 0,
            values: algebra.unit().to_vec(),
        }
    }

    /// The identity map as an arity-1 cochain.
    pub fn identity(algebra: &Arc<AlgebraSpec>) -> Self {
        let dim = algebra.dim();
        let mut c = Cochain::zero(algebra, 1);
        for i in 0..dim {
            c.values[i * dim + i] = Scalar::one();
        }
        c
    }

    /// The multiplication map as an arity-2 cochain.
    pub fn multiplication(algebra: &Arc<AlgebraSpec>) -> Self {
        let dim = algebra.dim();
        let mut c = Cochain::zero(algebra, 2);
        for i in 0..dim {
            for j in 0..dim {
                for &(k, ref s) in algebra.basis_product(i, j) {
                    c.values[(i * dim + j) * dim + k] = s.clone();
                }
            }
        }
        c
    }

    /// The basis cochain sending one input tuple to one basis element.
    pub fn singleton(
        algebra: &Arc<AlgebraSpec>,
        multi: &[usize],
        out: usize,
    ) -> Self {
        let mut c = Cochain::zero(algebra, multi.len());
        let dim = algebra.dim();
        let idx = encode_multi(multi, dim) as usize * dim + out;
        c.values[idx] = Scalar::one();
        c
    }

    pub fn algebra(&self) -> &Arc<AlgebraSpec> {
        &self.algebra
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn values(&self) -> &[Scalar] {
        &self.values
    }

    pub fn value(&self, multi: &[usize], out: usize) -> &Scalar {
        debug_assert_eq!(multi.len(), self.arity);
        let dim = self.algebra.dim();
        &self.values[encode_multi(multi, dim) as usize * dim + out]
    }

    pub fn set_value(&mut self, multi: &[usize], out: usize, v: Scalar) {
        debug_assert_eq!(multi.len(), self.arity);
        let dim = self.algebra.dim();
        let idx = encode_multi(multi, dim) as usize * dim + out;
        self.values[idx] = v;
    }

    /// The coefficient vector of `f(e_{m_1}, …, e_{m_n})`.
    pub fn value_vector(&self, multi: &[usize]) -> &[Scalar] {
        debug_assert_eq!(multi.len(), self.arity);
        let dim = self.algebra.dim();
        let base = encode_multi(multi, dim) as usize * dim;
        &self.values[base..base + dim]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    fn check_compatible(&self, other: &Cochain) -> Result<(), CochainError> {
        if self.arity != other.arity {
            return Err(CochainError::ArityMismatch {
                expected: self.arity,
                got: other.arity,
            });
        }
        if !Arc::ptr_eq(&self.algebra, &other.algebra) && *self.algebra != *other.algebra {
            return Err(CochainError::AlgebraMismatch);
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Cochain) -> Result<Cochain, CochainError> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Cochain {
            algebra: Arc::clone(&self.algebra),
            arity: self.arity,
            values,
        })
    }

    pub fn try_sub(&self, other: &Cochain) -> Result<Cochain, CochainError> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Cochain {
            algebra: Arc::clone(&self.algebra),
            arity: self.arity,
            values,
        })
    }

    pub fn add(&self, other: &Cochain) -> Cochain {
        self.try_add(other).expect("compatible cochains")
    }

    pub fn sub(&self, other: &Cochain) -> Cochain {
        self.try_sub(other).expect("compatible cochains")
    }

    pub fn scale(&self, s: &Scalar) -> Cochain {
        Cochain {
            algebra: Arc::clone(&self.algebra),
            arity: self.arity,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn neg(&self) -> Cochain {
        self.scale(&-Scalar::one())
    }

    /// Multilinear evaluation on algebra elements.
    pub fn eval(&self, args: &[Element]) -> Result<Element, CochainError> {
        if args.len() != self.arity {
            return Err(CochainError::ArityMismatch {
                expected: self.arity,
                got: args.len(),
            });
        }
        for a in args {
            if !Arc::ptr_eq(a.algebra(), &self.algebra) && **a.algebra() != *self.algebra {
                return Err(CochainError::AlgebraMismatch);
            }
        }
        let dim = self.algebra.dim();
        let mut out = vec![Scalar::zero(); dim];
        for_each_multi(dim, self.arity, |multi| {
            let mut coeff = Scalar::one();
            for (slot, &m) in multi.iter().enumerate() {
                let c = &args[slot].coeffs()[m];
                if c.is_zero() {
                    coeff = Scalar::zero();
                    break;
                }
                coeff *= c;
            }
            if !coeff.is_zero() {
                let base = encode_multi(multi, dim) as usize * dim;
                for k in 0..dim {
                    let v = &self.values[base + k];
                    if !v.is_zero() {
                        out[k] += &coeff * v;
                    }
                }
            }
        });
        Element::new(&self.algebra, out).map_err(|_| CochainError::AlgebraMismatch)
    }

    /// The unsigned Hochschild differential.
    pub fn differential(&self) -> Cochain {
        self.to_sparse().differential(&self.algebra).to_dense(&self.algebra)
    }

    /// The signed differential `∂f = (-1)^arity df`.
    pub fn signed_differential(&self) -> Cochain {
        let d = self.differential();
        if self.arity % 2 == 0 {
            d
        } else {
            d.neg()
        }
    }

    pub(crate) fn to_sparse(&self) -> SparseCochain {
        let dim = self.algebra.dim();
        let mut terms = BTreeMap::new();
        for (idx, v) in self.values.iter().enumerate() {
            if !v.is_zero() {
                terms.insert(((idx / dim) as u64, idx % dim), v.clone());
            }
        }
        SparseCochain {
            arity: self.arity,
            terms,
        }
    }

    /// Flat value table as rational strings, for reports.
    pub fn to_flat_strings(&self) -> Vec<String> {
        self.values.iter().map(scalar_string).collect()
    }

    pub fn from_flat_strings(
        algebra: &Arc<AlgebraSpec>,
        arity: usize,
        flat: &[String],
    ) -> Result<Cochain, CochainError> {
        let mut values = Vec::with_capacity(flat.len());
        for (i, s) in flat.iter().enumerate() {
            values.push(
                parse_scalar(s).map_err(|e| CochainError::Json(format!("entry {i}: {e}")))?,
            );
        }
        Cochain::from_values(algebra, arity, values)
    }
}

/// Internal sparse cochain form. All structural operators (differential, cup,
/// circle) are implemented here term by term, which is what makes exhaustive
/// sweeps over basis cochains affordable; the dense type delegates to it.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SparseCochain {
    pub arity: usize,
    /// `(flat input tuple, output basis index) -> coefficient`, zeros absent.
    pub terms: BTreeMap<(u64, usize), Scalar>,
}

impl SparseCochain {
    pub fn zero(arity: usize) -> Self {
        SparseCochain {
            arity,
            terms: BTreeMap::new(),
        }
    }

    pub fn singleton(arity: usize, dim: usize, multi: &[usize], out: usize) -> Self {
        debug_assert_eq!(multi.len(), arity);
        let mut terms = BTreeMap::new();
        terms.insert((encode_multi(multi, dim), out), Scalar::one());
        SparseCochain { arity, terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, flat: u64, out: usize, coeff: Scalar) {
        if coeff.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry((flat, out)) {
            Entry::Vacant(v) => {
                v.insert(coeff);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Adds `s · other`. Empty cochains are treated as arity-polymorphic
    /// zeros: formulas that degenerate (an empty circle product, say) may
    /// carry a saturated arity, and adding zero must stay harmless.
    pub fn add_assign_scaled(&mut self, other: &SparseCochain, s: &Scalar) {
        if other.terms.is_empty() {
            return;
        }
        if self.terms.is_empty() {
            self.arity = other.arity;
        }
        debug_assert_eq!(self.arity, other.arity);
        for (&(flat, out), c) in &other.terms {
            self.add_term(flat, out, c * s);
        }
    }

    pub fn scaled(&self, s: &Scalar) -> SparseCochain {
        let mut out = SparseCochain::zero(self.arity);
        out.add_assign_scaled(self, s);
        out
    }

    pub fn sub(&self, other: &SparseCochain) -> SparseCochain {
        let mut out = self.clone();
        out.add_assign_scaled(other, &-Scalar::one());
        out
    }

    /// Unsigned differential, term by term via the structure constants and
    /// their output-sliced transpose.
    pub fn differential(&self, algebra: &AlgebraSpec) -> SparseCochain {
        let dim = algebra.dim();
        let n = self.arity;
        let mut out = SparseCochain::zero(n + 1);
        for (&(flat, u), c) in &self.terms {
            let multi = decode_multi(flat, dim, n);
            // a_1 · f(a_2, …): prepend j, multiply e_j e_u on the output.
            for j in 0..dim {
                let new_flat = j as u64 * (dim as u64).pow(n as u32) + flat;
                for &(k, ref cjk) in algebra.basis_product(j, u) {
                    out.add_term(new_flat, k, c * cjk);
                }
            }
            // Interior fusions: slot i of f receives a_i a_{i+1}.
            for i in 0..n {
                let sign = sign_pow((i + 1) as i64);
                for &(a, b, ref cab) in algebra.basis_product_preimages(multi[i]) {
                    let mut new_multi = Vec::with_capacity(n + 1);
                    new_multi.extend_from_slice(&multi[..i]);
                    new_multi.push(a);
                    new_multi.push(b);
                    new_multi.extend_from_slice(&multi[i + 1..]);
                    out.add_term(encode_multi(&new_multi, dim), u, c * cab * &sign);
                }
            }
            // f(a_1, …, a_n) · a_{n+1}, with sign (-1)^{n+1}.
            let sign = sign_pow((n + 1) as i64);
            for j in 0..dim {
                let new_flat = flat * dim as u64 + j as u64;
                for &(k, ref cuj) in algebra.basis_product(u, j) {
                    out.add_term(new_flat, k, c * cuj * &sign);
                }
            }
        }
        out
    }

    pub fn signed_differential(&self, algebra: &AlgebraSpec) -> SparseCochain {
        let d = self.differential(algebra);
        if self.arity % 2 == 0 {
            d
        } else {
            d.scaled(&-Scalar::one())
        }
    }

    pub fn to_dense(&self, algebra: &Arc<AlgebraSpec>) -> Cochain {
        let mut c = Cochain::zero(algebra, self.arity);
        let dim = algebra.dim();
        for (&(flat, out), v) in &self.terms {
            c.values[flat as usize * dim + out] = v.clone();
        }
        c
    }
}

/// The matrix of the unsigned differential `d_n : C^n → C^{n+1}` in the flat
/// basis.
pub fn d_matrix(algebra: &Arc<AlgebraSpec>, arity: usize) -> SparseMatrix {
    let dim = algebra.dim();
    let rows = space_dim(dim, arity + 1).expect("cochain space dimension overflow");
    let cols = space_dim(dim, arity).expect("cochain space dimension overflow");
    let mut m = SparseMatrix::new(rows, cols);
    let mut col = 0usize;
    for_each_multi(dim, arity, |multi| {
        for out in 0..dim {
            let sp = SparseCochain::singleton(arity, dim, multi, out);
            let image = sp.differential(algebra);
            let entries: Vec<(usize, Scalar)> = image
                .terms
                .iter()
                .map(|(&(flat, k), v)| (flat as usize * dim + k, v.clone()))
                .collect();
            m.set_column(col + out, entries);
        }
        col += dim;
    });
    m
}

/// Cohomology dimensions and chosen representative cocycles, degree by degree.
#[derive(Debug, Clone)]
pub struct CohomologyReport {
    pub algebra: String,
    pub dims: Vec<usize>,
    /// `representatives[n]` is a list of cocycles whose classes form a basis
    /// of degree-`n` cohomology.
    pub representatives: Vec<Vec<Cochain>>,
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    algebra: String,
    dims: Vec<usize>,
    representatives: Vec<Vec<Vec<String>>>,
}

impl CohomologyReport {
    pub fn to_json(&self) -> String {
        let doc = ReportJson {
            algebra: self.algebra.clone(),
            dims: self.dims.clone(),
            representatives: self
                .representatives
                .iter()
                .map(|reps| reps.iter().map(|c| c.to_flat_strings()).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("report JSON serialization")
    }

    pub fn from_json(algebra: &Arc<AlgebraSpec>, text: &str) -> Result<Self, CochainError> {
        let doc: ReportJson =
            serde_json::from_str(text).map_err(|e| CochainError::Json(e.to_string()))?;
        let mut representatives = Vec::new();
        for (n, reps) in doc.representatives.iter().enumerate() {
            let mut level = Vec::new();
            for flat in reps {
                level.push(Cochain::from_flat_strings(algebra, n, flat)?);
            }
            representatives.push(level);
        }
        Ok(CohomologyReport {
            algebra: doc.algebra,
            dims: doc.dims,
            representatives,
        })
    }
}

/// Cohomology dimensions only (no representatives); the cheap path.
pub fn cohomology_dims(
    algebra: &Arc<AlgebraSpec>,
    max_degree: usize,
    budget: &Budget,
) -> Result<Vec<usize>, CochainError> {
    let dim = algebra.dim();
    budget.check(
        &format!("cohomology of {} through degree {max_degree}", algebra.name()),
        space_dim(dim, max_degree + 1),
    )?;
    let mut ranks = Vec::with_capacity(max_degree + 1);
    for n in 0..=max_degree {
        ranks.push(d_matrix(algebra, n).rank());
    }
    let mut dims = Vec::with_capacity(max_degree + 1);
    for n in 0..=max_degree {
        let c_n = space_dim(dim, n).unwrap();
        let below = if n == 0 { 0 } else { ranks[n - 1] };
        dims.push(c_n - ranks[n] - below);
    }
    Ok(dims)
}

/// Full cohomology computation with representatives: for each degree, a
/// kernel basis is extended over the image of the previous differential and
/// the new vectors are returned as representative cocycles.
pub fn cohomology(
    algebra: &Arc<AlgebraSpec>,
    max_degree: usize,
    budget: &Budget,
) -> Result<CohomologyReport, CochainError> {
    let dim = algebra.dim();
    budget.check(
        &format!("cohomology of {} through degree {max_degree}", algebra.name()),
        space_dim(dim, max_degree + 1),
    )?;
    let mut dense: Vec<Matrix> = Vec::with_capacity(max_degree + 1);
    for n in 0..=max_degree {
        dense.push(d_matrix(algebra, n).to_dense());
    }
    let mut dims = Vec::with_capacity(max_degree + 1);
    let mut representatives = Vec::with_capacity(max_degree + 1);
    for n in 0..=max_degree {
        let kernel = dense[n].kernel();
        let image_below: Vec<Vec<Scalar>> = if n == 0 {
            Vec::new()
        } else {
            dense[n - 1].image().basis().to_vec()
        };
        let kept = extend_basis(space_dim(dim, n).unwrap(), &image_below, kernel.basis());
        dims.push(kept.len());
        let reps = kept
            .into_iter()
            .map(|col| {
                Cochain::from_values(algebra, n, col).expect("kernel vector has the right length")
            })
            .collect();
        representatives.push(reps);
    }
    Ok(CohomologyReport {
        algebra: algebra.name().to_string(),
        dims,
        representatives,
    })
}

/// Greedy basis extension: reduces `candidates` against the span of `fixed`
/// and returns the candidates that enlarge it.
fn extend_basis(
    ambient: usize,
    fixed: &[Vec<Scalar>],
    candidates: &[Vec<Scalar>],
) -> Vec<Vec<Scalar>> {
    let mut reduced: BTreeMap<usize, Vec<Scalar>> = BTreeMap::new();
    let insert = |col: &[Scalar], reduced: &mut BTreeMap<usize, Vec<Scalar>>| -> bool {
        let mut v = col.to_vec();
        debug_assert_eq!(v.len(), ambient);
        loop {
            let pivot = match v.iter().position(|x| !x.is_zero()) {
                Some(p) => p,
                None => return false,
            };
            match reduced.get(&pivot) {
                Some(basis_col) => {
                    let factor = v[pivot].clone();
                    for (x, b) in v.iter_mut().zip(basis_col) {
                        *x -= &factor * b;
                    }
                }
                None => {
                    let inv = v[pivot].clone();
                    for x in v.iter_mut() {
                        *x /= &inv;
                    }
                    reduced.insert(pivot, v);
                    return true;
                }
            }
        }
    };
    for col in fixed {
        insert(col, &mut reduced);
    }
    let mut kept = Vec::new();
    for col in candidates {
        if insert(col, &mut reduced) {
            kept.push(col.clone());
        }
    }
    kept
}

/// Decides whether `f = ∂w` has a solution and returns one witness when it
/// does. Arity-0 cochains are never coboundaries of anything (the complex has
/// nothing below them); test those with `is_zero` directly.
pub fn is_coboundary(f: &Cochain, budget: &Budget) -> Result<Option<Cochain>, CochainError> {
    let n = f.arity();
    if n == 0 {
        return Ok(None);
    }
    let algebra = f.algebra();
    let dim = algebra.dim();
    budget.check(
        &format!("coboundary solve at arity {n}"),
        space_dim(dim, n),
    )?;
    let m = d_matrix(algebra, n - 1).to_dense();
    // ∂w = (-1)^{n-1} dw = f, so solve dw = (-1)^{n-1} f.
    let sign = sign_pow((n as i64) - 1);
    let rhs: Vec<Scalar> = f.values().iter().map(|v| v * &sign).collect();
    let sol = m.solve(&rhs).expect("solve dimensions agree");
    Ok(sol.map(|w| {
        Cochain::from_values(algebra, n - 1, w).expect("solution vector has the right length")
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{default_samples, sample_library, Element};
    use crate::exactlin::q;
    use crate::testutil::Lcg;

    /// Slow reference differential via multilinear evaluation, used only to
    /// pin the optimized term-by-term implementation.
    fn naive_differential(f: &Cochain) -> Cochain {
        let algebra = f.algebra().clone();
        let dim = algebra.dim();
        let n = f.arity();
        let mut out = Cochain::zero(&algebra, n + 1);
        for_each_multi(dim, n + 1, |multi| {
            let args: Vec<Element> = multi
                .iter()
                .map(|&m| Element::basis(&algebra, m))
                .collect();
            let mut acc = vec![Scalar::zero(); dim];
            // a_1 f(rest)
            let tail = f.eval(&args[1..]).unwrap();
            for (k, v) in algebra
                .mult(args[0].coeffs(), tail.coeffs())
                .into_iter()
                .enumerate()
            {
                acc[k] += v;
            }
            // interior fusions
            for i in 0..n {
                let mut fused = Vec::with_capacity(n);
                fused.extend_from_slice(&args[..i]);
                fused.push(
                    Element::new(
                        &algebra,
                        algebra.mult(args[i].coeffs(), args[i + 1].coeffs()),
                    )
                    .unwrap(),
                );
                fused.extend_from_slice(&args[i + 2..]);
                let v = f.eval(&fused).unwrap();
                let sign = sign_pow((i + 1) as i64);
                for (k, c) in v.coeffs().iter().enumerate() {
                    acc[k] += c * &sign;
                }
            }
            // f(front) a_{n+1}
            let front = f.eval(&args[..n]).unwrap();
            let sign = sign_pow((n + 1) as i64);
            for (k, v) in algebra
                .mult(front.coeffs(), args[n].coeffs())
                .into_iter()
                .enumerate()
            {
                acc[k] += v * &sign;
            }
            for (k, v) in acc.into_iter().enumerate() {
                if !v.is_zero() {
                    out.set_value(multi, k, v);
                }
            }
        });
        out
    }

    #[test]
    fn differential_of_element_detects_center() {
        let a = sample_library("matrix(2)").unwrap();
        // E11 is not central: d(E11) ≠ 0.
        let e11 = Cochain::from_element(&Element::basis(&a, 0));
        assert!(!e11.differential().is_zero());
        // The identity matrix is central: d(1) = 0.
        let unit = Cochain::unit_cochain(&a);
        assert!(unit.differential().is_zero());
    }

    #[test]
    fn differential_of_identity_is_multiplication() {
        for a in default_samples() {
            let id = Cochain::identity(&a);
            assert_eq!(id.differential(), Cochain::multiplication(&a));
        }
    }

    #[test]
    fn euler_derivation_is_cocycle_formal_derivative_is_not() {
        let a = sample_library("trunc_poly(2)").unwrap();
        // Euler derivation E: 1 ↦ 0, x ↦ x.
        let mut euler = Cochain::zero(&a, 1);
        euler.set_value(&[1], 1, q(1));
        assert!(euler.differential().is_zero());
        // Formal derivative: 1 ↦ 0, x ↦ 1. Not a derivation on k[x]/(x^2):
        // d(f)(x, x) = x·1 - f(x·x) + 1·x = 2x.
        let mut deriv = Cochain::zero(&a, 1);
        deriv.set_value(&[1], 0, q(1));
        let d = deriv.differential();
        assert_eq!(*d.value(&[1, 1], 1), q(2));
    }

    #[test]
    fn signed_differential_squares_to_zero() {
        let mut rng = Lcg::new(7);
        for key in ["trunc_poly(2)", "matrix(2)", "product(2)"] {
            let a = sample_library(key).unwrap();
            for arity in 0..=2 {
                let f = rng.random_cochain(&a, arity);
                assert!(
                    f.signed_differential().signed_differential().is_zero(),
                    "∂∂ ≠ 0 on {key} arity {arity}"
                );
            }
        }
    }

    #[test]
    fn sparse_matches_naive_differential() {
        let mut rng = Lcg::new(11);
        for key in ["trunc_poly(3)", "matrix(2)", "group_cyclic(2)"] {
            let a = sample_library(key).unwrap();
            for arity in 0..=2 {
                let f = rng.random_cochain(&a, arity);
                assert_eq!(f.differential(), naive_differential(&f));
            }
        }
    }

    #[test]
    fn cohomology_of_field_vanishes_positively() {
        let a = sample_library("field").unwrap();
        let report = cohomology(&a, 4, &Budget::default()).unwrap();
        assert_eq!(report.dims, vec![1, 0, 0, 0, 0]);
    }

    #[test]
    fn cohomology_of_dual_numbers() {
        let a = sample_library("trunc_poly(2)").unwrap();
        let report = cohomology(&a, 4, &Budget::default()).unwrap();
        assert_eq!(report.dims, vec![2, 1, 1, 1, 1]);
        for (n, reps) in report.representatives.iter().enumerate() {
            assert_eq!(reps.len(), report.dims[n]);
            for r in reps {
                assert!(r.signed_differential().is_zero(), "representative not a cocycle");
            }
        }
    }

    #[test]
    fn degree_zero_representatives_span_center() {
        for a in default_samples() {
            let report = cohomology(&a, 0, &Budget::default()).unwrap();
            let center = a.center();
            assert_eq!(report.dims[0], center.dim());
            for r in &report.representatives[0] {
                assert!(center.contains(r.values()).unwrap());
            }
        }
    }

    #[test]
    fn coboundary_solver_finds_witnesses() {
        let a = sample_library("trunc_poly(2)").unwrap();
        let budget = Budget::default();
        // A genuine coboundary: ∂ of a random arity-1 cochain.
        let mut rng = Lcg::new(3);
        let g = rng.random_cochain(&a, 1);
        let target = g.signed_differential();
        let w = is_coboundary(&target, &budget).unwrap().expect("target is exact");
        assert_eq!(w.signed_differential(), target);
        // The Euler derivation is a cocycle but not a coboundary.
        let mut euler = Cochain::zero(&a, 1);
        euler.set_value(&[1], 1, q(1));
        assert!(is_coboundary(&euler, &budget).unwrap().is_none());
        // The formal derivative is not even a cocycle; still not exact.
        let mut deriv = Cochain::zero(&a, 1);
        deriv.set_value(&[1], 0, q(1));
        assert!(is_coboundary(&deriv, &budget).unwrap().is_none());
    }

    #[test]
    fn budget_refusal() {
        let a = sample_library("matrix(2)").unwrap();
        let tiny = Budget { max_space: 10 };
        assert!(matches!(
            cohomology(&a, 3, &tiny),
            Err(CochainError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn report_json_round_trip() {
        let a = sample_library("trunc_poly(2)").unwrap();
        let report = cohomology(&a, 2, &Budget::default()).unwrap();
        let text = report.to_json();
        let back = CohomologyReport::from_json(&a, &text).unwrap();
        assert_eq!(back.dims, report.dims);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn shape_and_mismatch_errors() {
        let a = sample_library("trunc_poly(2)").unwrap();
        let b = sample_library("group_cyclic(2)").unwrap();
        let fa = Cochain::identity(&a);
        let fb = Cochain::identity(&b);
        assert!(matches!(
            fa.try_add(&fb),
            Err(CochainError::AlgebraMismatch)
        ));
        let g = Cochain::multiplication(&a);
        assert!(matches!(
            fa.try_add(&g),
            Err(CochainError::ArityMismatch { .. })
        ));
        assert!(fa.eval(&[]).is_err());
    }
}
