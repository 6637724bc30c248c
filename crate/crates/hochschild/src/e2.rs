//! Generic bracket extraction from 2-algebra presentations.
//!
//! A 2-algebra presentation is a graded carrier with differential, two
//! multiplications `m1`, `m2` with units, and two interchange homotopies
//! `h`, `h_op`. The extractor reads off the degree `+1` bracket
//!
//! ```text
//! bracket(f, g) = h(1, f, g, 1) + h_op(f, 1, 1, g)
//!               + h_op(1, f, g, 1) + h(f, 1, 1, g)
//! ```
//!
//! (horizontal composition of chain homotopies is addition). On the
//! Hochschild instantiation the two nonvanishing terms are
//! `(-1)^{q+1} g{f}` and `(-1)^{p+1} f{g}`, so the extracted bracket is the
//! symmetric circle combination; it agrees with the signed Gerstenhaber
//! bracket exactly when `pq` is even and deviates by `2(-1)^{q+1} g{f}` on
//! odd·odd pairs — a structural consequence of filling both interchange
//! squares with a single cup-circle term each. The comparison helper
//! reports the deviation pairs explicitly instead of hiding them.
//!
//! # Conventions
//!
//! The carrier differential is the signed one (`∂f = (-1)^{deg f} df` on
//! the Hochschild side). The interchange square for `h` is
//!
//! ```text
//! ∂(h(t)) + Σ_i (-1)^{Σ_{j>i} |t_j|} h(…, ∂t_i, …)
//!   = m1(m2(t0,t1), m2(t2,t3)) − (-1)^{|t1||t2|} m2(m1(t0,t2), m1(t1,t3))
//! ```
//!
//! with Koszul accumulation over the *succeeding* slots; the `h_op` square
//! uses the opposite multiplications (plain argument swap, no extra sign)
//! and accumulates over the *preceding* slots. This mirror handedness is
//! forced by the Hochschild fillers and is part of the validation contract.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::AlgebraSpec;
use crate::cochain::{space_dim, Budget, Cochain, CochainError};
use crate::exactlin::{parse_scalar, scalar_string, sign_pow, Matrix, Scalar};
use crate::gerst::{bracket_signed, cup, square_homotopy_h, square_homotopy_h_op, GerstError};
use num_traits::{One, Zero};

#[derive(Debug, Error)]
pub enum E2Error {
    #[error(transparent)]
    Cochain(#[from] CochainError),
    #[error(transparent)]
    Gerst(#[from] GerstError),
    #[error("degree {degree} outside the presentation window 0..={max_degree}: {what}")]
    Window {
        what: String,
        degree: usize,
        max_degree: usize,
    },
    #[error("{what}: expected length {expected}, got {got}")]
    Shape {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("presentation invalid, first failing check {check}: {witness}")]
    InvalidPresentation { check: String, witness: String },
    #[error("presentation JSON error: {0}")]
    Json(String),
}

/// The operations of a 2-algebra presentation. Elements are dense
/// coordinate vectors tagged with their degree; every method is total on
/// in-window degrees and multilinear.
pub trait TwoAlgebraOps {
    fn name(&self) -> String;
    /// Carrier window is `0..=max_degree`.
    fn max_degree(&self) -> usize;
    fn dim(&self, degree: usize) -> usize;
    /// Signed differential, degree `+1`.
    fn differential(&self, degree: usize, v: &[Scalar]) -> Vec<Scalar>;
    fn m1(&self, p: usize, x: &[Scalar], q: usize, y: &[Scalar]) -> Vec<Scalar>;
    fn m2(&self, p: usize, x: &[Scalar], q: usize, y: &[Scalar]) -> Vec<Scalar>;
    /// Degree-0 unit for `m1`.
    fn unit1(&self) -> Vec<Scalar>;
    /// Degree-0 unit for `m2`.
    fn unit2(&self) -> Vec<Scalar>;
    /// Interchange homotopy, degree `+1`: output lives in degree
    /// `Σ degs − 1` (the empty vector when all four degrees are 0).
    fn h(&self, degs: [usize; 4], t: [&[Scalar]; 4]) -> Vec<Scalar>;
    fn h_op(&self, degs: [usize; 4], t: [&[Scalar]; 4]) -> Vec<Scalar>;
}

/// The Hochschild instantiation: carrier degree = cochain arity, signed
/// differential, `m1 = m2 =` cup, homotopies = the interchange-square
/// fillers.
#[derive(Debug, Clone)]
pub struct HochschildPresentation {
    algebra: Arc<AlgebraSpec>,
    max_degree: usize,
}

/// Builds the Hochschild presentation over arities `0..=max_degree`,
/// refusing windows whose coordinate spaces exceed the budget.
pub fn hochschild_presentation(
    algebra: &Arc<AlgebraSpec>,
    max_degree: usize,
    budget: &Budget,
) -> Result<HochschildPresentation, E2Error> {
    budget.check(
        &format!(
            "2-algebra presentation of {} through arity {max_degree}",
            algebra.name()
        ),
        space_dim(algebra.dim(), max_degree + 1),
    )?;
    Ok(HochschildPresentation {
        algebra: Arc::clone(algebra),
        max_degree,
    })
}

impl HochschildPresentation {
    pub fn algebra(&self) -> &Arc<AlgebraSpec> {
        &self.algebra
    }

    fn cochain(&self, degree: usize, v: &[Scalar]) -> Cochain {
        Cochain::from_values(&self.algebra, degree, v.to_vec())
            .expect("coordinates match the arity space")
    }
}

impl TwoAlgebraOps for HochschildPresentation {
    fn name(&self) -> String {
        format!("hochschild({})", self.algebra.name())
    }

    fn max_degree(&self) -> usize {
        self.max_degree
    }

    fn dim(&self, degree: usize) -> usize {
        space_dim(self.algebra.dim(), degree).expect("window already budget-checked")
    }

    fn differential(&self, degree: usize, v: &[Scalar]) -> Vec<Scalar> {
        self.cochain(degree, v).signed_differential().values().to_vec()
    }

    fn m1(&self, p: usize, x: &[Scalar], q: usize, y: &[Scalar]) -> Vec<Scalar> {
        cup(&self.cochain(p, x), &self.cochain(q, y))
            .expect("same algebra")
            .values()
            .to_vec()
    }

    fn m2(&self, p: usize, x: &[Scalar], q: usize, y: &[Scalar]) -> Vec<Scalar> {
        self.m1(p, x, q, y)
    }

    fn unit1(&self) -> Vec<Scalar> {
        Cochain::unit_cochain(&self.algebra).values().to_vec()
    }

    fn unit2(&self) -> Vec<Scalar> {
        self.unit1()
    }

    fn h(&self, degs: [usize; 4], t: [&[Scalar]; 4]) -> Vec<Scalar> {
        let c: Vec<Cochain> = (0..4).map(|i| self.cochain(degs[i], t[i])).collect();
        let out = square_homotopy_h(&c[0], &c[1], &c[2], &c[3]).expect("same algebra");
        if degs.iter().sum::<usize>() == 0 {
            return Vec::new();
        }
        out.values().to_vec()
    }

    fn h_op(&self, degs: [usize; 4], t: [&[Scalar]; 4]) -> Vec<Scalar> {
        let c: Vec<Cochain> = (0..4).map(|i| self.cochain(degs[i], t[i])).collect();
        let out = square_homotopy_h_op(&c[0], &c[1], &c[2], &c[3]).expect("same algebra");
        if degs.iter().sum::<usize>() == 0 {
            return Vec::new();
        }
        out.values().to_vec()
    }
}

/// A fully explicit presentation: graded dimensions and matrices, suitable
/// for JSON interchange. Absent blocks are zero maps. Bilinear blocks are
/// keyed by `(p, q)` with column index `i_x · dim(q) + i_y`; quadrilinear
/// blocks by `(p1, p2, p3, p4)` with columns in the same row-major order.
#[derive(Debug, Clone)]
pub struct MatrixPresentation {
    pub name: String,
    pub dims: Vec<usize>,
    pub differential: BTreeMap<usize, Matrix>,
    pub m1: BTreeMap<(usize, usize), Matrix>,
    pub m2: BTreeMap<(usize, usize), Matrix>,
    pub unit1: Vec<Scalar>,
    pub unit2: Vec<Scalar>,
    pub h: BTreeMap<[usize; 4], Matrix>,
    pub h_op: BTreeMap<[usize; 4], Matrix>,
}

fn matrix_apply_or_zero(m: Option<&Matrix>, rows: usize, flat: &[Scalar]) -> Vec<Scalar> {
    match m {
        None => vec![Scalar::zero(); rows],
        Some(m) => m.mul_vec(flat).expect("block shape matches its degree key"),
    }
}

fn bilinear_flat(x: &[Scalar], y: &[Scalar]) -> Vec<Scalar> {
    let mut out = Vec::with_capacity(x.len() * y.len());
    for a in x {
        for b in y {
            out.push(a * b);
        }
    }
    out
}

impl MatrixPresentation {
    fn dim_at(&self, degree: usize) -> usize {
        self.dims.get(degree).copied().unwrap_or(0)
    }
}

impl TwoAlgebraOps for MatrixPresentation {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn max_degree(&self) -> usize {
        self.dims.len().saturating_sub(1)
    }

    fn dim(&self, degree: usize) -> usize {
        self.dim_at(degree)
    }

    fn differential(&self, degree: usize, v: &[Scalar]) -> Vec<Scalar> {
        matrix_apply_or_zero(self.differential.get(&degree), self.dim_at(degree + 1), v)
    }

    fn m1(&self, p: usize, x: &[Scalar], q: usize, y: &[Scalar]) -> Vec<Scalar> {
        matrix_apply_or_zero(self.m1.get(&(p, q)), self.dim_at(p + q), &bilinear_flat(x, y))
    }

    fn m2(&self, p: usize, x: &[Scalar], q: usize, y: &[Scalar]) -> Vec<Scalar> {
        matrix_apply_or_zero(self.m2.get(&(p, q)), self.dim_at(p + q), &bilinear_flat(x, y))
    }

    fn unit1(&self) -> Vec<Scalar> {
        self.unit1.clone()
    }

    fn unit2(&self) -> Vec<Scalar> {
        self.unit2.clone()
    }

    fn h(&self, degs: [usize; 4], t: [&[Scalar]; 4]) -> Vec<Scalar> {
        let total: usize = degs.iter().sum();
        if total == 0 {
            return Vec::new();
        }
        let flat = bilinear_flat(&bilinear_flat(t[0], t[1]), &bilinear_flat(t[2], t[3]));
        matrix_apply_or_zero(self.h.get(&degs), self.dim_at(total - 1), &flat)
    }

    fn h_op(&self, degs: [usize; 4], t: [&[Scalar]; 4]) -> Vec<Scalar> {
        let total: usize = degs.iter().sum();
        if total == 0 {
            return Vec::new();
        }
        let flat = bilinear_flat(&bilinear_flat(t[0], t[1]), &bilinear_flat(t[2], t[3]));
        matrix_apply_or_zero(self.h_op.get(&degs), self.dim_at(total - 1), &flat)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PresentationJson {
    name: String,
    dims: Vec<usize>,
    differential: BTreeMap<String, Vec<Vec<String>>>,
    m1: BTreeMap<String, Vec<Vec<String>>>,
    m2: BTreeMap<String, Vec<Vec<String>>>,
    unit1: Vec<String>,
    unit2: Vec<String>,
    h: BTreeMap<String, Vec<Vec<String>>>,
    h_op: BTreeMap<String, Vec<Vec<String>>>,
}

fn grid_of(m: &Matrix) -> Vec<Vec<String>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| scalar_string(m.get(i, j))).collect())
        .collect()
}

fn matrix_of(grid: &[Vec<String>], rows: usize, cols: usize, what: &str) -> Result<Matrix, E2Error> {
    if grid.len() != rows || grid.iter().any(|r| r.len() != cols) {
        return Err(E2Error::Json(format!(
            "{what}: grid must be {rows}×{cols}"
        )));
    }
    let mut m = Matrix::zero(rows, cols);
    for (i, row) in grid.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            let v = parse_scalar(s).map_err(|e| E2Error::Json(format!("{what}[{i}][{j}]: {e}")))?;
            if !v.is_zero() {
                m.set(i, j, v);
            }
        }
    }
    Ok(m)
}

fn parse_key(key: &str, parts: usize, what: &str) -> Result<Vec<usize>, E2Error> {
    let out: Result<Vec<usize>, _> = key.split(',').map(|p| p.trim().parse::<usize>()).collect();
    match out {
        Ok(v) if v.len() == parts => Ok(v),
        _ => Err(E2Error::Json(format!(
            "{what}: key {key:?} must be {parts} comma-separated degrees"
        ))),
    }
}

impl MatrixPresentation {
    pub fn to_json(&self) -> String {
        let key2 = |(p, q): &(usize, usize)| format!("{p},{q}");
        let key4 = |k: &[usize; 4]| format!("{},{},{},{}", k[0], k[1], k[2], k[3]);
        let doc = PresentationJson {
            name: self.name.clone(),
            dims: self.dims.clone(),
            differential: self
                .differential
                .iter()
                .map(|(k, m)| (k.to_string(), grid_of(m)))
                .collect(),
            m1: self.m1.iter().map(|(k, m)| (key2(k), grid_of(m))).collect(),
            m2: self.m2.iter().map(|(k, m)| (key2(k), grid_of(m))).collect(),
            unit1: self.unit1.iter().map(scalar_string).collect(),
            unit2: self.unit2.iter().map(scalar_string).collect(),
            h: self.h.iter().map(|(k, m)| (key4(k), grid_of(m))).collect(),
            h_op: self.h_op.iter().map(|(k, m)| (key4(k), grid_of(m))).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("presentation serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, E2Error> {
        let doc: PresentationJson =
            serde_json::from_str(text).map_err(|e| E2Error::Json(e.to_string()))?;
        if doc.dims.is_empty() {
            return Err(E2Error::Json("dims must be nonempty".to_string()));
        }
        let dim_at = |d: usize| doc.dims.get(d).copied().unwrap_or(0);
        let mut differential = BTreeMap::new();
        for (k, grid) in &doc.differential {
            let p = parse_key(k, 1, "differential")?[0];
            differential.insert(
                p,
                matrix_of(grid, dim_at(p + 1), dim_at(p), &format!("differential[{k}]"))?,
            );
        }
        let parse_bilinear = |map: &BTreeMap<String, Vec<Vec<String>>>,
                              what: &str|
         -> Result<BTreeMap<(usize, usize), Matrix>, E2Error> {
            let mut out = BTreeMap::new();
            for (k, grid) in map {
                let pq = parse_key(k, 2, what)?;
                out.insert(
                    (pq[0], pq[1]),
                    matrix_of(
                        grid,
                        dim_at(pq[0] + pq[1]),
                        dim_at(pq[0]) * dim_at(pq[1]),
                        &format!("{what}[{k}]"),
                    )?,
                );
            }
            Ok(out)
        };
        let parse_quad = |map: &BTreeMap<String, Vec<Vec<String>>>,
                          what: &str|
         -> Result<BTreeMap<[usize; 4], Matrix>, E2Error> {
            let mut out = BTreeMap::new();
            for (k, grid) in map {
                let d = parse_key(k, 4, what)?;
                let total: usize = d.iter().sum();
                if total == 0 {
                    return Err(E2Error::Json(format!(
                        "{what}[{k}]: all-zero degree block has no target degree"
                    )));
                }
                out.insert(
                    [d[0], d[1], d[2], d[3]],
                    matrix_of(
                        grid,
                        dim_at(total - 1),
                        d.iter().map(|&p| dim_at(p)).product(),
                        &format!("{what}[{k}]"),
                    )?,
                );
            }
            Ok(out)
        };
        let parse_unit = |v: &[String], what: &str| -> Result<Vec<Scalar>, E2Error> {
            if v.len() != doc.dims[0] {
                return Err(E2Error::Json(format!(
                    "{what}: unit must have {} coordinates",
                    doc.dims[0]
                )));
            }
            v.iter()
                .map(|s| parse_scalar(s).map_err(|e| E2Error::Json(format!("{what}: {e}"))))
                .collect()
        };
        Ok(MatrixPresentation {
            name: doc.name,
            unit1: parse_unit(&doc.unit1, "unit1")?,
            unit2: parse_unit(&doc.unit2, "unit2")?,
            m1: parse_bilinear(&doc.m1, "m1")?,
            m2: parse_bilinear(&doc.m2, "m2")?,
            h: parse_quad(&doc.h, "h")?,
            h_op: parse_quad(&doc.h_op, "h_op")?,
            differential,
            dims: doc.dims,
        })
    }
}

/// Tabulates every structure map of `ops` into an explicit
/// [`MatrixPresentation`] over the same degree window. Zero blocks are
/// omitted (absent means zero). Square-filler blocks are tabulated for total
/// degree up to `max_degree + 1`, the full range bracket extraction reads,
/// so validating or extracting from the result agrees with the source. Each
/// block is budget-checked before it is filled.
pub fn materialize_presentation<T: TwoAlgebraOps>(
    ops: &T,
    budget: &Budget,
) -> Result<MatrixPresentation, E2Error> {
    let max = ops.max_degree();
    let dims: Vec<usize> = (0..=max).map(|d| ops.dim(d)).collect();

    let fill = |rows: usize,
                cols: Option<usize>,
                what: String,
                column: &mut dyn FnMut(usize) -> Vec<Scalar>|
     -> Result<Option<Matrix>, E2Error> {
        budget.check(&what, cols.and_then(|c| rows.checked_mul(c)))?;
        let cols = cols.expect("checked above");
        let mut m = Matrix::zero(rows, cols);
        let mut nonzero = false;
        for j in 0..cols {
            for (i, v) in column(j).into_iter().enumerate() {
                if !v.is_zero() {
                    nonzero = true;
                    m.set(i, j, v);
                }
            }
        }
        Ok(if nonzero { Some(m) } else { None })
    };

    let mut differential = BTreeMap::new();
    for d in 0..max {
        let block = fill(
            dims[d + 1],
            Some(dims[d]),
            format!("materialized differential block at degree {d}"),
            &mut |j| ops.differential(d, &basis_vector(dims[d], j)),
        )?;
        if let Some(m) = block {
            differential.insert(d, m);
        }
    }

    let mut m1 = BTreeMap::new();
    let mut m2 = BTreeMap::new();
    for p in 0..=max {
        for q in 0..=max.saturating_sub(p) {
            for (map, which) in [(&mut m1, true), (&mut m2, false)] {
                let block = fill(
                    dims[p + q],
                    dims[p].checked_mul(dims[q]),
                    format!("materialized multiplication block at degrees ({p}, {q})"),
                    &mut |j| {
                        let x = basis_vector(dims[p], j / dims[q]);
                        let y = basis_vector(dims[q], j % dims[q]);
                        if which {
                            ops.m1(p, &x, q, &y)
                        } else {
                            ops.m2(p, &x, q, &y)
                        }
                    },
                )?;
                if let Some(m) = block {
                    map.insert((p, q), m);
                }
            }
        }
    }

    let mut h = BTreeMap::new();
    let mut h_op = BTreeMap::new();
    for a in 0..=max {
        for b in 0..=max {
            for c in 0..=max {
                for d in 0..=max {
                    let total = a + b + c + d;
                    if total == 0 || total > max + 1 {
                        continue;
                    }
                    let degs = [a, b, c, d];
                    let sizes = [dims[a], dims[b], dims[c], dims[d]];
                    let cols = sizes
                        .iter()
                        .try_fold(1usize, |acc, &s| acc.checked_mul(s));
                    for (map, which) in [(&mut h, true), (&mut h_op, false)] {
                        let block = fill(
                            dims[total - 1],
                            cols,
                            format!("materialized square-filler block at degrees {degs:?}"),
                            &mut |j| {
                                let mut rest = j;
                                let mut idx = [0usize; 4];
                                for k in (0..4).rev() {
                                    idx[k] = rest % sizes[k];
                                    rest /= sizes[k];
                                }
                                let t: Vec<Vec<Scalar>> = (0..4)
                                    .map(|k| basis_vector(sizes[k], idx[k]))
                                    .collect();
                                let refs = [&t[0][..], &t[1][..], &t[2][..], &t[3][..]];
                                if which {
                                    ops.h(degs, refs)
                                } else {
                                    ops.h_op(degs, refs)
                                }
                            },
                        )?;
                        if let Some(m) = block {
                            map.insert(degs, m);
                        }
                    }
                }
            }
        }
    }

    Ok(MatrixPresentation {
        name: ops.name(),
        dims,
        differential,
        m1,
        m2,
        unit1: ops.unit1(),
        unit2: ops.unit2(),
        h,
        h_op,
    })
}

/// One validation check: name, verdict, and the first failing basis witness.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub first_failure: Option<String>,
    pub points_checked: usize,
}

/// Full validation report; `valid` iff every check passed.
#[derive(Debug, Clone)]
pub struct PresentationReport {
    pub presentation: String,
    pub checks: Vec<CheckOutcome>,
    pub valid: bool,
}

impl PresentationReport {
    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed)
    }
}

fn basis_vector(dim: usize, i: usize) -> Vec<Scalar> {
    let mut v = vec![Scalar::zero(); dim];
    v[i] = Scalar::one();
    v
}

fn add_scaled(acc: &mut [Scalar], v: &[Scalar], s: &Scalar) {
    debug_assert_eq!(acc.len(), v.len());
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b * s;
    }
}

fn first_nonzero(v: &[Scalar]) -> Option<(usize, &Scalar)> {
    v.iter().enumerate().find(|(_, c)| !c.is_zero())
}

/// Iterates over all degree tuples `(p_1..p_k)` with `Σ ≤ max_total` and
/// `p_i ≤ max_degree`.
fn for_each_degree_tuple(
    k: usize,
    max_degree: usize,
    max_total: usize,
    mut body: impl FnMut(&[usize]),
) {
    let mut tuple = vec![0usize; k];
    loop {
        if tuple.iter().sum::<usize>() <= max_total {
            body(&tuple);
        }
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if tuple[i] < max_degree {
                tuple[i] += 1;
                for slot in tuple.iter_mut().skip(i + 1) {
                    *slot = 0;
                }
                break;
            }
        }
    }
}

/// Which of the two interchange squares a residual refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Square {
    Straight,
    Opposite,
}

/// The full square residual at one 4-tuple of carrier elements; zero iff the
/// homotopy fills its square at that tuple.
fn square_residual<T: TwoAlgebraOps>(
    p: &T,
    square: Square,
    degs: [usize; 4],
    t: [&[Scalar]; 4],
) -> Vec<Scalar> {
    let total: usize = degs.iter().sum();
    let mut residual = vec![Scalar::zero(); p.dim(total)];
    let hom = |degs: [usize; 4], t: [&[Scalar]; 4]| match square {
        Square::Straight => p.h(degs, t),
        Square::Opposite => p.h_op(degs, t),
    };
    // ∂(h(t)) — absent when the homotopy output would sit in degree −1.
    if total >= 1 {
        let h_val = hom(degs, t);
        add_scaled(&mut residual, &p.differential(total - 1, &h_val), &Scalar::one());
    }
    // Σ_i ± h(…, ∂t_i, …): Koszul accumulation over succeeding (straight)
    // or preceding (opposite) slots.
    for i in 0..4 {
        let bumped = p.differential(degs[i], t[i]);
        let mut degs2 = degs;
        degs2[i] += 1;
        let mut slots: Vec<&[Scalar]> = t.to_vec();
        slots[i] = &bumped;
        let acc: usize = match square {
            Square::Straight => degs.iter().skip(i + 1).sum(),
            Square::Opposite => degs.iter().take(i).sum(),
        };
        let term = hom(degs2, [slots[0], slots[1], slots[2], slots[3]]);
        add_scaled(&mut residual, &term, &sign_pow(acc as i64));
    }
    // −Φ + (-1)^{|t1||t2|} Ψ with the opposite square built from swapped
    // arguments.
    let tau = sign_pow((degs[1] * degs[2]) as i64);
    match square {
        Square::Straight => {
            let phi = p.m1(
                degs[0] + degs[1],
                &p.m2(degs[0], t[0], degs[1], t[1]),
                degs[2] + degs[3],
                &p.m2(degs[2], t[2], degs[3], t[3]),
            );
            let psi = p.m2(
                degs[0] + degs[2],
                &p.m1(degs[0], t[0], degs[2], t[2]),
                degs[1] + degs[3],
                &p.m1(degs[1], t[1], degs[3], t[3]),
            );
            add_scaled(&mut residual, &phi, &-Scalar::one());
            add_scaled(&mut residual, &psi, &tau);
        }
        Square::Opposite => {
            let phi = p.m1(
                degs[3] + degs[2],
                &p.m2(degs[3], t[3], degs[2], t[2]),
                degs[1] + degs[0],
                &p.m2(degs[1], t[1], degs[0], t[0]),
            );
            let psi = p.m2(
                degs[3] + degs[1],
                &p.m1(degs[3], t[3], degs[1], t[1]),
                degs[2] + degs[0],
                &p.m1(degs[2], t[2], degs[0], t[0]),
            );
            add_scaled(&mut residual, &phi, &-Scalar::one());
            add_scaled(&mut residual, &psi, &tau);
        }
    }
    residual
}

/// Validates every structural invariant of a presentation, reporting each
/// check with its first failing basis witness. Failures are report entries,
/// never errors.
pub fn validate_presentation<T: TwoAlgebraOps>(p: &T) -> PresentationReport {
    let max = p.max_degree();
    let mut checks = Vec::new();

    // d² = 0.
    {
        let mut failure = None;
        let mut points = 0usize;
        for degree in 0..=max.saturating_sub(2) {
            for i in 0..p.dim(degree) {
                points += 1;
                let x = basis_vector(p.dim(degree), i);
                let ddx = p.differential(degree + 1, &p.differential(degree, &x));
                if let Some((j, c)) = first_nonzero(&ddx) {
                    failure = Some(format!(
                        "d²(e_{i}) ≠ 0 at degree {degree}: coordinate {j} = {}",
                        scalar_string(c)
                    ));
                    break;
                }
            }
            if failure.is_some() {
                break;
            }
        }
        checks.push(CheckOutcome {
            name: "differential squares to zero".to_string(),
            passed: failure.is_none(),
            first_failure: failure,
            points_checked: points,
        });
    }

    // m1, m2 chain maps: ∂m(x,y) − (-1)^{|y|} m(∂x,y) − m(x,∂y) = 0.
    for (label, which) in [("m1", 0usize), ("m2", 1usize)] {
        let mut failure = None;
        let mut points = 0usize;
        let m = |p_: usize, x: &[Scalar], q_: usize, y: &[Scalar]| {
            if which == 0 {
                p.m1(p_, x, q_, y)
            } else {
                p.m2(p_, x, q_, y)
            }
        };
        for_each_degree_tuple(2, max, max.saturating_sub(1), |degs| {
            if failure.is_some() {
                return;
            }
            let (dp, dq) = (degs[0], degs[1]);
            for i in 0..p.dim(dp) {
                let x = basis_vector(p.dim(dp), i);
                let dx = p.differential(dp, &x);
                for j in 0..p.dim(dq) {
                    points += 1;
                    let y = basis_vector(p.dim(dq), j);
                    let dy = p.differential(dq, &y);
                    let mut r = p.differential(dp + dq, &m(dp, &x, dq, &y));
                    add_scaled(&mut r, &m(dp + 1, &dx, dq, &y), &-sign_pow(dq as i64));
                    add_scaled(&mut r, &m(dp, &x, dq + 1, &dy), &-Scalar::one());
                    if let Some((c_idx, c)) = first_nonzero(&r) {
                        failure = Some(format!(
                            "∂{label}(e_{i}, e_{j}) residual at degrees ({dp},{dq}): coordinate {c_idx} = {}",
                            scalar_string(c)
                        ));
                        return;
                    }
                }
            }
        });
        checks.push(CheckOutcome {
            name: format!("{label} is a chain map"),
            passed: failure.is_none(),
            first_failure: failure,
            points_checked: points,
        });
    }

    // Units: exact two-sided identities, and exact agreement of the two.
    {
        let mut failure = None;
        let mut points = 0usize;
        let u1 = p.unit1();
        let u2 = p.unit2();
        if u1 != u2 {
            failure = Some("unit1 ≠ unit2 (exact agreement is required)".to_string());
        }
        for (label, unit, m) in [
            ("m1", &u1, 0usize),
            ("m2", &u2, 1usize),
        ] {
            if failure.is_some() {
                break;
            }
            for degree in 0..=max {
                for i in 0..p.dim(degree) {
                    points += 1;
                    let x = basis_vector(p.dim(degree), i);
                    let left = if m == 0 {
                        p.m1(0, unit, degree, &x)
                    } else {
                        p.m2(0, unit, degree, &x)
                    };
                    let right = if m == 0 {
                        p.m1(degree, &x, 0, unit)
                    } else {
                        p.m2(degree, &x, 0, unit)
                    };
                    if left != x || right != x {
                        failure = Some(format!(
                            "unit of {label} is not a two-sided identity on e_{i} at degree {degree}"
                        ));
                        break;
                    }
                }
                if failure.is_some() {
                    break;
                }
            }
        }
        checks.push(CheckOutcome {
            name: "units are exact two-sided identities and agree".to_string(),
            passed: failure.is_none(),
            first_failure: failure,
            points_checked: points,
        });
    }

    // The two interchange squares, swept over basis tuples strictly inside
    // the window (Σ ≤ max − 1 keeps every ∂-bumped slot within it).
    for (label, square) in [
        ("interchange square (h)", Square::Straight),
        ("interchange square (h_op)", Square::Opposite),
    ] {
        let mut failure = None;
        let mut points = 0usize;
        for_each_degree_tuple(4, max, max.saturating_sub(1), |degs| {
            if failure.is_some() {
                return;
            }
            let degs = [degs[0], degs[1], degs[2], degs[3]];
            let dims = [p.dim(degs[0]), p.dim(degs[1]), p.dim(degs[2]), p.dim(degs[3])];
            let mut idx = [0usize; 4];
            loop {
                if dims.iter().all(|&d| d > 0) {
                    points += 1;
                    let b: Vec<Vec<Scalar>> = (0..4)
                        .map(|s| basis_vector(dims[s], idx[s]))
                        .collect();
                    let r = square_residual(
                        p,
                        square,
                        degs,
                        [&b[0], &b[1], &b[2], &b[3]],
                    );
                    if let Some((c_idx, c)) = first_nonzero(&r) {
                        failure = Some(format!(
                            "residual at degrees {degs:?}, basis {idx:?}: coordinate {c_idx} = {}",
                            scalar_string(c)
                        ));
                        return;
                    }
                }
                let mut s = 4;
                loop {
                    if s == 0 {
                        return;
                    }
                    s -= 1;
                    if dims[s] > 0 && idx[s] + 1 < dims[s] {
                        idx[s] += 1;
                        idx[s + 1..].iter_mut().for_each(|v| *v = 0);
                        break;
                    }
                    idx[s] = 0;
                }
            }
        });
        checks.push(CheckOutcome {
            name: label.to_string(),
            passed: failure.is_none(),
            first_failure: failure,
            points_checked: points,
        });
    }

    let valid = checks.iter().all(|c| c.passed);
    PresentationReport {
        presentation: p.name(),
        checks,
        valid,
    }
}

/// The extracted degree `+1` bracket, stored as one matrix per degree pair
/// within the window.
#[derive(Debug, Clone)]
pub struct ExtractedBracket {
    pub presentation: String,
    pub max_degree: usize,
    /// `(p, q) → matrix` with rows indexed by degree `p+q−1` and columns by
    /// `i_f · dim(q) + i_g`; pairs with `p + q = 0` are absent (the output
    /// would live below the window).
    pub components: BTreeMap<(usize, usize), Matrix>,
}

impl ExtractedBracket {
    /// Bilinear evaluation `bracket(f, g)` for `f` of degree `p`, `g` of
    /// degree `q`.
    pub fn apply(
        &self,
        p: usize,
        f: &[Scalar],
        q: usize,
        g: &[Scalar],
    ) -> Result<Vec<Scalar>, E2Error> {
        let m = self.components.get(&(p, q)).ok_or(E2Error::Window {
            what: format!("bracket component ({p}, {q})"),
            degree: p + q,
            max_degree: self.max_degree,
        })?;
        let flat = bilinear_flat(f, g);
        if flat.len() != m.cols() {
            return Err(E2Error::Shape {
                what: format!("bracket arguments at degrees ({p}, {q})"),
                expected: m.cols(),
                got: flat.len(),
            });
        }
        Ok(m.mul_vec(&flat).expect("length checked above"))
    }
}

/// Extracts the bracket from a valid presentation:
/// `h(1,f,g,1) + h_op(f,1,1,g) + h_op(1,f,g,1) + h(f,1,1,g)`.
pub fn extract_bracket<T: TwoAlgebraOps>(p: &T) -> Result<ExtractedBracket, E2Error> {
    let report = validate_presentation(p);
    if let Some(bad) = report.first_failure() {
        return Err(E2Error::InvalidPresentation {
            check: bad.name.clone(),
            witness: bad
                .first_failure
                .clone()
                .unwrap_or_else(|| "unreported".to_string()),
        });
    }
    let max = p.max_degree();
    let unit = p.unit1();
    let mut components = BTreeMap::new();
    for dp in 0..=max {
        for dq in 0..=max {
            if dp + dq == 0 || dp + dq > max + 1 {
                continue;
            }
            let out_dim = p.dim(dp + dq - 1);
            let mut m = Matrix::zero(out_dim, p.dim(dp) * p.dim(dq));
            for i in 0..p.dim(dp) {
                let f = basis_vector(p.dim(dp), i);
                for j in 0..p.dim(dq) {
                    let g = basis_vector(p.dim(dq), j);
                    let mut value = vec![Scalar::zero(); out_dim];
                    let ins23 = [0, dp, dq, 0];
                    let ins14 = [dp, 0, 0, dq];
                    add_scaled(&mut value, &p.h(ins23, [&unit, &f, &g, &unit]), &Scalar::one());
                    add_scaled(&mut value, &p.h_op(ins14, [&f, &unit, &unit, &g]), &Scalar::one());
                    add_scaled(&mut value, &p.h_op(ins23, [&unit, &f, &g, &unit]), &Scalar::one());
                    add_scaled(&mut value, &p.h(ins14, [&f, &unit, &unit, &g]), &Scalar::one());
                    for (row, v) in value.into_iter().enumerate() {
                        if !v.is_zero() {
                            m.set(row, i * p.dim(dq) + j, v);
                        }
                    }
                }
            }
            components.insert((dp, dq), m);
        }
    }
    Ok(ExtractedBracket {
        presentation: p.name(),
        max_degree: max,
        components,
    })
}

/// Comparison of the extracted bracket against the signed Gerstenhaber
/// bracket on all basis cochains within the window.
#[derive(Debug, Clone)]
pub struct BracketComparison {
    pub pairs_checked: usize,
    pub matches: bool,
    /// Degree pairs `(p, q)` on which at least one basis value deviates.
    pub mismatched_pairs: Vec<(usize, usize)>,
    pub first_mismatch: Option<String>,
}

/// Compares `extract_bracket` with `bracket_signed` on every basis cochain
/// pair with `p, q ≤ max_each` inside the presentation window. The
/// deviation set is reported, not asserted away: with single-term square
/// fillers the two differ exactly on odd·odd degree pairs.
pub fn compare_with_hochschild_bracket(
    presentation: &HochschildPresentation,
    bracket: &ExtractedBracket,
    max_each: usize,
) -> Result<BracketComparison, E2Error> {
    let algebra = presentation.algebra();
    let mut mismatched = Vec::new();
    let mut first = None;
    let mut pairs = 0usize;
    for dp in 0..=max_each.min(presentation.max_degree()) {
        for dq in 0..=max_each.min(presentation.max_degree()) {
            if dp + dq == 0 || dp + dq > presentation.max_degree() + 1 {
                continue;
            }
            let mut pair_clean = true;
            for i in 0..presentation.dim(dp) {
                let f_coords = basis_vector(presentation.dim(dp), i);
                let f = Cochain::from_values(algebra, dp, f_coords.clone())?;
                for j in 0..presentation.dim(dq) {
                    pairs += 1;
                    let g_coords = basis_vector(presentation.dim(dq), j);
                    let g = Cochain::from_values(algebra, dq, g_coords.clone())?;
                    let extracted = bracket.apply(dp, &f_coords, dq, &g_coords)?;
                    let reference = bracket_signed(&f, &g)?;
                    if extracted != reference.values() {
                        pair_clean = false;
                        if first.is_none() {
                            let mut msg = String::new();
                            let _ = write!(
                                msg,
                                "arities ({dp},{dq}), basis pair ({i},{j}): extracted ≠ bracket_signed"
                            );
                            first = Some(msg);
                        }
                    }
                }
            }
            if !pair_clean {
                mismatched.push((dp, dq));
            }
        }
    }
    Ok(BracketComparison {
        pairs_checked: pairs,
        matches: mismatched.is_empty(),
        mismatched_pairs: mismatched,
        first_mismatch: first,
    })
}

/// Outcome of the strict-interchange (Eckmann–Hilton) degeneration check.
#[derive(Debug, Clone)]
pub struct StrictInterchangeOutcome {
    pub homotopies_vanish: bool,
    pub bracket_vanishes: bool,
    /// `m1 − m2` is a coboundary on every basis pair within the window.
    pub multiplications_agree_on_homology: bool,
}

/// For a presentation whose homotopies vanish identically the extracted
/// bracket must vanish and the two multiplications must agree on homology
/// (`m1 − m2` valuewise a coboundary, solved in the carrier).
pub fn strict_interchange_report<T: TwoAlgebraOps>(
    p: &T,
) -> Result<StrictInterchangeOutcome, E2Error> {
    let max = p.max_degree();
    // h ≡ 0 and h_op ≡ 0 on basis tuples within the window.
    let mut homotopies_vanish = true;
    for_each_degree_tuple(4, max, max, |degs| {
        if !homotopies_vanish {
            return;
        }
        let degs = [degs[0], degs[1], degs[2], degs[3]];
        let dims = [p.dim(degs[0]), p.dim(degs[1]), p.dim(degs[2]), p.dim(degs[3])];
        if dims.iter().any(|&d| d == 0) {
            return;
        }
        let mut idx = [0usize; 4];
        loop {
            let b: Vec<Vec<Scalar>> = (0..4).map(|s| basis_vector(dims[s], idx[s])).collect();
            let args = [&b[0][..], &b[1][..], &b[2][..], &b[3][..]];
            if p.h(degs, args).iter().any(|v| !v.is_zero())
                || p.h_op(degs, args).iter().any(|v| !v.is_zero())
            {
                homotopies_vanish = false;
                return;
            }
            let mut s = 4;
            loop {
                if s == 0 {
                    return;
                }
                s -= 1;
                if idx[s] + 1 < dims[s] {
                    idx[s] += 1;
                    idx[s + 1..].iter_mut().for_each(|v| *v = 0);
                    break;
                }
                idx[s] = 0;
            }
        }
    });
    let bracket = extract_bracket(p)?;
    let bracket_vanishes = bracket
        .components
        .values()
        .all(|m| (0..m.cols()).all(|c| m.column(c).iter().all(|v| v.is_zero())));
    // m1 − m2 valuewise a coboundary: solve d w = (m1 − m2)(x, y).
    let mut agree = true;
    let mut d_mats: BTreeMap<usize, Matrix> = BTreeMap::new();
    for degree in 0..max {
        let cols = p.dim(degree);
        let mut m = Matrix::zero(p.dim(degree + 1), cols);
        for c in 0..cols {
            let x = basis_vector(cols, c);
            for (r, v) in p.differential(degree, &x).into_iter().enumerate() {
                if !v.is_zero() {
                    m.set(r, c, v);
                }
            }
        }
        d_mats.insert(degree, m);
    }
    for_each_degree_tuple(2, max, max, |degs| {
        if !agree {
            return;
        }
        let (dp, dq) = (degs[0], degs[1]);
        for i in 0..p.dim(dp) {
            let x = basis_vector(p.dim(dp), i);
            for j in 0..p.dim(dq) {
                let y = basis_vector(p.dim(dq), j);
                let mut diff = p.m1(dp, &x, dq, &y);
                add_scaled(&mut diff, &p.m2(dp, &x, dq, &y), &-Scalar::one());
                if diff.iter().all(|v| v.is_zero()) {
                    continue;
                }
                let n = dp + dq;
                let solvable = n >= 1
                    && matches!(d_mats.get(&(n - 1)).map(|m| m.solve(&diff)), Some(Ok(Some(_))));
                if !solvable {
                    agree = false;
                    return;
                }
            }
        }
    });
    Ok(StrictInterchangeOutcome {
        homotopies_vanish,
        bracket_vanishes,
        multiplications_agree_on_homology: agree,
    })
}
