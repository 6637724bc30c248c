//! Chain-level Gerstenhaber structure on Hochschild cochains: the cup
//! product, the circle product, the signed bracket, and the explicit
//! homotopies that witness homotopy-commutativity of cup and fill the two
//! interchange squares.
//!
//! # Sign conventions
//!
//! Writing `p = arity(f)`, `q = arity(g)` and `∂f = (-1)^p df`:
//!
//! * cup carries no global sign: `(f⌣g)(a_1,…,a_{p+q}) = f(a_1,…,a_p) ·
//!   g(a_{p+1},…,a_{p+q})`; it is a chain map in the opposite-handed Koszul
//!   form `∂(f⌣g) = (-1)^q ∂f⌣g + f⌣∂g` (equivalently `d(f⌣g) = df⌣g +
//!   (-1)^p f⌣dg`).
//! * circle: `f{g} = Σ_{i=1}^{p} (-1)^{(q-1)(i-1)} f∘_i g`, where `f∘_i g`
//!   inserts `g` into slot `i`. The public operation requires `p ≥ 1`; where
//!   a formula degenerates (`p = 0`), internal uses take the term to be zero.
//! * unsigned bracket: `[f,g] = f{g} − (-1)^{(p-1)(q-1)} g{f}`; the signed
//!   bracket is `(-1)^{p+1} [f,g]`. The unsigned bracket satisfies the chain
//!   rule `∂[f,g] = [∂f,g] + (-1)^{p+1} [f,∂g]`.
//! * homotopy commutativity: the identity enforced by
//!   [`homotopy_commutativity_check`] is
//!   `(-1)^{pq} f⌣g − g⌣f = (-1)^{(p+1)q} (∂g){f} + (-1)^{(p+1)q-1} ∂(g{f})
//!   + (-1)^{pq+1} g{∂f}`, with `g{f}` the witnessing homotopy. This is the
//!   unique zero-residual arrangement of those four terms under the `∂` above
//!   and sign-free cup; the check fails loudly on any deviation, which is the
//!   enforcement mechanism for the whole convention set.
//!
//! # Interchange squares
//!
//! For a 4-tuple `(f₁, g₁, f₂, g₂)` with arities `(p₁, q₁, p₂, q₂)`, the two
//! routes through "multiply pairs, then multiply results" are
//!
//! ```text
//! Φ  = (f₁⌣g₁) ⌣ (f₂⌣g₂)            Φop = (g₂⌣f₂) ⌣ (g₁⌣f₁)
//! Ψ  = (-1)^{q₁p₂} (f₁⌣f₂) ⌣ (g₁⌣g₂)  Ψop = (-1)^{q₁p₂} (g₂⌣g₁) ⌣ (f₂⌣f₁)
//! ```
//!
//! (the `(-1)^{q₁p₂}` is the Koszul sign of transposing the middle factors;
//! the op routes use the opposite multiplication `m^op(f,g) = g⌣f` with no
//! extra twist). The fillers
//!
//! ```text
//! h    = (-1)^{p₂+q₂+1} f₁ ⌣ (f₂{g₁}) ⌣ g₂
//! h^op = (-1)^{p₁+q₁+1} g₂ ⌣ (g₁{f₂}) ⌣ f₁
//! ```
//!
//! satisfy `∂∘h + h∘∂⊗ = Φ − Ψ` and `∂∘h^op + h^op∘∂⊗' = Φop − Ψop`, where
//! the tensor differential applies `∂` slotwise with Koszul accumulation over
//! the *succeeding* slots for `h` (slot `i` carries `(-1)^{arity sum of slots
//! > i}`) and over the *preceding* slots for `h^op` — the two squares are
//! mirror-handed, and each accumulation is the only one under which a
//! single-term filler exists. Restricting along unit insertions gives
//! `h(1,f,g,1) = (-1)^{q+1} g{f}`, `h^op(1,f,g,1) = (-1)^{p+1} f{g}`, and
//! both fillers vanish on `(f,1,1,g)`.
//!
//! [`h_exponent_sweep`] re-derives the filler sign programmatically: it runs
//! the square residual over every candidate exponent and every basis tuple in
//! a window and reports which candidates survive.

use std::sync::Arc;

use thiserror::Error;

use crate::algebra::AlgebraSpec;
use crate::cochain::{decode_multi, for_each_multi, Cochain, CochainError, SparseCochain};
use crate::exactlin::{scalar_string, sign_pow, Scalar};
use num_traits::One;

#[derive(Debug, Error)]
pub enum GerstError {
    #[error("{what} requires positive arity")]
    ArityZero { what: &'static str },
    #[error(transparent)]
    Cochain(#[from] CochainError),
    #[error("convention mismatch at arities {arities:?}: residual nonzero at {point}")]
    ConventionMismatch { arities: Vec<usize>, point: String },
    #[error("homotopy witness expects {expected} inputs, got {got}")]
    WitnessArity { expected: usize, got: usize },
}

fn shared_algebra<'a>(cochains: &[&'a Cochain]) -> Result<&'a Arc<AlgebraSpec>, GerstError> {
    let first = cochains[0].algebra();
    for c in &cochains[1..] {
        if !Arc::ptr_eq(c.algebra(), first) && **c.algebra() != **first {
            return Err(GerstError::Cochain(CochainError::AlgebraMismatch));
        }
    }
    Ok(first)
}

fn upow(dim: usize, k: usize) -> u64 {
    (dim as u64).pow(k as u32)
}

/// Renders the first nonzero entry of a sparse cochain as a basis point, for
/// failure messages.
fn describe_first_term(algebra: &AlgebraSpec, c: &SparseCochain) -> String {
    match c.terms.iter().next() {
        None => "the zero cochain".to_string(),
        Some((&(flat, out), v)) => {
            let labels = decode_multi(flat, algebra.dim(), c.arity)
                .iter()
                .map(|&m| algebra.basis_labels()[m].clone())
                .collect::<Vec<_>>()
                .join(", ");
            format!(
                "({labels}) ↦ {} with coefficient {}",
                algebra.basis_labels()[out],
                scalar_string(v)
            )
        }
    }
}

pub(crate) fn cup_sparse(
    algebra: &AlgebraSpec,
    a: &SparseCochain,
    b: &SparseCochain,
) -> SparseCochain {
    let mut out = SparseCochain::zero(a.arity + b.arity);
    let shift = upow(algebra.dim(), b.arity);
    for (&(fa, ua), ca) in &a.terms {
        for (&(fb, ub), cb) in &b.terms {
            let flat = fa * shift + fb;
            let cab = ca * cb;
            for &(k, ref ck) in algebra.basis_product(ua, ub) {
                out.add_term(flat, k, &cab * ck);
            }
        }
    }
    out
}

/// Circle product, lenient form: zero when the left operand has no slot.
pub(crate) fn circle_sparse(f: &SparseCochain, g: &SparseCochain, dim: usize) -> SparseCochain {
    let p = f.arity;
    let q = g.arity;
    let mut out = SparseCochain::zero((p + q).saturating_sub(1));
    if p == 0 {
        return out;
    }
    let mut g_by_out: Vec<Vec<(u64, Scalar)>> = vec![Vec::new(); dim];
    for (&(gf, gout), gc) in &g.terms {
        g_by_out[gout].push((gf, gc.clone()));
    }
    let dq = upow(dim, q);
    for (&(ff, fout), fc) in &f.terms {
        let multi = decode_multi(ff, dim, p);
        for (i, &slot_basis) in multi.iter().enumerate() {
            if g_by_out[slot_basis].is_empty() {
                continue;
            }
            let coeff = fc * &sign_pow((q as i64 - 1) * i as i64);
            let dtail = upow(dim, p - 1 - i);
            let prefix = ff / (dtail * dim as u64);
            let suffix = ff % dtail;
            for (gflat, gc) in &g_by_out[slot_basis] {
                let flat = (prefix * dq + gflat) * dtail + suffix;
                out.add_term(flat, fout, &coeff * gc);
            }
        }
    }
    out
}

pub(crate) fn bracket_sparse(
    algebra: &AlgebraSpec,
    f: &SparseCochain,
    g: &SparseCochain,
) -> SparseCochain {
    let dim = algebra.dim();
    let p = f.arity as i64;
    let q = g.arity as i64;
    let mut out = circle_sparse(f, g, dim);
    out.add_assign_scaled(&circle_sparse(g, f, dim), &-sign_pow((p - 1) * (q - 1)));
    out
}

/// Cup product `(f⌣g)(a⃗) = f(a_1,…,a_p) · g(a_{p+1},…,a_{p+q})`.
pub fn cup(f: &Cochain, g: &Cochain) -> Result<Cochain, GerstError> {
    let algebra = Arc::clone(shared_algebra(&[f, g])?);
    Ok(cup_sparse(&algebra, &f.to_sparse(), &g.to_sparse()).to_dense(&algebra))
}

/// Circle product `f{g} = Σ_{i=1}^{p} (-1)^{(q-1)(i-1)} f∘_i g`. Errors when
/// the left operand has arity 0 (nothing to insert into).
pub fn circle(f: &Cochain, g: &Cochain) -> Result<Cochain, GerstError> {
    if f.arity() == 0 {
        return Err(GerstError::ArityZero {
            what: "circle product (left operand)",
        });
    }
    let algebra = Arc::clone(shared_algebra(&[f, g])?);
    Ok(circle_sparse(&f.to_sparse(), &g.to_sparse(), algebra.dim()).to_dense(&algebra))
}

/// Unsigned Gerstenhaber bracket `[f,g] = f{g} − (-1)^{(p-1)(q-1)} g{f}`,
/// with degenerate circle terms taken as zero.
pub fn bracket(f: &Cochain, g: &Cochain) -> Result<Cochain, GerstError> {
    let algebra = Arc::clone(shared_algebra(&[f, g])?);
    Ok(bracket_sparse(&algebra, &f.to_sparse(), &g.to_sparse()).to_dense(&algebra))
}

/// Signed bracket `(-1)^{p+1} [f,g]`.
pub fn bracket_signed(f: &Cochain, g: &Cochain) -> Result<Cochain, GerstError> {
    let algebra = Arc::clone(shared_algebra(&[f, g])?);
    let sign = sign_pow(f.arity() as i64 + 1);
    Ok(bracket_sparse(&algebra, &f.to_sparse(), &g.to_sparse())
        .scaled(&sign)
        .to_dense(&algebra))
}

/// Which homotopy a [`HomotopyWitness`] carries, and hence how many inputs
/// its map expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomotopyKind {
    /// Pair homotopy `g{f}` between the two cup orders.
    Commutativity,
    /// 4-tuple filler `h` of the interchange square.
    InterchangeSquare,
    /// 4-tuple filler `h^op` of the opposite-multiplication square.
    InterchangeSquareOp,
}

/// A validated homotopy: the two operations it connects, its value on the
/// checked inputs, and the residual of its defining identity (retained for
/// auditing; zero for a valid witness).
#[derive(Debug, Clone)]
pub struct HomotopyWitness {
    pub kind: HomotopyKind,
    pub source_op: String,
    pub target_op: String,
    witness: Cochain,
    residual: Cochain,
}

impl HomotopyWitness {
    /// The homotopy as a map: re-evaluates on a pair (commutativity) or a
    /// 4-tuple (square fillers).
    pub fn witness(&self, inputs: &[&Cochain]) -> Result<Cochain, GerstError> {
        let expected = match self.kind {
            HomotopyKind::Commutativity => 2,
            _ => 4,
        };
        if inputs.len() != expected {
            return Err(GerstError::WitnessArity {
                expected,
                got: inputs.len(),
            });
        }
        match self.kind {
            HomotopyKind::Commutativity => {
                let algebra = Arc::clone(shared_algebra(inputs)?);
                Ok(
                    circle_sparse(&inputs[1].to_sparse(), &inputs[0].to_sparse(), algebra.dim())
                        .to_dense(&algebra),
                )
            }
            HomotopyKind::InterchangeSquare => {
                square_homotopy_h(inputs[0], inputs[1], inputs[2], inputs[3])
            }
            HomotopyKind::InterchangeSquareOp => {
                square_homotopy_h_op(inputs[0], inputs[1], inputs[2], inputs[3])
            }
        }
    }

    /// The homotopy's value on the inputs it was checked against.
    pub fn witness_value(&self) -> &Cochain {
        &self.witness
    }

    /// Residual of the defining identity on the checked inputs.
    pub fn check_residual(&self) -> &Cochain {
        &self.residual
    }

    pub fn is_valid(&self) -> bool {
        self.residual.is_zero()
    }
}

/// Verifies the homotopy-commutativity identity
/// `(-1)^{pq} f⌣g − g⌣f = (-1)^{(p+1)q} (∂g){f} + (-1)^{(p+1)q-1} ∂(g{f}) +
/// (-1)^{pq+1} g{∂f}` exactly and returns the witness `g{f}`. A nonzero
/// residual is a convention bug and comes back as an error naming a basis
/// point where the two sides differ.
pub fn homotopy_commutativity_check(
    f: &Cochain,
    g: &Cochain,
) -> Result<HomotopyWitness, GerstError> {
    if f.arity() == 0 || g.arity() == 0 {
        return Err(GerstError::ArityZero {
            what: "homotopy commutativity check",
        });
    }
    let algebra = Arc::clone(shared_algebra(&[f, g])?);
    let dim = algebra.dim();
    let p = f.arity() as i64;
    let q = g.arity() as i64;
    let fs = f.to_sparse();
    let gs = g.to_sparse();

    let mut lhs = cup_sparse(&algebra, &fs, &gs).scaled(&sign_pow(p * q));
    lhs.add_assign_scaled(&cup_sparse(&algebra, &gs, &fs), &-Scalar::one());

    let df = fs.signed_differential(&algebra);
    let dg = gs.signed_differential(&algebra);
    let gf = circle_sparse(&gs, &fs, dim);
    let mut rhs = circle_sparse(&dg, &fs, dim).scaled(&sign_pow((p + 1) * q));
    rhs.add_assign_scaled(&gf.signed_differential(&algebra), &sign_pow((p + 1) * q - 1));
    rhs.add_assign_scaled(&circle_sparse(&gs, &df, dim), &sign_pow(p * q + 1));

    let residual = lhs.sub(&rhs);
    if !residual.is_zero() {
        return Err(GerstError::ConventionMismatch {
            arities: vec![f.arity(), g.arity()],
            point: describe_first_term(&algebra, &residual),
        });
    }
    Ok(HomotopyWitness {
        kind: HomotopyKind::Commutativity,
        source_op: format!("(-1)^{{pq}} f⌣g − g⌣f  (p = {p}, q = {q})"),
        target_op:
            "(-1)^{(p+1)q} (∂g){f} + (-1)^{(p+1)q-1} ∂(g{f}) + (-1)^{pq+1} g{∂f}".to_string(),
        witness: gf.to_dense(&algebra),
        residual: residual.to_dense(&algebra),
    })
}

/// A sign-exponent rule for the square filler, as a function of the four
/// *degrees* `|f₁|, |g₁|, |f₂|, |g₂|` (degree = arity − 1).
pub type ExponentFn = fn(i64, i64, i64, i64) -> i64;

/// The exponent under which `h` actually fills the interchange square:
/// `|f₂| + |g₂| − 1`.
pub fn resolved_h_exponent(_f1: i64, _g1: i64, f2: i64, g2: i64) -> i64 {
    f2 + g2 - 1
}

/// The exponent under which `h^op` fills the opposite square:
/// `|f₁| + |g₁| − 1`.
pub fn resolved_h_op_exponent(f1: i64, g1: i64, _f2: i64, _g2: i64) -> i64 {
    f1 + g1 - 1
}

fn degrees(t: [&SparseCochain; 4]) -> [i64; 4] {
    [
        t[0].arity as i64 - 1,
        t[1].arity as i64 - 1,
        t[2].arity as i64 - 1,
        t[3].arity as i64 - 1,
    ]
}

/// `(-1)^{exp} f₁ ⌣ (f₂{g₁}) ⌣ g₂` with the exponent evaluated on the actual
/// input degrees.
fn h_filler_sparse(
    algebra: &AlgebraSpec,
    t: [&SparseCochain; 4],
    exponent: ExponentFn,
) -> SparseCochain {
    let dim = algebra.dim();
    let inner = circle_sparse(t[2], t[1], dim);
    let full = cup_sparse(algebra, &cup_sparse(algebra, t[0], &inner), t[3]);
    let d = degrees(t);
    full.scaled(&sign_pow(exponent(d[0], d[1], d[2], d[3])))
}

/// `(-1)^{exp} g₂ ⌣ (g₁{f₂}) ⌣ f₁`.
fn h_op_filler_sparse(
    algebra: &AlgebraSpec,
    t: [&SparseCochain; 4],
    exponent: ExponentFn,
) -> SparseCochain {
    let dim = algebra.dim();
    let inner = circle_sparse(t[1], t[2], dim);
    let full = cup_sparse(algebra, &cup_sparse(algebra, t[3], &inner), t[0]);
    let d = degrees(t);
    full.scaled(&sign_pow(exponent(d[0], d[1], d[2], d[3])))
}

/// Which side of each slot the tensor differential's Koszul sign accumulates
/// over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accumulation {
    /// Slot `i` carries `(-1)^{arity sum of slots after i}` (used by `h`).
    Succeeding,
    /// Slot `i` carries `(-1)^{arity sum of slots before i}` (used by `h^op`).
    Preceding,
}

fn slot_sign(arities: &[usize; 4], i: usize, acc: Accumulation) -> Scalar {
    let range = match acc {
        Accumulation::Succeeding => &arities[i + 1..],
        Accumulation::Preceding => &arities[..i],
    };
    sign_pow(range.iter().map(|&a| a as i64).sum())
}

/// Residual of `∂∘h + h∘∂⊗ − (Φ − Ψ)` on one 4-tuple, with the filler sign
/// given by `exponent` and succeeding-slot Koszul accumulation.
pub(crate) fn h_square_residual_sparse(
    algebra: &AlgebraSpec,
    t: [&SparseCochain; 4],
    exponent: ExponentFn,
) -> SparseCochain {
    let arities = [t[0].arity, t[1].arity, t[2].arity, t[3].arity];
    let mut res = h_filler_sparse(algebra, t, exponent).signed_differential(algebra);
    for i in 0..4 {
        let bumped = t[i].signed_differential(algebra);
        let mut s = t;
        s[i] = &bumped;
        let eps = slot_sign(&arities, i, Accumulation::Succeeding);
        res.add_assign_scaled(&h_filler_sparse(algebra, s, exponent), &eps);
    }
    let phi = cup_sparse(
        algebra,
        &cup_sparse(algebra, t[0], t[1]),
        &cup_sparse(algebra, t[2], t[3]),
    );
    let psi = cup_sparse(
        algebra,
        &cup_sparse(algebra, t[0], t[2]),
        &cup_sparse(algebra, t[1], t[3]),
    )
    .scaled(&sign_pow((arities[1] * arities[2]) as i64));
    res.add_assign_scaled(&phi, &-Scalar::one());
    res.add_assign_scaled(&psi, &Scalar::one());
    res
}

/// Residual of `∂∘h^op + h^op∘∂⊗ − (Φop − Ψop)` with preceding-slot Koszul
/// accumulation.
pub(crate) fn h_op_square_residual_sparse(
    algebra: &AlgebraSpec,
    t: [&SparseCochain; 4],
    exponent: ExponentFn,
) -> SparseCochain {
    let arities = [t[0].arity, t[1].arity, t[2].arity, t[3].arity];
    let mut res = h_op_filler_sparse(algebra, t, exponent).signed_differential(algebra);
    for i in 0..4 {
        let bumped = t[i].signed_differential(algebra);
        let mut s = t;
        s[i] = &bumped;
        let eps = slot_sign(&arities, i, Accumulation::Preceding);
        res.add_assign_scaled(&h_op_filler_sparse(algebra, s, exponent), &eps);
    }
    let phi_op = cup_sparse(
        algebra,
        &cup_sparse(algebra, t[3], t[2]),
        &cup_sparse(algebra, t[1], t[0]),
    );
    let psi_op = cup_sparse(
        algebra,
        &cup_sparse(algebra, t[3], t[1]),
        &cup_sparse(algebra, t[2], t[0]),
    )
    .scaled(&sign_pow((arities[1] * arities[2]) as i64));
    res.add_assign_scaled(&phi_op, &-Scalar::one());
    res.add_assign_scaled(&psi_op, &Scalar::one());
    res
}

fn four_sparse(
    f1: &Cochain,
    g1: &Cochain,
    f2: &Cochain,
    g2: &Cochain,
) -> Result<(Arc<AlgebraSpec>, [SparseCochain; 4]), GerstError> {
    let algebra = Arc::clone(shared_algebra(&[f1, g1, f2, g2])?);
    Ok((
        algebra,
        [
            f1.to_sparse(),
            g1.to_sparse(),
            f2.to_sparse(),
            g2.to_sparse(),
        ],
    ))
}

fn dense_at_arity(algebra: &Arc<AlgebraSpec>, sp: SparseCochain, arity: usize) -> Cochain {
    if sp.is_zero() {
        Cochain::zero(algebra, arity)
    } else {
        debug_assert_eq!(sp.arity, arity);
        sp.to_dense(algebra)
    }
}

/// The interchange-square filler `h(f₁,g₁,f₂,g₂) = (-1)^{p₂+q₂+1} f₁ ⌣
/// (f₂{g₁}) ⌣ g₂`, zero when the inner circle degenerates.
pub fn square_homotopy_h(
    f1: &Cochain,
    g1: &Cochain,
    f2: &Cochain,
    g2: &Cochain,
) -> Result<Cochain, GerstError> {
    let (algebra, t) = four_sparse(f1, g1, f2, g2)?;
    let sp = h_filler_sparse(&algebra, [&t[0], &t[1], &t[2], &t[3]], resolved_h_exponent);
    let arity = (f1.arity() + g1.arity() + f2.arity() + g2.arity()).saturating_sub(1);
    Ok(dense_at_arity(&algebra, sp, arity))
}

/// The opposite-square filler `h^op(f₁,g₁,f₂,g₂) = (-1)^{p₁+q₁+1} g₂ ⌣
/// (g₁{f₂}) ⌣ f₁`.
pub fn square_homotopy_h_op(
    f1: &Cochain,
    g1: &Cochain,
    f2: &Cochain,
    g2: &Cochain,
) -> Result<Cochain, GerstError> {
    let (algebra, t) = four_sparse(f1, g1, f2, g2)?;
    let sp = h_op_filler_sparse(&algebra, [&t[0], &t[1], &t[2], &t[3]], resolved_h_op_exponent);
    let arity = (f1.arity() + g1.arity() + f2.arity() + g2.arity()).saturating_sub(1);
    Ok(dense_at_arity(&algebra, sp, arity))
}

/// `H(f,g) = h(1, f, g, 1) = (-1)^{q+1} g{f}`.
pub fn h_restriction(f: &Cochain, g: &Cochain) -> Result<Cochain, GerstError> {
    let algebra = Arc::clone(shared_algebra(&[f, g])?);
    let unit = Cochain::unit_cochain(&algebra);
    square_homotopy_h(&unit, f, g, &unit)
}

/// `H^op(f,g) = h^op(1, f, g, 1) = (-1)^{p+1} f{g}`.
pub fn h_op_restriction(f: &Cochain, g: &Cochain) -> Result<Cochain, GerstError> {
    let algebra = Arc::clone(shared_algebra(&[f, g])?);
    let unit = Cochain::unit_cochain(&algebra);
    square_homotopy_h_op(&unit, f, g, &unit)
}

fn square_check_common(
    f1: &Cochain,
    g1: &Cochain,
    f2: &Cochain,
    g2: &Cochain,
    op_square: bool,
) -> Result<HomotopyWitness, GerstError> {
    let (algebra, t) = four_sparse(f1, g1, f2, g2)?;
    let tr = [&t[0], &t[1], &t[2], &t[3]];
    let (residual, witness, kind, source_op, target_op) = if op_square {
        (
            h_op_square_residual_sparse(&algebra, tr, resolved_h_op_exponent),
            h_op_filler_sparse(&algebra, tr, resolved_h_op_exponent),
            HomotopyKind::InterchangeSquareOp,
            "(g₂⌣f₂) ⌣ (g₁⌣f₁)".to_string(),
            "(-1)^{q₁p₂} (g₂⌣g₁) ⌣ (f₂⌣f₁)".to_string(),
        )
    } else {
        (
            h_square_residual_sparse(&algebra, tr, resolved_h_exponent),
            h_filler_sparse(&algebra, tr, resolved_h_exponent),
            HomotopyKind::InterchangeSquare,
            "(f₁⌣g₁) ⌣ (f₂⌣g₂)".to_string(),
            "(-1)^{q₁p₂} (f₁⌣f₂) ⌣ (g₁⌣g₂)".to_string(),
        )
    };
    let arities = vec![f1.arity(), g1.arity(), f2.arity(), g2.arity()];
    if !residual.is_zero() {
        return Err(GerstError::ConventionMismatch {
            arities,
            point: describe_first_term(&algebra, &residual),
        });
    }
    let total: usize = arities.iter().sum();
    Ok(HomotopyWitness {
        kind,
        source_op,
        target_op,
        witness: dense_at_arity(&algebra, witness, total.saturating_sub(1)),
        residual: dense_at_arity(&algebra, residual, total),
    })
}

/// Checks `∂∘h + h∘∂⊗ = Φ − Ψ` on one 4-tuple and returns the witness.
pub fn interchange_square_check(
    f1: &Cochain,
    g1: &Cochain,
    f2: &Cochain,
    g2: &Cochain,
) -> Result<HomotopyWitness, GerstError> {
    square_check_common(f1, g1, f2, g2, false)
}

/// Checks `∂∘h^op + h^op∘∂⊗ = Φop − Ψop` on one 4-tuple.
pub fn interchange_square_op_check(
    f1: &Cochain,
    g1: &Cochain,
    f2: &Cochain,
    g2: &Cochain,
) -> Result<HomotopyWitness, GerstError> {
    square_check_common(f1, g1, f2, g2, true)
}

/// One sign-exponent candidate for the `h` filler, named by its formula in
/// the degrees `|f₁|, |g₁|, |f₂|, |g₂|`.
pub struct HExponentCandidate {
    pub name: &'static str,
    pub exponent: ExponentFn,
}

/// The candidate exponents the sweep arbitrates between: the literal
/// repeated-term reading, two cross-term conjectures, a cross-term variant,
/// and the cross-term-free exponent.
pub fn h_exponent_candidates() -> Vec<HExponentCandidate> {
    vec![
        HExponentCandidate {
            name: "2|f1|+|f2||g1|-1",
            exponent: |f1, g1, f2, _| 2 * f1 + f2 * g1 - 1,
        },
        HExponentCandidate {
            name: "|f1|+|g1|+|f2||g1|-1",
            exponent: |f1, g1, f2, _| f1 + g1 + f2 * g1 - 1,
        },
        HExponentCandidate {
            name: "|f1|+|f2|+|f2||g1|-1",
            exponent: |f1, g1, f2, _| f1 + f2 + f2 * g1 - 1,
        },
        HExponentCandidate {
            name: "|f2|+|f2||g1|-1",
            exponent: |_, g1, f2, _| f2 + f2 * g1 - 1,
        },
        HExponentCandidate {
            name: "|f2|+|g2|-1",
            exponent: |_, _, f2, g2| f2 + g2 - 1,
        },
    ]
}

/// Square residual for an arbitrary candidate on dense inputs (used for
/// random-cochain confirmation on top of the exhaustive basis sweep).
pub fn h_square_residual_for_candidate(
    candidate: &HExponentCandidate,
    f1: &Cochain,
    g1: &Cochain,
    f2: &Cochain,
    g2: &Cochain,
) -> Result<Cochain, GerstError> {
    let (algebra, t) = four_sparse(f1, g1, f2, g2)?;
    let sp = h_square_residual_sparse(&algebra, [&t[0], &t[1], &t[2], &t[3]], candidate.exponent);
    let total = f1.arity() + g1.arity() + f2.arity() + g2.arity();
    Ok(dense_at_arity(&algebra, sp, total))
}

#[derive(Debug, Clone)]
pub struct CandidateOutcome {
    pub name: String,
    pub passed: bool,
    pub first_failure: Option<String>,
    pub tuples_checked: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub algebra: String,
    pub max_arity: usize,
    pub candidates: Vec<CandidateOutcome>,
    /// `Some(name)` iff exactly one candidate survived the sweep.
    pub winner: Option<String>,
}

/// Runs the interchange-square residual for every candidate exponent over
/// every 4-tuple of basis cochains with arities up to `max_arity`, early-
/// exiting a candidate at its first failure. The sweep is decisive: the
/// residual is multilinear in each slot, so vanishing on all basis tuples is
/// vanishing identically on the window.
pub fn h_exponent_sweep(algebra: &Arc<AlgebraSpec>, max_arity: usize) -> SweepOutcome {
    let dim = algebra.dim();
    let mut basis: Vec<SparseCochain> = Vec::new();
    for arity in 0..=max_arity {
        for_each_multi(dim, arity, |multi| {
            for out in 0..dim {
                basis.push(SparseCochain::singleton(arity, dim, multi, out));
            }
        });
    }
    let mut outcomes = Vec::new();
    for cand in h_exponent_candidates() {
        let mut tuples_checked = 0usize;
        let mut first_failure = None;
        'sweep: for a in &basis {
            for b in &basis {
                for c in &basis {
                    for d in &basis {
                        tuples_checked += 1;
                        let res =
                            h_square_residual_sparse(algebra, [a, b, c, d], cand.exponent);
                        if !res.is_zero() {
                            first_failure = Some(format!(
                                "arities ({}, {}, {}, {}): residual at {}",
                                a.arity,
                                b.arity,
                                c.arity,
                                d.arity,
                                describe_first_term(algebra, &res)
                            ));
                            break 'sweep;
                        }
                    }
                }
            }
        }
        outcomes.push(CandidateOutcome {
            name: cand.name.to_string(),
            passed: first_failure.is_none(),
            first_failure,
            tuples_checked,
        });
    }
    let survivors: Vec<&CandidateOutcome> = outcomes.iter().filter(|o| o.passed).collect();
    let winner = if survivors.len() == 1 {
        Some(survivors[0].name.clone())
    } else {
        None
    };
    SweepOutcome {
        algebra: algebra.name().to_string(),
        max_arity,
        candidates: outcomes,
        winner,
    }
}
