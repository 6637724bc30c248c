//! Polydifferential operators on the polynomial algebra `𝕜[x₁, …, x_m]`.
//!
//! An operator of arity `n` is kept in normal form: a sum of terms
//!
//! ```text
//! c(x) · ∂^{α₁}(a₁) ⋯ ∂^{αₙ}(aₙ)
//! ```
//!
//! with all derivatives moved to the right of all coefficient
//! multiplications and terms merged by their derivative words, so equal
//! operators have equal representations. `cup_op` concatenates slots;
//! `circle_op` composes symbolically, re-expanding the inner operator with
//! the generalized Leibniz rule
//!
//! ```text
//! ∂^α(c·∏_j ∂^{β_j}(b_j)) = Σ_{γ₀+…+γ_q = α} (α; γ₀…γ_q) ∂^{γ₀}(c)·∏_j ∂^{β_j+γ_j}(b_j),
//! ```
//!
//! which is what keeps polydifferential operators closed under the circle
//! product. Signs mirror the cochain-level conventions exactly: the circle
//! insertion at slot `i` carries `(-1)^{(q-1)(i-1)}` and the unsigned
//! bracket is `f{g} − (-1)^{(p-1)(q-1)} g{f}`.
//!
//! Only the free polynomial algebra is treated; truncated quotients are
//! excluded because `∂` does not descend to them (`∂xⁿ = nx^{n-1} ≠ 0`).
//! Comparisons against the pointwise cochain formulas therefore run on
//! monomial tuples up to a degree window ([`TruncatedPolyContext`]).
//!
//! Operator literals use a small grammar: `*` joins factors, `.` separates
//! argument slots, `xi` is a coordinate, `di` is `∂/∂x_i`, and `^` takes
//! powers — `x1^2*d1` is `x²∂` and `d1.d2` is `(a,b) ↦ ∂₁a·∂₂b`.

use std::collections::BTreeMap;
use std::fmt;

use num_integer::binomial;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::exactlin::{q, scalar_string, sign_pow, Scalar};

/// Derivative orders per variable, always of length `num_vars`.
pub type MultiIndex = Vec<u32>;

/// Expanded terms (coefficient monomial × derivative word) an operator may
/// hold before construction fails; keeps multi-variable compositions from
/// exploding silently.
pub const TERM_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum DpolyError {
    #[error("operators live over different polynomial algebras: {expected} vs {got} variables")]
    NumVars { expected: usize, got: usize },
    #[error("arity mismatch: operator expects {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("{what} needs positive arity (nothing to insert into)")]
    ArityZero { what: &'static str },
    #[error("term budget exceeded: result needs {needed} expanded terms, cap is {cap}")]
    TermBudget { needed: usize, cap: usize },
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("{what}: expected {expected}, got {got}")]
    Shape {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("{what}: degree {degree} exceeds the evaluation window {max_degree}")]
    Window {
        what: String,
        degree: usize,
        max_degree: usize,
    },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("{what} disagrees at {point}")]
    Disagreement { what: String, point: String },
}

/// A polynomial in `𝕜[x₁, …, x_m]` with rational coefficients, stored as
/// `exponents → coefficient` with no zero entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    num_vars: usize,
    terms: BTreeMap<MultiIndex, Scalar>,
}

impl Poly {
    pub fn zero(num_vars: usize) -> Self {
        Poly {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, c: Scalar) -> Self {
        let mut p = Poly::zero(num_vars);
        if !c.is_zero() {
            p.terms.insert(vec![0; num_vars], c);
        }
        p
    }

    pub fn one(num_vars: usize) -> Self {
        Poly::constant(num_vars, Scalar::one())
    }

    /// The coordinate `x_{v+1}`.
    pub fn variable(num_vars: usize, v: usize) -> Result<Self, DpolyError> {
        if v >= num_vars {
            return Err(DpolyError::BadParameter(format!(
                "variable index {v} out of range for {num_vars} variables"
            )));
        }
        let mut exps = vec![0; num_vars];
        exps[v] = 1;
        Poly::monomial(num_vars, &exps, Scalar::one())
    }

    pub fn monomial(num_vars: usize, exps: &[u32], coeff: Scalar) -> Result<Self, DpolyError> {
        if exps.len() != num_vars {
            return Err(DpolyError::Shape {
                what: "monomial exponent vector".to_string(),
                expected: num_vars,
                got: exps.len(),
            });
        }
        let mut p = Poly::zero(num_vars);
        if !coeff.is_zero() {
            p.terms.insert(exps.to_vec(), coeff);
        }
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<usize> {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&k| k as usize).sum())
            .max()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.num_vars, other.num_vars, "polynomial variable count");
        let mut terms = self.terms.clone();
        for (e, c) in &other.terms {
            let entry = terms.entry(e.clone()).or_insert_with(Scalar::zero);
            *entry += c;
            if entry.is_zero() {
                terms.remove(e);
            }
        }
        Poly {
            num_vars: self.num_vars,
            terms,
        }
    }

    pub fn scale(&self, s: &Scalar) -> Poly {
        if s.is_zero() {
            return Poly::zero(self.num_vars);
        }
        Poly {
            num_vars: self.num_vars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.num_vars, other.num_vars, "polynomial variable count");
        let mut terms: BTreeMap<MultiIndex, Scalar> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: MultiIndex = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                let entry = terms.entry(e.clone()).or_insert_with(Scalar::zero);
                *entry += c1 * c2;
                if entry.is_zero() {
                    terms.remove(&e);
                }
            }
        }
        Poly {
            num_vars: self.num_vars,
            terms,
        }
    }

    /// Formal partial derivative `∂/∂x_{v+1}`.
    pub fn partial(&self, v: usize) -> Poly {
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[v] > 0 {
                let mut e2 = e.clone();
                e2[v] -= 1;
                terms.insert(e2, c * q(e[v] as i64));
            }
        }
        Poly {
            num_vars: self.num_vars,
            terms,
        }
    }

    /// Iterated derivative `∂^α`.
    pub fn derive(&self, alpha: &[u32]) -> Poly {
        let mut out = self.clone();
        for (v, &k) in alpha.iter().enumerate() {
            for _ in 0..k {
                if out.is_zero() {
                    return out;
                }
                out = out.partial(v);
            }
        }
        out
    }

    /// Parses a polynomial: an operator literal with no derivative factors.
    pub fn parse(text: &str, num_vars: usize) -> Result<Self, DpolyError> {
        let op = PolyDiffOp::parse(text, num_vars)?;
        if op.arity != 1 {
            return Err(DpolyError::Parse {
                position: 0,
                message: "polynomial literals must not contain `.`".to_string(),
            });
        }
        let mut out = Poly::zero(num_vars);
        for (orders, coeff) in &op.terms {
            if orders[0].iter().any(|&k| k > 0) {
                return Err(DpolyError::Parse {
                    position: 0,
                    message: "polynomial literals must not contain derivative factors".to_string(),
                });
            }
            out = out.add(coeff);
        }
        Ok(out)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (exps, c) in &self.terms {
            write_signed_sep(f, &mut first, c)?;
            write!(f, "{}", monomial_factors(&c.abs(), exps, &[]).join("*"))?;
        }
        Ok(())
    }
}

fn write_signed_sep(f: &mut fmt::Formatter<'_>, first: &mut bool, c: &Scalar) -> fmt::Result {
    if *first {
        *first = false;
        if c.is_negative() {
            write!(f, "-")?;
        }
    } else if c.is_negative() {
        write!(f, " - ")?;
    } else {
        write!(f, " + ")?;
    }
    Ok(())
}

/// Factor strings for `|coeff| · x^exps · d^orders`, the grammar's term
/// shape; the scalar is omitted when it is 1 and other factors exist.
fn monomial_factors(mag: &Scalar, exps: &[u32], orders: &[u32]) -> Vec<String> {
    let mut factors = Vec::new();
    let bare = exps.iter().all(|&e| e == 0) && orders.iter().all(|&k| k == 0);
    if !mag.is_one() || bare {
        factors.push(scalar_string(mag));
    }
    for (v, &e) in exps.iter().enumerate() {
        if e == 1 {
            factors.push(format!("x{}", v + 1));
        } else if e > 1 {
            factors.push(format!("x{}^{}", v + 1, e));
        }
    }
    for (v, &k) in orders.iter().enumerate() {
        if k == 1 {
            factors.push(format!("d{}", v + 1));
        } else if k > 1 {
            factors.push(format!("d{}^{}", v + 1, k));
        }
    }
    factors
}

/// A polydifferential operator in normal form: `derivative word →
/// polynomial coefficient`, the word holding one multi-index per argument
/// slot. Equality of representations is equality of operators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyDiffOp {
    num_vars: usize,
    arity: usize,
    terms: BTreeMap<Vec<MultiIndex>, Poly>,
}

impl PolyDiffOp {
    pub fn zero(num_vars: usize, arity: usize) -> Self {
        PolyDiffOp {
            num_vars,
            arity,
            terms: BTreeMap::new(),
        }
    }

    /// The arity-0 operator with value 1 (the unit cochain).
    pub fn unit(num_vars: usize) -> Self {
        PolyDiffOp::from_terms(num_vars, 0, vec![(Vec::new(), Poly::one(num_vars))])
            .expect("unit operator is within budget")
    }

    /// The arity-1 identity operator.
    pub fn identity(num_vars: usize) -> Self {
        PolyDiffOp::from_terms(
            num_vars,
            1,
            vec![(vec![vec![0; num_vars]], Poly::one(num_vars))],
        )
        .expect("identity operator is within budget")
    }

    /// `∂/∂x_{v+1}` as an arity-1 operator.
    pub fn partial_op(num_vars: usize, v: usize) -> Result<Self, DpolyError> {
        if v >= num_vars {
            return Err(DpolyError::BadParameter(format!(
                "variable index {v} out of range for {num_vars} variables"
            )));
        }
        let mut order = vec![0; num_vars];
        order[v] = 1;
        PolyDiffOp::from_terms(num_vars, 1, vec![(vec![order], Poly::one(num_vars))])
    }

    /// Multiplication by a polynomial as an arity-1 operator.
    pub fn mult_by(p: &Poly) -> Self {
        PolyDiffOp::from_terms(
            p.num_vars,
            1,
            vec![(vec![vec![0; p.num_vars]], p.clone())],
        )
        .expect("multiplication operator is within budget")
    }

    /// The multiplication `μ(a, b) = a·b` as an arity-2 operator.
    pub fn mu(num_vars: usize) -> Self {
        PolyDiffOp::from_terms(
            num_vars,
            2,
            vec![(vec![vec![0; num_vars]; 2], Poly::one(num_vars))],
        )
        .expect("μ is within budget")
    }

    pub fn from_terms(
        num_vars: usize,
        arity: usize,
        terms: Vec<(Vec<MultiIndex>, Poly)>,
    ) -> Result<Self, DpolyError> {
        let mut map: BTreeMap<Vec<MultiIndex>, Poly> = BTreeMap::new();
        for (orders, coeff) in terms {
            if orders.len() != arity {
                return Err(DpolyError::Shape {
                    what: "derivative word length".to_string(),
                    expected: arity,
                    got: orders.len(),
                });
            }
            for alpha in &orders {
                if alpha.len() != num_vars {
                    return Err(DpolyError::Shape {
                        what: "derivative multi-index length".to_string(),
                        expected: num_vars,
                        got: alpha.len(),
                    });
                }
            }
            if coeff.num_vars != num_vars {
                return Err(DpolyError::NumVars {
                    expected: num_vars,
                    got: coeff.num_vars,
                });
            }
            accumulate_term(&mut map, orders, coeff)?;
        }
        PolyDiffOp::from_map(num_vars, arity, map)
    }

    fn from_map(
        num_vars: usize,
        arity: usize,
        mut terms: BTreeMap<Vec<MultiIndex>, Poly>,
    ) -> Result<Self, DpolyError> {
        terms.retain(|_, c| !c.is_zero());
        let needed: usize = terms.values().map(Poly::term_count).sum();
        if needed > TERM_CAP {
            return Err(DpolyError::TermBudget {
                needed,
                cap: TERM_CAP,
            });
        }
        Ok(PolyDiffOp {
            num_vars,
            arity,
            terms,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Expanded term count (coefficient monomials × derivative words).
    pub fn term_count(&self) -> usize {
        self.terms.values().map(Poly::term_count).sum()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<MultiIndex>, &Poly)> {
        self.terms.iter()
    }

    /// Evaluates the operator on polynomial arguments.
    pub fn apply(&self, args: &[Poly]) -> Result<Poly, DpolyError> {
        if args.len() != self.arity {
            return Err(DpolyError::Arity {
                expected: self.arity,
                got: args.len(),
            });
        }
        for a in args {
            if a.num_vars != self.num_vars {
                return Err(DpolyError::NumVars {
                    expected: self.num_vars,
                    got: a.num_vars,
                });
            }
        }
        let mut out = Poly::zero(self.num_vars);
        for (orders, coeff) in &self.terms {
            let mut prod = coeff.clone();
            for (j, alpha) in orders.iter().enumerate() {
                if prod.is_zero() {
                    break;
                }
                prod = prod.mul(&args[j].derive(alpha));
            }
            out = out.add(&prod);
        }
        Ok(out)
    }

    pub fn add(&self, other: &PolyDiffOp) -> Result<PolyDiffOp, DpolyError> {
        if other.num_vars != self.num_vars {
            return Err(DpolyError::NumVars {
                expected: self.num_vars,
                got: other.num_vars,
            });
        }
        if other.arity != self.arity {
            return Err(DpolyError::Arity {
                expected: self.arity,
                got: other.arity,
            });
        }
        let mut terms = self.terms.clone();
        for (orders, coeff) in &other.terms {
            accumulate_term(&mut terms, orders.clone(), coeff.clone())?;
        }
        PolyDiffOp::from_map(self.num_vars, self.arity, terms)
    }

    pub fn scale(&self, s: &Scalar) -> PolyDiffOp {
        if s.is_zero() {
            return PolyDiffOp::zero(self.num_vars, self.arity);
        }
        PolyDiffOp {
            num_vars: self.num_vars,
            arity: self.arity,
            terms: self
                .terms
                .iter()
                .map(|(o, c)| (o.clone(), c.scale(s)))
                .collect(),
        }
    }

    /// Parses an operator literal; all terms must have the same arity.
    pub fn parse(text: &str, num_vars: usize) -> Result<Self, DpolyError> {
        parse_operator(text, num_vars)
    }
}

fn accumulate_term(
    map: &mut BTreeMap<Vec<MultiIndex>, Poly>,
    orders: Vec<MultiIndex>,
    coeff: Poly,
) -> Result<(), DpolyError> {
    if coeff.is_zero() {
        return Ok(());
    }
    match map.get_mut(&orders) {
        Some(existing) => {
            *existing = existing.add(&coeff);
            if existing.is_zero() {
                map.remove(&orders);
            }
        }
        None => {
            map.insert(orders, coeff);
        }
    }
    // Guard intermediate growth; the exact expanded count is re-checked at
    // construction time.
    if map.len() > TERM_CAP {
        return Err(DpolyError::TermBudget {
            needed: map.len(),
            cap: TERM_CAP,
        });
    }
    Ok(())
}

impl fmt::Display for PolyDiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (orders, coeff) in &self.terms {
            for (exps, c) in &coeff.terms {
                write_signed_sep(f, &mut first, c)?;
                let slot0 = monomial_factors(
                    &c.abs(),
                    exps,
                    orders.first().map(Vec::as_slice).unwrap_or(&[]),
                );
                let mut slots = vec![slot0.join("*")];
                for alpha in orders.iter().skip(1) {
                    let fs = monomial_factors(&Scalar::one(), &[], alpha);
                    slots.push(if fs.is_empty() {
                        "1".to_string()
                    } else {
                        fs.join("*")
                    });
                }
                write!(f, "{}", slots.join("."))?;
            }
        }
        Ok(())
    }
}

fn same_num_vars(f: &PolyDiffOp, g: &PolyDiffOp) -> Result<(), DpolyError> {
    if f.num_vars != g.num_vars {
        return Err(DpolyError::NumVars {
            expected: f.num_vars,
            got: g.num_vars,
        });
    }
    Ok(())
}

/// Cup product: slot concatenation, `(f⌣g)(a⃗, b⃗) = f(a⃗)·g(b⃗)`, sign-free.
pub fn cup_op(f: &PolyDiffOp, g: &PolyDiffOp) -> Result<PolyDiffOp, DpolyError> {
    same_num_vars(f, g)?;
    let mut terms = BTreeMap::new();
    for (fo, fc) in &f.terms {
        for (go, gc) in &g.terms {
            let mut orders = Vec::with_capacity(f.arity + g.arity);
            orders.extend_from_slice(fo);
            orders.extend_from_slice(go);
            accumulate_term(&mut terms, orders, fc.mul(gc))?;
        }
    }
    PolyDiffOp::from_map(f.num_vars, f.arity + g.arity, terms)
}

/// All splittings of `alpha` into `parts` multi-indices, each with its
/// multinomial coefficient.
fn leibniz_splits(alpha: &[u32], parts: usize) -> Vec<(Vec<MultiIndex>, u64)> {
    let m = alpha.len();
    let mut acc: Vec<(Vec<MultiIndex>, u64)> = vec![(vec![vec![0; m]; parts], 1)];
    for v in 0..m {
        if alpha[v] == 0 {
            continue;
        }
        let comps = weak_compositions(alpha[v], parts);
        let mut next = Vec::with_capacity(acc.len() * comps.len());
        for (split, coeff) in &acc {
            for comp in &comps {
                let mut s2 = split.clone();
                for (j, &k) in comp.iter().enumerate() {
                    s2[j][v] = k;
                }
                next.push((s2, coeff * multinomial(comp)));
            }
        }
        acc = next;
    }
    acc
}

/// All vectors of `parts` non-negative integers summing to `total`.
fn weak_compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for head in 0..=total {
        for tail in weak_compositions(total - head, parts - 1) {
            let mut v = Vec::with_capacity(parts);
            v.push(head);
            v.extend(tail);
            out.push(v);
        }
    }
    out
}

/// `(Σkᵢ)! / ∏ kᵢ!` as a product of binomials.
fn multinomial(parts: &[u32]) -> u64 {
    let mut acc = 0u64;
    let mut result = 1u64;
    for &k in parts {
        acc += k as u64;
        result *= binomial(acc, k as u64);
    }
    result
}

/// Circle product `f{g} = Σ_{i=1}^{p} (-1)^{(q-1)(i-1)} f∘_i g`, composed
/// symbolically via the generalized Leibniz rule. Errors when `f` has
/// arity 0.
pub fn circle_op(f: &PolyDiffOp, g: &PolyDiffOp) -> Result<PolyDiffOp, DpolyError> {
    same_num_vars(f, g)?;
    if f.arity == 0 {
        return Err(DpolyError::ArityZero {
            what: "circle product (left operand)",
        });
    }
    let (p, q_ar) = (f.arity, g.arity);
    let mut terms = BTreeMap::new();
    for i in 1..=p {
        let sign = sign_pow((q_ar as i64 - 1) * (i as i64 - 1));
        for (fo, fc) in &f.terms {
            for (go, gc) in &g.terms {
                for (split, mult) in leibniz_splits(&fo[i - 1], q_ar + 1) {
                    let dcoeff = gc.derive(&split[0]);
                    if dcoeff.is_zero() {
                        continue;
                    }
                    let coeff = fc.mul(&dcoeff).scale(&(&sign * q(mult as i64)));
                    let mut orders = Vec::with_capacity(p + q_ar - 1);
                    orders.extend_from_slice(&fo[..i - 1]);
                    for (j, beta) in go.iter().enumerate() {
                        orders.push(beta.iter().zip(&split[j + 1]).map(|(a, b)| a + b).collect());
                    }
                    orders.extend_from_slice(&fo[i..]);
                    accumulate_term(&mut terms, orders, coeff)?;
                }
            }
        }
    }
    PolyDiffOp::from_map(f.num_vars, p + q_ar - 1, terms)
}

/// Unsigned Gerstenhaber bracket `[f,g] = f{g} − (-1)^{(p-1)(q-1)} g{f}`,
/// degenerate circle terms taken as zero.
pub fn bracket_op(f: &PolyDiffOp, g: &PolyDiffOp) -> Result<PolyDiffOp, DpolyError> {
    same_num_vars(f, g)?;
    let (p, q_ar) = (f.arity, g.arity);
    let out_arity = (p + q_ar).saturating_sub(1);
    let fg = if p >= 1 {
        circle_op(f, g)?
    } else {
        PolyDiffOp::zero(f.num_vars, out_arity)
    };
    let gf = if q_ar >= 1 {
        circle_op(g, f)?
    } else {
        PolyDiffOp::zero(f.num_vars, out_arity)
    };
    let sign = sign_pow((p as i64 - 1) * (q_ar as i64 - 1));
    fg.add(&gf.scale(&-sign))
}

/// Signed bracket `(-1)^{p+1} [f,g]`, matching the cochain-level convention.
pub fn bracket_op_signed(f: &PolyDiffOp, g: &PolyDiffOp) -> Result<PolyDiffOp, DpolyError> {
    Ok(bracket_op(f, g)?.scale(&sign_pow(f.arity as i64 + 1)))
}

/// Evaluation window for cross-checking symbolic results against the
/// pointwise cochain formulas: all monomial tuples of total degree up to
/// `max_poly_degree` in `num_vars` variables.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedPolyContext {
    pub num_vars: usize,
    pub max_poly_degree: usize,
}

impl TruncatedPolyContext {
    pub fn new(num_vars: usize, max_poly_degree: usize) -> Result<Self, DpolyError> {
        if num_vars == 0 {
            return Err(DpolyError::BadParameter(
                "the context needs at least one variable".to_string(),
            ));
        }
        if max_poly_degree == 0 {
            return Err(DpolyError::BadParameter(
                "the evaluation window needs max_poly_degree ≥ 1".to_string(),
            ));
        }
        Ok(TruncatedPolyContext {
            num_vars,
            max_poly_degree,
        })
    }

    /// All monomials of total degree `0..=max_poly_degree`.
    pub fn monomials(&self) -> Vec<Poly> {
        let mut out = Vec::new();
        for total in 0..=self.max_poly_degree {
            for exps in weak_compositions(total as u32, self.num_vars) {
                out.push(
                    Poly::monomial(self.num_vars, &exps, Scalar::one())
                        .expect("exponent vector has the right length"),
                );
            }
        }
        out
    }

    /// Rejects arguments outside the window.
    pub fn check_poly(&self, what: &str, p: &Poly) -> Result<(), DpolyError> {
        if p.num_vars != self.num_vars {
            return Err(DpolyError::NumVars {
                expected: self.num_vars,
                got: p.num_vars,
            });
        }
        let degree = p.total_degree().unwrap_or(0);
        if degree > self.max_poly_degree {
            return Err(DpolyError::Window {
                what: what.to_string(),
                degree,
                max_degree: self.max_poly_degree,
            });
        }
        Ok(())
    }
}

/// Runs `body` on every length-`n` tuple of window monomials.
fn for_each_monomial_tuple(
    ctx: &TruncatedPolyContext,
    n: usize,
    mut body: impl FnMut(&[Poly]) -> Result<(), DpolyError>,
) -> Result<usize, DpolyError> {
    let monomials = ctx.monomials();
    let mut idx = vec![0usize; n];
    let mut count = 0usize;
    loop {
        let tuple: Vec<Poly> = idx.iter().map(|&i| monomials[i].clone()).collect();
        body(&tuple)?;
        count += 1;
        let mut j = n;
        loop {
            if j == 0 {
                return Ok(count);
            }
            j -= 1;
            if idx[j] + 1 < monomials.len() {
                idx[j] += 1;
                idx[j + 1..].iter_mut().for_each(|v| *v = 0);
                break;
            }
            idx[j] = 0;
        }
    }
}

fn describe_tuple(tuple: &[Poly]) -> String {
    let parts: Vec<String> = tuple.iter().map(Poly::to_string).collect();
    format!("({})", parts.join(", "))
}

/// Checks `apply(cup_op(f,g), a⃗b⃗) = apply(f,a⃗)·apply(g,b⃗)` on every window
/// monomial tuple; returns the number of tuples checked.
pub fn cup_evaluation_check(
    ctx: &TruncatedPolyContext,
    f: &PolyDiffOp,
    g: &PolyDiffOp,
) -> Result<usize, DpolyError> {
    let symbolic = cup_op(f, g)?;
    for_each_monomial_tuple(ctx, f.arity + g.arity, |tuple| {
        let direct = f.apply(&tuple[..f.arity])?.mul(&g.apply(&tuple[f.arity..])?);
        if symbolic.apply(tuple)? != direct {
            return Err(DpolyError::Disagreement {
                what: "cup_op vs pointwise product".to_string(),
                point: describe_tuple(tuple),
            });
        }
        Ok(())
    })
}

/// Pointwise circle product `Σᵢ (-1)^{(q-1)(i-1)} f(…, g(slice), …)`.
fn circle_pointwise(f: &PolyDiffOp, g: &PolyDiffOp, args: &[Poly]) -> Result<Poly, DpolyError> {
    let (p, q_ar) = (f.arity, g.arity);
    let mut out = Poly::zero(f.num_vars);
    for i in 1..=p {
        let inner = g.apply(&args[i - 1..i - 1 + q_ar])?;
        let mut outer: Vec<Poly> = args[..i - 1].to_vec();
        outer.push(inner);
        outer.extend_from_slice(&args[i - 1 + q_ar..]);
        let sign = sign_pow((q_ar as i64 - 1) * (i as i64 - 1));
        out = out.add(&f.apply(&outer)?.scale(&sign));
    }
    Ok(out)
}

/// Checks the symbolic circle product against the pointwise insertion
/// formula on every window monomial tuple.
pub fn circle_evaluation_check(
    ctx: &TruncatedPolyContext,
    f: &PolyDiffOp,
    g: &PolyDiffOp,
) -> Result<usize, DpolyError> {
    let symbolic = circle_op(f, g)?;
    for_each_monomial_tuple(ctx, f.arity + g.arity - 1, |tuple| {
        if symbolic.apply(tuple)? != circle_pointwise(f, g, tuple)? {
            return Err(DpolyError::Disagreement {
                what: "circle_op vs pointwise insertion".to_string(),
                point: describe_tuple(tuple),
            });
        }
        Ok(())
    })
}

/// Checks the symbolic bracket against the pointwise two-circle formula on
/// every window monomial tuple.
pub fn bracket_evaluation_check(
    ctx: &TruncatedPolyContext,
    f: &PolyDiffOp,
    g: &PolyDiffOp,
) -> Result<usize, DpolyError> {
    let symbolic = bracket_op(f, g)?;
    let (p, q_ar) = (f.arity, g.arity);
    let sign = sign_pow((p as i64 - 1) * (q_ar as i64 - 1));
    for_each_monomial_tuple(ctx, (p + q_ar).saturating_sub(1), |tuple| {
        let mut direct = if p >= 1 {
            circle_pointwise(f, g, tuple)?
        } else {
            Poly::zero(f.num_vars)
        };
        if q_ar >= 1 {
            direct = direct.add(&circle_pointwise(g, f, tuple)?.scale(&-&sign));
        }
        if symbolic.apply(tuple)? != direct {
            return Err(DpolyError::Disagreement {
                what: "bracket_op vs pointwise formula".to_string(),
                point: describe_tuple(tuple),
            });
        }
        Ok(())
    })
}

/// For arity-1 operators the unsigned bracket is the operator commutator:
/// checks `apply(bracket_op(f,g), m) = f(g(m)) − g(f(m))` on the window.
pub fn commutator_check(
    ctx: &TruncatedPolyContext,
    f: &PolyDiffOp,
    g: &PolyDiffOp,
) -> Result<usize, DpolyError> {
    if f.arity != 1 || g.arity != 1 {
        return Err(DpolyError::Arity {
            expected: 1,
            got: f.arity.max(g.arity),
        });
    }
    let symbolic = bracket_op(f, g)?;
    for_each_monomial_tuple(ctx, 1, |tuple| {
        let fg = f.apply(&[g.apply(tuple)?])?;
        let gf = g.apply(&[f.apply(tuple)?])?;
        if symbolic.apply(tuple)? != fg.add(&gf.scale(&-Scalar::one())) {
            return Err(DpolyError::Disagreement {
                what: "arity-1 bracket vs operator commutator".to_string(),
                point: describe_tuple(tuple),
            });
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Operator grammar.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok {
    Num(u64),
    Var(usize),
    Der(usize),
    Caret,
    Star,
    Dot,
    Plus,
    Minus,
    Slash,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, DpolyError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
            }
            b'^' | b'*' | b'.' | b'+' | b'-' | b'/' => {
                toks.push((
                    start,
                    match b {
                        b'^' => Tok::Caret,
                        b'*' => Tok::Star,
                        b'.' => Tok::Dot,
                        b'+' => Tok::Plus,
                        b'-' => Tok::Minus,
                        _ => Tok::Slash,
                    },
                ));
                i += 1;
            }
            b'0'..=b'9' => {
                let mut n: u64 = 0;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    n = n
                        .checked_mul(10)
                        .and_then(|n| n.checked_add((bytes[i] - b'0') as u64))
                        .filter(|&n| n <= i64::MAX as u64)
                        .ok_or(DpolyError::Parse {
                            position: start,
                            message: "integer literal too large".to_string(),
                        })?;
                    i += 1;
                }
                toks.push((start, Tok::Num(n)));
            }
            b'x' | b'd' => {
                i += 1;
                let digits_start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if digits_start == i {
                    return Err(DpolyError::Parse {
                        position: start,
                        message: format!(
                            "`{}` must be followed by a variable index, as in `{}1`",
                            b as char, b as char
                        ),
                    });
                }
                let idx: usize =
                    text[digits_start..i].parse().map_err(|_| DpolyError::Parse {
                        position: start,
                        message: "variable index too large".to_string(),
                    })?;
                if idx == 0 {
                    return Err(DpolyError::Parse {
                        position: start,
                        message: "variable indices start at 1".to_string(),
                    });
                }
                toks.push((
                    start,
                    if b == b'x' {
                        Tok::Var(idx - 1)
                    } else {
                        Tok::Der(idx - 1)
                    },
                ));
            }
            _ => {
                return Err(DpolyError::Parse {
                    position: start,
                    message: format!("unexpected character {:?}", b as char),
                });
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    num_vars: usize,
    text_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<Tok> {
        self.toks.get(self.pos).map(|&(_, t)| t)
    }

    fn position(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|&(p, _)| p)
            .unwrap_or(self.text_len)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, message: impl Into<String>) -> DpolyError {
        DpolyError::Parse {
            position: self.position(),
            message: message.into(),
        }
    }

    fn check_var(&self, v: usize) -> Result<(), DpolyError> {
        if v >= self.num_vars {
            return Err(self.err(format!(
                "index {} exceeds the declared {} variable(s)",
                v + 1,
                self.num_vars
            )));
        }
        Ok(())
    }

    /// `number ('/' number)?` — the '/' binds only inside a literal.
    fn rational(&mut self, n: u64) -> Result<Scalar, DpolyError> {
        if self.peek() == Some(Tok::Slash) {
            self.bump();
            match self.bump() {
                Some(Tok::Num(d)) if d != 0 => Ok(q(n as i64) / q(d as i64)),
                Some(Tok::Num(_)) => Err(self.err("zero denominator")),
                _ => Err(self.err("expected a denominator after `/`")),
            }
        } else {
            Ok(q(n as i64))
        }
    }

    fn exponent(&mut self) -> Result<u32, DpolyError> {
        if self.peek() == Some(Tok::Caret) {
            self.bump();
            match self.bump() {
                Some(Tok::Num(k)) if k <= u32::MAX as u64 => Ok(k as u32),
                _ => Err(self.err("expected a non-negative integer exponent after `^`")),
            }
        } else {
            Ok(1)
        }
    }

    /// One `+`/`-` separated term: `slot ('.' slot)*` with coefficient
    /// factors folded into a single polynomial monomial.
    fn term(&mut self, sign: Scalar) -> Result<(Vec<MultiIndex>, Poly), DpolyError> {
        let mut coeff = sign;
        let mut exps: MultiIndex = vec![0; self.num_vars];
        let mut orders: Vec<MultiIndex> = vec![vec![0; self.num_vars]];
        loop {
            match self.bump() {
                Some(Tok::Num(n)) => {
                    coeff *= self.rational(n)?;
                }
                Some(Tok::Var(v)) => {
                    self.check_var(v)?;
                    exps[v] += self.exponent()?;
                }
                Some(Tok::Der(v)) => {
                    self.check_var(v)?;
                    let slot = orders.last_mut().expect("at least one slot");
                    slot[v] += self.exponent()?;
                }
                other => {
                    return Err(self.err(format!(
                        "expected a factor (number, xi, or di), found {other:?}"
                    )));
                }
            }
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                }
                Some(Tok::Dot) => {
                    self.bump();
                    orders.push(vec![0; self.num_vars]);
                }
                _ => break,
            }
        }
        let poly = Poly::monomial(self.num_vars, &exps, coeff)?;
        Ok((orders, poly))
    }
}

fn parse_operator(text: &str, num_vars: usize) -> Result<PolyDiffOp, DpolyError> {
    if num_vars == 0 {
        return Err(DpolyError::BadParameter(
            "operators need at least one variable".to_string(),
        ));
    }
    let mut parser = Parser {
        toks: tokenize(text)?,
        pos: 0,
        num_vars,
        text_len: text.len(),
    };
    if parser.peek().is_none() {
        return Err(parser.err("empty operator literal"));
    }
    let mut terms: Vec<(Vec<MultiIndex>, Poly)> = Vec::new();
    let mut arity: Option<usize> = None;
    loop {
        let sign = if parser.peek() == Some(Tok::Minus) {
            parser.bump();
            -Scalar::one()
        } else {
            Scalar::one()
        };
        let (orders, coeff) = parser.term(sign)?;
        match arity {
            None => arity = Some(orders.len()),
            Some(a) if a != orders.len() => {
                return Err(parser.err(format!(
                    "term arity {} differs from earlier terms of arity {a}; \
                     a sum must be arity-homogeneous",
                    orders.len()
                )));
            }
            Some(_) => {}
        }
        terms.push((orders, coeff));
        match parser.bump() {
            None => break,
            Some(Tok::Plus) => continue,
            Some(Tok::Minus) => {
                // Re-wind so the sign handler above sees it.
                parser.pos -= 1;
                continue;
            }
            Some(t) => {
                parser.pos -= 1;
                return Err(parser.err(format!("expected `+` or `-` between terms, found {t:?}")));
            }
        }
    }
    PolyDiffOp::from_terms(num_vars, arity.expect("at least one term"), terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(m: usize) -> Poly {
        Poly::variable(m, 0).unwrap()
    }

    fn d() -> PolyDiffOp {
        PolyDiffOp::partial_op(1, 0).unwrap()
    }

    fn x_mult() -> PolyDiffOp {
        PolyDiffOp::mult_by(&x(1))
    }

    fn euler() -> PolyDiffOp {
        PolyDiffOp::parse("x1*d1", 1).unwrap()
    }

    fn pow(p: &Poly, k: u32) -> Poly {
        let mut out = Poly::one(p.num_vars());
        for _ in 0..k {
            out = out.mul(p);
        }
        out
    }

    #[test]
    fn apply_matches_calculus() {
        let x3 = pow(&x(1), 3);
        assert_eq!(
            d().apply(&[x3.clone()]).unwrap(),
            pow(&x(1), 2).scale(&q(3))
        );
        assert_eq!(x_mult().apply(&[x3.clone()]).unwrap(), pow(&x(1), 4));
        let mu = PolyDiffOp::mu(1);
        assert_eq!(
            mu.apply(&[x3.clone(), x(1)]).unwrap(),
            pow(&x(1), 4)
        );
        // ∂₂ on x₁²x₂² in two variables.
        let p = Poly::monomial(2, &[2, 2], Scalar::one()).unwrap();
        let d2 = PolyDiffOp::partial_op(2, 1).unwrap();
        assert_eq!(
            d2.apply(&[p]).unwrap(),
            Poly::monomial(2, &[2, 1], q(2)).unwrap()
        );
    }

    #[test]
    fn apply_rejects_bad_arguments() {
        assert!(matches!(
            d().apply(&[x(1), x(1)]),
            Err(DpolyError::Arity { expected: 1, got: 2 })
        ));
        assert!(matches!(
            d().apply(&[x(2)]),
            Err(DpolyError::NumVars { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn cup_with_the_unit_is_the_identity() {
        let unit = PolyDiffOp::unit(1);
        for op in [d(), euler(), PolyDiffOp::mu(1)] {
            assert_eq!(cup_op(&unit, &op).unwrap(), op);
            assert_eq!(cup_op(&op, &unit).unwrap(), op);
        }
    }

    #[test]
    fn cup_agrees_with_pointwise_products() {
        let ctx = TruncatedPolyContext::new(1, 3).unwrap();
        for f in [d(), x_mult(), euler()] {
            for g in [d(), x_mult(), PolyDiffOp::mu(1)] {
                cup_evaluation_check(&ctx, &f, &g).unwrap();
            }
        }
        // ∂⌣∂ acts as (a,b) ↦ ∂a·∂b.
        let dd = cup_op(&d(), &d()).unwrap();
        let (a, b) = (pow(&x(1), 2), pow(&x(1), 3));
        assert_eq!(
            dd.apply(&[a, b]).unwrap(),
            pow(&x(1), 3).scale(&q(6))
        );
    }

    #[test]
    fn circle_oracles_from_the_leibniz_rule() {
        // ∂{x·} = id + x∂ because ∂(x·a) = a + x∂a.
        let id_plus_euler = PolyDiffOp::identity(1).add(&euler()).unwrap();
        assert_eq!(circle_op(&d(), &x_mult()).unwrap(), id_plus_euler);
        // (x·){∂} = x∂ by direct composition.
        assert_eq!(circle_op(&x_mult(), &d()).unwrap(), euler());
        // Their difference: [∂, x·] = id.
        assert_eq!(
            bracket_op(&d(), &x_mult()).unwrap(),
            PolyDiffOp::identity(1)
        );
        assert!(bracket_op(&d(), &d()).unwrap().is_zero());
    }

    #[test]
    fn circle_agrees_with_pointwise_insertion() {
        let ctx = TruncatedPolyContext::new(1, 4).unwrap();
        let mu = PolyDiffOp::mu(1);
        for f in [d(), x_mult(), euler(), mu.clone()] {
            for g in [d(), x_mult(), euler(), mu.clone()] {
                circle_evaluation_check(&ctx, &f, &g).unwrap();
                bracket_evaluation_check(&ctx, &f, &g).unwrap();
            }
        }
    }

    #[test]
    fn circle_handles_multiple_variables() {
        // Exercises genuine multinomial splits: second-order derivative
        // distributed over a two-slot inner operator in two variables.
        let ctx = TruncatedPolyContext::new(2, 3).unwrap();
        let f = PolyDiffOp::parse("d1^2.d2", 2).unwrap();
        let g = PolyDiffOp::parse("x1*d2 + x2^2*d1", 2).unwrap();
        circle_evaluation_check(&ctx, &f, &g).unwrap();
        let h = PolyDiffOp::parse("x1*x2.1", 2).unwrap();
        circle_evaluation_check(&ctx, &f, &h).unwrap();
        bracket_evaluation_check(&ctx, &g, &h).unwrap();
    }

    #[test]
    fn arity_one_brackets_are_commutators() {
        let ctx = TruncatedPolyContext::new(1, 5).unwrap();
        let gens = [d(), x_mult(), euler()];
        for f in &gens {
            for g in &gens {
                commutator_check(&ctx, f, g).unwrap();
            }
        }
    }

    #[test]
    fn circle_needs_positive_left_arity() {
        let unit = PolyDiffOp::unit(1);
        assert!(matches!(
            circle_op(&unit, &d()),
            Err(DpolyError::ArityZero { .. })
        ));
        // The bracket treats the degenerate side as zero: with c the
        // arity-0 operator of value x, [c, ∂] = −∂{c} = −∂(x)·1 = −1.
        let c = PolyDiffOp::from_terms(1, 0, vec![(Vec::new(), x(1))]).unwrap();
        let b = bracket_op(&c, &d()).unwrap();
        assert_eq!(b.apply(&[]).unwrap(), Poly::constant(1, q(-1)));
    }

    #[test]
    fn parser_round_trips_and_rejects() {
        for text in ["x1^2*d1", "d1.d2", "1.1", "x1*d1 + 1", "3/2*x1 - d1^2"] {
            let op = PolyDiffOp::parse(text, 2).unwrap();
            let printed = op.to_string();
            assert_eq!(PolyDiffOp::parse(&printed, 2).unwrap(), op, "{text} → {printed}");
        }
        assert_eq!(PolyDiffOp::parse("d1", 1).unwrap(), d());
        assert_eq!(PolyDiffOp::parse("1", 1).unwrap(), PolyDiffOp::identity(1));
        assert_eq!(PolyDiffOp::parse("1.1", 1).unwrap(), PolyDiffOp::mu(1));
        assert_eq!(
            PolyDiffOp::parse("x1*d1 - x1*d1", 1).unwrap(),
            PolyDiffOp::zero(1, 1)
        );
        // Mixed arities in one sum are rejected.
        assert!(matches!(
            PolyDiffOp::parse("x1^2*d1 + d1.d2", 2),
            Err(DpolyError::Parse { .. })
        ));
        assert!(matches!(
            PolyDiffOp::parse("x3", 2),
            Err(DpolyError::Parse { .. })
        ));
        assert!(matches!(
            PolyDiffOp::parse("", 1),
            Err(DpolyError::Parse { .. })
        ));
        assert!(matches!(
            PolyDiffOp::parse("x1 @ d1", 1),
            Err(DpolyError::Parse { .. })
        ));
        assert!(matches!(
            PolyDiffOp::parse("1/0", 1),
            Err(DpolyError::Parse { .. })
        ));
    }

    #[test]
    fn display_is_the_grammar() {
        assert_eq!(PolyDiffOp::identity(1).to_string(), "1");
        assert_eq!(PolyDiffOp::mu(1).to_string(), "1.1");
        assert_eq!(d().to_string(), "d1");
        assert_eq!(
            circle_op(&d(), &x_mult()).unwrap().to_string(),
            "1 + x1*d1"
        );
        assert_eq!(PolyDiffOp::zero(1, 1).to_string(), "0");
        assert_eq!(
            Poly::parse("x1^2 - 1/2", 1).unwrap().to_string(),
            "-1/2 + x1^2"
        );
    }

    #[test]
    fn poly_parse_rejects_operators() {
        assert!(Poly::parse("x1^2 + 3", 1).is_ok());
        assert!(matches!(
            Poly::parse("d1", 1),
            Err(DpolyError::Parse { .. })
        ));
        assert!(matches!(
            Poly::parse("x1.x1", 1),
            Err(DpolyError::Parse { .. })
        ));
    }

    #[test]
    fn term_budget_is_enforced() {
        // Σ_k x^k·∂^k has 101 mergeproof terms; cupping it with itself
        // needs 101² > TERM_CAP derivative words.
        let terms: Vec<(Vec<MultiIndex>, Poly)> = (0..=100u32)
            .map(|k| {
                let coeff = Poly::monomial(1, &[k], Scalar::one()).unwrap();
                (vec![vec![k]], coeff)
            })
            .collect();
        let op = PolyDiffOp::from_terms(1, 1, terms).unwrap();
        assert!(matches!(
            cup_op(&op, &op),
            Err(DpolyError::TermBudget { .. })
        ));
    }

    #[test]
    fn context_guards_its_window() {
        assert!(matches!(
            TruncatedPolyContext::new(1, 0),
            Err(DpolyError::BadParameter(_))
        ));
        let ctx = TruncatedPolyContext::new(2, 2).unwrap();
        assert_eq!(ctx.monomials().len(), 6);
        assert!(ctx.check_poly("arg", &x(2)).is_ok());
        assert!(matches!(
            ctx.check_poly("arg", &pow(&x(2), 3)),
            Err(DpolyError::Window { degree: 3, .. })
        ));
    }
}
