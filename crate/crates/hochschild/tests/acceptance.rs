//! Acceptance gate: twelve end-to-end checks, each in its own test, each
//! printing exactly one `PASS criterion N: …` or `FAIL criterion N: …` line
//! (visible with `--nocapture`, or automatically for a failing test).
//!
//! Criterion 5 is expected to stay red: with single-term interchange-square
//! fillers the extracted bracket doubles the signed circle bracket on
//! odd·odd degree pairs instead of reproducing it, and the test records that
//! deviation rather than papering over it. Everything else must pass.

use std::sync::Arc;
use std::time::{Duration, Instant};

use hochschild::{
    bracket, bracket_evaluation_check, bracket_op, build_bar, circle_evaluation_check, cohomology,
    cohomology_dims, commutator_check, compare_with_hochschild_bracket, convolution, cup,
    cup_evaluation_check, default_samples, diagonal_homotopy_check, endo_complex, extract_bracket,
    h_exponent_sweep, hochschild_presentation, homotopy_commutativity_check, is_coboundary,
    multiply, q, sample_library, sign_pow, square_homotopy_h, square_homotopy_h_op, AlgebraSpec,
    Budget, Cochain, DiagonalKind, Element, Matrix, PolyDiffOp, TruncatedPolyContext,
};

/// Prints the one-line verdict and hands the flag back for the assert.
fn verdict(criterion: usize, ok: bool, detail: &str) -> bool {
    println!(
        "{} criterion {criterion}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn sample(key: &str) -> Arc<AlgebraSpec> {
    sample_library(key).unwrap()
}

/// Every basis multi-index of the given arity, in odometer order.
fn for_each_multi(dim: usize, arity: usize, mut body: impl FnMut(&[usize])) {
    let mut multi = vec![0usize; arity];
    loop {
        body(&multi);
        let mut i = arity;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if multi[i] + 1 < dim {
                multi[i] += 1;
                multi[i + 1..].iter_mut().for_each(|m| *m = 0);
                break;
            }
            multi[i] = 0;
        }
    }
}

fn for_each_basis_cochain(algebra: &Arc<AlgebraSpec>, arity: usize, mut body: impl FnMut(Cochain)) {
    let dim = algebra.dim();
    for_each_multi(dim, arity, |multi| {
        for out in 0..dim {
            body(Cochain::singleton(algebra, multi, out));
        }
    });
}

fn basis_element(algebra: &Arc<AlgebraSpec>, index: usize) -> Element {
    let mut coeffs = vec![q(0); algebra.dim()];
    coeffs[index] = q(1);
    Element::new(algebra, coeffs).unwrap()
}

/// Independent oracle for `HH(k[x]/(x²))`: the Hom complex of the standard
/// 2-periodic free bimodule resolution. Its differentials alternate between
/// `u ↦ xu − ux` and `u ↦ xu + ux`, built here straight from the structure
/// constants with no cochain machinery involved.
fn periodic_oracle_dims(algebra: &Arc<AlgebraSpec>, max_degree: usize) -> Vec<usize> {
    let dim = algebra.dim();
    let x = basis_element(algebra, 1);
    let mut maps: Vec<Matrix> = Vec::new();
    for n in 0..=max_degree {
        let mut m = Matrix::zero(dim, dim);
        for j in 0..dim {
            let e = basis_element(algebra, j);
            let left = multiply(&x, &e).unwrap();
            let right = multiply(&e, &x).unwrap();
            for i in 0..dim {
                let v = if n % 2 == 0 {
                    left.coeffs()[i].clone() - right.coeffs()[i].clone()
                } else {
                    left.coeffs()[i].clone() + right.coeffs()[i].clone()
                };
                m.set(i, j, v);
            }
        }
        maps.push(m);
    }
    // The oracle must itself be a complex.
    for n in 0..max_degree {
        for j in 0..dim {
            let image = maps[n + 1].mul_vec(&maps[n].column(j)).unwrap();
            assert!(
                image.iter().all(|v| v == &q(0)),
                "periodic oracle differentials fail to compose to zero"
            );
        }
    }
    let mut dims = Vec::new();
    for n in 0..=max_degree {
        let kernel = dim - maps[n].rank();
        let image_prev = if n == 0 { 0 } else { maps[n - 1].rank() };
        dims.push(kernel - image_prev);
    }
    dims
}

#[test]
fn criterion_01_quotient_algebra_cohomology_matches_the_periodic_oracle() {
    let start = Instant::now();
    let a = sample("trunc_poly(2)");
    let budget = Budget::default();
    let dims = cohomology_dims(&a, 4, &budget).unwrap();
    let oracle = periodic_oracle_dims(&a, 4);
    let elapsed = start.elapsed();
    let ok = dims == vec![2, 1, 1, 1, 1] && dims == oracle && elapsed < Duration::from_secs(10);
    let detail = format!(
        "HH(k[x]/(x^2)) dims {dims:?} in degrees 0..=4 agree with the 2-periodic \
         resolution oracle {oracle:?} and the expected (2,1,1,1,1) in {}ms (< 10s)",
        elapsed.as_millis()
    );
    assert!(verdict(1, ok, &detail), "criterion 1 failed: {detail}");
}

#[test]
fn criterion_02_matrix_and_group_algebra_windows() {
    let start = Instant::now();
    let budget = Budget::default();
    let dims_matrix = cohomology_dims(&sample("matrix(2)"), 2, &budget).unwrap();
    let dims_group = cohomology_dims(&sample("group_cyclic(2)"), 2, &budget).unwrap();
    let elapsed = start.elapsed();
    let ok = dims_matrix == vec![1, 0, 0]
        && dims_group == vec![2, 0, 0]
        && elapsed < Duration::from_secs(60);
    let detail = format!(
        "HH(M_2) = {dims_matrix:?} and HH(k[Z/2]) = {dims_group:?} for n <= 2 in {}ms (< 60s)",
        elapsed.as_millis()
    );
    assert!(verdict(2, ok, &detail), "criterion 2 failed: {detail}");
}

#[test]
fn criterion_03_degree_zero_cohomology_is_the_center() {
    let budget = Budget::default();
    let mut ok = true;
    let mut summary = Vec::new();
    for a in default_samples() {
        let center = a.center();
        let report = cohomology(&a, 0, &budget).unwrap();
        ok &= report.dims[0] == center.dim();
        summary.push(format!("{} {}", a.name(), report.dims[0]));
        for rep in &report.representatives[0] {
            ok &= rep.signed_differential().is_zero();
            let z = Element::new(&a, rep.values().to_vec()).unwrap();
            for j in 0..a.dim() {
                let e = basis_element(&a, j);
                let left = multiply(&z, &e).unwrap();
                let right = multiply(&e, &z).unwrap();
                ok &= left.coeffs() == right.coeffs();
            }
        }
    }
    let detail = format!(
        "HH^0 equals the center dimension on every sample ({}) and each degree-0 \
         representative commutes with the whole basis",
        summary.join(", ")
    );
    assert!(verdict(3, ok, &detail), "criterion 3 failed: {detail}");
}

#[test]
fn criterion_04_homotopy_commutativity_on_all_basis_cochains() {
    let sweeps = [
        ("field", 3usize),
        ("trunc_poly(2)", 3),
        ("group_cyclic(2)", 3),
        ("product(3)", 3),
        ("matrix(2)", 2),
    ];
    let mut pairs = 0usize;
    let mut failure: Option<String> = None;
    for (key, max_arity) in sweeps {
        let a = sample(key);
        for p in 1..=max_arity {
            for q_arity in 1..=max_arity {
                for_each_basis_cochain(&a, p, |f| {
                    for_each_basis_cochain(&a, q_arity, |g| {
                        if failure.is_some() {
                            return;
                        }
                        pairs += 1;
                        if let Err(e) = homotopy_commutativity_check(&f, &g) {
                            failure =
                                Some(format!("{key} at arities ({p}, {q_arity}): {e}"));
                        }
                    });
                });
            }
        }
    }
    let ok = failure.is_none();
    let detail = match &failure {
        None => format!(
            "cup commutes up to the circle homotopy with zero residual on all {pairs} \
             ordered basis pairs (arities <= 3 on the dim <= 3 samples, <= 2 on matrix(2))"
        ),
        Some(witness) => format!("nonzero homotopy-commutativity residual on {witness}"),
    };
    assert!(verdict(4, ok, &detail), "criterion 4 failed: {detail}");
}

/// Expected to fail: the extracted bracket doubles the signed circle bracket
/// on odd·odd degree pairs. The test states the target identity honestly and
/// documents the deviation it finds.
#[test]
fn criterion_05_extracted_bracket_reproduces_the_signed_circle_bracket() {
    let budget = Budget::default();
    let mut ok = true;
    let mut deviation: Option<String> = None;
    for key in ["trunc_poly(2)", "group_cyclic(2)"] {
        let a = sample(key);
        let presentation = hochschild_presentation(&a, 3, &budget).unwrap();
        let extracted = extract_bracket(&presentation).unwrap();
        let comparison = compare_with_hochschild_bracket(&presentation, &extracted, 2).unwrap();
        if !comparison.matches && deviation.is_none() {
            deviation = Some(format!(
                "on {key} the components at degree pairs {:?} deviate ({}); e.g. for the \
                 Euler derivation f the extraction returns 2f while (-1)^{{p+1}}[f,f] = 0 — \
                 single-term square fillers double the odd·odd bracket",
                comparison.mismatched_pairs,
                comparison
                    .first_mismatch
                    .clone()
                    .unwrap_or_else(|| "no witness".to_string()),
            ));
        }
        ok &= comparison.matches;
        // The outer corner restrictions must contribute nothing: both square
        // fillers vanish on (f, 1, 1, g) because the inner circle degenerates.
        let unit = Cochain::unit_cochain(&a);
        for p in 0..=2usize {
            for q_arity in 0..=2usize {
                for_each_basis_cochain(&a, p, |f| {
                    for_each_basis_cochain(&a, q_arity, |g| {
                        ok &= square_homotopy_h(&f, &unit, &unit, &g).unwrap().is_zero();
                        ok &= square_homotopy_h_op(&f, &unit, &unit, &g)
                            .unwrap()
                            .is_zero();
                    });
                });
            }
        }
    }
    let detail = match &deviation {
        None => "extracted bracket equals (-1)^{p+1}[f,g] on all basis pairs with \
                 p, q <= 2 over trunc_poly(2) and group_cyclic(2), with vanishing \
                 corner restrictions"
            .to_string(),
        Some(witness) => format!(
            "extracted bracket deviates from (-1)^{{p+1}}[f,g]: {witness}"
        ),
    };
    assert!(verdict(5, ok, &detail), "criterion 5 failed: {detail}");
}

#[test]
fn criterion_06_convolution_with_alexander_whitney_is_cup() {
    let a = sample("trunc_poly(2)");
    let budget = Budget::default();
    let bar = build_bar(&a, 4, &budget).unwrap();
    let mut pairs = 0usize;
    let mut ok = true;
    for p in 0..=3usize {
        for q_arity in 0..=3usize {
            if p + q_arity > 3 {
                continue;
            }
            for_each_basis_cochain(&a, p, |f| {
                for_each_basis_cochain(&a, q_arity, |g| {
                    pairs += 1;
                    let aw = convolution(&bar, &f, &g, DiagonalKind::AlexanderWhitney).unwrap();
                    ok &= aw == cup(&f, &g).unwrap();
                    if p + q_arity > 0 {
                        let point = convolution(&bar, &f, &g, DiagonalKind::Point).unwrap();
                        ok &= point.is_zero();
                    }
                });
            });
        }
    }
    let detail = format!(
        "convolution against the Alexander-Whitney diagonal equals cup on all {pairs} \
         basis pairs with p + q <= 3 at truncation 4, and the point diagonal kills \
         every positive-arity pair"
    );
    assert!(verdict(6, ok, &detail), "criterion 6 failed: {detail}");
}

#[test]
fn criterion_07_composition_product_agrees_with_cup_up_to_coboundary() {
    let a = sample("trunc_poly(2)");
    let budget = Budget::default();
    let bar = build_bar(&a, 5, &budget).unwrap();
    let mut pairs = 0usize;
    let mut exact = 0usize;
    let mut witnessed = 0usize;
    let mut ok = true;
    for p in 0..=2usize {
        for q_arity in 0..=2usize {
            for_each_basis_cochain(&a, p, |f| {
                for_each_basis_cochain(&a, q_arity, |g| {
                    pairs += 1;
                    let outcome = hochschild::yoneda(&bar, &f, &g, &budget).unwrap();
                    if outcome.equals_cup {
                        exact += 1;
                    } else if let Some(w) = &outcome.coboundary_witness {
                        witnessed += 1;
                        let diff = outcome.result.try_sub(&cup(&f, &g).unwrap()).unwrap();
                        ok &= w.signed_differential() == diff;
                    } else {
                        ok = false;
                    }
                });
            });
        }
    }
    let detail = format!(
        "composition product matches cup on all {pairs} basis pairs with p, q <= 2 \
         ({exact} exactly equal, {witnessed} via a solved coboundary witness)"
    );
    assert!(verdict(7, ok, &detail), "criterion 7 failed: {detail}");
}

#[test]
fn criterion_08_diagonal_homotopy_identity() {
    let a = sample("trunc_poly(2)");
    let budget = Budget::default();
    let bar = build_bar(&a, 4, &budget).unwrap();
    let mut ok = true;
    let mut failure: Option<String> = None;
    for degree in 0..=2usize {
        if let Err(e) = diagonal_homotopy_check(&bar, degree) {
            ok = false;
            failure.get_or_insert(format!("degree {degree}: {e}"));
        }
    }
    let detail = match &failure {
        None => "d∘H + H∘d = Δ_AW − Δ_pt holds exactly in degrees 0..=2 at truncation 4"
            .to_string(),
        Some(witness) => format!("diagonal homotopy identity fails at {witness}"),
    };
    assert!(verdict(8, ok, &detail), "criterion 8 failed: {detail}");
}

#[test]
fn criterion_09_endomorphism_window_recovers_cohomology() {
    let a = sample("trunc_poly(2)");
    let budget = Budget::default();
    let bar = build_bar(&a, 5, &budget).unwrap();
    let window = endo_complex(&bar, 2).unwrap();
    let direct = cohomology_dims(&a, 2, &budget).unwrap();
    let ok = window.cohomology == direct && direct == vec![2, 1, 1];
    let detail = format!(
        "endomorphism-complex cohomology {:?} (End dims {:?}) matches the cochain \
         computation {direct:?} in degrees 0..=2 at truncation 5",
        window.cohomology, window.end_dims
    );
    assert!(verdict(9, ok, &detail), "criterion 9 failed: {detail}");
}

#[test]
fn criterion_10_gerstenhaber_axioms_on_cohomology_representatives() {
    let a = sample("trunc_poly(2)");
    let budget = Budget::default();
    let report = cohomology(&a, 3, &budget).unwrap();
    let reps = &report.representatives;
    let mut ok = report.dims == vec![2, 1, 1, 1];
    let mut commutativity = (0usize, 0usize); // (exact zeros, solved witnesses)
    let mut jacobi_triples = 0usize;
    let mut leibniz = (0usize, 0usize);

    // A deviation counts as solved only if it is exactly zero or an explicit
    // coboundary witness comes back from the linear solve and checks out.
    let solved = |dev: &Cochain, counter: &mut (usize, usize)| {
        if dev.is_zero() {
            counter.0 += 1;
            return true;
        }
        match is_coboundary(dev, &budget).unwrap() {
            Some(w) => {
                counter.1 += 1;
                w.signed_differential() == *dev
            }
            None => false,
        }
    };

    // Graded commutativity of cup, mod coboundaries.
    for p in 0..=3usize {
        for q_deg in 0..=3usize {
            if p + q_deg > 3 {
                continue;
            }
            for f in &reps[p] {
                for g in &reps[q_deg] {
                    let dev = cup(f, g)
                        .unwrap()
                        .try_sub(&cup(g, f).unwrap().scale(&sign_pow((p * q_deg) as i64)))
                        .unwrap();
                    ok &= solved(&dev, &mut commutativity);
                }
            }
        }
    }

    // Graded Jacobi with the shifted grading |f| = p − 1: exact at chain
    // level, so the residual must vanish identically on representatives.
    // Triples with two degree-0 entries are skipped: there the inner bracket
    // would live in arity −1, which has no carrier, and the three groupings
    // land in different arities.
    for p in 0..=3usize {
        for q_deg in 0..=3usize {
            for r in 0..=3usize {
                let zeros = [p, q_deg, r].iter().filter(|&&d| d == 0).count();
                if p + q_deg + r > 5 || zeros > 1 {
                    continue;
                }
                let (sp, sq, sr) = (p as i64 - 1, q_deg as i64 - 1, r as i64 - 1);
                for f in &reps[p] {
                    for g in &reps[q_deg] {
                        for h in &reps[r] {
                            jacobi_triples += 1;
                            let t1 = bracket(&bracket(f, g).unwrap(), h)
                                .unwrap()
                                .scale(&sign_pow(sp * sr));
                            let t2 = bracket(&bracket(g, h).unwrap(), f)
                                .unwrap()
                                .scale(&sign_pow(sq * sp));
                            let t3 = bracket(&bracket(h, f).unwrap(), g)
                                .unwrap()
                                .scale(&sign_pow(sr * sq));
                            ok &= t1.add(&t2).add(&t3).is_zero();
                        }
                    }
                }
            }
        }
    }

    // The bracket acts on cup products by a graded Leibniz rule, mod
    // coboundaries: [f, g⌣h] − [f,g]⌣h − (−1)^{(p−1)q} g⌣[f,h].
    for p in 1..=3usize {
        for q_deg in 0..=3usize {
            for r in 0..=3usize {
                if p + q_deg + r > 4 {
                    continue;
                }
                for f in &reps[p] {
                    for g in &reps[q_deg] {
                        for h in &reps[r] {
                            let dev = bracket(f, &cup(g, h).unwrap())
                                .unwrap()
                                .try_sub(&cup(&bracket(f, g).unwrap(), h).unwrap())
                                .unwrap()
                                .try_sub(
                                    &cup(g, &bracket(f, h).unwrap())
                                        .unwrap()
                                        .scale(&sign_pow((p as i64 - 1) * q_deg as i64)),
                                )
                                .unwrap();
                            ok &= solved(&dev, &mut leibniz);
                        }
                    }
                }
            }
        }
    }

    let detail = format!(
        "on HH(k[x]/(x^2)) representatives through degree 3: cup commutativity holds \
         ({} exact, {} solved coboundaries), graded Jacobi vanishes identically on \
         {jacobi_triples} triples, and the bracket-Leibniz rule holds ({} exact, {} \
         solved coboundaries)",
        commutativity.0, commutativity.1, leibniz.0, leibniz.1
    );
    assert!(verdict(10, ok, &detail), "criterion 10 failed: {detail}");
}

#[test]
fn criterion_11_polydifferential_operators_symbolic_vs_pointwise() {
    let start = Instant::now();
    let ctx = TruncatedPolyContext::new(1, 5).unwrap();
    let named = [
        ("d1", PolyDiffOp::parse("d1", 1).unwrap()),
        ("x1", PolyDiffOp::parse("x1", 1).unwrap()),
        ("x1*d1", PolyDiffOp::parse("x1*d1", 1).unwrap()),
        ("1.1", PolyDiffOp::parse("1.1", 1).unwrap()),
    ];
    let mut ok =
        bracket_op(&named[0].1, &named[1].1).unwrap() == PolyDiffOp::identity(1);
    let mut tuples = 0usize;
    for (_, f) in &named {
        for (_, g) in &named {
            tuples += cup_evaluation_check(&ctx, f, g).unwrap();
            tuples += circle_evaluation_check(&ctx, f, g).unwrap();
            tuples += bracket_evaluation_check(&ctx, f, g).unwrap();
            if f.arity() == 1 && g.arity() == 1 {
                tuples += commutator_check(&ctx, f, g).unwrap();
            }
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(5);
    let detail = format!(
        "bracket_op(d1, x1) is the identity operator, and symbolic cup/circle/bracket \
         agree with pointwise evaluation on {tuples} monomial tuples over the \
         degree-5 window in {}ms (< 5s)",
        elapsed.as_millis()
    );
    assert!(verdict(11, ok, &detail), "criterion 11 failed: {detail}");
}

#[test]
fn criterion_12_interchange_exponent_sweep_has_a_unique_winner() {
    let a = sample("trunc_poly(2)");
    let sweep = h_exponent_sweep(&a, 2);
    let survivors: Vec<&str> = sweep
        .candidates
        .iter()
        .filter(|c| c.passed)
        .map(|c| c.name.as_str())
        .collect();
    let ok = survivors.len() == 1 && sweep.winner.as_deref() == survivors.first().copied();
    let tuples = sweep
        .candidates
        .iter()
        .find(|c| c.passed)
        .map_or(0, |c| c.tuples_checked);
    let detail = format!(
        "exactly one filler exponent survives the interchange sweep over singleton \
         tuples of arity <= 2 on trunc_poly(2): {} ({tuples} tuples checked; {} of {} \
         candidates rejected)",
        sweep.winner.as_deref().unwrap_or("none"),
        sweep.candidates.len() - survivors.len(),
        sweep.candidates.len()
    );
    assert!(verdict(12, ok, &detail), "criterion 12 failed: {detail}");
}
