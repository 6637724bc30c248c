//! Command-line front end for the `hochschild` crate.
//!
//! Subcommands: `describe` (algebra catalog and details), `cohomology`
//! (dimensions and representative cocycles), `bracket-table` (signed
//! Gerstenhaber brackets of basis cochains, or operator brackets over
//! polydifferential literals), `verify` (per-module invariant suites with
//! witnesses and timings), `e2-extract` (validate the interchange
//! presentation, tabulate it, and extract its bracket), and `dpoly-eval`
//! (parse, combine, and evaluate polydifferential operators).
//!
//! Exit codes: 0 when everything asked for passed, 1 when a verification or
//! validation check failed, 2 for usage and configuration errors. JSON
//! reports embed the resolved sign conventions and integer-millisecond
//! timings, and re-serializing a parsed report reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use hochschild::{
    bracket_evaluation_check, bracket_op, bracket_signed, build_bar, circle,
    circle_evaluation_check, cohomology, commutator_check, compare_with_hochschild_bracket,
    convolution, cup, cup_evaluation_check, diagonal_aw_chain_map_check, diagonal_counit_check,
    diagonal_homotopy_check, extract_bracket, h_exponent_sweep, hochschild_presentation,
    homotopy_commutativity_check, interchange_square_check, interchange_square_op_check,
    materialize_presentation, qq, sample_library, scalar_string, sign_pow,
    validate_presentation, yoneda, AlgebraSpec, Budget, Cochain, DiagonalKind, Poly, PolyDiffOp,
    Scalar,
};

#[derive(Parser)]
#[command(
    name = "hochschild",
    version,
    about = "Exact Hochschild cohomology, Gerstenhaber operations, and polydifferential operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Describe an algebra, or list the sample catalog when no source is given.
    Describe {
        #[command(flatten)]
        source: SourceOpt,
        #[command(flatten)]
        output: OutputOpt,
    },
    /// Cohomology dimensions and representative cocycles through a degree window.
    Cohomology {
        #[command(flatten)]
        source: SourceOpt,
        /// Highest cohomological degree to compute.
        #[arg(long, default_value_t = 2)]
        max_degree: usize,
        #[command(flatten)]
        budget: BudgetOpt,
        #[command(flatten)]
        output: OutputOpt,
    },
    /// Signed Gerstenhaber brackets of basis cochains, or operator brackets with --ops.
    BracketTable {
        #[command(flatten)]
        source: SourceOpt,
        /// Arity of the basis cochains to tabulate.
        #[arg(long, default_value_t = 1)]
        degree: usize,
        /// Comma-separated polydifferential operator literals (switches to operator mode).
        #[arg(long, conflicts_with_all = ["sample", "input", "degree"])]
        ops: Option<String>,
        /// Number of variables for operator literals.
        #[arg(long, default_value_t = 1)]
        vars: usize,
        #[command(flatten)]
        output: OutputOpt,
    },
    /// Run an invariant suite and report each check with witnesses and timings.
    Verify {
        #[command(flatten)]
        source: SourceOpt,
        /// Which suite to run.
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[command(flatten)]
        budget: BudgetOpt,
        #[command(flatten)]
        output: OutputOpt,
    },
    /// Validate the interchange presentation, tabulate it, and extract its bracket.
    E2Extract {
        #[command(flatten)]
        source: SourceOpt,
        /// Highest carrier degree of the presentation window.
        #[arg(long, default_value_t = 2)]
        max_degree: usize,
        #[command(flatten)]
        budget: BudgetOpt,
        #[command(flatten)]
        output: OutputOpt,
    },
    /// Parse a polydifferential operator, optionally combine it with another, and evaluate it.
    DpolyEval {
        /// Operator literal, e.g. `x1^2*d1 + d1.d2`.
        expr: String,
        /// Number of variables the operators act on.
        #[arg(long, default_value_t = 1)]
        vars: usize,
        /// Cup the operator with this literal.
        #[arg(long)]
        cup: Option<String>,
        /// Circle-compose the operator with this literal.
        #[arg(long)]
        circle: Option<String>,
        /// Bracket the operator with this literal.
        #[arg(long)]
        bracket: Option<String>,
        /// Comma-separated polynomial arguments to apply the result to.
        #[arg(long)]
        apply: Option<String>,
        #[command(flatten)]
        output: OutputOpt,
    },
}

#[derive(Args)]
struct SourceOpt {
    /// Sample algebra key, e.g. `trunc_poly(2)` or `matrix(2)`.
    #[arg(long)]
    sample: Option<String>,
    /// Path to an algebra JSON file.
    #[arg(long, conflicts_with = "sample")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct BudgetOpt {
    /// Refuse any computation whose coordinate space exceeds this size.
    #[arg(long)]
    max_space: Option<usize>,
}

#[derive(Args)]
struct OutputOpt {
    /// Report format.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Gerst,
    Bar,
    E2,
    Dpoly,
    All,
}

/// A usage or configuration problem: reported on stderr, exit code 2.
struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<bool, UsageError> {
    match command {
        Command::Describe { source, output } => describe(&source, &output),
        Command::Cohomology {
            source,
            max_degree,
            budget,
            output,
        } => cohomology_cmd(&source, max_degree, &budget.budget(), &output),
        Command::BracketTable {
            source,
            degree,
            ops,
            vars,
            output,
        } => bracket_table(&source, degree, ops.as_deref(), vars, &output),
        Command::Verify {
            source,
            suite,
            budget,
            output,
        } => verify(&source, suite, &budget.budget(), &output),
        Command::E2Extract {
            source,
            max_degree,
            budget,
            output,
        } => e2_extract(&source, max_degree, &budget.budget(), &output),
        Command::DpolyEval {
            expr,
            vars,
            cup,
            circle,
            bracket,
            apply,
            output,
        } => dpoly_eval(
            &expr,
            vars,
            cup.as_deref(),
            circle.as_deref(),
            bracket.as_deref(),
            apply.as_deref(),
            &output,
        ),
    }
}

impl BudgetOpt {
    fn budget(&self) -> Budget {
        match self.max_space {
            Some(max_space) => Budget { max_space },
            None => Budget::default(),
        }
    }
}

impl SourceOpt {
    fn resolve(&self) -> Result<Option<Arc<AlgebraSpec>>, UsageError> {
        match (&self.sample, &self.input) {
            (Some(key), None) => Ok(Some(
                sample_library(key).map_err(|e| UsageError(format!("sample {key:?}: {e}")))?,
            )),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
                Ok(Some(AlgebraSpec::from_json(&text).map_err(|e| {
                    UsageError(format!("{}: {e}", path.display()))
                })?))
            }
            (None, None) => Ok(None),
            (Some(_), Some(_)) => unreachable!("clap forbids both"),
        }
    }

    fn require(&self) -> Result<Arc<AlgebraSpec>, UsageError> {
        self.resolve()?
            .ok_or_else(|| UsageError("this command needs --sample KEY or --input FILE".into()))
    }
}

// ---------------------------------------------------------------------------
// Rendering helpers.

/// The sign conventions every report is computed under.
fn sign_conventions() -> Value {
    json!({
        "differential": "Df = (-1)^p df on p-cochains, df the alternating face sum",
        "circle": "f{g} = sum_{i=1..p} (-1)^{(q-1)(i-1)} f o_i g",
        "bracket": "[f,g] = f{g} - (-1)^{(p-1)(q-1)} g{f}",
        "signed_bracket": "B(f,g) = (-1)^{p+1} [f,g]",
        "interchange_filler": "h(f1,g1,f2,g2) = (-1)^{|f2|+|g2|-1} f1 cup (f2{g1}) cup g2, degrees |.| = arity - 1",
        "opposite_filler": "h_op(f1,g1,f2,g2) = (-1)^{|f1|+|g1|-1} g2 cup (g1{f2}) cup f1",
        "square_orientation": "fillers compare (f1 cup g1) cup (f2 cup g2) with (-1)^{|g1||f2|} (f1 cup f2) cup (g1 cup g2); the straight square accumulates slot signs over succeeding slots, the opposite square over preceding ones",
    })
}

/// Appends `coeff * body` to a signed sum under construction.
fn push_term(out: &mut String, coeff: &Scalar, body: &str) {
    let s = scalar_string(coeff);
    if s == "0" {
        return;
    }
    let (neg, mag) = match s.strip_prefix('-') {
        Some(m) => (true, m.to_string()),
        None => (false, s),
    };
    if out.is_empty() {
        if neg {
            out.push('-');
        }
    } else {
        out.push_str(if neg { " - " } else { " + " });
    }
    if mag == "1" {
        out.push_str(body);
    } else {
        let _ = write!(out, "{mag}*{body}");
    }
}

fn finish_sum(sum: String) -> String {
    if sum.is_empty() {
        "0".to_string()
    } else {
        sum
    }
}

/// Renders an algebra element given by coordinates.
fn render_vector(coeffs: &[Scalar], labels: &[String]) -> String {
    let mut out = String::new();
    for (k, v) in coeffs.iter().enumerate() {
        push_term(&mut out, v, &labels[k]);
    }
    finish_sum(out)
}

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

/// Renders a cochain as a signed sum of `(inputs)->output` terms; arity-0
/// cochains render as plain algebra elements.
fn render_cochain(c: &Cochain) -> String {
    let algebra = c.algebra();
    let labels = algebra.basis_labels();
    if c.arity() == 0 {
        return render_vector(c.values(), labels);
    }
    let dim = algebra.dim();
    let mut out = String::new();
    for_each_multi(dim, c.arity(), |multi| {
        let slot: Vec<&str> = multi.iter().map(|&m| labels[m].as_str()).collect();
        for k in 0..dim {
            push_term(
                &mut out,
                c.value(multi, k),
                &format!("({})->{}", slot.join(","), labels[k]),
            );
        }
    });
    finish_sum(out)
}

fn flat_strings(values: &[Scalar]) -> Vec<String> {
    values.iter().map(scalar_string).collect()
}

/// The canonical JSON envelope: command, optional algebra, report payload,
/// resolved sign conventions, and elapsed integer milliseconds.
fn envelope(command: &str, algebra: Option<&str>, report: Value, started: Instant) -> Value {
    let mut map = Map::new();
    if let Some(name) = algebra {
        map.insert("algebra".into(), Value::String(name.to_string()));
    }
    map.insert("command".into(), Value::String(command.to_string()));
    map.insert("report".into(), report);
    map.insert("sign_conventions".into(), sign_conventions());
    map.insert(
        "timing_ms".into(),
        Value::from(started.elapsed().as_millis() as u64),
    );
    Value::Object(map)
}

/// Emits the chosen rendering to stdout or `--out FILE`.
fn emit(output: &OutputOpt, text: String, json: Value) -> Result<(), UsageError> {
    let body = match output.format {
        Format::Text => text,
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json).expect("report serializes");
            s.push('\n');
            s
        }
    };
    match &output.out {
        None => {
            print!("{body}");
            Ok(())
        }
        Some(path) => {
            std::fs::write(path, body)
                .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

/// Deterministic LCG for the randomized verify sweeps; same recurrence as the
/// library's test generator so runs are reproducible.
struct Lcg(u64);

impl Lcg {
    fn new(seed: u64) -> Self {
        Lcg(seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493))
    }

    fn next_u64(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 16
    }

    fn small_scalar(&mut self) -> Scalar {
        let n = (self.next_u64() % 9) as i64 - 4;
        let d = (self.next_u64() % 3) as i64 + 1;
        qq(n, d)
    }

    fn cochain(&mut self, algebra: &Arc<AlgebraSpec>, arity: usize) -> Cochain {
        let len = algebra.dim().pow(arity as u32) * algebra.dim();
        let values = (0..len).map(|_| self.small_scalar()).collect();
        Cochain::from_values(algebra, arity, values).unwrap()
    }
}

// ---------------------------------------------------------------------------
// describe

const SAMPLE_KEYS: [(&str, &str); 5] = [
    ("field", "the ground field itself"),
    ("trunc_poly(2)", "truncated polynomials k[x]/(x^2)"),
    ("matrix(2)", "2x2 matrices"),
    ("group_cyclic(2)", "group algebra of Z/2"),
    ("product(3)", "the split product k^3"),
];

fn describe(source: &SourceOpt, output: &OutputOpt) -> Result<bool, UsageError> {
    let started = Instant::now();
    match source.resolve()? {
        None => {
            let mut text = String::from("samples:\n");
            let mut rows = Vec::new();
            for (key, blurb) in SAMPLE_KEYS {
                let a = sample_library(key).expect("catalog keys resolve");
                let _ = writeln!(text, "  {key:<16} dim {:<3} {blurb}", a.dim());
                rows.push(json!({ "key": key, "dim": a.dim(), "about": blurb }));
            }
            text.push_str(
                "families: trunc_poly(n), matrix(n), group_cyclic(m), product(k) \
                 accept other parameters\n",
            );
            let report = json!({ "samples": rows });
            emit(output, text, envelope("describe", None, report, started))?;
            Ok(true)
        }
        Some(a) => {
            let labels = a.basis_labels();
            let dim = a.dim();
            let commutative = (0..dim).all(|i| {
                (0..dim).all(|j| a.basis_product(i, j) == a.basis_product(j, i))
            });
            let center = a.center();
            let center_combos: Vec<String> = center
                .basis()
                .iter()
                .map(|v| render_vector(v, labels))
                .collect();
            let mut text = format!("algebra {} (dim {dim})\n", a.name());
            let _ = writeln!(text, "basis: {}", labels.join(", "));
            let _ = writeln!(text, "unit: {}", render_vector(a.unit(), labels));
            let _ = writeln!(
                text,
                "commutative: {}",
                if commutative { "yes" } else { "no" }
            );
            let _ = writeln!(
                text,
                "center: dim {} with basis {{{}}}",
                center.dim(),
                center_combos.join(", ")
            );
            let report = json!({
                "name": a.name(),
                "dim": dim,
                "basis": labels,
                "unit": flat_strings(a.unit()),
                "commutative": commutative,
                "center_dim": center.dim(),
                "center_basis": center.basis().iter().map(|v| flat_strings(v)).collect::<Vec<_>>(),
            });
            emit(
                output,
                text,
                envelope("describe", Some(a.name()), report, started),
            )?;
            Ok(true)
        }
    }
}

// ---------------------------------------------------------------------------
// cohomology

fn cohomology_cmd(
    source: &SourceOpt,
    max_degree: usize,
    budget: &Budget,
    output: &OutputOpt,
) -> Result<bool, UsageError> {
    let started = Instant::now();
    let a = source.require()?;
    let report = cohomology(&a, max_degree, budget)?;
    let mut text = format!("algebra {} (dim {})\n", a.name(), a.dim());
    for (n, reps) in report.representatives.iter().enumerate() {
        let _ = writeln!(text, "HH^{n} dim {}", report.dims[n]);
        for (k, rep) in reps.iter().enumerate() {
            let _ = writeln!(text, "  rep {}: {}", k + 1, render_cochain(rep));
        }
    }
    let _ = writeln!(text, "dims: {:?}", report.dims);
    let payload: Value =
        serde_json::from_str(&report.to_json()).expect("report JSON parses back");
    let json = envelope(
        "cohomology",
        Some(a.name()),
        json!({ "max_degree": max_degree, "cohomology": payload }),
        started,
    );
    emit(output, text, json)?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// bracket-table

fn bracket_table(
    source: &SourceOpt,
    degree: usize,
    ops: Option<&str>,
    vars: usize,
    output: &OutputOpt,
) -> Result<bool, UsageError> {
    match ops {
        Some(list) => operator_bracket_table(list, vars, output),
        None => hochschild_bracket_table(source, degree, output),
    }
}

fn operator_bracket_table(
    list: &str,
    vars: usize,
    output: &OutputOpt,
) -> Result<bool, UsageError> {
    let started = Instant::now();
    let mut named: Vec<(String, PolyDiffOp)> = Vec::new();
    for item in list.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(UsageError("--ops has an empty entry".into()));
        }
        named.push((item.to_string(), PolyDiffOp::parse(item, vars)?));
    }
    let mut text = format!(
        "operator brackets over {vars} variable(s): bracket(f, g) = f{{g}} - (-1)^{{(p-1)(q-1)}} g{{f}}\n"
    );
    let mut rows = Vec::new();
    for (lname, f) in &named {
        for (rname, g) in &named {
            let b = bracket_op(f, g)?;
            let _ = writeln!(text, "bracket({lname}, {rname}) = {b}");
            rows.push(json!({ "left": lname, "right": rname, "bracket": b.to_string() }));
        }
    }
    let report = json!({ "vars": vars, "entries": rows });
    emit(
        output,
        text,
        envelope("bracket-table", None, report, started),
    )?;
    Ok(true)
}

fn hochschild_bracket_table(
    source: &SourceOpt,
    degree: usize,
    output: &OutputOpt,
) -> Result<bool, UsageError> {
    let started = Instant::now();
    let a = source.require()?;
    let dim = a.dim();
    let mut basis: Vec<Cochain> = Vec::new();
    for_each_multi(dim, degree, |multi| {
        for out in 0..dim {
            basis.push(Cochain::singleton(&a, multi, out));
        }
    });
    let mut text = format!(
        "signed brackets B(f, g) = (-1)^{{p+1}}[f, g] of basis {degree}-cochains on {}\n",
        a.name()
    );
    let mut rows = Vec::new();
    for f in &basis {
        for g in &basis {
            let b = bracket_signed(f, g)?;
            let _ = writeln!(
                text,
                "B({}, {}) = {}",
                render_cochain(f),
                render_cochain(g),
                render_cochain(&b)
            );
            rows.push(json!({
                "left": render_cochain(f),
                "right": render_cochain(g),
                "bracket": render_cochain(&b),
                "bracket_values": flat_strings(b.values()),
            }));
        }
    }
    let report = json!({ "degree": degree, "entries": rows });
    emit(
        output,
        text,
        envelope("bracket-table", Some(a.name()), report, started),
    )?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// verify

struct CheckRow {
    suite: &'static str,
    name: String,
    passed: bool,
    points: usize,
    millis: u64,
    witness: Option<String>,
    detail: Option<String>,
}

/// Outcome of one check body: points examined, optional failure witness,
/// optional informational detail. `witness = Some` means the check failed.
type CheckResult = (usize, Option<String>, Option<String>);

fn run_check(
    rows: &mut Vec<CheckRow>,
    suite: &'static str,
    name: &str,
    body: impl FnOnce() -> CheckResult,
) {
    let started = Instant::now();
    let (points, witness, detail) = body();
    rows.push(CheckRow {
        suite,
        name: name.to_string(),
        passed: witness.is_none(),
        points,
        millis: started.elapsed().as_millis() as u64,
        witness,
        detail,
    });
}

fn gerst_suite(a: &Arc<AlgebraSpec>, rows: &mut Vec<CheckRow>) {
    run_check(
        rows,
        "gerst",
        "homotopy commutativity of cup (random cochains, arities 1..=2)",
        || {
            let mut rng = Lcg::new(11);
            let mut points = 0;
            for p in 1..=2usize {
                for q in 1..=2usize {
                    for _ in 0..8 {
                        points += 1;
                        let f = rng.cochain(a, p);
                        let g = rng.cochain(a, q);
                        if let Err(e) = homotopy_commutativity_check(&f, &g) {
                            return (points, Some(e.to_string()), None);
                        }
                    }
                }
            }
            (points, None, None)
        },
    );
    run_check(
        rows,
        "gerst",
        "differential rule for cup (random cochains, arities 0..=2)",
        || {
            let mut rng = Lcg::new(12);
            let mut points = 0;
            for p in 0..=2usize {
                for q in 0..=2usize {
                    for _ in 0..6 {
                        points += 1;
                        let f = rng.cochain(a, p);
                        let g = rng.cochain(a, q);
                        let lhs = cup(&f, &g).unwrap().signed_differential();
                        let rhs = cup(&f.signed_differential(), &g)
                            .unwrap()
                            .scale(&sign_pow(q as i64))
                            .add(&cup(&f, &g.signed_differential()).unwrap());
                        if lhs != rhs {
                            return (
                                points,
                                Some(format!("D(f cup g) != (-1)^q Df cup g + f cup Dg at arities ({p}, {q})")),
                                None,
                            );
                        }
                    }
                }
            }
            (points, None, None)
        },
    );
    run_check(
        rows,
        "gerst",
        "differential rule for the signed bracket (random cochains, arities 1..=2)",
        || {
            let mut rng = Lcg::new(13);
            let mut points = 0;
            for p in 1..=2usize {
                for q in 1..=2usize {
                    for _ in 0..6 {
                        points += 1;
                        let f = rng.cochain(a, p);
                        let g = rng.cochain(a, q);
                        let total = bracket_signed(&f, &g)
                            .unwrap()
                            .signed_differential()
                            .add(&bracket_signed(&f.signed_differential(), &g).unwrap())
                            .add(
                                &bracket_signed(&f, &g.signed_differential())
                                    .unwrap()
                                    .scale(&sign_pow(p as i64)),
                            );
                        if !total.is_zero() {
                            return (
                                points,
                                Some(format!(
                                    "DB(f,g) + B(Df,g) + (-1)^p B(f,Dg) != 0 at arities ({p}, {q})"
                                )),
                                None,
                            );
                        }
                    }
                }
            }
            (points, None, None)
        },
    );
    run_check(
        rows,
        "gerst",
        "graded Jacobi at chain level (random cochains, arities 1..=2)",
        || {
            let mut rng = Lcg::new(14);
            let mut points = 0;
            for p in 1..=2usize {
                for q in 1..=2usize {
                    for r in 1..=2usize {
                        for _ in 0..4 {
                            points += 1;
                            let f = rng.cochain(a, p);
                            let g = rng.cochain(a, q);
                            let h = rng.cochain(a, r);
                            let (sp, sq, sr) =
                                (p as i64 - 1, q as i64 - 1, r as i64 - 1);
                            let t1 = hochschild::bracket(&hochschild::bracket(&f, &g).unwrap(), &h)
                                .unwrap()
                                .scale(&sign_pow(sp * sr));
                            let t2 = hochschild::bracket(&hochschild::bracket(&g, &h).unwrap(), &f)
                                .unwrap()
                                .scale(&sign_pow(sq * sp));
                            let t3 = hochschild::bracket(&hochschild::bracket(&h, &f).unwrap(), &g)
                                .unwrap()
                                .scale(&sign_pow(sr * sq));
                            if !t1.add(&t2).add(&t3).is_zero() {
                                return (
                                    points,
                                    Some(format!("Jacobi residual at arities ({p}, {q}, {r})")),
                                    None,
                                );
                            }
                        }
                    }
                }
            }
            (points, None, None)
        },
    );
    run_check(
        rows,
        "gerst",
        "interchange squares filled by h and h_op (random cochains, arities 0..=1)",
        || {
            let mut rng = Lcg::new(15);
            let mut points = 0;
            for mask in 0..16usize {
                let ar = |bit: usize| (mask >> bit) & 1;
                for _ in 0..4 {
                    points += 2;
                    let t: Vec<Cochain> = (0..4).map(|b| rng.cochain(a, ar(b))).collect();
                    if let Err(e) = interchange_square_check(&t[0], &t[1], &t[2], &t[3]) {
                        return (points, Some(e.to_string()), None);
                    }
                    if let Err(e) = interchange_square_op_check(&t[0], &t[1], &t[2], &t[3]) {
                        return (points, Some(e.to_string()), None);
                    }
                }
            }
            (points, None, None)
        },
    );
    run_check(
        rows,
        "gerst",
        "interchange filler exponent sweep (singleton tuples, arities <= 1)",
        || {
            let sweep = h_exponent_sweep(a, 1);
            let survivors: Vec<&str> = sweep
                .candidates
                .iter()
                .filter(|c| c.passed)
                .map(|c| c.name.as_str())
                .collect();
            let points = sweep.candidates.iter().map(|c| c.tuples_checked).sum();
            match (&sweep.winner, survivors.len()) {
                (Some(winner), 1) => (
                    points,
                    None,
                    Some(format!(
                        "unique exponent {winner}; {} of {} candidates rejected",
                        sweep.candidates.len() - 1,
                        sweep.candidates.len()
                    )),
                ),
                _ => (
                    points,
                    Some(format!(
                        "expected exactly one surviving exponent, found {survivors:?}"
                    )),
                    None,
                ),
            }
        },
    );
}

fn bar_suite(a: &Arc<AlgebraSpec>, budget: &Budget, rows: &mut Vec<CheckRow>) {
    let bar = match build_bar(a, 4, budget) {
        Ok(bar) => bar,
        Err(e) => {
            rows.push(CheckRow {
                suite: "bar",
                name: "bar resolution through truncation 4".into(),
                passed: false,
                points: 0,
                millis: 0,
                witness: Some(e.to_string()),
                detail: None,
            });
            return;
        }
    };
    run_check(
        rows,
        "bar",
        "Alexander-Whitney diagonal is a chain map (degrees 1..=3)",
        || {
            for degree in 1..=3usize {
                if let Err(e) = diagonal_aw_chain_map_check(&bar, degree) {
                    return (degree, Some(e.to_string()), None);
                }
            }
            (3, None, None)
        },
    );
    run_check(
        rows,
        "bar",
        "counit collapses both diagonals (degrees 0..=2)",
        || {
            for degree in 0..=2usize {
                if let Err(e) = diagonal_counit_check(&bar, degree) {
                    return (degree + 1, Some(e.to_string()), None);
                }
            }
            (3, None, None)
        },
    );
    run_check(
        rows,
        "bar",
        "diagonal homotopy dH + Hd = AW - point (degrees 0..=2)",
        || {
            for degree in 0..=2usize {
                if let Err(e) = diagonal_homotopy_check(&bar, degree) {
                    return (degree + 1, Some(e.to_string()), None);
                }
            }
            (3, None, None)
        },
    );
    run_check(
        rows,
        "bar",
        "convolution with the AW diagonal equals cup (random cochains, p+q <= 3)",
        || {
            let mut rng = Lcg::new(21);
            let mut points = 0;
            for p in 0..=3usize {
                for q in 0..=3usize {
                    if p + q > 3 {
                        continue;
                    }
                    for _ in 0..4 {
                        points += 1;
                        let f = rng.cochain(a, p);
                        let g = rng.cochain(a, q);
                        let conv =
                            convolution(&bar, &f, &g, DiagonalKind::AlexanderWhitney).unwrap();
                        if conv != cup(&f, &g).unwrap() {
                            return (
                                points,
                                Some(format!("AW convolution != cup at arities ({p}, {q})")),
                                None,
                            );
                        }
                    }
                }
            }
            (points, None, None)
        },
    );
    run_check(
        rows,
        "bar",
        "point-diagonal convolution vanishes in positive arity (random cochains)",
        || {
            let mut rng = Lcg::new(22);
            let mut points = 0;
            for p in 0..=3usize {
                for q in 0..=3usize {
                    if p + q == 0 || p + q > 3 {
                        continue;
                    }
                    for _ in 0..4 {
                        points += 1;
                        let f = rng.cochain(a, p);
                        let g = rng.cochain(a, q);
                        let conv = convolution(&bar, &f, &g, DiagonalKind::Point).unwrap();
                        if !conv.is_zero() {
                            return (
                                points,
                                Some(format!(
                                    "point convolution nonzero at arities ({p}, {q})"
                                )),
                                None,
                            );
                        }
                    }
                }
            }
            (points, None, None)
        },
    );
    run_check(
        rows,
        "bar",
        "composition product equals cup up to coboundary (random cochains, p, q <= 1)",
        || {
            let mut rng = Lcg::new(23);
            let mut points = 0;
            for p in 0..=1usize {
                for q in 0..=1usize {
                    for _ in 0..4 {
                        points += 1;
                        let f = rng.cochain(a, p);
                        let g = rng.cochain(a, q);
                        let outcome = yoneda(&bar, &f, &g, budget).unwrap();
                        let solved = outcome.equals_cup
                            || outcome.coboundary_witness.as_ref().is_some_and(|w| {
                                let diff = outcome
                                    .result
                                    .try_sub(&cup(&f, &g).unwrap())
                                    .unwrap();
                                w.signed_differential() == diff
                            });
                        if !solved {
                            return (
                                points,
                                Some(format!(
                                    "composition deviates from cup without a witness at arities ({p}, {q})"
                                )),
                                None,
                            );
                        }
                    }
                }
            }
            (points, None, None)
        },
    );
}

fn e2_suite(a: &Arc<AlgebraSpec>, budget: &Budget, rows: &mut Vec<CheckRow>) {
    let presentation = match hochschild_presentation(a, 2, budget) {
        Ok(p) => p,
        Err(e) => {
            rows.push(CheckRow {
                suite: "e2",
                name: "2-algebra presentation through degree 2".into(),
                passed: false,
                points: 0,
                millis: 0,
                witness: Some(e.to_string()),
                detail: None,
            });
            return;
        }
    };
    let started = Instant::now();
    let report = validate_presentation(&presentation);
    let per_check = (started.elapsed().as_millis() as u64) / report.checks.len().max(1) as u64;
    for check in &report.checks {
        rows.push(CheckRow {
            suite: "e2",
            name: check.name.clone(),
            passed: check.passed,
            points: check.points_checked,
            millis: per_check,
            witness: check.first_failure.clone(),
            detail: None,
        });
    }
    if !report.valid {
        return;
    }
    run_check(
        rows,
        "e2",
        "extracted bracket deviation law (basis pairs, degrees <= 2)",
        || {
            let extracted = match extract_bracket(&presentation) {
                Ok(b) => b,
                Err(e) => return (0, Some(e.to_string()), None),
            };
            let dim = a.dim();
            let mut points = 0;
            let mut failure = None;
            for dp in 0..=2usize {
                for dq in 0..=2usize {
                    if dp + dq == 0 || dp + dq > 3 || failure.is_some() {
                        continue;
                    }
                    for_each_multi(dim, dp, |mf| {
                        for uf in 0..dim {
                            let f = Cochain::singleton(a, mf, uf);
                            for_each_multi(dim, dq, |mg| {
                                for ug in 0..dim {
                                    if failure.is_some() {
                                        continue;
                                    }
                                    let g = Cochain::singleton(a, mg, ug);
                                    points += 1;
                                    let e = extracted
                                        .apply(dp, f.values(), dq, g.values())
                                        .unwrap();
                                    // E(f,g) - B(f,g) = c(p,q) g{f} with
                                    // c = (-1)^{q+1} + (-1)^{p+1+(p-1)(q-1)}.
                                    let (p, q) = (dp as i64, dq as i64);
                                    let c = sign_pow(q + 1)
                                        + sign_pow(p + 1 + (p - 1) * (q - 1));
                                    let mut expected =
                                        bracket_signed(&f, &g).unwrap();
                                    if dq >= 1 && !c.eq(&qq(0, 1)) {
                                        expected = expected
                                            .add(&circle(&g, &f).unwrap().scale(&c));
                                    }
                                    if e != expected.values() {
                                        failure = Some(format!(
                                            "law fails at degrees ({dp}, {dq})"
                                        ));
                                    }
                                }
                            });
                        }
                    });
                }
            }
            (
                points,
                failure,
                Some(
                    "extraction equals B(f,g) off odd*odd degree pairs and exceeds it by 2 g{f} there"
                        .to_string(),
                ),
            )
        },
    );
}

fn dpoly_suite(rows: &mut Vec<CheckRow>) {
    let ctx = hochschild::TruncatedPolyContext::new(1, 4).unwrap();
    let named: Vec<(&str, PolyDiffOp)> = [
        "d1",
        "x1",
        "x1*d1",
        "1.1",
    ]
    .into_iter()
    .map(|s| (s, PolyDiffOp::parse(s, 1).unwrap()))
    .collect();
    run_check(rows, "dpoly", "bracket_op(d1, x1) is the identity operator", || {
        let b = bracket_op(&named[0].1, &named[1].1).unwrap();
        if b == PolyDiffOp::identity(1) {
            (1, None, None)
        } else {
            (1, Some(format!("bracket_op(d1, x1) = {b}")), None)
        }
    });
    let sweep = |rows: &mut Vec<CheckRow>,
                 name: &str,
                 check: &dyn Fn(&PolyDiffOp, &PolyDiffOp) -> Result<usize, hochschild::DpolyError>| {
        run_check(rows, "dpoly", name, || {
            let mut points = 0;
            for (ln, f) in &named {
                for (rn, g) in &named {
                    match check(f, g) {
                        Ok(n) => points += n,
                        Err(e) => {
                            return (points, Some(format!("({ln}, {rn}): {e}")), None)
                        }
                    }
                }
            }
            (points, None, None)
        });
    };
    sweep(
        rows,
        "cup_op matches pointwise products (16 operator pairs)",
        &|f, g| cup_evaluation_check(&ctx, f, g),
    );
    sweep(
        rows,
        "circle_op matches pointwise insertion (16 operator pairs)",
        &|f, g| circle_evaluation_check(&ctx, f, g),
    );
    sweep(
        rows,
        "bracket_op matches the two-circle combination (16 operator pairs)",
        &|f, g| bracket_evaluation_check(&ctx, f, g),
    );
    run_check(
        rows,
        "dpoly",
        "arity-1 brackets are operator commutators (9 operator pairs)",
        || {
            let mut points = 0;
            for (ln, f) in &named {
                for (rn, g) in &named {
                    if f.arity() != 1 || g.arity() != 1 {
                        continue;
                    }
                    match commutator_check(&ctx, f, g) {
                        Ok(n) => points += n,
                        Err(e) => return (points, Some(format!("({ln}, {rn}): {e}")), None),
                    }
                }
            }
            (points, None, None)
        },
    );
}

fn verify(
    source: &SourceOpt,
    suite: Suite,
    budget: &Budget,
    output: &OutputOpt,
) -> Result<bool, UsageError> {
    let started = Instant::now();
    let algebra = match suite {
        Suite::Dpoly => source.resolve()?,
        _ => Some(source.require()?),
    };
    let mut rows = Vec::new();
    if let Some(a) = &algebra {
        if matches!(suite, Suite::Gerst | Suite::All) {
            gerst_suite(a, &mut rows);
        }
        if matches!(suite, Suite::Bar | Suite::All) {
            bar_suite(a, budget, &mut rows);
        }
        if matches!(suite, Suite::E2 | Suite::All) {
            e2_suite(a, budget, &mut rows);
        }
    }
    if matches!(suite, Suite::Dpoly | Suite::All) {
        dpoly_suite(&mut rows);
    }

    let all_passed = rows.iter().all(|r| r.passed);
    let failed = rows.iter().filter(|r| !r.passed).count();
    let mut text = match &algebra {
        Some(a) => format!("verify {}\n", a.name()),
        None => "verify (no algebra needed)\n".to_string(),
    };
    for row in &rows {
        let _ = writeln!(
            text,
            "  [{}] {}: {} ({} points, {} ms)",
            if row.passed { " ok " } else { "FAIL" },
            row.suite,
            row.name,
            row.points,
            row.millis
        );
        if let Some(w) = &row.witness {
            let _ = writeln!(text, "         witness: {w}");
        }
        if let Some(d) = &row.detail {
            let _ = writeln!(text, "         note: {d}");
        }
    }
    text.push_str("conventions:\n");
    if let Value::Object(map) = sign_conventions() {
        for (k, v) in map {
            let _ = writeln!(text, "  {k}: {}", v.as_str().unwrap_or_default());
        }
    }
    let _ = writeln!(
        text,
        "summary: {} ({} ms)",
        if all_passed {
            format!("all {} checks passed", rows.len())
        } else {
            format!("{failed} of {} checks FAILED", rows.len())
        },
        started.elapsed().as_millis()
    );

    let checks: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "suite": r.suite,
                "name": r.name,
                "passed": r.passed,
                "points": r.points,
                "millis": r.millis,
                "witness": r.witness,
                "note": r.detail,
            })
        })
        .collect();
    let report = json!({ "all_passed": all_passed, "checks": checks });
    emit(
        output,
        text,
        envelope(
            "verify",
            algebra.as_ref().map(|a| a.name()),
            report,
            started,
        ),
    )?;
    Ok(all_passed)
}

// ---------------------------------------------------------------------------
// e2-extract

fn e2_extract(
    source: &SourceOpt,
    max_degree: usize,
    budget: &Budget,
    output: &OutputOpt,
) -> Result<bool, UsageError> {
    let started = Instant::now();
    let a = source.require()?;
    let presentation = hochschild_presentation(&a, max_degree, budget)?;
    let matrices = materialize_presentation(&presentation, budget)?;
    let report = validate_presentation(&matrices);

    let mut text = format!(
        "presentation {} through degree {max_degree} (dims {:?})\n",
        a.name(),
        matrices.dims
    );
    text.push_str("validation:\n");
    for check in &report.checks {
        let _ = writeln!(
            text,
            "  [{}] {} ({} points)",
            if check.passed { " ok " } else { "FAIL" },
            check.name,
            check.points_checked
        );
        if let Some(w) = &check.first_failure {
            let _ = writeln!(text, "         witness: {w}");
        }
    }
    let validation: Vec<Value> = report
        .checks
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "passed": c.passed,
                "points": c.points_checked,
                "witness": c.first_failure,
            })
        })
        .collect();

    if !report.valid {
        text.push_str("presentation invalid; bracket not extracted\n");
        let payload = json!({
            "max_degree": max_degree,
            "valid": false,
            "validation": validation,
        });
        emit(
            output,
            text,
            envelope("e2-extract", Some(a.name()), payload, started),
        )?;
        return Ok(false);
    }

    let extracted = extract_bracket(&matrices)?;
    text.push_str("bracket components:\n");
    let mut components = Map::new();
    for ((p, q), m) in &extracted.components {
        let _ = writeln!(text, "  degrees ({p}, {q}): {} x {}", m.rows(), m.cols());
        let grid: Vec<Value> = (0..m.rows())
            .map(|i| {
                Value::Array(
                    (0..m.cols())
                        .map(|j| Value::String(scalar_string(m.get(i, j))))
                        .collect(),
                )
            })
            .collect();
        components.insert(format!("{p},{q}"), Value::Array(grid));
    }
    let comparison = compare_with_hochschild_bracket(&presentation, &extracted, max_degree)?;
    let _ = writeln!(
        text,
        "comparison with the signed bracket on {} basis pairs: {}",
        comparison.pairs_checked,
        if comparison.matches {
            "all equal".to_string()
        } else {
            format!(
                "deviates on degree pairs {:?} (the odd*odd doubling of single-term fillers)",
                comparison.mismatched_pairs
            )
        }
    );
    let presentation_doc: Value =
        serde_json::from_str(&matrices.to_json()).expect("presentation JSON parses back");
    let payload = json!({
        "max_degree": max_degree,
        "valid": true,
        "validation": validation,
        "presentation": presentation_doc,
        "bracket_components": Value::Object(components),
        "comparison": {
            "pairs_checked": comparison.pairs_checked,
            "matches": comparison.matches,
            "mismatched_pairs": comparison
                .mismatched_pairs
                .iter()
                .map(|&(p, q)| json!([p, q]))
                .collect::<Vec<_>>(),
            "first_mismatch": comparison.first_mismatch,
        },
    });
    emit(
        output,
        text,
        envelope("e2-extract", Some(a.name()), payload, started),
    )?;
    Ok(true)
}

// ---------------------------------------------------------------------------
// dpoly-eval

fn dpoly_eval(
    expr: &str,
    vars: usize,
    cup_with: Option<&str>,
    circle_with: Option<&str>,
    bracket_with: Option<&str>,
    apply: Option<&str>,
    output: &OutputOpt,
) -> Result<bool, UsageError> {
    let started = Instant::now();
    let combiners = [cup_with, circle_with, bracket_with]
        .iter()
        .filter(|o| o.is_some())
        .count();
    if combiners > 1 {
        return Err(UsageError(
            "--cup, --circle, and --bracket are mutually exclusive".into(),
        ));
    }
    let f = PolyDiffOp::parse(expr, vars)?;
    let (op, description) = if let Some(g) = cup_with {
        (
            hochschild::cup_op(&f, &PolyDiffOp::parse(g, vars)?)?,
            format!("cup({expr}, {g})"),
        )
    } else if let Some(g) = circle_with {
        (
            hochschild::circle_op(&f, &PolyDiffOp::parse(g, vars)?)?,
            format!("circle({expr}, {g})"),
        )
    } else if let Some(g) = bracket_with {
        (
            bracket_op(&f, &PolyDiffOp::parse(g, vars)?)?,
            format!("bracket({expr}, {g})"),
        )
    } else {
        (f, expr.to_string())
    };

    let mut text = format!("operator: {op}\narity: {}\n", op.arity());
    let mut value = None;
    if let Some(list) = apply {
        let args: Result<Vec<Poly>, _> = list
            .split(',')
            .map(|s| Poly::parse(s.trim(), vars))
            .collect();
        let result = op.apply(&args?)?;
        let _ = writeln!(text, "value: {result}");
        value = Some(result.to_string());
    }
    let report = json!({
        "input": description,
        "vars": vars,
        "arity": op.arity(),
        "operator": op.to_string(),
        "value": value,
    });
    emit(output, text, envelope("dpoly-eval", None, report, started))?;
    Ok(true)
}
