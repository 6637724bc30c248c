//! Exact-arithmetic Hochschild cohomology for finite-dimensional associative
//! algebras over the rationals, together with the chain-level cup product,
//! circle composition, and bracket; bar-resolution machinery; a bracket
//! extractor driven by interchange homotopies; and a small polydifferential
//! operator calculus.
//!
//! Everything is computed over `num_rational::BigRational`: no floats appear
//! anywhere, every identity check is an exact comparison, and every reported
//! number is a rational string.

pub mod algebra;
pub mod bar;
pub mod cochain;
pub mod dpoly;
pub mod e2;
pub mod exactlin;
pub mod gerst;

pub use algebra::{default_samples, multiply, sample_library, AlgebraError, AlgebraSpec, Element};
pub use bar::{
    bimodule_map_of_cochain, build_bar, canonical_lift_apply, canonical_lift_chain_map_check,
    cochain_of_bimodule_map, convolution, diagonal_aw, diagonal_aw_chain_map_check,
    diagonal_counit_check, diagonal_homotopy, diagonal_homotopy_check, diagonal_point,
    endo_apply, endo_comparison_check, endo_comparison_cochain, endo_complex, endo_compose,
    endo_differential, fused_differential, yoneda, BarComplex, BarError, BimoduleMap,
    DiagonalKind, EndoComplexWindow, EndoElement, FusedVector, YonedaOutcome,
};
pub use cochain::{
    cohomology, cohomology_dims, d_matrix, is_coboundary, space_dim, Budget, Cochain,
    CochainError, CohomologyReport,
};
pub use dpoly::{
    bracket_evaluation_check, bracket_op, bracket_op_signed, circle_evaluation_check, circle_op,
    commutator_check, cup_evaluation_check, cup_op, DpolyError, MultiIndex, Poly, PolyDiffOp,
    TruncatedPolyContext, TERM_CAP,
};
pub use e2::{
    compare_with_hochschild_bracket, extract_bracket, hochschild_presentation,
    materialize_presentation, strict_interchange_report, validate_presentation,
    BracketComparison, CheckOutcome, E2Error, ExtractedBracket, HochschildPresentation,
    MatrixPresentation, PresentationReport, StrictInterchangeOutcome, TwoAlgebraOps,
};
pub use exactlin::{
    parse_scalar, q, qq, quotient_dim, scalar_string, sign_pow, ExactlinError, Matrix, Scalar,
    SparseMatrix, Subspace,
};
pub use gerst::{
    bracket, bracket_signed, circle, cup, h_exponent_candidates, h_exponent_sweep,
    h_op_restriction, h_restriction, h_square_residual_for_candidate,
    homotopy_commutativity_check, interchange_square_check, interchange_square_op_check,
    square_homotopy_h, square_homotopy_h_op, Accumulation, CandidateOutcome, ExponentFn,
    GerstError, HExponentCandidate, HomotopyKind, HomotopyWitness, SweepOutcome,
};
