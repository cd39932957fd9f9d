//! Numerical laboratory for spacelike submanifolds of Lorentzian spacetimes.
//!
//! The crate evaluates symbolic metrics, discretizes immersions on
//! parameter meshes, checks integral identities, solves the prescribed mean
//! curvature problem for spacelike graphs in static spacetimes, inspects
//! initial data sets and classifies infinitesimal symmetries.

pub mod error;
pub mod expr;
pub mod identities;
pub mod immersion;
pub mod initial_data;
pub mod mesh;
pub mod solver;
pub mod spacetime;
pub mod sparse;
pub mod static_graphs;
pub mod suite;
pub mod symmetry;

pub use error::{ExprError, GeomError, Result};
pub use expr::{BoundExpr, EvalContext, FieldExpr, Func};
pub use mesh::{Axis, ParamMesh, StencilTerm};
pub use spacetime::{
    CausalClass, Christoffel, MetricField, MetricModel, ModelKind, Riemann, VectorField,
    VectorFieldSpec,
};
pub use immersion::{
    classify_submanifold, Ambient, ImmersedSubmanifold, MeanCurvatureReport, NodeGeometry,
    TrappedTag,
};
pub use identities::{
    div_s, divergence_identity_residual, random_polynomial_field, tangential_divergence, verify_integral_formula,
    IdentityReport,
};
pub use static_graphs::{GraphFunction, LaplacianReport, StaticModel};
pub use solver::{
    inequality_solution_check, necessary_condition, residual, solve, Domain, GraphEnergy,
    InequalityReport, ProblemSpec, SolverConfig, SolverResult, Verdict,
};
pub use initial_data::{
    normal_flow_margin, stationarity_obstruction, ConstraintReport, Definiteness,
    DefinitenessReport, FlowMargins, InitialDataSet, ObstructionConclusion, ObstructionReport,
};
pub use symmetry::{
    analyze_vector_field, theorem_applicability, Certification, FormSign, Orientation, Region,
    SymmetryClass, SymmetryReport, TheoremId, TheoremVerdict,
};
pub use suite::{run_criterion, run_numerical, run_suite, CriterionResult, SuiteReport};
