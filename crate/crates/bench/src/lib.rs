//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;

use spacelab::{
    Ambient, Domain, FieldExpr, ImmersedSubmanifold, MetricModel, ParamMesh, ProblemSpec, StaticModel, VectorFieldSpec,
};

fn e(s: &str) -> FieldExpr {
    FieldExpr::parse(s).expect("fixture expressions parse")
}

/// A wavy torus of revolution in Minkowski space on an `n × n` mesh.
pub fn wavy_torus(n: usize) -> ImmersedSubmanifold {
    let mesh = ParamMesh::periodic_box(&[n, n], &[2.0 * PI, 2.0 * PI]).expect("valid mesh");
    let model = MetricModel::minkowski(&["t", "x", "y", "z"]).expect("valid model");
    let map = [
        "0.1*sin(a)*cos(b)+0.05*cos(2*a)",
        "(2+0.5*cos(b))*cos(a)",
        "(2+0.5*cos(b))*sin(a)",
        "0.5*sin(b)",
    ]
    .map(e);
    ImmersedSubmanifold::from_map(mesh, Ambient::Lorentzian(model), &["a", "b"], &map).expect("spacelike torus")
}

/// A quadratic vector field in `(t, x, y, z)`.
pub fn quadratic_field() -> VectorFieldSpec {
    VectorFieldSpec::parse(&["1+x*y", "t*z", "x^2-y", "0.5*t+z"]).expect("field parses")
}

/// Maximal graph problem on an `n × n` torus from a wavy start.
pub fn maximal_problem(n: usize) -> ProblemSpec {
    let mesh = ParamMesh::periodic_box(&[n, n], &[1.0, 1.0]).expect("valid mesh");
    let flat = vec![vec![e("1"), e("0")], vec![e("0"), e("1")]];
    let model = StaticModel::new(mesh, &["t", "x1", "x2"], e("1+0.3*sin(2*pi*x1)"), flat).expect("valid model");
    let init = model
        .mesh()
        .sample(|p| Ok(0.01 * (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).cos()))
        .expect("finite samples");
    let len = init.len();
    ProblemSpec::new(model, Domain::Closed, vec![0.0; len]).expect("valid problem").with_init(init)
}
