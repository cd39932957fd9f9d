use std::f64::consts::PI;

use proptest::prelude::*;
use spacelab::{
    solve, Ambient, Domain, FieldExpr, ImmersedSubmanifold, MetricModel, ParamMesh, ProblemSpec, StaticModel,
    TrappedTag, Verdict,
};

fn torus(shift: [f64; 4], n: usize) -> ImmersedSubmanifold {
    let mesh = ParamMesh::periodic_box(&[n, n], &[2.0 * PI, 2.0 * PI]).unwrap();
    let model = MetricModel::minkowski(&["t", "x", "y", "z"]).unwrap();
    let base = [
        "0.1*sin(a)*cos(b)",
        "(2+0.5*cos(b))*cos(a)",
        "(2+0.5*cos(b))*sin(a)",
        "0.5*sin(b)+0.1*cos(2*a)",
    ];
    let map: Vec<FieldExpr> = base
        .iter()
        .zip(shift)
        .map(|(s, c)| FieldExpr::parse(&format!("{c}+{s}")).unwrap())
        .collect();
    ImmersedSubmanifold::from_map(mesh, Ambient::Lorentzian(model), &["a", "b"], &map).unwrap()
}

fn norms(s: &ImmersedSubmanifold) -> Vec<f64> {
    s.geometry()
        .iter()
        .map(|g| {
            let h = &g.mean_curvature;
            (0..4).map(|a| (0..4).map(|b| g.ambient_metric[(a, b)] * h[a] * h[b]).sum::<f64>()).sum()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn translations_leave_mean_curvature_norm_unchanged(
        t in -3.0f64..3.0, x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0,
    ) {
        let reference = norms(&torus([0.0; 4], 24));
        let moved = norms(&torus([t, x, y, z], 24));
        for (a, b) in reference.iter().zip(&moved) {
            prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn slices_of_static_models_are_extremal(level in -2.0f64..2.0, amp in 0.0f64..0.5) {
        let mesh = ParamMesh::periodic_box(&[16, 16], &[1.0, 1.0]).unwrap();
        let lapse = FieldExpr::parse(&format!("1+{amp}*sin(2*pi*x1)*cos(2*pi*x2)")).unwrap();
        let flat = vec![vec![FieldExpr::one(), FieldExpr::zero()], vec![FieldExpr::zero(), FieldExpr::one()]];
        let model = StaticModel::new(mesh, &["t", "x1", "x2"], lapse, flat).unwrap();
        let g = model.graph(vec![level; 256]).unwrap();
        let s = model.graph_immersion(&g).unwrap();
        prop_assert_eq!(s.mean_curvature_vector(None).unwrap().tag, TrappedTag::Extremal);
    }
}

#[test]
fn solver_output_is_reproducible() {
    let run = || {
        let mesh = ParamMesh::periodic_box(&[16, 16], &[1.0, 1.0]).unwrap();
        let flat = vec![vec![FieldExpr::one(), FieldExpr::zero()], vec![FieldExpr::zero(), FieldExpr::one()]];
        let model = StaticModel::new(mesh, &["t", "x1", "x2"], FieldExpr::parse("1+0.3*sin(2*pi*x1)").unwrap(), flat)
            .unwrap();
        let init = model
            .mesh()
            .sample(|p| Ok(0.01 * (2.0 * PI * p[0]).cos() * (2.0 * PI * p[1]).sin()))
            .unwrap();
        let spec = ProblemSpec::new(model, Domain::Closed, vec![0.0; 256]).unwrap().with_init(init);
        solve(&spec).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.verdict, Verdict::Converged);
    assert_eq!(a.u, b.u);
    assert_eq!(a.residual_history, b.residual_history);
}
