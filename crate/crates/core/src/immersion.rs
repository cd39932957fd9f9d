//! Discretized spacelike immersions: induced metric, second fundamental
//! form, mean curvature vector and trapped-surface classification.
//!
//! The mean curvature vector is `H = -g^{ij} II_ij`. For a round circle or
//! sphere in a Euclidean slice, `II` points inward, so `H` points outward.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::expr::{BoundExpr, FieldExpr};
use crate::mesh::ParamMesh;
use crate::spacetime::{classify_vector, dot, CausalClass, MetricField, MetricModel, EPS_CAUSAL};

/// The ambient manifold of an immersion.
#[derive(Debug, Clone)]
pub enum Ambient {
    Lorentzian(MetricModel),
    Riemannian(MetricField),
}

impl Ambient {
    pub fn field(&self) -> &MetricField {
        match self {
            Ambient::Lorentzian(m) => m.field(),
            Ambient::Riemannian(f) => f,
        }
    }

    pub fn dim(&self) -> usize {
        self.field().dim()
    }
}

/// Geometry at one mesh node.
#[derive(Debug, Clone)]
pub struct NodeGeometry {
    pub point: Vec<f64>,
    /// `∂_i x` for each parameter axis.
    pub tangents: Vec<Vec<f64>>,
    pub ambient_metric: DMatrix<f64>,
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    /// `√det g`.
    pub density: f64,
    /// `II_ij` stored at `i * n + j`.
    pub second_fundamental: Vec<Vec<f64>>,
    pub mean_curvature: Vec<f64>,
}

impl NodeGeometry {
    pub fn second_fundamental_at(&self, i: usize, j: usize) -> &[f64] {
        &self.second_fundamental[i * self.tangents.len() + j]
    }

    /// Orthogonal projection of an ambient vector onto the tangent space.
    pub fn tangential_part(&self, v: &[f64]) -> Vec<f64> {
        project_tangential(&self.ambient_metric, &self.tangents, &self.metric_inv, v)
    }

    /// Coordinates `c^i = g^{ij} ḡ(v, ∂_j x)` of the tangential part.
    pub fn tangential_coords(&self, v: &[f64]) -> Vec<f64> {
        let n = self.tangents.len();
        let b: Vec<f64> = self.tangents.iter().map(|t| dot(&self.ambient_metric, v, t)).collect();
        (0..n)
            .map(|i| (0..n).map(|j| self.metric_inv[(i, j)] * b[j]).sum())
            .collect()
    }
}

fn project_tangential(gbar: &DMatrix<f64>, tangents: &[Vec<f64>], ginv: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let n = tangents.len();
    let m = v.len();
    let b: Vec<f64> = tangents.iter().map(|t| dot(gbar, v, t)).collect();
    let mut out = vec![0.0; m];
    for i in 0..n {
        let c: f64 = (0..n).map(|j| ginv[(i, j)] * b[j]).sum();
        for a in 0..m {
            out[a] += c * tangents[i][a];
        }
    }
    out
}

/// A spacelike immersion sampled on a parameter mesh.
///
/// Along a periodic axis the map may translate by a fixed ambient vector
/// per period (`shifts[axis]`), which admits graphs and flat tori written in
/// linear coordinates.
#[derive(Debug, Clone)]
pub struct ImmersedSubmanifold {
    mesh: ParamMesh,
    ambient: Ambient,
    nodes: Vec<Vec<f64>>,
    shifts: Vec<Vec<f64>>,
    geometry: Vec<NodeGeometry>,
}

impl ImmersedSubmanifold {
    /// Build from node positions; checks the spacelike condition everywhere.
    pub fn from_nodes(
        mesh: ParamMesh,
        ambient: Ambient,
        nodes: Vec<Vec<f64>>,
        shifts: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = mesh.dim();
        let m = ambient.dim();
        if n >= m {
            return Err(GeomError::Invalid(format!(
                "submanifold dimension {n} must be below ambient dimension {m}"
            )));
        }
        if nodes.len() != mesh.len() || nodes.iter().any(|p| p.len() != m) {
            return Err(GeomError::Invalid("node table does not match mesh and ambient".into()));
        }
        if shifts.len() != n || shifts.iter().any(|s| s.len() != m) {
            return Err(GeomError::Invalid("need one ambient shift vector per axis".into()));
        }
        for (k, a) in mesh.axes().iter().enumerate() {
            if !a.periodic && shifts[k].iter().any(|&v| v != 0.0) {
                return Err(GeomError::Invalid(format!("axis {k} is bounded but has a shift")));
            }
        }
        let geometry = compute_geometry(&mesh, ambient.field(), &nodes, &shifts)?;
        Ok(ImmersedSubmanifold {
            mesh,
            ambient,
            nodes,
            shifts,
            geometry,
        })
    }

    /// Sample an analytic map given as `m` expressions in the named
    /// parameters. Per-period shifts are detected from the map itself.
    pub fn from_map(mesh: ParamMesh, ambient: Ambient, params: &[&str], map: &[FieldExpr]) -> Result<Self> {
        let n = mesh.dim();
        if params.len() != n {
            return Err(GeomError::Invalid(format!(
                "map has {} parameters, mesh has {n} axes",
                params.len()
            )));
        }
        if map.len() != ambient.dim() {
            return Err(GeomError::Invalid(format!(
                "map has {} components, ambient dimension is {}",
                map.len(),
                ambient.dim()
            )));
        }
        let names: Vec<String> = params.iter().map(|s| s.to_string()).collect();
        let bound = map
            .iter()
            .map(|e| e.bind(&names))
            .collect::<std::result::Result<Vec<BoundExpr>, _>>()?;
        let eval = |p: &[f64]| -> Result<Vec<f64>> {
            bound.iter().map(|b| b.eval(p).map_err(GeomError::from)).collect()
        };
        let nodes = (0..mesh.len())
            .into_par_iter()
            .map(|i| eval(&mesh.coord(i)))
            .collect::<Result<Vec<_>>>()?;
        let mut shifts = vec![vec![0.0; map.len()]; n];
        for (k, axis) in mesh.axes().iter().enumerate() {
            if !axis.periodic {
                continue;
            }
            let samples = [0, mesh.len() / 3, (2 * mesh.len()) / 3 + 1];
            let mut first: Option<Vec<f64>> = None;
            for &s in &samples {
                let p = mesh.coord(s.min(mesh.len() - 1));
                let mut q = p.clone();
                q[k] += axis.length;
                let a = eval(&p)?;
                let b = eval(&q)?;
                let d: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
                let scale = 1.0 + a.iter().chain(&b).fold(0.0f64, |acc, v| acc.max(v.abs()));
                match &first {
                    None => first = Some(d),
                    Some(f) => {
                        if f.iter().zip(&d).any(|(x, y)| (x - y).abs() > 1e-9 * scale) {
                            return Err(GeomError::Invalid(format!(
                                "map is not periodic up to a translation along axis {k}"
                            )));
                        }
                    }
                }
            }
            let mut shift = first.unwrap_or_default();
            let scale = 1.0 + nodes.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
            for v in shift.iter_mut() {
                if v.abs() <= 1e-12 * scale {
                    *v = 0.0;
                }
            }
            shifts[k] = shift;
        }
        Self::from_nodes(mesh, ambient, nodes, shifts)
    }

    pub fn mesh(&self) -> &ParamMesh {
        &self.mesh
    }

    pub fn ambient(&self) -> &Ambient {
        &self.ambient
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn shifts(&self) -> &[Vec<f64>] {
        &self.shifts
    }

    pub fn geometry(&self) -> &[NodeGeometry] {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    /// Per-node induced metric and density `√det g`.
    pub fn induced_metric(&self) -> (Vec<DMatrix<f64>>, Vec<f64>) {
        (
            self.geometry.iter().map(|g| g.metric.clone()).collect(),
            self.geometry.iter().map(|g| g.density).collect(),
        )
    }

    pub fn densities(&self) -> Vec<f64> {
        self.geometry.iter().map(|g| g.density).collect()
    }

    /// Per-node `II_ij`, ambient-vector valued, stored at `i * n + j`.
    pub fn second_fundamental_form(&self) -> Vec<Vec<Vec<f64>>> {
        self.geometry.iter().map(|g| g.second_fundamental.clone()).collect()
    }

    pub fn mean_curvature_field(&self) -> Vec<Vec<f64>> {
        self.geometry.iter().map(|g| g.mean_curvature.clone()).collect()
    }

    /// `∫_S f dV` with the induced volume element.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.mesh.integrate_density(values, &self.densities())
    }

    pub fn volume(&self) -> f64 {
        self.integrate(&vec![1.0; self.mesh.len()])
    }

    /// Mean curvature vector with causal classification. Requires a
    /// Lorentzian ambient; `tol` overrides the absolute causal tolerance.
    pub fn mean_curvature_vector(&self, tol: Option<f64>) -> Result<MeanCurvatureReport> {
        let model = match &self.ambient {
            Ambient::Lorentzian(m) => m,
            Ambient::Riemannian(_) => {
                return Err(GeomError::Invalid(
                    "causal classification needs a Lorentzian ambient".into(),
                ))
            }
        };
        let classes = self
            .geometry
            .par_iter()
            .map(|g| {
                let f = model.future_field().value_at(&g.point)?;
                Ok(classify_vector(&g.ambient_metric, &f, &g.mean_curvature, tol))
            })
            .collect::<Result<Vec<_>>>()?;
        let squared: Vec<f64> = self
            .geometry
            .iter()
            .map(|g| dot(&g.ambient_metric, &g.mean_curvature, &g.mean_curvature))
            .collect();
        let tag = classify_submanifold(&classes);
        let scale = self.geometry.iter().map(|g| g.ambient_metric.amax()).fold(0.0, f64::max);
        Ok(MeanCurvatureReport {
            vectors: self.mean_curvature_field(),
            classes,
            tag,
            implied: tag.implied(),
            tolerance: tol.unwrap_or(EPS_CAUSAL * scale),
            min_norm_squared: squared.iter().copied().fold(f64::INFINITY, f64::min),
            max_norm_squared: squared.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            max_abs_component: self
                .geometry
                .iter()
                .flat_map(|g| g.mean_curvature.iter())
                .fold(0.0f64, |a, v| a.max(v.abs())),
        })
    }
}

fn compute_geometry(
    mesh: &ParamMesh,
    field: &MetricField,
    nodes: &[Vec<f64>],
    shifts: &[Vec<f64>],
) -> Result<Vec<NodeGeometry>> {
    let n = mesh.dim();
    let m = field.dim();
    let apply = |node: usize, axis: usize, values: &dyn Fn(usize) -> Vec<f64>, shift: &[f64]| {
        let mut out = vec![0.0; m];
        for t in mesh.first_stencil(node, axis) {
            let v = values(t.node);
            for a in 0..m {
                out[a] += t.coeff * (v[a] + t.wraps as f64 * shift[a]);
            }
        }
        out
    };
    let zero = vec![0.0; m];
    let tangents: Vec<Vec<Vec<f64>>> = (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|k| apply(i, k, &|j| nodes[j].clone(), &shifts[k]))
                .collect()
        })
        .collect();
    (0..mesh.len())
        .into_par_iter()
        .map(|node| {
            let p = &nodes[node];
            let gbar = field.components_at(p)?;
            let gamma = field.christoffel_at(p)?;
            let tan = &tangents[node];
            let mut g = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = dot(&gbar, &tan[i], &tan[j]);
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
            let eig = SymmetricEigen::new(g.clone());
            let lmax = eig.eigenvalues.amax();
            if eig.eigenvalues.iter().any(|&l| l <= 1e-12 * lmax.max(f64::MIN_POSITIVE)) || lmax == 0.0 {
                return Err(GeomError::NonSpacelike {
                    node,
                    eigenvalues: eig.eigenvalues.iter().copied().collect(),
                });
            }
            let ginv = g
                .clone()
                .cholesky()
                .ok_or_else(|| GeomError::NonSpacelike {
                    node,
                    eigenvalues: eig.eigenvalues.iter().copied().collect(),
                })?
                .inverse();
            let density = g.determinant().sqrt();
            let mut second = vec![zero.clone(); n * n];
            for i in 0..n {
                for j in i..n {
                    // Second derivatives as differences of the discrete
                    // tangents; with a flat ambient this makes the summed
                    // divergence identity hold exactly on closed meshes.
                    let a = apply(node, i, &|q| tangents[q][j].clone(), &zero);
                    let b = apply(node, j, &|q| tangents[q][i].clone(), &zero);
                    let mut d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
                    let corr = gamma.contract(&tan[i], &tan[j]);
                    for a in 0..m {
                        d[a] += corr[a];
                    }
                    let tpart = project_tangential(&gbar, tan, &ginv, &d);
                    let ii: Vec<f64> = d.iter().zip(&tpart).map(|(x, y)| x - y).collect();
                    second[i * n + j] = ii.clone();
                    second[j * n + i] = ii;
                }
            }
            let mut h = vec![0.0; m];
            for i in 0..n {
                for j in 0..n {
                    let c = ginv[(i, j)];
                    for a in 0..m {
                        h[a] -= c * second[i * n + j][a];
                    }
                }
            }
            Ok(NodeGeometry {
                point: p.clone(),
                tangents: tan.clone(),
                ambient_metric: gbar,
                metric: g,
                metric_inv: ginv,
                density,
                second_fundamental: second,
                mean_curvature: h,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrappedTag {
    Extremal,
    FutureTrapped,
    PastTrapped,
    NearlyFutureTrapped,
    NearlyPastTrapped,
    MarginallyFutureTrapped,
    MarginallyPastTrapped,
    WeaklyFutureTrapped,
    WeaklyPastTrapped,
    Mixed,
}

impl TrappedTag {
    pub fn name(self) -> &'static str {
        match self {
            Self::Extremal => "extremal",
            Self::FutureTrapped => "future_trapped",
            Self::PastTrapped => "past_trapped",
            Self::NearlyFutureTrapped => "nearly_future_trapped",
            Self::NearlyPastTrapped => "nearly_past_trapped",
            Self::MarginallyFutureTrapped => "marginally_future_trapped",
            Self::MarginallyPastTrapped => "marginally_past_trapped",
            Self::WeaklyFutureTrapped => "weakly_future_trapped",
            Self::WeaklyPastTrapped => "weakly_past_trapped",
            Self::Mixed => "mixed",
        }
    }

    /// Weaker tags that also hold whenever this one does.
    pub fn implied(self) -> Vec<TrappedTag> {
        use TrappedTag::*;
        match self {
            FutureTrapped => vec![NearlyFutureTrapped, WeaklyFutureTrapped],
            PastTrapped => vec![NearlyPastTrapped, WeaklyPastTrapped],
            NearlyFutureTrapped | MarginallyFutureTrapped => vec![WeaklyFutureTrapped],
            NearlyPastTrapped | MarginallyPastTrapped => vec![WeaklyPastTrapped],
            _ => vec![],
        }
    }

    pub fn is_future_nearly_or_stronger(self) -> bool {
        matches!(self, Self::FutureTrapped | Self::NearlyFutureTrapped)
    }
}

/// Global tag from per-node causal classes, strongest first.
pub fn classify_submanifold(classes: &[CausalClass]) -> TrappedTag {
    use CausalClass::*;
    let all = |f: &dyn Fn(CausalClass) -> bool| classes.iter().all(|&c| f(c));
    let any = |f: &dyn Fn(CausalClass) -> bool| classes.iter().any(|&c| f(c));
    if all(&|c| c == Zero) {
        return TrappedTag::Extremal;
    }
    if all(&|c| c == FutureTimelike) {
        return TrappedTag::FutureTrapped;
    }
    if all(&|c| c == PastTimelike) {
        return TrappedTag::PastTrapped;
    }
    let future = all(&|c| c.is_future_causal());
    let past = all(&|c| c.is_past_causal());
    if future && any(&|c| c == FutureTimelike) {
        return TrappedTag::NearlyFutureTrapped;
    }
    if past && any(&|c| c == PastTimelike) {
        return TrappedTag::NearlyPastTrapped;
    }
    if all(&|c| matches!(c, FutureLightlike | Zero)) {
        return TrappedTag::MarginallyFutureTrapped;
    }
    if all(&|c| matches!(c, PastLightlike | Zero)) {
        return TrappedTag::MarginallyPastTrapped;
    }
    if future {
        return TrappedTag::WeaklyFutureTrapped;
    }
    if past {
        return TrappedTag::WeaklyPastTrapped;
    }
    TrappedTag::Mixed
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanCurvatureReport {
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    #[serde(skip)]
    pub classes: Vec<CausalClass>,
    pub tag: TrappedTag,
    pub implied: Vec<TrappedTag>,
    pub tolerance: f64,
    pub min_norm_squared: f64,
    pub max_norm_squared: f64,
    pub max_abs_component: f64,
}

impl MeanCurvatureReport {
    /// Number of nodes in each causal class that occurs.
    pub fn class_counts(&self) -> Vec<(CausalClass, usize)> {
        use CausalClass::*;
        [FutureTimelike, PastTimelike, FutureLightlike, PastLightlike, Zero, Spacelike]
            .into_iter()
            .map(|c| (c, self.classes.iter().filter(|&&x| x == c).count()))
            .filter(|&(_, k)| k > 0)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Axis;
    use std::f64::consts::PI;

    fn e(s: &str) -> FieldExpr {
        FieldExpr::parse(s).unwrap()
    }

    fn exprs(list: &[&str]) -> Vec<FieldExpr> {
        list.iter().map(|s| e(s)).collect()
    }

    fn mink(coords: &[&str]) -> Ambient {
        Ambient::Lorentzian(MetricModel::minkowski(coords).unwrap())
    }

    fn flat_torus() -> ImmersedSubmanifold {
        let mesh = ParamMesh::periodic_box(&[16, 16], &[1.0, 1.0]).unwrap();
        ImmersedSubmanifold::from_map(mesh, mink(&["t", "x", "y", "z"]), &["x1", "x2"], &exprs(&["0", "x1", "x2", "0"]))
            .unwrap()
    }

    fn circle(nodes: usize, r: f64) -> ImmersedSubmanifold {
        let mesh = ParamMesh::periodic_box(&[nodes], &[2.0 * PI]).unwrap();
        let map = vec![
            FieldExpr::zero(),
            FieldExpr::constant(r) * e("cos(s)"),
            FieldExpr::constant(r) * e("sin(s)"),
        ];
        ImmersedSubmanifold::from_map(mesh, mink(&["t", "x", "y"]), &["s"], &map).unwrap()
    }

    fn sphere(n: usize, r: f64, ambient: Ambient, t: &str) -> ImmersedSubmanifold {
        let mesh = ParamMesh::new(vec![Axis::bounded(n, 0.3, PI - 0.3), Axis::periodic(n, 2.0 * PI)]).unwrap();
        let rs = format!("{r}");
        let map = exprs(&[
            t,
            &format!("{rs}*sin(th)*cos(ph)"),
            &format!("{rs}*sin(th)*sin(ph)"),
            &format!("{rs}*cos(th)"),
        ]);
        ImmersedSubmanifold::from_map(mesh, ambient, &["th", "ph"], &map).unwrap()
    }

    #[test]
    fn flat_torus_is_extremal() {
        let s = flat_torus();
        assert_eq!(s.shifts()[0], vec![0.0, 1.0, 0.0, 0.0]);
        let (g, d) = s.induced_metric();
        assert!(g.iter().all(|m| (m - DMatrix::identity(2, 2)).amax() < 1e-12));
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let rep = s.mean_curvature_vector(None).unwrap();
        assert_eq!(rep.tag, TrappedTag::Extremal);
        assert!((s.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tilted_graph_metric_and_null_error() {
        let mesh = ParamMesh::periodic_box(&[8, 8], &[1.0, 1.0]).unwrap();
        let s = ImmersedSubmanifold::from_map(mesh.clone(), mink(&["t", "x", "y"]), &["x1", "x2"], &exprs(&["0.3*x1", "x1", "x2"]))
            .unwrap();
        assert!((s.geometry()[5].metric[(0, 0)] - 0.91).abs() < 1e-12);
        let err = ImmersedSubmanifold::from_map(mesh, mink(&["t", "x", "y"]), &["x1", "x2"], &exprs(&["x1", "x1", "x2"]))
            .unwrap_err();
        assert!(matches!(err, GeomError::NonSpacelike { .. }));
    }

    #[test]
    fn dimension_checks() {
        let mesh = ParamMesh::periodic_box(&[8, 8], &[1.0, 1.0]).unwrap();
        let err = ImmersedSubmanifold::from_map(mesh, mink(&["t", "x"]), &["a", "b"], &exprs(&["0", "a"]));
        assert!(err.is_err());
    }

    #[test]
    fn circle_curvature_converges_at_second_order() {
        let r = 1.7;
        // uniform sampling of a circle reproduces 1/r to round-off
        for g in circle(16, r).geometry() {
            let k = dot(&g.ambient_metric, &g.mean_curvature, &g.mean_curvature).sqrt();
            assert!((k - 1.0 / r).abs() < 1e-12);
        }
        // curve with higher harmonics; oracle κ = |x'y'' - y'x''| / |x'|³
        let err = |n: usize| {
            let mesh = ParamMesh::periodic_box(&[n], &[2.0 * PI]).unwrap();
            let map = exprs(&["0", "cos(s)+0.2*cos(2*s)", "sin(s)+0.1*sin(3*s)"]);
            let c = ImmersedSubmanifold::from_map(mesh, mink(&["t", "x", "y"]), &["s"], &map).unwrap();
            c.geometry()
                .iter()
                .zip(c.mesh().coords())
                .map(|(g, p)| {
                    let k = dot(&g.ambient_metric, &g.mean_curvature, &g.mean_curvature).sqrt();
                    let s = p[0];
                    let (x1, y1) = (-s.sin() - 0.4 * (2.0 * s).sin(), s.cos() + 0.3 * (3.0 * s).cos());
                    let (x2, y2) = (-s.cos() - 0.8 * (2.0 * s).cos(), -s.sin() - 0.9 * (3.0 * s).sin());
                    let exact = (x1 * y2 - y1 * x2).abs() / (x1 * x1 + y1 * y1).powf(1.5);
                    (k - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e2 < 5e-2, "error {e2}");
        assert!((3.5..4.5).contains(&(e1 / e2)), "ratio {}", e1 / e2);
        // II points inward, H outward
        let c = circle(64, r);
        for g in c.geometry() {
            let ii = g.second_fundamental_at(0, 0);
            let inward = [0.0, -g.point[1], -g.point[2]];
            assert!(dot(&g.ambient_metric, ii, &inward) > 0.0);
            assert!(dot(&g.ambient_metric, &g.mean_curvature, &g.point) > 0.0);
        }
    }

    #[test]
    fn round_sphere_in_minkowski_slice() {
        let r = 1.3;
        let s = sphere(96, r, mink(&["t", "x", "y", "z"]), "0");
        for g in s.geometry() {
            let norm = dot(&g.ambient_metric, &g.mean_curvature, &g.mean_curvature).sqrt();
            assert!((norm - 2.0 / r).abs() < 0.01 * 2.0 / r);
            assert!(dot(&g.ambient_metric, &g.mean_curvature, &g.point) > 0.0, "H points outward");
            for i in 0..2 {
                for j in 0..2 {
                    for t in &g.tangents {
                        assert!(dot(&g.ambient_metric, g.second_fundamental_at(i, j), t).abs() < 1e-8);
                    }
                }
            }
        }
        assert_eq!(s.mean_curvature_vector(None).unwrap().tag, TrappedTag::Mixed);
    }

    fn expanding() -> Ambient {
        Ambient::Lorentzian(
            MetricModel::custom(
                &["t", "x", "y", "z"],
                vec![
                    exprs(&["-1", "0", "0", "0"]),
                    exprs(&["0", "exp(2*t)", "0", "0"]),
                    exprs(&["0", "0", "exp(2*t)", "0"]),
                    exprs(&["0", "0", "0", "exp(2*t)"]),
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn coordinate_spheres_in_expanding_model() {
        // H = (2/r) n_out - 2 ∂_t at t = 0: past-timelike iff r > 1
        let big = sphere(48, 2.0, expanding(), "0");
        let rep = big.mean_curvature_vector(None).unwrap();
        assert_eq!(rep.tag, TrappedTag::PastTrapped);
        assert_eq!(rep.implied, vec![TrappedTag::NearlyPastTrapped, TrappedTag::WeaklyPastTrapped]);
        for g in big.geometry() {
            assert!((g.mean_curvature[0] + 2.0).abs() < 1e-2);
        }
        let small = sphere(48, 0.5, expanding(), "0");
        assert_eq!(small.mean_curvature_vector(None).unwrap().tag, TrappedTag::Mixed);
    }

    #[test]
    fn isometry_invariance() {
        let r = 0.8;
        let a = sphere(32, r, mink(&["t", "x", "y", "z"]), "0");
        let mesh = a.mesh().clone();
        let map = exprs(&[
            "3.5",
            "0.8*sin(th)*cos(ph) - 2",
            "0.8*sin(th)*sin(ph) + 1.25",
            "0.8*cos(th) + 7",
        ]);
        let b = ImmersedSubmanifold::from_map(mesh, mink(&["t", "x", "y", "z"]), &["th", "ph"], &map).unwrap();
        for (ga, gb) in a.geometry().iter().zip(b.geometry()) {
            let na = dot(&ga.ambient_metric, &ga.mean_curvature, &ga.mean_curvature).sqrt();
            let nb = dot(&gb.ambient_metric, &gb.mean_curvature, &gb.mean_curvature).sqrt();
            assert!((na - nb).abs() < 1e-10);
        }
    }

    #[test]
    fn great_sphere_in_einstein_static_is_totally_geodesic() {
        let model = MetricModel::custom(
            &["t", "chi", "th", "ph"],
            vec![
                exprs(&["-1", "0", "0", "0"]),
                exprs(&["0", "1", "0", "0"]),
                exprs(&["0", "0", "sin(chi)^2", "0"]),
                exprs(&["0", "0", "0", "sin(chi)^2*sin(th)^2"]),
            ],
        )
        .unwrap();
        let mesh = ParamMesh::new(vec![Axis::bounded(32, 0.4, PI - 0.4), Axis::periodic(32, 2.0 * PI)]).unwrap();
        let s = ImmersedSubmanifold::from_map(
            mesh,
            Ambient::Lorentzian(model),
            &["a", "b"],
            &[FieldExpr::zero(), FieldExpr::constant(PI / 2.0), e("a"), e("b")],
        )
        .unwrap();
        for g in s.geometry() {
            assert!(g.second_fundamental.iter().flatten().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn classification_rules() {
        use CausalClass::*;
        assert_eq!(classify_submanifold(&[Zero, Zero]), TrappedTag::Extremal);
        assert_eq!(classify_submanifold(&[FutureLightlike, FutureLightlike]), TrappedTag::MarginallyFutureTrapped);
        assert_eq!(classify_submanifold(&[FutureLightlike, Zero]), TrappedTag::MarginallyFutureTrapped);
        assert_eq!(classify_submanifold(&[FutureTimelike, PastTimelike]), TrappedTag::Mixed);
        assert_eq!(classify_submanifold(&[FutureTimelike, FutureTimelike]), TrappedTag::FutureTrapped);
        assert_eq!(classify_submanifold(&[FutureTimelike, FutureLightlike]), TrappedTag::NearlyFutureTrapped);
        assert_eq!(classify_submanifold(&[PastTimelike, Zero]), TrappedTag::NearlyPastTrapped);
        assert_eq!(classify_submanifold(&[Spacelike, Zero]), TrappedTag::Mixed);
        assert_eq!(TrappedTag::MarginallyPastTrapped.implied(), vec![TrappedTag::WeaklyPastTrapped]);
    }

    #[test]
    fn classification_tolerance_override() {
        let s = circle(16, 1.0);
        let loose = s.mean_curvature_vector(Some(10.0)).unwrap();
        assert_eq!(loose.tag, TrappedTag::Extremal);
        assert_eq!(loose.tolerance, 10.0);
    }
}
