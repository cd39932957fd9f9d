//! Spacelike graphs in standard static spacetimes `-h dt² + g₀`.
//!
//! For a graph `t = u(x)` the future unit normal is
//! `N = (∇⁰u + ∂_t / h) / √(1/h - |∇⁰u|²)` and the mean curvature function
//! `H = ḡ(H⃗, N)` has the divergence form
//! `H = div₀F + g₀(F, ½∇⁰log h) = h^{-1/2} div₀(√h F)`,
//! `F = ∇⁰u / √(1/h - |∇⁰u|²)`. It linearizes to `Δ₀u` for `h = 1`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::expr::{BoundExpr, FieldExpr};
use crate::immersion::{Ambient, ImmersedSubmanifold};
use crate::mesh::ParamMesh;
use crate::spacetime::{dot, MetricModel};

/// Graphs closer than this to null are rejected.
pub const DELTA_MARGIN: f64 = 1e-6;

/// Base data at one mesh node.
#[derive(Debug, Clone)]
pub struct BaseNode {
    pub h: f64,
    /// `∂_i log h`.
    pub dlog_h: Vec<f64>,
    pub g0: DMatrix<f64>,
    pub g0_inv: DMatrix<f64>,
    pub sqrt_det: f64,
}

/// A standard static spacetime sampled over a base mesh whose parameters
/// are the spatial coordinates.
#[derive(Debug, Clone)]
pub struct StaticModel {
    mesh: ParamMesh,
    spacetime: MetricModel,
    h_expr: FieldExpr,
    h_full: BoundExpr,
    dh_full: Vec<BoundExpr>,
    base: Vec<BaseNode>,
}

impl StaticModel {
    /// `coords[0]` is time; the remaining names are the base coordinates,
    /// matched to mesh axes in order.
    pub fn new(mesh: ParamMesh, coords: &[&str], h: FieldExpr, g0: Vec<Vec<FieldExpr>>) -> Result<Self> {
        let n = mesh.dim();
        if coords.len() != n + 1 {
            return Err(GeomError::Invalid(format!(
                "static model over a {n}-dimensional base needs {} coordinates",
                n + 1
            )));
        }
        let spacetime = MetricModel::standard_static(coords, h.clone(), g0.clone())?;
        let full: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        let h_full = h.bind(&full)?;
        let dh_full = full
            .iter()
            .map(|c| h.differentiate(c).bind(&full))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let base_field = crate::spacetime::MetricField::new(&coords[1..], g0)?;
        let spatial: Vec<String> = full[1..].to_vec();
        let h_base = h.bind(&spatial)?;
        let dh_base = spatial
            .iter()
            .map(|c| h.differentiate(c).bind(&spatial))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let base = (0..mesh.len())
            .into_par_iter()
            .map(|i| {
                let x = mesh.coord(i);
                let hv = h_base.eval(&x)?;
                if !(hv > 0.0) {
                    return Err(GeomError::NonPositiveDensity { node: i, value: hv });
                }
                let g0 = base_field.components_at(&x)?;
                let chol = g0.clone().cholesky().ok_or_else(|| {
                    let (negative, positive, degenerate) = crate::spacetime::inertia(&g0);
                    GeomError::Signature {
                        point: x.clone(),
                        negative,
                        positive,
                        degenerate,
                        expected: "(+,...,+)",
                    }
                })?;
                let sqrt_det = g0.determinant().sqrt();
                Ok(BaseNode {
                    h: hv,
                    dlog_h: dh_base
                        .iter()
                        .map(|d| d.eval(&x).map(|v| v / hv))
                        .collect::<std::result::Result<_, _>>()?,
                    g0_inv: chol.inverse(),
                    g0,
                    sqrt_det,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StaticModel {
            mesh,
            spacetime,
            h_expr: h,
            h_full,
            dh_full,
            base,
        })
    }

    pub fn mesh(&self) -> &ParamMesh {
        &self.mesh
    }

    pub fn spacetime(&self) -> &MetricModel {
        &self.spacetime
    }

    pub fn base(&self) -> &[BaseNode] {
        &self.base
    }

    pub fn lapse_expr(&self) -> &FieldExpr {
        &self.h_expr
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    /// `h` at an ambient point.
    pub fn h_at(&self, p: &[f64]) -> Result<f64> {
        Ok(self.h_full.eval(p)?)
    }

    fn dh_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.dh_full
            .iter()
            .map(|d| d.eval(p).map_err(GeomError::from))
            .collect()
    }

    /// Density `√h √det g₀` of the graph area functional's first variation.
    pub fn solver_density(&self) -> Vec<f64> {
        self.base.iter().map(|b| b.h.sqrt() * b.sqrt_det).collect()
    }

    /// Sample `u` on the base mesh and derive gradient and margin.
    pub fn graph(&self, u: Vec<f64>) -> Result<GraphFunction> {
        if u.len() != self.mesh.len() {
            return Err(GeomError::Invalid("graph values do not match the base mesh".into()));
        }
        let n = self.dim();
        let partials: Vec<Vec<f64>> = (0..n).map(|k| self.mesh.fd_partial(&u, k)).collect();
        let mut grad = Vec::with_capacity(u.len());
        let mut margin = Vec::with_capacity(u.len());
        for (i, b) in self.base.iter().enumerate() {
            let du: Vec<f64> = (0..n).map(|k| partials[k][i]).collect();
            let g: Vec<f64> = (0..n)
                .map(|a| (0..n).map(|c| b.g0_inv[(a, c)] * du[c]).sum())
                .collect();
            let norm2: f64 = du.iter().zip(&g).map(|(a, c)| a * c).sum();
            margin.push(1.0 - b.h * norm2);
            grad.push(g);
        }
        Ok(GraphFunction { u, grad, margin })
    }

    /// Sample an expression in the base coordinates.
    pub fn graph_from_expr(&self, u: &FieldExpr) -> Result<GraphFunction> {
        let names: Vec<String> = self.spacetime.coords()[1..].to_vec();
        let b = u.bind(&names)?;
        let values = self.mesh.sample(|x| Ok(b.eval(x)?))?;
        self.graph(values)
    }

    /// Hyperbolic angle `cosh θ = 1/√(1 - h|∇⁰u|²)` against `∂_t/√h`.
    pub fn hyperbolic_angle(&self, g: &GraphFunction) -> Result<Vec<f64>> {
        g.require_spacelike()?;
        Ok(g.margin.iter().map(|m| 1.0 / m.sqrt()).collect())
    }

    /// Future-pointing unit normal as ambient vectors `(N^t, N^x...)`.
    pub fn unit_normal(&self, g: &GraphFunction) -> Result<Vec<Vec<f64>>> {
        g.require_spacelike()?;
        Ok(self
            .base
            .iter()
            .zip(&g.grad)
            .zip(&g.margin)
            .map(|((b, grad), m)| {
                let s = (m / b.h).sqrt();
                std::iter::once(1.0 / (b.h * s))
                    .chain(grad.iter().map(|v| v / s))
                    .collect()
            })
            .collect())
    }

    /// Mean curvature `H = ḡ(H⃗, N)` by central differences of the flux `F`.
    pub fn graph_mean_curvature(&self, g: &GraphFunction) -> Result<Vec<f64>> {
        g.require_spacelike()?;
        let n = self.dim();
        let flux: Vec<Vec<f64>> = self
            .base
            .iter()
            .zip(&g.grad)
            .zip(&g.margin)
            .map(|((b, grad), m)| {
                let s = (m / b.h).sqrt();
                grad.iter().map(|v| v / s).collect()
            })
            .collect();
        let mut div = vec![0.0; self.mesh.len()];
        for k in 0..n {
            let w: Vec<f64> = flux.iter().zip(&self.base).map(|(f, b)| b.sqrt_det * f[k]).collect();
            for (d, v) in div.iter_mut().zip(self.mesh.fd_partial(&w, k)) {
                *d += v;
            }
        }
        Ok(div
            .into_iter()
            .zip(&self.base)
            .zip(&flux)
            .map(|((d, b), f)| {
                let log_term: f64 = (0..n).map(|k| f[k] * b.dlog_h[k]).sum();
                d / b.sqrt_det + 0.5 * log_term
            })
            .collect())
    }

    /// The graph as an immersion `x ↦ (u(x), x)` in the static spacetime.
    pub fn graph_immersion(&self, g: &GraphFunction) -> Result<ImmersedSubmanifold> {
        let n = self.dim();
        let nodes: Vec<Vec<f64>> = g
            .u
            .iter()
            .enumerate()
            .map(|(i, &u)| std::iter::once(u).chain(self.mesh.coord(i)).collect())
            .collect();
        let shifts: Vec<Vec<f64>> = self
            .mesh
            .axes()
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let mut s = vec![0.0; n + 1];
                if a.periodic {
                    s[k + 1] = a.length;
                }
                s
            })
            .collect();
        ImmersedSubmanifold::from_nodes(
            self.mesh.clone(),
            Ambient::Lorentzian(self.spacetime.clone()),
            nodes,
            shifts,
        )
    }

    /// `Δτ` of `τ = t∘x` on `(S, g)` next to the closed-form expressions.
    pub fn laplacian_tau(&self, imm: &ImmersedSubmanifold) -> Result<LaplacianReport> {
        let n = imm.dim();
        let parts = self.tau_parts(imm)?;
        let lhs = weighted_laplacian(imm, &vec![1.0; imm.mesh().len()], &vec![1.0; imm.mesh().len()]);
        let rhs: Vec<f64> = parts
            .iter()
            .map(|p| p.dh_tangent / (p.h * p.h) + p.flux / p.h)
            .collect();
        let lapse: Vec<f64> = parts
            .iter()
            .map(|p| p.dh_tangent / (p.h * p.h) + n as f64 * p.flux / p.h)
            .collect();
        let literal: Vec<f64> = parts
            .iter()
            .map(|p| 2.0 * p.dh_tangent / p.h.powi(3) + n as f64 * p.flux / (p.h * p.h))
            .collect();
        Ok(LaplacianReport::new(
            lhs,
            rhs,
            vec![
                ("flux coefficient n (lapse sqrt(h) read as h)", lapse),
                ("coefficients 2/h^3 and n/h^2", literal),
            ],
            imm.mesh().max_spacing(),
        ))
    }

    /// `Δ̃τ` under `g̃ = h^{2/(n-2)} g`, the conformal metric built from the
    /// lapse `√h`. Needs `n ≥ 3`.
    pub fn conformal_laplacian_tau(&self, imm: &ImmersedSubmanifold) -> Result<LaplacianReport> {
        let n = imm.dim();
        if n < 3 {
            return Err(GeomError::UnsupportedDimension(n));
        }
        let parts = self.tau_parts(imm)?;
        let nf = n as f64;
        let conformal = |power: f64| -> Vec<f64> {
            // ω = h^power; Δ̃τ = ω^{-n/2} / √g ∂_i(ω^{(n-2)/2} √g g^{ij} ∂_j τ)
            let outer: Vec<f64> = parts.iter().map(|p| p.h.powf(-power * nf / 2.0)).collect();
            let inner: Vec<f64> = parts.iter().map(|p| p.h.powf(power * (nf - 2.0) / 2.0)).collect();
            weighted_laplacian(imm, &inner, &outer)
        };
        let lhs = conformal(2.0 / (nf - 2.0));
        let rhs: Vec<f64> = parts
            .iter()
            .map(|p| p.h.powf(-nf / (nf - 2.0)) * p.flux)
            .collect();
        let lapse: Vec<f64> = rhs.iter().map(|v| nf * v).collect();
        let lhs_literal = conformal(4.0 / (nf - 2.0));
        let literal: Vec<f64> = parts
            .iter()
            .map(|p| nf * p.h.powf(-2.0 * nf / (nf - 2.0)) * p.flux)
            .collect();
        let literal_residual: Vec<f64> = lhs_literal.iter().zip(&literal).map(|(a, b)| a - b).collect();
        let mut report = LaplacianReport::new(
            lhs,
            rhs,
            vec![("flux coefficient n", lapse)],
            imm.mesh().max_spacing(),
        );
        report.variants.push(Variant {
            reading: "flux coefficient n with conformal factor h^{4/(n-2)}",
            max_residual: max_abs(&literal_residual),
        });
        report.rhs_integral = imm.integrate(&report.rhs_with_conformal_volume(&parts, nf));
        Ok(report)
    }

    fn tau_parts(&self, imm: &ImmersedSubmanifold) -> Result<Vec<TauParts>> {
        let m = imm.ambient().dim();
        if m != self.spacetime.dim() {
            return Err(GeomError::Invalid("immersion does not live in this static model".into()));
        }
        let dt: Vec<f64> = (0..m).map(|a| if a == 0 { 1.0 } else { 0.0 }).collect();
        imm.geometry()
            .par_iter()
            .map(|g| {
                let h = self.h_at(&g.point)?;
                let dh = self.dh_at(&g.point)?;
                let tan = g.tangential_part(&dt);
                Ok(TauParts {
                    h,
                    dh_tangent: tan.iter().zip(&dh).map(|(a, b)| a * b).sum(),
                    flux: dot(&g.ambient_metric, &g.mean_curvature, &dt),
                })
            })
            .collect()
    }
}

struct TauParts {
    h: f64,
    /// `∂_t^T(h)`.
    dh_tangent: f64,
    /// `ḡ(H⃗, ∂_t)`.
    flux: f64,
}

/// `outer / √g ∂_i(inner √g g^{ij} ∂_j τ)` with `∂_j τ` the time component
/// of the discrete tangents.
fn weighted_laplacian(imm: &ImmersedSubmanifold, inner: &[f64], outer: &[f64]) -> Vec<f64> {
    let n = imm.dim();
    let geo = imm.geometry();
    let mut div = vec![0.0; geo.len()];
    for i in 0..n {
        let w: Vec<f64> = geo
            .iter()
            .zip(inner)
            .map(|(g, s)| s * g.density * (0..n).map(|j| g.metric_inv[(i, j)] * g.tangents[j][0]).sum::<f64>())
            .collect();
        for (d, v) in div.iter_mut().zip(imm.mesh().fd_partial(&w, i)) {
            *d += v;
        }
    }
    div.iter()
        .zip(geo)
        .zip(outer)
        .map(|((d, g), o)| o * d / g.density)
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

#[derive(Debug, Clone, Serialize)]
pub struct Variant {
    pub reading: &'static str,
    pub max_residual: f64,
}


#[derive(Debug, Clone, Serialize)]
pub struct LaplacianReport {
    #[serde(skip)]
    pub lhs: Vec<f64>,
    #[serde(skip)]
    pub rhs: Vec<f64>,
    pub max_residual: f64,
    pub max_rhs: f64,
    pub spacing: f64,
    /// Residuals of alternative coefficient readings against the same lhs.
    pub variants: Vec<Variant>,
    /// `∫ rhs dṼ` (conformal case only), which vanishes on closed graphs.
    pub rhs_integral: f64,
}

impl LaplacianReport {
    fn new(lhs: Vec<f64>, rhs: Vec<f64>, variants: Vec<(&'static str, Vec<f64>)>, spacing: f64) -> Self {
        let residual = |r: &[f64]| -> f64 { max_abs(&lhs.iter().zip(r).map(|(a, b)| a - b).collect::<Vec<_>>()) };
        let variants = variants
            .iter()
            .map(|(reading, r)| Variant {
                reading,
                max_residual: residual(r),
            })
            .collect();
        LaplacianReport {
            max_residual: residual(&rhs),
            max_rhs: max_abs(&rhs),
            lhs,
            rhs,
            spacing,
            variants,
            rhs_integral: 0.0,
        }
    }

    fn rhs_with_conformal_volume(&self, parts: &[TauParts], n: f64) -> Vec<f64> {
        // dṼ = h^{n/(n-2)} dV
        self.rhs
            .iter()
            .zip(parts)
            .map(|(r, p)| r * p.h.powf(n / (n - 2.0)))
            .collect()
    }
}

/// Nodal graph values with `g₀`-gradient and spacelike margin.
#[derive(Debug, Clone)]
pub struct GraphFunction {
    pub u: Vec<f64>,
    /// `∇⁰u` (contravariant).
    pub grad: Vec<Vec<f64>>,
    /// `1 - h|∇⁰u|²`.
    pub margin: Vec<f64>,
}

impl GraphFunction {
    pub fn min_margin(&self) -> f64 {
        self.margin.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(margin > δ everywhere, min margin)`.
    pub fn spacelike_check(&self) -> (bool, f64) {
        let m = self.min_margin();
        (m > DELTA_MARGIN, m)
    }

    fn require_spacelike(&self) -> Result<()> {
        match self
            .margin
            .iter()
            .enumerate()
            .find(|(_, &m)| !(m > DELTA_MARGIN))
        {
            Some((node, &margin)) => Err(GeomError::GraphNotSpacelike { node, margin }),
            None => Ok(()),
        }
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

    fn flat(n: usize) -> Vec<Vec<FieldExpr>> {
        (0..n)
            .map(|i| (0..n).map(|j| FieldExpr::constant(if i == j { 1.0 } else { 0.0 })).collect())
            .collect()
    }

    fn torus_model(nodes: usize, h: &str) -> StaticModel {
        let mesh = ParamMesh::periodic_box(&[nodes, nodes], &[1.0, 1.0]).unwrap();
        StaticModel::new(mesh, &["t", "x1", "x2"], e(h), flat(2)).unwrap()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn spacelike_margins() {
        let model = torus_model(16, "1");
        let g = model.graph(vec![2.0; 256]).unwrap();
        assert_eq!(g.spacelike_check(), (true, 1.0));
        let mesh = ParamMesh::new(vec![Axis::bounded(16, 0.0, 1.0), Axis::periodic(16, 1.0)]).unwrap();
        let bounded = StaticModel::new(mesh, &["t", "x1", "x2"], e("1"), flat(2)).unwrap();
        let null = bounded.graph_from_expr(&e("x1")).unwrap();
        let (ok, m) = null.spacelike_check();
        assert!(!ok && m.abs() < 1e-12);
        assert!(matches!(bounded.hyperbolic_angle(&null), Err(GeomError::GraphNotSpacelike { .. })));
        let half = bounded.graph_from_expr(&e("0.5*x1")).unwrap();
        assert!((half.min_margin() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_lapse() {
        let mesh = ParamMesh::periodic_box(&[8, 8], &[1.0, 1.0]).unwrap();
        let err = StaticModel::new(mesh, &["t", "x1", "x2"], e("sin(2*pi*x1)"), flat(2)).unwrap_err();
        assert!(matches!(err, GeomError::NonPositiveDensity { .. }));
    }

    #[test]
    fn hyperbolic_angle_values() {
        let mesh = ParamMesh::new(vec![Axis::bounded(16, 0.0, 1.0), Axis::periodic(16, 1.0)]).unwrap();
        let model = StaticModel::new(mesh, &["t", "x1", "x2"], e("1"), flat(2)).unwrap();
        let g = model.graph_from_expr(&e("x1*sqrt(0.5)")).unwrap();
        let c = model.hyperbolic_angle(&g).unwrap();
        assert!(c.iter().all(|v| (v - 2f64.sqrt()).abs() < 1e-12));
        let flat_graph = model.graph(vec![0.3; 256]).unwrap();
        assert!(model.hyperbolic_angle(&flat_graph).unwrap().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn unit_normal_is_unit_future_and_orthogonal() {
        let model = torus_model(32, "1+0.3*sin(2*pi*x1)");
        let g = model
            .graph_from_expr(&e("0.05*sin(2*pi*x1)*cos(2*pi*x2)+0.02*cos(4*pi*x2)"))
            .unwrap();
        let normals = model.unit_normal(&g).unwrap();
        let imm = model.graph_immersion(&g).unwrap();
        let angles = model.hyperbolic_angle(&g).unwrap();
        for ((nv, geo), (b, c)) in normals.iter().zip(imm.geometry()).zip(model.base().iter().zip(&angles)) {
            assert!((dot(&geo.ambient_metric, nv, nv) + 1.0).abs() < 1e-9);
            assert!(nv[0] > 0.0);
            for t in &geo.tangents {
                assert!(dot(&geo.ambient_metric, nv, t).abs() < 1e-9);
            }
            // cosh θ = -ḡ(N, ∂_t/√h)
            let observer = [1.0 / b.h.sqrt(), 0.0, 0.0];
            assert!((-dot(&geo.ambient_metric, nv, &observer) - c).abs() < 1e-9);
        }
    }

    #[test]
    fn mean_curvature_trivial_cases() {
        let model = torus_model(16, "1+0.3*sin(2*pi*x1)");
        let g = model.graph(vec![1.5; 256]).unwrap();
        assert!(model.graph_mean_curvature(&g).unwrap().iter().all(|v| v.abs() < 1e-14));
        let mesh = ParamMesh::periodic_box(&[16, 16], &[1.0, 1.0]).unwrap();
        let expo = StaticModel::new(mesh, &["t", "x1", "x2"], e("exp(x1)"), flat(2)).unwrap();
        let g = expo.graph(vec![0.0; 256]).unwrap();
        assert!(expo.graph_mean_curvature(&g).unwrap().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn mean_curvature_linearizes_to_laplacian() {
        let eps = 0.01;
        let model = torus_model(64, "1");
        let g = model.graph_from_expr(&e("0.01*sin(2*pi*x1)")).unwrap();
        let h = model.graph_mean_curvature(&g).unwrap();
        let k = (2.0 * PI).powi(2);
        let h2 = model.mesh().max_spacing().powi(2);
        for (i, v) in h.iter().enumerate() {
            let x = model.mesh().coord(i)[0];
            let lin = -eps * k * (2.0 * PI * x).sin();
            assert!((v - lin).abs() < 2.0 * eps * k * (eps * eps * k + k * h2));
        }
    }

    #[test]
    fn mean_curvature_matches_immersion() {
        let run = |n: usize| {
            let model = torus_model(n, "1+0.3*sin(2*pi*x1)");
            let g = model
                .graph_from_expr(&e("0.04*sin(2*pi*x1)*cos(2*pi*x2)+0.015*sin(4*pi*x2+1)"))
                .unwrap();
            let h = model.graph_mean_curvature(&g).unwrap();
            let normals = model.unit_normal(&g).unwrap();
            let imm = model.graph_immersion(&g).unwrap();
            let from_imm: Vec<f64> = imm
                .geometry()
                .iter()
                .zip(&normals)
                .map(|(geo, nv)| dot(&geo.ambient_metric, &geo.mean_curvature, nv))
                .collect();
            max_abs_diff(&h, &from_imm)
        };
        let (a, b) = (run(32), run(64));
        assert!(b < 0.05, "{b}");
        assert!((3.0..5.0).contains(&(a / b)), "ratio {}", a / b);
    }

    #[test]
    fn laplacian_of_time_function() {
        let model = torus_model(16, "1+0.3*sin(2*pi*x1)");
        let slice = model.graph(vec![0.7; 256]).unwrap();
        let rep = model.laplacian_tau(&model.graph_immersion(&slice).unwrap()).unwrap();
        assert!(rep.max_residual < 1e-12 && rep.max_rhs < 1e-12);

        let run = |n: usize| {
            let model = torus_model(n, "1+0.3*sin(2*pi*x1)");
            let g = model.graph_from_expr(&e("0.05*sin(2*pi*x1)*cos(2*pi*x2)")).unwrap();
            model.laplacian_tau(&model.graph_immersion(&g).unwrap()).unwrap()
        };
        let (a, b) = (run(32), run(64));
        let ratio = a.max_residual / b.max_residual;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
        for v in &b.variants {
            assert!(v.max_residual > 100.0 * b.max_residual, "{}: {}", v.reading, v.max_residual);
        }
    }

    #[test]
    fn conformal_laplacian_needs_three_dimensions() {
        let model = torus_model(8, "1");
        let g = model.graph(vec![0.0; 64]).unwrap();
        let imm = model.graph_immersion(&g).unwrap();
        assert_eq!(model.conformal_laplacian_tau(&imm).unwrap_err(), GeomError::UnsupportedDimension(2));
    }

    #[test]
    fn conformal_laplacian_in_three_dimensions() {
        let run = |n: usize| {
            let mesh = ParamMesh::periodic_box(&[n, n, n], &[1.0, 1.0, 1.0]).unwrap();
            let model = StaticModel::new(mesh, &["t", "x1", "x2", "x3"], e("1+0.2*sin(2*pi*x1)"), flat(3)).unwrap();
            let g = model
                .graph_from_expr(&e("0.05*sin(2*pi*x1)*cos(2*pi*x2)+0.03*cos(2*pi*x3)"))
                .unwrap();
            model.conformal_laplacian_tau(&model.graph_immersion(&g).unwrap()).unwrap()
        };
        let (a, b) = (run(12), run(24));
        let ratio = a.max_residual / b.max_residual;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
        assert!(b.rhs_integral.abs() < 1e-10, "{}", b.rhs_integral);
        assert!(b.variants.iter().all(|v| v.max_residual > 10.0 * b.max_residual));
    }
}
