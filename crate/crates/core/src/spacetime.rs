//! Analytic metrics: Christoffel symbols, curvature, Lie derivatives and
//! causal characters.
//!
//! Conventions (all reports repeat them):
//! - signature (-,+,...,+);
//! - `Γ^a_bc = ½ g^{ad}(∂_b g_dc + ∂_c g_db - ∂_d g_bc)`;
//! - `R^a_bcd = ∂_c Γ^a_db - ∂_d Γ^a_cb + Γ^a_ce Γ^e_db - Γ^a_de Γ^e_cb`,
//!   so that `(R(u,v)w)^a = R^a_bcd w^b u^c v^d`;
//! - sectional curvature `K(u,v) = g(R(u,v)v,u) / (g(u,u)g(v,v) - g(u,v)^2)`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::expr::{BoundExpr, FieldExpr};

pub const CURVATURE_CONVENTION: &str =
    "signature (-,+..+); R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb; K = g(R(u,v)v,u)/(g(u,u)g(v,v)-g(u,v)^2)";

/// Relative tolerance for causal classification; multiplied by the local
/// metric scale `max |g_ab|`.
pub const EPS_CAUSAL: f64 = 1e-8;

/// A symmetric metric given by expressions in named coordinates, with its
/// first and second coordinate derivatives prepared symbolically.
/// Signature-agnostic: used both for spacetimes and for Riemannian data.
#[derive(Debug, Clone)]
pub struct MetricField {
    coords: Vec<String>,
    exprs: Vec<Vec<FieldExpr>>,
    g: Vec<BoundExpr>,
    dg: Vec<BoundExpr>,
    ddg: Vec<BoundExpr>,
}

impl MetricField {
    /// `components` must be a square array; only the upper triangle is read
    /// and mirrored, so asymmetric input is rejected instead.
    pub fn new(coords: &[&str], components: Vec<Vec<FieldExpr>>) -> Result<Self> {
        let m = coords.len();
        if m == 0 || components.len() != m || components.iter().any(|r| r.len() != m) {
            return Err(GeomError::Invalid(format!(
                "metric needs a {m}x{m} component array"
            )));
        }
        for a in 0..m {
            for b in (a + 1)..m {
                if components[a][b] != components[b][a] {
                    return Err(GeomError::Invalid(format!(
                        "metric components ({a},{b}) and ({b},{a}) differ"
                    )));
                }
            }
        }
        let coords: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        let bind = |e: &FieldExpr| e.bind(&coords).map_err(GeomError::from);
        let mut g = Vec::with_capacity(m * m);
        let mut dg = Vec::with_capacity(m * m * m);
        let mut ddg = Vec::with_capacity(m * m * m * m);
        for a in 0..m {
            for b in 0..m {
                g.push(bind(&components[a][b])?);
            }
        }
        let mut first = vec![FieldExpr::zero(); m * m * m];
        for c in 0..m {
            for a in 0..m {
                for b in a..m {
                    let d = components[a][b].differentiate(&coords[c]);
                    first[(c * m + a) * m + b] = d.clone();
                    first[(c * m + b) * m + a] = d;
                }
            }
        }
        for e in &first {
            dg.push(bind(e)?);
        }
        let mut second = vec![FieldExpr::zero(); m * m * m * m];
        for c in 0..m {
            for d in c..m {
                for a in 0..m {
                    for b in a..m {
                        let dd = first[(c * m + a) * m + b].differentiate(&coords[d]);
                        for (p, q) in [(c, d), (d, c)] {
                            second[((p * m + q) * m + a) * m + b] = dd.clone();
                            second[((p * m + q) * m + b) * m + a] = dd.clone();
                        }
                    }
                }
            }
        }
        for e in &second {
            ddg.push(bind(e)?);
        }
        Ok(MetricField {
            coords,
            exprs: components,
            g,
            dg,
            ddg,
        })
    }

    /// Diagonal metric from one expression per coordinate.
    pub fn diagonal(coords: &[&str], diag: Vec<FieldExpr>) -> Result<Self> {
        let m = diag.len();
        let mut comps = vec![vec![FieldExpr::zero(); m]; m];
        for (i, d) in diag.into_iter().enumerate() {
            comps[i][i] = d;
        }
        MetricField::new(coords, comps)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn component_exprs(&self) -> &[Vec<FieldExpr>] {
        &self.exprs
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(GeomError::Invalid(format!(
                "point has {} coordinates, metric has {}",
                p.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Component matrix at a point, without any signature check.
    pub fn components_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        let m = self.dim();
        let mut out = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let v = self.g[a * m + b].eval(p)?;
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        Ok(out)
    }

    /// `∂_c g_ab` as `out[c][(a,b)]`.
    pub fn first_derivatives_at(&self, p: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let m = self.dim();
        (0..m)
            .map(|c| {
                let mut d = DMatrix::zeros(m, m);
                for a in 0..m {
                    for b in a..m {
                        let v = self.dg[(c * m + a) * m + b].eval(p)?;
                        d[(a, b)] = v;
                        d[(b, a)] = v;
                    }
                }
                Ok(d)
            })
            .collect()
    }

    fn second_derivative(&self, p: &[f64], c: usize, d: usize, a: usize, b: usize) -> Result<f64> {
        let m = self.dim();
        Ok(self.ddg[((c * m + d) * m + a) * m + b].eval(p)?)
    }

    fn inverse(&self, g: &DMatrix<f64>, p: &[f64]) -> Result<DMatrix<f64>> {
        let scale = g.amax().max(f64::MIN_POSITIVE);
        let lu = g.clone().lu();
        if lu.determinant().abs() <= 1e-14 * scale.powi(g.nrows() as i32) {
            return Err(GeomError::SingularMetric(p.to_vec()));
        }
        lu.try_inverse()
            .ok_or_else(|| GeomError::SingularMetric(p.to_vec()))
    }

    /// Levi-Civita connection coefficients at a point.
    pub fn christoffel_at(&self, p: &[f64]) -> Result<Christoffel> {
        let g = self.components_at(p)?;
        let ginv = self.inverse(&g, p)?;
        let dg = self.first_derivatives_at(p)?;
        Ok(christoffel_from(&ginv, &dg))
    }

    /// Riemann tensor `R^a_bcd` at a point, from exact second derivatives.
    pub fn riemann_at(&self, p: &[f64]) -> Result<Riemann> {
        let m = self.dim();
        let g = self.components_at(p)?;
        let ginv = self.inverse(&g, p)?;
        let dg = self.first_derivatives_at(p)?;
        let gamma = christoffel_from(&ginv, &dg);
        // ∂_e g^{ad} = -g^{ap} ∂_e g_pq g^{qd}
        let dginv: Vec<DMatrix<f64>> = dg.iter().map(|d| -(&ginv * d * &ginv)).collect();
        // dgamma[e][a][b][c] = ∂_e Γ^a_bc
        let mut dgamma = vec![0.0; m * m * m * m];
        for e in 0..m {
            for b in 0..m {
                for c in b..m {
                    // lowered part L_d = ∂_b g_dc + ∂_c g_db - ∂_d g_bc and its e-derivative
                    let mut low = vec![0.0; m];
                    let mut dlow = vec![0.0; m];
                    for d in 0..m {
                        low[d] = dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)];
                        dlow[d] = self.second_derivative(p, e, b, d, c)?
                            + self.second_derivative(p, e, c, d, b)?
                            - self.second_derivative(p, e, d, b, c)?;
                    }
                    for a in 0..m {
                        let mut s = 0.0;
                        for d in 0..m {
                            s += dginv[e][(a, d)] * low[d] + ginv[(a, d)] * dlow[d];
                        }
                        let v = 0.5 * s;
                        dgamma[((e * m + a) * m + b) * m + c] = v;
                        dgamma[((e * m + a) * m + c) * m + b] = v;
                    }
                }
            }
        }
        let dg_at = |e: usize, a: usize, b: usize, c: usize| dgamma[((e * m + a) * m + b) * m + c];
        let mut r = Riemann::zeros(m);
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    for d in (c + 1)..m {
                        let mut v = dg_at(c, a, d, b) - dg_at(d, a, c, b);
                        for e in 0..m {
                            v += gamma.get(a, c, e) * gamma.get(e, d, b)
                                - gamma.get(a, d, e) * gamma.get(e, c, b);
                        }
                        r.set(a, b, c, d, v);
                        r.set(a, b, d, c, -v);
                    }
                }
            }
        }
        Ok(r)
    }

    /// Scalar curvature `g^{bd} R^a_bad`.
    pub fn scalar_curvature_at(&self, p: &[f64]) -> Result<f64> {
        let m = self.dim();
        let g = self.components_at(p)?;
        let ginv = self.inverse(&g, p)?;
        let r = self.riemann_at(p)?;
        let mut s = 0.0;
        for b in 0..m {
            for d in 0..m {
                let mut ric = 0.0;
                for a in 0..m {
                    ric += r.get(a, b, a, d);
                }
                s += ginv[(b, d)] * ric;
            }
        }
        Ok(s)
    }

    /// `(L_X g)_ab = X^c ∂_c g_ab + g_cb ∂_a X^c + g_ac ∂_b X^c`.
    pub fn lie_derivative_at(&self, x: &VectorField, p: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.dim();
        let g = self.components_at(p)?;
        let dg = self.first_derivatives_at(p)?;
        let xv = x.value_at(p)?;
        let jac = x.jacobian_at(p)?;
        let mut out = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let mut s = 0.0;
                for c in 0..m {
                    s += xv[c] * dg[c][(a, b)] + g[(c, b)] * jac[(c, a)] + g[(a, c)] * jac[(c, b)];
                }
                out[(a, b)] = s;
                out[(b, a)] = s;
            }
        }
        Ok(out)
    }

    /// Symbolic Lie derivative of the metric along `x`.
    pub fn lie_derivative_exprs(&self, x: &VectorFieldSpec) -> Result<Vec<Vec<FieldExpr>>> {
        let m = self.dim();
        if x.components.len() != m {
            return Err(GeomError::Invalid("vector field dimension mismatch".into()));
        }
        let mut out = vec![vec![FieldExpr::zero(); m]; m];
        for a in 0..m {
            for b in a..m {
                let mut s = FieldExpr::zero();
                for c in 0..m {
                    s = s + x.components[c].clone() * self.exprs[a][b].differentiate(&self.coords[c]);
                    s = s + self.exprs[c][b].clone() * x.components[c].differentiate(&self.coords[a]);
                    s = s + self.exprs[a][c].clone() * x.components[c].differentiate(&self.coords[b]);
                }
                out[a][b] = s.clone();
                out[b][a] = s;
            }
        }
        Ok(out)
    }

    /// Count (negative, positive, degenerate) eigenvalues at a point.
    pub fn inertia_at(&self, p: &[f64]) -> Result<(usize, usize, usize)> {
        let g = self.components_at(p)?;
        Ok(inertia(&g))
    }
}

pub(crate) fn inertia(g: &DMatrix<f64>) -> (usize, usize, usize) {
    let eig = SymmetricEigen::new(g.clone());
    let scale = eig.eigenvalues.amax();
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut counts = (0, 0, 0);
    for &l in eig.eigenvalues.iter() {
        if l < -tol {
            counts.0 += 1;
        } else if l > tol {
            counts.1 += 1;
        } else {
            counts.2 += 1;
        }
    }
    counts
}

pub(crate) fn christoffel_from(ginv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Christoffel {
    let m = ginv.nrows();
    let mut gamma = Christoffel::zeros(m);
    for b in 0..m {
        for c in b..m {
            let low: Vec<f64> = (0..m)
                .map(|d| dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)])
                .collect();
            for a in 0..m {
                let mut s = 0.0;
                for d in 0..m {
                    s += ginv[(a, d)] * low[d];
                }
                gamma.set(a, b, c, 0.5 * s);
                gamma.set(a, c, b, 0.5 * s);
            }
        }
    }
    gamma
}

/// `Γ^a_bc` stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    m: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(m: usize) -> Self {
        Christoffel {
            m,
            data: vec![0.0; m * m * m],
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.m + b) * self.m + c]
    }

    fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.m + b) * self.m + c] = v;
    }

    /// `Γ^a_bc u^b v^c`.
    pub fn contract(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|a| {
                let mut s = 0.0;
                for b in 0..m {
                    if u[b] == 0.0 {
                        continue;
                    }
                    for c in 0..m {
                        s += self.get(a, b, c) * u[b] * v[c];
                    }
                }
                s
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// `R^a_bcd` stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Riemann {
    m: usize,
    data: Vec<f64>,
}

impl Riemann {
    fn zeros(m: usize) -> Self {
        Riemann {
            m,
            data: vec![0.0; m * m * m * m],
        }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let m = self.m;
        self.data[((a * m + b) * m + c) * m + d]
    }

    fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        let m = self.m;
        self.data[((a * m + b) * m + c) * m + d] = v;
    }

    /// `(R(u,v)w)^a = R^a_bcd w^b u^c v^d`.
    pub fn apply(&self, u: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|a| {
                let mut s = 0.0;
                for b in 0..m {
                    for c in 0..m {
                        for d in 0..m {
                            s += self.get(a, b, c, d) * w[b] * u[c] * v[d];
                        }
                    }
                }
                s
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Vector field components as expressions over the metric's coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSpec {
    pub components: Vec<FieldExpr>,
}

impl VectorFieldSpec {
    pub fn new(components: Vec<FieldExpr>) -> Self {
        VectorFieldSpec { components }
    }

    pub fn parse(components: &[&str]) -> Result<Self> {
        Ok(VectorFieldSpec {
            components: components
                .iter()
                .map(|c| FieldExpr::parse(c))
                .collect::<std::result::Result<_, _>>()?,
        })
    }

    /// The coordinate field `∂_k` in dimension `m`.
    pub fn coordinate(m: usize, k: usize) -> Self {
        VectorFieldSpec {
            components: (0..m)
                .map(|i| if i == k { FieldExpr::one() } else { FieldExpr::zero() })
                .collect(),
        }
    }

    pub fn bind(&self, coords: &[String]) -> Result<VectorField> {
        let m = coords.len();
        if self.components.len() != m {
            return Err(GeomError::Invalid(format!(
                "vector field has {} components, ambient dimension is {m}",
                self.components.len()
            )));
        }
        let comps = self
            .components
            .iter()
            .map(|c| c.bind(coords))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut jac = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in 0..m {
                jac.push(self.components[a].differentiate(&coords[b]).bind(coords)?);
            }
        }
        Ok(VectorField {
            spec: self.clone(),
            comps,
            jac,
        })
    }
}

/// A [`VectorFieldSpec`] bound to coordinates, with its Jacobian.
#[derive(Debug, Clone)]
pub struct VectorField {
    spec: VectorFieldSpec,
    comps: Vec<BoundExpr>,
    jac: Vec<BoundExpr>,
}

impl VectorField {
    pub fn spec(&self) -> &VectorFieldSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn value_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.comps
            .iter()
            .map(|c| c.eval(p).map_err(GeomError::from))
            .collect()
    }

    /// `out[(a,b)] = ∂_b X^a`.
    pub fn jacobian_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.dim();
        let mut out = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                out[(a, b)] = self.jac[a * m + b].eval(p)?;
            }
        }
        Ok(out)
    }

    /// Covariant derivative `(∇_v X)^a = v^b (∂_b X^a + Γ^a_bc X^c)`.
    pub fn covariant_derivative(
        &self,
        p: &[f64],
        gamma: &Christoffel,
        v: &[f64],
    ) -> Result<Vec<f64>> {
        let x = self.value_at(p)?;
        let jac = self.jacobian_at(p)?;
        let m = self.dim();
        let corr = gamma.contract(v, &x);
        Ok((0..m)
            .map(|a| (0..m).map(|b| v[b] * jac[(a, b)]).sum::<f64>() + corr[a])
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Minkowski,
    StandardStatic,
    OrthogonalSplitted,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalClass {
    FutureTimelike,
    PastTimelike,
    FutureLightlike,
    PastLightlike,
    Zero,
    Spacelike,
}

impl CausalClass {
    pub fn is_future_causal(self) -> bool {
        matches!(self, Self::FutureTimelike | Self::FutureLightlike | Self::Zero)
    }

    pub fn is_past_causal(self) -> bool {
        matches!(self, Self::PastTimelike | Self::PastLightlike | Self::Zero)
    }

    pub fn is_timelike(self) -> bool {
        matches!(self, Self::FutureTimelike | Self::PastTimelike)
    }
}

/// A time-oriented Lorentzian metric.
#[derive(Debug, Clone)]
pub struct MetricModel {
    field: MetricField,
    kind: ModelKind,
    future: VectorField,
    parallel_lightlike: bool,
}

impl MetricModel {
    /// Generic model; the future direction defaults to `∂_t` (first coordinate).
    pub fn custom(coords: &[&str], components: Vec<Vec<FieldExpr>>) -> Result<Self> {
        let field = MetricField::new(coords, components)?;
        Self::from_field(field, ModelKind::Custom)
    }

    pub fn from_field(field: MetricField, kind: ModelKind) -> Result<Self> {
        if field.dim() < 2 {
            return Err(GeomError::Invalid("spacetime dimension must be >= 2".into()));
        }
        let future = VectorFieldSpec::coordinate(field.dim(), 0).bind(field.coords())?;
        Ok(MetricModel {
            field,
            kind,
            future,
            parallel_lightlike: false,
        })
    }

    /// `-dt² + Σ dx_i²` in the given coordinates (first is time).
    pub fn minkowski(coords: &[&str]) -> Result<Self> {
        let m = coords.len();
        let diag = (0..m)
            .map(|i| FieldExpr::constant(if i == 0 { -1.0 } else { 1.0 }))
            .collect();
        Self::from_field(MetricField::diagonal(coords, diag)?, ModelKind::Minkowski)
    }

    /// `-h dt² + g₀` with `h` and `g₀` independent of `t = coords[0]`.
    pub fn standard_static(coords: &[&str], h: FieldExpr, g0: Vec<Vec<FieldExpr>>) -> Result<Self> {
        let t = coords[0];
        if h.free_vars().contains(t) || g0.iter().flatten().any(|e| e.free_vars().contains(t)) {
            return Err(GeomError::Invalid(
                "standard static model: h and g0 must not depend on the time coordinate".into(),
            ));
        }
        let comps = block_metric(-h, g0, coords.len())?;
        Self::from_field(MetricField::new(coords, comps)?, ModelKind::StandardStatic)
    }

    /// `-β dt² + g_t`.
    pub fn orthogonal_splitted(coords: &[&str], beta: FieldExpr, gt: Vec<Vec<FieldExpr>>) -> Result<Self> {
        let comps = block_metric(-beta, gt, coords.len())?;
        Self::from_field(MetricField::new(coords, comps)?, ModelKind::OrthogonalSplitted)
    }

    pub fn with_future(mut self, future: VectorFieldSpec) -> Result<Self> {
        self.future = future.bind(self.field.coords())?;
        Ok(self)
    }

    /// Mark the future field as a parallel lightlike field (pp-wave models).
    pub fn with_parallel_lightlike(mut self, flag: bool) -> Self {
        self.parallel_lightlike = flag;
        self
    }

    pub fn has_parallel_lightlike(&self) -> bool {
        self.parallel_lightlike
    }

    pub fn field(&self) -> &MetricField {
        &self.field
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn future_field(&self) -> &VectorField {
        &self.future
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn coords(&self) -> &[String] {
        self.field.coords()
    }

    /// Metric matrix with a Lorentzian signature check.
    pub fn metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.field.components_at(p)?;
        let (neg, pos, deg) = inertia(&g);
        if neg != 1 || deg != 0 {
            return Err(GeomError::Signature {
                point: p.to_vec(),
                negative: neg,
                positive: pos,
                degenerate: deg,
                expected: "(-,+,...,+)",
            });
        }
        Ok(g)
    }

    pub fn christoffel_at(&self, p: &[f64]) -> Result<Christoffel> {
        self.field.christoffel_at(p)
    }

    pub fn riemann_at(&self, p: &[f64]) -> Result<Riemann> {
        self.field.riemann_at(p)
    }

    pub fn lie_derivative_metric(&self, x: &VectorField, p: &[f64]) -> Result<DMatrix<f64>> {
        self.field.lie_derivative_at(x, p)
    }

    /// Classify `v` at `p` against the declared future direction.
    pub fn causal_character(&self, p: &[f64], v: &[f64]) -> Result<CausalClass> {
        let g = self.field.components_at(p)?;
        let f = self.future.value_at(p)?;
        Ok(classify_vector(&g, &f, v, None))
    }

    /// Sampled range of sectional curvature over timelike planes.
    pub fn timelike_sectional_range(
        &self,
        points: &[Vec<f64>],
        planes: &[(Vec<f64>, Vec<f64>)],
    ) -> Result<SectionalRange> {
        if points.is_empty() || planes.is_empty() {
            return Err(GeomError::Invalid("need at least one point and one plane".into()));
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut samples = 0;
        for p in points {
            let g = self.metric_at(p)?;
            let r = self.riemann_at(p)?;
            for (u, v) in planes {
                let k = sectional_curvature(&g, &r, u, v, p, true)?;
                min = min.min(k);
                max = max.max(k);
                samples += 1;
            }
        }
        Ok(SectionalRange {
            min,
            max,
            samples,
            convention: CURVATURE_CONVENTION,
            certification: "sampled, not certified",
        })
    }
}

fn block_metric(gtt: FieldExpr, spatial: Vec<Vec<FieldExpr>>, m: usize) -> Result<Vec<Vec<FieldExpr>>> {
    let n = m - 1;
    if spatial.len() != n || spatial.iter().any(|r| r.len() != n) {
        return Err(GeomError::Invalid(format!(
            "spatial metric must be {n}x{n} for {m} coordinates"
        )));
    }
    let mut comps = vec![vec![FieldExpr::zero(); m]; m];
    comps[0][0] = gtt;
    for (i, row) in spatial.into_iter().enumerate() {
        for (j, e) in row.into_iter().enumerate() {
            comps[i + 1][j + 1] = e;
        }
    }
    Ok(comps)
}

pub(crate) fn dot(g: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let m = g.nrows();
    let mut s = 0.0;
    for a in 0..m {
        if u[a] == 0.0 {
            continue;
        }
        for b in 0..m {
            s += g[(a, b)] * u[a] * v[b];
        }
    }
    s
}

/// Causal class of `v` given metric `g` and future direction `future`.
/// `tol` overrides `EPS_CAUSAL · max|g_ab|`.
pub fn classify_vector(g: &DMatrix<f64>, future: &[f64], v: &[f64], tol: Option<f64>) -> CausalClass {
    let eps = tol.unwrap_or(EPS_CAUSAL * g.amax());
    let vmax = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if vmax < eps {
        return CausalClass::Zero;
    }
    let norm = dot(g, v, v);
    let threshold = eps * vmax * vmax;
    let orient = dot(g, v, future);
    let future_pointing = if orient.abs() > threshold {
        orient < 0.0
    } else {
        // future field itself lightlike and v parallel to it
        v.iter().zip(future).map(|(a, b)| a * b).sum::<f64>() > 0.0
    };
    if norm < -threshold {
        if future_pointing {
            CausalClass::FutureTimelike
        } else {
            CausalClass::PastTimelike
        }
    } else if norm <= threshold {
        if future_pointing {
            CausalClass::FutureLightlike
        } else {
            CausalClass::PastLightlike
        }
    } else {
        CausalClass::Spacelike
    }
}

pub(crate) fn sectional_curvature(
    g: &DMatrix<f64>,
    r: &Riemann,
    u: &[f64],
    v: &[f64],
    p: &[f64],
    require_timelike: bool,
) -> Result<f64> {
    let guu = dot(g, u, u);
    let gvv = dot(g, v, v);
    let guv = dot(g, u, v);
    let area = guu * gvv - guv * guv;
    let scale = (guu.abs() * gvv.abs()).max(guv * guv).max(f64::MIN_POSITIVE);
    if area.abs() <= 1e-12 * scale {
        return Err(GeomError::DegeneratePlane(p.to_vec()));
    }
    if require_timelike && area > 0.0 {
        return Err(GeomError::Invalid(format!(
            "plane at {p:?} is not timelike (Gram determinant {area} > 0)"
        )));
    }
    let rv = r.apply(u, v, v);
    Ok(dot(g, &rv, u) / area)
}

#[derive(Debug, Clone, Serialize)]
pub struct SectionalRange {
    pub min: f64,
    pub max: f64,
    pub samples: usize,
    pub convention: &'static str,
    pub certification: &'static str,
}
