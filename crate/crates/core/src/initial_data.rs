//! Initial data sets `(S, g, A)` with sources `(φ, X)`: constraint
//! residuals, definiteness of `A`, the stationarity obstruction
//! `‖h⃗‖ < |trace_P A|` and normal-flow definiteness margins.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::expr::{BoundExpr, FieldExpr};
use crate::identities::orthonormal_frame;
use crate::immersion::{Ambient, ImmersedSubmanifold};
use crate::mesh::ParamMesh;
use crate::spacetime::{classify_vector, dot, CausalClass, MetricField, MetricModel, VectorField, VectorFieldSpec};

/// Symmetry tolerance for `g(A·,·)`.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct InitialDataSet {
    mesh: ParamMesh,
    g: MetricField,
    /// `A^i_j` at row `i`, column `j`.
    a: Vec<Vec<FieldExpr>>,
    a_bound: Vec<Vec<BoundExpr>>,
    /// `∂_k A^i_j` at `[k][i][j]`.
    da_bound: Vec<Vec<Vec<BoundExpr>>>,
    phi: BoundExpr,
    x: VectorField,
    points: Vec<Vec<f64>>,
}

impl InitialDataSet {
    /// Validates positivity of `g` and self-adjointness of `A` at every node.
    /// Mesh coordinates are the coordinates of `g`.
    pub fn new(
        mesh: ParamMesh,
        g: MetricField,
        a: Vec<Vec<FieldExpr>>,
        phi: FieldExpr,
        x: VectorFieldSpec,
    ) -> Result<Self> {
        let n = g.dim();
        if mesh.dim() != n {
            return Err(GeomError::Invalid(format!("mesh dimension {} differs from metric dimension {n}", mesh.dim())));
        }
        if a.len() != n || a.iter().any(|r| r.len() != n) {
            return Err(GeomError::Invalid(format!("A must be {n}x{n}")));
        }
        if x.components.len() != n {
            return Err(GeomError::Invalid(format!("X must have {n} components")));
        }
        let coords = g.coords().to_vec();
        let bind_row = |row: &Vec<FieldExpr>| row.iter().map(|e| e.bind(&coords)).collect::<std::result::Result<Vec<_>, _>>();
        let a_bound = a.iter().map(bind_row).collect::<std::result::Result<Vec<_>, _>>()?;
        let da_bound = coords
            .iter()
            .map(|c| {
                a.iter()
                    .map(|row| row.iter().map(|e| e.differentiate(c).bind(&coords)).collect::<std::result::Result<Vec<_>, _>>())
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let data = InitialDataSet {
            points: mesh.coords(),
            mesh,
            phi: phi.bind(&coords)?,
            x: x.bind(&coords)?,
            g,
            a,
            a_bound,
            da_bound,
        };
        data.points.par_iter().enumerate().try_for_each(|(node, p)| data.validate_at(node, p))?;
        Ok(data)
    }

    fn validate_at(&self, node: usize, p: &[f64]) -> Result<()> {
        let g = self.g.components_at(p)?;
        let eig = SymmetricEigen::new(g.clone()).eigenvalues;
        if eig.iter().any(|&l| !(l > 0.0)) {
            return Err(GeomError::Invalid(format!("metric not positive definite at node {node}")));
        }
        let ga = &g * self.a_at(p)?;
        let scale = 1.0f64.max(ga.amax());
        if (&ga - ga.transpose()).amax() > SYMMETRY_TOL * scale {
            return Err(GeomError::Invalid(format!("A is not self-adjoint at node {node}")));
        }
        Ok(())
    }

    pub fn mesh(&self) -> &ParamMesh {
        &self.mesh
    }

    pub fn metric(&self) -> &MetricField {
        &self.g
    }

    pub fn shape_exprs(&self) -> &[Vec<FieldExpr>] {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn a_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.a_bound[i][j].eval(p)?;
            }
        }
        Ok(m)
    }

    fn constraints_at(&self, p: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = self.dim();
        let g = self.g.components_at(p)?;
        let a = self.a_at(p)?;
        let a2 = &a * &a;
        let tr = a.trace();
        let res1 = self.g.scalar_curvature_at(p)? - a2.trace() + tr * tr - self.phi.eval(p)?;
        let gamma = self.g.christoffel_at(p)?;
        let da: Vec<DMatrix<f64>> = (0..n)
            .map(|k| {
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] = self.da_bound[k][i][j].eval(p)?;
                    }
                }
                Ok(m)
            })
            .collect::<Result<_>>()?;
        let x = self.x.value_at(p)?;
        let res2 = (0..n)
            .map(|j| {
                let mut div = 0.0;
                for i in 0..n {
                    div += da[i][(i, j)];
                    for k in 0..n {
                        div += gamma.get(i, i, k) * a[(k, j)] - gamma.get(k, i, j) * a[(i, k)];
                    }
                }
                let dtr: f64 = (0..n).map(|i| da[j][(i, i)]).sum();
                let xj: f64 = (0..n).map(|k| g[(j, k)] * x[k]).sum();
                div - dtr - xj
            })
            .collect();
        Ok((res1, res2))
    }

    /// `R(g) - tr(A²) + tr(A)² - φ` and `div A - d tr A - X♭` at every node.
    pub fn constraint_residuals(&self) -> Result<ConstraintReport> {
        let per_node = self
            .points
            .par_iter()
            .map(|p| self.constraints_at(p))
            .collect::<Result<Vec<_>>>()?;
        let (res1, res2): (Vec<f64>, Vec<Vec<f64>>) = per_node.into_iter().unzip();
        Ok(ConstraintReport::new(res1, res2))
    }

    /// Eigenvalues of `A` in a `g`-orthonormal frame at every node.
    pub fn definiteness_report(&self) -> Result<DefinitenessReport> {
        let eigen = self
            .points
            .par_iter()
            .map(|p| {
                let g = self.g.components_at(p)?;
                let a = self.a_at(p)?;
                let l = g
                    .cholesky()
                    .ok_or_else(|| GeomError::SingularMetric(p.to_vec()))?
                    .l();
                // L^T A L^{-T} is symmetric when g A is
                let lt = l.transpose();
                let lt_inv = lt.clone().try_inverse().ok_or_else(|| GeomError::SingularMetric(p.to_vec()))?;
                let b = &lt * a * lt_inv;
                let sym = (&b + b.transpose()) * 0.5;
                let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
                ev.sort_by(f64::total_cmp);
                Ok(ev)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DefinitenessReport::new(eigen))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstraintReport {
    #[serde(skip)]
    pub hamiltonian: Vec<f64>,
    #[serde(skip)]
    pub momentum: Vec<Vec<f64>>,
    pub max_hamiltonian: f64,
    pub max_momentum: f64,
    /// Node with the largest momentum residual.
    pub worst_momentum_node: usize,
}

impl ConstraintReport {
    fn new(hamiltonian: Vec<f64>, momentum: Vec<Vec<f64>>) -> Self {
        let max_hamiltonian = hamiltonian.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let norms: Vec<f64> = momentum.iter().map(|v| v.iter().fold(0.0f64, |a, x| a.max(x.abs()))).collect();
        let (worst_momentum_node, max_momentum) = norms
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |best, (i, v)| if v > best.1 { (i, v) } else { best });
        ConstraintReport {
            hamiltonian,
            momentum,
            max_hamiltonian,
            max_momentum,
            worst_momentum_node,
        }
    }

    pub fn satisfied(&self, tol: f64) -> bool {
        self.max_hamiltonian <= tol && self.max_momentum <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Definiteness {
    NegativeDefinite,
    NegativeSemidefinite,
    PositiveDefinite,
    PositiveSemidefinite,
    Indefinite,
    /// All eigenvalues within tolerance of zero.
    Zero,
}

impl Definiteness {
    /// Classify from the extreme eigenvalues with tolerance `eps`.
    pub fn from_range(min: f64, max: f64, eps: f64) -> Self {
        match (min < -eps, max > eps) {
            (true, true) => Definiteness::Indefinite,
            (false, false) => Definiteness::Zero,
            (true, false) if max < -eps => Definiteness::NegativeDefinite,
            (true, false) => Definiteness::NegativeSemidefinite,
            (false, true) if min > eps => Definiteness::PositiveDefinite,
            (false, true) => Definiteness::PositiveSemidefinite,
        }
    }

    pub fn is_definite(self) -> bool {
        matches!(self, Definiteness::NegativeDefinite | Definiteness::PositiveDefinite)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DefinitenessReport {
    /// Sorted eigenvalues per node.
    #[serde(skip)]
    pub eigenvalues: Vec<Vec<f64>>,
    #[serde(skip)]
    pub classes: Vec<Definiteness>,
    pub global: Definiteness,
    pub tolerance: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl DefinitenessReport {
    fn new(eigenvalues: Vec<Vec<f64>>) -> Self {
        let min = eigenvalues.iter().map(|e| e[0]).fold(f64::INFINITY, f64::min);
        let max = eigenvalues.iter().map(|e| e[e.len() - 1]).fold(f64::NEG_INFINITY, f64::max);
        let eps = 1e-9 * min.abs().max(max.abs());
        let classes = eigenvalues
            .iter()
            .map(|e| Definiteness::from_range(e[0], e[e.len() - 1], eps))
            .collect();
        DefinitenessReport {
            global: Definiteness::from_range(min, max, eps),
            eigenvalues,
            classes,
            tolerance: eps,
            min_eigenvalue: min,
            max_eigenvalue: max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstructionConclusion {
    ExcludesStationaryDevelopment,
    NoConclusion,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstructionReport {
    /// `‖h⃗‖_g` per node of `P`.
    pub h_norm: Vec<f64>,
    /// `trace_P A` per node.
    pub trace_a: Vec<f64>,
    /// Class of `H⃗ = h⃗ + (trace_P A) N` in the abstract normal plane
    /// spanned by the unit future normal `N` of `S` and `h⃗/‖h⃗‖`.
    pub classes: Vec<CausalClass>,
    /// `‖h⃗‖ < |trace_P A|` at every node.
    pub inequality_holds: bool,
    /// `min (|trace_P A| - ‖h⃗‖)`.
    pub min_gap: f64,
    pub max_h_norm: f64,
    pub minimal: bool,
    pub conclusion: ObstructionConclusion,
    pub minimal_tolerance: f64,
}

/// Tolerance below which `max ‖h⃗‖` counts as minimal.
pub const MINIMAL_TOL: f64 = 1e-8;

/// Evaluate `‖h⃗‖ < |trace_P A|` pointwise on a closed submanifold `P` of `S`.
pub fn stationarity_obstruction(data: &InitialDataSet, p: &ImmersedSubmanifold) -> Result<ObstructionReport> {
    match p.ambient() {
        Ambient::Riemannian(f) if f.coords() == data.metric().coords() => {}
        _ => {
            return Err(GeomError::Invalid(
                "P must be immersed in the Riemannian metric of the data set".into(),
            ))
        }
    }
    if !p.mesh().is_closed() {
        return Err(GeomError::NotClosed);
    }
    let per_node = p
        .geometry()
        .par_iter()
        .map(|geo| {
            let a = data.a_at(&geo.point)?;
            let trace: f64 = orthonormal_frame(geo)
                .iter()
                .map(|e| {
                    let ae: Vec<f64> = (0..e.len()).map(|i| (0..e.len()).map(|j| a[(i, j)] * e[j]).sum()).collect();
                    dot(&geo.ambient_metric, &ae, e)
                })
                .sum();
            let h = &geo.mean_curvature;
            let norm = dot(&geo.ambient_metric, h, h).max(0.0).sqrt();
            Ok((norm, trace))
        })
        .collect::<Result<Vec<_>>>()?;
    let (h_norm, trace_a): (Vec<f64>, Vec<f64>) = per_node.into_iter().unzip();
    let plane = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0]));
    let classes = h_norm
        .iter()
        .zip(&trace_a)
        .map(|(&h, &t)| classify_vector(&plane, &[1.0, 0.0], &[t, h], None))
        .collect();
    let min_gap = h_norm
        .iter()
        .zip(&trace_a)
        .map(|(h, t)| t.abs() - h)
        .fold(f64::INFINITY, f64::min);
    let max_h_norm = h_norm.iter().copied().fold(0.0, f64::max);
    let inequality_holds = min_gap > 0.0;
    let minimal = max_h_norm <= MINIMAL_TOL;
    Ok(ObstructionReport {
        h_norm,
        trace_a,
        classes,
        inequality_holds,
        min_gap,
        max_h_norm,
        minimal,
        conclusion: if inequality_holds && !minimal {
            ObstructionConclusion::ExcludesStationaryDevelopment
        } else {
            ObstructionConclusion::NoConclusion
        },
        minimal_tolerance: MINIMAL_TOL,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowMargins {
    /// Past margin `σ₁`.
    pub sigma_past: f64,
    /// Future margin `σ₂`.
    pub sigma_future: f64,
    pub past_capped: bool,
    pub future_capped: bool,
    /// Sign of `Ā` on the slice over the sample.
    pub initial_sign: Definiteness,
    /// `Ā` on the slice is not definite, margins are reported as zero.
    pub degenerate: bool,
    pub cap: f64,
    pub step: f64,
    pub sample: Vec<usize>,
    /// `(s, min λ, max λ)` of `Ā` over the sample, past steps first.
    #[serde(skip)]
    pub profile: Vec<(f64, f64, f64)>,
}

type Orbit = Vec<(Vec<f64>, Vec<f64>)>;

fn geodesic_rhs(model: &MetricModel, x: &[f64], v: &[f64], param: f64) -> Result<Vec<f64>> {
    let gamma = model.christoffel_at(x).map_err(|e| GeomError::GeodesicLeftDomain {
        param,
        reason: e.to_string(),
    })?;
    Ok(gamma.contract(v, v).into_iter().map(|a| -a).collect())
}

/// RK4 for `x'' = -Γ(x', x')`, recording `steps + 1` states.
fn integrate_geodesic(model: &MetricModel, x0: &[f64], v0: &[f64], h: f64, steps: usize) -> Result<Orbit> {
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    let mut out = Vec::with_capacity(steps + 1);
    out.push((x.clone(), v.clone()));
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + s * q).collect() };
    for k in 0..steps {
        let s = k as f64 * h;
        let a1 = geodesic_rhs(model, &x, &v, s)?;
        let (x2, v2) = (axpy(&x, 0.5 * h, &v), axpy(&v, 0.5 * h, &a1));
        let a2 = geodesic_rhs(model, &x2, &v2, s + 0.5 * h)?;
        let (x3, v3) = (axpy(&x, 0.5 * h, &v2), axpy(&v, 0.5 * h, &a2));
        let a3 = geodesic_rhs(model, &x3, &v3, s + 0.5 * h)?;
        let (x4, v4) = (axpy(&x, h, &v3), axpy(&v, h, &a3));
        let a4 = geodesic_rhs(model, &x4, &v4, s + h)?;
        for i in 0..x.len() {
            x[i] += h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
            v[i] += h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
        }
        if x.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(GeomError::GeodesicLeftDomain {
                param: s + h,
                reason: "step produced a non-finite state".into(),
            });
        }
        out.push((x.clone(), v.clone()));
    }
    Ok(out)
}

/// Eigenvalues of `Ā = -½ L_N̄ ḡ` on the flowed slice, relative to its
/// induced metric, at the sample nodes. `orbits[node][step]`, and `sign`
/// is `+1` when the recorded velocity is `N̄`, `-1` when it is `-N̄`.
fn flowed_eigenvalues(
    model: &MetricModel,
    slice: &ImmersedSubmanifold,
    orbits: &[Orbit],
    step: usize,
    sign: f64,
    sample: &[usize],
) -> Result<Vec<(f64, f64)>> {
    let mesh = slice.mesh();
    let k = mesh.dim();
    let m = model.dim();
    let comp = |a: usize, vel: bool| -> Vec<f64> {
        orbits
            .iter()
            .map(|o| if vel { sign * o[step].1[a] } else { o[step].0[a] })
            .collect()
    };
    // tangents[i][a] and normal derivatives dn[i][a] as nodal arrays
    let mut tangents = vec![vec![Vec::new(); m]; k];
    let mut dn = vec![vec![Vec::new(); m]; k];
    for a in 0..m {
        let (pos, vel) = (comp(a, false), comp(a, true));
        for i in 0..k {
            tangents[i][a] = mesh.fd_partial_jump(&pos, i, slice.shifts()[i][a]);
            dn[i][a] = mesh.fd_partial(&vel, i);
        }
    }
    sample
        .par_iter()
        .map(|&node| {
            let (x, v) = &orbits[node][step];
            let nbar: Vec<f64> = v.iter().map(|c| sign * c).collect();
            let g = model.metric_at(x)?;
            let dg = model.field().first_derivatives_at(x)?;
            let t: Vec<Vec<f64>> = (0..k).map(|i| (0..m).map(|a| tangents[i][a][node]).collect()).collect();
            let d: Vec<Vec<f64>> = (0..k).map(|i| (0..m).map(|a| dn[i][a][node]).collect()).collect();
            let mut induced = DMatrix::zeros(k, k);
            let mut abar = DMatrix::zeros(k, k);
            for i in 0..k {
                for j in 0..k {
                    induced[(i, j)] = dot(&g, &t[i], &t[j]);
                    let mut lie = dot(&g, &d[i], &t[j]) + dot(&g, &t[i], &d[j]);
                    for c in 0..m {
                        lie += nbar[c] * dot(&dg[c], &t[i], &t[j]);
                    }
                    abar[(i, j)] = -0.5 * lie;
                }
            }
            let l = induced.clone().cholesky().ok_or_else(|| GeomError::NonSpacelike {
                node,
                eigenvalues: SymmetricEigen::new(induced.clone()).eigenvalues.iter().copied().collect(),
            })?;
            let l_inv = l.l().try_inverse().ok_or_else(|| GeomError::SingularMetric(x.clone()))?;
            let b = &l_inv * abar * l_inv.transpose();
            let ev = SymmetricEigen::new((&b + b.transpose()) * 0.5).eigenvalues;
            Ok((ev.min(), ev.max()))
        })
        .collect()
}

/// First parameter where the sample loses the initial sign, by linear
/// interpolation of the extreme eigenvalue between steps.
fn first_crossing(per_step: &[Vec<(f64, f64)>], h: f64, negative: bool) -> Option<f64> {
    let n = per_step[0].len();
    let value = |k: usize, i: usize| if negative { per_step[k][i].1 } else { -per_step[k][i].0 };
    let mut best: Option<f64> = None;
    for i in 0..n {
        for k in 1..per_step.len() {
            let (a, b) = (value(k - 1, i), value(k, i));
            if b >= 0.0 {
                let s = (k - 1) as f64 * h + h * a / (a - b);
                best = Some(best.map_or(s, |c: f64| c.min(s)));
                break;
            }
        }
    }
    best
}

/// Follow the normal geodesic flow of a spacelike hypersurface `slice` of
/// `development` forwards and backwards up to `cap` in `steps` RK4 steps
/// and report how long `Ā = -½ L_N̄ ḡ` stays definite of its initial sign
/// over the sampled nodes.
pub fn normal_flow_margin(
    development: &MetricModel,
    slice: &ImmersedSubmanifold,
    sample: &[usize],
    cap: f64,
    steps: usize,
) -> Result<FlowMargins> {
    let m = development.dim();
    if slice.dim() + 1 != m {
        return Err(GeomError::Invalid("slice must be a hypersurface of the development".into()));
    }
    if !(cap > 0.0) || steps == 0 {
        return Err(GeomError::Invalid("flow range and step count must be positive".into()));
    }
    if sample.is_empty() || sample.iter().any(|&i| i >= slice.mesh().len()) {
        return Err(GeomError::Invalid("sample nodes must be non-empty mesh nodes".into()));
    }
    let h = cap / steps as f64;
    let normals = slice
        .geometry()
        .par_iter()
        .map(|geo| {
            let f = development.future_field().value_at(&geo.point)?;
            let t = geo.tangential_part(&f);
            let n: Vec<f64> = f.iter().zip(&t).map(|(a, b)| a - b).collect();
            let norm = -dot(&geo.ambient_metric, &n, &n);
            if !(norm > 0.0) {
                return Err(GeomError::Invalid("slice normal is not timelike".into()));
            }
            Ok(n.into_iter().map(|c| c / norm.sqrt()).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let orbits = |dir: f64| -> Result<Vec<Orbit>> {
        slice
            .nodes()
            .par_iter()
            .zip(&normals)
            .map(|(x, n)| {
                let v: Vec<f64> = n.iter().map(|c| dir * c).collect();
                integrate_geodesic(development, x, &v, h, steps)
            })
            .collect()
    };
    let future = orbits(1.0)?;
    let past = orbits(-1.0)?;
    let eig = |orb: &[Orbit], sign: f64| -> Result<Vec<Vec<(f64, f64)>>> {
        (0..=steps)
            .map(|k| flowed_eigenvalues(development, slice, orb, k, sign, sample))
            .collect()
    };
    let fut = eig(&future, 1.0)?;
    let pst = eig(&past, -1.0)?;
    let lo = fut[0].iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    let hi = fut[0].iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let eps = 1e-9 * 1.0f64.max(lo.abs()).max(hi.abs());
    let initial_sign = Definiteness::from_range(lo, hi, eps);
    let extremes = |e: &Vec<(f64, f64)>| {
        (
            e.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
            e.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let mut profile: Vec<(f64, f64, f64)> = pst
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .map(|(k, e)| {
            let (a, b) = extremes(e);
            (-(k as f64) * h, a, b)
        })
        .collect();
    profile.extend(fut.iter().enumerate().map(|(k, e)| {
        let (a, b) = extremes(e);
        (k as f64 * h, a, b)
    }));
    let degenerate = !initial_sign.is_definite();
    let (sigma_past, sigma_future, past_capped, future_capped) = if degenerate {
        (0.0, 0.0, false, false)
    } else {
        let negative = initial_sign == Definiteness::NegativeDefinite;
        let f = first_crossing(&fut, h, negative);
        let p = first_crossing(&pst, h, negative);
        (p.unwrap_or(cap), f.unwrap_or(cap), p.is_none(), f.is_none())
    };
    Ok(FlowMargins {
        sigma_past,
        sigma_future,
        past_capped,
        future_capped,
        initial_sign,
        degenerate,
        cap,
        step: h,
        sample: sample.to_vec(),
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn e(s: &str) -> FieldExpr {
        FieldExpr::parse(s).unwrap()
    }

    fn c(v: f64) -> FieldExpr {
        FieldExpr::constant(v)
    }

    fn diag(entries: &[FieldExpr]) -> Vec<Vec<FieldExpr>> {
        let n = entries.len();
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { entries[i].clone() } else { c(0.0) }).collect())
            .collect()
    }

    fn flat(coords: &[&str]) -> MetricField {
        MetricField::diagonal(coords, vec![c(1.0); coords.len()]).unwrap()
    }

    fn torus3() -> ParamMesh {
        ParamMesh::periodic_box(&[8, 8, 8], &[1.0, 1.0, 1.0]).unwrap()
    }

    fn zero_field(n: usize) -> VectorFieldSpec {
        VectorFieldSpec::new(vec![c(0.0); n])
    }

    #[test]
    fn umbilic_data_on_flat_torus_satisfies_constraints() {
        for cc in [-1.0, -0.1, 0.1, 1.0] {
            let data = InitialDataSet::new(
                torus3(),
                flat(&["x", "y", "z"]),
                diag(&[c(cc), c(cc), c(cc)]),
                c(6.0 * cc * cc),
                zero_field(3),
            )
            .unwrap();
            assert!(data.constraint_residuals().unwrap().satisfied(1e-9));
        }
    }

    #[test]
    fn vacuum_momentum_case_on_curved_metric() {
        // conformally flat metric, φ = R(g) computed independently
        let coords = ["x", "y"];
        let g = MetricField::diagonal(&coords, vec![e("exp(2*0.3*sin(2*pi*x))"); 2]).unwrap();
        // R = -2 e^{-2f} Δf for g = e^{2f} δ in 2D, f = 0.3 sin(2πx)
        let phi = e("2*0.3*4*pi^2*sin(2*pi*x)*exp(-2*0.3*sin(2*pi*x))");
        let mesh = ParamMesh::periodic_box(&[12, 12], &[1.0, 1.0]).unwrap();
        let data = InitialDataSet::new(mesh, g, diag(&[c(0.0), c(0.0)]), phi, zero_field(2)).unwrap();
        let rep = data.constraint_residuals().unwrap();
        assert!(rep.max_hamiltonian < 1e-9, "{}", rep.max_hamiltonian);
        assert_eq!(rep.max_momentum, 0.0);
    }

    #[test]
    fn momentum_mismatch_is_localized() {
        // A = diag(a(x), 0): div A - d tr A = (a' - a', 0) = 0, while X = (0, bump)
        let data = InitialDataSet::new(
            torus3(),
            flat(&["x", "y", "z"]),
            diag(&[e("sin(2*pi*x)"), c(0.0), c(0.0)]),
            FieldExpr::zero(),
            VectorFieldSpec::parse(&["0", "exp(-50*(x-0.5)^2)", "0"]).unwrap(),
        )
        .unwrap();
        let rep = data.constraint_residuals().unwrap();
        assert!(rep.max_momentum > 0.9);
        let worst = data.mesh().coord(rep.worst_momentum_node);
        assert!((worst[0] - 0.5).abs() < 1e-12);
        // hamiltonian: -tr(A²) + tr(A)² = 0
        assert!(rep.max_hamiltonian < 1e-12);
        let a_only = InitialDataSet::new(
            torus3(),
            flat(&["x", "y", "z"]),
            diag(&[e("sin(2*pi*x)"), e("sin(2*pi*x)"), c(0.0)]),
            e("2*sin(2*pi*x)^2"),
            VectorFieldSpec::parse(&["-2*pi*cos(2*pi*x)", "0", "0"]).unwrap(),
        )
        .unwrap();
        assert!(a_only.constraint_residuals().unwrap().satisfied(1e-9));
    }

    #[test]
    fn rejects_non_self_adjoint_shape_operator() {
        let mut a = diag(&[c(1.0), c(1.0)]);
        a[0][1] = c(0.5);
        let mesh = ParamMesh::periodic_box(&[8, 8], &[1.0, 1.0]).unwrap();
        let err = InitialDataSet::new(mesh, flat(&["x", "y"]), a, c(0.0), zero_field(2)).unwrap_err();
        assert!(matches!(err, GeomError::Invalid(_)));
    }

    #[test]
    fn definiteness_tags() {
        let mesh = ParamMesh::periodic_box(&[8, 8], &[1.0, 1.0]).unwrap();
        let tag = |a: Vec<Vec<FieldExpr>>, g: MetricField| {
            InitialDataSet::new(mesh.clone(), g, a, c(0.0), zero_field(2))
                .unwrap()
                .definiteness_report()
                .unwrap()
                .global
        };
        let g = flat(&["x", "y"]);
        assert_eq!(tag(diag(&[c(-2.0), c(-2.0)]), g.clone()), Definiteness::NegativeDefinite);
        assert_eq!(tag(diag(&[c(-1.0), c(0.0)]), g.clone()), Definiteness::NegativeSemidefinite);
        assert_eq!(tag(diag(&[c(-1.0), c(1.0)]), g.clone()), Definiteness::Indefinite);
        assert_eq!(tag(diag(&[c(0.5), c(1.0)]), g.clone()), Definiteness::PositiveDefinite);
        assert_eq!(tag(diag(&[c(0.0), c(0.0)]), g.clone()), Definiteness::Zero);
        // non-diagonal metric with A self-adjoint: A = g^{-1} S for symmetric S
        let g2 = MetricField::new(&["x", "y"], vec![vec![c(2.0), c(1.0)], vec![c(1.0), c(2.0)]]).unwrap();
        // g^{-1} = [[2,-1],[-1,2]]/3, S = diag(1, 1) → A = g^{-1}, eigenvalues 1/3, 1
        let a = vec![vec![c(2.0 / 3.0), c(-1.0 / 3.0)], vec![c(-1.0 / 3.0), c(2.0 / 3.0)]];
        let data = InitialDataSet::new(mesh.clone(), g2, a, c(0.0), zero_field(2)).unwrap();
        let rep = data.definiteness_report().unwrap();
        assert_eq!(rep.global, Definiteness::PositiveDefinite);
        assert!((rep.min_eigenvalue - 1.0 / 3.0).abs() < 1e-12);
        assert!((rep.max_eigenvalue - 1.0).abs() < 1e-12);
    }

    fn plane_data(cc: f64) -> InitialDataSet {
        let mesh = ParamMesh::periodic_box(&[8, 8], &[4.0, 4.0]).unwrap();
        InitialDataSet::new(mesh, flat(&["x", "y"]), diag(&[c(cc), c(cc)]), c(2.0 * cc * cc), zero_field(2)).unwrap()
    }

    fn curve(map: [&str; 2], nodes: usize, length: f64) -> ImmersedSubmanifold {
        let mesh = ParamMesh::periodic_box(&[nodes], &[length]).unwrap();
        ImmersedSubmanifold::from_map(mesh, Ambient::Riemannian(flat(&["x", "y"])), &["s"], &[e(map[0]), e(map[1])]).unwrap()
    }

    #[test]
    fn geodesic_circle_is_minimal() {
        let data = plane_data(0.7);
        let p = curve(["s", "0.3"], 64, 1.0);
        let rep = stationarity_obstruction(&data, &p).unwrap();
        assert!(rep.minimal);
        assert!(rep.inequality_holds);
        assert_eq!(rep.conclusion, ObstructionConclusion::NoConclusion);
    }

    #[test]
    fn round_circle_with_large_trace_excludes_stationarity() {
        let r = 0.5;
        let data = plane_data(3.0);
        let p = curve(["1+0.5*cos(s)", "1+0.5*sin(s)"], 128, 2.0 * PI);
        let rep = stationarity_obstruction(&data, &p).unwrap();
        assert!(rep.h_norm.iter().all(|h| (h - 1.0 / r).abs() < 1e-10));
        assert!(rep.trace_a.iter().all(|t| (t - 3.0).abs() < 1e-12));
        assert_eq!(rep.conclusion, ObstructionConclusion::ExcludesStationaryDevelopment);
        assert!(rep.classes.iter().all(|&k| k == CausalClass::FutureTimelike));
        let neg = stationarity_obstruction(&plane_data(-3.0), &p).unwrap();
        assert!(neg.classes.iter().all(|&k| k == CausalClass::PastTimelike));
        let zero = stationarity_obstruction(&plane_data(0.0), &p).unwrap();
        assert!(!zero.inequality_holds);
        assert_eq!(zero.conclusion, ObstructionConclusion::NoConclusion);
        assert!(zero.classes.iter().all(|&k| k == CausalClass::Spacelike));
    }

    #[test]
    fn obstruction_needs_closed_submanifold() {
        let mesh = ParamMesh::new(vec![crate::mesh::Axis::bounded(16, 0.0, 1.0)]).unwrap();
        let p = ImmersedSubmanifold::from_map(mesh, Ambient::Riemannian(flat(&["x", "y"])), &["s"], &[e("s"), e("0")]).unwrap();
        assert!(matches!(stationarity_obstruction(&plane_data(1.0), &p), Err(GeomError::NotClosed)));
    }

    fn slice(model: &MetricModel, nodes: usize) -> ImmersedSubmanifold {
        let mesh = ParamMesh::periodic_box(&[nodes, nodes], &[1.0, 1.0]).unwrap();
        ImmersedSubmanifold::from_map(mesh, Ambient::Lorentzian(model.clone()), &["x1", "x2"], &[c(0.0), e("x1"), e("x2")]).unwrap()
    }

    #[test]
    fn expanding_model_keeps_negative_definite_shape() {
        let model = MetricModel::custom(&["t", "x", "y"], vec![
            vec![c(-1.0), c(0.0), c(0.0)],
            vec![c(0.0), e("exp(2*t)"), c(0.0)],
            vec![c(0.0), c(0.0), e("exp(2*t)")],
        ])
        .unwrap();
        let s = slice(&model, 8);
        let sample: Vec<usize> = (0..64).collect();
        let out = normal_flow_margin(&model, &s, &sample, 1.0, 50).unwrap();
        assert_eq!(out.initial_sign, Definiteness::NegativeDefinite);
        assert!(out.past_capped && out.future_capped);
        assert_eq!((out.sigma_past, out.sigma_future), (1.0, 1.0));
        // Ā relative to the induced metric is -Id along the flow
        assert!(out.profile.iter().all(|&(_, lo, hi)| (lo + 1.0).abs() < 1e-8 && (hi + 1.0).abs() < 1e-8));
    }

    #[test]
    fn sign_change_is_located_within_a_step() {
        // ∂_t(b²)/b² = 2 - 4t, crossing zero at t* = 0.5
        let model = MetricModel::custom(&["t", "x", "y"], vec![
            vec![c(-1.0), c(0.0), c(0.0)],
            vec![c(0.0), e("exp(2*t)"), c(0.0)],
            vec![c(0.0), c(0.0), e("exp(2*t-2*t^2)")],
        ])
        .unwrap();
        let s = slice(&model, 8);
        let out = normal_flow_margin(&model, &s, &[0, 9, 30], 1.0, 100).unwrap();
        assert_eq!(out.initial_sign, Definiteness::NegativeDefinite);
        assert!(out.past_capped);
        assert!(!out.future_capped);
        assert!((out.sigma_future - 0.5).abs() < out.step, "{}", out.sigma_future);
        // enlarging the sample never enlarges the margins
        let all: Vec<usize> = (0..64).collect();
        let bigger = normal_flow_margin(&model, &s, &all, 1.0, 100).unwrap();
        assert!(bigger.sigma_future <= out.sigma_future && bigger.sigma_past <= out.sigma_past);
    }

    #[test]
    fn flat_development_is_degenerate() {
        let model = MetricModel::minkowski(&["t", "x", "y"]).unwrap();
        let s = slice(&model, 8);
        let out = normal_flow_margin(&model, &s, &[0, 1, 2], 0.5, 10).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.initial_sign, Definiteness::Zero);
        assert_eq!((out.sigma_past, out.sigma_future), (0.0, 0.0));
    }
}
