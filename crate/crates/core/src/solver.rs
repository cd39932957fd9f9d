//! Prescribed mean curvature for spacelike graphs in a static spacetime.
//!
//! The discrete operator is the first variation of a corner-gradient area
//! functional
//! `A(u) = Σ_cells Σ_corners (|cell| / 2^n) √det g₀ √(1 - h g₀^{jk} d_j d_k)`
//! with one-sided differences `d_j` at each corner, divided by the nodal
//! density `w √det g₀ √h`. It is a second-order discretization of
//! `h^{-1/2} div₀(√h F)`, its Hessian is symmetric negative semidefinite,
//! and on closed meshes the gradient sums to zero exactly, so
//! `∫ √h H dV₀ = 0` is an exact discrete solvability condition.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::mesh::kahan_sum;
use crate::sparse::{pcg, CsrMatrix};
use crate::static_graphs::{StaticModel, DELTA_MARGIN};

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// All axes periodic.
    Closed,
    /// Boundary values `u₀` given at every node; only boundary nodes are read.
    Dirichlet { boundary_values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Defaults to `1e-10 (1 + ‖H‖∞)`.
    pub tol_residual: Option<f64>,
    pub max_newton: usize,
    pub min_damping: f64,
    pub delta_margin: f64,
    pub linear_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_residual: None,
            max_newton: 50,
            min_damping: 1.0 / 1024.0,
            delta_margin: DELTA_MARGIN,
            linear_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub model: StaticModel,
    pub domain: Domain,
    pub target_h: Vec<f64>,
    pub u_init: Option<Vec<f64>>,
    pub config: SolverConfig,
}

impl ProblemSpec {
    pub fn new(model: StaticModel, domain: Domain, target_h: Vec<f64>) -> Result<Self> {
        let n = model.mesh().len();
        if target_h.len() != n || target_h.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::Invalid("target H must be finite at every node".into()));
        }
        match &domain {
            Domain::Closed if !model.mesh().is_closed() => return Err(GeomError::HasBoundary),
            Domain::Dirichlet { boundary_values } => {
                if model.mesh().is_closed() {
                    return Err(GeomError::Invalid("Dirichlet domain needs a bounded axis".into()));
                }
                if boundary_values.len() != n || boundary_values.iter().any(|v| !v.is_finite()) {
                    return Err(GeomError::Invalid("boundary values must be finite at every node".into()));
                }
            }
            _ => {}
        }
        Ok(ProblemSpec {
            model,
            domain,
            target_h,
            u_init: None,
            config: SolverConfig::default(),
        })
    }

    pub fn with_init(mut self, u: Vec<f64>) -> Self {
        self.u_init = Some(u);
        self
    }

    pub fn with_config(mut self, config: SolverConfig) -> Self {
        self.config = config;
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.config.tol_residual.unwrap_or_else(|| {
            1e-10 * (1.0 + self.target_h.iter().fold(0.0f64, |a, v| a.max(v.abs())))
        })
    }

    fn fixed_mask(&self) -> Vec<bool> {
        match self.domain {
            Domain::Closed => vec![false; self.model.mesh().len()],
            Domain::Dirichlet { .. } => self.model.mesh().boundary_mask(),
        }
    }
}

#[derive(Debug, Clone)]
struct Corner {
    node: usize,
    neighbors: Vec<usize>,
    /// `s_j / Δ_j`.
    coeffs: Vec<f64>,
}

/// The discrete area functional and its derivatives.
#[derive(Debug, Clone)]
pub struct GraphEnergy {
    corners: Vec<Corner>,
    /// Per node: corner weight `|cell| √det g₀ / 2^n`, lapse and `g₀^{-1}`.
    weight: Vec<f64>,
    h: Vec<f64>,
    ginv: Vec<Vec<f64>>,
    /// Nodal density `w √det g₀ √h`.
    density: Vec<f64>,
    n: usize,
}

impl GraphEnergy {
    pub fn new(model: &StaticModel) -> Self {
        let mesh = model.mesh();
        let n = mesh.dim();
        let cell: f64 = (0..n).map(|k| mesh.spacing(k)).product();
        let scale = cell / (1u64 << n) as f64;
        let mut corners = Vec::new();
        for node in 0..mesh.len() {
            'corner: for mask in 0..(1usize << n) {
                let mut neighbors = Vec::with_capacity(n);
                let mut coeffs = Vec::with_capacity(n);
                for j in 0..n {
                    let s: i64 = if mask & (1 << j) != 0 { 1 } else { -1 };
                    match mesh.neighbor(node, j, s) {
                        Some((nb, _)) => {
                            neighbors.push(nb);
                            coeffs.push(s as f64 / mesh.spacing(j));
                        }
                        None => continue 'corner,
                    }
                }
                corners.push(Corner {
                    node,
                    neighbors,
                    coeffs,
                });
            }
        }
        let weights = mesh.weights();
        let base = model.base();
        GraphEnergy {
            corners,
            weight: base.iter().map(|b| scale * b.sqrt_det).collect(),
            h: base.iter().map(|b| b.h).collect(),
            ginv: base
                .iter()
                .map(|b| b.g0_inv.iter().copied().collect())
                .collect(),
            density: base
                .iter()
                .zip(&weights)
                .map(|(b, w)| w * b.sqrt_det * b.h.sqrt())
                .collect(),
            n,
        }
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    fn corner_state(&self, c: &Corner, u: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.n;
        let d: Vec<f64> = (0..n)
            .map(|j| c.coeffs[j] * (u[c.neighbors[j]] - u[c.node]))
            .collect();
        let gi = &self.ginv[c.node];
        let v: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|k| gi[j + n * k] * d[k]).sum())
            .collect();
        let q: f64 = d.iter().zip(&v).map(|(a, b)| a * b).sum();
        (d, v, 1.0 - self.h[c.node] * q)
    }

    /// Smallest `1 - h|∇u|²` over all corner gradients.
    pub fn min_margin(&self, u: &[f64]) -> f64 {
        self.corners
            .par_iter()
            .map(|c| self.corner_state(c, u).2)
            .reduce(|| f64::INFINITY, f64::min)
    }

    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        let terms = self
            .corners
            .par_iter()
            .map(|c| {
                let (_, _, m) = self.corner_state(c, u);
                if !(m > 0.0) {
                    return Err(GeomError::GraphNotSpacelike { node: c.node, margin: m });
                }
                Ok(self.weight[c.node] * m.sqrt())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(kahan_sum(terms))
    }

    /// `∂A/∂u`.
    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let local = self
            .corners
            .par_iter()
            .map(|c| {
                let (_, v, m) = self.corner_state(c, u);
                if !(m > 0.0) {
                    return Err(GeomError::GraphNotSpacelike { node: c.node, margin: m });
                }
                let f = -self.weight[c.node] * self.h[c.node] / m.sqrt();
                Ok((0..self.n).map(|j| f * v[j] * c.coeffs[j]).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut g = vec![0.0; u.len()];
        for (c, l) in self.corners.iter().zip(&local) {
            for j in 0..self.n {
                g[c.neighbors[j]] += l[j];
                g[c.node] -= l[j];
            }
        }
        Ok(g)
    }

    /// `-∂²A/∂u²`, symmetric positive semidefinite.
    pub fn negative_hessian(&self, u: &[f64]) -> Result<CsrMatrix> {
        let n = self.n;
        let local = self
            .corners
            .par_iter()
            .map(|c| {
                let (_, v, m) = self.corner_state(c, u);
                if !(m > 0.0) {
                    return Err(GeomError::GraphNotSpacelike { node: c.node, margin: m });
                }
                let h = self.h[c.node];
                let s = m.sqrt();
                let gi = &self.ginv[c.node];
                // -∂²φ/∂d_j∂d_l = w h (g^{jl}/S + h v_j v_l / S³)
                let mut hd = vec![0.0; n * n];
                for j in 0..n {
                    for l in 0..n {
                        hd[j * n + l] = self.weight[c.node] * h * (gi[j + n * l] / s + h * v[j] * v[l] / (s * s * s));
                    }
                }
                // local nodes: 0 = corner node, 1 + j = neighbor j
                let mut b = vec![vec![0.0; n + 1]; n];
                for j in 0..n {
                    b[j][0] = -c.coeffs[j];
                    b[j][1 + j] = c.coeffs[j];
                }
                let nodes: Vec<usize> = std::iter::once(c.node).chain(c.neighbors.iter().copied()).collect();
                let mut trip = Vec::with_capacity((n + 1) * (n + 1));
                for a in 0..=n {
                    for bb in 0..=n {
                        let mut val = 0.0;
                        for j in 0..n {
                            if b[j][a] == 0.0 {
                                continue;
                            }
                            for l in 0..n {
                                val += b[j][a] * hd[j * n + l] * b[l][bb];
                            }
                        }
                        if val != 0.0 {
                            trip.push((nodes[a], nodes[bb], val));
                        }
                    }
                }
                Ok(trip)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CsrMatrix::from_triplets(u.len(), local.into_iter().flatten().collect()))
    }

    /// Discrete mean curvature operator `∂A/∂u / (w √det g₀ √h)`.
    pub fn operator(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .gradient(u)?
            .iter()
            .zip(&self.density)
            .map(|(g, d)| g / d)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Nonconvergent,
    InfeasibleByNecessaryCondition,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverResult {
    #[serde(skip)]
    pub u: Vec<f64>,
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub linear_iterations: usize,
    pub necessary_condition: Option<f64>,
    pub verdict: Verdict,
    pub final_residual: f64,
    pub tolerance: f64,
    pub min_margin: f64,
    /// `max u - min u`.
    pub spread: f64,
    pub message: Option<String>,
}

/// Discrete residual: operator minus target, Dirichlet rows `u - u₀`.
pub fn residual(spec: &ProblemSpec, u: &[f64]) -> Result<Vec<f64>> {
    let energy = GraphEnergy::new(&spec.model);
    residual_with(spec, &energy, &spec.fixed_mask(), u)
}

fn residual_with(spec: &ProblemSpec, energy: &GraphEnergy, fixed: &[bool], u: &[f64]) -> Result<Vec<f64>> {
    let op = energy.operator(u)?;
    Ok((0..u.len())
        .map(|i| match &spec.domain {
            Domain::Dirichlet { boundary_values } if fixed[i] => u[i] - boundary_values[i],
            _ => op[i] - spec.target_h[i],
        })
        .collect())
}

/// `∫ √h H dV₀` on a closed domain.
pub fn necessary_condition(spec: &ProblemSpec) -> Result<f64> {
    if spec.domain != Domain::Closed {
        return Err(GeomError::NotClosed);
    }
    let density = spec.model.solver_density();
    Ok(spec.model.mesh().integrate_density(&spec.target_h, &density))
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn merit(r: &[f64]) -> f64 {
    (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt()
}

fn spread(u: &[f64]) -> f64 {
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

fn graph_margin(spec: &ProblemSpec, energy: &GraphEnergy, u: &[f64]) -> Result<f64> {
    let central = spec.model.graph(u.to_vec())?.min_margin();
    Ok(central.min(energy.min_margin(u)))
}

fn initial_guess(spec: &ProblemSpec, energy: &GraphEnergy, fixed: &[bool]) -> Result<Vec<f64>> {
    let n = spec.model.mesh().len();
    match (&spec.u_init, &spec.domain) {
        (Some(u), Domain::Closed) => Ok(u.clone()),
        (Some(u), Domain::Dirichlet { boundary_values }) => Ok((0..n)
            .map(|i| if fixed[i] { boundary_values[i] } else { u[i] })
            .collect()),
        (None, Domain::Closed) => Ok(vec![0.0; n]),
        (None, Domain::Dirichlet { boundary_values }) => {
            // harmonic extension for the linearized operator at a flat graph
            let u: Vec<f64> = (0..n)
                .map(|i| if fixed[i] { boundary_values[i] } else { 0.0 })
                .collect();
            let k = energy.negative_hessian(&vec![0.0; n])?;
            let ku = k.matvec(&u);
            let free: Vec<bool> = fixed.iter().map(|f| !f).collect();
            let rhs: Vec<f64> = (0..n).filter(|&i| free[i]).map(|i| -ku[i]).collect();
            let (x, _) = pcg(&k.restrict(&free), &rhs, 1e-13, 20 * n.max(100), false)?;
            let mut out = u;
            let mut it = x.into_iter();
            for i in 0..n {
                if free[i] {
                    out[i] = it.next().expect("one value per free node");
                }
            }
            Ok(out)
        }
    }
}

/// Damped Newton with backtracking on the residual norm.
pub fn solve(spec: &ProblemSpec) -> Result<SolverResult> {
    let n = spec.model.mesh().len();
    let tol = spec.tolerance();
    let energy = GraphEnergy::new(&spec.model);
    let fixed = spec.fixed_mask();
    let free: Vec<bool> = fixed.iter().map(|f| !f).collect();
    let closed = spec.domain == Domain::Closed;
    let mut u = initial_guess(spec, &energy, &fixed)?;
    if u.len() != n {
        return Err(GeomError::Invalid("initial guess does not match the mesh".into()));
    }
    let necessary = if closed { Some(necessary_condition(spec)?) } else { None };
    if let Some(value) = necessary {
        let total: f64 = kahan_sum(energy.density().iter().copied());
        if value.abs() > tol * total {
            return Ok(SolverResult {
                spread: spread(&u),
                min_margin: graph_margin(spec, &energy, &u).unwrap_or(f64::NAN),
                u,
                residual_history: vec![],
                converged: false,
                iterations: 0,
                linear_iterations: 0,
                necessary_condition: necessary,
                verdict: Verdict::InfeasibleByNecessaryCondition,
                final_residual: f64::NAN,
                tolerance: tol,
                message: Some(format!(
                    "integral of sqrt(h) H is {value:e}, above {:e}",
                    tol * total
                )),
            });
        }
    }
    let margin0 = graph_margin(spec, &energy, &u)?;
    if margin0 < spec.config.delta_margin {
        return Err(GeomError::GraphNotSpacelike {
            node: 0,
            margin: margin0,
        });
    }
    let density = energy.density().to_vec();
    let total_density: f64 = density.iter().sum();
    let mut history = Vec::new();
    let mut linear_iterations = 0;
    let mut r = residual_with(spec, &energy, &fixed, &u)?;
    let mut message = None;
    let mut iterations = 0;
    loop {
        let rinf = sup(&r);
        history.push(rinf);
        if rinf <= tol {
            break;
        }
        if iterations == spec.config.max_newton {
            message = Some("iteration cap reached".into());
            break;
        }
        iterations += 1;
        let g: Vec<f64> = r.iter().zip(&density).map(|(a, d)| a * d).collect();
        let k = energy.negative_hessian(&u)?;
        let (system, rhs) = if closed {
            (k, g)
        } else {
            (k.restrict(&free), (0..n).filter(|&i| free[i]).map(|i| g[i]).collect())
        };
        let (x, out) = pcg(&system, &rhs, spec.config.linear_tol, 20 * n.max(100), closed)?;
        linear_iterations += out.iterations;
        let mut delta = vec![0.0; n];
        let mut it = x.into_iter();
        for i in 0..n {
            if free[i] {
                delta[i] = it.next().expect("one value per free node");
            }
        }
        if closed {
            let shift = kahan_sum(delta.iter().zip(&density).map(|(d, w)| d * w)) / total_density;
            delta.iter_mut().for_each(|d| *d -= shift);
        }
        let m0 = merit(&r);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= spec.config.min_damping {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            if graph_margin(spec, &energy, &trial).is_ok_and(|m| m >= spec.config.delta_margin) {
                let rt = residual_with(spec, &energy, &fixed, &trial)?;
                if merit(&rt) <= (1.0 - 1e-4 * alpha) * m0 {
                    accepted = Some((trial, rt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, rt)) => {
                u = trial;
                r = rt;
            }
            None => {
                message = Some("line search stalled".into());
                break;
            }
        }
    }
    let final_residual = sup(&r);
    let converged = final_residual <= tol;
    Ok(SolverResult {
        spread: spread(&u),
        min_margin: graph_margin(spec, &energy, &u)?,
        u,
        residual_history: history,
        converged,
        iterations,
        linear_iterations,
        necessary_condition: necessary,
        verdict: if converged {
            Verdict::Converged
        } else {
            Verdict::Nonconvergent
        },
        final_residual,
        tolerance: tol,
        message,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    /// Operator `≥ -tol` at interior nodes (the reading under which only
    /// constants qualify).
    pub operator_nonnegative: bool,
    /// Operator `≤ tol` at interior nodes (the opposite sign reading).
    pub operator_nonpositive: bool,
    pub boundary_matches: bool,
    pub above_boundary_value: bool,
    pub constant: bool,
    pub spread: f64,
    /// All conditions of the nonnegative reading hold.
    pub conditions_hold: bool,
    /// The nonpositive reading's conditions hold although `u` is not constant.
    pub nonpositive_reading_counterexample: bool,
    /// Interior nodes where the operator is below `-tol` (first 20).
    pub failing_nodes: Vec<usize>,
    pub tolerance: f64,
}

/// Check a given `u` against the Dirichlet inequality problem with
/// `H = operator(u)`, `u = u₀` on the boundary and `u ≥ u₀`.
pub fn inequality_solution_check(spec: &ProblemSpec, u: &[f64], tol: f64) -> Result<InequalityReport> {
    let boundary_values = match &spec.domain {
        Domain::Dirichlet { boundary_values } => boundary_values,
        Domain::Closed => return Err(GeomError::NotDirichlet),
    };
    let energy = GraphEnergy::new(&spec.model);
    let fixed = spec.fixed_mask();
    let op = energy.operator(u)?;
    let interior: Vec<usize> = (0..u.len()).filter(|&i| !fixed[i]).collect();
    let failing: Vec<usize> = interior.iter().copied().filter(|&i| op[i] < -tol).collect();
    let nonpositive = interior.iter().all(|&i| op[i] <= tol);
    let boundary_matches = (0..u.len()).filter(|&i| fixed[i]).all(|i| (u[i] - boundary_values[i]).abs() <= tol);
    let above = (0..u.len()).all(|i| u[i] >= boundary_values[i] - tol);
    let s = spread(u);
    let constant = s <= tol;
    Ok(InequalityReport {
        operator_nonnegative: failing.is_empty(),
        operator_nonpositive: nonpositive,
        boundary_matches,
        above_boundary_value: above,
        constant,
        spread: s,
        conditions_hold: failing.is_empty() && boundary_matches && above,
        nonpositive_reading_counterexample: nonpositive && boundary_matches && above && !constant,
        failing_nodes: failing.into_iter().take(20).collect(),
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::FieldExpr;
    use crate::mesh::{Axis, ParamMesh};
    use std::f64::consts::PI;

    fn e(s: &str) -> FieldExpr {
        FieldExpr::parse(s).unwrap()
    }

    fn flat(n: usize) -> Vec<Vec<FieldExpr>> {
        (0..n)
            .map(|i| (0..n).map(|j| FieldExpr::constant(if i == j { 1.0 } else { 0.0 })).collect())
            .collect()
    }

    fn torus(nodes: usize, h: &str) -> StaticModel {
        let mesh = ParamMesh::periodic_box(&[nodes, nodes], &[1.0, 1.0]).unwrap();
        StaticModel::new(mesh, &["t", "x1", "x2"], e(h), flat(2)).unwrap()
    }

    fn square(nodes: usize, h: &str) -> StaticModel {
        let mesh = ParamMesh::new(vec![Axis::bounded(nodes, 0.0, 1.0), Axis::bounded(nodes, 0.0, 1.0)]).unwrap();
        StaticModel::new(mesh, &["t", "x1", "x2"], e(h), flat(2)).unwrap()
    }

    fn sample(model: &StaticModel, f: impl Fn(&[f64]) -> f64 + Sync) -> Vec<f64> {
        model.mesh().sample(|x| Ok(f(x))).unwrap()
    }

    #[test]
    fn constant_graph_residuals() {
        let model = torus(16, "1+0.3*cos(2*pi*x1)*cos(2*pi*x2)");
        let spec = ProblemSpec::new(model.clone(), Domain::Closed, vec![0.0; 256]).unwrap();
        assert!(sup(&residual(&spec, &vec![0.7; 256]).unwrap()) < 1e-14);
        let spec = ProblemSpec::new(model, Domain::Closed, vec![1.0; 256]).unwrap();
        for r in residual(&spec, &vec![0.7; 256]).unwrap() {
            assert!((r + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let model = square(8, "1+0.2*x1+0.1*x2*x2");
        let energy = GraphEnergy::new(&model);
        let u = sample(&model, |x| 0.1 * (x[0] * 3.0).sin() + 0.05 * x[1]);
        let g = energy.gradient(&u).unwrap();
        let k = energy.negative_hessian(&u).unwrap();
        assert!(k.is_symmetric(1e-14));
        let eps = 1e-6;
        for i in [0, 9, 27, 63] {
            let mut up = u.clone();
            let mut um = u.clone();
            up[i] += eps;
            um[i] -= eps;
            let fd = (energy.energy(&up).unwrap() - energy.energy(&um).unwrap()) / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-8, "node {i}: {fd} vs {}", g[i]);
            let gp = energy.gradient(&up).unwrap();
            let gm = energy.gradient(&um).unwrap();
            for j in 0..u.len() {
                let fd = -(gp[j] - gm[j]) / (2.0 * eps);
                assert!((fd - k.get(j, i)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn closed_gradient_sums_to_zero() {
        let model = torus(16, "1+0.3*sin(2*pi*x1)");
        let energy = GraphEnergy::new(&model);
        let u = sample(&model, |x| 0.1 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
        let g = energy.gradient(&u).unwrap();
        assert!(g.iter().sum::<f64>().abs() < 1e-14);
        let k = energy.negative_hessian(&u).unwrap();
        assert!(sup(&k.matvec(&vec![1.0; 256])) < 1e-12);
    }

    #[test]
    fn operator_is_second_order_consistent() {
        let h = "1+0.3*sin(2*pi*x1)*cos(2*pi*x2)";
        let f = |x: &[f64]| 0.03 * (2.0 * PI * x[0]).cos() + 0.02 * (2.0 * PI * (x[0] + x[1])).sin();
        let err = |n: usize| {
            let model = torus(n, h);
            let u = sample(&model, f);
            let op = GraphEnergy::new(&model).operator(&u).unwrap();
            let reference = model.graph_mean_curvature(&model.graph(u).unwrap()).unwrap();
            op.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e2 < 1e-2, "{e1} {e2}");
        assert!((3.0..5.0).contains(&(e1 / e2)), "{e1} {e2}");
    }

    #[test]
    fn closed_maximal_graphs_are_constant() {
        let model = torus(24, "1+0.3*cos(2*pi*x1)*cos(2*pi*x2)");
        let init = sample(&model, |x| 0.05 * (2.0 * PI * x[0]).sin() + 0.03 * (2.0 * PI * x[1]).cos());
        let spec = ProblemSpec::new(model, Domain::Closed, vec![0.0; 576]).unwrap().with_init(init);
        let out = solve(&spec).unwrap();
        assert_eq!(out.verdict, Verdict::Converged);
        assert!(out.final_residual <= out.tolerance);
        assert!(out.spread < 1e-9, "spread {}", out.spread);
        assert!(out.residual_history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn constant_mean_curvature_on_closed_domain_is_infeasible() {
        let model = torus(16, "1+0.3*cos(2*pi*x1)");
        let spec = ProblemSpec::new(model.clone(), Domain::Closed, vec![0.5; 256]).unwrap();
        let out = solve(&spec).unwrap();
        assert_eq!(out.verdict, Verdict::InfeasibleByNecessaryCondition);
        assert!(!out.converged);
        let volume = model.mesh().integrate_density(&vec![1.0; 256], &model.solver_density());
        assert!((out.necessary_condition.unwrap() - 0.5 * volume).abs() < 1e-12);
    }

    #[test]
    fn closed_manufactured_solution_is_recovered_up_to_a_constant() {
        let model = torus(24, "1+0.3*sin(2*pi*x1)");
        let exact = sample(&model, |x| 0.1 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin());
        let target = GraphEnergy::new(&model).operator(&exact).unwrap();
        let spec = ProblemSpec::new(model.clone(), Domain::Closed, target).unwrap();
        let out = solve(&spec).unwrap();
        assert_eq!(out.verdict, Verdict::Converged);
        let d: Vec<f64> = out.u.iter().zip(&exact).map(|(a, b)| a - b).collect();
        assert!(spread(&d) < 1e-8, "{}", spread(&d));
    }

    #[test]
    fn dirichlet_constant_boundary_gives_constant_solution() {
        let model = square(16, "1+0.5*x1*x2");
        let spec = ProblemSpec::new(model, Domain::Dirichlet { boundary_values: vec![2.0; 256] }, vec![0.0; 256]).unwrap();
        let out = solve(&spec).unwrap();
        assert!(out.converged);
        assert!(out.u.iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn dirichlet_manufactured_solution_is_recovered() {
        let model = square(20, "1+0.5*x1*x2");
        let exact = sample(&model, |x| 0.2 * x[0] * x[1] + 0.1 * (PI * x[0]).sin() * (PI * x[1]).sin());
        let target = GraphEnergy::new(&model).operator(&exact).unwrap();
        let spec = ProblemSpec::new(model, Domain::Dirichlet { boundary_values: exact.clone() }, target).unwrap();
        let out = solve(&spec).unwrap();
        assert_eq!(out.verdict, Verdict::Converged);
        assert!(out.u.iter().zip(&exact).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn rejects_mismatched_domains() {
        let model = square(8, "1");
        assert!(matches!(ProblemSpec::new(model.clone(), Domain::Closed, vec![0.0; 64]), Err(GeomError::HasBoundary)));
        let spec = ProblemSpec::new(model, Domain::Dirichlet { boundary_values: vec![0.0; 64] }, vec![0.0; 64]).unwrap();
        assert!(matches!(necessary_condition(&spec), Err(GeomError::NotClosed)));
        let closed = ProblemSpec::new(torus(8, "1"), Domain::Closed, vec![0.0; 64]).unwrap();
        assert!(matches!(inequality_solution_check(&closed, &vec![0.0; 64], 1e-9), Err(GeomError::NotDirichlet)));
    }

    #[test]
    fn inequality_check_readings() {
        let model = square(24, "1");
        let u0 = sample(&model, |x| 0.1 * x[0]);
        let spec = ProblemSpec::new(model.clone(), Domain::Dirichlet { boundary_values: u0.clone() }, vec![0.0; 576]).unwrap();
        let same = inequality_solution_check(&spec, &u0, 1e-9).unwrap();
        assert!(same.conditions_hold && !same.constant);
        let bump: Vec<f64> = sample(&model, |x| 0.1 * x[0] + 0.05 * (PI * x[0]).sin() * (PI * x[1]).sin());
        let rep = inequality_solution_check(&spec, &bump, 1e-9).unwrap();
        assert!(!rep.operator_nonnegative);
        assert!(!rep.failing_nodes.is_empty());
        assert!(rep.operator_nonpositive && rep.boundary_matches && rep.above_boundary_value);
        assert!(rep.nonpositive_reading_counterexample);
    }
}
