//! Subcommand bodies. Each returns a JSON report, CSV dumps and an exit code.

use std::path::Path;

use serde_json::{json, Value};
use spacelab::{
    analyze_vector_field, div_s, inequality_solution_check, normal_flow_margin, solve, stationarity_obstruction,
    suite, tangential_divergence, verify_integral_formula, Ambient, CausalClass, Domain, FieldExpr,
    ImmersedSubmanifold, InitialDataSet, ParamMesh, ProblemSpec, Region, StaticModel, Verdict,
};

use crate::config::{require, DomainConfig, RunConfig};
use crate::error::{CliError, EXIT_FAILED, EXIT_HYPOTHESES, EXIT_NONCONVERGENT, EXIT_OK};
use crate::setup;

pub struct Outcome {
    pub report: Value,
    pub csv: Vec<(String, String)>,
    pub exit: i32,
}

impl Outcome {
    fn ok(report: Value, csv: Vec<(String, String)>) -> Self {
        Outcome {
            report,
            csv,
            exit: EXIT_OK,
        }
    }
}

pub fn conventions() -> Value {
    json!({
        "signature": "(-,+,...,+)",
        "mean_curvature": "H = -trace_g II",
        "riemann": "R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb",
        "sectional_curvature": "K = g(R(u,v)v,u) / (g(u,u)g(v,v) - g(u,v)^2)",
        "static_metric": "-h dt^2 + g0",
        "csv_columns": "node index, parameter coordinates, value columns",
    })
}

fn lorentzian_immersion(cfg: &RunConfig, base: &Path) -> Result<ImmersedSubmanifold, CliError> {
    let model = setup::model(require(&cfg.model, "model")?)?;
    let mesh = setup::mesh(require(&cfg.mesh, "mesh")?)?;
    setup::immersion(require(&cfg.immersion, "immersion")?, mesh, Ambient::Lorentzian(model), base)
}

fn class_code(c: CausalClass) -> f64 {
    match c {
        CausalClass::FutureTimelike => 0.0,
        CausalClass::PastTimelike => 1.0,
        CausalClass::FutureLightlike => 2.0,
        CausalClass::PastLightlike => 3.0,
        CausalClass::Zero => 4.0,
        CausalClass::Spacelike => 5.0,
    }
}

pub fn classify(cfg: &RunConfig, base: &Path) -> Result<Outcome, CliError> {
    let s = lorentzian_immersion(cfg, base)?;
    let rep = s.mean_curvature_vector(cfg.tolerances().causal)?;
    let counts: Vec<Value> = rep
        .class_counts()
        .iter()
        .map(|(c, k)| json!({ "class": c, "nodes": k }))
        .collect();
    let report = json!({
        "tag": rep.tag,
        "mean_curvature": rep,
        "class_counts": counts,
        "volume": if s.mesh().is_closed() { Some(s.volume()) } else { None },
        "spacing": s.mesh().max_spacing(),
        "class_codes": ["future_timelike", "past_timelike", "future_lightlike", "past_lightlike", "zero", "spacelike"],
    });
    let m = s.ambient().dim();
    let mut cols: Vec<(String, Vec<f64>)> = (0..m)
        .map(|a| (format!("H{a}"), rep.vectors.iter().map(|v| v[a]).collect()))
        .collect();
    let norms = s
        .geometry()
        .iter()
        .map(|g| {
            let h = &g.mean_curvature;
            (0..m).map(|a| (0..m).map(|b| g.ambient_metric[(a, b)] * h[a] * h[b]).sum::<f64>()).sum()
        })
        .collect();
    cols.push(("norm_squared".into(), norms));
    cols.push(("class".into(), rep.classes.iter().map(|c| class_code(*c)).collect()));
    Ok(Outcome::ok(report, vec![("mean_curvature.csv".into(), csv(s.mesh(), &cols))]))
}

fn csv(mesh: &ParamMesh, cols: &[(String, Vec<f64>)]) -> String {
    let refs: Vec<(&str, &[f64])> = cols.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    mesh.csv(&refs)
}

pub fn identities(cfg: &RunConfig, base: &Path) -> Result<Outcome, CliError> {
    let s = lorentzian_immersion(cfg, base)?;
    let x = setup::vector(&require(&cfg.field, "field")?.components)?;
    let div = div_s(&s, &x)?;
    let tang = tangential_divergence(&s, &x)?;
    let residual = spacelab::divergence_identity_residual(&s, &x)?;
    let max_residual = residual.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let integral = if s.mesh().is_closed() {
        let constant = cfg.tolerances().identity_constant.unwrap_or(1.0);
        Some(verify_integral_formula(&s, &x, constant)?)
    } else {
        None
    };
    let report = json!({
        "divergence_identity": { "max_pointwise_residual": max_residual, "spacing": s.mesh().max_spacing() },
        "integral_formula": integral,
    });
    let cols = vec![
        ("div_s".to_string(), div),
        ("tangential_divergence".to_string(), tang),
        ("residual".to_string(), residual),
    ];
    Ok(Outcome::ok(report, vec![("identities.csv".into(), csv(s.mesh(), &cols))]))
}

fn base_values(model: &StaticModel, text: &str) -> Result<Vec<f64>, CliError> {
    let names: Vec<String> = model.spacetime().coords()[1..].to_vec();
    let bound = setup::expr(text)?.bind(&names).map_err(|e| CliError::Config(format!("'{text}': {e}")))?;
    Ok(model.mesh().sample(|p| Ok(bound.eval(p)?))?)
}

fn static_setup(cfg: &RunConfig) -> Result<StaticModel, CliError> {
    let mesh = setup::mesh(require(&cfg.mesh, "mesh")?)?;
    setup::static_model(require(&cfg.model, "model")?, mesh)
}

fn stats(v: &[f64]) -> Value {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    json!({ "min": min, "max": max, "mean": v.iter().sum::<f64>() / v.len() as f64 })
}

pub fn graph(cfg: &RunConfig, base: &Path) -> Result<Outcome, CliError> {
    let model = static_setup(cfg)?;
    let gcfg = require(&cfg.graph, "graph")?;
    let u = match (&gcfg.u, &gcfg.csv) {
        (Some(text), None) => base_values(&model, text)?,
        (None, Some(path)) => setup::read_columns(&base.join(path), &["u".into()], model.mesh().len())?.remove(0),
        _ => return Err(CliError::Config("[graph] needs exactly one of 'u' or 'csv'".into())),
    };
    let g = model.graph(u)?;
    let (spacelike, min_margin) = g.spacelike_check();
    if !spacelike {
        let report = json!({ "spacelike": false, "min_margin": min_margin });
        let cols = vec![("u".to_string(), g.u.clone()), ("margin".to_string(), g.margin.clone())];
        return Ok(Outcome {
            report,
            csv: vec![("graph.csv".into(), csv(model.mesh(), &cols))],
            exit: EXIT_HYPOTHESES,
        });
    }
    let angle: Vec<f64> = model.hyperbolic_angle(&g)?.iter().map(|c| c.acosh()).collect();
    let h = model.graph_mean_curvature(&g)?;
    let imm = model.graph_immersion(&g)?;
    let laplacian = model.laplacian_tau(&imm)?;
    let conformal = if model.dim() >= 3 {
        Some(model.conformal_laplacian_tau(&imm)?)
    } else {
        None
    };
    let report = json!({
        "spacelike": true,
        "min_margin": min_margin,
        "hyperbolic_angle": stats(&angle),
        "mean_curvature": stats(&h),
        "laplacian_tau": laplacian,
        "conformal_laplacian_tau": conformal,
    });
    let cols = vec![
        ("u".to_string(), g.u.clone()),
        ("margin".to_string(), g.margin.clone()),
        ("angle".to_string(), angle),
        ("H".to_string(), h),
    ];
    Ok(Outcome::ok(report, vec![("graph.csv".into(), csv(model.mesh(), &cols))]))
}

pub fn solve_problem(cfg: &RunConfig, base: &Path) -> Result<Outcome, CliError> {
    let model = static_setup(cfg)?;
    let p = require(&cfg.problem, "problem")?;
    let n = model.mesh().len();
    let target = match (&p.target_h, &p.target_h_csv) {
        (Some(text), None) => base_values(&model, text)?,
        (None, Some(path)) => setup::read_columns(&base.join(path), &["h".into()], n)?.remove(0),
        _ => return Err(CliError::Config("[problem] needs exactly one of 'target_h' or 'target_h_csv'".into())),
    };
    let domain = match p.domain {
        DomainConfig::Closed => Domain::Closed,
        DomainConfig::Dirichlet => {
            let text = p
                .boundary_value
                .as_deref()
                .ok_or_else(|| CliError::Config("a Dirichlet problem needs 'boundary_value'".into()))?;
            Domain::Dirichlet {
                boundary_values: base_values(&model, text)?,
            }
        }
    };
    let init = p.u_init.as_deref().map(|t| base_values(&model, t)).transpose()?;
    let mut spec = ProblemSpec::new(model, domain, target)?.with_config(cfg.solver.unwrap_or_default());
    if let Some(u) = init {
        spec = spec.with_init(u);
    }
    let out = solve(&spec)?;
    let inequality = if p.inequality_check && out.verdict == Verdict::Converged {
        Some(inequality_solution_check(&spec, &out.u, out.tolerance)?)
    } else {
        None
    };
    let exit = match out.verdict {
        Verdict::Nonconvergent => EXIT_NONCONVERGENT,
        Verdict::Converged | Verdict::InfeasibleByNecessaryCondition => EXIT_OK,
    };
    let cols = vec![("u".to_string(), out.u.clone()), ("target_h".to_string(), spec.target_h.clone())];
    let report = json!({ "verdict": out.verdict, "result": out, "inequality_check": inequality });
    Ok(Outcome {
        report,
        csv: vec![("u.csv".into(), csv(spec.model.mesh(), &cols))],
        exit,
    })
}

pub fn initial_data(cfg: &RunConfig, base: &Path) -> Result<Outcome, CliError> {
    let d = require(&cfg.data, "data")?;
    let mesh = setup::mesh(require(&cfg.mesh, "mesh")?)?;
    let metric = setup::riemannian(&d.coords, &d.metric)?;
    let data = InitialDataSet::new(
        mesh.clone(),
        metric.clone(),
        setup::matrix(&d.shape)?,
        setup::expr(&d.phi)?,
        setup::vector(&d.x)?,
    )?;
    let tol = d.constraint_tolerance.unwrap_or(1e-9);
    let constraints = data.constraint_residuals()?;
    let definiteness = data.definiteness_report()?;
    let obstruction = match &cfg.submanifold {
        Some(sub) => {
            let p = setup::immersion(sub, submanifold_mesh(cfg)?, Ambient::Riemannian(metric), base)?;
            Some(stationarity_obstruction(&data, &p)?)
        }
        None => None,
    };
    let flow = match &cfg.flow {
        Some(f) => {
            let development = setup::model(&f.development)?;
            let map: Vec<FieldExpr> = setup::exprs(&f.map)?;
            let params: Vec<&str> = f.params.iter().map(String::as_str).collect();
            let slice = ImmersedSubmanifold::from_map(mesh.clone(), Ambient::Lorentzian(development.clone()), &params, &map)?;
            let sample: Vec<usize> = f.sample.clone().unwrap_or_else(|| (0..mesh.len()).collect());
            Some(normal_flow_margin(&development, &slice, &sample, f.cap, f.steps)?)
        }
        None => None,
    };
    let report = json!({
        "constraints": constraints,
        "constraints_satisfied": constraints.satisfied(tol),
        "constraint_tolerance": tol,
        "shape_operator": definiteness,
        "obstruction": obstruction,
        "normal_flow": flow,
    });
    let cols = vec![
        ("hamiltonian".to_string(), constraints.hamiltonian.clone()),
        (
            "momentum_norm".to_string(),
            constraints
                .momentum
                .iter()
                .map(|m| m.iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect(),
        ),
    ];
    Ok(Outcome::ok(report, vec![("constraints.csv".into(), csv(&mesh, &cols))]))
}

fn submanifold_mesh(cfg: &RunConfig) -> Result<ParamMesh, CliError> {
    let axes = require(&cfg.submanifold, "submanifold")?
        .axes
        .clone()
        .ok_or_else(|| CliError::Config("[submanifold] needs its own 'axes'".into()))?;
    Ok(ParamMesh::new(axes)?)
}

pub fn symmetry(cfg: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let model = setup::model(require(&cfg.model, "model")?)?;
    let x = setup::vector(&require(&cfg.field, "field")?.components)?;
    let r = require(&cfg.region, "region")?;
    let region = Region::new(r.lower.clone(), r.upper.clone(), r.samples, seed)?;
    let report = analyze_vector_field(&model, &x, &region)?;
    Ok(Outcome::ok(json!({ "symmetry": report }), vec![]))
}

pub fn run_suite(cfg: &RunConfig, seed: u64) -> Result<Outcome, CliError> {
    let threads = cfg.suite.as_ref().map_or_else(|| vec![1, 2, 8], |s| s.threads.clone());
    if threads.is_empty() || threads.contains(&0) {
        return Err(CliError::Config("[suite] threads must be positive".into()));
    }
    let report = suite::run_suite(seed, &threads);
    let exit = if report.passed { EXIT_OK } else { EXIT_FAILED };
    let value = serde_json::to_value(&report).map_err(|e| CliError::Output(e.to_string()))?;
    Ok(Outcome {
        report: value,
        csv: vec![],
        exit,
    })
}
