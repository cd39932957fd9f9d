//! Turn configuration sections into library objects.

use std::path::Path;

use spacelab::{
    Ambient, FieldExpr, ImmersedSubmanifold, MetricField, MetricModel, ParamMesh, StaticModel, VectorFieldSpec,
};

use crate::config::{ImmersionConfig, MeshConfig, ModelConfig, ModelKindConfig};
use crate::error::CliError;

pub fn expr(text: &str) -> Result<FieldExpr, CliError> {
    FieldExpr::parse(text).map_err(|e| CliError::Config(format!("expression '{text}': {e}")))
}

pub fn exprs(list: &[String]) -> Result<Vec<FieldExpr>, CliError> {
    list.iter().map(|s| expr(s)).collect()
}

pub fn matrix(rows: &[Vec<String>]) -> Result<Vec<Vec<FieldExpr>>, CliError> {
    rows.iter().map(|r| exprs(r)).collect()
}

fn names(coords: &[String]) -> Vec<&str> {
    coords.iter().map(String::as_str).collect()
}

fn field<'a, T>(value: &'a Option<T>, key: &str, kind: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("model kind {kind} needs '{key}'")))
}

pub fn model(cfg: &ModelConfig) -> Result<MetricModel, CliError> {
    let c = names(&cfg.coords);
    let base = match cfg.kind {
        ModelKindConfig::Minkowski => MetricModel::minkowski(&c)?,
        ModelKindConfig::Static => MetricModel::standard_static(
            &c,
            expr(field(&cfg.lapse, "lapse", "static")?)?,
            matrix(field(&cfg.base_metric, "base_metric", "static")?)?,
        )?,
        ModelKindConfig::OrthogonalSplitted => MetricModel::orthogonal_splitted(
            &c,
            expr(field(&cfg.beta, "beta", "orthogonal_splitted")?)?,
            matrix(field(&cfg.spatial_metric, "spatial_metric", "orthogonal_splitted")?)?,
        )?,
        ModelKindConfig::Custom => MetricModel::custom(&c, matrix(field(&cfg.components, "components", "custom")?)?)?,
    };
    let with_future = match &cfg.future {
        Some(f) => base.with_future(VectorFieldSpec::new(exprs(f)?))?,
        None => base,
    };
    Ok(with_future.with_parallel_lightlike(cfg.parallel_lightlike))
}

pub fn mesh(cfg: &MeshConfig) -> Result<ParamMesh, CliError> {
    Ok(ParamMesh::new(cfg.axes.clone())?)
}

pub fn static_model(cfg: &ModelConfig, mesh: ParamMesh) -> Result<StaticModel, CliError> {
    if cfg.kind != ModelKindConfig::Static {
        return Err(CliError::Config("this command needs a model of kind 'static'".into()));
    }
    Ok(StaticModel::new(
        mesh,
        &names(&cfg.coords),
        expr(field(&cfg.lapse, "lapse", "static")?)?,
        matrix(field(&cfg.base_metric, "base_metric", "static")?)?,
    )?)
}

pub fn vector(components: &[String]) -> Result<VectorFieldSpec, CliError> {
    Ok(VectorFieldSpec::new(exprs(components)?))
}

pub fn immersion(
    cfg: &ImmersionConfig,
    mesh: ParamMesh,
    ambient: Ambient,
    base_dir: &Path,
) -> Result<ImmersedSubmanifold, CliError> {
    match (&cfg.map, &cfg.csv) {
        (Some(map), None) => Ok(ImmersedSubmanifold::from_map(mesh, ambient, &names(&cfg.params), &exprs(map)?)?),
        (None, Some(path)) => {
            let coords = ambient.field().coords().to_vec();
            let columns = read_columns(&base_dir.join(path), &coords, mesh.len())?;
            let nodes = (0..mesh.len()).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
            let m = coords.len();
            let shifts = match &cfg.shifts {
                Some(s) => s.clone(),
                None => vec![vec![0.0; m]; mesh.dim()],
            };
            Ok(ImmersedSubmanifold::from_nodes(mesh, ambient, nodes, shifts)?)
        }
        _ => Err(CliError::Config("immersion needs exactly one of 'map' or 'csv'".into())),
    }
}

pub fn riemannian(coords: &[String], metric: &[Vec<String>]) -> Result<MetricField, CliError> {
    Ok(MetricField::new(&names(coords), matrix(metric)?)?)
}

/// Named numeric columns of a headed CSV table, each of length `rows`.
pub fn read_columns(path: &Path, wanted: &[String], rows: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let fail = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
    let headers = reader.headers().map_err(|e| fail(e.to_string()))?.clone();
    let index: Vec<usize> = wanted
        .iter()
        .map(|w| {
            headers
                .iter()
                .position(|h| h.trim() == w)
                .ok_or_else(|| fail(format!("missing column '{w}'")))
        })
        .collect::<Result<_, _>>()?;
    let mut columns = vec![Vec::with_capacity(rows); wanted.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        for (col, &k) in columns.iter_mut().zip(&index) {
            let cell = record.get(k).unwrap_or("");
            let value = cell
                .trim()
                .parse::<f64>()
                .map_err(|_| fail(format!("row {}: '{cell}' is not a number", line + 2)))?;
            col.push(value);
        }
    }
    if columns.iter().any(|c| c.len() != rows) {
        return Err(fail(format!("expected {rows} rows, one per mesh node")));
    }
    Ok(columns)
}
