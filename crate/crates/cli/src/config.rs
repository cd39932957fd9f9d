//! Run configuration, read from TOML or JSON. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use spacelab::{Axis, SolverConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelConfig>,
    pub mesh: Option<MeshConfig>,
    pub immersion: Option<ImmersionConfig>,
    pub field: Option<FieldConfig>,
    pub graph: Option<GraphConfig>,
    pub problem: Option<ProblemConfig>,
    pub solver: Option<SolverConfig>,
    pub data: Option<DataConfig>,
    pub submanifold: Option<ImmersionConfig>,
    pub flow: Option<FlowConfig>,
    pub region: Option<RegionConfig>,
    pub suite: Option<SuiteConfig>,
    pub tolerances: Option<Tolerances>,
    pub output: Option<OutputConfig>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindConfig {
    Minkowski,
    Static,
    OrthogonalSplitted,
    Custom,
}

/// A spacetime. Component expressions are strings in the named coordinates,
/// time first.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKindConfig,
    pub coords: Vec<String>,
    /// `h` in `-h dt² + g₀` (static).
    pub lapse: Option<String>,
    /// `g₀` (static).
    pub base_metric: Option<Vec<Vec<String>>>,
    /// `β` in `-β dt² + g_t` (orthogonal splitted).
    pub beta: Option<String>,
    /// `g_t` (orthogonal splitted).
    pub spatial_metric: Option<Vec<Vec<String>>>,
    /// Full metric (custom).
    pub components: Option<Vec<Vec<String>>>,
    pub future: Option<Vec<String>>,
    #[serde(default)]
    pub parallel_lightlike: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub axes: Vec<Axis>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionConfig {
    pub params: Vec<String>,
    /// One expression per ambient coordinate.
    pub map: Option<Vec<String>>,
    /// Node table with one column per ambient coordinate, rows in node order.
    pub csv: Option<PathBuf>,
    /// Ambient jump across each periodic axis (node tables only).
    pub shifts: Option<Vec<Vec<f64>>>,
    /// Parameter mesh of a `[submanifold]`; `[immersion]` uses `[mesh]`.
    pub axes: Option<Vec<Axis>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub components: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// Expression in the base coordinates.
    pub u: Option<String>,
    /// Node table with a `u` column.
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainConfig {
    Closed,
    Dirichlet,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub domain: DomainConfig,
    /// `u₀` on the boundary, as an expression in the base coordinates.
    pub boundary_value: Option<String>,
    pub target_h: Option<String>,
    /// Node table with an `h` column.
    pub target_h_csv: Option<PathBuf>,
    pub u_init: Option<String>,
    /// Also evaluate the maximum-principle conditions at the solution
    /// (Dirichlet only).
    #[serde(default)]
    pub inequality_check: bool,
}

/// Initial data `(g, A, φ, X)` on the mesh, in the slice coordinates.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub coords: Vec<String>,
    pub metric: Vec<Vec<String>>,
    /// `A^i_j` with row `i`, column `j`.
    pub shape: Vec<Vec<String>>,
    pub phi: String,
    pub x: Vec<String>,
    pub constraint_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub development: ModelConfig,
    /// Slice map over the mesh, in development coordinates.
    pub params: Vec<String>,
    pub map: Vec<String>,
    /// Node indices to follow; all nodes when absent.
    pub sample: Option<Vec<usize>>,
    pub cap: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    200
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub threads: Vec<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Causal-character threshold for mean curvature vectors.
    pub causal: Option<f64>,
    /// Constant `C` of the accepted integral bound `C h²`.
    pub identity_constant: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "yes")]
    pub csv: bool,
}

fn yes() -> bool {
    true
}

impl RunConfig {
    /// Parse by extension: `.json` as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<(RunConfig, PathBuf), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(toml_diagnostic(path, &text, &e)))?
        };
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    pub fn csv_enabled(&self) -> bool {
        self.output.as_ref().is_none_or(|o| o.csv)
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances.clone().unwrap_or_default()
    }
}

fn toml_diagnostic(path: &Path, text: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("{}: line {line}: {}", path.display(), e.message())
        }
        None => format!("{}: {}", path.display(), e.message()),
    }
}

/// Fetch a required section or report it missing.
pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
}
