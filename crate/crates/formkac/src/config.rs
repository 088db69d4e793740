//! Experiment configuration: a flat TOML file with one `[experiment]` table.
//!
//! Parse errors keep the toml line/column anchors; validation errors name
//! the missing or invalid field.

use crate::error::{Error, Result};
use crate::geometry::ManifoldModel;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "fk")]
    Fk,
    #[serde(rename = "bound")]
    Bound,
    #[serde(rename = "ssp")]
    Ssp,
    #[serde(rename = "theta")]
    Theta,
    #[serde(rename = "domination")]
    Domination,
    #[serde(rename = "occupation")]
    Occupation,
    #[serde(rename = "intfor")]
    IntegralIdentity,
    #[serde(rename = "dx")]
    DistanceCoercivity,
    #[serde(rename = "spinor")]
    Spinor,
    #[serde(rename = "algebra-suite")]
    AlgebraSuite,
}

impl ExperimentKind {
    pub fn id(&self) -> &'static str {
        match self {
            ExperimentKind::Fk => "fk",
            ExperimentKind::Bound => "bound",
            ExperimentKind::Ssp => "ssp",
            ExperimentKind::Theta => "theta",
            ExperimentKind::Domination => "domination",
            ExperimentKind::Occupation => "occupation",
            ExperimentKind::IntegralIdentity => "intfor",
            ExperimentKind::DistanceCoercivity => "dx",
            ExperimentKind::Spinor => "spinor",
            ExperimentKind::AlgebraSuite => "algebra-suite",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Model id from the catalog; unused by `algebra-suite` and `spinor`.
    pub model: Option<String>,
    pub dim: Option<usize>,
    #[serde(default)]
    pub model_params: BTreeMap<String, f64>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub n_paths: Option<usize>,
    pub t_grid: Option<Vec<f64>>,
    pub t_max: Option<f64>,
    pub q: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub oracle_compare: bool,
    /// Named field/weight selections per kind (`omega0`, `alpha`, `beta`,
    /// `set`, `profile`, `f`).
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
    /// Numeric parameters of the field selections (`alpha_value`,
    /// `radius`, `depth`, `d_list`, ...).
    #[serde(default)]
    pub field_params: BTreeMap<String, f64>,
    /// Starting-point dither: `count` points spaced by `spacing` along the
    /// first chart axis (the compact-sup realization of the starting set).
    pub x0_dither_count: Option<usize>,
    pub x0_dither_spacing: Option<f64>,
    pub n_grid: Option<usize>,
    pub n_forms: Option<usize>,
    pub out_dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct ConfigFile {
    experiment: ExperimentConfig,
}

impl ExperimentConfig {
    /// Parse and validate a config file.
    pub fn from_str(text: &str) -> Result<Self> {
        let parsed: ConfigFile = toml::from_str(text)
            .map_err(|e| Error::Config(format!("{e}")))?;
        let cfg = parsed.experiment;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn require<T: Copy>(opt: Option<T>, field: &str) -> Result<T> {
        opt.ok_or_else(|| Error::Config(format!("missing required field '{field}'")))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Build the configured model.
    pub fn build_model(&self) -> Result<ManifoldModel> {
        let id = self
            .model
            .as_deref()
            .ok_or_else(|| Error::Config("missing required field 'model'".into()))?;
        let dim = Self::require(self.dim, "dim")?;
        ManifoldModel::from_id(id, dim, self.model_params.clone())
            .map_err(|e| Error::Config(format!("model: {e}")))
    }

    pub fn x0_vector(&self) -> Result<nalgebra::DVector<f64>> {
        let x0 = self
            .x0
            .as_ref()
            .ok_or_else(|| Error::Config("missing required field 'x0'".into()))?;
        if let Some(d) = self.dim {
            if x0.len() != d {
                return Err(Error::Config(format!(
                    "x0 has length {}, dim is {d}",
                    x0.len()
                )));
            }
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("x0 has a non-finite entry".into()));
        }
        Ok(nalgebra::DVector::from_vec(x0.clone()))
    }

    pub fn field(&self, name: &str) -> Option<&str> {
        self.fields.get(name).map(|s| s.as_str())
    }

    pub fn field_param(&self, name: &str, default: f64) -> f64 {
        self.field_params.get(name).copied().unwrap_or(default)
    }

    /// Kind-specific validation; every error names its field.
    pub fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            return Err(Error::Config("missing required field 'seed'".into()));
        }
        let needs_paths = matches!(
            self.kind,
            ExperimentKind::Fk
                | ExperimentKind::Bound
                | ExperimentKind::Ssp
                | ExperimentKind::Theta
                | ExperimentKind::Domination
                | ExperimentKind::Occupation
                | ExperimentKind::Spinor
        );
        if needs_paths {
            let dt = Self::require(self.dt, "dt")?;
            if !(dt > 0.0) {
                return Err(Error::Config("field 'dt' must be positive".into()));
            }
            let n_paths = Self::require(self.n_paths, "n_paths")?;
            if n_paths < 100 {
                return Err(Error::Config("field 'n_paths' must be >= 100".into()));
            }
        }
        let needs_model = !matches!(
            self.kind,
            ExperimentKind::AlgebraSuite | ExperimentKind::Spinor
        );
        if needs_model {
            self.build_model()?;
        }
        match self.kind {
            ExperimentKind::Fk | ExperimentKind::Bound | ExperimentKind::Domination => {
                Self::require(self.q, "q")?;
                self.x0_vector()?;
                let grid = self
                    .t_grid
                    .as_ref()
                    .ok_or_else(|| Error::Config("missing required field 't_grid'".into()))?;
                if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("field 't_grid' must be increasing".into()));
                }
            }
            ExperimentKind::Ssp => {
                self.x0_vector()?;
                let grid = self
                    .t_grid
                    .as_ref()
                    .ok_or_else(|| Error::Config("missing required field 't_grid'".into()))?;
                if grid.len() < 4 {
                    return Err(Error::Config("field 't_grid' needs >= 4 points".into()));
                }
            }
            ExperimentKind::Theta => {
                Self::require(self.q, "q")?;
                self.x0_vector()?;
                let tm = Self::require(self.t_max, "t_max")?;
                if !(tm > 0.0) {
                    return Err(Error::Config("field 't_max' must be positive".into()));
                }
            }
            ExperimentKind::Occupation => {
                self.x0_vector()?;
                if self.t_grid.as_ref().map(|g| g.len() < 3).unwrap_or(true) {
                    return Err(Error::Config("field 't_grid' needs >= 3 points".into()));
                }
            }
            ExperimentKind::IntegralIdentity | ExperimentKind::DistanceCoercivity => {
                Self::require(self.q, "q")?;
            }
            ExperimentKind::Spinor => {
                self.x0_vector().ok();
                let t = self
                    .t_grid
                    .as_ref()
                    .and_then(|g| g.first())
                    .copied()
                    .or(self.t_max);
                if t.is_none() {
                    return Err(Error::Config(
                        "missing required field 't_grid' (or 't_max')".into(),
                    ));
                }
            }
            ExperimentKind::AlgebraSuite => {}
        }
        Ok(())
    }
}
