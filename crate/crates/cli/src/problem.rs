//! JSON problem files.
//!
//! A problem file names a built-in dynamics model, the grid, the boundary
//! states and a formula. Predicates are written in the formula grammar and
//! may refer to numeric `constants` and to earlier named `predicates`:
//!
//! ```json
//! {
//!   "name": "hover",
//!   "dynamics": { "model": "point_mass_3d", "params": { "mass": 1.0 } },
//!   "grid": { "nodes": 2, "substeps": 4, "final_time": 1.0 },
//!   "initial_state": [0, 0, 1, 0, 0, 0],
//!   "final_state": [0, 0, 1, 0, 0, 0],
//!   "constants": { "floor": 0.5 },
//!   "predicates": [ { "name": "high", "formula": "rz >= floor" } ],
//!   "formula": "G[0, 1] high"
//! }
//! ```
//!
//! Optional sections: `gmsr`, `penalty`, `prox`, `qp` and `plot`.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use ctstl_core::dynamics::{build_model, DynamicsModel, ModelError};
use ctstl_core::gmsr::GmsrError;
use ctstl_core::qp::QpSettings;
use ctstl_core::scp::{PenaltyConfig, ProxConfig, ScpError, TrajectoryProblem};
use ctstl_core::stl::{parse_formula, ParseContext, ParseError};
use ctstl_core::transcription::{GridSpec, TranscriptionError};
use ctstl_core::{Formula, GmsrConfig};

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("predicate `{name}`: {source}")]
    Predicate { name: String, source: ParseError },
    #[error("formula: {0}")]
    Formula(ParseError),
    #[error(transparent)]
    Grid(#[from] TranscriptionError),
    #[error(transparent)]
    Gmsr(#[from] GmsrError),
    #[error(transparent)]
    Scp(#[from] ScpError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub model: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPredicate {
    pub name: String,
    pub formula: String,
}

/// Shift parameters. The two `Until` levels default to `c`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmsrSpec {
    pub c: f64,
    #[serde(default)]
    pub until_witness: Option<f64>,
    #[serde(default)]
    pub until_prefix: Option<f64>,
}

impl Default for GmsrSpec {
    fn default() -> Self {
        Self {
            c: GmsrConfig::default().c,
            until_witness: None,
            until_prefix: None,
        }
    }
}

impl GmsrSpec {
    pub fn config(&self) -> Result<GmsrConfig, GmsrError> {
        let cfg = GmsrConfig {
            c: self.c,
            until_witness: self.until_witness.unwrap_or(self.c),
            until_prefix: self.until_prefix.unwrap_or(self.c),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Circular target drawn on the path plot and used for the margin plot.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSpec {
    /// Position channels; the path plot uses the first two.
    pub position: Vec<String>,
    #[serde(default)]
    pub velocity: Vec<String>,
    /// Horizontal reference lines on the speed plot, as `(label, value)`.
    #[serde(default)]
    pub speed_limits: Vec<(String, f64)>,
    #[serde(default)]
    pub station: Option<StationSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default)]
    pub name: String,
    pub dynamics: DynamicsSpec,
    pub grid: GridSpec,
    pub initial_state: Vec<f64>,
    pub final_state: Vec<f64>,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    #[serde(default)]
    pub predicates: Vec<NamedPredicate>,
    #[serde(default)]
    pub formula: Option<String>,
    #[serde(default)]
    pub gmsr: GmsrSpec,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    #[serde(default)]
    pub prox: ProxConfig,
    #[serde(default)]
    pub qp: QpSettings,
    #[serde(default)]
    pub plot: Option<PlotSpec>,
}

/// A validated problem ready for the solver.
pub struct Problem {
    pub spec: ProblemSpec,
    pub trajectory: TrajectoryProblem,
}

impl ProblemSpec {
    pub fn from_path(path: &Path) -> Result<Self, ProblemError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProblemError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Parser context over `channels` with this file's constants and named
    /// predicates. Predicates are resolved in order, so each may use the
    /// ones listed before it.
    pub fn parse_context<I, S>(&self, channels: I) -> Result<ParseContext, ProblemError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut ctx = ParseContext::new(channels);
        for (k, v) in &self.constants {
            if !v.is_finite() {
                return Err(ProblemError::Invalid(format!("constant `{k}` is not finite")));
            }
            ctx = ctx.with_constant(k.clone(), *v);
        }
        for p in &self.predicates {
            let f = parse_formula(&p.formula, &ctx).map_err(|source| ProblemError::Predicate {
                name: p.name.clone(),
                source,
            })?;
            ctx = ctx.with_macro(p.name.clone(), f);
        }
        Ok(ctx)
    }

    /// Parses the top-level formula against `channels`.
    pub fn parse_formula_for<I, S>(&self, channels: I) -> Result<Option<Formula>, ProblemError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let ctx = self.parse_context(channels)?;
        match &self.formula {
            None => Ok(None),
            Some(text) => parse_formula(text, &ctx).map(Some).map_err(ProblemError::Formula),
        }
    }

    pub fn build(self) -> Result<Problem, ProblemError> {
        let model: Box<dyn DynamicsModel> = build_model(&self.dynamics.model, &self.dynamics.params)?;
        self.grid.validate()?;
        let formula = self.parse_formula_for(model.channels())?;
        let gmsr = self.gmsr.config()?;
        self.penalty.validate()?;
        self.prox.validate()?;
        if let Some(plot) = &self.plot {
            self.check_plot(plot, &model.channels())?;
        }
        let trajectory = TrajectoryProblem {
            model,
            grid: self.grid,
            formula,
            x_init: DVector::from_column_slice(&self.initial_state),
            x_final: DVector::from_column_slice(&self.final_state),
            gmsr,
        };
        trajectory.validate()?;
        Ok(Problem {
            spec: self,
            trajectory,
        })
    }

    fn check_plot(&self, plot: &PlotSpec, channels: &[String]) -> Result<(), ProblemError> {
        for ch in plot.position.iter().chain(&plot.velocity) {
            if !channels.contains(ch) {
                return Err(ProblemError::Invalid(format!("plot channel `{ch}` is not a model channel")));
            }
        }
        if plot.position.len() < 2 {
            return Err(ProblemError::Invalid("plot.position needs at least two channels".into()));
        }
        if let Some(st) = &plot.station {
            if st.center.len() != plot.position.len() {
                return Err(ProblemError::Invalid(
                    "plot.station.center must match plot.position in length".into(),
                ));
            }
            if !(st.radius > 0.0 && st.radius.is_finite()) {
                return Err(ProblemError::Invalid("plot.station.radius must be positive".into()));
            }
        }
        Ok(())
    }
}
