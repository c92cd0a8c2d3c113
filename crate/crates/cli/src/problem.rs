//! Problem files: JSON schema and conversion into solver inputs.

use std::path::Path;

use qentropy::{ConstraintKind, ConstraintSet, Distribution, MomentFunction, QIndex, SupportGrid};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub grid: GridSpec,
    /// Reference density `r`. Absent: maxent for q-expectation constraints,
    /// uniform prior for normalized ones.
    #[serde(default)]
    pub prior: Option<Vec<f64>>,
    /// Density `l` for triangle verification.
    #[serde(default)]
    pub truth: Option<Vec<f64>>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default)]
    pub kind: Option<ConstraintKind>,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub q_list: Option<Vec<f64>>,
    #[serde(default)]
    pub options: OptionsSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    Counting,
    Trapezoid,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: Vec<f64>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Used when `weights` is absent; defaults to counting weights.
    #[serde(default)]
    pub rule: Option<QuadratureRule>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub label: String,
    pub values: Vec<f64>,
    /// Required by `solve` and `sweep-q`; ignored by `verify-triangle`.
    #[serde(default)]
    pub target: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub eps_classical: Option<f64>,
}

pub fn load(path: &Path) -> Result<ProblemFile> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ProblemFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn invalid(what: &str, err: qentropy::Error) -> CliError {
    CliError::Invalid(format!("{what}: {err}"))
}

fn trapezoid_weights(points: &[f64]) -> Result<Vec<f64>> {
    let n = points.len();
    if n < 2 {
        return Err(CliError::Invalid("grid: trapezoid rule needs at least 2 points".into()));
    }
    if points.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(CliError::Invalid("grid: trapezoid rule needs increasing points".into()));
    }
    Ok((0..n)
        .map(|i| {
            let left = if i > 0 { points[i] - points[i - 1] } else { 0.0 };
            let right = if i + 1 < n { points[i + 1] - points[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect())
}

impl ProblemFile {
    pub fn grid(&self) -> Result<SupportGrid> {
        let g = &self.grid;
        let weights = match (&g.weights, g.rule) {
            (Some(_), Some(_)) => {
                return Err(CliError::Invalid("grid: give either weights or rule, not both".into()))
            }
            (Some(w), None) => w.clone(),
            (None, Some(QuadratureRule::Trapezoid)) => trapezoid_weights(&g.points)?,
            (None, _) => vec![1.0; g.points.len()],
        };
        SupportGrid::new(g.points.clone(), weights).map_err(|e| invalid("grid", e))
    }

    pub fn kind(&self, flag: Option<ConstraintKind>) -> ConstraintKind {
        flag.or(self.kind).unwrap_or(ConstraintKind::QExpectation)
    }

    pub fn q_index(&self, q: f64) -> Result<QIndex> {
        let r = match self.options.eps_classical {
            Some(eps) => QIndex::with_classical_eps(q, eps),
            None => QIndex::new(q),
        };
        r.map_err(|e| invalid("q", e))
    }

    pub fn single_q(&self) -> Result<QIndex> {
        let q = self
            .q
            .ok_or_else(|| CliError::Invalid("q: missing".into()))?;
        self.q_index(q)
    }

    pub fn prior(&self, grid: &SupportGrid) -> Result<Option<Distribution>> {
        self.prior
            .as_ref()
            .map(|d| Distribution::new(grid.clone(), d.clone()).map_err(|e| invalid("prior", e)))
            .transpose()
    }

    pub fn truth(&self, grid: &SupportGrid) -> Result<Distribution> {
        let d = self
            .truth
            .as_ref()
            .ok_or_else(|| CliError::Invalid("truth: missing".into()))?;
        Distribution::new(grid.clone(), d.clone()).map_err(|e| invalid("truth", e))
    }

    pub fn moment_functions(&self) -> Vec<MomentFunction> {
        self.constraints
            .iter()
            .map(|c| MomentFunction::new(c.label.clone(), c.values.clone()))
            .collect()
    }

    pub fn constraint_set(&self, kind: ConstraintKind) -> Result<ConstraintSet> {
        let targets = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.target
                    .ok_or_else(|| CliError::Invalid(format!("constraints[{i}].target: missing")))
            })
            .collect::<Result<Vec<_>>>()?;
        ConstraintSet::new(self.moment_functions(), targets, kind)
            .map_err(|e| invalid("constraints", e))
    }
}
