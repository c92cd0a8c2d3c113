//! Weighted support grids, densities, and moment constraints.
//!
//! A [`SupportGrid`] carries quadrature weights; for discrete supports every
//! weight is 1. Densities are stored per grid point and integrate as
//! `Σ weight_i · f_i`. Zero-density points stay on the grid so that several
//! distributions can share it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qalgebra::QIndex;

/// Mass tolerance within which a density is accepted as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-10;
/// Mass tolerance within which a density is silently renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl SupportGrid {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one point".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                found: weights.len(),
            });
        }
        for (i, &x) in points.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite { index: i, value: x });
            }
        }
        if let Some(i) = points.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(format!(
                "points must be strictly increasing (index {})",
                i + 1
            )));
        }
        if let Some((i, &w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidGrid(format!(
                "weight {i} must be positive and finite, got {w}"
            )));
        }
        Ok(Self { points, weights })
    }

    /// Discrete support: unit weights on the given abscissae.
    pub fn discrete(points: Vec<f64>) -> Result<Self> {
        let weights = vec![1.0; points.len()];
        Self::new(points, weights)
    }

    /// Discrete support `0, 1, ..., n-1` with unit weights.
    ///
    /// # Panics
    /// If `n == 0`.
    pub fn counting(n: usize) -> Self {
        assert!(n > 0, "counting grid needs at least one point");
        Self {
            points: (0..n).map(|i| i as f64).collect(),
            weights: vec![1.0; n],
        }
    }

    /// `n` equally spaced points on `[start, end]` with trapezoid weights.
    pub fn trapezoid(start: f64, end: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid("trapezoid rule needs n >= 2".into()));
        }
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::InvalidGrid(format!(
                "trapezoid interval [{start}, {end}] is empty or non-finite"
            )));
        }
        let h = (end - start) / (n - 1) as f64;
        let points = (0..n).map(|i| start + h * i as f64).collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Self::new(points, weights)
    }

    /// Flattened product of two grids; points become the flat index.
    pub fn product(a: &SupportGrid, b: &SupportGrid) -> Self {
        let n = a.len() * b.len();
        let weights = a
            .weights
            .iter()
            .flat_map(|wa| b.weights.iter().map(move |wb| wa * wb))
            .collect();
        Self {
            points: (0..n).map(|i| i as f64).collect(),
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `W = Σ weights`, the measure of the support.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        integrate(f, self)
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found,
            });
        }
        Ok(())
    }
}

/// `Σ_i weight_i · f_i`.
pub fn integrate(f: &[f64], grid: &SupportGrid) -> Result<f64> {
    grid.check_len(f.len())?;
    Ok(f.iter().zip(&grid.weights).map(|(f, w)| f * w).sum())
}

/// A normalized, nonnegative density on a [`SupportGrid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    grid: SupportGrid,
    density: Vec<f64>,
}

impl Distribution {
    /// Validates and, if the mass is off by at most [`RENORMALIZE_TOL`],
    /// renormalizes the density.
    pub fn new(grid: SupportGrid, density: Vec<f64>) -> Result<Self> {
        let mass = check_density(&grid, &density)?;
        if (mass - 1.0).abs() <= NORMALIZATION_TOL {
            Ok(Self { grid, density })
        } else if (mass - 1.0).abs() <= RENORMALIZE_TOL {
            Ok(Self::scaled(grid, density, mass))
        } else {
            Err(Error::NotNormalized { mass })
        }
    }

    /// Normalizes an arbitrary nonnegative function on the grid.
    pub fn from_unnormalized(grid: SupportGrid, values: Vec<f64>) -> Result<Self> {
        let mass = check_density(&grid, &values)?;
        if mass <= 0.0 || !mass.is_finite() {
            return Err(Error::CutoffCollapse);
        }
        Ok(Self::scaled(grid, values, mass))
    }

    fn scaled(grid: SupportGrid, mut density: Vec<f64>, mass: f64) -> Self {
        density.iter_mut().for_each(|d| *d /= mass);
        Self { grid, density }
    }

    pub fn grid(&self) -> &SupportGrid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.grid
            .weights
            .iter()
            .zip(&self.density)
            .map(|(w, d)| w * d)
            .sum()
    }

    /// `∫ p^q`, the escort normalizer.
    pub fn q_mass(&self, q: QIndex) -> f64 {
        let e = q.effective();
        self.grid
            .weights
            .iter()
            .zip(&self.density)
            .filter(|(_, &d)| d > 0.0)
            .map(|(w, d)| w * d.powf(e))
            .sum()
    }

    /// Product distribution on the flattened product grid.
    pub fn product(&self, other: &Distribution) -> Distribution {
        let grid = SupportGrid::product(&self.grid, &other.grid);
        let density = self
            .density
            .iter()
            .flat_map(|a| other.density.iter().map(move |b| a * b))
            .collect();
        Distribution { grid, density }
    }

    /// Ordinary expectation `∫ f p`.
    pub fn expectation(&self, f: &[f64]) -> Result<f64> {
        self.grid.check_len(f.len())?;
        Ok(self
            .grid
            .weights
            .iter()
            .zip(&self.density)
            .zip(f)
            .map(|((w, d), f)| w * d * f)
            .sum())
    }

    pub(crate) fn same_grid(&self, other: &Distribution) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

fn check_density(grid: &SupportGrid, density: &[f64]) -> Result<f64> {
    grid.check_len(density.len())?;
    for (i, &d) in density.iter().enumerate() {
        if !d.is_finite() {
            return Err(Error::NonFinite { index: i, value: d });
        }
        if d < 0.0 {
            return Err(Error::NegativeDensity { index: i, value: d });
        }
    }
    integrate(density, grid)
}

/// Samples of a moment function `u_m` on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentFunction {
    pub label: String,
    pub values: Vec<f64>,
}

impl MomentFunction {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `∫ u p^q = target`.
    QExpectation,
    /// `∫ u p^q / ∫ p^q = target`.
    NormalizedQExpectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub functions: Vec<MomentFunction>,
    pub targets: Vec<f64>,
    pub kind: ConstraintKind,
}

impl ConstraintSet {
    pub fn new(
        functions: Vec<MomentFunction>,
        targets: Vec<f64>,
        kind: ConstraintKind,
    ) -> Result<Self> {
        if functions.len() != targets.len() {
            return Err(Error::LengthMismatch {
                expected: functions.len(),
                found: targets.len(),
            });
        }
        if let Some((i, &t)) = targets.iter().enumerate().find(|(_, t)| !t.is_finite()) {
            return Err(Error::NonFinite { index: i, value: t });
        }
        Ok(Self {
            functions,
            targets,
            kind,
        })
    }

    /// No moment constraints, only normalization.
    pub fn empty(kind: ConstraintKind) -> Self {
        Self {
            functions: Vec::new(),
            targets: Vec::new(),
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Self> {
        Self::new(self.functions.clone(), targets, self.kind)
    }

    pub fn with_kind(&self, kind: ConstraintKind) -> Self {
        Self {
            kind,
            ..self.clone()
        }
    }

    /// Checks every moment function against the grid length.
    pub fn check_grid(&self, grid: &SupportGrid) -> Result<()> {
        for f in &self.functions {
            grid.check_len(f.values.len())?;
            if let Some((i, &v)) = f.values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite { index: i, value: v });
            }
        }
        Ok(())
    }

    /// Evaluates the functional matching `self.kind` for every moment function.
    pub fn expectations(&self, p: &Distribution, q: QIndex) -> Result<Vec<f64>> {
        self.functions
            .iter()
            .map(|u| match self.kind {
                ConstraintKind::QExpectation => q_expectation(p, u, q),
                ConstraintKind::NormalizedQExpectation => normalized_q_expectation(p, u, q),
            })
            .collect()
    }
}

/// `∫ u p^q`.
pub fn q_expectation(p: &Distribution, u: &MomentFunction, q: QIndex) -> Result<f64> {
    p.grid.check_len(u.values.len())?;
    let e = q.effective();
    Ok(p.grid
        .weights
        .iter()
        .zip(&p.density)
        .zip(&u.values)
        .filter(|((_, &d), _)| d > 0.0)
        .map(|((w, d), u)| w * u * d.powf(e))
        .sum())
}

/// `∫ u p^q / ∫ p^q`.
pub fn normalized_q_expectation(p: &Distribution, u: &MomentFunction, q: QIndex) -> Result<f64> {
    let num = q_expectation(p, u, q)?;
    let den = p.q_mass(q);
    if den <= 0.0 || !den.is_finite() {
        return Err(Error::DegenerateDenominator("∫ p^q vanishes"));
    }
    Ok(num / den)
}

/// True iff `p_i > 0` implies `r_i > 0` at every grid point.
pub fn absolutely_continuous(p: &Distribution, r: &Distribution) -> Result<bool> {
    p.same_grid(r)?;
    Ok(first_violation(p, r).is_none())
}

pub(crate) fn first_violation(p: &Distribution, r: &Distribution) -> Option<usize> {
    p.density
        .iter()
        .zip(&r.density)
        .position(|(&a, &b)| a > 0.0 && b <= 0.0)
}

/// Uniform density `1/W` on the grid, together with `W = Σ weights`.
pub fn uniform_on(grid: &SupportGrid) -> (Distribution, f64) {
    let w = grid.total_weight();
    let density = vec![1.0 / w; grid.len()];
    (
        Distribution {
            grid: grid.clone(),
            density,
        },
        w,
    )
}
