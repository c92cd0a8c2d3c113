//! Lagrange-multiplier solvers for generalized maxent and minxent problems.
//!
//! Three branches share one kernel (see `family`):
//!
//! | branch | density (before normalization) | constraint |
//! |---|---|---|
//! | [`Branch::MaxEnt`] | `exp_q(-Σ β_m u_m)` | `∫ u_m p^q = t_m` |
//! | [`Branch::MinXent`] / [`Branch::Classical`] | `exp_q(ln_q r - Σ β_m u_m)` | `∫ u_m p^q = t_m` |
//! | [`Branch::MinXentNormalized`] | `exp_q(ln_q r - Σ β_m (u_m - t_m) / ∫p^q)` | `∫ u_m p^q / ∫ p^q = t_m` |
//!
//! Multipliers start at zero (density = prior) and are found by damped
//! Newton iteration on a convex dual potential.

mod family;
mod thermo;

use serde::Serialize;

use crate::distribution::{ConstraintKind, ConstraintSet, Distribution, MomentFunction, SupportGrid};
use crate::entropy::{tsallis_entropy, tsallis_relative_entropy};
use crate::error::{Error, Result};
use crate::qalgebra::{exp_q, ln_q_unchecked, q_product, QIndex};

use family::{minimize, Family, Mode};

pub use thermo::{
    thermo_identities, thermo_identities_with_step, uniform_prior_comparison, ThermoReport,
    UniformPriorComparison, FD_STEP,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Max-norm tolerance on the constraint residuals.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Stopping threshold on the change of `∫ p^q` in the normalized branch.
    pub fixed_point_tolerance: f64,
    pub max_outer_iterations: usize,
    /// Initial damping of the normalized-branch outer loop.
    pub damping: f64,
    /// Damping below which the outer loop is declared oscillating.
    pub damping_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
            fixed_point_tolerance: 1e-10,
            max_outer_iterations: 500,
            damping: 0.5,
            damping_floor: 1.0 / 1024.0,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerance(self, tolerance: f64) -> Self {
        Self { tolerance, ..self }
    }
}

/// What the solved distribution is measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// Maximize Tsallis entropy on the grid (no prior).
    MaxEnt(SupportGrid),
    /// Minimize Tsallis relative-entropy to this prior.
    Prior(Distribution),
}

impl Reference {
    pub fn grid(&self) -> &SupportGrid {
        match self {
            Reference::MaxEnt(g) => g,
            Reference::Prior(p) => p.grid(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    MaxEnt,
    MinXent,
    MinXentNormalized,
    Classical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub distribution: Distribution,
    /// `β_m`, one per constraint.
    pub multipliers: Vec<f64>,
    /// `β'_m = β_m / ∫ p^q`; normalized branch only.
    pub scaled_multipliers: Option<Vec<f64>>,
    /// `Z_q`, `Ẑ_q`, or the normalized-branch partition function.
    pub partition_value: f64,
    /// `I_q(p‖r)`, or `S_q(p)` for maxent.
    pub divergence: f64,
    /// `∫ p^q`.
    pub q_mass: f64,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub residual_norm: f64,
    pub branch: Branch,
}

fn check_inputs(grid: &SupportGrid, constraints: &ConstraintSet, q: QIndex) -> Result<()> {
    q.require_positive()?;
    constraints.check_grid(grid)
}

fn prior_offsets(prior: &Distribution, q: QIndex) -> (Vec<f64>, Vec<bool>) {
    prior
        .density()
        .iter()
        .map(|&r| {
            if r > 0.0 {
                (ln_q_unchecked(r, q), true)
            } else {
                (0.0, false)
            }
        })
        .unzip()
}

fn feature_rows(functions: &[MomentFunction]) -> Vec<Vec<f64>> {
    functions.iter().map(|f| f.values.clone()).collect()
}

/// Solves for the multipliers reproducing the targets of `constraints`.
///
/// Normalized q-expectation constraints with a prior are forwarded to
/// [`solve_normalized`].
pub fn solve(
    reference: &Reference,
    constraints: &ConstraintSet,
    q: QIndex,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let grid = reference.grid();
    check_inputs(grid, constraints, q)?;
    if constraints.kind == ConstraintKind::NormalizedQExpectation {
        return match reference {
            Reference::Prior(prior) => solve_normalized(prior, constraints, q, opts),
            Reference::MaxEnt(_) => Err(Error::InvalidProblem(
                "normalized q-expectation constraints need a prior".into(),
            )),
        };
    }

    let (offset, active, branch) = match reference {
        Reference::MaxEnt(g) => (vec![0.0; g.len()], vec![true; g.len()], Branch::MaxEnt),
        Reference::Prior(prior) => {
            let (o, a) = prior_offsets(prior, q);
            let b = if q.is_classical() {
                Branch::Classical
            } else {
                Branch::MinXent
            };
            (o, a, b)
        }
    };
    let family = Family {
        weights: grid.weights(),
        offset,
        active,
        features: feature_rows(&constraints.functions),
        linear: constraints.targets.clone(),
        q,
        mode: Mode::QExpectation,
    };
    let out = minimize(
        &family,
        vec![0.0; constraints.len()],
        opts.tolerance,
        opts.max_iterations,
    )?;
    let distribution = Distribution::from_unnormalized(grid.clone(), out.eval.g)?;
    let divergence = match reference {
        Reference::MaxEnt(_) => tsallis_entropy(&distribution, q),
        Reference::Prior(prior) => tsallis_relative_entropy(&distribution, prior, q)?,
    };
    Ok(SolveResult {
        q_mass: distribution.q_mass(q),
        distribution,
        multipliers: out.theta,
        scaled_multipliers: None,
        partition_value: out.eval.z,
        divergence,
        iterations: out.iterations,
        outer_iterations: 0,
        residual_norm: out.residual,
        branch,
    })
}

/// Minimum Tsallis relative-entropy under normalized q-expectations.
///
/// The density depends on `∫ p^q` through the multipliers, so the solve is
/// a damped fixed point `c ← (1-γ) c + γ ∫ p^q` around an inner multiplier
/// solve at fixed `c`. The damping is halved whenever the change in `c`
/// stops shrinking; falling below `damping_floor` is an oscillation error.
pub fn solve_normalized(
    prior: &Distribution,
    constraints: &ConstraintSet,
    q: QIndex,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let grid = prior.grid();
    check_inputs(grid, constraints, q)?;
    if constraints.kind != ConstraintKind::NormalizedQExpectation {
        return Err(Error::InvalidProblem(
            "solve_normalized expects normalized q-expectation constraints".into(),
        ));
    }
    let (offset, active) = prior_offsets(prior, q);
    let features = constraints
        .functions
        .iter()
        .zip(&constraints.targets)
        .map(|(f, t)| f.values.iter().map(|u| u - t).collect())
        .collect();
    let family = Family {
        weights: grid.weights(),
        offset,
        active,
        features,
        linear: vec![0.0; constraints.len()],
        q,
        mode: Mode::Escort,
    };

    let mut c = prior.q_mass(q);
    let mut gamma = opts.damping;
    let mut beta = vec![0.0; constraints.len()];
    let mut prev_change = f64::INFINITY;
    let mut iterations = 0;

    for outer in 1..=opts.max_outer_iterations {
        // inner solve in β at fixed c; the kernel works with β / c
        let theta0: Vec<f64> = beta.iter().map(|b| b / c).collect();
        let out = minimize(&family, theta0, opts.tolerance, opts.max_iterations)?;
        iterations += out.iterations;
        beta = out.theta.iter().map(|t| t * c).collect();

        let escort = out.eval.escort_mass / out.eval.z.powf(q.effective());
        let next = (1.0 - gamma) * c + gamma * escort;
        let change = (next - c).abs();
        // rescale β so that β / c is unchanged under the update of c
        beta.iter_mut().for_each(|b| *b *= next / c);
        c = next;

        if change < opts.fixed_point_tolerance {
            let distribution = Distribution::from_unnormalized(grid.clone(), out.eval.g)?;
            let q_mass = distribution.q_mass(q);
            let divergence = tsallis_relative_entropy(&distribution, prior, q)?;
            let scaled = out.theta.clone();
            return Ok(SolveResult {
                multipliers: scaled.iter().map(|t| t * q_mass).collect(),
                scaled_multipliers: Some(scaled),
                partition_value: out.eval.z,
                divergence,
                q_mass,
                distribution,
                iterations,
                outer_iterations: outer,
                residual_norm: out.residual,
                branch: Branch::MinXentNormalized,
            });
        }
        if change >= prev_change {
            gamma *= 0.5;
            if gamma < opts.damping_floor {
                return Err(Error::Oscillation { iterations: outer });
            }
        }
        prev_change = change;
    }
    Err(Error::NonConvergence {
        iterations: opts.max_outer_iterations,
        residual: prev_change,
    })
}

fn check_beta(n: usize, u: &[MomentFunction], beta: &[f64]) -> Result<()> {
    if u.len() != beta.len() {
        return Err(Error::LengthMismatch {
            expected: u.len(),
            found: beta.len(),
        });
    }
    for f in u {
        if f.values.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: f.values.len(),
            });
        }
    }
    Ok(())
}

fn linear_form(u: &[MomentFunction], beta: &[f64], i: usize) -> f64 {
    u.iter().zip(beta).map(|(f, b)| b * f.values[i]).sum()
}

/// Unnormalized maxent density `exp_q(-Σ β_m u_m)`.
pub fn eval_maxent_density(
    grid: &SupportGrid,
    u: &[MomentFunction],
    beta: &[f64],
    q: QIndex,
) -> Result<Vec<f64>> {
    check_beta(grid.len(), u, beta)?;
    Ok((0..grid.len())
        .map(|i| exp_q(-linear_form(u, beta, i), q))
        .collect())
}

/// Unnormalized minxent density `exp_q(ln_q r - Σ β_m u_m)`.
///
/// This equals `[r^(1-q) - (1-q) Σ β_m u_m]^(1/(1-q))` with the extended
/// cut-off (see [`eval_minxent_density_bracket`]) and `r ⊗_q exp_q(-Σ β_m u_m)`
/// (see [`eval_minxent_density_qproduct`]).
pub fn eval_minxent_density(
    prior: &Distribution,
    u: &[MomentFunction],
    beta: &[f64],
    q: QIndex,
) -> Result<Vec<f64>> {
    check_beta(prior.len(), u, beta)?;
    Ok(prior
        .density()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if r > 0.0 {
                exp_q(ln_q_unchecked(r, q) - linear_form(u, beta, i), q)
            } else {
                0.0
            }
        })
        .collect())
}

/// Minxent density from the raw bracket `[r^(1-q) - (1-q) Σ β_m u_m]^(1/(1-q))`.
pub fn eval_minxent_density_bracket(
    prior: &Distribution,
    u: &[MomentFunction],
    beta: &[f64],
    q: QIndex,
) -> Result<Vec<f64>> {
    check_beta(prior.len(), u, beta)?;
    let a = q.one_minus_q();
    Ok(prior
        .density()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let s = linear_form(u, beta, i);
            if r <= 0.0 {
                0.0
            } else if a == 0.0 {
                r * (-s).exp()
            } else {
                let base = r.powf(a) - a * s;
                if base > 0.0 {
                    base.powf(1.0 / a)
                } else {
                    0.0
                }
            }
        })
        .collect())
}

/// Minxent density in q-product form `r ⊗_q exp_q(-Σ β_m u_m)`.
pub fn eval_minxent_density_qproduct(
    prior: &Distribution,
    u: &[MomentFunction],
    beta: &[f64],
    q: QIndex,
) -> Result<Vec<f64>> {
    check_beta(prior.len(), u, beta)?;
    Ok(prior
        .density()
        .iter()
        .enumerate()
        .map(|(i, &r)| q_product(r, exp_q(-linear_form(u, beta, i), q), q))
        .collect())
}

/// Unnormalized density of the normalized branch,
/// `exp_q(ln_q r - Σ β_m (u_m - t_m) / c)` with `c = ∫ p^q`.
pub fn eval_normalized_density(
    prior: &Distribution,
    u: &[MomentFunction],
    targets: &[f64],
    beta: &[f64],
    q_mass: f64,
    q: QIndex,
) -> Result<Vec<f64>> {
    check_beta(prior.len(), u, beta)?;
    if targets.len() != beta.len() {
        return Err(Error::LengthMismatch {
            expected: beta.len(),
            found: targets.len(),
        });
    }
    Ok(prior
        .density()
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if r <= 0.0 {
                return 0.0;
            }
            let s: f64 = u
                .iter()
                .zip(beta)
                .zip(targets)
                .map(|((f, b), t)| b * (f.values[i] - t))
                .sum();
            exp_q(ln_q_unchecked(r, q) - s / q_mass, q)
        })
        .collect())
}
