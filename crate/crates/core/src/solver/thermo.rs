//! Partition-function identities, thermodynamic relations, and the
//! uniform-prior comparison between maxent and minxent multipliers.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{solve, Branch, Reference, SolveResult, SolverOptions};
use crate::distribution::{
    q_expectation, uniform_on, ConstraintKind, ConstraintSet, Distribution, SupportGrid,
};
use crate::entropy::{tsallis_entropy, tsallis_relative_entropy};
use crate::error::{Error, Result};
use crate::qalgebra::{exp_q, ln_q_unchecked, QIndex};

/// Central finite-difference step for the derivative checks.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermoReport {
    /// `I + ln_q Ẑ + Σ β ⟨u⟩_q` (minxent), `S - ln_q Z - Σ β ⟨u⟩_q`
    /// (maxent), or `I + ln_q Z̄` (normalized).
    pub identity_residual: f64,
    /// `∂ ln_q Z / ∂β_m + ⟨u_m⟩` per constraint, by central differences.
    pub partition_slope_residuals: Vec<f64>,
    /// `∂I/∂t_m + β_m` (or `∂S/∂t_m - β_m` for maxent) per constraint.
    pub divergence_slope_residuals: Vec<f64>,
    /// `ln_q Ẑ = ln_q Z̄ - Σ β ⟨⟨u⟩⟩_q`, normalized branch only.
    pub shifted_log_partition: Option<f64>,
    pub step: f64,
}

impl ThermoReport {
    pub fn max_derivative_residual(&self) -> f64 {
        self.partition_slope_residuals
            .iter()
            .chain(&self.divergence_slope_residuals)
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn passes(&self, identity_tol: f64, derivative_tol: f64) -> bool {
        self.identity_residual.abs() < identity_tol
            && self.max_derivative_residual() < derivative_tol
    }
}

/// [`thermo_identities_with_step`] with `h = FD_STEP`.
pub fn thermo_identities(
    reference: &Reference,
    constraints: &ConstraintSet,
    q: QIndex,
    result: &SolveResult,
) -> Result<ThermoReport> {
    thermo_identities_with_step(reference, constraints, q, result, FD_STEP)
}

pub fn thermo_identities_with_step(
    reference: &Reference,
    constraints: &ConstraintSet,
    q: QIndex,
    result: &SolveResult,
    h: f64,
) -> Result<ThermoReport> {
    match result.branch {
        Branch::MinXentNormalized => normalized_report(reference, constraints, q, result, h),
        _ => moment_report(reference, constraints, q, result, h),
    }
}

/// Unnormalized family member `g(β)` for the maxent or minxent family.
fn family_weights(reference: &Reference, constraints: &ConstraintSet, beta: &[f64], q: QIndex) -> Vec<f64> {
    let grid = reference.grid();
    (0..grid.len())
        .map(|i| {
            let s: f64 = constraints
                .functions
                .iter()
                .zip(beta)
                .map(|(f, b)| b * f.values[i])
                .sum();
            match reference {
                Reference::MaxEnt(_) => exp_q(-s, q),
                Reference::Prior(r) => {
                    let r = r.density()[i];
                    if r > 0.0 {
                        exp_q(ln_q_unchecked(r, q) - s, q)
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect()
}

/// `ln_q Z(β)` without re-solving.
fn log_partition(reference: &Reference, constraints: &ConstraintSet, beta: &[f64], q: QIndex) -> f64 {
    let g = family_weights(reference, constraints, beta, q);
    let z: f64 = g.iter().zip(reference.grid().weights()).map(|(g, w)| g * w).sum();
    ln_q_unchecked(z, q)
}

/// Achieved q-expectations and `I_q(p‖r)` (or `S_q(p)` for maxent) at the
/// family member with multipliers `β`.
fn family_point(
    reference: &Reference,
    constraints: &ConstraintSet,
    beta: &[f64],
    q: QIndex,
) -> Result<(Vec<f64>, f64)> {
    let g = family_weights(reference, constraints, beta, q);
    let p = Distribution::from_unnormalized(reference.grid().clone(), g)?;
    let t = constraints
        .functions
        .iter()
        .map(|u| q_expectation(&p, u, q))
        .collect::<Result<_>>()?;
    let value = match reference {
        Reference::MaxEnt(_) => tsallis_entropy(&p, q),
        Reference::Prior(r) => tsallis_relative_entropy(&p, r, q)?,
    };
    Ok((t, value))
}

fn moment_report(
    reference: &Reference,
    constraints: &ConstraintSet,
    q: QIndex,
    result: &SolveResult,
    h: f64,
) -> Result<ThermoReport> {
    let achieved: Vec<f64> = constraints
        .functions
        .iter()
        .map(|u| q_expectation(&result.distribution, u, q))
        .collect::<Result<_>>()?;
    let beta = &result.multipliers;
    let lnz = ln_q_unchecked(result.partition_value, q);
    let bu: f64 = beta.iter().zip(&achieved).map(|(b, u)| b * u).sum();
    // maxent is minxent against the unit measure, where I = -S
    let sign = match reference {
        Reference::MaxEnt(_) => -1.0,
        Reference::Prior(_) => 1.0,
    };
    let identity_residual = sign * result.divergence + lnz + bu;

    // Differences are taken along the multipliers, where the family is
    // explicit, and mapped to target slopes with dV/dβ = (dt/dβ)ᵀ ∇_t V.
    let m_len = beta.len();
    let mut partition_slope_residuals = Vec::with_capacity(m_len);
    let mut jacobian = DMatrix::zeros(m_len, m_len);
    let mut dvalue = DVector::zeros(m_len);
    for k in 0..m_len {
        let mut bp = beta.clone();
        let mut bm = beta.clone();
        bp[k] += h;
        bm[k] -= h;
        let slope = (log_partition(reference, constraints, &bp, q)
            - log_partition(reference, constraints, &bm, q))
            / (2.0 * h);
        partition_slope_residuals.push(slope + achieved[k]);

        let (tp, vp) = family_point(reference, constraints, &bp, q)?;
        let (tm, vm) = family_point(reference, constraints, &bm, q)?;
        for m in 0..m_len {
            jacobian[(m, k)] = (tp[m] - tm[m]) / (2.0 * h);
        }
        dvalue[k] = (vp - vm) / (2.0 * h);
    }
    let divergence_slope_residuals = if m_len == 0 {
        Vec::new()
    } else {
        let grad = jacobian
            .transpose()
            .lu()
            .solve(&dvalue)
            .ok_or(Error::DegenerateDenominator("target Jacobian is singular"))?;
        grad.iter().zip(beta).map(|(g, b)| sign * g + b).collect()
    };
    Ok(ThermoReport {
        identity_residual,
        partition_slope_residuals,
        divergence_slope_residuals,
        shifted_log_partition: None,
        step: h,
    })
}

/// Normalized-branch quantities at scaled multipliers `θ`.
struct NormalizedPoint {
    targets: Vec<f64>,
    multipliers: Vec<f64>,
    divergence: f64,
    shifted_log_partition: f64,
}

/// The normalized family depends on `θ` and `t` only through the shift
/// `κ = θ·t`, and `κ` is pinned by requiring the normalized q-expectations
/// of the resulting density to equal `t`. Solved by secant iteration from
/// `kappa0`.
fn normalized_point(
    prior: &Distribution,
    constraints: &ConstraintSet,
    theta: &[f64],
    kappa0: f64,
    q: QIndex,
) -> Result<NormalizedPoint> {
    let grid = prior.grid();
    let qe = q.effective();
    let density = |kappa: f64| -> Vec<f64> {
        (0..grid.len())
            .map(|i| {
                let r = prior.density()[i];
                if r <= 0.0 {
                    return 0.0;
                }
                let s: f64 = constraints
                    .functions
                    .iter()
                    .zip(theta)
                    .map(|(f, th)| th * f.values[i])
                    .sum();
                exp_q(ln_q_unchecked(r, q) + kappa - s, q)
            })
            .collect()
    };
    let escort = |g: &[f64]| -> Vec<f64> {
        let pq: Vec<f64> = g.iter().map(|v| v.powf(qe)).collect();
        let mass = grid.integrate(&pq).unwrap_or(f64::NAN);
        constraints
            .functions
            .iter()
            .map(|f| {
                let num: f64 = pq
                    .iter()
                    .zip(&f.values)
                    .zip(grid.weights())
                    .map(|((p, u), w)| p * u * w)
                    .sum();
                num / mass
            })
            .collect()
    };
    let residual = |kappa: f64| -> f64 {
        let t = escort(&density(kappa));
        theta.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>() - kappa
    };

    let (mut k0, mut k1) = (kappa0, kappa0 + 1e-7 * kappa0.abs().max(1.0));
    let (mut f0, mut f1) = (residual(k0), residual(k1));
    for _ in 0..100 {
        if f1 == 0.0 || f1 == f0 || !f1.is_finite() {
            break;
        }
        let k2 = k1 - f1 * (k1 - k0) / (f1 - f0);
        (k0, f0) = (k1, f1);
        k1 = k2;
        f1 = residual(k1);
        if (k1 - k0).abs() <= 1e-16 * k1.abs().max(1.0) {
            break;
        }
    }
    if f1.is_nan() || f1.abs() > 1e-13 {
        return Err(Error::NonConvergence {
            iterations: 100,
            residual: f1.abs(),
        });
    }

    let g = density(k1);
    let z: f64 = g.iter().zip(grid.weights()).map(|(g, w)| g * w).sum();
    let p = Distribution::from_unnormalized(grid.clone(), g)?;
    let targets = escort(p.density());
    let multipliers: Vec<f64> = theta.iter().map(|t| t * p.q_mass(q)).collect();
    let bt: f64 = multipliers.iter().zip(&targets).map(|(b, t)| b * t).sum();
    Ok(NormalizedPoint {
        divergence: tsallis_relative_entropy(&p, prior, q)?,
        shifted_log_partition: ln_q_unchecked(z, q) - bt,
        targets,
        multipliers,
    })
}

fn normalized_report(
    reference: &Reference,
    constraints: &ConstraintSet,
    q: QIndex,
    result: &SolveResult,
    h: f64,
) -> Result<ThermoReport> {
    let Reference::Prior(prior) = reference else {
        return Err(Error::InvalidProblem(
            "normalized branch needs a prior".into(),
        ));
    };
    let t = &constraints.targets;
    let beta = &result.multipliers;
    let theta = result
        .scaled_multipliers
        .clone()
        .unwrap_or_else(|| beta.iter().map(|b| b / result.q_mass).collect());
    let m_len = beta.len();
    let lnzbar = ln_q_unchecked(result.partition_value, q);
    let identity_residual = result.divergence + lnzbar;
    let kappa: f64 = theta.iter().zip(t).map(|(a, b)| a * b).sum();

    // Differences along θ, mapped to t and β with the chain rule.
    let mut dt = DMatrix::zeros(m_len, m_len);
    let mut dbeta = DMatrix::zeros(m_len, m_len);
    let mut ddiv = DVector::zeros(m_len);
    let mut dshift = DVector::zeros(m_len);
    for k in 0..m_len {
        let mut tp = theta.clone();
        let mut tm = theta.clone();
        tp[k] += h;
        tm[k] -= h;
        let up = normalized_point(prior, constraints, &tp, kappa, q)?;
        let dn = normalized_point(prior, constraints, &tm, kappa, q)?;
        for m in 0..m_len {
            dt[(m, k)] = (up.targets[m] - dn.targets[m]) / (2.0 * h);
            dbeta[(m, k)] = (up.multipliers[m] - dn.multipliers[m]) / (2.0 * h);
        }
        ddiv[k] = (up.divergence - dn.divergence) / (2.0 * h);
        dshift[k] = (up.shifted_log_partition - dn.shifted_log_partition) / (2.0 * h);
    }
    let (divergence_slope_residuals, partition_slope_residuals) = if m_len == 0 {
        (Vec::new(), Vec::new())
    } else {
        let singular = || Error::DegenerateDenominator("multiplier Jacobian is singular");
        let grad_div = dt.transpose().lu().solve(&ddiv).ok_or_else(singular)?;
        let grad_shift = dbeta.transpose().lu().solve(&dshift).ok_or_else(singular)?;
        (
            grad_div.iter().zip(beta).map(|(g, b)| g + b).collect(),
            grad_shift.iter().zip(t).map(|(g, t)| g + t).collect(),
        )
    };
    let shifted = lnzbar - beta.iter().zip(t).map(|(b, t)| b * t).sum::<f64>();
    Ok(ThermoReport {
        identity_residual,
        partition_slope_residuals,
        divergence_slope_residuals,
        shifted_log_partition: Some(shifted),
        step: h,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformPriorComparison {
    pub maxent: SolveResult,
    pub minxent: SolveResult,
    /// `W = Σ weights`.
    pub width: f64,
    /// Max pointwise gap between the two solved densities.
    pub distribution_gap: f64,
    /// Max of `|β^(S) - W^(1-q) β^(I)|`.
    pub relation_residual: f64,
    /// Whether `β^(S)` and `β^(I)` differ by more than `1e-9`.
    pub multipliers_differ: bool,
}

/// Solves the same q-expectation targets as a maxent problem and as a
/// minxent problem with a uniform prior, and compares the multipliers.
pub fn uniform_prior_comparison(
    grid: &SupportGrid,
    constraints: &ConstraintSet,
    q: QIndex,
    opts: &SolverOptions,
) -> Result<UniformPriorComparison> {
    if constraints.kind != ConstraintKind::QExpectation {
        return Err(Error::InvalidProblem(
            "uniform-prior comparison uses q-expectation constraints".into(),
        ));
    }
    let (uniform, width) = uniform_on(grid);
    let maxent = solve(&Reference::MaxEnt(grid.clone()), constraints, q, opts)?;
    let minxent = solve(&Reference::Prior(uniform), constraints, q, opts)?;
    let distribution_gap = maxent
        .distribution
        .density()
        .iter()
        .zip(minxent.distribution.density())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let factor = width.powf(q.one_minus_q());
    let relation_residual = maxent
        .multipliers
        .iter()
        .zip(&minxent.multipliers)
        .fold(0.0f64, |a, (s, i)| a.max((s - factor * i).abs()));
    let multipliers_differ = maxent
        .multipliers
        .iter()
        .zip(&minxent.multipliers)
        .any(|(s, i)| (s - i).abs() > 1e-9);
    Ok(UniformPriorComparison {
        maxent,
        minxent,
        width,
        distribution_gap,
        relation_residual,
        multipliers_differ,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{Distribution, MomentFunction};

    fn q(v: f64) -> QIndex {
        QIndex::new(v).unwrap()
    }

    fn instance() -> (Reference, ConstraintSet) {
        let r = Distribution::new(SupportGrid::counting(2), vec![0.5, 0.5]).unwrap();
        let cs = ConstraintSet::new(
            vec![MomentFunction::new("u", vec![0.0, 1.0])],
            vec![0.09],
            ConstraintKind::QExpectation,
        )
        .unwrap();
        (Reference::Prior(r), cs)
    }

    #[test]
    fn two_point_identities() {
        let (reference, cs) = instance();
        let opts = SolverOptions::default();
        let res = solve(&reference, &cs, q(2.0), &opts).unwrap();
        let rep = thermo_identities(&reference, &cs, q(2.0), &res).unwrap();
        assert!(rep.identity_residual.abs() < 1e-10, "{rep:?}");
        assert!(rep.max_derivative_residual() < 1e-6, "{rep:?}");
        // ∂ ln_2 Ẑ/∂β ≈ -0.09 at β = 8/3
        assert!(rep.partition_slope_residuals[0].abs() < 1e-6);
    }

    #[test]
    fn no_constraints_all_zero() {
        let (reference, _) = instance();
        let cs = ConstraintSet::empty(ConstraintKind::QExpectation);
        let opts = SolverOptions::default();
        let res = solve(&reference, &cs, q(2.0), &opts).unwrap();
        let rep = thermo_identities(&reference, &cs, q(2.0), &res).unwrap();
        assert_eq!(rep.identity_residual, 0.0);
        assert!(rep.partition_slope_residuals.is_empty());
    }

    #[test]
    fn maxent_identities() {
        let (_, cs) = instance();
        let reference = Reference::MaxEnt(SupportGrid::counting(2));
        let opts = SolverOptions::default();
        for v in [0.5, 2.0] {
            let res = solve(&reference, &cs, q(v), &opts).unwrap();
            let rep = thermo_identities(&reference, &cs, q(v), &res).unwrap();
            assert!(rep.passes(1e-10, 1e-6), "q={v}: {rep:?}");
        }
    }

    #[test]
    fn normalized_identities() {
        let (reference, cs) = instance();
        let cs = cs
            .with_kind(ConstraintKind::NormalizedQExpectation)
            .with_targets(vec![0.09 / 0.58])
            .unwrap();
        let opts = SolverOptions::default();
        let res = solve(&reference, &cs, q(2.0), &opts).unwrap();
        let rep = thermo_identities(&reference, &cs, q(2.0), &res).unwrap();
        assert!(rep.passes(1e-10, 1e-6), "{rep:?}");
        assert!(rep.shifted_log_partition.is_some());
    }

    #[test]
    fn multiplier_relation_two_point() {
        let (_, cs) = instance();
        let cmp = uniform_prior_comparison(&SupportGrid::counting(2), &cs, q(2.0), &SolverOptions::default()).unwrap();
        assert!((cmp.maxent.multipliers[0] - 4.0 / 3.0).abs() < 1e-9);
        assert!((cmp.minxent.multipliers[0] - 8.0 / 3.0).abs() < 1e-9);
        assert_eq!(cmp.width, 2.0);
        assert!(cmp.relation_residual < 1e-9);
        assert!(cmp.distribution_gap < 1e-9);
        assert!(cmp.multipliers_differ);
    }

    #[test]
    fn multiplier_relation_degenerate_cases() {
        let (_, cs) = instance();
        let opts = SolverOptions::default();
        let cs1 = cs.with_targets(vec![0.3]).unwrap();
        let cmp = uniform_prior_comparison(&SupportGrid::counting(2), &cs1, QIndex::classical(), &opts).unwrap();
        assert!(!cmp.multipliers_differ);
        assert!(cmp.relation_residual < 1e-9);

        // W = 1
        let g = SupportGrid::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let cmp = uniform_prior_comparison(&g, &cs.with_targets(vec![0.2]).unwrap(), q(2.0), &opts).unwrap();
        assert!((cmp.width - 1.0).abs() < 1e-15);
        assert!(!cmp.multipliers_differ);
        assert!(cmp.relation_residual < 1e-9);
    }
}
