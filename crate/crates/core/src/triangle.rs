//! Expectation matching and the nonextensive triangle equality.
//!
//! For a true distribution `l`, prior `r` and minxent posterior `p`, the
//! q-expectation targets that make `I_q(l‖p)` stationary satisfy
//!
//! ```text
//! ⟨u_m⟩_q = ⟨w_m⟩_q / (1 - (1-q) I_q(l‖p)),    ⟨w_m⟩_q = ∫ u_m l^q
//! ```
//!
//! and at that point `I_q(l‖r) = I_q(l‖p) + I_q(p‖r) + (q-1) I_q(l‖p) I_q(p‖r)`.
//! Since `p` depends on the targets, the matching condition is solved as a
//! damped fixed point over the shared scalar `I_q(l‖p)`.

use serde::Serialize;

use crate::distribution::{
    absolutely_continuous, normalized_q_expectation, q_expectation, ConstraintKind, ConstraintSet,
    Distribution, MomentFunction,
};
use crate::entropy::tsallis_relative_entropy;
use crate::error::{Error, Result};
use crate::qalgebra::{pseudo_add, Composition, QIndex};
use crate::solver::{solve, solve_normalized, Reference, SolveResult, SolverOptions};

/// Residual bound for a successful triangle verification.
pub const TRIANGLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingOptions {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub solver: SolverOptions,
}

impl Default for MatchingOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-10,
            max_iterations: 200,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectationMatch {
    /// `⟨u_m⟩_q` at the self-consistent point.
    pub targets: Vec<f64>,
    /// `⟨w_m⟩_q = ∫ u_m l^q`.
    pub true_moments: Vec<f64>,
    /// `I_q(l‖p)` for the returned posterior.
    pub d_lp: f64,
    pub posterior: SolveResult,
    pub iterations: usize,
}

impl ExpectationMatch {
    /// Max over `m` of `|⟨u_m⟩ - ⟨w_m⟩ / (1 - (1-q) d_lp)|`.
    pub fn self_consistency_residual(&self, q: QIndex) -> f64 {
        let den = 1.0 - q.one_minus_q() * self.d_lp;
        self.targets
            .iter()
            .zip(&self.true_moments)
            .fold(0.0f64, |a, (t, w)| a.max((t - w / den).abs()))
    }
}

fn matched_targets(w: &[f64], d_lp: f64, q: QIndex) -> Result<Vec<f64>> {
    let den = 1.0 - q.one_minus_q() * d_lp;
    if den <= 0.0 || !den.is_finite() {
        return Err(Error::MatchingDegenerate { denominator: den });
    }
    Ok(w.iter().map(|w| w / den).collect())
}

fn check_support(l: &Distribution, r: &Distribution) -> Result<()> {
    if absolutely_continuous(l, r)? {
        Ok(())
    } else {
        Err(Error::AbsoluteContinuity {
            index: l
                .density()
                .iter()
                .zip(r.density())
                .position(|(&a, &b)| a > 0.0 && b <= 0.0)
                .unwrap_or(0),
        })
    }
}

/// Finds the q-expectation targets satisfying the matching condition and
/// the corresponding minxent posterior.
pub fn expectation_match(
    l: &Distribution,
    prior: &Distribution,
    u: &[MomentFunction],
    q: QIndex,
    opts: &MatchingOptions,
) -> Result<ExpectationMatch> {
    q.require_positive()?;
    check_support(l, prior)?;
    let w: Vec<f64> = u
        .iter()
        .map(|f| q_expectation(l, f, q))
        .collect::<Result<_>>()?;
    let base = ConstraintSet::new(u.to_vec(), w.clone(), ConstraintKind::QExpectation)?;
    let reference = Reference::Prior(prior.clone());
    let posterior_for = |d: f64| -> Result<(Vec<f64>, SolveResult, f64)> {
        let targets = matched_targets(&w, d, q)?;
        let cs = base.with_targets(targets.clone())?;
        let p = solve(&reference, &cs, q, &opts.solver)?;
        let d_new = tsallis_relative_entropy(l, &p.distribution, q)?;
        Ok((targets, p, d_new))
    };

    // Damped iteration on the scalar d = I_q(l‖p). A step that lands on
    // infeasible targets is halved until it is accepted.
    let mut d = 0.0;
    let (mut targets, mut posterior, mut d_lp) = posterior_for(d)?;
    for it in 1..=opts.max_iterations {
        if (d_lp - d).abs() < opts.tolerance {
            return Ok(ExpectationMatch {
                targets,
                true_moments: w,
                d_lp,
                posterior,
                iterations: it,
            });
        }
        let mut step = opts.damping * (d_lp - d);
        loop {
            match posterior_for(d + step) {
                Ok(next) => {
                    d += step;
                    (targets, posterior, d_lp) = next;
                    break;
                }
                Err(Error::Infeasible { .. } | Error::NonConvergence { .. })
                    if step.abs() > opts.tolerance =>
                {
                    step *= 0.5;
                }
                Err(Error::Infeasible { .. } | Error::NonConvergence { .. }) => {
                    return Err(Error::NonConvergence {
                        iterations: it,
                        residual: (d_lp - d).abs(),
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual: (d_lp - d).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleReport {
    /// `I_q(l‖r)`
    pub d_lr: f64,
    /// `I_q(l‖p)`
    pub d_lp: f64,
    /// `I_q(p‖r)`
    pub d_pr: f64,
    /// `d_lr - (d_lp + d_pr + (q-1) d_lp d_pr)`
    pub residual: f64,
    pub matched_targets: Vec<f64>,
    pub fixed_point_iterations: usize,
    /// The inequality `d_lr ≤ d_lp + d_pr` (q ≤ 1) or `≥` (q > 1) holds.
    pub corollary_holds: bool,
    /// Whether `p` is known to minimize `I_q(l‖p)` over the targets; false
    /// for the normalized variant.
    pub minimality_asserted: bool,
    pub posterior: Distribution,
}

impl TriangleReport {
    fn build(
        l: &Distribution,
        r: &Distribution,
        p: &Distribution,
        q: QIndex,
        matched_targets: Vec<f64>,
        iterations: usize,
        minimality_asserted: bool,
    ) -> Result<Self> {
        let d_lr = tsallis_relative_entropy(l, r, q)?;
        let d_lp = tsallis_relative_entropy(l, p, q)?;
        let d_pr = tsallis_relative_entropy(p, r, q)?;
        let residual = d_lr - pseudo_add(d_lp, d_pr, q, Composition::Divergence);
        let gap = d_lr - (d_lp + d_pr);
        let corollary_holds = if q.value() <= 1.0 {
            gap <= TRIANGLE_TOL
        } else {
            gap >= -TRIANGLE_TOL
        };
        Ok(Self {
            d_lr,
            d_lp,
            d_pr,
            residual,
            matched_targets,
            fixed_point_iterations: iterations,
            corollary_holds,
            minimality_asserted,
            posterior: p.clone(),
        })
    }

    pub fn passes(&self) -> bool {
        self.residual.abs() < TRIANGLE_TOL && self.corollary_holds
    }
}

/// Runs [`expectation_match`] and evaluates the triangle equality.
pub fn verify_triangle(
    l: &Distribution,
    prior: &Distribution,
    u: &[MomentFunction],
    q: QIndex,
    opts: &MatchingOptions,
) -> Result<TriangleReport> {
    let m = expectation_match(l, prior, u, q, opts)?;
    TriangleReport::build(
        l,
        prior,
        &m.posterior.distribution,
        q,
        m.targets,
        m.iterations,
        true,
    )
}

/// Triangle equality with normalized q-expectation targets set to those of `l`.
pub fn verify_triangle_normalized(
    l: &Distribution,
    prior: &Distribution,
    u: &[MomentFunction],
    q: QIndex,
    opts: &MatchingOptions,
) -> Result<TriangleReport> {
    q.require_positive()?;
    check_support(l, prior)?;
    let targets: Vec<f64> = u
        .iter()
        .map(|f| normalized_q_expectation(l, f, q))
        .collect::<Result<_>>()?;
    let cs = ConstraintSet::new(
        u.to_vec(),
        targets.clone(),
        ConstraintKind::NormalizedQExpectation,
    )?;
    let p = solve_normalized(prior, &cs, q, &opts.solver)?;
    TriangleReport::build(
        l,
        prior,
        &p.distribution,
        q,
        targets,
        p.outer_iterations,
        false,
    )
}
