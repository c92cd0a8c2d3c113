//! Shannon/Tsallis entropy and KL/Tsallis relative-entropy.
//!
//! The defining integrals are the computational path; the q-logarithm
//! representations (`-∫ p^q ln_q p` and `-∫ p ln_q(r/p)`) are exposed
//! separately as cross-checks. Points with `p = 0` contribute nothing.

use crate::distribution::{first_violation, Distribution};
use crate::error::{Error, Result};
use crate::qalgebra::{ln_q_unchecked, q_log_ratio, QIndex};

/// `(x^(q-1) - 1)/(q-1)` written through `ln x`, i.e. `ln_{2-q}(x)`.
fn dual_log(ln_x: f64, q: QIndex) -> f64 {
    let b = q.effective() - 1.0;
    if b == 0.0 {
        ln_x
    } else {
        (b * ln_x).exp_m1() / b
    }
}

fn weighted(p: &Distribution) -> impl Iterator<Item = (f64, f64)> + '_ {
    p.grid()
        .weights()
        .iter()
        .copied()
        .zip(p.density().iter().copied())
}

/// Shannon entropy `-∫ p ln p`.
pub fn shannon_entropy(p: &Distribution) -> f64 {
    -weighted(p)
        .filter(|&(_, d)| d > 0.0)
        .map(|(w, d)| w * d * d.ln())
        .sum::<f64>()
}

/// Tsallis entropy `-∫ p (p^(q-1) - 1)/(q-1)`; Shannon entropy on the classical branch.
pub fn tsallis_entropy(p: &Distribution, q: QIndex) -> f64 {
    if q.is_classical() {
        return shannon_entropy(p);
    }
    -weighted(p)
        .filter(|&(_, d)| d > 0.0)
        .map(|(w, d)| w * d * dual_log(d.ln(), q))
        .sum::<f64>()
}

/// Tsallis entropy via its q-logarithm form `-∫ p^q ln_q p`.
pub fn tsallis_entropy_qlog(p: &Distribution, q: QIndex) -> Result<f64> {
    q.require_positive()?;
    let e = q.effective();
    Ok(-weighted(p)
        .filter(|&(_, d)| d > 0.0)
        .map(|(w, d)| w * d.powf(e) * ln_q_unchecked(d, q))
        .sum::<f64>())
}

fn check_pair(p: &Distribution, r: &Distribution) -> Result<()> {
    p.same_grid(r)?;
    match first_violation(p, r) {
        Some(index) => Err(Error::AbsoluteContinuity { index }),
        None => Ok(()),
    }
}

/// Kullback-Leibler divergence `∫ p ln(p/r)`.
pub fn kl_divergence(p: &Distribution, r: &Distribution) -> Result<f64> {
    check_pair(p, r)?;
    Ok(p.density()
        .iter()
        .zip(r.density())
        .zip(p.grid().weights())
        .filter(|((&a, _), _)| a > 0.0)
        .map(|((&a, &b), w)| w * a * (a.ln() - b.ln()))
        .sum())
}

/// Tsallis relative-entropy `∫ p ((p/r)^(q-1) - 1)/(q-1)`; KL on the classical branch.
pub fn tsallis_relative_entropy(p: &Distribution, r: &Distribution, q: QIndex) -> Result<f64> {
    if q.is_classical() {
        return kl_divergence(p, r);
    }
    check_pair(p, r)?;
    Ok(p.density()
        .iter()
        .zip(r.density())
        .zip(p.grid().weights())
        .filter(|((&a, _), _)| a > 0.0)
        .map(|((&a, &b), w)| w * a * dual_log(a.ln() - b.ln(), q))
        .sum())
}

/// Tsallis relative-entropy via `-∫ p ln_q(r/p)`.
pub fn tsallis_relative_entropy_qlog(
    p: &Distribution,
    r: &Distribution,
    q: QIndex,
) -> Result<f64> {
    check_pair(p, r)?;
    let mut acc = 0.0;
    for ((&a, &b), w) in p.density().iter().zip(r.density()).zip(p.grid().weights()) {
        if a > 0.0 {
            acc -= w * a * q_log_ratio(b, a, q)?;
        }
    }
    Ok(acc)
}

/// Residual of `I_q(p‖r) = -∫ p^q ln_q r - S_q(p)`.
pub fn entropy_divergence_link(p: &Distribution, r: &Distribution, q: QIndex) -> Result<f64> {
    q.require_positive()?;
    let i = tsallis_relative_entropy(p, r, q)?;
    let e = q.effective();
    let cross: f64 = p
        .density()
        .iter()
        .zip(r.density())
        .zip(p.grid().weights())
        .filter(|((&a, _), _)| a > 0.0)
        .map(|((&a, &b), w)| w * a.powf(e) * ln_q_unchecked(b, q))
        .sum();
    Ok(i - (-cross - tsallis_entropy(p, q)))
}
