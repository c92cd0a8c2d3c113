//! q-deformed algebra.
//!
//! Every function here switches to the exact classical formula (`ln`, `exp`,
//! ordinary product) when `|q - 1|` is below the index's classical threshold.
//! Away from that threshold the deformed formulas are evaluated through
//! `exp_m1`/`ln_1p`, which keeps them accurate as `1 - q` gets small.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default width of the band around `q = 1` treated as the classical case.
pub const DEFAULT_CLASSICAL_EPS: f64 = 1e-8;

/// The entropic index `q`.
///
/// Any finite value can be represented; the q-logarithm and all solver entry
/// points additionally require `q > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QIndex {
    q: f64,
    eps_classical: f64,
}

impl QIndex {
    pub fn new(q: f64) -> Result<Self> {
        Self::with_classical_eps(q, DEFAULT_CLASSICAL_EPS)
    }

    pub fn with_classical_eps(q: f64, eps_classical: f64) -> Result<Self> {
        if !q.is_finite() {
            return Err(Error::InvalidQ(q));
        }
        if !(eps_classical.is_finite() && eps_classical >= 0.0) {
            return Err(Error::Domain {
                what: "classical threshold must be finite and nonnegative",
                value: eps_classical,
            });
        }
        Ok(Self { q, eps_classical })
    }

    /// `q = 1`.
    pub fn classical() -> Self {
        Self {
            q: 1.0,
            eps_classical: DEFAULT_CLASSICAL_EPS,
        }
    }

    pub fn value(&self) -> f64 {
        self.q
    }

    pub fn eps_classical(&self) -> f64 {
        self.eps_classical
    }

    pub fn is_classical(&self) -> bool {
        (self.q - 1.0).abs() < self.eps_classical
    }

    pub fn is_positive(&self) -> bool {
        self.q > 0.0
    }

    /// The exponent actually used in formulas: exactly 1 on the classical branch.
    pub fn effective(&self) -> f64 {
        if self.is_classical() {
            1.0
        } else {
            self.q
        }
    }

    /// `1 - q`, or exactly 0 on the classical branch.
    pub fn one_minus_q(&self) -> f64 {
        1.0 - self.effective()
    }

    /// Returns `self` if `q > 0`, otherwise [`Error::InvalidQ`].
    pub fn require_positive(self) -> Result<Self> {
        if self.is_positive() {
            Ok(self)
        } else {
            Err(Error::InvalidQ(self.q))
        }
    }
}

impl std::fmt::Display for QIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.q)
    }
}

/// Sign convention for [`pseudo_add`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// `a + b + (1 - q) a b`, the Tsallis entropy law.
    Entropy,
    /// `a + b + (q - 1) a b`, the Tsallis relative-entropy law.
    Divergence,
}

impl Composition {
    pub fn coefficient(self, q: QIndex) -> f64 {
        match self {
            Composition::Entropy => 1.0 - q.value(),
            Composition::Divergence => q.value() - 1.0,
        }
    }
}

/// q-logarithm `(x^(1-q) - 1) / (1 - q)`.
pub fn ln_q(x: f64, q: QIndex) -> Result<f64> {
    check_positive_arg(x)?;
    q.require_positive()?;
    Ok(ln_q_unchecked(x, q))
}

/// q-exponential with the Tsallis cut-off.
///
/// Returns `[1 + (1-q) x]^(1/(1-q))` when the base is positive and exactly 0
/// otherwise. For `q > 1` a zero base is the pole of the formula; it is
/// mapped to 0 as well so the result is always finite or the cut-off value.
pub fn exp_q(x: f64, q: QIndex) -> f64 {
    if q.is_classical() {
        return x.exp();
    }
    let a = q.one_minus_q();
    let s = a * x;
    if s <= -1.0 {
        return 0.0;
    }
    (s.ln_1p() / a).exp()
}

/// q-product `(x^(1-q) + y^(1-q) - 1)^(1/(1-q))`, zero outside its domain.
pub fn q_product(x: f64, y: f64, q: QIndex) -> f64 {
    if q.is_classical() {
        return x * y;
    }
    if !(x > 0.0 && y > 0.0) {
        return 0.0;
    }
    let a = q.one_minus_q();
    // x^(1-q) + y^(1-q) - 1 = 1 + s
    let s = (a * x.ln()).exp_m1() + (a * y.ln()).exp_m1();
    if s <= -1.0 {
        return 0.0;
    }
    (s.ln_1p() / a).exp()
}

/// `ln_q(x / y)`.
///
/// Evaluated from `ln x - ln y` so the quotient is never formed; this agrees
/// with both `ln_q(x/y)` and `y^(q-1) (ln_q x - ln_q y)` without the
/// cancellation the second form suffers when `x ≈ y`.
pub fn q_log_ratio(x: f64, y: f64, q: QIndex) -> Result<f64> {
    check_positive_arg(x)?;
    check_positive_arg(y)?;
    q.require_positive()?;
    let d = x.ln() - y.ln();
    if q.is_classical() {
        return Ok(d);
    }
    let a = q.one_minus_q();
    Ok((a * d).exp_m1() / a)
}

/// Pseudo-additive combination `a + b + c a b` with `c` chosen by `mode`.
pub fn pseudo_add(a: f64, b: f64, q: QIndex, mode: Composition) -> f64 {
    a + b + mode.coefficient(q) * a * b
}

/// `ln_q` without argument checks. Callers guarantee `x > 0`.
pub(crate) fn ln_q_unchecked(x: f64, q: QIndex) -> f64 {
    if q.is_classical() {
        return x.ln();
    }
    let a = q.one_minus_q();
    (a * x.ln()).exp_m1() / a
}

fn check_positive_arg(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "argument must be positive and finite",
            value: x,
        })
    }
}
