//! The exponential-family kernel shared by every solver branch.
//!
//! All three branches evaluate `g_i(θ) = exp_q(a_i - Σ_m θ_m v_{m,i})` on the
//! active points of a grid, where `a_i` is `ln_q r_i` (minxent) or 0
//! (maxent) and `v_m` is either `u_m` or the shifted `u_m - t_m`. The
//! multipliers minimize the convex potential
//!
//! ```text
//! ψ(θ) = ln_q Z(θ) + θ·ℓ,     Z = ∫ g
//! ∇ψ   = ℓ - Z^(-q) ∫ g^q v
//! ∇²ψ  = q Z^(-q) [ ∫ v vᵀ g^(2q-1) - (∫ g^q v)(∫ g^q v)ᵀ / Z ]
//! ```
//!
//! which is positive semidefinite by Cauchy-Schwarz. With `ℓ = t` the
//! stationary point reproduces q-expectation targets; with shifted features
//! and `ℓ = 0` it reproduces normalized q-expectation targets.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::qalgebra::{exp_q, ln_q_unchecked, QIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    /// Residual `Z^(-q) ∫ g^q u - t`.
    QExpectation,
    /// Residual `∫ g^q u / ∫ g^q - t`, features already shifted by `t`.
    Escort,
}

pub(crate) struct Family<'a> {
    pub weights: &'a [f64],
    pub offset: Vec<f64>,
    pub active: Vec<bool>,
    pub features: Vec<Vec<f64>>,
    pub linear: Vec<f64>,
    pub q: QIndex,
    pub mode: Mode,
}

#[derive(Debug, Clone)]
pub(crate) struct Eval {
    pub g: Vec<f64>,
    pub z: f64,
    pub potential: f64,
    pub gradient: Vec<f64>,
    /// `∫ g^q v_m`
    pub moments: Vec<f64>,
    /// `∫ g^q`
    pub escort_mass: f64,
}

impl Eval {
    /// Constraint residuals (achieved minus target).
    pub fn residuals(&self, mode: Mode) -> Vec<f64> {
        match mode {
            Mode::QExpectation => self.gradient.iter().map(|g| -g).collect(),
            Mode::Escort => self.moments.iter().map(|a| a / self.escort_mass).collect(),
        }
    }

    pub fn residual_norm(&self, mode: Mode) -> f64 {
        self.residuals(mode)
            .iter()
            .fold(0.0f64, |acc, r| acc.max(r.abs()))
    }
}

impl Family<'_> {
    pub fn dim(&self) -> usize {
        self.features.len()
    }

    fn exponent(&self) -> f64 {
        self.q.effective()
    }

    /// Unnormalized density at `theta`, zero on inactive and cut-off points.
    pub fn density(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.weights.len())
            .map(|i| {
                if !self.active[i] {
                    return 0.0;
                }
                let s: f64 = self
                    .features
                    .iter()
                    .zip(theta)
                    .map(|(v, t)| t * v[i])
                    .sum();
                exp_q(self.offset[i] - s, self.q)
            })
            .collect()
    }

    /// Evaluates the potential and its gradient. Returns `None` outside the
    /// admissible region: a vanishing or non-finite partition function, or,
    /// for `q > 1`, an active point pushed past the cut-off (the density
    /// has a pole there, so no optimum lies beyond it).
    pub fn eval(&self, theta: &[f64]) -> Option<Eval> {
        let e = self.exponent();
        let g = self.density(theta);
        if e > 1.0 && g.iter().zip(&self.active).any(|(&v, &a)| a && v <= 0.0) {
            return None;
        }
        let mut z = 0.0;
        let mut escort_mass = 0.0;
        let mut moments = vec![0.0; self.dim()];
        for (i, (&gi, &w)) in g.iter().zip(self.weights).enumerate() {
            if gi <= 0.0 {
                continue;
            }
            let gq = gi.powf(e);
            z += w * gi;
            escort_mass += w * gq;
            for (m, v) in self.features.iter().enumerate() {
                moments[m] += w * gq * v[i];
            }
        }
        if !(z > 0.0 && z.is_finite() && escort_mass.is_finite()) {
            return None;
        }
        let zq = z.powf(-e);
        let gradient: Vec<f64> = self
            .linear
            .iter()
            .zip(&moments)
            .map(|(l, a)| l - zq * a)
            .collect();
        let potential = ln_q_unchecked(z, self.q)
            + theta
                .iter()
                .zip(&self.linear)
                .map(|(t, l)| t * l)
                .sum::<f64>();
        if !potential.is_finite() || gradient.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Eval {
            g,
            z,
            potential,
            gradient,
            moments,
            escort_mass,
        })
    }

    pub fn hessian(&self, ev: &Eval) -> DMatrix<f64> {
        let e = self.exponent();
        let m = self.dim();
        let mut h = DMatrix::zeros(m, m);
        for (i, (&gi, &w)) in ev.g.iter().zip(self.weights).enumerate() {
            if gi <= 0.0 {
                continue;
            }
            let c = w * gi.powf(2.0 * e - 1.0);
            for a in 0..m {
                for b in 0..=a {
                    h[(a, b)] += c * self.features[a][i] * self.features[b][i];
                }
            }
        }
        for a in 0..m {
            for b in 0..=a {
                let v = h[(a, b)] - ev.moments[a] * ev.moments[b] / ev.z;
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
        h * (e * ev.z.powf(-e))
    }
}

pub(crate) struct Minimized {
    pub theta: Vec<f64>,
    pub eval: Eval,
    pub iterations: usize,
    pub residual: f64,
}

/// Damped Newton on the convex potential, with Levenberg regularization for
/// singular Hessians, backtracking for cut-off crossings, and a bracketing
/// bisection fallback in one dimension.
pub(crate) fn minimize(
    family: &Family<'_>,
    theta0: Vec<f64>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<Minimized> {
    let mode = family.mode;
    let mut theta = theta0;
    let mut ev = family.eval(&theta).ok_or(Error::CutoffCollapse)?;
    let mut res = ev.residual_norm(mode);
    let mut history: Vec<f64> = Vec::new();

    for it in 0..max_iterations {
        if res < tolerance {
            let (t, e, r) = polish(family, theta, ev, res);
            return Ok(Minimized {
                theta: t,
                eval: e,
                iterations: it,
                residual: r,
            });
        }
        history.push(res);
        // Stagnation over a long window means the potential is unbounded in
        // some direction, i.e. the targets cannot be reproduced.
        if history.len() > 40 {
            let old = history[history.len() - 41];
            if res > 0.5 * old {
                return Err(Error::Infeasible { residual: res });
            }
        }
        if theta.iter().any(|t| t.abs() > 1e12) {
            return Err(Error::Infeasible { residual: res });
        }

        match newton_step(family, &theta, &ev) {
            Some((t, e)) => {
                theta = t;
                ev = e;
            }
            None if family.dim() == 1 => match bisect(family, theta[0], &ev, tolerance) {
                Some((t, e)) => {
                    theta = vec![t];
                    ev = e;
                }
                None => return Err(Error::Infeasible { residual: res }),
            },
            None => return Err(Error::Infeasible { residual: res }),
        }
        res = ev.residual_norm(mode);
    }
    if res < tolerance {
        let (t, e, r) = polish(family, theta, ev, res);
        return Ok(Minimized {
            theta: t,
            eval: e,
            iterations: max_iterations,
            residual: r,
        });
    }
    Err(Error::NonConvergence {
        iterations: max_iterations,
        residual: res,
    })
}

fn direction(h: &DMatrix<f64>, grad: &[f64], mu: f64) -> Option<DVector<f64>> {
    let n = grad.len();
    let reg = h + DMatrix::identity(n, n) * mu;
    let chol = reg.cholesky()?;
    let d = chol.solve(&-DVector::from_column_slice(grad));
    d.iter().all(|v| v.is_finite()).then_some(d)
}

fn newton_step(family: &Family<'_>, theta: &[f64], ev: &Eval) -> Option<(Vec<f64>, Eval)> {
    let mode = family.mode;
    let h = family.hessian(ev);
    let scale = h.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let res = ev.residual_norm(mode);
    let mut mu = 0.0;
    for _ in 0..12 {
        if let Some(d) = direction(&h, &ev.gradient, mu) {
            let slope: f64 = d.iter().zip(&ev.gradient).map(|(a, b)| a * b).sum();
            if slope < 0.0 {
                let mut alpha = 1.0;
                for _ in 0..60 {
                    let cand: Vec<f64> = theta.iter().zip(d.iter()).map(|(t, d)| t + alpha * d).collect();
                    if let Some(e2) = family.eval(&cand) {
                        let armijo = e2.potential <= ev.potential + 1e-4 * alpha * slope;
                        let flat = e2.potential
                            <= ev.potential + 1e-13 * (1.0 + ev.potential.abs())
                            && e2.residual_norm(mode) < res;
                        if armijo || flat {
                            return Some((cand, e2));
                        }
                    }
                    alpha *= 0.5;
                }
            }
        }
        mu = if mu == 0.0 { 1e-10 * scale } else { mu * 100.0 };
    }
    None
}

/// A few extra full Newton steps once the tolerance is met; kept only while
/// the residual keeps shrinking. Finite-difference diagnostics rely on this.
fn polish(family: &Family<'_>, mut theta: Vec<f64>, mut ev: Eval, mut res: f64) -> (Vec<f64>, Eval, f64) {
    let mode = family.mode;
    for _ in 0..3 {
        if res == 0.0 || family.dim() == 0 {
            break;
        }
        let h = family.hessian(&ev);
        let Some(d) = direction(&h, &ev.gradient, 0.0) else {
            break;
        };
        let cand: Vec<f64> = theta.iter().zip(d.iter()).map(|(t, d)| t + d).collect();
        match family.eval(&cand) {
            Some(e2) if e2.residual_norm(mode) < res => {
                res = e2.residual_norm(mode);
                theta = cand;
                ev = e2;
            }
            _ => break,
        }
    }
    (theta, ev, res)
}

/// One-dimensional fallback: the gradient of a convex potential is
/// monotone, so a sign change brackets the root.
fn bisect(family: &Family<'_>, theta0: f64, ev0: &Eval, tolerance: f64) -> Option<(f64, Eval)> {
    let mode = family.mode;
    let s0 = ev0.gradient[0].signum();
    let dir = -s0;
    let mut lo = theta0;
    let mut step = theta0.abs().max(1.0);
    let mut hi = None;
    for _ in 0..400 {
        let cand = lo + dir * step;
        match family.eval(&[cand]) {
            None => {
                step *= 0.5;
                if step < 1e-300 {
                    return None;
                }
            }
            Some(e) if e.gradient[0].signum() == s0 => {
                if e.residual_norm(mode) < tolerance {
                    return Some((cand, e));
                }
                lo = cand;
                step *= 2.0;
                if step > 1e14 {
                    return None;
                }
            }
            Some(e) => {
                if e.residual_norm(mode) < tolerance {
                    return Some((cand, e));
                }
                hi = Some(cand);
                break;
            }
        }
    }
    let mut hi = hi?;
    let mut best: Option<(f64, Eval)> = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let e = family.eval(&[mid])?;
        let r = e.residual_norm(mode);
        let same = e.gradient[0].signum() == s0;
        if best.as_ref().is_none_or(|(_, b)| r < b.residual_norm(mode)) {
            best = Some((mid, e));
        }
        if r < tolerance || (hi - lo).abs() <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
        if same {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}
