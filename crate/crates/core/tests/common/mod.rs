//! Instance generators and definition-level oracles shared by the
//! integration tests. Nothing here calls into the library's evaluation
//! paths except to construct inputs.

#![allow(dead_code)]

use qentropy::{Distribution, MomentFunction, SupportGrid};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive point of the simplex, no coordinate below `floor / n`.
pub fn simplex<R: Rng>(rng: &mut R, n: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + floor).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

pub fn dist(d: Vec<f64>) -> Distribution {
    Distribution::new(SupportGrid::counting(d.len()), d).unwrap()
}

pub fn mix(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

pub fn moments<R: Rng>(rng: &mut R, n: usize, m: usize) -> Vec<MomentFunction> {
    (0..m)
        .map(|k| {
            MomentFunction::new(
                format!("u{k}"),
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        })
        .collect()
}

/// `(x^(1-q) - 1)/(1-q)` straight from the definition.
pub fn lnq_def(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        x.ln()
    } else {
        (x.powf(1.0 - q) - 1.0) / (1.0 - q)
    }
}

/// `Σ w p ((p/r)^(q-1) - 1)/(q-1)` straight from the definition.
pub fn tsallis_div_def(p: &[f64], r: &[f64], w: &[f64], q: f64) -> f64 {
    p.iter()
        .zip(r)
        .zip(w)
        .filter(|((&a, _), _)| a > 0.0)
        .map(|((&a, &b), &w)| {
            if q == 1.0 {
                w * a * (a / b).ln()
            } else {
                w * a * ((a / b).powf(q - 1.0) - 1.0) / (q - 1.0)
            }
        })
        .sum()
}

/// `-Σ w p (p^(q-1) - 1)/(q-1)` straight from the definition.
pub fn tsallis_entropy_def(p: &[f64], w: &[f64], q: f64) -> f64 {
    -p.iter()
        .zip(w)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &w)| {
            if q == 1.0 {
                w * a * a.ln()
            } else {
                w * a * (a.powf(q - 1.0) - 1.0) / (q - 1.0)
            }
        })
        .sum::<f64>()
}

/// `Σ w u p^q`.
pub fn q_exp_def(p: &[f64], u: &[f64], w: &[f64], q: f64) -> f64 {
    p.iter()
        .zip(u)
        .zip(w)
        .filter(|((&a, _), _)| a > 0.0)
        .map(|((&a, &u), &w)| w * u * a.powf(q))
        .sum()
}

/// Raw-bracket minxent partition function `Σ w [r^(1-q) - (1-q) Σβu]^(1/(1-q))`.
pub fn partition_def(r: &[f64], us: &[MomentFunction], beta: &[f64], w: &[f64], q: f64) -> f64 {
    (0..r.len())
        .map(|i| {
            let s: f64 = us.iter().zip(beta).map(|(u, b)| b * u.values[i]).sum();
            let g = if q == 1.0 {
                r[i] * (-s).exp()
            } else {
                let base = r[i].powf(1.0 - q) - (1.0 - q) * s;
                if base > 0.0 {
                    base.powf(1.0 / (1.0 - q))
                } else {
                    0.0
                }
            };
            w[i] * g
        })
        .sum()
}

/// Classical minimum relative-entropy solution `r e^{-βu} / Z` for one
/// constraint, found by bisection on the monotone map `β ↦ E[u]`.
pub fn classical_exponential_family(r: &[f64], u: &[f64], target: f64) -> (f64, Vec<f64>) {
    let density = |beta: f64| -> Vec<f64> {
        let g: Vec<f64> = r.iter().zip(u).map(|(r, u)| r * (-beta * u).exp()).collect();
        let z: f64 = g.iter().sum();
        g.into_iter().map(|v| v / z).collect()
    };
    let mean = |beta: f64| -> f64 { density(beta).iter().zip(u).map(|(p, u)| p * u).sum() };
    // E[u] decreases in β
    let (mut lo, mut hi) = (-1.0, 1.0);
    while mean(lo) < target {
        lo *= 2.0;
    }
    while mean(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    (beta, density(beta))
}
