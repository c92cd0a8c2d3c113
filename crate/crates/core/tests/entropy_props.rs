mod common;

use common::{tsallis_div_def, tsallis_entropy_def};
use proptest::prelude::*;
use qentropy::entropy::{
    entropy_divergence_link, kl_divergence, shannon_entropy, tsallis_entropy, tsallis_entropy_qlog,
    tsallis_relative_entropy, tsallis_relative_entropy_qlog,
};
use qentropy::{ln_q, pseudo_add, uniform_on, Composition, Distribution, QIndex, SupportGrid};

fn qi(v: f64) -> QIndex {
    QIndex::new(v).unwrap()
}

/// Weighted grid of 2..=6 points plus a density on it with every value
/// bounded away from zero.
fn grid() -> impl Strategy<Value = SupportGrid> {
    prop::collection::vec(0.5f64..1.5, 2..=6).prop_map(|w| {
        let points = (0..w.len()).map(|i| i as f64).collect();
        SupportGrid::new(points, w).unwrap()
    })
}

fn density_on(grid: SupportGrid) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.05f64..1.0, grid.len())
        .prop_map(move |v| Distribution::from_unnormalized(grid.clone(), v).unwrap())
}

fn pair() -> impl Strategy<Value = (Distribution, Distribution)> {
    grid().prop_flat_map(|g| (density_on(g.clone()), density_on(g)))
}

fn triple() -> impl Strategy<Value = (Distribution, Distribution, Distribution)> {
    grid().prop_flat_map(|g| (density_on(g.clone()), density_on(g.clone()), density_on(g)))
}

fn q_index() -> impl Strategy<Value = f64> {
    0.1f64..3.0
}

proptest! {
    #[test]
    fn divergence_is_positive_off_the_diagonal((p, r) in pair(), q in q_index()) {
        let gap = p.density().iter().zip(r.density()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assume!(gap > 1e-3);
        prop_assert!(tsallis_relative_entropy(&p, &r, qi(q)).unwrap() > 0.0);
    }

    #[test]
    fn divergence_vanishes_at_q_zero((p, r) in pair()) {
        let v = tsallis_relative_entropy(&p, &r, qi(0.0)).unwrap();
        prop_assert!(v.abs() < 1e-12);
    }

    #[test]
    fn divergence_of_a_density_with_itself_is_zero((p, _) in pair(), q in q_index()) {
        prop_assert!(tsallis_relative_entropy(&p, &p, qi(q)).unwrap().abs() < 1e-14);
    }

    #[test]
    fn definition_matches_oracle((p, r) in pair(), q in q_index()) {
        let w = p.grid().weights();
        let lib = tsallis_relative_entropy(&p, &r, qi(q)).unwrap();
        let oracle = tsallis_div_def(p.density(), r.density(), w, q);
        prop_assert!((lib - oracle).abs() < 1e-10 * oracle.abs().max(1.0));
        let s = tsallis_entropy(&p, qi(q));
        let s_oracle = tsallis_entropy_def(p.density(), w, q);
        prop_assert!((s - s_oracle).abs() < 1e-10 * s_oracle.abs().max(1.0));
    }

    #[test]
    fn q_log_forms_agree((p, r) in pair(), q in q_index()) {
        let q = qi(q);
        let a = tsallis_relative_entropy(&p, &r, q).unwrap();
        let b = tsallis_relative_entropy_qlog(&p, &r, q).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
        let s = tsallis_entropy(&p, q);
        let t = tsallis_entropy_qlog(&p, q).unwrap();
        prop_assert!((s - t).abs() < 1e-10);
        prop_assert!(entropy_divergence_link(&p, &r, q).unwrap().abs() < 1e-10);
    }

    #[test]
    fn uniform_density_maximizes_entropy((p, _) in pair(), q in q_index()) {
        let q = qi(q);
        let (uniform, width) = uniform_on(p.grid());
        let top = ln_q(width, q).unwrap();
        prop_assert!((tsallis_entropy(&uniform, q) - top).abs() < 1e-12);
        prop_assert!(tsallis_entropy(&p, q) <= top + 1e-12);
    }

    #[test]
    fn divergence_is_convex_in_its_first_argument(
        (p1, p2, r) in triple(),
        lambda in 0.0f64..1.0,
        q in q_index(),
    ) {
        let q = qi(q);
        let mixed: Vec<f64> = p1
            .density()
            .iter()
            .zip(p2.density())
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        let mixed = Distribution::new(p1.grid().clone(), mixed).unwrap();
        let lhs = tsallis_relative_entropy(&mixed, &r, q).unwrap();
        let rhs = lambda * tsallis_relative_entropy(&p1, &r, q).unwrap()
            + (1.0 - lambda) * tsallis_relative_entropy(&p2, &r, q).unwrap();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn product_densities_compose((p1, r1) in pair(), (p2, r2) in pair(), q in q_index()) {
        let q = qi(q);
        let joint = tsallis_relative_entropy(&p1.product(&p2), &r1.product(&r2), q).unwrap();
        let i1 = tsallis_relative_entropy(&p1, &r1, q).unwrap();
        let i2 = tsallis_relative_entropy(&p2, &r2, q).unwrap();
        prop_assert!((joint - pseudo_add(i1, i2, q, Composition::Divergence)).abs() < 1e-10);
        let s = tsallis_entropy(&p1.product(&p2), q);
        let (s1, s2) = (tsallis_entropy(&p1, q), tsallis_entropy(&p2, q));
        prop_assert!((s - pseudo_add(s1, s2, q, Composition::Entropy)).abs() < 1e-10);
    }

    #[test]
    fn converges_linearly_to_shannon_and_kl((p, r) in pair(), k in 2i32..7, above in any::<bool>()) {
        let eps = 10f64.powi(-k);
        let q = qi(if above { 1.0 + eps } else { 1.0 - eps });
        let w = p.grid().weights();
        let second: f64 = p.density().iter().zip(w).map(|(a, w)| w * a * a.ln().powi(2)).sum();
        let second_rel: f64 = p
            .density()
            .iter()
            .zip(r.density())
            .zip(w)
            .map(|((a, b), w)| w * a * (a / b).ln().powi(2))
            .sum();
        let ds = (tsallis_entropy(&p, q) - shannon_entropy(&p)).abs();
        let di = (tsallis_relative_entropy(&p, &r, q).unwrap() - kl_divergence(&p, &r).unwrap()).abs();
        prop_assert!(ds <= eps * second + 1e-13, "{ds} vs {}", eps * second);
        prop_assert!(di <= eps * second_rel + 1e-13, "{di} vs {}", eps * second_rel);
    }
}

#[test]
fn classical_values_are_shannon_and_kl() {
    let g = SupportGrid::counting(2);
    let p = Distribution::new(g.clone(), vec![0.7, 0.3]).unwrap();
    let r = Distribution::new(g, vec![0.5, 0.5]).unwrap();
    let q = QIndex::classical();
    assert_eq!(tsallis_entropy(&p, q), shannon_entropy(&p));
    assert_eq!(
        tsallis_relative_entropy(&p, &r, q).unwrap(),
        kl_divergence(&p, &r).unwrap()
    );
}
