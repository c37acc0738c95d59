mod common;

use common::*;
use ergomoment::observable::{Formula, NormKind, StatePoint};
use ergomoment::systems::{LipschitzSpec, StationarySampler, SubshiftSpec, SystemConfig};
use ergomoment::IntervalMap;

fn real(p: StatePoint<'_>) -> f64 {
    match p {
        StatePoint::Real(x) => x,
        _ => f64::NAN,
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn finite_sampler_visits_states_at_stationary_frequencies() {
    let model = sticky3();
    let nu = model.stationary().unwrap().to_vec();
    let s = StationarySampler::finite(&model, 4).unwrap();
    let xs = s.trajectory(400_000, |p| match p {
        StatePoint::Finite { index, .. } => index as f64,
        _ => f64::NAN,
    });
    for (state, w) in nu.iter().enumerate() {
        let freq = xs.iter().filter(|&&x| x == state as f64).count() as f64 / xs.len() as f64;
        assert!((freq - w).abs() < 0.01, "state {state}: {freq} vs {w}");
    }
}

#[test]
fn expanding_maps_sample_their_invariant_laws() {
    let doubling = StationarySampler::expanding_map(&IntervalMap::Doubling, 1).unwrap();
    assert!((mean(&doubling.trajectory(200_000, real)) - 0.5).abs() < 0.01);
    let gauss = StationarySampler::expanding_map(&IntervalMap::Gauss, 1).unwrap();
    let m = mean(&gauss.trajectory(200_000, real));
    let expected = 1.0 / std::f64::consts::LN_2 - 1.0;
    assert!((m - expected).abs() < 0.01, "{m} vs {expected}");
    let beta = StationarySampler::expanding_map(&IntervalMap::Beta { beta: 1.5 }, 1).unwrap();
    assert!(beta.burn_in() > 0);
    assert!(beta.trajectory(1000, real).iter().all(|x| (0.0..1.0).contains(x)));
}

#[test]
fn subshift_word_observable() {
    let spec = SubshiftSpec::bernoulli(&[0.5, 0.5]).unwrap().with_depth(20);
    let s = StationarySampler::subshift(&spec, 2).unwrap();
    let phi = ergomoment::Observable::formula(Formula::GeometricWord { ratio: 0.5 }, NormKind::Sup, 2.0, Some(2.0));
    let xs = s.trajectory(100_000, |p| phi.value(p));
    // E Σ 0.5^k x_k with fair bits = Σ 0.5^{k+1} over 20 terms
    let expected: f64 = (0..20).map(|k| 0.5f64.powi(k + 1)).sum();
    assert!((mean(&xs) - expected).abs() < 0.01);
}

#[test]
fn cantor_mean_is_one_half() {
    let s = StationarySampler::random_lipschitz(&LipschitzSpec::cantor(), 9).unwrap();
    assert!((mean(&s.trajectory(200_000, real)) - 0.5).abs() < 0.005);
}

#[test]
fn config_rejects_unknown_kinds_and_bad_matrices() {
    assert!(serde_json::from_str::<SystemConfig>(r#"{"kind": "teleporter", "seed": 1}"#).is_err());
    let bad: SystemConfig = serde_json::from_str(r#"{"kind": "finite", "P": [[0.5, 0.49], [0.5, 0.5]], "seed": 1}"#).unwrap();
    let err = bad.build().unwrap_err();
    assert!(err.to_string().contains("P not stochastic: row 0"), "{err}");
}

#[test]
fn trajectories_depend_only_on_seed_and_replicate() {
    let s = StationarySampler::expanding_map(&IntervalMap::Gauss, 77).unwrap();
    let a = s.trajectory(500, real);
    let b = s.clone().trajectory(500, real);
    assert_eq!(a, b);
    let mut w = s.walker(77, 0);
    let c: Vec<f64> = (0..500)
        .map(|t| {
            if t > 0 {
                w.step();
            }
            real(w.point())
        })
        .collect();
    assert_eq!(a, c);
}
