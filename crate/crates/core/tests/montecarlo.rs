mod common;

use common::*;
use ergomoment::montecarlo::{estimate_indicator_s4, estimate_s4};
use ergomoment::oracle::MomentOracle;
use ergomoment::systems::StationarySampler;
use ergomoment::verify::{binomial_fourth_central, empirical_tightness};
use ergomoment::{Execution, Observable};

const PAR: Execution = Execution::Parallel;

#[test]
fn rademacher_benchmark() {
    let s = StationarySampler::finite(&rademacher(), 0).unwrap();
    let phi = Observable::table(vec![1.0, -1.0]);
    let est = estimate_s4(&s, &phi, 10, 100_000, 11, PAR).unwrap();
    assert!(est.covers(280.0, 3.0), "{est:?}");
}

#[test]
fn symmetric_chain_matches_oracle() {
    let model = symmetric();
    let exact = MomentOracle::from_values(&model, vec![1.0, -1.0]).unwrap().fourth_moment(16).unwrap();
    let s = StationarySampler::finite(&model, 0).unwrap();
    let est = estimate_s4(&s, &Observable::table(vec![1.0, -1.0]), 16, 100_000, 12, PAR).unwrap();
    assert!(est.covers(exact, 3.0), "{est:?} vs {exact}");
}

#[test]
fn doubling_reps_shrinks_stderr_by_root_two() {
    let s = StationarySampler::finite(&rademacher(), 0).unwrap();
    let phi = Observable::table(vec![1.0, -1.0]);
    let a = estimate_s4(&s, &phi, 10, 20_000, 21, PAR).unwrap();
    let b = estimate_s4(&s, &phi, 10, 40_000, 22, PAR).unwrap();
    let ratio = b.stderr / a.stderr;
    assert!((ratio * 2f64.sqrt() - 1.0).abs() < 0.2, "{ratio}");
}

#[test]
fn same_seed_same_bits() {
    let s = StationarySampler::finite(&reflected_walk(), 0).unwrap();
    let phi = Observable::table(centered(&reflected_walk(), &[0.0, 1.0, 2.0]));
    let a = estimate_s4(&s, &phi, 50, 1000, 5, Execution::Parallel).unwrap();
    let b = estimate_s4(&s, &phi, 50, 1000, 5, Execution::Sequential).unwrap();
    assert_eq!(a, b);
}

#[test]
fn oracle_agreement_rate_over_meta_trials() {
    // statistical: each trial covers the exact value within 3 SE with
    // probability ≈ 0.997 under normality of the replicate mean
    let model = sticky3();
    let values = centered(&model, &[1.0, -1.0, 0.5]);
    let exact = MomentOracle::from_values(&model, values.clone()).unwrap().fourth_moment(12).unwrap();
    let s = StationarySampler::finite(&model, 0).unwrap();
    let phi = Observable::table(values);
    let hits = (0..100u64)
        .filter(|t| estimate_s4(&s, &phi, 12, 4000, 1_000_000 * t, PAR).unwrap().covers(exact, 3.0))
        .count();
    assert!(hits >= 97, "{hits}/100");
}

#[test]
fn indicator_estimates() {
    let s = StationarySampler::iid_uniform(0);
    let est = estimate_indicator_s4(&s, (0.2, 0.3), None, 100, 100_000, 3, PAR).unwrap();
    let exact = binomial_fourth_central(100, 0.1);
    assert!((exact - 247.14).abs() < 1e-9);
    assert!(est.covers(exact, 3.0), "{est:?}");
}

#[test]
fn indicator_on_two_state_chain_matches_oracle() {
    let model = chain(&[&[0.9, 0.1], &[0.3, 0.7]]);
    let s = StationarySampler::finite(&model, 0).unwrap();
    // positions are the labels 0 and 1; (0.5, 1.5] selects state 1
    let report = empirical_tightness(&s, &[(0.5, 1.5)], 3.0, 40, 50_000, 8, PAR).unwrap();
    let row = &report.rows[0];
    assert!((row.delta - 0.25).abs() < 1e-15);
    let exact = row.exact.unwrap();
    let centered_ind = vec![-0.25, 0.75];
    let direct = MomentOracle::from_values(&model, centered_ind).unwrap().fourth_moment(40).unwrap();
    assert!((exact - direct).abs() <= 1e-12 * direct);
    assert!(row.estimate.covers(exact, 3.0), "{:?} vs {exact}", row.estimate);
}
