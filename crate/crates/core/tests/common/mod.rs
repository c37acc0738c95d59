#![allow(dead_code)]

use ergomoment::linalg::Matrix;
use ergomoment::spectral::doeblin_chain;
use ergomoment::FiniteMarkovModel;
use proptest::prelude::*;

pub fn chain(rows: &[&[f64]]) -> FiniteMarkovModel {
    doeblin_chain(Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()).unwrap()
}

pub fn rademacher() -> FiniteMarkovModel {
    chain(&[&[0.5, 0.5], &[0.5, 0.5]])
}

pub fn symmetric() -> FiniteMarkovModel {
    chain(&[&[0.75, 0.25], &[0.25, 0.75]])
}

pub fn asymmetric() -> FiniteMarkovModel {
    chain(&[&[0.9, 0.1], &[0.5, 0.5]])
}

pub fn reflected_walk() -> FiniteMarkovModel {
    chain(&[&[0.5, 0.5, 0.0], &[0.25, 0.5, 0.25], &[0.0, 0.5, 0.5]])
}

pub fn lazy_cycle4() -> FiniteMarkovModel {
    chain(&[
        &[0.4, 0.3, 0.0, 0.3],
        &[0.3, 0.4, 0.3, 0.0],
        &[0.0, 0.3, 0.4, 0.3],
        &[0.3, 0.0, 0.3, 0.4],
    ])
}

pub fn sticky3() -> FiniteMarkovModel {
    chain(&[&[0.8, 0.15, 0.05], &[0.1, 0.7, 0.2], &[0.3, 0.1, 0.6]])
}

/// `values − E_ν values`.
pub fn centered(model: &FiniteMarkovModel, values: &[f64]) -> Vec<f64> {
    let nu = model.stationary().unwrap();
    let mean: f64 = nu.iter().zip(values).map(|(w, v)| w * v).sum();
    values.iter().map(|v| v - mean).collect()
}

/// `E_ν[(φ(X₁)+…+φ(Xₙ))⁴]` by summing over all `sⁿ` paths.
pub fn path_enumeration_s4(model: &FiniteMarkovModel, phi: &[f64], n: usize) -> f64 {
    let nu = model.stationary().unwrap();
    let p = model.transition();
    let s = nu.len();
    let mut total = 0.0;
    let mut path = vec![0usize; n];
    loop {
        let mut prob = nu[path[0]];
        let mut sum = phi[path[0]];
        for t in 1..n {
            prob *= p[(path[t - 1], path[t])];
            sum += phi[path[t]];
        }
        total += prob * sum.powi(4);
        // odometer increment
        let mut pos = n;
        loop {
            if pos == 0 {
                return total;
            }
            pos -= 1;
            path[pos] += 1;
            if path[pos] < s {
                break;
            }
            path[pos] = 0;
        }
    }
}

/// `E_ν[φ(X_{t₁})⋯φ(X_{t₄})]` for arbitrary (unsorted) times, by marginalising
/// the path one step at a time.
pub fn joint_moment(model: &FiniteMarkovModel, phi: &[f64], times: [usize; 4]) -> f64 {
    let mut t = times;
    t.sort_unstable();
    let nu = model.stationary().unwrap();
    let p = model.transition();
    // row vector of the law of X_{t[0]} weighted by φ
    let mut v: Vec<f64> = nu.iter().zip(phi).map(|(a, b)| a * b).collect();
    for w in 1..4 {
        for _ in t[w - 1]..t[w] {
            v = p.vec_mul(&v);
        }
        v = v.iter().zip(phi).map(|(a, b)| a * b).collect();
    }
    v.iter().sum()
}

/// Random strictly positive stochastic matrix with 2 to 4 states.
pub fn positive_chain() -> impl Strategy<Value = FiniteMarkovModel> {
    (2usize..=4)
        .prop_flat_map(|s| prop::collection::vec(prop::collection::vec(0.05f64..1.0, s), s))
        .prop_map(|rows| {
            let rows: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|r| {
                    let t: f64 = r.iter().sum();
                    r.into_iter().map(|x| x / t).collect()
                })
                .collect();
            doeblin_chain(Matrix::from_rows(&rows).unwrap()).unwrap()
        })
}

/// A positive chain with a centered observable on it.
pub fn chain_and_phi() -> impl Strategy<Value = (FiniteMarkovModel, Vec<f64>)> {
    positive_chain().prop_flat_map(|m| {
        let s = m.len();
        (Just(m), prop::collection::vec(-3.0f64..3.0, s))
            .prop_map(|(m, raw)| {
                let phi = centered(&m, &raw);
                (m, phi)
            })
    })
}
