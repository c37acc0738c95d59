//! Seeded Monte Carlo estimates of `E[Sₙ⁴]` over independent stationary
//! trajectories.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::CompensatedSum;
use crate::observable::Observable;
use crate::systems::StationarySampler;

/// Fewest replicates accepted by the estimators.
pub const MIN_REPS: usize = 100;
/// `stderr / mean` above which an estimate is flagged underpowered.
pub const UNDERPOWERED_RATIO: f64 = 0.5;

/// A replicate-mean estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub underpowered: bool,
}

impl McEstimate {
    fn from_samples(samples: &[f64], n: usize, seed: u64) -> Self {
        let (mean, var) = mean_variance(samples);
        let stderr = (var / samples.len() as f64).sqrt();
        let underpowered = stderr > UNDERPOWERED_RATIO * mean.abs() && stderr > 0.0;
        McEstimate {
            mean,
            stderr,
            n,
            reps: samples.len(),
            seed,
            underpowered,
        }
    }

    /// `mean + 3·stderr`.
    pub fn upper(&self) -> f64 {
        self.mean + 3.0 * self.stderr
    }

    /// Whether `value` lies within `z` standard errors of the mean.
    pub fn covers(&self, value: f64, z: f64) -> bool {
        (self.mean - value).abs() <= z * self.stderr
    }
}

/// Sample mean and unbiased sample variance, accumulated in index order.
pub fn mean_variance(samples: &[f64]) -> (f64, f64) {
    let len = samples.len() as f64;
    let mut acc = CompensatedSum::new();
    acc.extend(samples.iter().copied());
    let mean = acc.value() / len;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let mut sq = CompensatedSum::new();
    sq.extend(samples.iter().map(|x| (x - mean) * (x - mean)));
    (mean, sq.value() / (len - 1.0))
}

fn check_run(sampler: &StationarySampler, phi: &Observable, n: usize, reps: usize) -> Result<()> {
    if reps < MIN_REPS {
        return Err(Error::InvalidParameter(format!("need at least {MIN_REPS} replicates, got {reps}")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("horizon n must be at least 1".into()));
    }
    phi.check_domain(sampler.state_kind())?;
    if let Some(model) = sampler.finite_model() {
        let mean = model.expectation(&phi.tabulate(model)?)?;
        let scale = phi.sup_bound.unwrap_or(1.0).max(1.0);
        if mean.abs() >= crate::norms::CENTER_TOL * scale {
            return Err(Error::NotCentered { mean });
        }
    }
    Ok(())
}

/// `Sₙ = φ(X₁) + … + φ(Xₙ)` for replicates `0..reps`, in replicate order.
/// Replicate `r` draws from the stream seeded with `seed + r`.
pub fn partial_sums(
    sampler: &StationarySampler,
    phi: &Observable,
    n: usize,
    reps: usize,
    seed: u64,
    execution: Execution,
) -> Result<Vec<f64>> {
    check_run(sampler, phi, n, reps)?;
    Ok(execution.map_indexed(reps, |r| {
        let mut w = sampler.walker(seed, r as u64);
        let mut s = 0.0;
        for _ in 0..n {
            w.step();
            s += phi.value(w.point());
        }
        s
    }))
}

/// Stationary mean of `φ` from one long trajectory of `batches × batch_len`
/// steps on its own stream, with a batch-means standard error.
pub fn estimate_mean(
    sampler: &StationarySampler,
    phi: &Observable,
    batches: usize,
    batch_len: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if batches < 2 || batch_len == 0 {
        return Err(Error::InvalidParameter("need at least 2 non-empty batches".into()));
    }
    phi.check_domain(sampler.state_kind())?;
    let mut w = sampler.walker(seed, u64::MAX);
    let means: Vec<f64> = (0..batches)
        .map(|_| {
            let mut acc = CompensatedSum::new();
            for _ in 0..batch_len {
                w.step();
                acc.add(phi.value(w.point()));
            }
            acc.value() / batch_len as f64
        })
        .collect();
    let (mean, var) = mean_variance(&means);
    Ok((mean, (var / batches as f64).sqrt()))
}

/// Estimate of `E_ν[Sₙ(φ)⁴]`.
pub fn estimate_s4(
    sampler: &StationarySampler,
    phi: &Observable,
    n: usize,
    reps: usize,
    seed: u64,
    execution: Execution,
) -> Result<McEstimate> {
    let sums = partial_sums(sampler, phi, n, reps, seed, execution)?;
    let fourth: Vec<f64> = sums.iter().map(|s| s.powi(4)).collect();
    Ok(McEstimate::from_samples(&fourth, n, seed))
}

/// Estimate of `E[(Σᵢ 𝟙_(s,t](Xᵢ) − n·F(s,t])⁴]`, where `F(s,t]` is the
/// stationary mass of the interval: `mass` when given, otherwise the exact
/// value known to the sampler.
pub fn estimate_indicator_s4(
    sampler: &StationarySampler,
    interval: (f64, f64),
    mass: Option<f64>,
    n: usize,
    reps: usize,
    seed: u64,
    execution: Execution,
) -> Result<McEstimate> {
    let (s, t) = interval;
    if !(s <= t) {
        return Err(Error::InvalidParameter(format!("empty-or-reversed interval ({s}, {t}]")));
    }
    let mass = match mass {
        Some(m) => m,
        None => sampler.interval_mass(s, t).ok_or(Error::NoMeasure)?,
    };
    let mut phi = Observable::indicator(s, t);
    phi.offset = mass;
    phi.sup_bound = Some(mass.max(1.0 - mass));
    estimate_s4(sampler, &phi, n, reps, seed, execution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::spectral::doeblin_chain;

    fn rademacher() -> StationarySampler {
        let model = doeblin_chain(Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()).unwrap();
        StationarySampler::finite(&model, 0).unwrap()
    }

    #[test]
    fn zero_observable_has_zero_error() {
        let est = estimate_s4(&rademacher(), &Observable::table(vec![0.0, 0.0]), 10, 200, 1, Execution::Sequential)
            .unwrap();
        assert_eq!((est.mean, est.stderr, est.underpowered), (0.0, 0.0, false));
    }

    #[test]
    fn rademacher_within_three_se() {
        let phi = Observable::table(vec![1.0, -1.0]);
        let est = estimate_s4(&rademacher(), &phi, 10, 20_000, 7, Execution::Parallel).unwrap();
        assert!(est.covers(280.0, 3.0), "{est:?}");
        assert!(!est.underpowered);
    }

    #[test]
    fn bit_reproducible_across_modes() {
        let phi = Observable::table(vec![1.0, -1.0]);
        let a = estimate_s4(&rademacher(), &phi, 12, 500, 3, Execution::Parallel).unwrap();
        let b = estimate_s4(&rademacher(), &phi, 12, 500, 3, Execution::Sequential).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn rejects_few_replicates_and_uncentered() {
        let phi = Observable::table(vec![1.0, -1.0]);
        assert!(estimate_s4(&rademacher(), &phi, 10, 99, 0, Execution::Sequential).is_err());
        let off = Observable::table(vec![1.0, 0.0]);
        assert!(matches!(
            estimate_s4(&rademacher(), &off, 10, 100, 0, Execution::Sequential),
            Err(Error::NotCentered { .. })
        ));
    }

    #[test]
    fn mean_prepass() {
        let s = StationarySampler::iid_uniform(0);
        let phi = Observable::formula(crate::observable::Formula::Identity, crate::observable::NormKind::Sup, 1.0, Some(1.0));
        let (m, se) = estimate_mean(&s, &phi, 100, 1000, 4).unwrap();
        assert!((m - 0.5).abs() < 4.0 * se && se < 0.002, "{m} {se}");
    }

    #[test]
    fn empty_interval_is_zero() {
        let s = StationarySampler::iid_uniform(0);
        let est = estimate_indicator_s4(&s, (0.3, 0.3), None, 100, 100, 0, Execution::Sequential).unwrap();
        assert_eq!(est.mean, 0.0);
    }
}
