use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::montecarlo::{mean_variance, partial_sums};
use crate::observable::Observable;
use crate::systems::StationarySampler;

/// Smallest horizon accepted by [`clt_check`].
pub const MIN_CLT_HORIZON: usize = 1000;

/// Moments and normal sup-distance of `Z = Sₙ/(σ√n)` over replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltDiagnostics {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub sigma2: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Non-excess kurtosis `E[(Z−Z̄)⁴]/s⁴`.
    pub kurtosis: f64,
    pub excess_kurtosis: f64,
    /// `sup_z |F̂(z) − Φ(z)|`.
    pub ks_distance: f64,
}

/// `sup_z |F̂(z) − Φ(z)|` for the empirical CDF of `z`.
pub fn ks_normal_distance(z: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let len = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            ((i + 1) as f64 / len - f).max(f - i as f64 / len)
        })
        .fold(0.0, f64::max)
}

/// Normal-approximation diagnostics for `Sₙ(φ)`. `p` is the integrability
/// exponent of the certificate behind `sigma2`; the limit theorem needs
/// `p ≥ 2`.
#[allow(clippy::too_many_arguments)]
pub fn clt_check(
    sampler: &StationarySampler,
    phi: &Observable,
    sigma2: f64,
    p: f64,
    n: usize,
    reps: usize,
    seed: u64,
    execution: Execution,
) -> Result<CltDiagnostics> {
    if p < 2.0 {
        return Err(Error::InvalidParameter(format!(
            "the normal limit needs the embedding exponent p >= 2, certificate declares p = {p}"
        )));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::DegenerateVariance(sigma2));
    }
    if n < MIN_CLT_HORIZON {
        return Err(Error::InvalidParameter(format!("CLT horizon must be at least {MIN_CLT_HORIZON}")));
    }
    let scale = 1.0 / (sigma2 * n as f64).sqrt();
    let z: Vec<f64> = partial_sums(sampler, phi, n, reps, seed, execution)?
        .into_iter()
        .map(|s| s * scale)
        .collect();
    let (mean, variance) = mean_variance(&z);
    let len = z.len() as f64;
    let central = |r: i32| z.iter().map(|x| (x - mean).powi(r)).sum::<f64>() / len;
    let m2 = central(2);
    let skewness = central(3) / m2.powf(1.5);
    let kurtosis = central(4) / (m2 * m2);
    Ok(CltDiagnostics {
        n,
        reps,
        seed,
        sigma2,
        mean,
        variance,
        skewness,
        kurtosis,
        excess_kurtosis: kurtosis - 3.0,
        ks_distance: ks_normal_distance(&z),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::spectral::doeblin_chain;

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let normal = Normal::standard();
        let z: Vec<f64> = (0..1000).map(|i| normal.inverse_cdf((i as f64 + 0.5) / 1000.0)).collect();
        assert!((ks_normal_distance(&z) - 0.0005).abs() < 1e-9);
    }

    #[test]
    fn refusals() {
        let model = doeblin_chain(Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()).unwrap();
        let s = StationarySampler::finite(&model, 0).unwrap();
        let phi = Observable::table(vec![1.0, -1.0]);
        assert!(matches!(
            clt_check(&s, &phi, 0.0, 2.0, 1000, 100, 0, Execution::Sequential),
            Err(Error::DegenerateVariance(_))
        ));
        assert!(clt_check(&s, &phi, 1.0, 1.5, 1000, 100, 0, Execution::Sequential).is_err());
    }

    #[test]
    fn iid_signs_look_normal() {
        let model = doeblin_chain(Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()).unwrap();
        let s = StationarySampler::finite(&model, 0).unwrap();
        let phi = Observable::table(vec![1.0, -1.0]);
        let d = clt_check(&s, &phi, 1.0, 2.0, 1000, 4000, 5, Execution::Parallel).unwrap();
        assert!(d.mean.abs() < 0.1 && (d.variance - 1.0).abs() < 0.1, "{d:?}");
        assert!(d.ks_distance < 0.04, "{d:?}");
    }
}
