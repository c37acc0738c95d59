use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{operator_norm_2, Cumulative, State};
use crate::error::{Error, Result};
use crate::exec::{replicate_rng, SimRng};
use crate::linalg::Matrix;

/// Bounded innovation law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    Uniform { low: f64, high: f64 },
    Discrete { values: Vec<f64>, weights: Vec<f64> },
}

impl Noise {
    /// Rademacher signs.
    pub fn rademacher() -> Self {
        Noise::Discrete {
            values: vec![-1.0, 1.0],
            weights: vec![0.5, 0.5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Noise::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(Error::InvalidParameter(format!("uniform noise on [{low}, {high}]")));
                }
            }
            Noise::Discrete { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return Err(Error::Dimension("one weight per noise value required".into()));
                }
                if values.iter().any(|v| !v.is_finite()) || weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::InvalidParameter("noise values must be finite, weights non-negative".into()));
                }
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!("noise weights sum to {s}")));
                }
            }
        }
        Ok(())
    }

    /// `sup |ξ|`.
    pub fn bound(&self) -> f64 {
        match self {
            Noise::Uniform { low, high } => low.abs().max(high.abs()),
            Noise::Discrete { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Noise::Uniform { low, high } => 0.5 * (low + high),
            Noise::Discrete { values, weights } => values.iter().zip(weights).map(|(v, w)| v * w).sum(),
        }
    }

    fn compile(&self) -> Result<CompiledNoise> {
        self.validate()?;
        Ok(match self {
            Noise::Uniform { low, high } => CompiledNoise::Uniform {
                low: *low,
                width: high - low,
            },
            Noise::Discrete { values, weights } => CompiledNoise::Discrete {
                values: values.clone(),
                cumulative: Cumulative::new(weights),
            },
        })
    }
}

#[derive(Debug, Clone)]
enum CompiledNoise {
    Uniform { low: f64, width: f64 },
    Discrete { values: Vec<f64>, cumulative: Cumulative },
}

impl CompiledNoise {
    #[inline]
    fn draw(&self, rng: &mut SimRng) -> f64 {
        match self {
            CompiledNoise::Uniform { low, width } => low + width * rng.random::<f64>(),
            CompiledNoise::Discrete { values, cumulative } => values[cumulative.draw(rng)],
        }
    }
}

fn default_tolerance() -> f64 {
    1e-10
}

/// `X_k = Σ_{i≥0} a_i ξ_{k−i}` with i.i.d. bounded innovations and
/// `|a_i| ≤ c ρ^i`, truncated at the smallest lag `L` whose tail bound
/// `c ρ^{L+1}/(1−ρ)` is below `tolerance`.
///
/// Without explicit coefficients, `a_i = c ρ^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProcessSpec {
    pub c: f64,
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    pub innovation: Noise,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl LinearProcessSpec {
    pub fn geometric(c: f64, rho: f64, innovation: Noise) -> Self {
        LinearProcessSpec {
            c,
            rho,
            coefficients: None,
            innovation,
            tolerance: default_tolerance(),
        }
    }

    /// `Σ_{i>L} c ρ^i`.
    pub fn tail_bound(&self, lag: usize) -> f64 {
        self.c * self.rho.powi(lag as i32 + 1) / (1.0 - self.rho)
    }

    pub fn truncation_length(&self) -> Result<usize> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::NonContracting { estimate: self.rho });
        }
        if !(self.c > 0.0 && self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("c and tolerance must be positive".into()));
        }
        let mut lag = 0usize;
        while self.tail_bound(lag) >= self.tolerance {
            lag += 1;
        }
        Ok(lag)
    }

    /// `a_0, …, a_L` after truncation.
    pub fn truncated_coefficients(&self) -> Result<Vec<f64>> {
        let lag = self.truncation_length()?;
        match &self.coefficients {
            None => Ok((0..=lag).map(|i| self.c * self.rho.powi(i as i32)).collect()),
            Some(a) => {
                for (i, ai) in a.iter().enumerate() {
                    let envelope = self.c * self.rho.powi(i as i32);
                    if !(ai.abs() <= envelope * (1.0 + 1e-12)) {
                        return Err(Error::InvalidParameter(format!(
                            "|a_{i}| = {} exceeds c*rho^{i} = {envelope}",
                            ai.abs()
                        )));
                    }
                }
                let mut out = a.clone();
                out.resize(lag + 1, 0.0);
                Ok(out)
            }
        }
    }

    pub(crate) fn compile(&self) -> Result<CompiledLinear> {
        Ok(CompiledLinear {
            coeffs: self.truncated_coefficients()?,
            noise: self.innovation.compile()?,
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledLinear {
    coeffs: Vec<f64>,
    noise: CompiledNoise,
}

impl CompiledLinear {
    pub(crate) fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn value(&self, xi: &[f64], head: usize) -> f64 {
        let m = xi.len();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| a * xi[(head + m - i) % m])
            .sum()
    }

    pub(crate) fn initial(&self, rng: &mut SimRng) -> State {
        let m = self.coeffs.len();
        let xi: Vec<f64> = (0..m).map(|_| self.noise.draw(rng)).collect();
        let head = m - 1;
        let value = self.value(&xi, head);
        State::Window { xi, head, value }
    }

    pub(crate) fn step(&self, state: &mut State, rng: &mut SimRng) {
        let State::Window { xi, head, value } = state else {
            unreachable!("linear process walker without a window")
        };
        *head = (*head + 1) % xi.len();
        xi[*head] = self.noise.draw(rng);
        *value = self.value(xi, *head);
    }
}

/// Scalar or matrix autoregression coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArCoefficient {
    Scalar(f64),
    Matrix(Matrix),
}

/// `X_{k+1} = A X_k + ξ_{k+1}` with i.i.d. bounded noise in each coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArSpec {
    #[serde(rename = "A")]
    pub a: ArCoefficient,
    pub noise: Noise,
}

impl ArSpec {
    pub fn scalar(a: f64, noise: Noise) -> Self {
        ArSpec {
            a: ArCoefficient::Scalar(a),
            noise,
        }
    }

    pub fn matrix(&self) -> Result<Matrix> {
        let a = match &self.a {
            ArCoefficient::Scalar(a) => Matrix::from_rows(&[vec![*a]])?,
            ArCoefficient::Matrix(m) => m.clone(),
        };
        if !a.is_square() || a.rows() == 0 {
            return Err(Error::Dimension("A must be square".into()));
        }
        Ok(a)
    }

    pub(crate) fn compile(&self) -> Result<CompiledAr> {
        let a = self.matrix()?;
        let rate = operator_norm_2(&a);
        if !(rate < 1.0) {
            return Err(Error::NonContracting { estimate: rate });
        }
        Ok(CompiledAr {
            a,
            noise: self.noise.compile()?,
            rate,
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledAr {
    a: Matrix,
    noise: CompiledNoise,
    rate: f64,
}

impl CompiledAr {
    pub(crate) fn contraction(&self) -> f64 {
        self.rate
    }

    pub(crate) fn initial(&self) -> State {
        let d = self.a.rows();
        State::Vector {
            x: vec![0.0; d],
            scratch: vec![0.0; d],
        }
    }

    pub(crate) fn step(&self, x: &mut [f64], scratch: &mut [f64], rng: &mut SimRng) {
        for (i, s) in scratch.iter_mut().enumerate() {
            *s = self.a.row(i).iter().zip(x.iter()).map(|(a, v)| a * v).sum();
        }
        for (xi, s) in x.iter_mut().zip(scratch.iter()) {
            *xi = s + self.noise.draw(rng);
        }
    }
}

/// `x ↦ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub slope: f64,
    pub intercept: f64,
}

impl AffineMap {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

fn default_pairs() -> usize {
    256
}

/// Random iteration of affine maps: at each step map `i` is applied with
/// probability `weights[i]`. Contracting on average when `Σ wᵢ|slopeᵢ| < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSpec {
    pub maps: Vec<AffineMap>,
    pub weights: Vec<f64>,
    /// Point pairs used to estimate the average contraction.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
}

impl LipschitzSpec {
    /// The middle-thirds Cantor system `x/3`, `x/3 + 2/3` with equal weights.
    pub fn cantor() -> Self {
        LipschitzSpec {
            maps: vec![
                AffineMap { slope: 1.0 / 3.0, intercept: 0.0 },
                AffineMap { slope: 1.0 / 3.0, intercept: 2.0 / 3.0 },
            ],
            weights: vec![0.5, 0.5],
            pairs: default_pairs(),
        }
    }

    /// Average of `Σ wᵢ|gᵢ(x) − gᵢ(y)|/|x − y|` over seeded pairs in `[0, 1]²`.
    pub fn contraction_estimate(&self) -> f64 {
        let mut rng = replicate_rng(0x6c69_7073, 0);
        let mut total = 0.0;
        let mut used = 0usize;
        for _ in 0..self.pairs.max(1) {
            let (x, y): (f64, f64) = (rng.random(), rng.random());
            if x == y {
                continue;
            }
            total += self
                .maps
                .iter()
                .zip(&self.weights)
                .map(|(g, w)| w * (g.apply(x) - g.apply(y)).abs())
                .sum::<f64>()
                / (x - y).abs();
            used += 1;
        }
        total / used as f64
    }

    pub(crate) fn compile(&self) -> Result<CompiledLipschitz> {
        Noise::Discrete {
            values: vec![0.0; self.weights.len()],
            weights: self.weights.clone(),
        }
        .validate()?;
        if self.maps.len() != self.weights.len() {
            return Err(Error::Dimension("one weight per map required".into()));
        }
        let rate = self.contraction_estimate();
        if !(rate < 1.0) {
            return Err(Error::NonContracting { estimate: rate });
        }
        Ok(CompiledLipschitz {
            maps: self.maps.clone(),
            cumulative: Cumulative::new(&self.weights),
            rate,
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledLipschitz {
    maps: Vec<AffineMap>,
    cumulative: Cumulative,
    rate: f64,
}

impl CompiledLipschitz {
    pub(crate) fn contraction(&self) -> f64 {
        self.rate
    }

    pub(crate) fn initial(&self) -> f64 {
        0.0
    }

    #[inline]
    pub(crate) fn step(&self, x: f64, rng: &mut SimRng) -> f64 {
        self.maps[self.cumulative.draw(rng)].apply(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observable::StatePoint;
    use crate::systems::StationarySampler;

    fn real(p: StatePoint<'_>) -> f64 {
        match p {
            StatePoint::Real(x) => x,
            _ => f64::NAN,
        }
    }

    #[test]
    fn truncation_follows_the_tail_bound() {
        let spec = LinearProcessSpec::geometric(1.0, 0.5, Noise::rademacher());
        assert_eq!(spec.truncation_length().unwrap(), 34);
        assert!(spec.tail_bound(33) >= 1e-10);
        assert!(spec.tail_bound(34) < 1e-10);
    }

    #[test]
    fn explicit_coefficients_respect_the_envelope() {
        let mut spec = LinearProcessSpec::geometric(1.0, 0.5, Noise::rademacher());
        spec.coefficients = Some(vec![1.0, 0.6]);
        assert!(spec.truncated_coefficients().is_err());
        spec.coefficients = Some(vec![1.0, -0.5, 0.25]);
        let a = spec.truncated_coefficients().unwrap();
        assert_eq!(a.len(), 35);
        assert_eq!(&a[..3], &[1.0, -0.5, 0.25]);
    }

    #[test]
    fn linear_process_value_matches_its_window() {
        let spec = LinearProcessSpec::geometric(1.0, 0.5, Noise::rademacher());
        let s = StationarySampler::linear_process(&spec, 5).unwrap();
        let xs = s.trajectory(200, real);
        // X_{k+1} − ρX_k = ξ_{k+1} up to the truncated tail
        for w in xs.windows(2) {
            let innovation = w[1] - 0.5 * w[0];
            assert!((innovation.abs() - 1.0).abs() < 1e-9, "{innovation}");
        }
    }

    #[test]
    fn ar_rejects_expanding_coefficient() {
        assert!(matches!(
            ArSpec::scalar(1.2, Noise::rademacher()).compile(),
            Err(Error::NonContracting { .. })
        ));
        let spec = ArSpec {
            a: ArCoefficient::Matrix(Matrix::from_rows(&[vec![0.5, 0.9], vec![0.0, 0.5]]).unwrap()),
            noise: Noise::rademacher(),
        };
        assert!(spec.compile().is_err());
    }

    #[test]
    fn ar_burn_in_and_stationary_variance() {
        let spec = ArSpec::scalar(0.5, Noise::Uniform { low: -1.0, high: 1.0 });
        let s = StationarySampler::ar_model(&spec, 11).unwrap();
        assert_eq!(s.burn_in(), 27);
        let xs = s.trajectory(200_000, |p| match p {
            StatePoint::Vector(v) => v[0],
            _ => f64::NAN,
        });
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        // Var = (1/3) / (1 − 1/4)
        assert!((var - 4.0 / 9.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn cantor_system() {
        let spec = LipschitzSpec::cantor();
        assert!((spec.contraction_estimate() - 1.0 / 3.0).abs() < 1e-12);
        let s = StationarySampler::random_lipschitz(&spec, 2).unwrap();
        assert_eq!(s.burn_in(), 17);
        let xs = s.trajectory(100_000, real);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
        // the middle third is never visited
        assert!(xs.iter().all(|&x| !(x > 1.0 / 3.0 + 1e-9 && x < 2.0 / 3.0 - 1e-9)));
    }

    #[test]
    fn non_contracting_lipschitz_is_rejected() {
        let spec = LipschitzSpec {
            maps: vec![AffineMap { slope: 1.5, intercept: 0.0 }],
            weights: vec![1.0],
            pairs: 16,
        };
        assert!(matches!(spec.compile(), Err(Error::NonContracting { .. })));
    }
}
