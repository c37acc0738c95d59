//! Stationary samplers for every example family: finite chains, expanding
//! interval maps, subshifts of finite type, linear processes, autoregressive
//! models and random iterated Lipschitz maps.
//!
//! A [`StationarySampler`] is an immutable description; [`Walker`]s are the
//! single-threaded trajectories drawn from it. Replicate `r` of a run with
//! base seed `s` draws from the stream seeded with `s + r`, so trajectories
//! are bit-identical for a fixed `(seed, replicate, n)` whatever the thread
//! layout.

mod processes;
mod subshift;
mod zoo;

pub use processes::{AffineMap, ArCoefficient, ArSpec, LinearProcessSpec, LipschitzSpec, Noise};
pub use subshift::SubshiftSpec;
pub use zoo::{System, SystemConfig, SystemSpec};

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{replicate_rng, SimRng};
use crate::linalg::Matrix;
use crate::model::FiniteMarkovModel;
use crate::observable::{StateKind, StatePoint};
use crate::spectral::IntervalMap;

/// Residual bias target of the default burn-in.
pub const BURN_IN_TOL: f64 = 1e-8;

/// `⌈ln(tol)/ln(rate)⌉` steps take a geometric contraction at `rate` below
/// `tol`.
pub fn burn_in_steps(rate: f64, tol: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::NonContracting { estimate: rate });
    }
    if rate == 0.0 {
        return Ok(1);
    }
    Ok((tol.ln() / rate.ln()).ceil().max(0.0) as usize)
}

/// Cumulative distribution used for inverse-CDF draws.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Cumulative(Vec<f64>);

impl Cumulative {
    pub(crate) fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut c: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if let Some(last) = c.last_mut() {
            *last = f64::INFINITY;
        }
        Cumulative(c)
    }

    #[inline]
    pub(crate) fn draw(&self, rng: &mut SimRng) -> usize {
        let u: f64 = rng.random();
        self.0.partition_point(|&c| c <= u)
    }
}

#[derive(Debug, Clone)]
pub(crate) enum SamplerKind {
    Finite {
        model: FiniteMarkovModel,
        rows: Vec<Cumulative>,
        initial: Cumulative,
    },
    /// Doubling map on a 64-bit dyadic expansion.
    Doubling,
    Beta {
        beta: f64,
    },
    Gauss,
    IidUniform,
    Subshift(subshift::Compiled),
    Linear(processes::CompiledLinear),
    Ar(processes::CompiledAr),
    Lipschitz(processes::CompiledLipschitz),
}

/// Seeded generator of stationary trajectories.
#[derive(Debug, Clone)]
pub struct StationarySampler {
    kind: SamplerKind,
    burn_in: usize,
    seed: u64,
    diagnostics: SamplerDiagnostics,
}

/// What the constructor measured or assumed about the system.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SamplerDiagnostics {
    pub system: String,
    /// Contraction or mixing rate behind the burn-in policy, when known.
    pub contraction: Option<f64>,
    /// Whether the initial draw is exactly stationary.
    pub exact_start: bool,
    pub burn_in: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_error: Option<f64>,
}

impl StationarySampler {
    fn build(kind: SamplerKind, seed: u64, burn_in: usize, diagnostics: SamplerDiagnostics) -> Self {
        StationarySampler {
            kind,
            burn_in,
            seed,
            diagnostics: SamplerDiagnostics {
                burn_in,
                ..diagnostics
            },
        }
    }

    /// Finite chain started from its exact stationary law.
    pub fn finite(model: &FiniteMarkovModel, seed: u64) -> Result<Self> {
        let nu = model.require_stationary()?;
        let p = model.transition();
        let rows = (0..p.rows()).map(|i| Cumulative::new(p.row(i))).collect();
        Ok(Self::build(
            SamplerKind::Finite {
                model: model.clone(),
                rows,
                initial: Cumulative::new(nu),
            },
            seed,
            0,
            SamplerDiagnostics {
                system: "finite".into(),
                exact_start: true,
                ..Default::default()
            },
        ))
    }

    /// Orbit `x, Tx, T²x, …` of an expanding map started from its invariant
    /// law: uniform for the doubling map, `2^u − 1` for the Gauss map
    /// (inverse CDF of `1/((1+x) ln 2)`), burn-in from uniform for `β`-maps.
    pub fn expanding_map(map: &IntervalMap, seed: u64) -> Result<Self> {
        map.validate()?;
        let (kind, name, rate, burn) = match map {
            IntervalMap::Doubling => (SamplerKind::Doubling, "doubling", 0.5, 0),
            IntervalMap::Gauss => (SamplerKind::Gauss, "gauss", map.contraction_rate().unwrap(), 0),
            IntervalMap::Beta { beta } => {
                let rate = 1.0 / beta;
                (SamplerKind::Beta { beta: *beta }, "beta", rate, burn_in_steps(rate, BURN_IN_TOL)?)
            }
            IntervalMap::PiecewiseLinear { .. } => {
                return Err(Error::InvalidMap(
                    "sampling is provided for the doubling, beta and Gauss maps".into(),
                ))
            }
        };
        Ok(Self::build(
            kind,
            seed,
            burn,
            SamplerDiagnostics {
                system: name.into(),
                contraction: Some(rate),
                exact_start: burn == 0,
                ..Default::default()
            },
        ))
    }

    /// i.i.d. uniform draws on `(0, 1]`.
    pub fn iid_uniform(seed: u64) -> Self {
        Self::build(
            SamplerKind::IidUniform,
            seed,
            0,
            SamplerDiagnostics {
                system: "iid_uniform".into(),
                contraction: Some(0.0),
                exact_start: true,
                ..Default::default()
            },
        )
    }

    pub fn subshift(spec: &SubshiftSpec, seed: u64) -> Result<Self> {
        let compiled = spec.compile()?;
        Ok(Self::build(
            SamplerKind::Subshift(compiled),
            seed,
            0,
            SamplerDiagnostics {
                system: "subshift".into(),
                exact_start: true,
                truncation: Some(spec.depth),
                ..Default::default()
            },
        ))
    }

    pub fn linear_process(spec: &LinearProcessSpec, seed: u64) -> Result<Self> {
        let compiled = spec.compile()?;
        let burn = burn_in_steps(spec.rho, BURN_IN_TOL)?;
        let diag = SamplerDiagnostics {
            system: "linear".into(),
            contraction: Some(spec.rho),
            exact_start: true,
            truncation: Some(compiled.truncation()),
            truncation_error: Some(spec.tail_bound(compiled.truncation())),
            ..Default::default()
        };
        Ok(Self::build(SamplerKind::Linear(compiled), seed, burn, diag))
    }

    pub fn ar_model(spec: &ArSpec, seed: u64) -> Result<Self> {
        let compiled = spec.compile()?;
        let rate = compiled.contraction();
        let burn = burn_in_steps(rate, BURN_IN_TOL)?;
        Ok(Self::build(
            SamplerKind::Ar(compiled),
            seed,
            burn,
            SamplerDiagnostics {
                system: "ar".into(),
                contraction: Some(rate),
                ..Default::default()
            },
        ))
    }

    pub fn random_lipschitz(spec: &LipschitzSpec, seed: u64) -> Result<Self> {
        let compiled = spec.compile()?;
        let rate = compiled.contraction();
        let burn = burn_in_steps(rate, BURN_IN_TOL)?;
        Ok(Self::build(
            SamplerKind::Lipschitz(compiled),
            seed,
            burn,
            SamplerDiagnostics {
                system: "random_lipschitz".into(),
                contraction: Some(rate),
                ..Default::default()
            },
        ))
    }

    /// Overrides the burn-in length.
    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self.diagnostics.burn_in = burn_in;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn diagnostics(&self) -> &SamplerDiagnostics {
        &self.diagnostics
    }

    pub fn state_kind(&self) -> StateKind {
        match &self.kind {
            SamplerKind::Finite { .. } => StateKind::Finite,
            SamplerKind::Doubling
            | SamplerKind::Beta { .. }
            | SamplerKind::Gauss
            | SamplerKind::IidUniform
            | SamplerKind::Linear(_)
            | SamplerKind::Lipschitz(_) => StateKind::Real,
            SamplerKind::Ar(_) => StateKind::Vector,
            SamplerKind::Subshift(_) => StateKind::Word,
        }
    }

    /// The finite model behind a finite sampler.
    pub fn finite_model(&self) -> Option<&FiniteMarkovModel> {
        match &self.kind {
            SamplerKind::Finite { model, .. } => Some(model),
            _ => None,
        }
    }

    /// Stationary probability of `(s, t]` when known exactly: finite chains
    /// (by state position), uniform laws, and the Gauss measure.
    pub fn interval_mass(&self, s: f64, t: f64) -> Option<f64> {
        let clamp = |x: f64| x.clamp(0.0, 1.0);
        match &self.kind {
            SamplerKind::Finite { model, .. } => {
                let nu = model.stationary()?;
                let mut acc = crate::linalg::CompensatedSum::new();
                acc.extend(
                    model
                        .positions()
                        .iter()
                        .zip(nu)
                        .filter(|(x, _)| **x > s && **x <= t)
                        .map(|(_, w)| *w),
                );
                Some(acc.value())
            }
            SamplerKind::IidUniform | SamplerKind::Doubling => Some((clamp(t) - clamp(s)).max(0.0)),
            SamplerKind::Gauss => Some(((1.0 + clamp(t)).log2() - (1.0 + clamp(s)).log2()).max(0.0)),
            _ => None,
        }
    }

    /// Walker for replicate `replicate` of a run seeded with `base_seed`,
    /// already past the burn-in.
    pub fn walker(&self, base_seed: u64, replicate: u64) -> Walker<'_> {
        let mut rng = replicate_rng(base_seed, replicate);
        let state = self.initial_state(&mut rng);
        let mut w = Walker {
            sampler: self,
            rng,
            state,
        };
        for _ in 0..self.burn_in {
            w.step();
        }
        w
    }

    /// Walker on the sampler's own seed.
    pub fn start(&self) -> Walker<'_> {
        self.walker(self.seed, 0)
    }

    /// `f` along `X₀, X₁, …, X_{n−1}` of the sampler's own trajectory.
    pub fn trajectory<F: FnMut(StatePoint<'_>) -> f64>(&self, n: usize, mut f: F) -> Vec<f64> {
        let mut w = self.start();
        let mut out = Vec::with_capacity(n);
        for t in 0..n {
            if t > 0 {
                w.step();
            }
            out.push(f(w.point()));
        }
        out
    }

    fn initial_state(&self, rng: &mut SimRng) -> State {
        match &self.kind {
            SamplerKind::Finite { initial, .. } => State::Finite(initial.draw(rng)),
            SamplerKind::Doubling => State::Dyadic(rng.next_u64()),
            SamplerKind::Beta { .. } => State::Real(rng.random()),
            SamplerKind::Gauss => State::Real(gauss_draw(rng)),
            SamplerKind::IidUniform => State::Real(1.0 - rng.random::<f64>()),
            SamplerKind::Subshift(c) => c.initial(rng),
            SamplerKind::Linear(c) => c.initial(rng),
            SamplerKind::Ar(c) => c.initial(),
            SamplerKind::Lipschitz(c) => State::Real(c.initial()),
        }
    }
}

fn gauss_draw(rng: &mut SimRng) -> f64 {
    loop {
        let u: f64 = rng.random();
        let x = 2f64.powf(u) - 1.0;
        if x > 0.0 {
            return x;
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum State {
    Finite(usize),
    Dyadic(u64),
    Real(f64),
    Vector { x: Vec<f64>, scratch: Vec<f64> },
    Word { buf: Vec<u8>, start: usize },
    Window { xi: Vec<f64>, head: usize, value: f64 },
}

/// One trajectory.
pub struct Walker<'a> {
    sampler: &'a StationarySampler,
    rng: SimRng,
    state: State,
}

const DYADIC_SCALE: f64 = 1.0 / (1u64 << 53) as f64;

impl Walker<'_> {
    #[inline]
    pub fn point(&self) -> StatePoint<'_> {
        match &self.state {
            State::Finite(i) => {
                let position = match &self.sampler.kind {
                    SamplerKind::Finite { model, .. } => model.positions()[*i],
                    _ => *i as f64,
                };
                StatePoint::Finite {
                    index: *i,
                    position,
                }
            }
            State::Dyadic(bits) => StatePoint::Real((bits >> 11) as f64 * DYADIC_SCALE),
            State::Real(x) => StatePoint::Real(*x),
            State::Vector { x, .. } => StatePoint::Vector(x),
            State::Word { buf, start } => match &self.sampler.kind {
                SamplerKind::Subshift(c) => StatePoint::Word(&buf[*start..*start + c.depth()]),
                _ => StatePoint::Word(&buf[*start..]),
            },
            State::Window { value, .. } => StatePoint::Real(*value),
        }
    }

    #[inline]
    pub fn step(&mut self) {
        let rng = &mut self.rng;
        match (&self.sampler.kind, &mut self.state) {
            (SamplerKind::Finite { rows, .. }, State::Finite(i)) => *i = rows[*i].draw(rng),
            (SamplerKind::Doubling, State::Dyadic(bits)) => {
                *bits = (*bits << 1) | (rng.next_u64() >> 63);
            }
            (SamplerKind::Beta { beta }, State::Real(x)) => {
                let y = beta * *x;
                *x = y - y.floor();
            }
            (SamplerKind::Gauss, State::Real(x)) => {
                // a floating-point orbit can land on 0, where the map is undefined
                *x = if *x > 0.0 {
                    let y = 1.0 / *x;
                    y - y.floor()
                } else {
                    0.0
                };
                if *x <= 0.0 {
                    *x = gauss_draw(rng);
                }
            }
            (SamplerKind::IidUniform, State::Real(x)) => *x = 1.0 - rng.random::<f64>(),
            (SamplerKind::Subshift(c), State::Word { buf, start }) => c.step(buf, start, rng),
            (SamplerKind::Linear(c), state) => c.step(state, rng),
            (SamplerKind::Ar(c), State::Vector { x, scratch }) => c.step(x, scratch, rng),
            (SamplerKind::Lipschitz(c), State::Real(x)) => *x = c.step(*x, rng),
            _ => unreachable!("walker state does not match its sampler"),
        }
    }
}

/// Upper bound on the stationary support of `x ↦ a·x + noise` for scalar `|a| < 1`.
pub fn ar_support_bound(a: f64, noise_bound: f64) -> f64 {
    noise_bound / (1.0 - a.abs())
}

pub(crate) fn operator_norm_2(a: &Matrix) -> f64 {
    // largest singular value by power iteration on AᵀA
    let ata = a.transpose().matmul(a);
    let n = a.cols();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let w = ata.mul_vec(&v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = w.iter().map(|x| x / norm).collect();
        if (norm - lambda).abs() <= 1e-15 * norm {
            lambda = norm;
            break;
        }
        lambda = norm;
    }
    lambda.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::doeblin_chain;

    #[test]
    fn burn_in_formula() {
        assert_eq!(burn_in_steps(0.5, 1e-8).unwrap(), 27);
        assert_eq!(burn_in_steps(1.0 / 3.0, 1e-8).unwrap(), 17);
        assert!(burn_in_steps(1.0, 1e-8).is_err());
    }

    #[test]
    fn seed_determinism() {
        let model = doeblin_chain(Matrix::from_rows(&[vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap()).unwrap();
        let s = StationarySampler::finite(&model, 42).unwrap();
        let idx = |p: StatePoint<'_>| match p {
            StatePoint::Finite { index, .. } => index as f64,
            _ => f64::NAN,
        };
        assert_eq!(s.trajectory(1000, idx), s.trajectory(1000, idx));
        let other = s.clone().with_seed(43);
        assert_ne!(s.trajectory(1000, idx), other.trajectory(1000, idx));
    }

    #[test]
    fn doubling_walker_doubles() {
        let s = StationarySampler::expanding_map(&IntervalMap::Doubling, 1).unwrap();
        let xs = s.trajectory(60, |p| match p {
            StatePoint::Real(x) => x,
            _ => f64::NAN,
        });
        for w in xs.windows(2) {
            let expected = IntervalMap::Doubling.apply(w[0]);
            // the refreshed low bit contributes at most 2^-53
            assert!((w[1] - expected).abs() <= 2f64.powi(-52), "{} {}", w[1], expected);
        }
        // the orbit never collapses to zero
        assert!(xs.iter().skip(55).any(|&x| x > 0.0));
    }

    #[test]
    fn beta_must_exceed_one() {
        assert!(StationarySampler::expanding_map(&IntervalMap::Beta { beta: 0.9 }, 0).is_err());
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let a = Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, -0.8]]).unwrap();
        assert!((operator_norm_2(&a) - 0.8).abs() < 1e-12);
    }
}
