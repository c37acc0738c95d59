use serde::{Deserialize, Serialize};

use super::{ArSpec, LinearProcessSpec, LipschitzSpec, StationarySampler, SubshiftSpec};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::model::FiniteMarkovModel;
use crate::spectral::{self, ulam, IntervalMap};

/// One system from the example zoo, as read from a JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemSpec {
    /// Finite chain; `nu` is solved for when absent.
    Finite {
        #[serde(rename = "P")]
        p: Matrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        states: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        positions: Option<Vec<f64>>,
    },
    Ulam {
        map: IntervalMap,
        cells: usize,
    },
    IidUniform,
    Doubling,
    Beta {
        beta: f64,
    },
    Gauss,
    Subshift(SubshiftSpec),
    Linear(LinearProcessSpec),
    Ar(ArSpec),
    RandomLipschitz(LipschitzSpec),
}

/// A system plus the seed and burn-in of its sampler. `burn_in` is a step
/// count; `null`, `"auto"` or absence selects the automatic policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    #[serde(flatten)]
    pub system: SystemSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, deserialize_with = "burn_in_policy")]
    pub burn_in: Option<usize>,
}

fn burn_in_policy<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Policy {
        Steps(usize),
        Named(String),
    }
    match Option::<Policy>::deserialize(d)? {
        None => Ok(None),
        Some(Policy::Steps(b)) => Ok(Some(b)),
        Some(Policy::Named(s)) if s == "auto" => Ok(None),
        Some(Policy::Named(s)) => Err(serde::de::Error::custom(format!(
            "burn_in must be a step count or \"auto\", got \"{s}\""
        ))),
    }
}

/// A built system: its sampler, and the exact finite model or interval map
/// behind it when there is one.
#[derive(Debug, Clone)]
pub struct System {
    pub sampler: StationarySampler,
    pub model: Option<FiniteMarkovModel>,
    pub map: Option<IntervalMap>,
}

impl System {
    /// Invariant density on `[0, 1]` when it is known in closed form.
    pub fn density(&self) -> Option<fn(f64) -> f64> {
        match (&self.map, self.model.is_some()) {
            (Some(IntervalMap::Doubling), false) => Some(|_| 1.0),
            (Some(IntervalMap::Gauss), false) => Some(|x| 1.0 / ((1.0 + x) * std::f64::consts::LN_2)),
            _ => match self.sampler.diagnostics().system.as_str() {
                "iid_uniform" => Some(|_| 1.0),
                _ => None,
            },
        }
    }
}

impl SystemConfig {
    pub fn new(system: SystemSpec, seed: u64) -> Self {
        SystemConfig {
            system,
            seed,
            burn_in: None,
        }
    }

    pub fn build(&self) -> Result<System> {
        let seed = self.seed;
        let (sampler, model, map) = match &self.system {
            SystemSpec::Finite { p, states, positions } => {
                let nu = spectral::stationary(p)?;
                let states = states
                    .clone()
                    .unwrap_or_else(|| (0..p.rows()).map(|i| i.to_string()).collect());
                let model = match positions {
                    Some(pos) => FiniteMarkovModel::with_positions(states, p.clone(), Some(nu), pos.clone())?,
                    None => FiniteMarkovModel::new(states, p.clone(), Some(nu))?,
                };
                (StationarySampler::finite(&model, seed)?, Some(model), None)
            }
            SystemSpec::Ulam { map, cells } => {
                let chain = ulam(map, *cells)?;
                (
                    StationarySampler::finite(&chain.model, seed)?,
                    Some(chain.model),
                    Some(map.clone()),
                )
            }
            SystemSpec::IidUniform => (StationarySampler::iid_uniform(seed), None, None),
            SystemSpec::Doubling => expanding(IntervalMap::Doubling, seed)?,
            SystemSpec::Beta { beta } => expanding(IntervalMap::Beta { beta: *beta }, seed)?,
            SystemSpec::Gauss => expanding(IntervalMap::Gauss, seed)?,
            SystemSpec::Subshift(s) => (StationarySampler::subshift(s, seed)?, None, None),
            SystemSpec::Linear(s) => (StationarySampler::linear_process(s, seed)?, None, None),
            SystemSpec::Ar(s) => (StationarySampler::ar_model(s, seed)?, None, None),
            SystemSpec::RandomLipschitz(s) => (StationarySampler::random_lipschitz(s, seed)?, None, None),
        };
        let sampler = match self.burn_in {
            Some(b) => sampler.with_burn_in(b),
            None => sampler,
        };
        Ok(System { sampler, model, map })
    }
}

fn expanding(map: IntervalMap, seed: u64) -> Result<(StationarySampler, Option<FiniteMarkovModel>, Option<IntervalMap>)> {
    Ok((StationarySampler::expanding_map(&map, seed)?, None, Some(map)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observable::StateKind;

    #[test]
    fn parses_tagged_configs() {
        let cfg: SystemConfig = serde_json::from_str(
            r#"{"kind": "ar", "A": 0.5, "noise": {"kind": "uniform", "low": -1, "high": 1}, "seed": 42}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 42);
        let sys = cfg.build().unwrap();
        assert_eq!(sys.sampler.state_kind(), StateKind::Vector);
        assert_eq!(sys.sampler.burn_in(), 27);

        let cfg: SystemConfig =
            serde_json::from_str(r#"{"kind": "ulam", "map": {"kind": "doubling"}, "cells": 16, "burn_in": 3}"#).unwrap();
        let sys = cfg.build().unwrap();
        assert_eq!(sys.model.as_ref().unwrap().len(), 16);
        assert_eq!(sys.sampler.burn_in(), 3);
        let auto: SystemConfig =
            serde_json::from_str(r#"{"kind": "ar", "A": 0.5, "noise": {"kind": "uniform", "low": -1, "high": 1}, "seed": 42, "burn_in": "auto"}"#)
                .unwrap();
        assert_eq!((auto.seed, auto.burn_in), (42, None));
        assert!(serde_json::from_str::<SystemConfig>(r#"{"kind": "gauss", "burn_in": "soon"}"#).is_err());

        let cfg: SystemConfig = serde_json::from_str(r#"{"kind": "finite", "P": [[0.9, 0.1], [0.5, 0.5]]}"#).unwrap();
        let sys = cfg.build().unwrap();
        let nu = sys.model.unwrap().stationary().unwrap().to_vec();
        assert!((nu[0] - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn densities() {
        let sys = SystemConfig::new(SystemSpec::Gauss, 0).build().unwrap();
        let d = sys.density().unwrap();
        assert!((d(0.0) / d(1.0) - 2.0).abs() < 1e-15);
        assert!(SystemConfig::new(SystemSpec::Beta { beta: 1.5 }, 0).build().unwrap().density().is_none());
    }

    #[test]
    fn round_trip() {
        let cfg = SystemConfig::new(SystemSpec::Subshift(SubshiftSpec::bernoulli(&[0.5, 0.5]).unwrap()), 7);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: SystemConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
