//! Ulam discretisation: the transfer operator of an interval map projected
//! onto functions constant on `k` equal cells.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::FiniteMarkovModel;

/// Affine piece mapping `[start, end]` onto the segment from `image_start`
/// to `image_end` (decreasing when `image_start > image_end`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearBranch {
    pub start: f64,
    pub end: f64,
    pub image_start: f64,
    pub image_end: f64,
}

impl LinearBranch {
    fn slope(&self) -> f64 {
        (self.image_end - self.image_start) / (self.end - self.start)
    }

    fn apply(&self, x: f64) -> f64 {
        self.image_start + self.slope() * (x - self.start)
    }
}

/// Piecewise monotone self-maps of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntervalMap {
    /// `x ↦ 2x mod 1`
    Doubling,
    /// `x ↦ βx mod 1`, `β > 1`
    Beta { beta: f64 },
    /// `x ↦ 1/x mod 1`
    Gauss,
    PiecewiseLinear { branches: Vec<LinearBranch> },
}

impl IntervalMap {
    pub fn validate(&self) -> Result<()> {
        match self {
            IntervalMap::Beta { beta } if !(*beta > 1.0 && beta.is_finite()) => {
                Err(Error::InvalidMap(format!("beta must exceed 1, got {beta}")))
            }
            IntervalMap::PiecewiseLinear { branches } => check_branches(branches),
            _ => Ok(()),
        }
    }

    /// `T(x)` for `x ∈ [0, 1)`.
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            IntervalMap::Doubling => frac(2.0 * x),
            IntervalMap::Beta { beta } => frac(beta * x),
            IntervalMap::Gauss => {
                if x <= 0.0 {
                    0.0
                } else {
                    frac(1.0 / x)
                }
            }
            IntervalMap::PiecewiseLinear { branches } => branches
                .iter()
                .find(|b| x >= b.start && x < b.end)
                .or(branches.last())
                .map_or(f64::NAN, |b| b.apply(x)),
        }
    }

    /// Affine branches, when the map is piecewise linear.
    pub fn linear_branches(&self) -> Option<Vec<LinearBranch>> {
        match self {
            IntervalMap::Doubling => Some(beta_branches(2.0)),
            IntervalMap::Beta { beta } => Some(beta_branches(*beta)),
            IntervalMap::Gauss => None,
            IntervalMap::PiecewiseLinear { branches } => Some(branches.clone()),
        }
    }

    /// Asymptotic contraction of the transfer operator on BV, `1/inf|T'|`,
    /// when known.
    pub fn contraction_rate(&self) -> Option<f64> {
        match self {
            IntervalMap::Doubling => Some(0.5),
            IntervalMap::Beta { beta } => Some(1.0 / beta),
            // modulus of the Gauss–Kuzmin–Wirsing eigenvalue
            IntervalMap::Gauss => Some(0.303_663_002_898_732_7),
            IntervalMap::PiecewiseLinear { branches } => branches
                .iter()
                .map(|b| 1.0 / b.slope().abs())
                .reduce(f64::max),
        }
    }
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

fn beta_branches(beta: f64) -> Vec<LinearBranch> {
    let pieces = beta.ceil() as usize;
    (0..pieces)
        .filter_map(|m| {
            let start = m as f64 / beta;
            let end = ((m + 1) as f64 / beta).min(1.0);
            (end > start).then_some(LinearBranch {
                start,
                end,
                image_start: 0.0,
                image_end: beta * end - m as f64,
            })
        })
        .collect()
}

fn check_branches(branches: &[LinearBranch]) -> Result<()> {
    let first = branches
        .first()
        .ok_or_else(|| Error::InvalidMap("no branches".into()))?;
    if first.start != 0.0 {
        return Err(Error::InvalidMap("branches must start at 0".into()));
    }
    for w in branches.windows(2) {
        if (w[0].end - w[1].start).abs() > 1e-15 {
            return Err(Error::InvalidMap(format!(
                "branches leave a gap or overlap at {}",
                w[0].end
            )));
        }
    }
    if (branches.last().unwrap().end - 1.0).abs() > 1e-15 {
        return Err(Error::InvalidMap("branches must end at 1".into()));
    }
    for b in branches {
        if !(b.end > b.start) {
            return Err(Error::InvalidMap(format!("degenerate branch at {}", b.start)));
        }
        let lo = b.image_start.min(b.image_end);
        let hi = b.image_start.max(b.image_end);
        if lo < 0.0 || hi > 1.0 || hi == lo {
            return Err(Error::InvalidMap(format!(
                "branch image [{lo}, {hi}] not a non-degenerate subset of [0, 1]"
            )));
        }
    }
    Ok(())
}

/// An Ulam chain and how its entries were obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlamChain {
    pub map: IntervalMap,
    pub cells: usize,
    /// Stratified sample count per cell for non-linear maps; `None` when the
    /// matrix is exact.
    pub samples_per_cell: Option<usize>,
    pub model: FiniteMarkovModel,
}

/// Default stratified sample count per cell for non-linear maps.
pub const DEFAULT_SAMPLES_PER_CELL: usize = 4096;

/// Builds `U(i, j) = Leb(cellᵢ ∩ T⁻¹cellⱼ) / Leb(cellᵢ)` on `cells` equal
/// cells of `[0, 1]`, with the stationary vector attached. Piecewise-linear
/// maps are handled exactly by interval intersection; others by stratified
/// midpoint sampling.
pub fn ulam(map: &IntervalMap, cells: usize) -> Result<UlamChain> {
    map.validate()?;
    if cells < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 cells, got {cells}")));
    }
    let h = 1.0 / cells as f64;
    let edge = |i: usize| i as f64 * h;
    let mut u = Matrix::zeros(cells, cells);
    let samples_per_cell = match map.linear_branches() {
        Some(branches) => {
            for i in 0..cells {
                let (a, b) = (edge(i), edge(i + 1));
                for br in &branches {
                    let lo = a.max(br.start);
                    let hi = b.min(br.end);
                    if hi <= lo {
                        continue;
                    }
                    let slope = br.slope().abs();
                    let (y0, y1) = {
                        let (p, q) = (br.apply(lo), br.apply(hi));
                        (p.min(q), p.max(q))
                    };
                    let j0 = ((y0 / h).floor() as usize).min(cells - 1);
                    let j1 = ((y1 / h).ceil() as usize).min(cells);
                    for j in j0..j1 {
                        let overlap = y1.min(edge(j + 1)) - y0.max(edge(j));
                        if overlap > 0.0 {
                            u[(i, j)] += overlap / slope / h;
                        }
                    }
                }
            }
            None
        }
        None => {
            let n = DEFAULT_SAMPLES_PER_CELL;
            for i in 0..cells {
                for s in 0..n {
                    let x = edge(i) + (s as f64 + 0.5) / n as f64 * h;
                    let y = map.apply(x);
                    let j = ((y / h).floor() as usize).min(cells - 1);
                    u[(i, j)] += 1.0 / n as f64;
                }
            }
            Some(n)
        }
    };
    // absorb rounding so each row is a probability vector
    for i in 0..cells {
        let s: f64 = u.row(i).iter().sum();
        if !(s > 0.0) {
            return Err(Error::InvalidMap(format!("cell {i} has no image")));
        }
        for j in 0..cells {
            u[(i, j)] /= s;
        }
    }
    let nu = super::stationary(&u)?;
    let states = (0..cells).map(|i| i.to_string()).collect();
    let mids = (0..cells).map(|i| (i as f64 + 0.5) * h).collect();
    let model = FiniteMarkovModel::with_positions(states, u, Some(nu), mids)?;
    Ok(UlamChain {
        map: map.clone(),
        cells,
        samples_per_cell,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::subdominant_radius;

    #[test]
    fn doubling_map_pointwise() {
        assert!((IntervalMap::Doubling.apply(0.3) - 0.6).abs() < 1e-15);
        assert!((IntervalMap::Doubling.apply(0.7) - 0.4).abs() < 1e-15);
        assert!((IntervalMap::Gauss.apply(0.4) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn beta_must_exceed_one() {
        assert!(IntervalMap::Beta { beta: 1.0 }.validate().is_err());
        assert!(ulam(&IntervalMap::Beta { beta: 0.5 }, 8).is_err());
    }

    #[test]
    fn doubling_rows_have_two_halves() {
        let chain = ulam(&IntervalMap::Doubling, 4).unwrap();
        let u = chain.model.transition();
        for i in 0..4 {
            let row = u.row(i);
            let halves: Vec<usize> = (0..4).filter(|&j| row[j] == 0.5).collect();
            assert_eq!(halves, vec![(2 * i) % 4, (2 * i + 1) % 4]);
            assert_eq!(row.iter().filter(|&&x| x != 0.0).count(), 2);
        }
        assert_eq!(chain.samples_per_cell, None);
    }

    #[test]
    fn dyadic_doubling_is_uniform_and_nilpotent() {
        for k in [2usize, 8, 16, 64] {
            let chain = ulam(&IntervalMap::Doubling, k).unwrap();
            let nu = chain.model.stationary().unwrap();
            assert!(nu.iter().all(|x| (x - 1.0 / k as f64).abs() < 1e-12));
            assert_eq!(subdominant_radius(chain.model.transition(), nu), 0.0);
        }
    }

    #[test]
    fn gauss_map_uses_sampling() {
        let chain = ulam(&IntervalMap::Gauss, 32).unwrap();
        assert_eq!(chain.samples_per_cell, Some(DEFAULT_SAMPLES_PER_CELL));
        // Gauss density 1/((1+x) ln 2) on the first cell vs last cell
        let nu = chain.model.stationary().unwrap();
        let ratio = nu[0] / nu[31];
        assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn piecewise_linear_validation() {
        let gap = IntervalMap::PiecewiseLinear {
            branches: vec![LinearBranch { start: 0.0, end: 0.4, image_start: 0.0, image_end: 1.0 }],
        };
        assert!(gap.validate().is_err());
        let tent = IntervalMap::PiecewiseLinear {
            branches: vec![
                LinearBranch { start: 0.0, end: 0.5, image_start: 0.0, image_end: 1.0 },
                LinearBranch { start: 0.5, end: 1.0, image_start: 1.0, image_end: 0.0 },
            ],
        };
        let chain = ulam(&tent, 16).unwrap();
        let nu = chain.model.stationary().unwrap();
        assert!(nu.iter().all(|x| (x - 1.0 / 16.0).abs() < 1e-12));
    }
}
