//! Finite-state Markov chains, the exactly solvable backbone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Row sums must equal one within this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Bound on `‖νᵀP − νᵀ‖₁` for an attached stationary vector.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

/// A finite homogeneous Markov chain: labelled states, a row-stochastic
/// transition matrix and (optionally) its stationary law.
///
/// States may carry a position on the real line. Observables defined by a
/// formula (hat functions, indicators, the identity) are evaluated there;
/// Ulam chains use cell midpoints, other models parse numeric labels and
/// fall back to the state index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct FiniteMarkovModel {
    states: Vec<String>,
    p: Matrix,
    nu: Option<Vec<f64>>,
    positions: Vec<f64>,
}

impl FiniteMarkovModel {
    pub fn new(states: Vec<String>, p: Matrix, nu: Option<Vec<f64>>) -> Result<Self> {
        let positions = default_positions(&states);
        Self::with_positions(states, p, nu, positions)
    }

    pub fn with_positions(
        states: Vec<String>,
        p: Matrix,
        nu: Option<Vec<f64>>,
        positions: Vec<f64>,
    ) -> Result<Self> {
        check_stochastic(&p)?;
        if states.len() != p.rows() {
            return Err(Error::Dimension(format!(
                "{} state labels for a {}x{} matrix",
                states.len(),
                p.rows(),
                p.cols()
            )));
        }
        if positions.len() != states.len() {
            return Err(Error::Dimension("one position per state required".into()));
        }
        if let Some(nu) = &nu {
            check_stationary(&p, nu)?;
        }
        Ok(FiniteMarkovModel {
            states,
            p,
            nu,
            positions,
        })
    }

    /// Model with states labelled `0..n`.
    pub fn from_matrix(p: Matrix) -> Result<Self> {
        let states = (0..p.rows()).map(|i| i.to_string()).collect();
        Self::new(states, p, None)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn transition(&self) -> &Matrix {
        &self.p
    }

    pub fn stationary(&self) -> Option<&[f64]> {
        self.nu.as_deref()
    }

    pub fn require_stationary(&self) -> Result<&[f64]> {
        self.stationary().ok_or(Error::NoMeasure)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Attaches `nu` after checking it against the stationarity tolerance.
    pub fn with_stationary(mut self, nu: Vec<f64>) -> Result<Self> {
        check_stationary(&self.p, &nu)?;
        self.nu = Some(nu);
        Ok(self)
    }

    /// `E_ν(f)`.
    pub fn expectation(&self, f: &[f64]) -> Result<f64> {
        let nu = self.require_stationary()?;
        Ok(crate::linalg::dot(nu, f))
    }
}

fn default_positions(states: &[String]) -> Vec<f64> {
    states
        .iter()
        .enumerate()
        .map(|(i, s)| s.trim().parse::<f64>().unwrap_or(i as f64))
        .collect()
}

pub(crate) fn check_stochastic(p: &Matrix) -> Result<()> {
    if !p.is_square() || p.rows() == 0 {
        return Err(Error::Dimension(format!(
            "transition matrix must be square and non-empty, got {}x{}",
            p.rows(),
            p.cols()
        )));
    }
    for i in 0..p.rows() {
        let row = p.row(i);
        if let Some(x) = row.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::NotStochastic {
                row: i,
                reason: format!("entry {x} is negative or not finite"),
            });
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::NotStochastic {
                row: i,
                reason: format!("row sums to {s}"),
            });
        }
    }
    Ok(())
}

pub(crate) fn stationary_residual(p: &Matrix, nu: &[f64]) -> f64 {
    p.vec_mul(nu)
        .iter()
        .zip(nu)
        .map(|(a, b)| (a - b).abs())
        .sum()
}

fn check_stationary(p: &Matrix, nu: &[f64]) -> Result<()> {
    if nu.len() != p.rows() {
        return Err(Error::InvalidStationary(format!(
            "length {} for {} states",
            nu.len(),
            p.rows()
        )));
    }
    if nu.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidStationary("negative entry".into()));
    }
    let total: f64 = nu.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidStationary(format!("sums to {total}")));
    }
    let r = stationary_residual(p, nu);
    if r >= STATIONARY_RESIDUAL_TOL {
        return Err(Error::InvalidStationary(format!(
            "residual ‖νᵀP − νᵀ‖₁ = {r:e}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Label {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<Label> for String {
    fn from(l: Label) -> String {
        match l {
            Label::Int(i) => i.to_string(),
            Label::Float(x) => x.to_string(),
            Label::Text(s) => s,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawModel {
    #[serde(default)]
    states: Option<Vec<Label>>,
    #[serde(rename = "P")]
    p: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positions: Option<Vec<f64>>,
}

impl TryFrom<RawModel> for FiniteMarkovModel {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        let states: Vec<String> = match raw.states {
            Some(labels) => labels.into_iter().map(String::from).collect(),
            None => (0..raw.p.rows()).map(|i| i.to_string()).collect(),
        };
        let positions = raw.positions.unwrap_or_else(|| default_positions(&states));
        FiniteMarkovModel::with_positions(states, raw.p, raw.nu, positions)
    }
}

impl From<FiniteMarkovModel> for RawModel {
    fn from(m: FiniteMarkovModel) -> Self {
        let defaults = default_positions(&m.states);
        RawModel {
            positions: (m.positions != defaults).then_some(m.positions),
            states: Some(m.states.into_iter().map(Label::Text).collect()),
            p: m.p,
            nu: m.nu,
        }
    }
}
