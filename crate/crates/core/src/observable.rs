//! Observables `φ` together with the norm metadata the moment bounds consume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FiniteMarkovModel;

/// A state as seen by an observable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatePoint<'a> {
    /// Finite chain: state index and its position on the line.
    Finite { index: usize, position: f64 },
    Real(f64),
    Vector(&'a [f64]),
    /// One-sided symbolic sequence, truncated at the sampler depth.
    Word(&'a [u8]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Finite,
    Real,
    Vector,
    Word,
}

impl StateKind {
    pub fn name(self) -> &'static str {
        match self {
            StateKind::Finite => "finite",
            StateKind::Real => "real",
            StateKind::Vector => "vector",
            StateKind::Word => "word",
        }
    }
}

/// Which Banach norm `banach_norm` refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NormKind {
    #[default]
    Sup,
    Lipschitz,
    Bv,
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormKind::Sup => "SUP",
            NormKind::Lipschitz => "LIPSCHITZ",
            NormKind::Bv => "BV",
        })
    }
}

/// Closed-form evaluation maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Formula {
    /// Continuous approximation of `𝟙_(s,t]`: ramps up on `[s, s+eps]`,
    /// equals one on `[s+eps, t]`, ramps down on `[t, t+eps]`.
    Hat { s: f64, t: f64, eps: f64 },
    /// `𝟙_(s,t]`.
    Indicator { s: f64, t: f64 },
    Identity,
    /// `i`-th coordinate of a vector state.
    Coordinate { index: usize },
    /// `Σ w_k x_k` over a vector or word state.
    Linear { weights: Vec<f64> },
    /// `Σ_k ratio^k x_k` over a word state.
    GeometricWord { ratio: f64 },
}

impl Formula {
    fn supports(&self, kind: StateKind) -> bool {
        match self {
            Formula::Hat { .. } | Formula::Indicator { .. } | Formula::Identity => {
                matches!(kind, StateKind::Finite | StateKind::Real)
            }
            Formula::Coordinate { index } => {
                kind == StateKind::Vector || (kind == StateKind::Real && *index == 0)
            }
            Formula::Linear { .. } => matches!(kind, StateKind::Vector | StateKind::Word),
            Formula::GeometricWord { .. } => kind == StateKind::Word,
        }
    }

    fn eval(&self, p: StatePoint<'_>) -> f64 {
        let scalar = match p {
            StatePoint::Finite { position, .. } => Some(position),
            StatePoint::Real(x) => Some(x),
            _ => None,
        };
        match (self, p) {
            (Formula::Hat { s, t, eps }, _) => scalar.map_or(f64::NAN, |x| hat(x, *s, *t, *eps)),
            (Formula::Indicator { s, t }, _) => {
                scalar.map_or(f64::NAN, |x| if *s < x && x <= *t { 1.0 } else { 0.0 })
            }
            (Formula::Identity, _) => scalar.unwrap_or(f64::NAN),
            (Formula::Coordinate { index }, StatePoint::Vector(v)) => {
                v.get(*index).copied().unwrap_or(f64::NAN)
            }
            (Formula::Coordinate { index: 0 }, StatePoint::Real(x)) => x,
            (Formula::Linear { weights }, StatePoint::Vector(v)) => {
                weights.iter().zip(v).map(|(w, x)| w * x).sum()
            }
            (Formula::Linear { weights }, StatePoint::Word(w)) => {
                weights.iter().zip(w).map(|(a, &x)| a * f64::from(x)).sum()
            }
            (Formula::GeometricWord { ratio }, StatePoint::Word(w)) => {
                let mut acc = 0.0;
                let mut r = 1.0;
                for &x in w {
                    acc += r * f64::from(x);
                    r *= ratio;
                }
                acc
            }
            _ => f64::NAN,
        }
    }

    fn label(&self) -> String {
        match self {
            Formula::Hat { s, t, eps } => format!("hat({s},{t}];eps={eps}"),
            Formula::Indicator { s, t } => format!("indicator({s},{t}]"),
            Formula::Identity => "identity".into(),
            Formula::Coordinate { index } => format!("coordinate[{index}]"),
            Formula::Linear { .. } => "linear".into(),
            Formula::GeometricWord { ratio } => format!("geometric_word({ratio})"),
        }
    }
}

fn hat(x: f64, s: f64, t: f64, eps: f64) -> f64 {
    if x <= s || x >= t + eps {
        0.0
    } else if x < s + eps {
        (x - s) / eps
    } else if x <= t {
        1.0
    } else {
        1.0 - (x - t) / eps
    }
}

/// How raw values are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Evaluation {
    /// One value per finite state; on word states, applied to the first symbol.
    Table { values: Vec<f64> },
    Formula(Formula),
}

/// `φ = scale · raw − offset`, plus declared norm metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    #[serde(flatten)]
    pub eval: Evaluation,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
    /// Hölder exponent conjugate to the embedding exponent `p`.
    #[serde(default = "two")]
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_bound: Option<f64>,
    pub banach_norm: f64,
    #[serde(default)]
    pub norm_kind: NormKind,
    /// Declared accuracy of the centering constant when it was not exact.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub centering_tolerance: f64,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

pub(crate) fn check_q(q: f64) -> Result<()> {
    if !(q.is_finite() && q >= 1.0) {
        return Err(Error::InvalidExponent(q));
    }
    Ok(())
}

impl Observable {
    /// Finite-state table with the sup norm as Banach norm.
    pub fn table(values: Vec<f64>) -> Self {
        let sup = crate::linalg::sup_norm(&values);
        Observable {
            eval: Evaluation::Table { values },
            scale: 1.0,
            offset: 0.0,
            q: 2.0,
            sup_bound: Some(sup),
            banach_norm: sup,
            norm_kind: NormKind::Sup,
            centering_tolerance: 0.0,
        }
    }

    /// Hat approximation of `𝟙_(s,t]` with ramp width `eps`; Lipschitz norm
    /// `sup + Lip = 1 + 1/eps`.
    pub fn hat(s: f64, t: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && t - s >= eps) {
            return Err(Error::InvalidObservable(format!(
                "hat needs 0 < eps <= t - s, got s={s}, t={t}, eps={eps}"
            )));
        }
        Ok(Self::formula(
            Formula::Hat { s, t, eps },
            NormKind::Lipschitz,
            1.0 + 1.0 / eps,
            Some(1.0),
        ))
    }

    /// `𝟙_(s,t]` with its BV norm `sup + variation = 3`.
    pub fn indicator(s: f64, t: f64) -> Self {
        Self::formula(Formula::Indicator { s, t }, NormKind::Bv, 3.0, Some(1.0))
    }

    pub fn formula(
        formula: Formula,
        norm_kind: NormKind,
        banach_norm: f64,
        sup_bound: Option<f64>,
    ) -> Self {
        Observable {
            eval: Evaluation::Formula(formula),
            scale: 1.0,
            offset: 0.0,
            q: 2.0,
            sup_bound,
            banach_norm,
            norm_kind,
            centering_tolerance: 0.0,
        }
    }

    pub fn with_q(mut self, q: f64) -> Result<Self> {
        check_q(q)?;
        self.q = q;
        Ok(self)
    }

    pub fn label(&self) -> String {
        match &self.eval {
            Evaluation::Table { values } => format!("table[{}]", values.len()),
            Evaluation::Formula(f) => f.label(),
        }
    }

    pub fn supports(&self, kind: StateKind) -> bool {
        match &self.eval {
            Evaluation::Table { .. } => matches!(kind, StateKind::Finite | StateKind::Word),
            Evaluation::Formula(f) => f.supports(kind),
        }
    }

    pub fn check_domain(&self, kind: StateKind) -> Result<()> {
        if self.supports(kind) {
            Ok(())
        } else {
            Err(Error::DomainMismatch {
                observable: self.label(),
                state_kind: kind.name(),
            })
        }
    }

    /// `φ(x)`. Returns NaN on a state kind the observable does not support;
    /// callers check [`Observable::check_domain`] once up front.
    #[inline]
    pub fn value(&self, p: StatePoint<'_>) -> f64 {
        let raw = match (&self.eval, p) {
            (Evaluation::Table { values }, StatePoint::Finite { index, .. }) => {
                values.get(index).copied().unwrap_or(f64::NAN)
            }
            (Evaluation::Table { values }, StatePoint::Word(w)) => w
                .first()
                .and_then(|&x| values.get(usize::from(x)))
                .copied()
                .unwrap_or(f64::NAN),
            (Evaluation::Table { .. }, _) => f64::NAN,
            (Evaluation::Formula(f), p) => f.eval(p),
        };
        self.scale * raw - self.offset
    }

    /// Values on every state of a finite model.
    pub fn tabulate(&self, model: &FiniteMarkovModel) -> Result<Vec<f64>> {
        self.check_domain(StateKind::Finite)?;
        if let Evaluation::Table { values } = &self.eval {
            if values.len() != model.len() {
                return Err(Error::Dimension(format!(
                    "observable has {} values for {} states",
                    values.len(),
                    model.len()
                )));
            }
        }
        Ok(model
            .positions()
            .iter()
            .enumerate()
            .map(|(index, &position)| self.value(StatePoint::Finite { index, position }))
            .collect())
    }

    /// `c·φ`, with norm metadata scaled by `|c|`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale *= c;
        out.offset *= c;
        out.banach_norm *= c.abs();
        out.sup_bound = out.sup_bound.map(|b| b * c.abs());
        out.centering_tolerance *= c.abs();
        out
    }

    /// Checks the declared bounds against the values on `probe` states.
    pub fn validate_on(&self, probe: &[f64]) -> Result<()> {
        check_q(self.q)?;
        let sup = crate::linalg::sup_norm(probe);
        if probe.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidObservable("non-finite value on a probed state".into()));
        }
        let slack = 1e-12 * sup.max(1.0);
        if let Some(b) = self.sup_bound {
            if sup > b + slack {
                return Err(Error::InvalidObservable(format!(
                    "sup |φ| = {sup} exceeds declared bound {b}"
                )));
            }
        }
        if self.banach_norm + slack < sup {
            return Err(Error::InvalidObservable(format!(
                "Banach norm {} below sup |φ| = {sup}",
                self.banach_norm
            )));
        }
        Ok(())
    }
}
