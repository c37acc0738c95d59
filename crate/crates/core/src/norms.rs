//! Centering and the `L^r(ν)` norms entering the fourth-moment bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sup_norm, CompensatedSum};
use crate::model::FiniteMarkovModel;
use crate::observable::{check_q, NormKind, Observable, StatePoint};

/// Exact-case centering target.
pub const CENTER_TOL: f64 = 1e-12;

/// Where a profile's numbers came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ProfileSource {
    Exact,
    Quadrature { resolution: usize },
    Declared { note: String },
}

/// Every norm of `φ(X₀)` under `ν` that appears in the bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormProfile {
    pub q: f64,
    /// `‖φ(X₀)⁴‖₁`
    pub phi4_l1: f64,
    /// `‖φ(X₀)³‖_q`
    pub phi3_lq: f64,
    /// `‖φ(X₀)²‖_q`
    pub phi2_lq: f64,
    /// `‖φ(X₀)²‖₁`
    pub phi2_l1: f64,
    /// `‖φ(X₀)‖_q`
    pub phi_lq: f64,
    /// `‖φ‖` in the chosen Banach norm.
    pub banach: f64,
    /// `max{1, sup|φ|}`
    pub m: f64,
    #[serde(flatten)]
    pub source: ProfileSource,
}

impl NormProfile {
    /// Profile from weighted samples `(weight, value)`; weights sum to one.
    fn from_weighted(
        weights: &[f64],
        values: &[f64],
        q: f64,
        banach: f64,
        source: ProfileSource,
    ) -> Result<Self> {
        check_q(q)?;
        let moment = |power: f64| -> f64 {
            let mut acc = CompensatedSum::new();
            acc.extend(
                weights
                    .iter()
                    .zip(values)
                    .map(|(w, v)| w * v.abs().powf(power)),
            );
            acc.value()
        };
        Ok(NormProfile {
            q,
            phi4_l1: moment(4.0),
            phi3_lq: moment(3.0 * q).powf(1.0 / q),
            phi2_lq: moment(2.0 * q).powf(1.0 / q),
            phi2_l1: moment(2.0),
            phi_lq: moment(q).powf(1.0 / q),
            banach,
            m: sup_norm(values).max(1.0),
            source,
        })
    }

    /// A closed-form profile supplied by the caller. `note` records where the
    /// numbers come from and is mandatory.
    #[allow(clippy::too_many_arguments)]
    pub fn declared(
        q: f64,
        phi4_l1: f64,
        phi3_lq: f64,
        phi2_lq: f64,
        phi2_l1: f64,
        phi_lq: f64,
        banach: f64,
        m: f64,
        note: impl Into<String>,
    ) -> Result<Self> {
        check_q(q)?;
        let note = note.into();
        if note.trim().is_empty() {
            return Err(Error::InvalidParameter(
                "declared norm profiles need a provenance note".into(),
            ));
        }
        let fields = [phi4_l1, phi3_lq, phi2_lq, phi2_l1, phi_lq, banach];
        if fields.iter().any(|x| !x.is_finite() || *x < 0.0) || m < 1.0 {
            return Err(Error::InvalidParameter(
                "profile fields must be finite, non-negative, with m >= 1".into(),
            ));
        }
        Ok(NormProfile {
            q,
            phi4_l1,
            phi3_lq,
            phi2_lq,
            phi2_l1,
            phi_lq,
            banach,
            m,
            source: ProfileSource::Declared { note },
        })
    }

    /// `log(‖φ‖ + 1)`, natural logarithm.
    pub fn log_norm(&self) -> f64 {
        self.banach.ln_1p()
    }
}

/// Norm profile of `phi` under the stationary law of `model`.
pub fn norm_profile(phi: &Observable, model: &FiniteMarkovModel, q: f64) -> Result<NormProfile> {
    check_q(q)?;
    let nu = model.require_stationary()?;
    let values = phi.tabulate(model)?;
    NormProfile::from_weighted(nu, &values, q, phi.banach_norm, ProfileSource::Exact)
}

/// Norm profile from equally weighted samples of `φ(X₀)`, e.g. a long
/// stationary trajectory; `note` records how they were drawn.
pub fn norm_profile_empirical(values: &[f64], q: f64, banach: f64, note: String) -> Result<NormProfile> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    let w = vec![1.0 / values.len() as f64; values.len()];
    NormProfile::from_weighted(&w, values, q, banach, ProfileSource::Declared { note })
}

/// Norm profile of a scalar observable under a density on `[0, 1]`, by the
/// composite midpoint rule with `resolution` cells.
pub fn norm_profile_quadrature(
    phi: &Observable,
    density: &dyn Fn(f64) -> f64,
    resolution: usize,
    q: f64,
) -> Result<NormProfile> {
    let (weights, values) = midpoint_nodes(phi, density, resolution)?;
    NormProfile::from_weighted(
        &weights,
        &values,
        q,
        phi.banach_norm,
        ProfileSource::Quadrature { resolution },
    )
}

fn midpoint_nodes(
    phi: &Observable,
    density: &dyn Fn(f64) -> f64,
    resolution: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if resolution == 0 {
        return Err(Error::InvalidParameter("quadrature resolution must be positive".into()));
    }
    phi.check_domain(crate::observable::StateKind::Real)?;
    let h = 1.0 / resolution as f64;
    let mids: Vec<f64> = (0..resolution).map(|i| (i as f64 + 0.5) * h).collect();
    let mut weights: Vec<f64> = mids.iter().map(|&x| density(x) * h).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidParameter("density integrates to zero".into()));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    let values = mids.iter().map(|&x| phi.value(StatePoint::Real(x))).collect();
    Ok((weights, values))
}

/// How the stationary mean is obtained when centering.
pub enum MeanSource<'a> {
    Finite(&'a FiniteMarkovModel),
    /// Midpoint quadrature of a density on `[0, 1]` at `resolution` cells,
    /// declared accurate to `tolerance`.
    Quadrature {
        density: &'a dyn Fn(f64) -> f64,
        resolution: usize,
        tolerance: f64,
    },
    /// Closed-form mean with its declared accuracy.
    Declared { mean: f64, tolerance: f64 },
}

/// Returns `φ − E_ν φ`.
///
/// For finite models the mean is exact and the result satisfies
/// `|E_ν φ| < 1e-12`; an observable already within that bound comes back
/// unchanged. The Banach norm of a sup-normed table is recomputed; declared
/// norms grow by `|E φ|`.
pub fn center(phi: &Observable, source: MeanSource<'_>) -> Result<Observable> {
    match source {
        MeanSource::Finite(model) => {
            let nu = model.require_stationary()?;
            let mut out = phi.clone();
            let mut shift_total = 0.0;
            // A second pass absorbs the rounding left by the first.
            for _ in 0..3 {
                let values = out.tabulate(model)?;
                let mean = weighted_mean(nu, &values);
                if mean.abs() < CENTER_TOL {
                    break;
                }
                out.offset += mean;
                shift_total += mean;
            }
            let values = out.tabulate(model)?;
            let mean = weighted_mean(nu, &values);
            if mean.abs() >= CENTER_TOL {
                return Err(Error::NotCentered { mean });
            }
            if shift_total != 0.0 {
                update_norm_metadata(&mut out, shift_total, Some(&values));
            }
            Ok(out)
        }
        MeanSource::Quadrature {
            density,
            resolution,
            tolerance,
        } => {
            let (weights, values) = midpoint_nodes(phi, density, resolution)?;
            let mean = weighted_mean(&weights, &values);
            let mut out = phi.clone();
            out.offset += mean;
            out.centering_tolerance = tolerance;
            update_norm_metadata(&mut out, mean, None);
            Ok(out)
        }
        MeanSource::Declared { mean, tolerance } => {
            let mut out = phi.clone();
            out.offset += mean;
            out.centering_tolerance = tolerance;
            update_norm_metadata(&mut out, mean, None);
            Ok(out)
        }
    }
}

fn update_norm_metadata(out: &mut Observable, shift: f64, exact_values: Option<&[f64]>) {
    match (out.norm_kind, exact_values) {
        (NormKind::Sup, Some(values)) => {
            let sup = sup_norm(values);
            out.banach_norm = sup;
            out.sup_bound = Some(sup);
        }
        _ => {
            out.banach_norm += shift.abs();
            out.sup_bound = out.sup_bound.map(|b| b + shift.abs());
        }
    }
}

fn weighted_mean(weights: &[f64], values: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(weights.iter().zip(values).map(|(w, v)| w * v));
    acc.value()
}

/// Smallest integer `n₀` with `log(‖φ‖+1)/(−log θ) < n₀`. Guarantees
/// `θ^{n₀}‖φ‖ ≤ 1`.
pub fn gap_threshold(theta: f64, banach: f64) -> Result<u64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!("theta {theta} outside (0,1)")));
    }
    let x = banach.ln_1p() / -theta.ln();
    Ok(x.floor() as u64 + 1)
}
