//! The fourth-moment bounds evaluated against exact or simulated moments,
//! the per-term inequality ledger, and CLT and tightness diagnostics.

mod clt;
mod ledger;
mod tightness;

pub use clt::{clt_check, ks_normal_distance, CltDiagnostics};
pub use ledger::{proof_ledger, Aggregate, CaseTag, LedgerEntry, LedgerReport, SLACK_TOL};
pub use tightness::{binomial_fourth_central, empirical_tightness, TightnessReport, TightnessRow};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::montecarlo::estimate_s4;
use crate::norms::NormProfile;
use crate::observable::Observable;
use crate::oracle::MomentOracle;
use crate::systems::StationarySampler;

/// The three bracketed summands of the main bound at horizon `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundTerms {
    /// `n‖φ⁴‖₁ log³(‖φ‖+1)`
    pub term1: f64,
    /// `n(‖φ³‖_q + ‖φ²‖_q + ‖φ‖_q + ‖φ‖_q²) log²(‖φ‖+1)`
    pub term2: f64,
    /// `n²(‖φ²‖₁ log(‖φ‖+1) + ‖φ‖_q)²`
    pub term3: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.term1 + self.term2 + self.term3
    }
}

pub fn rhs_theorem1(profile: &NormProfile, n: usize) -> BoundTerms {
    let n = n as f64;
    let l = profile.log_norm();
    let second = profile.phi3_lq + profile.phi2_lq + profile.phi_lq + profile.phi_lq * profile.phi_lq;
    BoundTerms {
        term1: n * profile.phi4_l1 * l.powi(3),
        term2: n * second * l * l,
        term3: n * n * (profile.phi2_l1 * l + profile.phi_lq).powi(2),
    }
}

/// `m³[n‖φ‖_q log³(‖φ‖+1) + n²‖φ‖_q² log²(‖φ‖+1)]` with `m = max{1, sup|φ|}`.
pub fn rhs_corollary(profile: &NormProfile, n: usize) -> f64 {
    let n = n as f64;
    let l = profile.log_norm();
    let lq = profile.phi_lq;
    profile.m.powi(3) * (n * lq * l.powi(3) + n * n * lq * lq * l * l)
}

/// One horizon of a bound check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub n: usize,
    /// Exact value or Monte Carlo mean.
    pub lhs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs_stderr: Option<f64>,
    /// Value entering `empirical_k`: the exact value, or `mean + 3·stderr`.
    pub lhs_used: f64,
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub empirical_k: f64,
    pub corollary: f64,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub underpowered: bool,
}

impl MomentReport {
    fn new(n: usize, profile: &NormProfile, lhs: f64, stderr: Option<f64>, underpowered: bool) -> Self {
        let terms = rhs_theorem1(profile, n);
        let lhs_used = lhs + 3.0 * stderr.unwrap_or(0.0);
        let total = terms.total();
        MomentReport {
            n,
            lhs,
            lhs_stderr: stderr,
            lhs_used,
            term1: terms.term1,
            term2: terms.term2,
            term3: terms.term3,
            empirical_k: if total > 0.0 { lhs_used / total } else { 0.0 },
            corollary: rhs_corollary(profile, n),
            underpowered,
        }
    }
}

/// Where the left-hand side comes from.
pub enum BoundMode<'a> {
    Exact(&'a MomentOracle),
    MonteCarlo {
        sampler: &'a StationarySampler,
        phi: &'a Observable,
        reps: usize,
        seed: u64,
        execution: Execution,
    },
}

/// Reports over a list of horizons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSummary {
    pub mode: &'static str,
    pub profile: NormProfile,
    pub reports: Vec<MomentReport>,
    pub max_empirical_k: f64,
    pub any_underpowered: bool,
}

impl BoundSummary {
    /// Largest `empirical_k` over reports with `n ≥ from`.
    pub fn max_k_from(&self, from: usize) -> Option<f64> {
        self.reports
            .iter()
            .filter(|r| r.n >= from)
            .map(|r| r.empirical_k)
            .reduce(f64::max)
    }
}

pub fn verify_bound(mode: BoundMode<'_>, profile: &NormProfile, ns: &[usize]) -> Result<BoundSummary> {
    if ns.is_empty() {
        return Err(Error::InvalidParameter("no horizons requested".into()));
    }
    let mut reports = Vec::with_capacity(ns.len());
    let label = match &mode {
        BoundMode::Exact(_) => "exact",
        BoundMode::MonteCarlo { .. } => "mc",
    };
    for &n in ns {
        let report = match &mode {
            BoundMode::Exact(oracle) => MomentReport::new(n, profile, oracle.fourth_moment(n)?, None, false),
            BoundMode::MonteCarlo {
                sampler,
                phi,
                reps,
                seed,
                execution,
            } => {
                let est = estimate_s4(sampler, phi, n, *reps, *seed, *execution)?;
                MomentReport::new(n, profile, est.mean, Some(est.stderr), est.underpowered)
            }
        };
        reports.push(report);
    }
    let max_empirical_k = reports.iter().map(|r| r.empirical_k).fold(0.0, f64::max);
    let any_underpowered = reports.iter().any(|r| r.underpowered);
    Ok(BoundSummary {
        mode: label,
        profile: profile.clone(),
        reports,
        max_empirical_k,
        any_underpowered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::ProfileSource;

    fn profile(banach: f64, phi_lq: f64, all: f64) -> NormProfile {
        NormProfile {
            q: 2.0,
            phi4_l1: all,
            phi3_lq: all,
            phi2_lq: all,
            phi2_l1: all,
            phi_lq,
            banach,
            m: 1.0,
            source: ProfileSource::Exact,
        }
    }

    #[test]
    fn corollary_arithmetic() {
        let v = rhs_corollary(&profile(9.0, 0.1, 0.1), 100);
        assert!((v - 652.27).abs() < 0.01, "{v}");
        assert_eq!(rhs_corollary(&profile(0.0, 0.0, 0.0), 100), 0.0);
    }

    #[test]
    fn rademacher_terms() {
        let t = rhs_theorem1(&profile(1.0, 1.0, 1.0), 10);
        assert!((t.term1 - 3.330).abs() < 1e-3);
        assert!((t.term2 - 19.218).abs() < 1e-3);
        assert!((t.term3 - 286.67).abs() < 1e-2);
    }

    #[test]
    fn terms_grow_with_n_and_norms() {
        let base = profile(2.0, 0.5, 0.5);
        for n in [1usize, 7, 64] {
            let t = rhs_theorem1(&base, n);
            let t2 = rhs_theorem1(&base, n + 1);
            assert!(t2.term1 >= t.term1 && t2.term2 >= t.term2 && t2.term3 >= t.term3);
            let mut bumped = base.clone();
            bumped.banach *= 1.01;
            bumped.phi_lq *= 1.01;
            let tb = rhs_theorem1(&bumped, n);
            assert!(tb.term1 >= t.term1 && tb.term2 >= t.term2 && tb.term3 >= t.term3);
        }
    }
}
