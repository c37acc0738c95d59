use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, hadamard, sup_norm};
use crate::model::FiniteMarkovModel;
use crate::observable::NormKind;

use super::{subdominant_radius, GAP_LIMIT};

/// Floor applied to the contraction rate. Chains whose deflated operator is
/// nilpotent (i.i.d. chains, dyadic Ulam chains of the doubling map) have
/// subdominant radius zero, while the certificate needs `θ > 0`.
pub const MIN_THETA: f64 = 1e-3;

/// Residuals `‖Pⁿf − Πf‖` below `NOISE_FLOOR · ‖f‖` are rounding noise and
/// count as zero when fitting `κ`.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Records that a probe set contains `φ`, `φ·Pᵏφ` and `φ·Pʲ(φ·Pᵏφ)` for all
/// `j, k ≤ cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeClosure {
    pub phi: Vec<f64>,
    pub cutoff: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    probes: Vec<Vec<f64>>,
    closure: Option<ProbeClosure>,
}

impl ProbeSet {
    /// Coordinate indicators `𝟙_{x}` for every state.
    pub fn indicators(states: usize) -> Self {
        let probes = (0..states)
            .map(|i| {
                let mut e = vec![0.0; states];
                e[i] = 1.0;
                e
            })
            .collect();
        ProbeSet {
            probes,
            closure: None,
        }
    }

    pub fn custom(probes: Vec<Vec<f64>>) -> Self {
        ProbeSet {
            probes,
            closure: None,
        }
    }

    /// Coordinate indicators plus every function the proof ledger feeds to
    /// the geometric-ergodicity bound for `phi` up to `cutoff`.
    pub fn closure(model: &FiniteMarkovModel, phi: &[f64], cutoff: usize) -> Self {
        let p = model.transition();
        let mut set = ProbeSet::indicators(model.len());
        set.probes.push(phi.to_vec());
        let mut pk_phi = phi.to_vec();
        for _ in 0..=cutoff {
            let g = hadamard(phi, &pk_phi);
            set.probes.push(g.clone());
            let mut pj_g = g;
            for _ in 0..=cutoff {
                set.probes.push(hadamard(phi, &pj_g));
                pj_g = p.mul_vec(&pj_g);
            }
            pk_phi = p.mul_vec(&pk_phi);
        }
        set.closure = Some(ProbeClosure {
            phi: phi.to_vec(),
            cutoff,
        });
        set
    }

    pub fn push(&mut self, f: Vec<f64>) {
        self.probes.push(f);
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }
}

/// Constants `(κ, θ, p, C, M)` of geometric ergodicity, fitted and checked on
/// an explicit probe set up to a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityCertificate {
    pub kappa: f64,
    pub theta: f64,
    /// Raw subdominant radius before the [`MIN_THETA`] floor.
    pub spectral_radius: f64,
    pub p: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub norm_kind: NormKind,
    pub horizon: usize,
    pub probes: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closure: Option<ProbeClosure>,
    pub noise_floor: f64,
    /// `max ‖f‖_p / ‖f‖` over probes.
    pub embedding_ratio: f64,
    /// `max ‖f·Pⁿf‖ / (‖f‖‖Pⁿf‖)` over probes and `n ≤ horizon`.
    pub algebra_ratio: f64,
    /// State order used by the BV norm.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub order: Vec<usize>,
}

impl ErgodicityCertificate {
    /// `‖f‖` in the certificate's Banach norm.
    pub fn norm(&self, f: &[f64]) -> f64 {
        banach_norm(self.norm_kind, &self.order, f)
    }

    /// `κ θⁿ ‖f‖` for a function of norm `f_norm`.
    pub fn decay_bound(&self, n: usize, f_norm: f64) -> f64 {
        self.kappa * self.theta.powi(n as i32) * f_norm
    }

    /// Refuses unless the probe set is closed for `phi` up to `cutoff`.
    pub fn covers(&self, phi: &[f64], cutoff: usize) -> Result<()> {
        let closure = self
            .closure
            .as_ref()
            .ok_or_else(|| Error::MissingClosure("certificate has no probe closure".into()))?;
        if closure.phi.len() != phi.len()
            || closure.phi.iter().zip(phi).any(|(a, b)| (a - b).abs() > 1e-15)
        {
            return Err(Error::MissingClosure("closure built for a different φ".into()));
        }
        if closure.cutoff < cutoff || self.horizon < cutoff {
            return Err(Error::MissingClosure(format!(
                "closure cutoff {} / horizon {} below requested cutoff {cutoff}",
                closure.cutoff, self.horizon
            )));
        }
        Ok(())
    }

    /// Largest violation of `‖Pⁿf − Πf‖ ≤ κθⁿ‖f‖ + NOISE_FLOOR·‖f‖` over
    /// `n ≤ horizon`; non-positive means the bound holds.
    pub fn worst_violation(&self, model: &FiniteMarkovModel, f: &[f64]) -> Result<f64> {
        let nu = model.require_stationary()?;
        let fnorm = self.norm(f);
        let mean = dot(nu, f);
        let mut g = f.to_vec();
        let mut worst = f64::NEG_INFINITY;
        for n in 0..=self.horizon {
            if n > 0 {
                g = model.transition().mul_vec(&g);
            }
            let resid: Vec<f64> = g.iter().map(|x| x - mean).collect();
            let lhs = self.norm(&resid);
            worst = worst.max(lhs - self.decay_bound(n, fnorm) - self.noise_floor * fnorm);
        }
        Ok(worst)
    }
}

fn banach_norm(kind: NormKind, order: &[usize], f: &[f64]) -> f64 {
    match kind {
        NormKind::Bv => {
            let var: f64 = order.windows(2).map(|w| (f[w[1]] - f[w[0]]).abs()).sum();
            sup_norm(f) + var
        }
        _ => sup_norm(f),
    }
}

fn lp_norm(nu: &[f64], f: &[f64], p: f64) -> f64 {
    nu.iter()
        .zip(f)
        .map(|(w, x)| w * x.abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Fits `(κ, θ)` for `model` on `probes` up to `horizon`.
///
/// `θ` is the subdominant spectral radius (floored at [`MIN_THETA`]); `κ` is
/// the largest ratio `‖Pⁿf − Πf‖ / (θⁿ‖f‖)` over probes and `0 ≤ n ≤
/// horizon`, so the decay bound holds on the probe set by construction. The
/// sup and BV norms are both algebra norms dominating every `L^p` norm, so
/// `C = M = 1`; the embedding and algebra inequalities are re-checked on the
/// probes anyway.
pub fn theta_kappa(
    model: &FiniteMarkovModel,
    norm_kind: NormKind,
    probes: &ProbeSet,
    horizon: usize,
    p: f64,
) -> Result<ErgodicityCertificate> {
    if horizon < 2 {
        return Err(Error::InvalidParameter(format!("horizon {horizon} < 2")));
    }
    if probes.is_empty() {
        return Err(Error::InvalidParameter("empty probe set".into()));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    if norm_kind == NormKind::Lipschitz {
        return Err(Error::UnsupportedNorm(
            "LIPSCHITZ (finite chains carry no metric; use SUP or BV)".into(),
        ));
    }
    let nu = model.require_stationary()?;
    let pm = model.transition();
    if let Some(f) = probes.probes.iter().find(|f| f.len() != model.len()) {
        return Err(Error::Dimension(format!(
            "probe of length {} for {} states",
            f.len(),
            model.len()
        )));
    }

    let rho = subdominant_radius(pm, nu);
    if rho >= GAP_LIMIT {
        return Err(Error::NoSpectralGap { theta: rho });
    }
    let theta = rho.max(MIN_THETA);
    let ln_theta = theta.ln();

    let mut order: Vec<usize> = (0..model.len()).collect();
    if norm_kind == NormKind::Bv {
        let pos = model.positions();
        order.sort_by(|&a, &b| pos[a].total_cmp(&pos[b]));
    }
    let norm = |f: &[f64]| banach_norm(norm_kind, &order, f);

    let c = 1.0;
    let m = 1.0;
    let mut kappa = 0.0f64;
    let mut embedding_ratio = 0.0f64;
    let mut algebra_ratio = 0.0f64;
    for f in &probes.probes {
        let fnorm = norm(f);
        if fnorm == 0.0 {
            continue;
        }
        embedding_ratio = embedding_ratio.max(lp_norm(nu, f, p) / fnorm);
        let mean = dot(nu, f);
        let mut g = f.clone();
        for n in 0..=horizon {
            if n > 0 {
                g = pm.mul_vec(&g);
            }
            let resid: Vec<f64> = g.iter().map(|x| x - mean).collect();
            let r = norm(&resid);
            if r > NOISE_FLOOR * fnorm {
                let log_ratio = r.ln() - n as f64 * ln_theta - fnorm.ln();
                kappa = kappa.max(log_ratio.exp());
            }
            let gnorm = norm(&g);
            if gnorm > 0.0 {
                algebra_ratio = algebra_ratio.max(norm(&hadamard(f, &g)) / (fnorm * gnorm));
            }
        }
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(
            "probe set is degenerate (all probes constant)".into(),
        ));
    }
    let slack = 1e-12;
    if embedding_ratio > c + slack {
        return Err(Error::InvalidParameter(format!(
            "embedding ‖f‖_p ≤ C‖f‖ violated: ratio {embedding_ratio}"
        )));
    }
    if algebra_ratio > m + slack {
        return Err(Error::InvalidParameter(format!(
            "algebra bound ‖fPⁿf‖ ≤ M‖f‖‖Pⁿf‖ violated: ratio {algebra_ratio}"
        )));
    }
    Ok(ErgodicityCertificate {
        kappa,
        theta,
        spectral_radius: rho,
        p,
        c,
        m,
        norm_kind,
        horizon,
        probes: probes.probes.clone(),
        closure: probes.closure.clone(),
        noise_floor: NOISE_FLOOR,
        embedding_ratio,
        algebra_ratio,
        order: if norm_kind == NormKind::Bv { order } else { Vec::new() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::spectral::doeblin_chain;

    fn chain(rows: &[&[f64]]) -> FiniteMarkovModel {
        doeblin_chain(Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap())
            .unwrap()
    }

    #[test]
    fn symmetric_chain_theta_and_kappa() {
        let model = chain(&[&[0.75, 0.25], &[0.25, 0.75]]);
        let cert = theta_kappa(&model, NormKind::Sup, &ProbeSet::indicators(2), 50, 2.0).unwrap();
        assert!((cert.theta - 0.5).abs() < 1e-10);
        assert!(cert.kappa <= 2.0);
        // Pⁿ = Π + 0.5ⁿ(I − Π): ‖Pⁿ𝟙ₓ − Π𝟙ₓ‖ = 0.5ⁿ·0.5, so κ = 0.5 exactly
        assert!((cert.kappa - 0.5).abs() < 1e-12);
        assert_eq!((cert.c, cert.m), (1.0, 1.0));
    }

    #[test]
    fn asymmetric_chain_theta() {
        let model = chain(&[&[0.9, 0.1], &[0.5, 0.5]]);
        let cert = theta_kappa(&model, NormKind::Sup, &ProbeSet::indicators(2), 50, 2.0).unwrap();
        assert!((cert.theta - 0.4).abs() < 1e-10);
    }

    #[test]
    fn iid_chain_hits_the_floor() {
        let model = chain(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let cert = theta_kappa(&model, NormKind::Sup, &ProbeSet::indicators(2), 10, 2.0).unwrap();
        assert_eq!(cert.spectral_radius, 0.0);
        assert_eq!(cert.theta, MIN_THETA);
        assert_eq!(cert.kappa, 0.5);
    }

    #[test]
    fn lipschitz_norm_unsupported_on_finite_chain() {
        let model = chain(&[&[0.75, 0.25], &[0.25, 0.75]]);
        let err = theta_kappa(&model, NormKind::Lipschitz, &ProbeSet::indicators(2), 5, 2.0);
        assert!(matches!(err, Err(Error::UnsupportedNorm(_))));
    }

    #[test]
    fn bv_certificate_holds_on_probes() {
        let model = chain(&[&[0.5, 0.5, 0.0], &[0.25, 0.5, 0.25], &[0.0, 0.5, 0.5]]);
        let phi = vec![1.0, 0.0, -1.0];
        let probes = ProbeSet::closure(&model, &phi, 6);
        let cert = theta_kappa(&model, NormKind::Bv, &probes, 6, 2.0).unwrap();
        for f in &cert.probes {
            assert!(cert.worst_violation(&model, f).unwrap() <= 0.0);
        }
        cert.covers(&phi, 6).unwrap();
        assert!(cert.covers(&phi, 7).is_err());
        assert!(cert.covers(&[1.0, 0.0, 0.0], 3).is_err());
    }

    #[test]
    fn json_field_names() {
        let model = chain(&[&[0.75, 0.25], &[0.25, 0.75]]);
        let cert = theta_kappa(&model, NormKind::Sup, &ProbeSet::indicators(2), 3, 2.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&cert).unwrap();
        for key in ["kappa", "theta", "p", "C", "M", "probes", "horizon"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
