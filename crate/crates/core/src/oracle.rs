//! Exact moments on finite chains under the stationary law.
//!
//! `E[Sₙ⁴]` expands over sorted index quadruples `t₁ ≤ t₂ ≤ t₃ ≤ t₄` in
//! `1..=n`. Only the gaps `(i, j, k) = (t₂−t₁, t₃−t₂, t₄−t₃)` matter, there
//! are `n − i − j − k` placements of each gap triple, and each sorted
//! quadruple stands for `4!/∏ rᵤ!` ordered ones, `rᵤ` the sizes of its runs
//! of equal indices.

use std::sync::RwLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{dot, CompensatedSum, Matrix};
use crate::model::FiniteMarkovModel;
use crate::observable::Observable;
use crate::spectral::ErgodicityCertificate;

/// Largest horizon accepted by [`MomentOracle::fourth_moment`] by default.
pub const DEFAULT_CAP: usize = 512;

/// Number of ordered quadruples collapsing onto a sorted one with gaps
/// `(i, j, k)`.
pub fn multiplicity(i: usize, j: usize, k: usize) -> u32 {
    let mut denom = 1u32;
    let mut run = 1u32;
    for gap in [i, j, k] {
        if gap == 0 {
            run += 1;
        } else {
            denom *= factorial(run);
            run = 1;
        }
    }
    denom *= factorial(run);
    24 / denom
}

fn factorial(r: u32) -> u32 {
    (1..=r).product()
}

/// Exact moment queries for one `(model, φ)` pair.
///
/// Matrix powers `Pᵐ` are cached by exponent and shared between queries.
#[derive(Debug)]
pub struct MomentOracle {
    p: Matrix,
    nu: Vec<f64>,
    phi: Vec<f64>,
    cap: usize,
    powers: RwLock<Vec<Matrix>>,
    execution: Execution,
}

impl Clone for MomentOracle {
    fn clone(&self) -> Self {
        MomentOracle {
            p: self.p.clone(),
            nu: self.nu.clone(),
            phi: self.phi.clone(),
            cap: self.cap,
            powers: RwLock::new(self.powers.read().unwrap().clone()),
            execution: self.execution,
        }
    }
}

impl MomentOracle {
    pub fn new(model: &FiniteMarkovModel, phi: &Observable) -> Result<Self> {
        Self::from_values(model, phi.tabulate(model)?)
    }

    /// Oracle for a tabulated observable; requires `|E_ν φ| < 1e-12·max(1, sup|φ|)`.
    pub fn from_values(model: &FiniteMarkovModel, phi: Vec<f64>) -> Result<Self> {
        let nu = model.require_stationary()?.to_vec();
        if phi.len() != nu.len() {
            return Err(Error::Dimension(format!(
                "observable has {} values for {} states",
                phi.len(),
                nu.len()
            )));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidObservable("non-finite observable value".into()));
        }
        let mut acc = CompensatedSum::new();
        acc.extend(nu.iter().zip(&phi).map(|(w, v)| w * v));
        let mean = acc.value();
        let scale = phi.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if mean.abs() >= crate::norms::CENTER_TOL * scale {
            return Err(Error::NotCentered { mean });
        }
        let n = nu.len();
        Ok(MomentOracle {
            p: model.transition().clone(),
            nu,
            phi,
            cap: DEFAULT_CAP,
            powers: RwLock::new(vec![Matrix::identity(n)]),
            execution: Execution::default(),
        })
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn stationary(&self) -> &[f64] {
        &self.nu
    }

    pub fn transition(&self) -> &Matrix {
        &self.p
    }

    /// `Pᵐ f` through the power cache.
    pub fn apply_power(&self, m: usize, f: &[f64]) -> Vec<f64> {
        {
            let powers = self.powers.read().unwrap();
            if let Some(pm) = powers.get(m) {
                return pm.mul_vec(f);
            }
        }
        let mut powers = self.powers.write().unwrap();
        while powers.len() <= m {
            let next = powers.last().unwrap().matmul(&self.p);
            powers.push(next);
        }
        powers[m].mul_vec(f)
    }

    /// `φ · f`, pointwise.
    pub fn times_phi(&self, f: &[f64]) -> Vec<f64> {
        self.phi.iter().zip(f).map(|(a, b)| a * b).collect()
    }

    /// `E_ν f`.
    pub fn expect(&self, f: &[f64]) -> f64 {
        let mut acc = CompensatedSum::new();
        acc.extend(self.nu.iter().zip(f).map(|(w, v)| w * v));
        acc.value()
    }

    /// `φ·Pᵏφ`.
    pub fn pair_function(&self, k: usize) -> Vec<f64> {
        self.times_phi(&self.apply_power(k, &self.phi))
    }

    /// `φ·Pʲ(φ·Pᵏφ)`.
    pub fn triple_function(&self, j: usize, k: usize) -> Vec<f64> {
        self.times_phi(&self.apply_power(j, &self.pair_function(k)))
    }

    /// `E[φ(X₀)φ(X_i)φ(X_{i+j})φ(X_{i+j+k})] = νᵀD_φPⁱD_φPʲD_φPᵏφ`.
    pub fn cross_moment(&self, i: usize, j: usize, k: usize) -> f64 {
        let v = self.triple_function(j, k);
        self.expect(&self.times_phi(&self.apply_power(i, &v)))
    }

    /// `E[φ(X₀)φ(X_k)]`.
    pub fn covariance(&self, k: usize) -> f64 {
        self.expect(&self.pair_function(k))
    }

    /// `E_ν[Sₙ⁴]`, summed lexicographically in `(i, j, k)` with compensated
    /// accumulation. The outer gap `i` is distributed across threads; the
    /// per-`i` partial sums are folded in order, so the result does not
    /// depend on the execution mode.
    pub fn fourth_moment(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidParameter("horizon n must be at least 1".into()));
        }
        if n > self.cap {
            return Err(Error::CapExceeded {
                requested: n,
                cap: self.cap,
            });
        }
        // right vectors Pᵏφ for k < n
        let mut right = Vec::with_capacity(n);
        right.push(self.phi.clone());
        for k in 1..n {
            right.push(self.p.mul_vec(&right[k - 1]));
        }
        // left vectors a_i = νᵀD_φPⁱ for i < n
        let mut left = Vec::with_capacity(n);
        left.push(self.times_phi(&self.nu));
        for i in 1..n {
            left.push(self.p.vec_mul(&left[i - 1]));
        }
        let partials = self.execution.map_indexed(n, |i| {
            let mut acc = CompensatedSum::new();
            // b = a_i D_φ Pʲ
            let mut b = self.times_phi(&left[i]);
            for j in 0..n - i {
                let c = self.times_phi(&b);
                for (k, r) in right.iter().enumerate().take(n - i - j) {
                    let placements = (n - i - j - k) as f64;
                    let w = placements * f64::from(multiplicity(i, j, k));
                    acc.add(w * dot(&c, r));
                }
                if j + 1 < n - i {
                    b = self.p.vec_mul(&b);
                }
            }
            acc.value()
        });
        let mut total = CompensatedSum::new();
        total.extend(partials);
        Ok(total.value())
    }

    /// `σ² = E[φ²] + 2Σ_{k≥1} E[φ(X₀)φ(X_k)]`, truncated once the
    /// certificate bound `Cκθᵏ‖φ‖‖φ(X₀)‖_q` on `|cov(k)|` drops below `tol`.
    pub fn green_kubo(&self, cert: &ErgodicityCertificate, q: f64, tol: f64) -> Result<GreenKubo> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        crate::observable::check_q(q)?;
        let phi_norm = cert.norm(&self.phi);
        let lq = self
            .expect(&self.phi.iter().map(|v| v.abs().powf(q)).collect::<Vec<_>>())
            .powf(1.0 / q);
        let envelope = cert.c * cert.kappa * phi_norm * lq;
        let theta = cert.theta;
        const MAX_TERMS: usize = 1_000_000;
        let mut acc = CompensatedSum::new();
        acc.add(self.covariance(0));
        let mut v = self.phi.clone();
        let mut terms = 0;
        for k in 1..=MAX_TERMS {
            if envelope * theta.powi(k as i32) < tol {
                break;
            }
            v = self.p.mul_vec(&v);
            acc.add(2.0 * self.expect(&self.times_phi(&v)));
            terms = k;
        }
        let k = terms as i32;
        let truncation_error = 2.0 * envelope * theta.powi(k + 1) / (1.0 - theta);
        Ok(GreenKubo {
            sigma2: acc.value(),
            terms,
            truncation_error,
        })
    }
}

/// Truncated Green–Kubo series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenKubo {
    pub sigma2: f64,
    /// Number of covariance terms `k ≥ 1` included.
    pub terms: usize,
    /// Bound on the omitted tail `2Σ_{k>K}|cov(k)|`.
    pub truncation_error: f64,
}

/// Largest number of paths [`enumerate_paths_s4`] will visit.
pub const ENUMERATION_LIMIT: usize = 1 << 24;

/// `E_ν[Sₙ⁴]` by brute force over all `sⁿ` paths `(X₁, …, Xₙ)`: the
/// reference the gap expansion is checked against.
pub fn enumerate_paths_s4(model: &FiniteMarkovModel, phi: &[f64], n: usize) -> Result<f64> {
    let nu = model.require_stationary()?;
    let p = model.transition();
    let s = nu.len();
    if phi.len() != s {
        return Err(Error::Dimension("one observable value per state required".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("horizon n must be at least 1".into()));
    }
    let paths = (s as f64).powi(n as i32);
    if paths > ENUMERATION_LIMIT as f64 {
        return Err(Error::CapExceeded {
            requested: paths as usize,
            cap: ENUMERATION_LIMIT,
        });
    }
    // depth-first over path prefixes carrying (probability, partial sum)
    fn walk(p: &Matrix, phi: &[f64], n: usize, state: usize, prob: f64, sum: f64, acc: &mut CompensatedSum) {
        if n == 0 {
            acc.add(prob * sum.powi(4));
            return;
        }
        for (next, &w) in p.row(state).iter().enumerate() {
            if w > 0.0 {
                walk(p, phi, n - 1, next, prob * w, sum + phi[next], acc);
            }
        }
    }
    let mut acc = CompensatedSum::new();
    for (x, &w) in nu.iter().enumerate() {
        if w > 0.0 {
            walk(p, phi, n - 1, x, w, phi[x], &mut acc);
        }
    }
    Ok(acc.value())
}

pub fn exact_cross_moment(model: &FiniteMarkovModel, phi: &Observable, i: usize, j: usize, k: usize) -> Result<f64> {
    Ok(MomentOracle::new(model, phi)?.cross_moment(i, j, k))
}

pub fn exact_fourth_moment(model: &FiniteMarkovModel, phi: &Observable, n: usize) -> Result<f64> {
    MomentOracle::new(model, phi)?.fourth_moment(n)
}

pub fn exact_covariance(model: &FiniteMarkovModel, phi: &Observable, k: usize) -> Result<f64> {
    Ok(MomentOracle::new(model, phi)?.covariance(k))
}

pub fn green_kubo_sigma2(
    model: &FiniteMarkovModel,
    phi: &Observable,
    cert: &ErgodicityCertificate,
    tol: f64,
) -> Result<GreenKubo> {
    MomentOracle::new(model, phi)?.green_kubo(cert, phi.q, tol)
}
