//! Stationary measures, the subdominant spectral radius of a finite chain,
//! geometric-ergodicity certificates and Ulam discretisation of interval maps.

mod certificate;
mod ulam;

pub use certificate::{theta_kappa, ErgodicityCertificate, ProbeClosure, ProbeSet, MIN_THETA, NOISE_FLOOR};
pub use ulam::{ulam, IntervalMap, LinearBranch, UlamChain};

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::replicate_rng;
use crate::linalg::{sup_norm, Matrix};
use crate::model::{check_stochastic, stationary_residual, FiniteMarkovModel, STATIONARY_RESIDUAL_TOL};

/// Largest admissible contraction rate.
pub const GAP_LIMIT: f64 = 1.0 - 1e-12;

/// Checks that the positive-entry graph of `p` is strongly connected.
pub fn check_irreducible(p: &Matrix) -> Result<()> {
    let n = p.rows();
    let reach = |forward: bool| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let w = if forward { p[(u, v)] } else { p[(v, u)] };
                if w > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    };
    for forward in [true, false] {
        if let Some(v) = reach(forward).iter().position(|s| !s) {
            return Err(Error::NotStronglyErgodic(format!(
                "reducible: state {v} is not {} state 0",
                if forward { "reachable from" } else { "able to reach" }
            )));
        }
    }
    Ok(())
}

/// Period of an irreducible chain (gcd of cycle lengths through BFS levels).
pub fn period(p: &Matrix) -> usize {
    let n = p.rows();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    let mut g = 0usize;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if p[(u, v)] <= 0.0 {
                continue;
            }
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Irreducibility and aperiodicity, the finite-state form of Doeblin's
/// condition.
pub fn check_strongly_ergodic(p: &Matrix) -> Result<()> {
    check_stochastic(p)?;
    check_irreducible(p)?;
    let d = period(p);
    if d != 1 {
        return Err(Error::NotStronglyErgodic(format!("periodic with period {d}")));
    }
    Ok(())
}

/// The stationary probability vector of an irreducible aperiodic chain.
pub fn stationary(p: &Matrix) -> Result<Vec<f64>> {
    check_strongly_ergodic(p)?;
    let n = p.rows();
    if is_doubly_stochastic(p) {
        return Ok(vec![1.0 / n as f64; n]);
    }
    // (Pᵀ − I) ν = 0 with the last equation replaced by Σν = 1.
    let mut a = p.transpose();
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let mut nu = a.solve(&rhs)?;
    // one step of iterative refinement
    let r: Vec<f64> = a
        .mul_vec(&nu)
        .iter()
        .zip(&rhs)
        .map(|(ax, b)| b - ax)
        .collect();
    if let Ok(dx) = a.solve(&r) {
        nu.iter_mut().zip(dx).for_each(|(x, d)| *x += d);
    }
    for x in nu.iter_mut() {
        if *x < 0.0 {
            if *x < -1e-12 {
                return Err(Error::InvalidStationary(format!("negative mass {x}")));
            }
            *x = 0.0;
        }
    }
    let total: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|x| *x /= total);
    let residual = stationary_residual(p, &nu);
    if residual >= STATIONARY_RESIDUAL_TOL {
        return Err(Error::InvalidStationary(format!("residual {residual:e}")));
    }
    Ok(nu)
}

fn is_doubly_stochastic(p: &Matrix) -> bool {
    (0..p.cols()).all(|j| ((0..p.rows()).map(|i| p[(i, j)]).sum::<f64>() - 1.0).abs() <= 1e-15)
}

/// `P − 𝟏νᵀ`, the transition operator with the invariant direction removed.
pub fn deflated(p: &Matrix, nu: &[f64]) -> Matrix {
    let mut d = p.clone();
    for i in 0..d.rows() {
        for (j, &w) in nu.iter().enumerate() {
            d[(i, j)] -= w;
        }
    }
    d
}

/// Spectral radius of `P − 𝟏νᵀ` (the modulus of the subdominant spectrum).
///
/// Computed from powers of the deflated operator by repeated squaring with
/// log-scale renormalisation: `ρ = lim ‖D^{2^j}‖^{2^{-j}}`. Complex
/// subdominant pairs and Jordan blocks are handled through the modulus; a
/// nilpotent deflated operator gives exactly zero.
pub fn subdominant_radius(p: &Matrix, nu: &[f64]) -> f64 {
    let mut m = deflated(p, nu);
    let s = m.norm_inf();
    if s == 0.0 {
        return 0.0;
    }
    // power-of-two rescaling keeps exact cancellations exact
    let mut log2_norm = rescale(&mut m, s);
    let mut exponent = 1.0f64;
    let mut estimate = s;
    for _ in 0..60 {
        m = m.matmul(&m);
        log2_norm *= 2.0;
        exponent *= 2.0;
        let s = m.norm_inf();
        if s < f64::MIN_POSITIVE {
            return 0.0;
        }
        log2_norm += rescale(&mut m, s);
        let next = (log2_norm + s_log2(&m)) / exponent;
        let next = next.exp2();
        let done = (next - estimate).abs() <= 1e-14 * next.max(1e-300);
        estimate = next;
        if done && exponent >= 1024.0 {
            break;
        }
    }
    estimate
}

/// Divides `m` by the power of two nearest below `s`; returns its exponent.
fn rescale(m: &mut Matrix, s: f64) -> f64 {
    let e = s.log2().floor();
    m.scale(2f64.powi(-(e as i32)));
    e
}

fn s_log2(m: &Matrix) -> f64 {
    m.norm_inf().log2()
}

/// Power-iteration estimate of the subdominant radius, used as a
/// cross-check. Valid when the deflated operator has a single dominant real
/// eigenvalue (or a `±λ` pair); returns `None` if the ratio sequence does
/// not settle within `max_iter` steps.
pub fn power_iteration_radius(
    p: &Matrix,
    nu: &[f64],
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Option<f64> {
    let d = deflated(p, nu);
    let n = p.rows();
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    let mut rng = replicate_rng(seed, 0);
    let mut prev = f64::NAN;
    let mut restarts = 0;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        // two steps per iteration so a ±λ pair yields a steady ratio
        let w = d.mul_vec(&d.mul_vec(&v));
        let norm = sup_norm(&w);
        let vnorm = sup_norm(&v);
        if norm <= 1e-300 * vnorm.max(1.0) {
            if restarts >= 2 {
                return Some(0.0);
            }
            restarts += 1;
            v = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            prev = f64::NAN;
            continue;
        }
        let ratio = (norm / vnorm).sqrt();
        v = w.iter().map(|x| x / norm).collect();
        if (ratio - prev).abs() < tol {
            return Some(ratio);
        }
        prev = ratio;
    }
    None
}

/// Decay-rate fit: exponential of the least-squares slope of
/// `log max_f ‖Pⁿf − Πf‖/‖f‖` over `1 ≤ n ≤ horizon`. Diagnostic only.
pub fn decay_rate_fit(model: &FiniteMarkovModel, probes: &[Vec<f64>], horizon: usize) -> Result<Option<f64>> {
    let nu = model.require_stationary()?;
    let p = model.transition();
    let mut points = Vec::new();
    let mut worst = vec![0.0f64; horizon + 1];
    for f in probes {
        let fnorm = sup_norm(f);
        if fnorm == 0.0 {
            continue;
        }
        let mean = crate::linalg::dot(nu, f);
        let mut g = f.clone();
        for w in worst.iter_mut().skip(1) {
            g = p.mul_vec(&g);
            let r = g.iter().fold(0.0f64, |m, x| m.max((x - mean).abs())) / fnorm;
            *w = w.max(r);
        }
    }
    for (n, &w) in worst.iter().enumerate().skip(1) {
        if w > 1e-13 {
            points.push((n as f64, w.ln()));
        }
    }
    if points.len() < 2 {
        return Ok(None);
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(Some((sxy / sxx).exp()))
}

/// A finite chain satisfying Doeblin's condition, with its exact stationary
/// vector attached. Geometric ergodicity holds in the sup norm with
/// `C = M = 1`.
pub fn doeblin_chain(p: Matrix) -> Result<FiniteMarkovModel> {
    let nu = stationary(&p)?;
    FiniteMarkovModel::from_matrix(p)?.with_stationary(nu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn two_state_balance() {
        let nu = stationary(&m(&[&[0.9, 0.1], &[0.5, 0.5]])).unwrap();
        assert!((nu[0] - 5.0 / 6.0).abs() < 1e-15);
        assert!((nu[1] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn single_state() {
        assert_eq!(stationary(&Matrix::identity(1)).unwrap(), vec![1.0]);
    }

    #[test]
    fn reflected_walk_and_detailed_balance() {
        let p = m(&[&[0.5, 0.5, 0.0], &[0.25, 0.5, 0.25], &[0.0, 0.5, 0.5]]);
        let nu = stationary(&p).unwrap();
        for (a, b) in nu.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!((nu[i] * p[(i, j)] - nu[j] * p[(j, i)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn periodic_chain_rejected() {
        let err = doeblin_chain(m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap_err();
        assert!(err.to_string().contains("periodic"), "{err}");
    }

    #[test]
    fn reducible_chain_rejected() {
        let err = stationary(&m(&[&[1.0, 0.0], &[0.5, 0.5]])).unwrap_err();
        assert!(err.to_string().contains("reducible"), "{err}");
    }

    #[test]
    fn two_state_radius_is_one_minus_a_minus_b() {
        for (a, b) in [(0.25, 0.25), (0.1, 0.5), (0.3, 0.6)] {
            let p = m(&[&[1.0 - a, a], &[b, 1.0 - b]]);
            let nu = stationary(&p).unwrap();
            let rho = subdominant_radius(&p, &nu);
            assert!((rho - (1.0 - a - b).abs()).abs() < 1e-12, "{a} {b}: {rho}");
        }
    }

    #[test]
    fn rotation_part_uses_modulus() {
        // Doubly stochastic 3-cycle mixed with the identity: eigenvalues
        // 1 and 0.5 + 0.5ω for cube roots ω, modulus 0.5.
        let p = m(&[&[0.5, 0.5, 0.0], &[0.0, 0.5, 0.5], &[0.5, 0.0, 0.5]]);
        let nu = stationary(&p).unwrap();
        assert!((subdominant_radius(&p, &nu) - 0.5).abs() < 1e-12);
        // the circulant is normal, so when the ratio settles it settles on the modulus
        if let Some(r) = power_iteration_radius(&p, &nu, 2000, 1e-12, 1) {
            assert!((r - 0.5).abs() < 1e-9, "{r}");
        }
    }

    #[test]
    fn deflation_annihilates_constants() {
        let p = m(&[&[0.5, 0.5, 0.0], &[0.25, 0.5, 0.25], &[0.0, 0.5, 0.5]]);
        let nu = stationary(&p).unwrap();
        let d = deflated(&p, &nu);
        assert!(sup_norm(&d.mul_vec(&[1.0; 3])) < 1e-12);
    }

    #[test]
    fn power_iteration_agrees_on_real_spectrum() {
        let p = m(&[&[0.5, 0.5, 0.0], &[0.25, 0.5, 0.25], &[0.0, 0.5, 0.5]]);
        let nu = stationary(&p).unwrap();
        let a = subdominant_radius(&p, &nu);
        let b = power_iteration_radius(&p, &nu, 100_000, 1e-12, 0).unwrap();
        assert!((a - 0.5).abs() < 1e-12 && (b - 0.5).abs() < 1e-10, "{a} {b}");
    }
}
