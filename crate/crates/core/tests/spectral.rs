mod common;

use common::*;
use ergomoment::norms::{center, norm_profile, MeanSource};
use ergomoment::spectral::{subdominant_radius, theta_kappa, ulam, IntervalMap, ProbeSet};
use ergomoment::{NormKind, Observable};
use proptest::prelude::*;

#[test]
fn two_state_thetas() {
    for (model, expected) in [(symmetric(), 0.5), (asymmetric(), 0.4)] {
        let cert = theta_kappa(&model, NormKind::Sup, &ProbeSet::indicators(2), 32, 2.0).unwrap();
        assert!((cert.theta - expected).abs() <= 1e-10, "{}", cert.theta);
    }
}

#[test]
fn ulam_doubling_theta_is_resolution_independent() {
    let theta = |k| {
        let chain = ulam(&IntervalMap::Doubling, k).unwrap();
        theta_kappa(&chain.model, NormKind::Bv, &ProbeSet::indicators(k), 16, 2.0).unwrap().theta
    };
    assert!((theta(16) - theta(32)).abs() <= 1e-6);
}

#[test]
fn beta_map_ulam_has_a_gap() {
    let chain = ulam(&IntervalMap::Beta { beta: 1.5 }, 64).unwrap();
    let rho = subdominant_radius(chain.model.transition(), chain.model.stationary().unwrap());
    assert!(rho > 0.0 && rho < 1.0, "{rho}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn certificate_holds_on_its_probes((model, phi) in chain_and_phi(), bv in any::<bool>()) {
        let kind = if bv { NormKind::Bv } else { NormKind::Sup };
        let probes = ProbeSet::closure(&model, &phi, 5);
        let cert = theta_kappa(&model, kind, &probes, 12, 2.0).unwrap();
        prop_assert!(cert.theta > 0.0 && cert.theta < 1.0);
        for f in &cert.probes {
            prop_assert!(cert.worst_violation(&model, f).unwrap() <= 0.0);
        }
        prop_assert!(cert.embedding_ratio <= 1.0 + 1e-12);
        prop_assert!(cert.algebra_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn centering_is_idempotent((model, phi) in chain_and_phi(), shift in -5.0f64..5.0) {
        let raw = Observable::table(phi.iter().map(|v| v + shift).collect());
        let once = center(&raw, MeanSource::Finite(&model)).unwrap();
        let twice = center(&once, MeanSource::Finite(&model)).unwrap();
        prop_assert_eq!(&once, &twice);
        let mean = model.expectation(&once.tabulate(&model).unwrap()).unwrap();
        prop_assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn lq_norms_increase_with_q((model, phi) in chain_and_phi(), q in 1.0f64..6.0, dq in 0.0f64..3.0) {
        let obs = Observable::table(phi);
        let a = norm_profile(&obs, &model, q).unwrap();
        let b = norm_profile(&obs, &model, q + dq).unwrap();
        let tol = 1e-12 * (1.0 + b.phi_lq);
        prop_assert!(a.phi_lq <= b.phi_lq + tol);
        prop_assert!(a.phi2_lq <= b.phi2_lq + tol * b.phi2_lq.max(1.0));
        prop_assert!(a.phi3_lq <= b.phi3_lq + tol * b.phi3_lq.max(1.0));
    }

    #[test]
    fn profile_scales_homogeneously((model, phi) in chain_and_phi(), c in 0.1f64..5.0) {
        let obs = Observable::table(phi);
        let a = norm_profile(&obs, &model, 2.0).unwrap();
        let b = norm_profile(&obs.scaled(c), &model, 2.0).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300);
        prop_assert!(close(b.phi_lq, c * a.phi_lq));
        prop_assert!(close(b.phi2_l1, c * c * a.phi2_l1));
        prop_assert!(close(b.phi4_l1, c.powi(4) * a.phi4_l1));
        prop_assert!(close(b.banach, c * a.banach));
    }
}
