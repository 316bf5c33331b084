use std::f64::consts::FRAC_PI_2;

use postselect::counting::{derive_seed, simulate_batch, weak_value_from_counts, AcquisitionConfig};
use postselect::estimation::{
    build_calibration, cramer_rao_variance, estimate_from_counts, estimate_theta, ModelParams,
};
use postselect::qstate::{Sign, Strength};
use postselect::weak::weak_value_curve;

fn acquisition(seed: u64) -> AcquisitionConfig {
    AcquisitionConfig { rate: 2000.0, duration: 5.0, seed, kappa_uncertainty: 0.0 }
}

#[test]
fn propagated_variance_of_sigma_matches_spread() {
    for (theta_deg, sign) in [(20.0, Sign::Minus), (10.0, Sign::Minus), (70.0, Sign::Plus)] {
        let model = ModelParams::ideal(0.335, sign);
        let probs = model.response().unwrap().record(f64::to_radians(theta_deg)).unwrap();
        let recs = simulate_batch(&probs, &acquisition(31), 1000).unwrap();
        let ws: Vec<f64> = recs.iter().map(|r| weak_value_from_counts(r, 0.335, sign).unwrap().sigma_w).collect();
        let prop = recs.iter().map(|r| weak_value_from_counts(r, 0.335, sign).unwrap().variance).sum::<f64>() / 1000.0;
        let mean = ws.iter().sum::<f64>() / 1000.0;
        let emp = ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / 999.0;
        assert!((emp - prop).abs() / prop < 0.15, "{theta_deg}: empirical {emp} vs propagated {prop}");
    }
}

#[test]
fn inversion_round_trip() {
    let s = Strength::new(0.335).unwrap();
    for sign in Sign::BOTH {
        let curve = build_calibration(ModelParams::ideal(0.335, sign), (0.0, FRAC_PI_2), 0.25f64.to_radians()).unwrap();
        for i in 1..180 {
            let theta = (0.5 * i as f64).to_radians();
            if curve.turning_points.iter().any(|t| (t - theta).abs() < 0.01) {
                continue;
            }
            let b = curve.branch_containing(theta).unwrap();
            let sigma = weak_value_curve(theta, s, sign).unwrap();
            let back = estimate_theta(&curve, sigma, (b.start, b.end)).unwrap();
            assert!((back - theta).abs() < 1e-9, "{sign:?} {theta}: {back}");
        }
    }
}

#[test]
fn estimator_respects_cramer_rao() {
    let s = Strength::new(0.335).unwrap();
    for (theta_deg, sign) in [(20.0, Sign::Minus), (25.0, Sign::Minus), (70.0, Sign::Plus)] {
        let theta = f64::to_radians(theta_deg);
        let model = ModelParams::ideal(0.335, sign);
        let curve = build_calibration(model, (0.0, FRAC_PI_2), 0.25f64.to_radians()).unwrap();
        let b = curve.branch_containing(theta).unwrap();
        let probs = curve.response().record(theta).unwrap();
        let recs = simulate_batch(&probs, &acquisition(derive_seed(5, theta_deg as u64)), 1000).unwrap();
        let est: Vec<_> = recs.iter().map(|r| estimate_from_counts(&curve, r, (b.start, b.end)).unwrap()).collect();
        let n = est.len() as f64;
        let mean = est.iter().map(|e| e.theta_hat).sum::<f64>() / n;
        let emp = est.iter().map(|e| (e.theta_hat - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let emp_deg2 = emp.to_degrees().to_degrees();
        let m_ps = est.iter().map(|e| e.m_ps as f64).sum::<f64>() / n;
        let cr = cramer_rao_variance(theta, s, sign, m_ps).unwrap();
        assert!(emp_deg2 >= cr * 0.85, "{theta_deg}: empirical {emp_deg2} vs CR {cr}");
    }
}
