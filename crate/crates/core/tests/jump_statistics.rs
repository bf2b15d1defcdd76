use clusterherald::basis::{StateVector, C64};
use clusterherald::effective::EffectiveRates;
use clusterherald::model::{build_conditional_hamiltonian, build_reset_operators, EmitterResolution};
use clusterherald::params::SystemParams;
use clusterherald::propagator::evolve_no_jump;
use clusterherald::rng::StreamRng;
use clusterherald::trajectory::{run_ensemble, run_trajectory, Channel, DetectorModel, JumpModel, RunOptions};
use rand::Rng;

/// Asymptotic Kolmogorov survival function `P(K > x)`.
fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let sign = if (k as u64) % 2 == 1 { 1.0 } else { -1.0 };
        s += sign * (-2.0 * k * k * x * x).exp();
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_exponential_p(samples: &mut [f64], rate: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let d = samples
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let cdf = 1.0 - (-rate * t).exp();
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    kolmogorov_sf(d * (n.sqrt() + 0.12 + 0.11 / n.sqrt()))
}

fn bell_sector(l_only: bool) -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if l_only {
        StateVector::from_real(&[0.0, s, s, 0.0])
    } else {
        StateVector::basis(4, 3)
    }
}

#[test]
fn norm_flux_by_finite_differences() {
    let p = SystemParams {
        g2: 0.8,
        n_max: 2,
        ..SystemParams::symmetric(1.0, 1.0, 50.0, 0.1, 0.07)
    };
    let h = build_conditional_hamiltonian(&p, 0).unwrap();
    let resets = build_reset_operators(&p, 0, EmitterResolution::PerAtom).unwrap();
    let mut rng = StreamRng::new(11, 0);
    for _ in 0..20 {
        let amps: Vec<C64> = (0..h.dim())
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let psi = StateVector::from_vec(amps).normalized().unwrap();
        let dt = 1e-6;
        let ahead = evolve_no_jump(&psi, &h, dt).unwrap().norm_sqr();
        let flux: f64 = resets.iter().map(|r| r.rate(&psi)).sum();
        let fd = (ahead - 1.0) / dt;
        assert!((fd + flux).abs() < 1e-4 * (1.0 + flux), "fd {fd} flux {flux}");
    }
}

#[test]
fn waiting_times_are_exponential() {
    // |11⟩ at Γ = 0 is invariant with total rate 4κ_eff.
    let rates = EffectiveRates::from_cooperativity(10.0, 0.5, 1.0).unwrap();
    let rates = EffectiveRates {
        gamma_eff: 0.0,
        gamma_eff_0: 0.0,
        gamma_eff_1: 0.0,
        ..rates
    };
    let model = JumpModel::effective(&rates, 0, EmitterResolution::PerAtom).unwrap();
    let runs = run_ensemble(
        &model,
        &bell_sector(false),
        &RunOptions {
            t_end: None,
            stop_after_detections: Some(1),
            sample_times: Vec::new(),
        },
        DetectorModel::perfect(),
        10_000,
        3,
    )
    .unwrap();
    let mut times: Vec<f64> = runs.iter().map(|r| r.first_detection().unwrap()).collect();
    let p = ks_exponential_p(&mut times, 4.0 * rates.kappa_eff);
    assert!(p > 0.01, "KS p-value {p}");
}

#[test]
fn h_sector_counts_are_poisson_at_four_kappa_eff() {
    let rates = EffectiveRates::from_cooperativity(5.0, 0.5, 1.0).unwrap();
    let rates = EffectiveRates {
        gamma_eff: 0.0,
        gamma_eff_0: 0.0,
        gamma_eff_1: 0.0,
        ..rates
    };
    let model = JumpModel::effective(&rates, 0, EmitterResolution::PerAtom).unwrap();
    let t = 2.0 / rates.kappa_eff;
    let runs = run_ensemble(&model, &bell_sector(false), &RunOptions::until(t), DetectorModel::perfect(), 1000, 5).unwrap();
    let counts: Vec<f64> = runs.iter().map(|r| r.detected_clicks() as f64).collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let expected = 4.0 * rates.kappa_eff * t;
    let sigma = (expected / counts.len() as f64).sqrt();
    assert!((mean - expected).abs() < 3.0 * sigma, "mean {mean} expected {expected}");
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    assert!((var / mean - 1.0).abs() < 0.15, "Fano factor {}", var / mean);
}

#[test]
fn detection_thinning_scales_click_counts() {
    let rates = EffectiveRates::from_cooperativity(5.0, 0.5, 1.0).unwrap();
    let model = JumpModel::effective(&rates, 0, EmitterResolution::PerAtom).unwrap();
    let t = 3.0 / rates.kappa_eff;
    let runs = run_ensemble(&model, &bell_sector(false), &RunOptions::until(t), DetectorModel::new(0.4).unwrap(), 2000, 9).unwrap();
    let emitted: usize = runs
        .iter()
        .map(|r| r.events.iter().filter(|e| e.channel == Channel::Cavity).count())
        .sum();
    let detected: usize = runs.iter().map(|r| r.detected_clicks()).sum();
    let frac = detected as f64 / emitted as f64;
    let sigma = (0.4 * 0.6 / emitted as f64).sqrt();
    assert!((frac - 0.4).abs() < 3.0 * sigma, "detected fraction {frac}");
}

#[test]
fn records_are_reproducible() {
    let rates = EffectiveRates::from_cooperativity(3.0, 0.5, 1.0).unwrap();
    let model = JumpModel::effective(&rates, 0, EmitterResolution::PerAtom).unwrap();
    let psi = bell_sector(true);
    let a = run_trajectory(&model, &psi, 5.0, DetectorModel::new(0.7).unwrap(), &mut StreamRng::new(42, 17)).unwrap();
    let b = run_trajectory(&model, &psi, 5.0, DetectorModel::new(0.7).unwrap(), &mut StreamRng::new(42, 17)).unwrap();
    assert_eq!(a, b);
    let c = run_trajectory(&model, &psi, 5.0, DetectorModel::new(0.7).unwrap(), &mut StreamRng::new(42, 18)).unwrap();
    assert_ne!(a.events, c.events);
}
