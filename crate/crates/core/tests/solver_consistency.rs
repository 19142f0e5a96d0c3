use std::f64::consts::PI;

use biexciton::dressed;
use biexciton::linalg;
use biexciton::model;
use biexciton::solver::{
    emission_spectrum, emission_spectrum_resolvent, liouvillian, steady_state, steady_state_by_propagation,
};
use biexciton::{Cavity, Channel, Drive, ModelConfig};

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn cases() -> Vec<ModelConfig> {
    vec![
        ModelConfig::bare(2000.0, 500.0),
        ModelConfig {
            drive: Drive::Circular,
            ..ModelConfig::bare(400.0, 150.0)
        },
        ModelConfig {
            g: 100.0,
            kappa: 10.0,
            cavity: Cavity::SingleH,
            n_max: Some(4),
            delta_c: dressed::leapfrog_lines(4000.0, 1000.0).delta_iv,
            ..ModelConfig::bare(4000.0, 1000.0)
        },
    ]
}

#[test]
fn steady_state_is_a_valid_kernel_vector() {
    for cfg in cases() {
        let l = liouvillian(&model::build(&cfg).unwrap());
        let rho = steady_state(&l).unwrap();
        let scale = l.scale().max(1.0);
        assert!(rho.residual < 1e-10 * scale, "residual {:e}", rho.residual);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        assert!(rho.trace().im.abs() < 1e-12);
        assert!(rho.hermiticity_defect() < 1e-10);
        assert!(rho.min_eigenvalue().unwrap() > -1e-10);
    }
}

#[test]
fn kernel_and_long_time_propagation_agree() {
    for cfg in cases() {
        let l = liouvillian(&model::build(&cfg).unwrap());
        let a = steady_state(&l).unwrap();
        let b = steady_state_by_propagation(&l).unwrap();
        let gap = linalg::max_abs_diff(&a.matrix, &b.matrix);
        assert!(gap < 1e-6, "steady states differ by {gap:e}");
    }
}

#[test]
fn eigen_and_resolvent_spectra_agree() {
    let cfg = ModelConfig::bare(2000.0, 500.0);
    let m = model::build(&cfg).unwrap();
    let l = liouvillian(&m);
    let rho = steady_state(&l).unwrap();
    let w = grid(-2000.0, 2000.0, 801);
    for ch in [Channel::SigmaH, Channel::SigmaV] {
        let op = m.emission_operator(ch).unwrap();
        let a = emission_spectrum(&l, &rho, op, ch.label(), &w).unwrap();
        let b = emission_spectrum_resolvent(&l, &rho, op, ch.label(), &w).unwrap();
        let peak = a.max_value();
        let worst = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6 * peak, "{}: {worst:e} of {peak:e}", ch.label());
    }
}

#[test]
fn spectrum_integrates_to_the_emitter_population() {
    for cfg in cases().into_iter().take(2) {
        let m = model::build(&cfg).unwrap();
        let l = liouvillian(&m);
        let rho = steady_state(&l).unwrap();
        let half = 1.3 * dressed::root(cfg.chi, cfg.omega) / 2.0;
        let w = grid(-half, half, 40_001);
        for ch in [Channel::SigmaH, Channel::SigmaV] {
            let s = emission_spectrum(&l, &rho, m.emission_operator(ch).unwrap(), ch.label(), &w).unwrap();
            let expected = PI * s.population;
            let rel = (s.total_integral() - expected).abs() / expected;
            assert!(rel < 0.02, "{}: sum rule off by {rel:.3e}", ch.label());
        }
    }
}

/// Lines several linewidths apart; at Ω ≪ χ the ±Δ_I pair merges near ω_L.
#[test]
fn spectral_peaks_sit_on_the_dressed_lines() {
    for (chi, omega) in [(2000.0, 500.0), (4000.0, 1000.0), (1000.0, 100.0), (400.0, 40.0), (500.0, 2000.0)] {
        let m = model::build(&ModelConfig::bare(chi, omega)).unwrap();
        let l = liouvillian(&m);
        let rho = steady_state(&l).unwrap();
        let lines = dressed::one_photon_lines(chi, omega).all();
        let half = 1.1 * lines.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let w = grid(-half, half, (2.0 * half / 0.1) as usize + 1);
        let s = emission_spectrum(&l, &rho, m.emission_operator(Channel::SigmaH).unwrap(), "sigmaH", &w).unwrap();
        let peaks = s.peaks(1e-3);
        for line in lines {
            let nearest = peaks.iter().map(|p| (p - line).abs()).fold(f64::INFINITY, f64::min);
            assert!(nearest < 0.5, "χ={chi} Ω={omega}: no peak within γ/2 of {line} (nearest {nearest})");
        }
    }
}

#[test]
fn h_spectrum_is_dark_at_the_laser_frequency() {
    let m = model::build(&ModelConfig::bare(2000.0, 500.0)).unwrap();
    let l = liouvillian(&m);
    let rho = steady_state(&l).unwrap();
    let w = grid(-2000.0, 2000.0, 8001);
    let s = emission_spectrum(&l, &rho, m.emission_operator(Channel::SigmaH).unwrap(), "sigmaH", &w).unwrap();
    assert!(s.value_at(0.0) < 0.01 * s.max_value());
    assert!(s.coherent_weight < 1e-20);
}
