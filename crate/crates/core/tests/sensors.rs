use biexciton::model::{self, Collapse, LindbladModel};
use biexciton::qspace::{CompositeSpace, HilbertFactor, B, H};
use biexciton::solver::{self, g2_autocorrelation, g2_explicit, g2_map, g2_pair, liouvillian, steady_state, Engine};
use biexciton::{Channel, Drive, ModelConfig};

fn weak_case() -> LindbladModel {
    model::build(&ModelConfig::bare(200.0, 60.0)).unwrap()
}

#[test]
fn explicit_sensors_converge_as_the_coupling_halves() {
    let m = weak_case();
    let first = (Channel::SigmaH, 20.0);
    let second = (Channel::SigmaH, -60.0);
    let a = g2_explicit(&m, first, second, 5.0, 4e-3).unwrap().g2();
    let b = g2_explicit(&m, first, second, 5.0, 2e-3).unwrap().g2();
    let p = g2_pair(&m, first, second, 5.0, Engine::Perturbative).unwrap();
    assert!((a - b).abs() / b < 0.01, "halving ε moved g2 from {a} to {b}");
    assert!((b - p).abs() / p < 0.01, "explicit {b} vs leading order {p}");
}

#[test]
fn sensor_populations_agree_between_engines() {
    let m = weak_case();
    let spec = biexciton::SensorSpec::new(-30.0, 5.0, Channel::SigmaV).with_coupling(5e-3);
    let p = solver::sensor_population(&m, &spec, Engine::Perturbative).unwrap();
    let e = solver::sensor_population(&m, &spec, Engine::Explicit { fraction: 1e-3 }).unwrap();
    assert!((p - e).abs() / p < 1e-3, "{p:e} vs {e:e}");
}

#[test]
fn hh_map_is_symmetric_under_frequency_exchange() {
    let m = model::build(&ModelConfig::bare(400.0, 100.0)).unwrap();
    let w: Vec<f64> = (0..15).map(|k| -280.0 + 40.0 * k as f64).collect();
    let map = g2_map(&m, 10.0, &w, &w, (Channel::SigmaH, Channel::SigmaH), Engine::Perturbative).unwrap();
    assert!(map.asymmetry() < 1e-8, "asymmetry {:e}", map.asymmetry());
}

#[test]
fn single_sensor_autocorrelation_equals_two_identical_sensors() {
    let m = weak_case();
    for (ch, w) in [(Channel::SigmaH, 0.0), (Channel::SigmaV, 45.0), (Channel::SigmaH, -100.0)] {
        let auto = g2_autocorrelation(&m, ch, w, 8.0).unwrap();
        let pair = g2_pair(&m, (ch, w), (ch, w), 8.0, Engine::Perturbative).unwrap();
        assert!((auto - pair).abs() / pair < 1e-8, "{auto} vs {pair}");
    }
}

#[test]
fn broad_sensors_recover_the_unfiltered_correlation() {
    let m = model::build(&ModelConfig {
        drive: Drive::LinearV,
        ..ModelConfig::bare(40.0, 10.0)
    })
    .unwrap();
    let rho = steady_state(&liouvillian(&m)).unwrap();
    let (p_h, p_b) = (rho.matrix[(H, H)].re, rho.matrix[(B, B)].re);
    // σ_H†²σ_H² projects on B; σ_H†σ_H on H and B.
    let unfiltered = p_b / (p_h + p_b).powi(2);
    let filtered = g2_autocorrelation(&m, Channel::SigmaH, 0.0, 1e6).unwrap();
    assert!((filtered - unfiltered).abs() / unfiltered < 0.01, "{filtered} vs {unfiltered}");
}

/// Resonance fluorescence of a driven two-level emitter.
fn two_level(omega: f64) -> LindbladModel {
    let space = CompositeSpace::single(HilbertFactor::qubit());
    let s = space.qubit_lowering(0).unwrap();
    let h = (&s + &s.adjoint()).scale_re(omega);
    let collapse = vec![Collapse {
        op: s.clone(),
        rate: 1.0,
        label: "sigma".into(),
    }];
    LindbladModel::from_parts(h, collapse).unwrap().with_monitor(Channel::SigmaH, s)
}

/// Across the line ω₁ + ω₂ = 0 the correlation peaks and is bunched.
#[test]
fn two_level_emitter_shows_the_leapfrog_antidiagonal() {
    let m = two_level(100.0);
    let gamma = 5.0;
    let g = |w1: f64, w2: f64| {
        g2_pair(&m, (Channel::SigmaH, w1), (Channel::SigmaH, w2), gamma, Engine::Perturbative).unwrap()
    };
    for w in [-70.0, -50.0, -30.0, 30.0, 50.0, 70.0] {
        let on = g(w, -w);
        assert!(on > 1.0, "g2({w}, {}) = {on} is not bunched", -w);
        for d in [-15.0, 15.0] {
            let off = g(w + d, -w + d);
            assert!(on > off, "no ridge at ω₁ = {w}: {on} vs {off} displaced by {d}");
        }
    }
}

#[test]
fn far_detuned_sensors_see_uncorrelated_light() {
    let m = model::build(&ModelConfig::bare(400.0, 100.0)).unwrap();
    // Lines lie within ±(s + χ)/4 ≈ 270; the sensors and their sum sit far
    // from every one- and two-photon resonance.
    let g = g2_pair(&m, (Channel::SigmaH, 3000.0), (Channel::SigmaH, 3500.0), 10.0, Engine::Perturbative).unwrap();
    assert!((0.5..=2.0).contains(&g), "g2 = {g}");
}

#[test]
fn leapfrog_pair_is_hyperbunched_in_the_two_photon_map_setting() {
    let m = model::build(&ModelConfig::bare(4000.0, 1000.0)).unwrap();
    let w = biexciton::dressed::leapfrog_lines(4000.0, 1000.0).delta_iv;
    let g = g2_pair(&m, (Channel::SigmaH, w), (Channel::SigmaH, w), 10.0, Engine::Perturbative).unwrap();
    assert!(g > 10.0, "g2 = {g}");
}
