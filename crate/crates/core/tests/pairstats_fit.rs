use biexciton::pairstats::{
    cothermal_pmf, fit, fit_with, synthetic_distribution, Ansatz, CothermalParams, FitOptions, Objective,
};
use biexciton::trajectories::CountingDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quick() -> FitOptions {
    FitOptions {
        bootstrap: 0,
        ..FitOptions::default()
    }
}

#[test]
fn synthetic_parameters_are_recovered_at_a_million_windows() {
    for (k, &(l1, l2, th)) in [(0.5, 0.3, 0.2), (0.05, 1.2, 0.1), (1.0, 0.4, 0.4)].iter().enumerate() {
        let truth = CothermalParams::new(l1, l2, th).unwrap();
        let d = synthetic_distribution(&truth, 60, 1_000_000, 100 + k as u64).unwrap();
        let f = fit_with(&d, &quick()).unwrap();
        for (got, want) in f.params.to_array().iter().zip(truth.to_array()) {
            assert!((got - want).abs() < 0.05 * want, "{:?} recovered as {:?}", truth, f.params);
        }
    }
}

#[test]
fn maximum_likelihood_recovers_the_same_source() {
    let truth = CothermalParams::new(0.3, 0.5, 0.2).unwrap();
    let d = synthetic_distribution(&truth, 40, 1_000_000, 7).unwrap();
    let opts = FitOptions {
        objective: Objective::MaxLikelihood,
        ..quick()
    };
    let f = fit_with(&d, &opts).unwrap();
    for (got, want) in f.params.to_array().iter().zip(truth.to_array()) {
        assert!((got - want).abs() < 0.05 * want, "{:?}", f.params);
    }
}

#[test]
fn poisson_light_fits_without_pairs() {
    let truth = CothermalParams::new(2.0, 0.0, 0.0).unwrap();
    let exact = CountingDistribution {
        window: 1.0,
        probabilities: cothermal_pmf(&truth, 40).unwrap(),
        windows: 1_000_000,
    };
    let f = fit_with(&exact, &quick()).unwrap();
    assert!((f.params.lambda1 - 2.0).abs() < 1e-6, "{:?}", f.params);
    assert!(f.params.lambda2 <= 1e-3 && f.params.theta2 <= 1e-3, "{:?}", f.params);
    assert!(f.purity <= 1e-2);
    // Sampling noise on λ2 at 10⁶ windows is a few 10⁻³; π stays small.
    let sampled = synthetic_distribution(&truth, 40, 1_000_000, 3).unwrap();
    let f = fit_with(&sampled, &quick()).unwrap();
    assert!(f.purity <= 1e-2, "π = {}", f.purity);
}

#[test]
fn coherent_only_ansatz_pins_the_thermal_part() {
    let truth = CothermalParams::new(0.4, 0.8, 0.0).unwrap();
    let d = synthetic_distribution(&truth, 40, 200_000, 9).unwrap();
    let opts = FitOptions {
        ansatz: Ansatz::CoherentOnly,
        ..quick()
    };
    let f = fit_with(&d, &opts).unwrap();
    assert_eq!(f.params.theta2, 0.0);
    assert!((f.params.lambda2 - 0.8).abs() < 0.05 * 0.8);
}

fn sample_counts(p: &CothermalParams, n: usize, seed: u64) -> Vec<usize> {
    let pmf = cothermal_pmf(p, 60).unwrap();
    let mut cdf = Vec::with_capacity(pmf.len());
    let mut acc = 0.0;
    for v in pmf {
        acc += v;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c < u)
        })
        .collect()
}

#[test]
fn halving_the_windows_stays_within_the_bootstrap_spread() {
    let truth = CothermalParams::new(0.2, 0.3, 0.15).unwrap();
    let counts = sample_counts(&truth, 200_000, 21);
    let full = fit(&CountingDistribution::from_counts(1.0, &counts).unwrap()).unwrap();
    let half = fit(&CountingDistribution::from_counts(1.0, &counts[..100_000]).unwrap()).unwrap();
    let spread = half.purity_spread.unwrap();
    assert!(spread > 0.0);
    assert!(
        (full.purity - half.purity).abs() < spread,
        "π moved {} → {} with spread {spread}",
        full.purity,
        half.purity
    );
}

#[test]
fn sparse_histograms_are_rejected() {
    let d = CountingDistribution::from_counts(1.0, &[0, 0, 1, 0, 1]).unwrap();
    assert!(fit(&d).is_err());
}
