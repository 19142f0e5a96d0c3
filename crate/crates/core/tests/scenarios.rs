use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use biexciton::dressed::LineTable;
use biexciton::io::{self, MatrixRecord, SweepRow, SWEEP_COLUMNS};
use biexciton::scenario::{
    run_scenario, verify_outputs, Manifest, Preset, Scenario, ScenarioOptions, CAVITY_SPECTRUM_COLUMNS,
    DIAGONAL_MAP_COLUMNS, MANIFEST_FILE, POLARIZED_DIAGONAL_COLUMNS, POPULATION_COLUMNS, SNAPSHOT_TAUS,
};
use serde_json::Value;

fn run(preset: Preset, resolution: usize, dir: &Path) -> Manifest {
    let mut s = Scenario::new(preset, dir);
    s.options = ScenarioOptions {
        seed: 5,
        resolution: Some(resolution),
        ..ScenarioOptions::default()
    };
    run_scenario(&s).unwrap()
}

fn digests(m: &Manifest) -> BTreeMap<String, String> {
    m.outputs.iter().map(|o| (o.file.clone(), o.sha256.clone())).collect()
}

fn read(dir: &Path, file: &str) -> String {
    fs::read_to_string(dir.join(file)).unwrap()
}

/// Every table parses back through its schema with the expected row count.
fn check_parses(preset: Preset, resolution: usize, dir: &Path, m: &Manifest) {
    let (chi, omega) = (m.config.chi, m.config.omega);
    let lines = |d: &Path| assert_eq!(LineTable::from_csv(chi, omega, &read(d, "lines.csv")).unwrap(), LineTable::new(chi, omega));
    match preset {
        Preset::Fig1c => {
            lines(dir);
            for f in ["spectrum_sigmaH.csv", "spectrum_sigmaV.csv"] {
                assert_eq!(io::spectrum_from_csv(&read(dir, f)).unwrap().grid.len(), resolution);
            }
        }
        Preset::Fig2a => {
            lines(dir);
            let map = io::map_from_csv(&read(dir, "g2map_sigmaH.csv")).unwrap();
            assert_eq!(map.w1.len() * map.w2.len(), map.g2.len());
        }
        Preset::Fig3 => {
            lines(dir);
            let rows: Vec<(f64, f64, f64)> = io::read_table(&read(dir, "diagonal_map.csv"), &DIAGONAL_MAP_COLUMNS).unwrap();
            let mut omegas: Vec<f64> = rows.iter().map(|r| r.0).collect();
            omegas.dedup();
            assert_eq!(omegas.len(), resolution);
            let cut: Vec<io::DiagonalRow> = io::read_table(&read(dir, "diagonal_cut.csv"), &io::DIAGONAL_COLUMNS).unwrap();
            assert!(cut.iter().all(|r| r.g2.is_finite() && r.g2 > 0.0));
        }
        Preset::Fig4 => {
            let rows: Vec<SweepRow> = io::read_table(&read(dir, "sweep.csv"), &SWEEP_COLUMNS).unwrap();
            assert_eq!(rows.len(), 4 * resolution);
            assert!(rows.iter().all(|r| r.pi.is_none() && r.n_a > 0.0));
        }
        Preset::Fig5 => {
            let diag: Vec<(f64, f64, f64)> =
                io::read_table(&read(dir, "polarized_diagonal.csv"), &POLARIZED_DIAGONAL_COLUMNS).unwrap();
            assert!(!diag.is_empty());
            assert_eq!(io::polarization_from_csv(&read(dir, "polarization.csv")).unwrap().len(), resolution);
            assert_eq!(io::tomography_from_csv(&read(dir, "tomography.csv")).unwrap().len(), resolution);
            let recs: Vec<MatrixRecord> = serde_json::from_str(&read(dir, "density_matrices.json")).unwrap();
            assert_eq!(recs.len(), SNAPSHOT_TAUS.len());
            for r in recs {
                r.to_matrix().unwrap();
            }
        }
        Preset::Fig2b => {
            let spectra: Vec<(f64, f64, f64)> =
                io::read_table(&read(dir, "cavity_spectra.csv"), &CAVITY_SPECTRUM_COLUMNS).unwrap();
            let pops: Vec<(f64, f64)> = io::read_table(&read(dir, "cavity_population.csv"), &POPULATION_COLUMNS).unwrap();
            assert_eq!(pops.len(), resolution);
            assert_eq!(spectra.len() % resolution, 0);
        }
    }
}

#[test]
fn scenarios_are_reproducible_and_round_trip() {
    for (preset, resolution) in [(Preset::Fig1c, 41), (Preset::Fig2a, 5), (Preset::Fig3, 3), (Preset::Fig4, 3), (Preset::Fig5, 5)] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = run(preset, resolution, a.path());
        let mb = run(preset, resolution, b.path());
        assert_eq!(digests(&ma), digests(&mb), "{} is not deterministic", preset.name());
        assert_eq!(ma.hash, mb.hash);

        let back = verify_outputs(a.path()).unwrap();
        assert_eq!(digests(&back), digests(&ma));
        let raw: Value = serde_json::from_str(&read(a.path(), MANIFEST_FILE)).unwrap();
        for key in ["config", "seed", "version", "outputs", "hash"] {
            assert!(raw.get(key).is_some(), "manifest lacks `{key}`");
        }
        check_parses(preset, resolution, a.path(), &ma);
    }
}

#[test]
fn tampered_outputs_fail_verification() {
    let dir = tempfile::tempdir().unwrap();
    run(Preset::Fig1c, 11, dir.path());
    fs::write(dir.path().join("spectrum_sigmaH.csv"), "detuning,value\n0,1\n").unwrap();
    assert!(verify_outputs(dir.path()).is_err());
}

#[test]
fn the_seed_enters_the_manifest_hash() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run(Preset::Fig1c, 11, a.path());
    let mut s = Scenario::new(Preset::Fig1c, b.path());
    s.options = ScenarioOptions {
        seed: 6,
        resolution: Some(11),
        ..ScenarioOptions::default()
    };
    let mb = run_scenario(&s).unwrap();
    assert_ne!(ma.hash, mb.hash);
    assert_eq!(mb.seed, 6);
}
