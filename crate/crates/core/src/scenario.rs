//! Named presets that regenerate each figure's data tables, with a run
//! manifest recording inputs and output digests.
//!
//! Outputs depend only on the preset, the overrides, the options and the
//! seed; the manifest's `wall_time` is the single non-reproducible field.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::dressed::{self, LineTable, TRACK_LABELS};
use crate::error::{Error, Result};
use crate::io::{self, DiagonalRow, MatrixRecord, SweepRow};
use crate::model::{self, Cavity, Channel, Drive, LindbladModel, ModelConfig};
use crate::pairstats::{self, CothermalFit, FitOptions};
use crate::solver::{self, cavity_observables, liouvillian, steady_state};
use crate::tomography::{log_grid, Tomographer};
use crate::trajectories::{self, TrajectoryConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1c,
    Fig2a,
    Fig2b,
    Fig3,
    Fig4,
    Fig5,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Fig1c,
        Preset::Fig2a,
        Preset::Fig2b,
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1c => "fig1c",
            Preset::Fig2a => "fig2a",
            Preset::Fig2b => "fig2b",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }

    /// Preset model parameters. Swept quantities hold the
    /// value of the reference cut.
    pub fn config(self) -> ModelConfig {
        match self {
            Preset::Fig1c => ModelConfig::bare(2000.0, 500.0),
            Preset::Fig2a | Preset::Fig3 => ModelConfig::bare(4000.0, 1000.0),
            Preset::Fig2b => ModelConfig {
                g: 100.0,
                kappa: 10.0,
                cavity: Cavity::SingleH,
                ..ModelConfig::bare(4000.0, 1000.0)
            },
            Preset::Fig4 => ModelConfig {
                g: 100.0,
                kappa: 10.0,
                delta_x: Some(2000.0),
                cavity: Cavity::SingleH,
                n_max: Some(8),
                ..ModelConfig::bare(4000.0, 1000.0)
            },
            Preset::Fig5 => ModelConfig {
                g: 100.0,
                kappa: 10.0,
                delta_x: Some(2000.0),
                delta_c: dressed::leapfrog_lines(4000.0, 8000.0).delta_iv,
                drive: Drive::Circular,
                cavity: Cavity::DualHV,
                n_max: Some(2),
                ..ModelConfig::bare(4000.0, 8000.0)
            },
        }
    }

    /// Sensor linewidth `Γ` for the frequency-filtered panels.
    pub fn linewidth(self) -> Option<f64> {
        match self {
            Preset::Fig2a | Preset::Fig3 | Preset::Fig5 => Some(10.0),
            _ => None,
        }
    }

    /// Point count along the principal axis.
    pub fn default_resolution(self) -> usize {
        match self {
            Preset::Fig1c => 8001,
            Preset::Fig2a => 401,
            Preset::Fig2b => 121,
            Preset::Fig3 => 61,
            Preset::Fig4 => 60,
            Preset::Fig5 => 41,
        }
    }
}

/// Monte Carlo purity settings per sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PurityOptions {
    pub window: f64,
    pub windows: usize,
    pub trajectories: usize,
    pub bootstrap: usize,
}

impl Default for PurityOptions {
    fn default() -> Self {
        Self {
            window: 10.0,
            windows: 10_000,
            trajectories: 8,
            bootstrap: 32,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOptions {
    pub seed: u64,
    /// Principal-axis point count; secondary axes scale with it.
    #[serde(default)]
    pub resolution: Option<usize>,
    /// Sensor linewidth replacing the preset's `Γ`.
    #[serde(default)]
    pub linewidth: Option<f64>,
    /// Runs the Monte Carlo purity estimate where the preset supports it.
    #[serde(default)]
    pub purity: Option<PurityOptions>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub preset: Preset,
    /// Top-level `ModelConfig` fields replacing the preset's.
    pub overrides: Map<String, Value>,
    pub out_dir: PathBuf,
    pub options: ScenarioOptions,
}

impl Scenario {
    pub fn new(preset: Preset, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            preset,
            overrides: Map::new(),
            out_dir: out_dir.into(),
            options: ScenarioOptions::default(),
        }
    }

    pub fn with_override(mut self, key: &str, value: Value) -> Self {
        self.overrides.insert(key.to_string(), value);
        self
    }

    /// Preset configuration with the overrides applied and validated.
    pub fn config(&self) -> Result<ModelConfig> {
        let mut v = serde_json::to_value(self.preset.config())?;
        let obj = v.as_object_mut().expect("config serializes to an object");
        for (k, val) in &self.overrides {
            obj.insert(k.clone(), val.clone());
        }
        let mut cfg: ModelConfig = serde_json::from_value(v).map_err(|e| Error::Config(format!("override: {e}")))?;
        // The pair resonance follows χ and Ω unless pinned explicitly.
        if self.preset == Preset::Fig5 && !self.overrides.contains_key("delta_c") {
            cfg.delta_c = dressed::leapfrog_lines(cfg.chi, cfg.omega).delta_iv;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn linewidth(&self) -> Result<f64> {
        let g = self.options.linewidth.or(self.preset.linewidth()).unwrap_or(10.0);
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::Config("sensor linewidth must be positive".into()));
        }
        Ok(g)
    }

    fn resolution(&self) -> Result<usize> {
        let n = self.options.resolution.unwrap_or(self.preset.default_resolution());
        if n < 3 {
            return Err(Error::Config("resolution must be at least 3".into()));
        }
        Ok(n)
    }

    /// Secondary-axis count: `default` at the preset resolution, scaled.
    fn scaled(&self, default: usize) -> Result<usize> {
        let n = self.resolution()?;
        let base = self.preset.default_resolution();
        Ok(((default as f64 * n as f64 / base as f64).round() as usize).max(3))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub config: ModelConfig,
    pub overrides: Map<String, Value>,
    pub options: ScenarioOptions,
    pub seed: u64,
    pub version: String,
    /// Digest of every input above.
    pub hash: String,
    pub outputs: Vec<OutputFile>,
    pub wall_time: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn hex_digest(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in d {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| if k + 1 == n { hi } else { lo + step * k as f64 }).collect()
}

/// Runs the preset, writes its tables, then the manifest.
pub fn run_scenario(s: &Scenario) -> Result<Manifest> {
    let start = Instant::now();
    if !s.out_dir.is_dir() {
        return Err(Error::Config(format!("output directory {} does not exist", s.out_dir.display())));
    }
    let config = s.config()?;
    let files = match s.preset {
        Preset::Fig1c => fig1c(s, &config)?,
        Preset::Fig2a => fig2a(s, &config)?,
        Preset::Fig2b => fig2b(s, &config)?,
        Preset::Fig3 => fig3(s, &config)?,
        Preset::Fig4 => fig4(s, &config)?,
        Preset::Fig5 => fig5(s, &config)?,
    };
    let mut all = vec![("config.json".to_string(), config.to_json())];
    all.extend(files);
    let mut outputs = Vec::with_capacity(all.len());
    for (name, body) in &all {
        io::write_file(&s.out_dir.join(name), body)?;
        outputs.push(OutputFile {
            file: name.clone(),
            sha256: hex_digest(body.as_bytes()),
        });
    }
    let inputs = serde_json::json!({
        "scenario": s.preset.name(),
        "config": config,
        "overrides": s.overrides,
        "options": s.options,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let manifest = Manifest {
        scenario: s.preset.name().to_string(),
        config,
        overrides: s.overrides.clone(),
        options: s.options.clone(),
        seed: s.options.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        hash: hex_digest(serde_json::to_string(&inputs)?.as_bytes()),
        outputs,
        wall_time: start.elapsed().as_secs_f64(),
    };
    io::write_file(&s.out_dir.join(MANIFEST_FILE), &io::to_json(&manifest)?)?;
    Ok(manifest)
}

/// Reads a manifest back and checks every listed digest.
pub fn verify_outputs(dir: &Path) -> Result<Manifest> {
    let m: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    for o in &m.outputs {
        let body = std::fs::read(dir.join(&o.file))?;
        if hex_digest(&body) != o.sha256 {
            return Err(Error::Input(format!("{} does not match its recorded digest", o.file)));
        }
    }
    Ok(m)
}

type Files = Vec<(String, String)>;

fn emission(model: &LindbladModel, channel: Channel, grid: &[f64]) -> Result<solver::SpectrumResult> {
    let l = liouvillian(model);
    let rho = steady_state(&l)?;
    solver::emission_spectrum(&l, &rho, model.emission_operator(channel)?, channel.label(), grid)
}

fn fig1c(s: &Scenario, cfg: &ModelConfig) -> Result<Files> {
    let half = 1.1 * dressed::root(cfg.chi, cfg.omega) / 2.0;
    let grid = linspace(-half, half, s.resolution()?);
    let m = model::build(cfg)?;
    let mut out = vec![("lines.csv".to_string(), LineTable::new(cfg.chi, cfg.omega).to_csv())];
    for ch in [Channel::SigmaH, Channel::SigmaV] {
        let spec = emission(&m, ch, &grid)?;
        out.push((format!("spectrum_{}.csv", ch.label()), io::spectrum_to_csv(&spec)?));
    }
    Ok(out)
}

fn fig2a(s: &Scenario, cfg: &ModelConfig) -> Result<Files> {
    let half = 1.1 * dressed::one_photon_lines(cfg.chi, cfg.omega).delta_iii.abs();
    let grid = linspace(-half, half, s.resolution()?);
    let m = model::build(cfg)?;
    let ch = (Channel::SigmaH, Channel::SigmaH);
    let map = solver::g2_map(&m, s.linewidth()?, &grid, &grid, ch, solver::Engine::Perturbative)?;
    Ok(vec![
        ("lines.csv".into(), LineTable::new(cfg.chi, cfg.omega).to_csv()),
        ("g2map_sigmaH.csv".into(), io::map_to_csv(&map)?),
    ])
}

#[derive(Serialize, Deserialize)]
struct CavitySpectrumRow {
    delta_c: f64,
    detuning: f64,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct PopulationRow {
    delta_c: f64,
    n_a: f64,
}

pub const CAVITY_SPECTRUM_COLUMNS: [&str; 3] = ["delta_c", "detuning", "value"];
pub const POPULATION_COLUMNS: [&str; 2] = ["delta_c", "n_a"];

fn fig2b(s: &Scenario, cfg: &ModelConfig) -> Result<Files> {
    let half = 1.1 * dressed::one_photon_lines(cfg.chi, cfg.omega).delta_iii.abs();
    let cavities = linspace(-half, half, s.resolution()?);
    let grid = linspace(-half, half, s.scaled(6401)?);
    let per_point = cavities
        .par_iter()
        .map(|&dc| {
            let m = model::build(&ModelConfig { delta_c: dc, ..cfg.clone() })?;
            let l = liouvillian(&m);
            let rho = steady_state(&l)?;
            let a = m.emission_operator(Channel::A)?;
            let spec = solver::emission_spectrum(&l, &rho, a, Channel::A.label(), &grid)?;
            let n_a = cavity_observables(&m, &rho, Channel::A)?.n_a;
            Ok((spec, n_a))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(cavities.len() * grid.len());
    let mut pops = Vec::with_capacity(cavities.len());
    for (&dc, (spec, n_a)) in cavities.iter().zip(&per_point) {
        rows.extend(spec.grid.iter().zip(&spec.values).map(|(&w, &v)| CavitySpectrumRow {
            delta_c: dc,
            detuning: w,
            value: v,
        }));
        pops.push(PopulationRow { delta_c: dc, n_a: *n_a });
    }
    Ok(vec![
        ("cavity_spectra.csv".into(), io::write_table(&[], &rows)?),
        ("cavity_population.csv".into(), io::write_table(&[], &pops)?),
    ])
}

#[derive(Serialize, Deserialize)]
struct DiagonalMapRow {
    omega: f64,
    w: f64,
    g2: f64,
}

pub const DIAGONAL_MAP_COLUMNS: [&str; 3] = ["omega", "w", "g2"];

fn fig3(s: &Scenario, cfg: &ModelConfig) -> Result<Files> {
    let gamma = s.linewidth()?;
    let omegas = log_grid(10.0, 1e4, s.resolution()?);
    let half = 1.1 * dressed::leapfrog_lines(cfg.chi, 1e4).delta_iv;
    let grid = linspace(-half, half, s.scaled(2001)?);
    let ch = (Channel::SigmaH, Channel::SigmaH);
    let diag = |omega: f64, grid: &[f64]| -> Result<Vec<f64>> {
        let m = model::build(&ModelConfig { omega, ..cfg.clone() })?;
        solver::g2_diagonal(&m, gamma, grid, ch)
    };
    let rows = omegas
        .par_iter()
        .map(|&om| diag(om, &grid))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Vec::with_capacity(omegas.len() * grid.len());
    for (&om, row) in omegas.iter().zip(&rows) {
        table.extend(grid.iter().zip(row).map(|(&w, &g2)| DiagonalMapRow { omega: om, w, g2 }));
    }
    let cut_half = 1.1 * dressed::leapfrog_lines(cfg.chi, cfg.omega).delta_iv;
    let cut_grid = linspace(-cut_half, cut_half, s.scaled(2001)?);
    let cut: Vec<DiagonalRow> = cut_grid
        .iter()
        .zip(diag(cfg.omega, &cut_grid)?)
        .map(|(&w, g2)| DiagonalRow { w, g2 })
        .collect();
    let meta = [("omega", cfg.omega.to_string()), ("linewidth", gamma.to_string())];
    Ok(vec![
        ("lines.csv".into(), LineTable::new(cfg.chi, cfg.omega).to_csv()),
        ("diagonal_map.csv".into(), io::write_table(&[("linewidth", gamma.to_string())], &table)?),
        ("diagonal_cut.csv".into(), io::write_table(&meta, &cut)?),
    ])
}

/// Cavity counts through the `√κ a` jump channel and their cothermal fit.
pub fn mc_purity(model: &LindbladModel, opts: &PurityOptions, seed: u64) -> Result<CothermalFit> {
    if opts.trajectories == 0 || opts.windows == 0 {
        return Err(Error::Config("purity needs trajectories and windows".into()));
    }
    let per_traj = opts.windows.div_ceil(opts.trajectories);
    let tc = TrajectoryConfig::new(opts.window * per_traj as f64, opts.window, opts.trajectories, seed);
    let records = trajectories::run(model, &tc)?;
    let dist = trajectories::counting_distribution(&records, opts.window, "a")?;
    pairstats::fit_with(
        &dist,
        &FitOptions {
            bootstrap: opts.bootstrap,
            seed,
            ..FitOptions::default()
        },
    )
}

/// Sweep seed for point `k`; distinct points draw disjoint streams.
fn point_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Steady-state cavity observables with the cavity on each pair resonance,
/// across the drive amplitudes `omegas`.
pub fn resonance_sweep(
    base: &ModelConfig,
    omegas: &[f64],
    purity: Option<&PurityOptions>,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if base.cavity != Cavity::SingleH {
        return Err(Error::Config("resonance sweeps need a single H cavity".into()));
    }
    let points: Vec<(f64, usize)> = omegas.iter().flat_map(|&om| (0..4).map(move |k| (om, k))).collect();
    points
        .par_iter()
        .enumerate()
        .map(|(idx, &(omega, k))| {
            let delta_c = dressed::leapfrog_lines(base.chi, omega).tracks()[k];
            let m = model::build(&ModelConfig {
                omega,
                delta_c,
                ..base.clone()
            })?;
            let rho = steady_state(&liouvillian(&m))?;
            let obs = cavity_observables(&m, &rho, Channel::A)?;
            let fit = purity.map(|p| mc_purity(&m, p, point_seed(seed, idx))).transpose()?;
            Ok(SweepRow {
                resonance: TRACK_LABELS[k].to_string(),
                omega,
                delta_c,
                n_a: obs.n_a,
                g2_0: obs.g2_0,
                g2_2_0: obs.g2_2_0,
                pi: fit.as_ref().map(|f| f.purity),
                pi_theta: fit.as_ref().map(|f| f.purity_thermal),
                pi_lambda: fit.as_ref().map(|f| f.purity_coherent),
                pi_spread: fit.as_ref().and_then(|f| f.purity_spread),
            })
        })
        .collect()
}

fn fig4(s: &Scenario, cfg: &ModelConfig) -> Result<Files> {
    let omegas = log_grid(1e2, 1e4, s.resolution()?);
    let rows = resonance_sweep(cfg, &omegas, s.options.purity.as_ref(), s.options.seed)?;
    let meta = [("seed", s.options.seed.to_string())];
    Ok(vec![("sweep.csv".into(), io::write_table(&meta, &rows)?)])
}

#[derive(Serialize, Deserialize)]
struct PolarizedDiagonalRow {
    w: f64,
    g2_hh: f64,
    g2_hv: f64,
}

pub const POLARIZED_DIAGONAL_COLUMNS: [&str; 3] = ["w", "g2_hh", "g2_hv"];

/// Accumulation times of the two density-matrix snapshots.
pub const SNAPSHOT_TAUS: [f64; 2] = [0.01, 1.0];

fn fig5(s: &Scenario, cfg: &ModelConfig) -> Result<Files> {
    let n = s.resolution()?;
    let gamma = s.linewidth()?;
    // (a) the bare emitter under the same drive.
    let bare = model::build(&ModelConfig {
        g: 0.0,
        kappa: 0.0,
        cavity: Cavity::None,
        n_max: None,
        ..cfg.clone()
    })?;
    let half = 1.2 * dressed::leapfrog_lines(cfg.chi, cfg.omega).delta_iv;
    let grid = linspace(-half, half, s.scaled(2001)?);
    let hh = solver::g2_diagonal(&bare, gamma, &grid, (Channel::SigmaH, Channel::SigmaH))?;
    let hv = solver::g2_diagonal(&bare, gamma, &grid, (Channel::SigmaH, Channel::SigmaV))?;
    let diag: Vec<PolarizedDiagonalRow> = grid
        .iter()
        .zip(hh.iter().zip(&hv))
        .map(|(&w, (&g2_hh, &g2_hv))| PolarizedDiagonalRow { w, g2_hh, g2_hv })
        .collect();
    // (b) cavity correlations around the pair resonance.
    let dcs = linspace(cfg.delta_c - 100.0, cfg.delta_c + 100.0, n);
    let pol = solver::polarization_correlations(cfg, &dcs)?;
    // (c, d) tomography at the nominal cavity detuning.
    let tomo = Tomographer::new(&model::build(cfg)?)?;
    let series = tomo.series(&log_grid(1e-3, 10.0, n))?;
    let snapshots = SNAPSHOT_TAUS
        .iter()
        .map(|&t| Ok(MatrixRecord::new(&tomo.theta(t)?.normalize()?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![
        (
            "polarized_diagonal.csv".into(),
            io::write_table(&[("linewidth", gamma.to_string())], &diag)?,
        ),
        ("polarization.csv".into(), io::polarization_to_csv(&pol)?),
        ("tomography.csv".into(), io::tomography_to_csv(&series)?),
        ("density_matrices.json".into(), io::to_json(&snapshots)?),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Preset parameters, frozen.
    #[test]
    fn preset_table() {
        let expect: [(Preset, f64, f64, f64, f64, Drive, Cavity); 6] = [
            (Preset::Fig1c, 2000.0, 500.0, 0.0, 0.0, Drive::LinearV, Cavity::None),
            (Preset::Fig2a, 4000.0, 1000.0, 0.0, 0.0, Drive::LinearV, Cavity::None),
            (Preset::Fig2b, 4000.0, 1000.0, 100.0, 10.0, Drive::LinearV, Cavity::SingleH),
            (Preset::Fig3, 4000.0, 1000.0, 0.0, 0.0, Drive::LinearV, Cavity::None),
            (Preset::Fig4, 4000.0, 1000.0, 100.0, 10.0, Drive::LinearV, Cavity::SingleH),
            (Preset::Fig5, 4000.0, 8000.0, 100.0, 10.0, Drive::Circular, Cavity::DualHV),
        ];
        for (p, chi, omega, g, kappa, drive, cavity) in expect {
            let c = p.config();
            assert_eq!((c.chi, c.omega, c.g, c.kappa), (chi, omega, g, kappa), "{}", p.name());
            assert_eq!((c.drive, c.cavity), (drive, cavity), "{}", p.name());
            assert_eq!(c.gamma, 1.0);
            assert_eq!(c.delta_x(), c.chi / 2.0);
            assert_eq!(Preset::parse(p.name()).unwrap(), p);
        }
        assert_eq!(Preset::Fig2a.linewidth(), Some(10.0));
        assert_eq!(Preset::Fig3.linewidth(), Some(10.0));
        assert_eq!(Preset::Fig4.default_resolution(), 60);
        let s5 = (4000.0f64.powi(2) + 32.0 * 8000.0f64.powi(2)).sqrt() / 4.0;
        assert!((Preset::Fig5.config().delta_c - s5).abs() < 1e-9);
    }

    #[test]
    fn overrides_merge_and_validate() {
        let s = Scenario::new(Preset::Fig5, ".").with_override("omega", Value::from(6000.0));
        let c = s.config().unwrap();
        assert_eq!(c.omega, 6000.0);
        assert_eq!(c.delta_c, dressed::leapfrog_lines(4000.0, 6000.0).delta_iv);
        let bad = Scenario::new(Preset::Fig1c, ".").with_override("chi", Value::from(-1.0));
        assert!(matches!(bad.config(), Err(Error::Config(_))));
        let unknown = Scenario::new(Preset::Fig1c, ".").with_override("chii", Value::from(1.0));
        assert!(matches!(unknown.config(), Err(Error::Config(_))));
        assert!(Preset::parse("fig9").is_err());
    }

    #[test]
    fn missing_directory() {
        let s = Scenario::new(Preset::Fig1c, "/nonexistent/biexciton-out");
        assert!(matches!(run_scenario(&s), Err(Error::Config(_))));
    }
}
