use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use biexciton::dressed::LineTable;
use biexciton::model::{self, Cavity, Channel, ModelConfig};
use biexciton::pairstats::{self, FitOptions, Objective};
use biexciton::scenario::{self, Preset, PurityOptions, Scenario, ScenarioOptions};
use biexciton::solver::{self, liouvillian, steady_state, Engine};
use biexciton::tomography::{log_grid, Tomographer};
use biexciton::trajectories::{self, TrajectoryConfig};
use biexciton::io;

/// Driven biexciton emission: spectra, frequency-resolved correlations,
/// photon-counting purity and two-photon tomography.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Model configuration as JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; tables go to stdout without it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Params {
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
}

#[derive(Args, Clone)]
struct Grid {
    /// Lower frequency bound; defaults to the emission span.
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    #[arg(long, default_value_t = 2001)]
    points: usize,
}

#[derive(Args, Clone)]
struct Counting {
    /// Counting window `T`.
    #[arg(long = "T", default_value_t = 10.0)]
    window: f64,
    /// Number of windows pooled over trajectories.
    #[arg(long, default_value_t = 10_000)]
    windows: usize,
    #[arg(long, default_value_t = 8)]
    ntraj: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Dressed-state transition lines.
    Lines {
        #[command(flatten)]
        params: Params,
    },
    /// Single-photon emission spectrum of one channel.
    Spectrum {
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, default_value = "sigmaH")]
        channel: String,
    },
    /// Frequency-resolved two-photon correlation map.
    G2map {
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        grid: Grid,
        /// Sensor linewidth `Γ`.
        #[arg(long, default_value_t = 10.0)]
        linewidth: f64,
        #[arg(long, default_value = "sigmaH")]
        first: String,
        #[arg(long, default_value = "sigmaH")]
        second: String,
    },
    /// Cavity observables on the four pair resonances across a log Ω grid.
    Sweep {
        #[arg(long, default_value_t = 1e2)]
        omega_min: f64,
        #[arg(long, default_value_t = 1e4)]
        omega_max: f64,
        #[arg(long, default_value_t = 60)]
        points: usize,
        #[arg(long)]
        with_purity: bool,
        #[command(flatten)]
        counting: Counting,
    },
    /// Quantum-jump trajectories; writes clicks and window counts.
    Mc {
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        counting: Counting,
    },
    /// Cothermal fit of a counting distribution.
    Purity {
        /// Counts table; simulated from the model when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        max_likelihood: bool,
        #[arg(long, default_value_t = 32)]
        bootstrap: usize,
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        counting: Counting,
    },
    /// Two-photon density matrix metrics against accumulation time.
    Tomo {
        #[command(flatten)]
        params: Params,
        #[arg(long, default_value_t = 1e-3)]
        tau_min: f64,
        #[arg(long, default_value_t = 10.0)]
        tau_max: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
    /// Figure preset.
    Scenario {
        name: String,
        /// Model field override, `key=json`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        linewidth: Option<f64>,
        #[arg(long)]
        with_purity: bool,
        #[command(flatten)]
        counting: Counting,
    },
}

struct Ctx {
    config: Option<ModelConfig>,
    out: Option<PathBuf>,
    seed: u64,
}

impl Ctx {
    fn model_config(&self, params: &Params, fallback: ModelConfig) -> Result<ModelConfig> {
        let mut cfg = self.config.clone().unwrap_or(fallback);
        if let Some(chi) = params.chi {
            cfg.chi = chi;
        }
        if let Some(omega) = params.omega {
            cfg.omega = omega;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn emit(&self, file: &str, body: &str) -> Result<()> {
        match &self.out {
            Some(dir) => {
                io::write_file(&dir.join(file), body)?;
                log::info!("wrote {}", dir.join(file).display());
            }
            None => print!("{body}"),
        }
        Ok(())
    }
}

fn span(grid: &Grid, default: f64) -> Result<Vec<f64>> {
    let lo = grid.from.unwrap_or(-default);
    let hi = grid.to.unwrap_or(default);
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) || grid.points < 2 {
        bail!("frequency grid needs from < to and at least two points");
    }
    let step = (hi - lo) / (grid.points - 1) as f64;
    Ok((0..grid.points).map(|k| lo + step * k as f64).collect())
}

fn purity_options(c: &Counting) -> PurityOptions {
    PurityOptions {
        window: c.window,
        windows: c.windows,
        trajectories: c.ntraj,
        ..PurityOptions::default()
    }
}

fn cavity_default() -> ModelConfig {
    Preset::Fig4.config()
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Some(
            ModelConfig::from_json(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
                .with_context(|| format!("parsing {}", p.display()))?,
        ),
        None => None,
    };
    let ctx = Ctx {
        config,
        out: cli.out.clone(),
        seed: cli.seed,
    };
    match cli.command {
        Command::Lines { params } => {
            let cfg = ctx.model_config(&params, ModelConfig::bare(4000.0, 1000.0))?;
            ctx.emit("lines.csv", &LineTable::new(cfg.chi, cfg.omega).to_csv())
        }
        Command::Spectrum { params, grid, channel } => {
            let cfg = ctx.model_config(&params, ModelConfig::bare(4000.0, 1000.0))?;
            let ch = Channel::parse(&channel)?;
            let grid = span(&grid, 1.1 * biexciton::dressed::root(cfg.chi, cfg.omega) / 2.0)?;
            let m = model::build(&cfg)?;
            let l = liouvillian(&m);
            let rho = steady_state(&l)?;
            let s = solver::emission_spectrum(&l, &rho, m.emission_operator(ch)?, ch.label(), &grid)?;
            ctx.emit(&format!("spectrum_{}.csv", ch.label()), &io::spectrum_to_csv(&s)?)
        }
        Command::G2map {
            params,
            grid,
            linewidth,
            first,
            second,
        } => {
            let cfg = ctx.model_config(&params, ModelConfig::bare(4000.0, 1000.0))?;
            let half = 1.1 * biexciton::dressed::one_photon_lines(cfg.chi, cfg.omega).delta_iii.abs();
            let grid = span(&Grid { points: grid.points.min(401), ..grid }, half)?;
            let ch = (Channel::parse(&first)?, Channel::parse(&second)?);
            let m = model::build(&cfg)?;
            let map = solver::g2_map(&m, linewidth, &grid, &grid, ch, Engine::Perturbative)?;
            ctx.emit(&format!("g2map_{}_{}.csv", ch.0.label(), ch.1.label()), &io::map_to_csv(&map)?)
        }
        Command::Sweep {
            omega_min,
            omega_max,
            points,
            with_purity,
            counting,
        } => {
            let cfg = ctx.model_config(&Params { chi: None, omega: None }, cavity_default())?;
            if !(omega_min > 0.0 && omega_max > omega_min) || points < 2 {
                bail!("the Ω grid needs 0 < omega-min < omega-max and two points");
            }
            let omegas = log_grid(omega_min, omega_max, points);
            let purity = with_purity.then(|| purity_options(&counting));
            let rows = scenario::resonance_sweep(&cfg, &omegas, purity.as_ref(), ctx.seed)?;
            ctx.emit("sweep.csv", &io::write_table(&[("seed", ctx.seed.to_string())], &rows)?)
        }
        Command::Mc { params, counting } => {
            let cfg = ctx.model_config(&params, cavity_default())?;
            let m = model::build(&cfg)?;
            let channel = if cfg.cavity == Cavity::None { "B->H" } else { "a" };
            let per = counting.windows.div_ceil(counting.ntraj.max(1));
            let tc = TrajectoryConfig::new(counting.window * per as f64, counting.window, counting.ntraj, ctx.seed)
                .with_channels(&[channel]);
            let records = trajectories::run(&m, &tc)?;
            let dist = trajectories::counting_distribution(&records, counting.window, channel)?;
            ctx.emit("clicks.csv", &io::clicks_to_csv(&records)?)?;
            ctx.emit("counts.csv", &io::counting_to_csv(&dist)?)
        }
        Command::Purity {
            input,
            max_likelihood,
            bootstrap,
            params,
            counting,
        } => {
            let dist = match input {
                Some(p) => io::counting_from_csv(&std::fs::read_to_string(&p)?)?,
                None => {
                    let cfg = ctx.model_config(&params, cavity_default())?;
                    let m = model::build(&cfg)?;
                    let opts = purity_options(&counting);
                    let per = opts.windows.div_ceil(opts.trajectories.max(1));
                    let tc = TrajectoryConfig::new(opts.window * per as f64, opts.window, opts.trajectories, ctx.seed);
                    let records = trajectories::run(&m, &tc)?;
                    trajectories::counting_distribution(&records, opts.window, "a")?
                }
            };
            let opts = FitOptions {
                objective: if max_likelihood {
                    Objective::MaxLikelihood
                } else {
                    Objective::LeastSquares
                },
                bootstrap,
                seed: ctx.seed,
                ..FitOptions::default()
            };
            let fit = pairstats::fit_with(&dist, &opts)?;
            ctx.emit("purity.json", &format!("{}\n", io::to_json(&fit)?))
        }
        Command::Tomo {
            params,
            tau_min,
            tau_max,
            points,
        } => {
            let cfg = ctx.model_config(&params, Preset::Fig5.config())?;
            if cfg.cavity != Cavity::DualHV {
                bail!("tomography needs the dual-polarization cavity");
            }
            if !(tau_min > 0.0 && tau_max > tau_min) || points < 2 {
                bail!("the τ grid needs 0 < tau-min < tau-max and two points");
            }
            let tomo = Tomographer::new(&model::build(&cfg)?)?;
            let series = tomo.series(&log_grid(tau_min, tau_max, points))?;
            ctx.emit("tomography.csv", &io::tomography_to_csv(&series)?)
        }
        Command::Scenario {
            name,
            set,
            resolution,
            linewidth,
            with_purity,
            counting,
        } => {
            let Some(out) = ctx.out.clone() else {
                bail!("scenario runs need --out");
            };
            let mut s = Scenario::new(Preset::parse(&name)?, &out);
            if let Some(cfg) = &ctx.config {
                if let Value::Object(map) = serde_json::to_value(cfg)? {
                    s.overrides = map;
                }
            }
            for kv in &set {
                let (k, v) = kv.split_once('=').with_context(|| format!("override `{kv}` is not key=value"))?;
                let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
                s.overrides.insert(k.to_string(), value);
            }
            s.options = ScenarioOptions {
                seed: ctx.seed,
                resolution,
                linewidth,
                purity: with_purity.then(|| purity_options(&counting)),
            };
            let m = scenario::run_scenario(&s)?;
            log::info!("{} finished in {:.1} s", m.scenario, m.wall_time);
            for o in &m.outputs {
                println!("{}  {}", o.sha256, Path::new(&out).join(&o.file).display());
            }
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
