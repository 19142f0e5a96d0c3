//! Quantum-jump unraveling of the master equation.
//!
//! Between jumps the unnormalized state follows `ψ' = −i H_eff ψ` with
//! `H_eff = H − (i/2) Σ_k γ_k L_k† L_k`. A jump happens when the squared
//! norm decays to a uniform draw `r`; the channel is chosen with
//! probability `∝ γ_k ‖L_k ψ‖²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Spectral, C64, I, ZERO};
use crate::model::LindbladModel;

/// Relative precision on jump times.
const JUMP_TOL: f64 = 1e-10;
/// Condition number above which the eigenbasis propagator is abandoned.
const COND_LIMIT: f64 = 1e8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// Recorded span per trajectory, after the warm-up.
    pub total_time: f64,
    /// Counting window `T`.
    pub window: f64,
    pub n_trajectories: usize,
    pub seed: u64,
    /// Collapse labels whose clicks are stored; empty records none.
    pub channels: Vec<String>,
    /// Discarded initial span; defaults to `50/κ`, or `50/γ` without a
    /// cavity.
    pub warmup: Option<f64>,
    /// Interval for sampling level populations; `None` disables sampling.
    pub sample_interval: Option<f64>,
}

impl TrajectoryConfig {
    pub fn new(total_time: f64, window: f64, n_trajectories: usize, seed: u64) -> Self {
        Self {
            total_time,
            window,
            n_trajectories,
            seed,
            channels: vec!["a".into()],
            warmup: None,
            sample_interval: None,
        }
    }

    pub fn with_channels(mut self, channels: &[&str]) -> Self {
        self.channels = channels.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn validate(&self, model: &LindbladModel) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::Config("at least one trajectory is required".into()));
        }
        if !(self.total_time > 0.0) || !(self.window > 0.0) {
            return Err(Error::Config("durations must be positive".into()));
        }
        if self.sample_interval.is_some_and(|dt| !(dt > 0.0)) {
            return Err(Error::Config("sample interval must be positive".into()));
        }
        for ch in &self.channels {
            if model.collapse_index(ch).is_none() {
                return Err(Error::Config(format!("no collapse channel `{ch}`")));
            }
        }
        Ok(())
    }

    pub fn warmup_for(&self, model: &LindbladModel) -> f64 {
        self.warmup.unwrap_or_else(|| {
            let rate = model
                .collapse
                .iter()
                .find(|c| c.label.starts_with('a'))
                .map(|c| c.rate)
                .or_else(|| model.config.as_ref().map(|c| c.gamma))
                .unwrap_or(1.0);
            50.0 / rate
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Click {
    pub time: f64,
    /// Index into [`ClickRecord::channels`].
    pub channel: usize,
}

/// Clicks of one trajectory over `[t_start, t_end)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub t_start: f64,
    pub t_end: f64,
    pub channels: Vec<String>,
    pub clicks: Vec<Click>,
    /// Basis-state populations averaged over the sampling instants.
    pub populations: Option<Vec<f64>>,
    pub samples: usize,
}

impl ClickRecord {
    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == label)
    }

    pub fn times(&self, label: &str) -> Vec<f64> {
        match self.channel_index(label) {
            Some(k) => self.clicks.iter().filter(|c| c.channel == k).map(|c| c.time).collect(),
            None => Vec::new(),
        }
    }
}

/// Generator `−i H_eff` and its propagator.
enum Propagator {
    Eigen(Spectral),
    Dense(CMat),
}

impl Propagator {
    fn new(generator: CMat) -> Self {
        match Spectral::new(&generator) {
            Ok(s) => {
                let cond = linalg::fro_norm(&s.right) * linalg::fro_norm(&s.right_inv);
                if s.reconstruction_error(&generator) < 1e-11 && cond < COND_LIMIT {
                    return Propagator::Eigen(s);
                }
                log::debug!("non-Hermitian propagator is ill-conditioned ({cond:e}); using matrix exponentials");
                Propagator::Dense(generator)
            }
            Err(_) => Propagator::Dense(generator),
        }
    }
}

/// State right after a jump, prepared for cheap evaluation at any delay.
struct Segment<'a> {
    prop: &'a Propagator,
    psi0: Vec<C64>,
    coeffs: Vec<C64>,
}

impl<'a> Segment<'a> {
    fn new(prop: &'a Propagator, psi0: Vec<C64>) -> Self {
        let coeffs = match prop {
            Propagator::Eigen(s) => s.coefficients(&psi0),
            Propagator::Dense(_) => Vec::new(),
        };
        Self { prop, psi0, coeffs }
    }

    fn at(&self, s: f64) -> Vec<C64> {
        match self.prop {
            Propagator::Eigen(sp) => sp.synthesize(&self.coeffs, |l| (l * s).exp()),
            Propagator::Dense(g) => linalg::apply(&linalg::expm(&linalg::scaled(g, linalg::re(s))), &self.psi0),
        }
    }

    fn norm2(&self, s: f64) -> f64 {
        self.at(s).iter().map(|z| z.norm_sqr()).sum()
    }
}

struct Unraveling {
    prop: Propagator,
    jumps: Vec<(CMat, f64)>,
    labels: Vec<String>,
    /// Smallest decay rate scale, for the initial bracket.
    scale: f64,
    dim: usize,
}

impl Unraveling {
    fn new(model: &LindbladModel) -> Self {
        let d = model.dim();
        let mut h_eff = model.hamiltonian.matrix().clone();
        for c in &model.collapse {
            let l = c.op.matrix();
            let ldl = &linalg::adjoint(l) * l;
            for j in 0..d {
                for i in 0..d {
                    h_eff[(i, j)] -= I * (0.5 * c.rate) * ldl[(i, j)];
                }
            }
        }
        let generator = linalg::scaled(&h_eff, -I);
        let scale = linalg::one_norm(&generator).max(1.0);
        Self {
            prop: Propagator::new(generator),
            jumps: model.collapse.iter().map(|c| (c.op.matrix().clone(), c.rate)).collect(),
            labels: model.collapse.iter().map(|c| c.label.clone()).collect(),
            scale,
            dim: d,
        }
    }

    fn unit_vector(&self, k: usize) -> Vec<C64> {
        let mut v = vec![ZERO; self.dim];
        v[k] = linalg::re(1.0);
        v
    }

    /// Delay `s ≤ horizon` at which `‖ψ(s)‖² = r`, or `None` past the horizon.
    fn jump_delay(&self, seg: &Segment, r: f64, horizon: f64) -> Option<f64> {
        if seg.norm2(horizon) > r {
            return None;
        }
        let (mut lo, mut hi) = (0.0f64, horizon);
        // Geometric bracket from the fastest scale narrows the search quickly
        // when jumps are dense.
        let mut probe = 1.0 / self.scale;
        while probe < hi {
            if seg.norm2(probe) <= r {
                hi = probe;
                break;
            }
            lo = probe;
            probe *= 4.0;
        }
        let (mut n_lo, mut n_hi) = (seg.norm2(lo), seg.norm2(hi));
        for _ in 0..200 {
            if hi - lo <= JUMP_TOL * hi {
                break;
            }
            // Secant step on the monotone norm, guarded by the bracket.
            let mut mid = lo + (n_lo - r) / (n_lo - n_hi) * (hi - lo);
            if !(mid > lo && mid < hi) || (mid - lo).min(hi - mid) < 0.05 * (hi - lo) {
                mid = 0.5 * (lo + hi);
            }
            let n_mid = seg.norm2(mid);
            if n_mid > r {
                lo = mid;
                n_lo = n_mid;
            } else {
                hi = mid;
                n_hi = n_mid;
            }
        }
        Some(hi)
    }

    fn normalized(v: Vec<C64>) -> Vec<C64> {
        let n = linalg::vec_norm(&v);
        v.into_iter().map(|z| z / n).collect()
    }

    fn trajectory(&self, cfg: &TrajectoryConfig, warmup: f64, index: usize, recorded: &[Option<usize>]) -> Result<ClickRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64);
        let t_start = warmup;
        let t_end = warmup + cfg.total_time;
        let mut t = 0.0;
        let mut psi = self.unit_vector(0);
        let mut clicks = Vec::new();
        let mut pops = vec![0.0; self.dim];
        let mut samples = 0usize;
        let mut next_sample = cfg.sample_interval.map(|_| t_start);
        while t < t_end {
            let seg = Segment::new(&self.prop, psi.clone());
            let r: f64 = rng.random::<f64>();
            let delay = self.jump_delay(&seg, r, t_end - t);
            let t_jump = delay.map(|s| t + s);
            if let (Some(dt), Some(ns)) = (cfg.sample_interval, next_sample.as_mut()) {
                let stop = t_jump.unwrap_or(t_end);
                while *ns < stop && *ns < t_end {
                    let v = seg.at(*ns - t);
                    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                    for (p, z) in pops.iter_mut().zip(&v) {
                        *p += z.norm_sqr() / n;
                    }
                    samples += 1;
                    *ns += dt;
                }
            }
            let Some(s) = delay else { break };
            let at = seg.at(s);
            let weights: Vec<f64> = self
                .jumps
                .iter()
                .map(|(l, rate)| rate * linalg::apply(l, &at).iter().map(|z| z.norm_sqr()).sum::<f64>())
                .collect();
            let total: f64 = weights.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Numerical("norm decayed without an active jump channel".into()));
            }
            let mut pick = rng.random::<f64>() * total;
            let mut k = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if pick < *w {
                    k = i;
                    break;
                }
                pick -= w;
            }
            let new_t = t + s;
            if new_t <= t {
                return Err(Error::Numerical(format!("jump times stalled at t = {t}")));
            }
            t = new_t;
            if t >= t_start {
                if let Some(c) = recorded[k] {
                    clicks.push(Click { time: t, channel: c });
                }
            }
            psi = Self::normalized(linalg::apply(&self.jumps[k].0, &at));
        }
        let populations = cfg.sample_interval.map(|_| {
            let n = samples.max(1) as f64;
            pops.iter().map(|p| p / n).collect()
        });
        Ok(ClickRecord {
            t_start,
            t_end,
            channels: cfg.channels.clone(),
            clicks,
            populations,
            samples,
        })
    }
}

/// Runs `n_trajectories` independent trajectories in parallel. Trajectory
/// `k` draws from the ChaCha8 stream `k` of `seed`, so output does not
/// depend on scheduling.
pub fn run(model: &LindbladModel, cfg: &TrajectoryConfig) -> Result<Vec<ClickRecord>> {
    cfg.validate(model)?;
    let un = Unraveling::new(model);
    let warmup = cfg.warmup_for(model);
    let recorded: Vec<Option<usize>> = un
        .labels
        .iter()
        .map(|l| cfg.channels.iter().position(|c| c == l))
        .collect();
    (0..cfg.n_trajectories)
        .into_par_iter()
        .map(|k| un.trajectory(cfg, warmup, k, &recorded))
        .collect()
}

/// Histogram of photon counts over windows of length `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingDistribution {
    pub window: f64,
    pub probabilities: Vec<f64>,
    pub windows: usize,
}

/// Default histogram length; extended when larger counts occur.
pub const N_CAP: usize = 30;

impl CountingDistribution {
    pub fn from_counts(window: f64, counts: &[usize]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Input("no windows to histogram".into()));
        }
        let top = counts.iter().copied().max().unwrap_or(0);
        let len = (N_CAP + 1).max(top + 1);
        if top > N_CAP {
            log::info!("count histogram extended to n = {top}");
        }
        let mut hist = vec![0usize; len];
        for &c in counts {
            hist[c] += 1;
        }
        let n = counts.len() as f64;
        Ok(Self {
            window,
            probabilities: hist.iter().map(|&h| h as f64 / n).collect(),
            windows: counts.len(),
        })
    }

    pub fn n_cap(&self) -> usize {
        self.probabilities.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probabilities.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn factorial_moment(&self, k: u32) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(n, p)| (0..k).map(|j| n as f64 - j as f64).product::<f64>().max(0.0) * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.factorial_moment(2) + m - m * m
    }

    pub fn nonzero_bins(&self) -> usize {
        self.probabilities.iter().filter(|&&p| p > 0.0).count()
    }
}

/// Counts per window, with windows tiled contiguously from each record's
/// start.
pub fn window_counts(records: &[ClickRecord], window: f64, channel: &str) -> Result<Vec<usize>> {
    if records.is_empty() {
        return Err(Error::Input("no click records".into()));
    }
    let mut out = Vec::new();
    for rec in records {
        if window > rec.span() {
            return Err(Error::Input(format!("window {window} exceeds the record span {}", rec.span())));
        }
        let k = rec
            .channel_index(channel)
            .ok_or_else(|| Error::Input(format!("channel `{channel}` was not recorded")))?;
        let n_windows = (rec.span() / window).floor() as usize;
        let base = out.len();
        out.resize(base + n_windows, 0);
        for c in rec.clicks.iter().filter(|c| c.channel == k) {
            let w = ((c.time - rec.t_start) / window).floor() as usize;
            if w < n_windows {
                out[base + w] += 1;
            }
        }
    }
    Ok(out)
}

pub fn counting_distribution(records: &[ClickRecord], window: f64, channel: &str) -> Result<CountingDistribution> {
    CountingDistribution::from_counts(window, &window_counts(records, window, channel)?)
}

/// Click rate with its standard error estimated from per-window counts of
/// width `block`.
pub fn click_rate(records: &[ClickRecord], channel: &str, block: f64) -> Result<(f64, f64)> {
    let counts = window_counts(records, block, channel)?;
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean / block, (var / n).sqrt() / block))
}

/// Population estimate with the standard error across trajectories.
pub fn mean_populations(records: &[ClickRecord]) -> Option<(Vec<f64>, Vec<f64>)> {
    let rows: Vec<&Vec<f64>> = records.iter().filter_map(|r| r.populations.as_ref()).collect();
    let d = rows.first()?.len();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / n).collect();
    let err = (0..d)
        .map(|i| {
            let v = rows.iter().map(|r| (r[i] - mean[i]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            (v / n).sqrt()
        })
        .collect();
    Some((mean, err))
}

/// Builds records from explicit click times, for calibration inputs.
pub fn record_from_times(times: &[f64], t_start: f64, t_end: f64, channel: &str) -> ClickRecord {
    ClickRecord {
        t_start,
        t_end,
        channels: vec![channel.to_string()],
        clicks: times.iter().map(|&t| Click { time: t, channel: 0 }).collect(),
        populations: None,
        samples: 0,
    }
}
