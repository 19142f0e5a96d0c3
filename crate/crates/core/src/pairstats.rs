//! Photon-counting model built from three independent sources: coherent
//! single photons (`λ1`), coherent pairs (`λ2`) and thermal pairs (`θ2`).
//!
//! The generating function is
//!
//! ```text
//! G(s) = exp[λ1(s − 1)] · exp[λ2(s² − 1)] · (1 − θ2)/(1 − θ2 s²)
//! ```
//!
//! and `p(n) = e^{g(0)} B_n(a_1, …, a_n)/n!` with `g = log G` and
//! `a_k = g⁽ᵏ⁾(0)`.

use faer::linalg::solvers::DenseSolveCore;
use faer::prelude::*;
use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectories::CountingDistribution;

/// Complete Bell polynomial `B_n(a_1, …, a_n)` with `n = a.len()`.
pub fn bell_complete(a: &[f64]) -> f64 {
    let n = a.len();
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    // Pascal row of C(m, k), updated in place.
    let mut binom = vec![1.0; n + 1];
    for m in 0..n {
        if m > 0 {
            for k in (1..m).rev() {
                binom[k] += binom[k - 1];
            }
            binom[m] = 1.0;
        }
        b[m + 1] = (0..=m).map(|k| binom[k] * b[m - k] * a[k]).sum();
    }
    b[n]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CothermalParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub theta2: f64,
}

impl CothermalParams {
    pub fn new(lambda1: f64, lambda2: f64, theta2: f64) -> Result<Self> {
        let p = Self { lambda1, lambda2, theta2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lambda1 >= 0.0
            && self.lambda2 >= 0.0
            && (0.0..1.0).contains(&self.theta2)
            && self.lambda1.is_finite()
            && self.lambda2.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!("invalid counting parameters {self:?}")))
        }
    }

    /// Mean thermal pair number `θ2/(1 − θ2)`.
    pub fn thermal_mean(&self) -> f64 {
        self.theta2 / (1.0 - self.theta2)
    }

    /// Mean photon number `λ1 + 2λ2 + 2θ2/(1 − θ2)`.
    pub fn photon_mean(&self) -> f64 {
        self.lambda1 + 2.0 * self.lambda2 + 2.0 * self.thermal_mean()
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.lambda1, self.lambda2, self.theta2]
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        Self {
            lambda1: x[0],
            lambda2: x[1],
            theta2: x[2],
        }
    }
}

/// Derivatives `a_k/(k−1)!` of the cumulant generator, `k = 1..=n`.
fn scaled_derivatives(p: &CothermalParams, n: usize) -> Vec<f64> {
    let mut b = vec![0.0; n + 1];
    if n >= 1 {
        b[1] = p.lambda1;
    }
    let mut th = 1.0;
    for k in (2..=n).step_by(2) {
        th *= p.theta2;
        b[k] = 2.0 * th;
    }
    if n >= 2 {
        b[2] += 2.0 * p.lambda2;
    }
    b
}

/// `p(0..=n_cap)` without the coverage check.
///
/// Uses `q_{m+1} = (1/(m+1)) Σ_{k=0}^{m} q_{m−k} a_{k+1}/k!` for
/// `q_m = B_m/m!`; every term is non-negative, so no cancellation or
/// factorial overflow occurs.
pub fn cothermal_pmf_raw(p: &CothermalParams, n_cap: usize) -> Vec<f64> {
    let b = scaled_derivatives(p, n_cap + 1);
    let g0 = -p.lambda1 - p.lambda2 + (1.0 - p.theta2).ln();
    let mut q = vec![0.0; n_cap + 1];
    q[0] = g0.exp();
    for m in 0..n_cap {
        let s: f64 = (0..=m).map(|k| q[m - k] * b[k + 1]).sum();
        q[m + 1] = s / (m + 1) as f64;
    }
    q
}

/// Required mass of the truncated PMF.
pub const MASS_TOL: f64 = 1e-9;

pub fn cothermal_pmf(p: &CothermalParams, n_cap: usize) -> Result<Vec<f64>> {
    p.validate()?;
    let q = cothermal_pmf_raw(p, n_cap);
    let mass: f64 = q.iter().sum();
    if mass < 1.0 - MASS_TOL {
        return Err(Error::Truncation {
            n_max: n_cap,
            needed: n_cap + 1,
        });
    }
    Ok(q)
}

/// Independent route: convolution of the three component distributions.
pub fn convolution_pmf(p: &CothermalParams, n_cap: usize) -> Vec<f64> {
    let mut poisson1 = vec![0.0; n_cap + 1];
    poisson1[0] = (-p.lambda1).exp();
    for n in 1..=n_cap {
        poisson1[n] = poisson1[n - 1] * p.lambda1 / n as f64;
    }
    let mut pairs = vec![0.0; n_cap + 1];
    let mut term = (-p.lambda2).exp();
    for k in 0..=n_cap / 2 {
        if k > 0 {
            term *= p.lambda2 / k as f64;
        }
        pairs[2 * k] = term;
    }
    let mut thermal = vec![0.0; n_cap + 1];
    let mut t = 1.0 - p.theta2;
    for k in 0..=n_cap / 2 {
        thermal[2 * k] = t;
        t *= p.theta2;
    }
    let conv = |x: &[f64], y: &[f64]| -> Vec<f64> {
        (0..=n_cap).map(|n| (0..=n).map(|k| x[k] * y[n - k]).sum()).collect()
    };
    conv(&conv(&poisson1, &pairs), &thermal)
}

/// `(π, π_θ, π_λ)`: pair fraction of emission events and its thermal and
/// coherent parts.
pub fn purity(p: &CothermalParams) -> Result<(f64, f64, f64)> {
    p.validate()?;
    let th = p.thermal_mean();
    let denom = p.lambda1 + p.lambda2 + th;
    if !(denom > 0.0) {
        return Err(Error::Undefined("purity of an empty source".into()));
    }
    Ok(((p.lambda2 + th) / denom, th / denom, p.lambda2 / denom))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ansatz {
    Cothermal,
    /// `θ2 = 0`.
    CoherentOnly,
}

impl Ansatz {
    fn active(self) -> &'static [usize] {
        match self {
            Ansatz::Cothermal => &[0, 1, 2],
            Ansatz::CoherentOnly => &[0, 1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    LeastSquares,
    MaxLikelihood,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitOptions {
    pub ansatz: Ansatz,
    pub objective: Objective,
    /// Resamples for the parameter spread; zero disables the bootstrap.
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ansatz: Ansatz::Cothermal,
            objective: Objective::LeastSquares,
            bootstrap: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CothermalFit {
    pub params: CothermalParams,
    pub purity: f64,
    pub purity_thermal: f64,
    pub purity_coherent: f64,
    /// `Σ_n (p_model(n) − p_emp(n))²`.
    pub residual: f64,
    /// `s²(JᵀJ)⁻¹` over `(λ1, λ2, θ2)`, when the normal matrix is regular.
    pub covariance: Option<[[f64; 3]; 3]>,
    /// Bootstrap standard deviations of `(λ1, λ2, θ2)`.
    pub spread: Option<[f64; 3]>,
    pub purity_spread: Option<f64>,
    /// Parameters whose bootstrap spread exceeds half their value.
    pub non_identifiable: Vec<String>,
    pub ansatz: Ansatz,
    pub objective: Objective,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurityRecord {
    pub lambda1: f64,
    pub lambda2: f64,
    pub theta2: f64,
    pub pi: f64,
    pub pi_theta: f64,
    pub pi_lambda: f64,
    pub residual: f64,
}

impl CothermalFit {
    pub fn record(&self) -> PurityRecord {
        PurityRecord {
            lambda1: self.params.lambda1,
            lambda2: self.params.lambda2,
            theta2: self.params.theta2,
            pi: self.purity,
            pi_theta: self.purity_thermal,
            pi_lambda: self.purity_coherent,
            residual: self.residual,
        }
    }
}

/// Unconstrained coordinates: `λ = u²`, `θ = u²/(1 + u²)`.
fn to_params(u: [f64; 3]) -> [f64; 3] {
    [u[0] * u[0], u[1] * u[1], u[2] * u[2] / (1.0 + u[2] * u[2])]
}

fn to_coords(x: [f64; 3]) -> [f64; 3] {
    let th = x[2].clamp(0.0, 1.0 - 1e-12);
    [x[0].max(0.0).sqrt(), x[1].max(0.0).sqrt(), (th / (1.0 - th)).sqrt()]
}

fn coord_jacobian(u: [f64; 3]) -> [f64; 3] {
    let d = 1.0 + u[2] * u[2];
    [2.0 * u[0], 2.0 * u[1], 2.0 * u[2] / (d * d)]
}

/// `∂p(n)/∂(λ1, λ2, θ2)` from the factorized generating function.
fn pmf_gradient(x: [f64; 3], p: &[f64]) -> Vec<[f64; 3]> {
    let n = p.len();
    let at = |k: isize| if k >= 0 { p[k as usize] } else { 0.0 };
    // r(m) = Σ_{k≥0} θ^k p(m − 2 − 2k)
    let mut r = vec![0.0; n];
    for m in 0..n {
        r[m] = at(m as isize - 2) + if m >= 2 { x[2] * r[m - 2] } else { 0.0 };
    }
    (0..n)
        .map(|m| {
            let mi = m as isize;
            [
                at(mi - 1) - p[m],
                at(mi - 2) - p[m],
                r[m] - p[m] / (1.0 - x[2]),
            ]
        })
        .collect()
}

struct Problem<'a> {
    target: &'a [f64],
    active: &'a [usize],
}

impl Problem<'_> {
    fn n_cap(&self) -> usize {
        self.target.len() - 1
    }

    fn model(&self, u: [f64; 3]) -> ([f64; 3], Vec<f64>) {
        let mut x = to_params(u);
        if !self.active.contains(&2) {
            x[2] = 0.0;
        }
        (x, cothermal_pmf_raw(&CothermalParams::from_array(x), self.n_cap()))
    }

    fn cost(&self, u: [f64; 3]) -> f64 {
        let (_, p) = self.model(u);
        p.iter().zip(self.target).map(|(a, b)| (a - b).powi(2)).sum()
    }

    fn neg_log_likelihood(&self, u: [f64; 3]) -> f64 {
        let (_, p) = self.model(u);
        -p.iter()
            .zip(self.target)
            .filter(|(_, &e)| e > 0.0)
            .map(|(&m, &e)| e * m.max(1e-300).ln())
            .sum::<f64>()
    }

    /// Levenberg-Marquardt with the analytic Jacobian.
    fn levenberg_marquardt(&self, mut u: [f64; 3]) -> [f64; 3] {
        let k = self.active.len();
        let mut cost = self.cost(u);
        let mut mu = -1.0;
        let mut nu = 2.0;
        for _ in 0..500 {
            let (x, p) = self.model(u);
            let grad = pmf_gradient(x, &p);
            let cj = coord_jacobian(u);
            let res: Vec<f64> = p.iter().zip(self.target).map(|(a, b)| a - b).collect();
            let jac = |n: usize, i: usize| grad[n][self.active[i]] * cj[self.active[i]];
            let jtj = Mat::<f64>::from_fn(k, k, |i, j| (0..p.len()).map(|n| jac(n, i) * jac(n, j)).sum());
            let jtr: Vec<f64> = (0..k).map(|i| (0..p.len()).map(|n| jac(n, i) * res[n]).sum()).collect();
            if jtr.iter().map(|g| g.abs()).fold(0.0, f64::max) < 1e-18 {
                break;
            }
            if mu < 0.0 {
                mu = 1e-3 * (0..k).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(1e-300);
            }
            let mut improved = false;
            for _ in 0..40 {
                let a = Mat::<f64>::from_fn(k, k, |i, j| {
                    jtj[(i, j)] + if i == j { mu * (1.0 + jtj[(i, i)]) } else { 0.0 }
                });
                let b = Mat::<f64>::from_fn(k, 1, |i, _| -jtr[i]);
                let step = a.partial_piv_lu().solve(&b);
                let mut trial = u;
                for i in 0..k {
                    trial[self.active[i]] += step[(i, 0)];
                }
                let c = self.cost(trial);
                if c.is_finite() && c < cost {
                    let rel = (cost - c) / cost.max(1e-300);
                    u = trial;
                    cost = c;
                    mu *= 1.0f64 / 3.0;
                    nu = 2.0;
                    improved = rel > 1e-14;
                    break;
                }
                mu *= nu;
                nu *= 2.0;
            }
            if !improved {
                break;
            }
        }
        u
    }

    fn nelder_mead(&self, start: [f64; 3]) -> [f64; 3] {
        let k = self.active.len();
        let embed = |v: &[f64]| {
            let mut u = start;
            for (i, &a) in self.active.iter().enumerate() {
                u[a] = v[i];
            }
            u
        };
        let f = |v: &[f64]| self.neg_log_likelihood(embed(v));
        let base: Vec<f64> = self.active.iter().map(|&a| start[a]).collect();
        let mut simplex: Vec<(Vec<f64>, f64)> = (0..=k)
            .map(|i| {
                let mut v = base.clone();
                if i > 0 {
                    v[i - 1] += 0.1 * v[i - 1].abs().max(0.05);
                }
                let fv = f(&v);
                (v, fv)
            })
            .collect();
        for _ in 0..2000 {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[k].1 - simplex[0].1;
            if spread.abs() <= 1e-13 * simplex[0].1.abs().max(1e-300) {
                break;
            }
            let centroid: Vec<f64> = (0..k).map(|j| simplex[..k].iter().map(|s| s.0[j]).sum::<f64>() / k as f64).collect();
            let along = |t: f64| -> Vec<f64> { (0..k).map(|j| centroid[j] + t * (simplex[k].0[j] - centroid[j])).collect() };
            let refl = along(-1.0);
            let fr = f(&refl);
            if fr < simplex[0].1 {
                let exp = along(-2.0);
                let fe = f(&exp);
                simplex[k] = if fe < fr { (exp, fe) } else { (refl, fr) };
            } else if fr < simplex[k - 1].1 {
                simplex[k] = (refl, fr);
            } else {
                let con = along(if fr < simplex[k].1 { -0.5 } else { 0.5 });
                let fc = f(&con);
                if fc < simplex[k].1.min(fr) {
                    simplex[k] = (con, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for s in simplex.iter_mut().skip(1) {
                        s.0 = (0..k).map(|j| best[j] + 0.5 * (s.0[j] - best[j])).collect();
                        s.1 = f(&s.0);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        embed(&simplex[0].0)
    }
}

/// Least-squares minimum over eight starts; returns `(λ1, λ2, θ2)`.
fn best_fit(target: &[f64], ansatz: Ansatz, objective: Objective) -> [f64; 3] {
    let mean: f64 = target.iter().enumerate().map(|(n, p)| n as f64 * p).sum::<f64>().max(1e-6);
    let prob = Problem {
        target,
        active: ansatz.active(),
    };
    let mut starts = Vec::with_capacity(8);
    for &l1 in &[0.05, 0.6] {
        for &l2 in &[0.02, 0.4] {
            for &th in &[0.02, 0.3] {
                let th = if ansatz == Ansatz::CoherentOnly { 0.0 } else { th };
                starts.push(to_coords([l1 * mean, l2 * mean, th]));
            }
        }
    }
    let (u, _) = starts
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let u = prob.levenberg_marquardt(s);
            (i, u, prob.cost(u))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
        .map(|(_, u, c)| (u, c))
        .expect("eight starts");
    let u = match objective {
        Objective::LeastSquares => u,
        Objective::MaxLikelihood => prob.nelder_mead(u),
    };
    prob.model(u).0
}

/// Multinomial resample of `windows` draws from `p`.
fn resample(p: &[f64], windows: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut left = windows as u64;
    let mut mass = 1.0;
    let mut out = vec![0.0; p.len()];
    for (k, &pk) in p.iter().enumerate() {
        if left == 0 {
            break;
        }
        let q = if mass > 0.0 { (pk / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = if k + 1 == p.len() {
            left
        } else {
            Binomial::new(left, q).map(|b| b.sample(rng)).unwrap_or(0)
        };
        out[k] = draw as f64 / windows as f64;
        left -= draw;
        mass -= pk;
    }
    out
}

fn covariance(x: [f64; 3], target: &[f64], active: &[usize]) -> Option<[[f64; 3]; 3]> {
    let p = cothermal_pmf_raw(&CothermalParams::from_array(x), target.len() - 1);
    let grad = pmf_gradient(x, &p);
    let k = active.len();
    let dof = p.len().saturating_sub(k).max(1) as f64;
    let s2: f64 = p.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / dof;
    let jtj = Mat::<f64>::from_fn(k, k, |i, j| grad.iter().map(|g| g[active[i]] * g[active[j]]).sum());
    let inv = jtj.partial_piv_lu().inverse();
    let mut out = [[0.0; 3]; 3];
    for i in 0..k {
        for j in 0..k {
            let v = inv[(i, j)] * s2;
            if !v.is_finite() {
                return None;
            }
            out[active[i]][active[j]] = v;
        }
    }
    Some(out)
}

/// Fits the counting model to an empirical distribution.
pub fn fit(dist: &CountingDistribution) -> Result<CothermalFit> {
    fit_with(dist, &FitOptions::default())
}

pub fn fit_with(dist: &CountingDistribution, opts: &FitOptions) -> Result<CothermalFit> {
    if dist.nonzero_bins() < 3 {
        return Err(Error::Input("fit needs at least three nonzero histogram bins".into()));
    }
    let target = &dist.probabilities;
    let x = best_fit(target, opts.ansatz, opts.objective);
    let params = CothermalParams::from_array(x);
    let (pi, pt, pl) = purity(&params)?;
    let model = cothermal_pmf_raw(&params, dist.n_cap());
    let residual = model.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum();

    let (spread, purity_spread) = if opts.bootstrap > 1 && dist.windows > 0 {
        let samples: Vec<([f64; 3], f64)> = (0..opts.bootstrap)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(b as u64);
                let t = resample(target, dist.windows, &mut rng);
                let prob = Problem {
                    target: &t,
                    active: opts.ansatz.active(),
                };
                let u = prob.levenberg_marquardt(to_coords(x));
                let xb = prob.model(u).0;
                let pb = purity(&CothermalParams::from_array(xb)).map(|r| r.0).unwrap_or(f64::NAN);
                (xb, pb)
            })
            .collect();
        let m = samples.len() as f64;
        let sd = |values: Vec<f64>| {
            let mean = values.iter().sum::<f64>() / m;
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        };
        let column = |k: usize| sd(samples.iter().map(|s| s.0[k]).collect());
        (
            Some([column(0), column(1), column(2)]),
            Some(sd(samples.iter().map(|s| s.1).collect())),
        )
    } else {
        (None, None)
    };
    let names = ["lambda1", "lambda2", "theta2"];
    let non_identifiable: Vec<String> = spread
        .map(|s| {
            opts.ansatz
                .active()
                .iter()
                .filter(|&&i| s[i] > 0.5 * x[i].abs() && s[i] > 1e-3)
                .map(|&i| names[i].to_string())
                .collect()
        })
        .unwrap_or_default();
    if !non_identifiable.is_empty() {
        log::warn!("fit parameters {non_identifiable:?} are not identifiable from this histogram");
    }
    Ok(CothermalFit {
        params,
        purity: pi,
        purity_thermal: pt,
        purity_coherent: pl,
        residual,
        covariance: covariance(x, target, opts.ansatz.active()),
        spread,
        purity_spread,
        non_identifiable,
        ansatz: opts.ansatz,
        objective: opts.objective,
    })
}

/// Exact distribution of `windows` samples from `p`, rounded to counts.
pub fn synthetic_distribution(p: &CothermalParams, n_cap: usize, windows: usize, seed: u64) -> Result<CountingDistribution> {
    let pmf = cothermal_pmf(p, n_cap)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freq = resample(&pmf, windows, &mut rng);
    Ok(CountingDistribution {
        window: 1.0,
        probabilities: freq,
        windows,
    })
}
