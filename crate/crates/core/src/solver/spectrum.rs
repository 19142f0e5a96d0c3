//! Steady-state emission spectra `S(ω) = Re ∫₀^∞ ⟨O†(0) O(τ)⟩ e^{iωτ} dτ`.
//!
//! Only the fluctuating part `⟨O†(0)O(τ)⟩ − |⟨O⟩|²` is resolved in
//! frequency; the coherent part is a delta at the laser frequency and is
//! reported as a weight.

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{check_ascending, dot, trace_functional, vectorize, DensityMatrix, Superoperator};
use crate::error::{Error, Result};
use crate::linalg::{self, C64, I};
use crate::qspace::Operator;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub channel: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// `π |⟨O⟩|²`, the integrated weight of the coherent delta.
    pub coherent_weight: f64,
    /// `⟨O†O⟩` in the steady state.
    pub population: f64,
}

impl SpectrumResult {
    /// Trapezoidal integral plus `S(ω)·|ω − ω_c|` tails at both ends, where
    /// `ω_c` is the grid centre.
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        let v = &self.values;
        let n = g.len();
        if n < 2 {
            return 0.0;
        }
        let body: f64 = (1..n).map(|k| 0.5 * (v[k] + v[k - 1]) * (g[k] - g[k - 1])).sum();
        let c = 0.5 * (g[0] + g[n - 1]);
        body + v[0] * (c - g[0]).abs() + v[n - 1] * (g[n - 1] - c).abs()
    }

    /// Integral including the coherent weight; equals `π⟨O†O⟩`.
    pub fn total_integral(&self) -> f64 {
        self.integral() + self.coherent_weight
    }

    pub fn peaks(&self, rel_floor: f64) -> Vec<f64> {
        local_maxima(&self.grid, &self.values, rel_floor)
    }

    pub fn value_at(&self, w: f64) -> f64 {
        let g = &self.grid;
        match g.binary_search_by(|x| x.total_cmp(&w)) {
            Ok(k) => self.values[k],
            Err(0) => self.values[0],
            Err(k) if k >= g.len() => *self.values.last().unwrap(),
            Err(k) => {
                let t = (w - g[k - 1]) / (g[k] - g[k - 1]);
                self.values[k - 1] * (1.0 - t) + self.values[k] * t
            }
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Interior local maxima above `rel_floor · max`, refined by a parabola
/// through the three bracketing samples.
pub fn local_maxima(grid: &[f64], values: &[f64], rel_floor: f64) -> Vec<f64> {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    for k in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[k - 1], values[k], values[k + 1]);
        if b > a && b >= c && b >= rel_floor * top {
            let (x0, x1, x2) = (grid[k - 1], grid[k], grid[k + 1]);
            let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
            let pa = (x2 * (b - a) + x1 * (a - c) + x0 * (c - b)) / denom;
            let pb = (x2 * x2 * (a - b) + x1 * x1 * (c - a) + x0 * x0 * (b - c)) / denom;
            let x = if pa < 0.0 { -pb / (2.0 * pa) } else { x1 };
            out.push(if x.is_finite() && x > x0 && x < x2 { x } else { x1 });
        }
    }
    out
}

struct Prepared {
    initial: Vec<C64>,
    observable: Vec<C64>,
    coherent: f64,
    population: f64,
}

fn prepare(rho: &DensityMatrix, o: &Operator) -> Prepared {
    let od = o.adjoint();
    let mean_d = rho.expect(&od);
    let x = &rho.matrix * od.matrix();
    let initial = vectorize(&Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - rho.matrix[(i, j)] * mean_d));
    Prepared {
        initial,
        observable: trace_functional(o.matrix()),
        coherent: std::f64::consts::PI * mean_d.norm_sqr(),
        population: rho.expect(&(&od * o)).re,
    }
}

/// Spectrum as a sum of complex Lorentzians from the eigendecomposition of
/// `L`.
pub fn emission_spectrum(
    l: &Superoperator,
    rho: &DensityMatrix,
    o: &Operator,
    channel: &str,
    grid: &[f64],
) -> Result<SpectrumResult> {
    check_ascending(grid)?;
    let p = prepare(rho, o);
    let spectral = l.spectral()?;
    let coeffs = spectral.coefficients(&p.initial);
    let proj = linalg::apply_left(&p.observable, &spectral.right);
    let floor = 1e-10 * l.scale().max(1.0);
    let total_w: f64 = coeffs.iter().zip(&proj).map(|(c, q)| (c * q).norm()).sum();
    let mut terms: Vec<(C64, C64)> = Vec::new();
    for ((&lam, c), q) in spectral.values.iter().zip(&coeffs).zip(&proj) {
        let w = c * q;
        if lam.norm() > floor && w.norm() > 1e-15 * total_w.max(1e-300) {
            terms.push((lam, w));
        }
    }
    if let Some(width) = terms
        .iter()
        .filter(|(_, w)| w.norm() > 1e-3 * total_w)
        .map(|(l, _)| -l.re)
        .reduce(f64::min)
    {
        let spacing = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        if spacing > width {
            log::warn!("grid spacing {spacing} exceeds the narrowest linewidth {width}; peaks may be missed");
        }
    }
    let values = grid
        .iter()
        .map(|&w| {
            let s: C64 = terms.iter().map(|&(lam, wt)| -wt / (lam + I * w)).sum();
            s.re
        })
        .collect();
    Ok(SpectrumResult {
        channel: channel.to_string(),
        grid: grid.to_vec(),
        values,
        coherent_weight: p.coherent,
        population: p.population,
    })
}

/// Spectrum by solving `(L + iω) x = −v` at each frequency.
pub fn emission_spectrum_resolvent(
    l: &Superoperator,
    rho: &DensityMatrix,
    o: &Operator,
    channel: &str,
    grid: &[f64],
) -> Result<SpectrumResult> {
    use faer::prelude::Solve;
    check_ascending(grid)?;
    let p = prepare(rho, o);
    let n = p.initial.len();
    let rhs = Mat::from_fn(n, 1, |i, _| -p.initial[i]);
    // Deflating the stationary mode with `−vec(ρ)·tr` keeps ω = 0 regular;
    // the fluctuating source is traceless, so the solution is unchanged.
    let r = rho.vectorized();
    let t = trace_functional(&linalg::identity(rho.dim()));
    let mut deflated = l.matrix().clone();
    for (j, &tj) in t.iter().enumerate() {
        if tj != linalg::ZERO {
            for i in 0..n {
                deflated[(i, j)] -= r[i] * tj;
            }
        }
    }
    let mut values = Vec::with_capacity(grid.len());
    for &w in grid {
        let mut a = deflated.clone();
        for i in 0..n {
            a[(i, i)] += I * w;
        }
        let x = a.partial_piv_lu().solve(&rhs);
        let v = linalg::col_to_vec(&x);
        if v.iter().any(|z| !z.re.is_finite()) {
            return Err(Error::Numerical(format!("resolvent singular at ω = {w}")));
        }
        values.push(dot(&p.observable, &v).re);
    }
    Ok(SpectrumResult {
        channel: channel.to_string(),
        grid: grid.to_vec(),
        values,
        coherent_weight: p.coherent,
        population: p.population,
    })
}
