//! Static cavity moments and polarization cross-correlations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{liouvillian, phi2, steady_state, vectorize, DensityMatrix, Modes, Superoperator};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, Cavity, Channel, Drive, LindbladModel, ModelConfig};
use crate::qspace::Operator;

/// Populations below this are treated as vacuum.
const VACUUM: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityObservables {
    pub n_a: f64,
    /// `⟨a†²a²⟩/n_a²`; `None` in vacuum.
    pub g2_0: Option<f64>,
    /// `⟨a†⁴a⁴⟩/⟨a†²a²⟩²`; `None` when the pair moment vanishes.
    pub g2_2_0: Option<f64>,
}

fn normal_moment(rho: &DensityMatrix, a: &Operator, k: u32) -> f64 {
    let ak = a.pow(k);
    rho.expect(&(&ak.adjoint() * &ak)).re
}

/// `n_a`, `g⁽²⁾(0)` and `g⁽²⁾₂(0)` of the mode behind `channel`.
pub fn cavity_observables(model: &LindbladModel, rho: &DensityMatrix, channel: Channel) -> Result<CavityObservables> {
    let a = model.emission_operator(channel)?;
    let n_max = (1..=8u32).take_while(|&k| linalg::fro_norm(a.pow(k).matrix()) > 0.0).count();
    if n_max < 4 {
        return Err(Error::Truncation { n_max, needed: 4 });
    }
    let n1 = normal_moment(rho, a, 1);
    let n2 = normal_moment(rho, a, 2);
    let n4 = normal_moment(rho, a, 4);
    let g2_0 = (n1 > VACUUM).then(|| n2 / (n1 * n1));
    let g2_2_0 = (n2 > VACUUM * VACUUM).then(|| n4 / (n2 * n2));
    Ok(CavityObservables { n_a: n1, g2_0, g2_2_0 })
}

/// Photocount moments of a channel `√r a` over a window `T`.
#[derive(Clone, Debug)]
pub struct CountingMoments {
    pub rate: f64,
    pub population: f64,
    modes: Modes,
}

impl CountingMoments {
    pub fn new(l: &Superoperator, rho: &DensityMatrix, a: &Operator, rate: f64) -> Result<Self> {
        let spectral = l.spectral()?;
        let x = &(a.matrix() * &rho.matrix) * &linalg::adjoint(a.matrix());
        let n = &a.adjoint() * a;
        Ok(Self {
            rate,
            population: rho.expect(&n).re,
            modes: Modes::new(&spectral, n.matrix(), &vectorize(&x)),
        })
    }

    /// Expected counts `r·n·T`.
    pub fn mean(&self, t: f64) -> f64 {
        self.rate * self.population * t
    }

    /// `E[n(n−1)] = 2r² ∫₀^T (T − τ) G⁽²⁾(τ) dτ`.
    pub fn factorial2(&self, t: f64) -> f64 {
        let s: linalg::C64 = self
            .modes
            .rates
            .iter()
            .zip(&self.modes.weights)
            .map(|(&l, w)| w * phi2(l, t))
            .sum();
        2.0 * self.rate * self.rate * s.re
    }

    /// `⟨a†(0)a†(τ)a(τ)a(0)⟩ / n²`.
    pub fn g2(&self, tau: f64) -> f64 {
        self.modes.eval(tau).re / (self.population * self.population)
    }
}

pub fn counting_moments(model: &LindbladModel, channel: Channel) -> Result<(DensityMatrix, CountingMoments)> {
    let a = model.emission_operator(channel)?;
    let label = channel.label();
    let rate = model
        .collapse
        .iter()
        .find(|c| c.label == label)
        .map(|c| c.rate)
        .ok_or_else(|| Error::Config(format!("channel `{label}` does not decay")))?;
    let l = liouvillian(model);
    let rho = steady_state(&l)?;
    let m = CountingMoments::new(&l, &rho, a, rate)?;
    Ok((rho, m))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarizationPoint {
    pub delta_c: f64,
    pub n_h: f64,
    pub n_v: f64,
    pub g2_hh: f64,
    pub g2_vv: f64,
    pub g2_hv: f64,
    /// `g2_hv² / (g2_hh · g2_vv)`; above one violates Cauchy-Schwarz.
    pub csi_ratio: f64,
}

pub fn polarization_point(model: &LindbladModel, rho: &DensityMatrix, delta_c: f64) -> Result<PolarizationPoint> {
    let ah = model.emission_operator(Channel::AH)?;
    let av = model.emission_operator(Channel::AV)?;
    let n_h = normal_moment(rho, ah, 1);
    let n_v = normal_moment(rho, av, 1);
    if n_h <= VACUUM || n_v <= VACUUM {
        return Err(Error::Undefined("cavity modes are empty".into()));
    }
    let g2_hh = normal_moment(rho, ah, 2) / (n_h * n_h);
    let g2_vv = normal_moment(rho, av, 2) / (n_v * n_v);
    let pair = ah * av;
    let g2_hv = rho.expect(&(&pair.adjoint() * &pair)).re / (n_h * n_v);
    Ok(PolarizationPoint {
        delta_c,
        n_h,
        n_v,
        g2_hh,
        g2_vv,
        g2_hv,
        csi_ratio: g2_hv * g2_hv / (g2_hh * g2_vv),
    })
}

/// Auto- and cross-correlations of the two cavity polarizations across
/// cavity detunings.
pub fn polarization_correlations(config: &ModelConfig, delta_c: &[f64]) -> Result<Vec<PolarizationPoint>> {
    if config.cavity != Cavity::DualHV || config.drive != Drive::Circular {
        return Err(Error::Config("polarization correlations need a circular drive and a dual cavity".into()));
    }
    super::check_ascending(delta_c)?;
    delta_c
        .par_iter()
        .map(|&dc| {
            let cfg = ModelConfig {
                delta_c: dc,
                ..config.clone()
            };
            let m = model::build(&cfg)?;
            let rho = steady_state(&liouvillian(&m))?;
            polarization_point(&m, &rho, dc)
        })
        .collect()
}
