//! Frequency-resolved photon correlations from weakly coupled sensors.
//!
//! Two engines are provided. [`Engine::Explicit`] appends sensor qubits to
//! the model and solves the enlarged steady state. [`Engine::Perturbative`]
//! evaluates the same sensors at leading order in their coupling `ε`: the
//! joint state is expanded as `ρ = Σ X_{k,b} ⊗ |k⟩⟨b|` over sensor
//! occupations and each component obeys
//!
//! ```text
//! (L − iΣΔ_j(k_j − b_j) − ΣΓ_j(k_j + b_j)/2) X_{k,b}
//!     = iε Σ √k_j O_j X_{k−e_j,b} − iε Σ √b_j X_{k,b−e_j} O_j†
//! ```
//!
//! with `X_{0,0} = ρ_ss`. The normalized correlation is independent of `ε`
//! in this order, so the hierarchy is solved at `ε = 1`.

use std::collections::HashMap;

use faer::prelude::Solve;
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{liouvillian, steady_state, unvectorize, vectorize, DensityMatrix, Superoperator};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, I};
use crate::model::{self, Channel, LindbladModel, SensorSpec, SENSOR_BOUND};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Engine {
    Perturbative,
    /// Explicit sensor qubits with `ε = fraction · Γ`.
    Explicit { fraction: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorMoments {
    pub n1: f64,
    pub n2: f64,
    pub n12: f64,
}

impl SensorMoments {
    pub fn g2(&self) -> f64 {
        self.n12 / (self.n1 * self.n2)
    }
}

/// Leading-order sensor hierarchy on top of a fixed system steady state.
pub struct SensorSolver<'m> {
    model: &'m LindbladModel,
    l: Superoperator,
    rho: DensityMatrix,
}

type Key = (Vec<u8>, Vec<u8>);

struct Sensor<'a> {
    op: &'a CMat,
    op_adj: CMat,
    detuning: f64,
    linewidth: f64,
}

impl<'m> SensorSolver<'m> {
    pub fn new(model: &'m LindbladModel) -> Result<Self> {
        if !model.sensors.is_empty() {
            return Err(Error::Config("hierarchy expects a model without sensor qubits".into()));
        }
        let l = liouvillian(model);
        let rho = steady_state(&l)?;
        Ok(Self { model, l, rho })
    }

    pub fn steady_state(&self) -> &DensityMatrix {
        &self.rho
    }

    fn sensor(&self, channel: Channel, detuning: f64, linewidth: f64) -> Result<Sensor<'_>> {
        if !(linewidth > 0.0) {
            return Err(Error::Config("sensor linewidth must be positive".into()));
        }
        let op = self.model.emission_operator(channel)?.matrix();
        Ok(Sensor {
            op,
            op_adj: linalg::adjoint(op),
            detuning,
            linewidth,
        })
    }

    fn solve_shifted(&self, shift: C64, rhs: &[C64]) -> Vec<C64> {
        let n = rhs.len();
        let mut a = self.l.matrix().clone();
        for i in 0..n {
            a[(i, i)] += shift;
        }
        let b = Mat::from_fn(n, 1, |i, _| -rhs[i]);
        linalg::col_to_vec(&a.partial_piv_lu().solve(&b))
    }

    fn component(&self, sensors: &[Sensor<'_>], key: &Key, memo: &mut HashMap<Key, CMat>) -> CMat {
        if let Some(x) = memo.get(key) {
            return x.clone();
        }
        let (k, b) = key;
        if k.iter().chain(b.iter()).all(|&x| x == 0) {
            return self.rho.matrix.clone();
        }
        // X_{b,k} = X_{k,b}†.
        if k > b {
            let x = linalg::adjoint(&self.component(sensors, &(b.clone(), k.clone()), memo));
            memo.insert(key.clone(), x.clone());
            return x;
        }
        let d = self.rho.dim();
        let mut rhs: CMat = Mat::zeros(d, d);
        let mut shift = linalg::ZERO;
        for (j, s) in sensors.iter().enumerate() {
            let (kj, bj) = (k[j] as f64, b[j] as f64);
            shift -= I * (s.detuning * (kj - bj)) + linalg::re(s.linewidth * (kj + bj) / 2.0);
            if k[j] > 0 {
                let mut lower = k.clone();
                lower[j] -= 1;
                let x = self.component(sensors, &(lower, b.clone()), memo);
                rhs += linalg::scaled(&(s.op * &x), -I * kj.sqrt());
            }
            if b[j] > 0 {
                let mut lower = b.clone();
                lower[j] -= 1;
                let x = self.component(sensors, &(k.clone(), lower), memo);
                rhs += linalg::scaled(&(&x * &s.op_adj), I * bj.sqrt());
            }
        }
        let x = unvectorize(&self.solve_shifted(shift, &vectorize(&rhs)), d);
        memo.insert(key.clone(), x.clone());
        x
    }

    /// Leading-order moments of two distinct sensors at `ε = 1`.
    pub fn pair_moments(
        &self,
        first: (Channel, f64),
        second: (Channel, f64),
        linewidth: f64,
    ) -> Result<SensorMoments> {
        let sensors = [
            self.sensor(first.0, first.1, linewidth)?,
            self.sensor(second.0, second.1, linewidth)?,
        ];
        let mut memo = HashMap::new();
        let tr = |x: &CMat| linalg::trace(x).re;
        let n1 = tr(&self.component(&sensors, &(vec![1, 0], vec![1, 0]), &mut memo));
        let n2 = tr(&self.component(&sensors, &(vec![0, 1], vec![0, 1]), &mut memo));
        let n12 = tr(&self.component(&sensors, &(vec![1, 1], vec![1, 1]), &mut memo));
        Ok(SensorMoments { n1, n2, n12 })
    }

    /// Leading-order population `⟨ς†ς⟩/ε²` of a single sensor.
    pub fn population(&self, channel: Channel, detuning: f64, linewidth: f64) -> Result<f64> {
        let sensors = [self.sensor(channel, detuning, linewidth)?];
        let mut memo = HashMap::new();
        Ok(linalg::trace(&self.component(&sensors, &(vec![1], vec![1]), &mut memo)).re)
    }

    /// `⟨ς†²ς²⟩/⟨ς†ς⟩²` of one bosonic sensor.
    pub fn autocorrelation(&self, channel: Channel, detuning: f64, linewidth: f64) -> Result<f64> {
        let sensors = [self.sensor(channel, detuning, linewidth)?];
        let mut memo = HashMap::new();
        let n1 = linalg::trace(&self.component(&sensors, &(vec![1], vec![1]), &mut memo)).re;
        let n2 = linalg::trace(&self.component(&sensors, &(vec![2], vec![2]), &mut memo)).re;
        Ok(2.0 * n2 / (n1 * n1))
    }
}

/// `g²_Γ(ω₁, ω₂)` from two distinct sensors.
pub fn g2_pair(
    model: &LindbladModel,
    first: (Channel, f64),
    second: (Channel, f64),
    linewidth: f64,
    engine: Engine,
) -> Result<f64> {
    match engine {
        Engine::Perturbative => Ok(SensorSolver::new(model)?.pair_moments(first, second, linewidth)?.g2()),
        Engine::Explicit { fraction } => Ok(g2_explicit(model, first, second, linewidth, fraction)?.g2()),
    }
}

/// Single-sensor autocorrelation by the leading-order hierarchy.
pub fn g2_autocorrelation(model: &LindbladModel, channel: Channel, detuning: f64, linewidth: f64) -> Result<f64> {
    SensorSolver::new(model)?.autocorrelation(channel, detuning, linewidth)
}

/// Moments of two sensor qubits attached explicitly with `ε = fraction·Γ`.
pub fn g2_explicit(
    model: &LindbladModel,
    first: (Channel, f64),
    second: (Channel, f64),
    linewidth: f64,
    fraction: f64,
) -> Result<SensorMoments> {
    if fraction > SENSOR_BOUND {
        return Err(Error::SensorCoupling {
            coupling: fraction * linewidth,
            bound: SENSOR_BOUND * linewidth,
        });
    }
    let eps = fraction * linewidth;
    let specs = [
        SensorSpec::new(first.1, linewidth, first.0).with_coupling(eps),
        SensorSpec::new(second.1, linewidth, second.0).with_coupling(eps),
    ];
    let full = model::attach_sensors(model, &specs)?;
    let l = liouvillian(&full);
    let rho = steady_state(&l)?;
    let s1 = &full.sensors[0].lowering;
    let s2 = &full.sensors[1].lowering;
    let n1 = &s1.adjoint() * s1;
    let n2 = &s2.adjoint() * s2;
    Ok(SensorMoments {
        n1: rho.expect(&n1).re,
        n2: rho.expect(&n2).re,
        n12: rho.expect(&(&n1 * &n2)).re,
    })
}

/// Steady population of one sensor coupled with its own `ε`.
pub fn sensor_population(model: &LindbladModel, spec: &SensorSpec, engine: Engine) -> Result<f64> {
    spec.validate()?;
    match engine {
        Engine::Perturbative => {
            let eps = spec.coupling();
            Ok(eps * eps * SensorSolver::new(model)?.population(spec.channel, spec.detuning, spec.linewidth)?)
        }
        Engine::Explicit { .. } => {
            let full = model::attach_sensors(model, std::slice::from_ref(spec))?;
            let rho = steady_state(&liouvillian(&full))?;
            let s = &full.sensors[0].lowering;
            Ok(rho.expect(&(&s.adjoint() * s)).re)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoPhotonMap {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    /// Row-major over `w1`.
    pub g2: Vec<f64>,
    pub linewidth: f64,
    pub channels: (Channel, Channel),
}

impl TwoPhotonMap {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.g2[i * self.w2.len() + j]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.w1.len().min(self.w2.len())).map(|i| self.at(i, i)).collect()
    }

    /// Largest `|g(i,j) − g(j,i)|` relative to the larger of the two.
    pub fn asymmetry(&self) -> f64 {
        let n = self.w1.len().min(self.w2.len());
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (self.at(i, j), self.at(j, i));
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-300));
            }
        }
        worst
    }
}

/// `g²_Γ` on the grid `w1 × w2`, one independent evaluation per point.
pub fn g2_map(
    model: &LindbladModel,
    linewidth: f64,
    w1: &[f64],
    w2: &[f64],
    channels: (Channel, Channel),
    engine: Engine,
) -> Result<TwoPhotonMap> {
    super::check_ascending(w1)?;
    super::check_ascending(w2)?;
    let solver = match engine {
        Engine::Perturbative => Some(SensorSolver::new(model)?),
        Engine::Explicit { .. } => None,
    };
    let points: Vec<(usize, usize)> = (0..w1.len()).flat_map(|i| (0..w2.len()).map(move |j| (i, j))).collect();
    let g2 = points
        .par_iter()
        .map(|&(i, j)| {
            let first = (channels.0, w1[i]);
            let second = (channels.1, w2[j]);
            match (&solver, engine) {
                (Some(s), _) => s.pair_moments(first, second, linewidth).map(|m| m.g2()),
                (None, Engine::Explicit { fraction }) => {
                    g2_explicit(model, first, second, linewidth, fraction).map(|m| m.g2())
                }
                (None, Engine::Perturbative) => unreachable!(),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(TwoPhotonMap {
        w1: w1.to_vec(),
        w2: w2.to_vec(),
        g2,
        linewidth,
        channels,
    })
}

/// `g²_Γ(ω, ω)` along the equal-frequency diagonal.
pub fn g2_diagonal(
    model: &LindbladModel,
    linewidth: f64,
    grid: &[f64],
    channels: (Channel, Channel),
) -> Result<Vec<f64>> {
    super::check_ascending(grid)?;
    let solver = SensorSolver::new(model)?;
    grid.par_iter()
        .map(|&w| {
            solver
                .pair_moments((channels.0, w), (channels.1, w), linewidth)
                .map(|m| m.g2())
        })
        .collect()
}
