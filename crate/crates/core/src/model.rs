//! Hamiltonians and dissipators of the driven biexciton, with cavity and
//! sensor extensions.
//!
//! Factor layout of the composite space: slot 0 is the biexciton, then the
//! cavity modes (`a` for a single H mode, `a_H` and `a_V` for the dual
//! mode), then one qubit per attached sensor.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ZERO};
use crate::qspace::{self, CompositeSpace, HilbertFactor, Operator, Polarization, DEFAULT_DIM_CAP};

/// Sensor couplings must satisfy `ε ≤ Γ · SENSOR_BOUND`.
pub const SENSOR_BOUND: f64 = 1e-2;
/// Default sensor coupling as a fraction of its linewidth.
pub const SENSOR_DEFAULT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Drive {
    #[default]
    #[serde(rename = "linearV")]
    LinearV,
    #[serde(rename = "circular")]
    Circular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Cavity {
    #[default]
    #[serde(rename = "none")]
    None,
    #[serde(rename = "singleH")]
    SingleH,
    #[serde(rename = "dualHV")]
    DualHV,
}

/// Emission operators a sensor or correlator can monitor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "sigmaH")]
    SigmaH,
    #[serde(rename = "sigmaV")]
    SigmaV,
    #[serde(rename = "a")]
    A,
    #[serde(rename = "aH")]
    AH,
    #[serde(rename = "aV")]
    AV,
}

impl Channel {
    pub fn label(self) -> &'static str {
        match self {
            Channel::SigmaH => "sigmaH",
            Channel::SigmaV => "sigmaV",
            Channel::A => "a",
            Channel::AH => "aH",
            Channel::AV => "aV",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sigmaH" | "H" => Ok(Channel::SigmaH),
            "sigmaV" | "V" => Ok(Channel::SigmaV),
            "a" => Ok(Channel::A),
            "aH" => Ok(Channel::AH),
            "aV" => Ok(Channel::AV),
            other => Err(Error::Input(format!("unknown channel `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    /// Sensor frequency relative to the laser.
    pub detuning: f64,
    /// Sensor linewidth `Γ`.
    pub linewidth: f64,
    /// Coupling `ε`; defaults to `Γ · SENSOR_DEFAULT`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    pub channel: Channel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl SensorSpec {
    pub fn new(detuning: f64, linewidth: f64, channel: Channel) -> Self {
        Self {
            detuning,
            linewidth,
            coupling: None,
            channel,
            label: None,
        }
    }

    pub fn with_coupling(mut self, eps: f64) -> Self {
        self.coupling = Some(eps);
        self
    }

    pub fn coupling(&self) -> f64 {
        self.coupling.unwrap_or(self.linewidth * SENSOR_DEFAULT)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.linewidth > 0.0) || !self.detuning.is_finite() {
            return Err(Error::Config("sensor linewidth must be positive".into()));
        }
        let eps = self.coupling();
        let bound = self.linewidth * SENSOR_BOUND;
        if !(eps > 0.0) || eps > bound * (1.0 + 1e-12) {
            return Err(Error::SensorCoupling { coupling: eps, bound });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub chi: f64,
    pub omega: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub g: f64,
    /// Exciton detuning; the two-photon resonance `χ/2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_x: Option<f64>,
    #[serde(default)]
    pub delta_c: f64,
    #[serde(default)]
    pub drive: Drive,
    #[serde(default)]
    pub cavity: Cavity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sensors: Vec<SensorSpec>,
}

fn one() -> f64 {
    1.0
}

impl ModelConfig {
    /// Bare biexciton (no cavity) under a vertically polarized drive.
    pub fn bare(chi: f64, omega: f64) -> Self {
        Self {
            chi,
            omega,
            gamma: 1.0,
            kappa: 0.0,
            g: 0.0,
            delta_x: None,
            delta_c: 0.0,
            drive: Drive::LinearV,
            cavity: Cavity::None,
            n_max: None,
            sensors: Vec::new(),
        }
    }

    pub fn delta_x(&self) -> f64 {
        self.delta_x.unwrap_or(self.chi / 2.0)
    }

    pub fn n_max(&self) -> usize {
        self.n_max.unwrap_or(match self.cavity {
            Cavity::DualHV => 3,
            _ => 4,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.chi, self.omega, self.gamma, self.kappa, self.g, self.delta_x(), self.delta_c];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("parameters must be finite".into()));
        }
        if !(self.chi > 0.0) {
            return Err(Error::Config("chi must be positive".into()));
        }
        if self.omega < 0.0 || self.gamma < 0.0 || self.kappa < 0.0 || self.g < 0.0 {
            return Err(Error::Config("omega, gamma, kappa and g must be non-negative".into()));
        }
        if self.cavity != Cavity::None && self.n_max() == 0 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        for s in &self.sensors {
            s.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Clone, Debug)]
pub struct Collapse {
    pub op: Operator,
    pub rate: f64,
    pub label: String,
}

#[derive(Clone, Debug)]
pub struct AttachedSensor {
    pub spec: SensorSpec,
    pub slot: usize,
    /// Sensor lowering operator on the full space.
    pub lowering: Operator,
}

#[derive(Clone, Debug)]
pub struct LindbladModel {
    pub config: Option<ModelConfig>,
    pub space: Arc<CompositeSpace>,
    pub hamiltonian: Operator,
    pub collapse: Vec<Collapse>,
    monitors: Vec<(Channel, Operator)>,
    pub sensors: Vec<AttachedSensor>,
}

impl LindbladModel {
    /// Model from explicit ingredients. Channels with zero rate are dropped.
    pub fn from_parts(hamiltonian: Operator, collapse: Vec<Collapse>) -> Result<Self> {
        let space = hamiltonian.space().clone();
        let defect = hamiltonian.hermiticity_defect();
        if defect > 1e-12 * linalg::fro_norm(hamiltonian.matrix()).max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        let mut kept = Vec::with_capacity(collapse.len());
        for c in collapse {
            if c.op.space() != &space && **c.op.space() != *space {
                return Err(Error::Dimension(format!("collapse `{}` acts on another space", c.label)));
            }
            if !(c.rate >= 0.0) || !c.rate.is_finite() {
                return Err(Error::Config(format!("collapse `{}` has invalid rate {}", c.label, c.rate)));
            }
            if c.rate > 0.0 {
                kept.push(c);
            }
        }
        Ok(Self {
            config: None,
            space,
            hamiltonian,
            collapse: kept,
            monitors: Vec::new(),
            sensors: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn with_monitor(mut self, channel: Channel, op: Operator) -> Self {
        self.monitors.retain(|(c, _)| *c != channel);
        self.monitors.push((channel, op));
        self
    }

    /// Emission operator for `channel` on the model's space.
    pub fn emission_operator(&self, channel: Channel) -> Result<&Operator> {
        self.monitors
            .iter()
            .find(|(c, _)| *c == channel)
            .map(|(_, op)| op)
            .ok_or_else(|| Error::Config(format!("model has no `{}` channel", channel.label())))
    }

    pub fn channels(&self) -> Vec<Channel> {
        self.monitors.iter().map(|(c, _)| *c).collect()
    }

    pub fn collapse_index(&self, label: &str) -> Option<usize> {
        self.collapse.iter().position(|c| c.label == label)
    }

    /// Projector onto a biexciton basis level.
    pub fn level_projector(&self, level: usize) -> Result<Operator> {
        self.space.biexciton_transition(0, level, level)
    }
}

/// Builds the model described by `config`, sensors included.
pub fn build(config: &ModelConfig) -> Result<LindbladModel> {
    build_impl(config, false)
}

/// The same model with the roles of H and V exchanged and the drive phase
/// conjugated. For a circularly driven dual cavity this is a relabeling of
/// [`build`], so both have the same Liouvillian spectrum.
pub fn build_mirrored(config: &ModelConfig) -> Result<LindbladModel> {
    build_impl(config, true)
}

fn build_impl(config: &ModelConfig, mirrored: bool) -> Result<LindbladModel> {
    config.validate()?;
    let n_max = config.n_max();
    let mut factors = vec![HilbertFactor::biexciton()];
    match config.cavity {
        Cavity::None => {}
        Cavity::SingleH => factors.push(HilbertFactor::boson(n_max)?),
        Cavity::DualHV => {
            factors.push(HilbertFactor::boson(n_max)?);
            factors.push(HilbertFactor::boson(n_max)?);
        }
    }
    let space = CompositeSpace::new(factors)?;

    let (pol_h, pol_v) = if mirrored {
        (Polarization::V, Polarization::H)
    } else {
        (Polarization::H, Polarization::V)
    };
    let sh = space.biexciton_lowering(0, pol_h)?;
    let sv = space.biexciton_lowering(0, pol_v)?;
    let pb = space.biexciton_transition(0, qspace::B, qspace::B)?;

    let mut h = &(&sh.adjoint() * &sh) + &(&sv.adjoint() * &sv);
    h = h.scale_re(config.delta_x());
    h = &h - &pb.scale_re(config.chi);

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phase = if mirrored { -1.0 } else { 1.0 };
    let drive_op = match config.drive {
        Drive::LinearV => sv.clone(),
        Drive::Circular => (&sh + &sv.scale(linalg::c(0.0, phase))).scale_re(s),
    };
    if config.omega > 0.0 {
        h = &h + &(&drive_op.adjoint() + &drive_op).scale_re(config.omega);
    }

    let mut monitors = vec![(Channel::SigmaH, sh.clone()), (Channel::SigmaV, sv.clone())];
    let mut collapse = Vec::new();
    let mut add_mode = |h: &mut Operator, a: Operator, sigma: &Operator, channel: Channel| {
        let n = &a.adjoint() * &a;
        *h = &*h + &n.scale_re(config.delta_c);
        *h = &*h + &(&(&a.adjoint() * sigma) + &(&sigma.adjoint() * &a)).scale_re(config.g);
        collapse.push(Collapse {
            op: a.clone(),
            rate: config.kappa,
            label: channel.label().to_string(),
        });
        monitors.push((channel, a));
    };
    match config.cavity {
        Cavity::None => {}
        Cavity::SingleH => add_mode(&mut h, space.annihilator(1)?, &sh, Channel::A),
        Cavity::DualHV => {
            add_mode(&mut h, space.annihilator(1)?, &sh, Channel::AH);
            add_mode(&mut h, space.annihilator(2)?, &sv, Channel::AV);
        }
    }
    for (x, name) in [(qspace::H, "H"), (qspace::V, "V")] {
        collapse.push(Collapse {
            op: space.biexciton_transition(0, x, qspace::B)?,
            rate: config.gamma,
            label: format!("B->{name}"),
        });
        collapse.push(Collapse {
            op: space.biexciton_transition(0, qspace::G, x)?,
            rate: config.gamma,
            label: format!("{name}->G"),
        });
    }

    let hamiltonian = Operator::hermitian(space.clone(), linalg::hermitian_part(h.matrix()))?;
    debug_assert!(h.hermiticity_defect() < 1e-9);
    let mut model = LindbladModel::from_parts(hamiltonian, collapse)?;
    model.monitors = monitors;
    let bare = ModelConfig {
        sensors: Vec::new(),
        ..config.clone()
    };
    model.config = Some(bare);
    if config.sensors.is_empty() {
        Ok(model)
    } else {
        attach_sensors(&model, &config.sensors)
    }
}

/// Appends one sensor qubit per spec, each coupled to its monitored
/// emission operator with strength `ε`.
pub fn attach_sensors(model: &LindbladModel, sensors: &[SensorSpec]) -> Result<LindbladModel> {
    attach_sensors_with_cap(model, sensors, DEFAULT_DIM_CAP)
}

pub fn attach_sensors_with_cap(model: &LindbladModel, sensors: &[SensorSpec], cap: usize) -> Result<LindbladModel> {
    for s in sensors {
        s.validate()?;
    }
    let base_slots = model.space.factors().len();
    let qubits = vec![HilbertFactor::qubit(); sensors.len()];
    let space = model.space.extended(&qubits, cap)?;

    let lift = |op: &Operator| op.extend_to(&space);
    let mut h = lift(&model.hamiltonian)?;
    let mut collapse = Vec::with_capacity(model.collapse.len() + sensors.len());
    for c in &model.collapse {
        collapse.push(Collapse {
            op: lift(&c.op)?,
            rate: c.rate,
            label: c.label.clone(),
        });
    }
    let mut monitors = Vec::with_capacity(model.monitors.len());
    for (ch, op) in &model.monitors {
        monitors.push((*ch, lift(op)?));
    }
    let mut attached = Vec::with_capacity(model.sensors.len() + sensors.len());
    for s in &model.sensors {
        attached.push(AttachedSensor {
            spec: s.spec.clone(),
            slot: s.slot,
            lowering: lift(&s.lowering)?,
        });
    }

    for (k, spec) in sensors.iter().enumerate() {
        let slot = base_slots + k;
        let target = monitors
            .iter()
            .find(|(c, _)| *c == spec.channel)
            .map(|(_, op)| op.clone())
            .ok_or_else(|| Error::Config(format!("sensor monitors missing channel `{}`", spec.channel.label())))?;
        let sigma = space.qubit_lowering(slot)?;
        let n = &sigma.adjoint() * &sigma;
        h = &h + &n.scale_re(spec.detuning);
        let coupling = &(&sigma.adjoint() * &target) + &(&target.adjoint() * &sigma);
        h = &h + &coupling.scale_re(spec.coupling());
        let label = spec
            .label
            .clone()
            .unwrap_or_else(|| format!("sensor{}", attached.len()));
        collapse.push(Collapse {
            op: sigma.clone(),
            rate: spec.linewidth,
            label,
        });
        attached.push(AttachedSensor {
            spec: spec.clone(),
            slot,
            lowering: sigma,
        });
    }

    let hamiltonian = Operator::hermitian(space.clone(), linalg::hermitian_part(h.matrix()))?;
    let mut out = LindbladModel::from_parts(hamiltonian, collapse)?;
    out.monitors = monitors;
    out.sensors = attached;
    out.config = model.config.clone().map(|mut c| {
        c.sensors = out.sensors.iter().map(|s| s.spec.clone()).collect();
        c
    });
    Ok(out)
}

/// `true` when the Hamiltonian has no element between `|H⟩` and the
/// `(G, V, B)` levels.
pub fn h_level_is_undressed(model: &LindbladModel) -> bool {
    let sp = &model.space;
    if sp.factors().len() != 1 {
        return false;
    }
    [qspace::G, qspace::V, qspace::B]
        .iter()
        .all(|&j| model.hamiltonian.elem(qspace::H, j) == ZERO && model.hamiltonian.elem(j, qspace::H) == ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::re;
    use crate::qspace::{B, G, H, V};

    #[test]
    fn bare_v_block_is_the_two_photon_matrix() {
        let cfg = ModelConfig {
            delta_x: Some(1000.0),
            ..ModelConfig::bare(2000.0, 500.0)
        };
        let m = build(&cfg).unwrap();
        let h = &m.hamiltonian;
        let idx = [G, V, B];
        let expect = [[0.0, 500.0, 0.0], [500.0, 1000.0, 500.0], [0.0, 500.0, 0.0]];
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                assert!((h.elem(i, j) - re(expect[r][c])).norm() < 1e-12, "({i},{j})");
            }
        }
        assert!(h_level_is_undressed(&m));
        assert_eq!(m.collapse.len(), 4);
    }

    #[test]
    fn undriven_hamiltonian_is_diagonal() {
        let m = build(&ModelConfig::bare(2000.0, 0.0)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(m.hamiltonian.elem(i, j), ZERO);
                }
            }
        }
        assert!(m.collapse.iter().all(|c| c.rate == 1.0));
    }

    #[test]
    fn dual_cavity_has_two_modes_and_two_cavity_channels() {
        let cfg = ModelConfig {
            kappa: 10.0,
            g: 100.0,
            drive: Drive::Circular,
            cavity: Cavity::DualHV,
            n_max: Some(2),
            ..ModelConfig::bare(4000.0, 8000.0)
        };
        let m = build(&cfg).unwrap();
        assert_eq!(m.dim(), 36);
        let labels: Vec<_> = m.collapse.iter().map(|c| c.label.as_str()).collect();
        assert!(labels.contains(&"aH") && labels.contains(&"aV"));
        let ah = m.emission_operator(Channel::AH).unwrap();
        let sh = m.emission_operator(Channel::SigmaH).unwrap();
        // ⟨G,1,0| H |H,0,0⟩ = g
        let sp = &m.space;
        let row = sp.index_of(&[G, 1, 0]);
        let col = sp.index_of(&[H, 0, 0]);
        assert!((m.hamiltonian.elem(row, col) - re(100.0)).norm() < 1e-12);
        assert!(linalg::fro_norm(ah.commutator(sh).matrix()) < 1e-12);
    }

    #[test]
    fn circular_drive_reaches_biexciton_in_two_steps() {
        let m = build(&ModelConfig {
            drive: Drive::Circular,
            ..ModelConfig::bare(100.0, 1.0)
        })
        .unwrap();
        let sh = m.emission_operator(Channel::SigmaH).unwrap();
        let sv = m.emission_operator(Channel::SigmaV).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sc = (sh + &sv.scale(crate::linalg::I)).scale_re(s);
        let up2 = &sc.adjoint() * &sc.adjoint();
        assert!((up2.elem(B, G).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tight_cap_is_reported() {
        let cfg = ModelConfig {
            cavity: Cavity::DualHV,
            n_max: Some(40),
            ..ModelConfig::bare(10.0, 1.0)
        };
        assert!(matches!(build(&cfg), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn sensor_bound_is_enforced() {
        let m = build(&ModelConfig::bare(10.0, 1.0)).unwrap();
        let bad = SensorSpec::new(0.0, 10.0, Channel::SigmaH).with_coupling(0.2);
        assert!(matches!(attach_sensors(&m, &[bad]), Err(Error::SensorCoupling { .. })));
        let ok = SensorSpec::new(0.0, 10.0, Channel::SigmaH).with_coupling(0.1);
        let ms = attach_sensors(&m, &[ok]).unwrap();
        assert_eq!(ms.dim(), 8);
        assert_eq!(ms.collapse.len(), 5);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ModelConfig {
            kappa: 10.0,
            g: 100.0,
            cavity: Cavity::SingleH,
            delta_c: 12.5,
            sensors: vec![SensorSpec::new(1.0, 10.0, Channel::A)],
            ..ModelConfig::bare(4000.0, 1000.0)
        };
        let back = ModelConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        let text = r#"{"chi": 2000, "omega": 500, "drive": "circular", "cavity": "dualHV", "n_max": 2}"#;
        let parsed = ModelConfig::from_json(text).unwrap();
        assert_eq!(parsed.drive, Drive::Circular);
        assert_eq!(parsed.delta_x(), 1000.0);
        assert!(ModelConfig::from_json(r#"{"chi": 1, "omega": 1, "bogus": 3}"#).is_err());
    }
}
