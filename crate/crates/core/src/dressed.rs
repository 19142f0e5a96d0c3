//! Closed-form dressed states of the two-photon driven biexciton and the
//! transition lines they predict.
//!
//! In the rotating frame at the two-photon resonance the `(G, V, B)` block
//! of a rung is
//!
//! ```text
//! [[0, Ω, 0], [Ω, χ/2, Ω], [0, Ω, 0]]
//! ```
//!
//! with eigenvalues `Δ± = (χ ± s)/4`, `Δ0 = 0`, `s = √(χ² + 32Ω²)`. The
//! undressed `|H⟩` sits at `χ/2`. One-photon lines connect a dressed state
//! to `|H⟩` one rung below; leapfrog lines connect dressed states two rungs
//! apart, and are reported per photon: a pair with `ω₁ = ω₂ = ω` sits at
//! `ω − ω_L = Δ^2P`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn root(chi: f64, omega: f64) -> f64 {
    (chi * chi + 32.0 * omega * omega).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DressedEigensystem {
    pub delta_plus: f64,
    pub delta_zero: f64,
    pub delta_minus: f64,
    /// `|+⟩, |0⟩, |−⟩` as amplitudes on `(G, V, B)`.
    pub states: [[f64; 3]; 3],
    /// Drive photons missing from each component relative to `|G⟩|n⟩`.
    pub photon_offset: [usize; 3],
}

impl DressedEigensystem {
    pub fn energies(&self) -> [f64; 3] {
        [self.delta_plus, self.delta_zero, self.delta_minus]
    }
}

pub fn eigensystem(chi: f64, omega: f64) -> DressedEigensystem {
    assert!(chi >= 0.0 && omega >= 0.0);
    let s = root(chi, omega);
    let delta_plus = (s + chi) / 4.0;
    let delta_minus = -(s - chi) / 4.0;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let zero = [h, 0.0, -h];
    let states = if omega == 0.0 {
        // |+⟩ → |V⟩ at χ/2; the G, B pair is degenerate at 0.
        [[0.0, 1.0, 0.0], zero, [h, 0.0, h]]
    } else {
        let branch = |d: f64| {
            let x = d / omega;
            let n = (2.0 + x * x).sqrt();
            [1.0 / n, x / n, 1.0 / n]
        };
        [branch(delta_plus), zero, branch(delta_minus)]
    };
    DressedEigensystem {
        delta_plus,
        delta_zero: 0.0,
        delta_minus,
        states,
        photon_offset: [0, 1, 2],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    OnePhoton,
    TwoPhoton,
}

impl LineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LineKind::OnePhoton => "one_photon",
            LineKind::TwoPhoton => "two_photon",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub label: String,
    pub detuning: f64,
    pub kind: LineKind,
    pub multiplicity: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnePhotonLines {
    pub delta_i: f64,
    pub delta_ii: f64,
    pub delta_iii: f64,
}

impl OnePhotonLines {
    /// `±Δ_I, ±Δ_II, ±Δ_III`.
    pub fn all(&self) -> [f64; 6] {
        [
            self.delta_i,
            self.delta_ii,
            self.delta_iii,
            -self.delta_i,
            -self.delta_ii,
            -self.delta_iii,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeapfrogLines {
    pub delta_i: f64,
    pub delta_ii: f64,
    pub delta_iii: f64,
    pub delta_iv: f64,
}

impl LeapfrogLines {
    /// The seven distinct per-photon positions, ascending.
    pub fn all(&self) -> [f64; 7] {
        let mut v = [
            -self.delta_iv,
            -self.delta_ii,
            -self.delta_iii,
            self.delta_i,
            self.delta_iii,
            self.delta_ii,
            self.delta_iv,
        ];
        v.sort_by(f64::total_cmp);
        v
    }

    /// Resonance tracks I–IV in order.
    pub fn tracks(&self) -> [f64; 4] {
        [self.delta_i, self.delta_ii, self.delta_iii, self.delta_iv]
    }
}

pub fn one_photon_lines(chi: f64, omega: f64) -> OnePhotonLines {
    let s = root(chi, omega);
    OnePhotonLines {
        delta_i: (s - chi) / 4.0,
        delta_ii: -chi / 2.0,
        delta_iii: -(s + chi) / 4.0,
    }
}

pub fn leapfrog_lines(chi: f64, omega: f64) -> LeapfrogLines {
    let s = root(chi, omega);
    LeapfrogLines {
        delta_i: 0.0,
        delta_ii: (s + chi) / 8.0,
        delta_iii: (s - chi) / 8.0,
        delta_iv: s / 4.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineTable {
    pub chi: f64,
    pub omega: f64,
    pub lines: Vec<Line>,
}

pub const TRACK_LABELS: [&str; 4] = ["I", "II", "III", "IV"];

impl LineTable {
    pub fn new(chi: f64, omega: f64) -> Self {
        let one = one_photon_lines(chi, omega);
        let two = leapfrog_lines(chi, omega);
        let mut lines = Vec::with_capacity(13);
        let line = |label: String, detuning, kind, multiplicity| Line {
            label,
            detuning,
            kind,
            multiplicity,
        };
        for (name, d) in TRACK_LABELS[..3].iter().zip([one.delta_i, one.delta_ii, one.delta_iii]) {
            lines.push(line(name.to_string(), d, LineKind::OnePhoton, 1));
        }
        for (name, d) in TRACK_LABELS[..3].iter().zip([one.delta_i, one.delta_ii, one.delta_iii]) {
            lines.push(line(format!("-{name}"), -d, LineKind::OnePhoton, 1));
        }
        lines.push(line("2P_I".into(), two.delta_i, LineKind::TwoPhoton, 3));
        for (name, d) in TRACK_LABELS[1..].iter().zip([two.delta_ii, two.delta_iii, two.delta_iv]) {
            lines.push(line(format!("2P_{name}"), d, LineKind::TwoPhoton, 1));
        }
        for (name, d) in TRACK_LABELS[1..].iter().zip([two.delta_ii, two.delta_iii, two.delta_iv]) {
            lines.push(line(format!("-2P_{name}"), -d, LineKind::TwoPhoton, 1));
        }
        Self { chi, omega, lines }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,detuning_gamma,kind,multiplicity\n");
        for l in &self.lines {
            let _ = writeln!(out, "{},{},{},{}", l.label, l.detuning, l.kind.as_str(), l.multiplicity);
        }
        out
    }

    pub fn from_csv(chi: f64, omega: f64, text: &str) -> Result<Self> {
        let mut rdr = text.lines();
        match rdr.next() {
            Some("label,detuning_gamma,kind,multiplicity") => {}
            _ => return Err(Error::Input("line table header mismatch".into())),
        }
        let mut lines = Vec::new();
        for (no, row) in rdr.enumerate().filter(|(_, r)| !r.trim().is_empty()) {
            let cols: Vec<&str> = row.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Input(format!("line table row {} has {} columns", no + 2, cols.len())));
            }
            let kind = match cols[2] {
                "one_photon" => LineKind::OnePhoton,
                "two_photon" => LineKind::TwoPhoton,
                k => return Err(Error::Input(format!("unknown line kind `{k}`"))),
            };
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Input(format!("row {}: {e}", no + 2)));
            lines.push(Line {
                label: cols[0].to_string(),
                detuning: num(cols[1])?,
                kind,
                multiplicity: cols[3]
                    .trim()
                    .parse()
                    .map_err(|e| Error::Input(format!("row {}: {e}", no + 2)))?,
            });
        }
        Ok(Self { chi, omega, lines })
    }
}
