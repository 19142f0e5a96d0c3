//! CSV and JSON schemas for every output table.
//!
//! CSV files may open with `# key=value` metadata lines; readers skip them
//! as comments and recover the values through [`metadata`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Channel;
use crate::solver::{PolarizationPoint, SpectrumResult, TwoPhotonMap};
use crate::tomography::{PairDensityMatrix, TomographyPoint};
use crate::trajectories::{Click, ClickRecord, CountingDistribution};

fn csv_err(e: csv::Error) -> Error {
    Error::Input(format!("csv: {e}"))
}

/// Serializes `rows` under `meta` comment lines.
pub fn write_table<T: Serialize>(meta: &[(&str, String)], rows: &[T]) -> Result<String> {
    let mut out = String::new();
    for (k, v) in meta {
        out.push_str(&format!("# {k}={v}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Input(format!("csv: {e}")))?;
    out.push_str(&String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))?);
    Ok(out)
}

pub fn read_table<T: DeserializeOwned>(text: &str, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let found: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Input(format!("expected columns {header:?}, found {found:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// `# key=value` lines at the top of a CSV document.
pub fn metadata(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map_while(|l| l.strip_prefix('#'))
        .filter_map(|l| l.trim().split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn meta_f64(meta: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    meta.get(key)
        .ok_or_else(|| Error::Input(format!("missing metadata `{key}`")))?
        .parse()
        .map_err(|e| Error::Input(format!("metadata `{key}`: {e}")))
}

#[derive(Serialize, Deserialize)]
struct SpectrumRow {
    detuning: f64,
    value: f64,
}

pub const SPECTRUM_COLUMNS: [&str; 2] = ["detuning", "value"];

pub fn spectrum_to_csv(s: &SpectrumResult) -> Result<String> {
    let rows: Vec<SpectrumRow> = s.grid.iter().zip(&s.values).map(|(&detuning, &value)| SpectrumRow { detuning, value }).collect();
    write_table(
        &[
            ("channel", s.channel.clone()),
            ("coherent_weight", s.coherent_weight.to_string()),
            ("population", s.population.to_string()),
        ],
        &rows,
    )
}

pub fn spectrum_from_csv(text: &str) -> Result<SpectrumResult> {
    let meta = metadata(text);
    let rows: Vec<SpectrumRow> = read_table(text, &SPECTRUM_COLUMNS)?;
    Ok(SpectrumResult {
        channel: meta.get("channel").cloned().unwrap_or_default(),
        grid: rows.iter().map(|r| r.detuning).collect(),
        values: rows.iter().map(|r| r.value).collect(),
        coherent_weight: meta_f64(&meta, "coherent_weight")?,
        population: meta_f64(&meta, "population")?,
    })
}

#[derive(Serialize, Deserialize)]
struct MapRow {
    w1: f64,
    w2: f64,
    g2: f64,
}

pub const MAP_COLUMNS: [&str; 3] = ["w1", "w2", "g2"];

pub fn map_to_csv(m: &TwoPhotonMap) -> Result<String> {
    let mut rows = Vec::with_capacity(m.g2.len());
    for (i, &a) in m.w1.iter().enumerate() {
        for (j, &b) in m.w2.iter().enumerate() {
            rows.push(MapRow { w1: a, w2: b, g2: m.at(i, j) });
        }
    }
    write_table(
        &[
            ("linewidth", m.linewidth.to_string()),
            ("channels", format!("{},{}", m.channels.0.label(), m.channels.1.label())),
        ],
        &rows,
    )
}

pub fn map_from_csv(text: &str) -> Result<TwoPhotonMap> {
    let meta = metadata(text);
    let rows: Vec<MapRow> = read_table(text, &MAP_COLUMNS)?;
    let mut w1: Vec<f64> = Vec::new();
    for r in &rows {
        if w1.last() != Some(&r.w1) {
            w1.push(r.w1);
        }
    }
    if w1.is_empty() || !rows.len().is_multiple_of(w1.len()) {
        return Err(Error::Input("map rows do not form a grid".into()));
    }
    let n2 = rows.len() / w1.len();
    let w2: Vec<f64> = rows[..n2].iter().map(|r| r.w2).collect();
    let (c1, c2) = meta
        .get("channels")
        .and_then(|s| s.split_once(','))
        .ok_or_else(|| Error::Input("missing metadata `channels`".into()))?;
    Ok(TwoPhotonMap {
        w1,
        w2,
        g2: rows.iter().map(|r| r.g2).collect(),
        linewidth: meta_f64(&meta, "linewidth")?,
        channels: (Channel::parse(c1)?, Channel::parse(c2)?),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalRow {
    pub w: f64,
    pub g2: f64,
}

pub const DIAGONAL_COLUMNS: [&str; 2] = ["w", "g2"];

/// One Ω sample of a cavity resonance track.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub resonance: String,
    pub omega: f64,
    pub delta_c: f64,
    pub n_a: f64,
    pub g2_0: Option<f64>,
    pub g2_2_0: Option<f64>,
    pub pi: Option<f64>,
    pub pi_theta: Option<f64>,
    pub pi_lambda: Option<f64>,
    pub pi_spread: Option<f64>,
}

pub const SWEEP_COLUMNS: [&str; 10] = [
    "resonance", "omega", "delta_c", "n_a", "g2_0", "g2_2_0", "pi", "pi_theta", "pi_lambda", "pi_spread",
];

#[derive(Serialize, Deserialize)]
struct ClickRow {
    t: f64,
    channel: String,
}

pub const CLICK_COLUMNS: [&str; 2] = ["t", "channel"];

/// Click records as `t,channel` blocks, one per trajectory, each introduced
/// by a `# trajectory=k,t_start,t_end` line.
pub fn clicks_to_csv(records: &[ClickRecord]) -> Result<String> {
    let mut out = String::from("t,channel\n");
    for (k, r) in records.iter().enumerate() {
        out.push_str(&format!("# trajectory={k},{},{}\n", r.t_start, r.t_end));
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for c in &r.clicks {
            w.serialize(ClickRow { t: c.time, channel: r.channels[c.channel].clone() }).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Input(format!("csv: {e}")))?;
        out.push_str(&String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))?);
    }
    Ok(out)
}

pub fn clicks_from_csv(text: &str, channels: &[String]) -> Result<Vec<ClickRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("t,channel") {
        return Err(Error::Input("expected columns [\"t\", \"channel\"]".into()));
    }
    let mut out: Vec<ClickRecord> = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        if let Some(rest) = line.strip_prefix("# trajectory=") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Input(format!("bad trajectory line `{line}`")));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Input(e.to_string()));
            out.push(ClickRecord {
                t_start: num(parts[1])?,
                t_end: num(parts[2])?,
                channels: channels.to_vec(),
                clicks: Vec::new(),
                populations: None,
                samples: 0,
            });
            continue;
        }
        let rec = out.last_mut().ok_or_else(|| Error::Input("click before any trajectory header".into()))?;
        let (t, ch) = line.split_once(',').ok_or_else(|| Error::Input(format!("bad click row `{line}`")))?;
        let channel = rec
            .channel_index(ch.trim())
            .ok_or_else(|| Error::Input(format!("unknown channel `{ch}`")))?;
        let time = t.trim().parse().map_err(|e| Error::Input(format!("click time: {e}")))?;
        rec.clicks.push(Click { time, channel });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct CountRow {
    n: usize,
    p: f64,
}

pub const COUNT_COLUMNS: [&str; 2] = ["n", "p"];

pub fn counting_to_csv(d: &CountingDistribution) -> Result<String> {
    let rows: Vec<CountRow> = d.probabilities.iter().enumerate().map(|(n, &p)| CountRow { n, p }).collect();
    write_table(&[("window", d.window.to_string()), ("windows", d.windows.to_string())], &rows)
}

pub fn counting_from_csv(text: &str) -> Result<CountingDistribution> {
    let meta = metadata(text);
    let rows: Vec<CountRow> = read_table(text, &COUNT_COLUMNS)?;
    if rows.iter().enumerate().any(|(k, r)| r.n != k) {
        return Err(Error::Input("counts must be listed for n = 0, 1, 2, …".into()));
    }
    if rows.iter().any(|r| !(r.p >= 0.0)) {
        return Err(Error::Input("negative probability".into()));
    }
    let windows = meta.get("windows").map(|s| s.parse::<usize>()).transpose().map_err(|e| Error::Input(e.to_string()))?;
    Ok(CountingDistribution {
        window: meta_f64(&meta, "window")?,
        probabilities: rows.iter().map(|r| r.p).collect(),
        windows: windows.unwrap_or(0),
    })
}

#[derive(Serialize, Deserialize)]
struct TomoRow {
    tau: f64,
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "F")]
    f: f64,
    purity: f64,
    #[serde(rename = "S_L")]
    s_l: f64,
}

pub const TOMOGRAPHY_COLUMNS: [&str; 5] = ["tau", "C", "F", "purity", "S_L"];

pub fn tomography_to_csv(points: &[TomographyPoint]) -> Result<String> {
    let rows: Vec<TomoRow> = points
        .iter()
        .map(|p| TomoRow { tau: p.tau, c: p.concurrence, f: p.fidelity, purity: p.purity, s_l: p.linear_entropy })
        .collect();
    write_table(&[], &rows)
}

/// `(τ, C, F, Tr ρ², S_L)` rows.
pub fn tomography_from_csv(text: &str) -> Result<Vec<[f64; 5]>> {
    let rows: Vec<TomoRow> = read_table(text, &TOMOGRAPHY_COLUMNS)?;
    Ok(rows.iter().map(|r| [r.tau, r.c, r.f, r.purity, r.s_l]).collect())
}

/// Pair density matrix with separate real and imaginary parts, basis
/// `(HH, HV, VH, VV)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub tau: f64,
    pub basis: Vec<String>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixRecord {
    pub fn new(m: &PairDensityMatrix) -> Self {
        Self {
            tau: m.tau,
            basis: ["HH", "HV", "VH", "VV"].iter().map(|s| s.to_string()).collect(),
            re: (0..4).map(|i| (0..4).map(|j| m.matrix[(i, j)].re).collect()).collect(),
            im: (0..4).map(|i| (0..4).map(|j| m.matrix[(i, j)].im).collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<PairDensityMatrix> {
        if self.re.len() != 4 || self.im.len() != 4 || self.re.iter().chain(&self.im).any(|r| r.len() != 4) {
            return Err(Error::Input("pair density matrix must be 4×4".into()));
        }
        let m = faer::Mat::from_fn(4, 4, |i, j| crate::linalg::c(self.re[i][j], self.im[i][j]));
        Ok(PairDensityMatrix { matrix: m, tau: self.tau, normalized: true })
    }
}

pub const POLARIZATION_COLUMNS: [&str; 7] = ["delta_c", "n_h", "n_v", "g2_hh", "g2_vv", "g2_hv", "csi_ratio"];

pub fn polarization_to_csv(points: &[PolarizationPoint]) -> Result<String> {
    write_table(&[], points)
}

pub fn polarization_from_csv(text: &str) -> Result<Vec<PolarizationPoint>> {
    read_table(text, &POLARIZATION_COLUMNS)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        if !dir.is_dir() {
            return Err(Error::Input(format!("output directory {} does not exist", dir.display())));
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_is_read_back() {
        let text = "# a=1\n# name = x\nw,s\n0,1\n";
        let m = metadata(text);
        assert_eq!(m["a"], "1");
        assert_eq!(m["name"], "x");
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(counting_from_csv("# window=1\nk,p\n0,1\n").is_err());
    }

    #[test]
    fn counting_round_trip() {
        let d = CountingDistribution { window: 2.5, probabilities: vec![0.5, 0.25, 0.25], windows: 4 };
        assert_eq!(counting_from_csv(&counting_to_csv(&d).unwrap()).unwrap(), d);
    }

    #[test]
    fn click_round_trip() {
        let rec = ClickRecord {
            t_start: 5.0,
            t_end: 9.0,
            channels: vec!["a".into(), "H->G".into()],
            clicks: vec![Click { time: 5.5, channel: 0 }, Click { time: 6.25, channel: 1 }],
            populations: None,
            samples: 0,
        };
        let text = clicks_to_csv(&[rec.clone(), rec.clone()]).unwrap();
        assert_eq!(clicks_from_csv(&text, &rec.channels).unwrap(), vec![rec.clone(), rec]);
    }

    #[test]
    fn sweep_rows_allow_missing_values() {
        let rows = vec![SweepRow {
            resonance: "I".into(),
            omega: 100.0,
            delta_c: 0.0,
            n_a: 0.0,
            g2_0: None,
            g2_2_0: Some(1.5),
            pi: None,
            pi_theta: None,
            pi_lambda: None,
            pi_spread: None,
        }];
        let text = write_table(&[], &rows).unwrap();
        assert_eq!(read_table::<SweepRow>(&text, &SWEEP_COLUMNS).unwrap(), rows);
    }
}
