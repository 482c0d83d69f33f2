//! Deterministic artifacts: CSV with fixed float formatting, JSON with
//! sorted keys, and a sha256 manifest of everything written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::AuditReport;
use crate::avoidance::DistanceRow;
use crate::density::HuiskenRow;
use crate::error::{ensure, Error, Result};
use crate::flow::{shrinker_mean_convexity, FlowBase, TimeMap, Trajectory};
use crate::modes::ModeTrack;
use crate::spectrum::Spectrum;

/// 17 significant digits in scientific notation, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        ensure(row.len() == self.header.len(), || {
            format!("row has {} cells, header has {}", row.len(), self.header.len())
        })?;
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::numerical(format!("non-UTF-8 CSV output: {e}")))
    }
}

/// Pretty JSON with object keys in sorted order and a trailing newline.
pub fn to_stable_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Eigenfunction table: one row per node, one column per mode.
pub fn eigenfunction_csv(spec: &Spectrum) -> Result<CsvTable> {
    let mut t = CsvTable::new(&["node", "s", "mode", "value"]);
    for (j, phi) in spec.phis.iter().enumerate() {
        for (i, v) in phi.iter().enumerate() {
            t.push(vec![i.into(), spec.s[i].into(), j.into(), (*v).into()])?;
        }
    }
    Ok(t)
}

/// Per-node trajectory table with the graph's mean curvature and the
/// shrinker mean convexity `2tH + <x, ν>` of the unrescaled slice.
pub fn trajectory_csv(traj: &Trajectory, base: &FlowBase, map: TimeMap) -> Result<CsvTable> {
    let mc = shrinker_mean_convexity(traj, base, map)?;
    let mut t = CsvTable::new(&["tau", "node", "u", "H", "v", "2tH_plus_xnu"]);
    for (st, slice) in traj.states.iter().zip(&mc.slices) {
        let speeds = base.graph_speeds(&st.u)?;
        for (i, sp) in speeds.iter().enumerate() {
            t.push(vec![st.tau.into(), i.into(), st.u[i].into(), sp.mean_curvature.into(), sp.v.into(), slice.values[i].into()])?;
        }
    }
    Ok(t)
}

pub fn mode_track_csv(track: &ModeTrack) -> Result<CsvTable> {
    let mut t = CsvTable::new(&["tau", "below", "at", "above", "total", "delta"]);
    for k in 0..track.len() {
        t.push(vec![
            track.taus[k].into(),
            track.below[k].into(),
            track.at[k].into(),
            track.above[k].into(),
            track.total[k].into(),
            track.delta[k].into(),
        ])?;
    }
    Ok(t)
}

pub fn density_csv(rows: &[HuiskenRow]) -> Result<CsvTable> {
    let mut t = CsvTable::new(&["r", "theta", "t", "dissipation"]);
    for row in rows {
        t.push(vec![row.r.into(), row.theta.into(), row.t.into(), row.dissipation.into()])?;
    }
    Ok(t)
}

pub fn distance_csv(rows: &[DistanceRow]) -> Result<CsvTable> {
    let mut t = CsvTable::new(&["t", "d_t"]);
    for row in rows {
        t.push(vec![row.t.into(), row.d.into()])?;
    }
    Ok(t)
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Record of one run: what was asked for and a digest of every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_digest: String,
    /// File name to sha256 of its bytes.
    pub outputs: BTreeMap<String, String>,
    pub audits: Vec<AuditReport>,
    pub passed: bool,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        ensure(path.is_file(), || format!("no {MANIFEST_NAME} in {}", dir.display()))?;
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Writes files into one directory and remembers their digests.
#[derive(Debug)]
pub struct OutputDir {
    pub root: PathBuf,
    outputs: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(OutputDir { root, outputs: BTreeMap::new() })
    }

    pub fn write_text(&mut self, name: &str, content: &str) -> Result<()> {
        fs::write(self.root.join(name), content)?;
        self.outputs.insert(name.to_string(), sha256_hex(content.as_bytes()));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write_text(name, &to_stable_json(value)?)
    }

    pub fn write_csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        self.write_text(name, &table.to_csv_string()?)
    }

    pub fn outputs(&self) -> &BTreeMap<String, String> {
        &self.outputs
    }

    /// Writes the manifest last; it is not listed among its own outputs.
    pub fn finish(self, mut manifest: Manifest) -> Result<Manifest> {
        manifest.outputs = self.outputs;
        fs::write(self.root.join(MANIFEST_NAME), to_stable_json(&manifest)?)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_text() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_layout() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec![1usize.into(), 0.5.into()]).unwrap();
        assert!(t.push(vec![1usize.into()]).is_err());
        assert_eq!(t.to_csv_string().unwrap(), "a,b\n1,5.0000000000000000e-1\n");
    }

    #[test]
    fn json_keys_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: u8,
        }
        let s = to_stable_json(&S { zeta: 1, alpha: 2 }).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
    }

    #[test]
    fn digest_known_value() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
