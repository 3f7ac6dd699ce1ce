//! Spec files, builtin specs, deterministic CSV emission and hashing.

use crate::geometry::{CarpetSpec, Similarity};
use crate::rational::{format_ratio, parse_ratio};
use crate::scalar::Real;
use crate::symmetry::SymmetryElement;
use crate::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

/// On-disk carpet spec: `k`, `N`, and the maps with fraction-string
/// translations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecFile {
    pub k: u32,
    #[serde(rename = "N")]
    pub n: u32,
    pub maps: Vec<MapEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapEntry {
    pub sym: String,
    pub tx: String,
    pub ty: String,
}

pub fn spec_to_file(spec: &CarpetSpec) -> SpecFile {
    SpecFile {
        k: spec.k,
        n: spec.n_maps(),
        maps: spec
            .maps
            .iter()
            .map(|m| MapEntry {
                sym: m.sym.name().to_string(),
                tx: format_ratio(&m.tx),
                ty: format_ratio(&m.ty),
            })
            .collect(),
    }
}

pub fn spec_from_file(file: &SpecFile) -> Result<CarpetSpec, Error> {
    if file.maps.len() != file.n as usize {
        return Err(Error::InvalidSpec(format!(
            "N = {} but {} maps given",
            file.n,
            file.maps.len()
        )));
    }
    let maps = file
        .maps
        .iter()
        .map(|m| {
            let sym = SymmetryElement::parse(&m.sym)
                .ok_or_else(|| Error::InvalidSpec(format!("unknown symmetry {:?}", m.sym)))?;
            let tx = parse_ratio(&m.tx).map_err(Error::InvalidSpec)?;
            let ty = parse_ratio(&m.ty).map_err(Error::InvalidSpec)?;
            Ok(Similarity { sym, tx, ty })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(CarpetSpec { k: file.k, maps })
}

pub fn spec_to_json(spec: &CarpetSpec) -> String {
    serde_json::to_string_pretty(&spec_to_file(spec)).expect("serializable")
}

pub fn spec_from_json(text: &str) -> Result<CarpetSpec, Error> {
    let file: SpecFile =
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    spec_from_file(&file)
}

/// Builtin spec names: `sc3`, or `slide:z=p/q`.
pub fn builtin_spec(name: &str) -> Result<CarpetSpec, Error> {
    if name == "sc3" {
        return Ok(CarpetSpec::sc3());
    }
    if let Some(rest) = name.strip_prefix("slide:z=") {
        let z = parse_ratio(rest).map_err(Error::InvalidSpec)?;
        return crate::metric::sliding_family_spec(&z);
    }
    Err(Error::InvalidSpec(format!("unknown builtin spec {name:?}")))
}

/// Canonical hash of a spec (over its canonical JSON).
pub fn spec_hash(spec: &CarpetSpec) -> String {
    let canon = serde_json::to_string(&spec_to_file(spec)).expect("serializable");
    hash_text(&canon)
}

pub fn hash_text(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let out = h.finalize();
    out.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Floating values are printed with 12 significant digits.
pub fn fmt_float(v: Real) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    format!("{v:.11e}")
}

/// CSV with a header row and a trailing metadata comment block.
pub struct CsvDoc {
    header: String,
    rows: Vec<String>,
    metadata: Vec<(String, String)>,
}

impl CsvDoc {
    pub fn new(header: &str) -> CsvDoc {
        CsvDoc { header: header.to_string(), rows: Vec::new(), metadata: Vec::new() }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.rows.push(fields.join(","));
    }

    pub fn meta(&mut self, key: &str, value: &str) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header);
        for r in &self.rows {
            let _ = writeln!(out, "{r}");
        }
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        out
    }
}

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
