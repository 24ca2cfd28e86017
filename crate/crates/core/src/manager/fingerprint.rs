use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::graph::ModuleGraph;
use crate::analysis::RegisteredAnalysis;

/// 64-bit digest identifying one module's analysis inputs: its source, the
/// analysis (with its base chain) and, recursively, its imports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fingerprint(pub u64);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for Fingerprint {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u64::from_str_radix(s, 16).map(Fingerprint)
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Fingerprint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.len() != 16 {
            return Err(serde::de::Error::custom("fingerprint must be 16 hex digits"));
        }
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Name and version of every analysis whose results feed into one run,
/// deepest base first.
pub type AnalysisKey = Vec<(String, u32)>;

pub fn analysis_key(chain: &[&RegisteredAnalysis]) -> AnalysisKey {
    chain
        .iter()
        .map(|a| (a.name().to_string(), a.version()))
        .collect()
}

/// Fingerprint of one module. `imports` must list every direct import with
/// its own fingerprint; their order does not matter.
pub fn fingerprint(
    source_hash: u64,
    key: &[(String, u32)],
    imports: &BTreeMap<String, Fingerprint>,
) -> Fingerprint {
    let mut h = Sha256::new();
    h.update(b"cass-fingerprint-1\0");
    h.update(source_hash.to_be_bytes());
    for (name, version) in key {
        h.update(name.as_bytes());
        h.update([0]);
        h.update(version.to_be_bytes());
    }
    h.update([0xff]);
    for (name, fp) in imports {
        h.update(name.as_bytes());
        h.update([0]);
        h.update(fp.0.to_be_bytes());
    }
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    Fingerprint(u64::from_be_bytes(first))
}

/// Fingerprints of every module in `order`, which must list imports before
/// importers.
pub fn compute_fingerprints(
    graph: &ModuleGraph,
    order: &[String],
    key: &[(String, u32)],
) -> BTreeMap<String, Fingerprint> {
    let mut out: BTreeMap<String, Fingerprint> = BTreeMap::new();
    for m in order {
        let imports = graph.edges[m]
            .iter()
            .map(|i| (i.clone(), out[i]))
            .collect();
        let fp = fingerprint(graph.modules[m].source_hash, key, &imports);
        out.insert(m.clone(), fp);
    }
    out
}
