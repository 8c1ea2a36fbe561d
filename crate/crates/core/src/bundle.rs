//! Certificate bundles.
//!
//! A bundle directory holds `manifest.json`, `certificates.json` and one
//! Matrix Market file per payload under `payloads/`. The manifest records a
//! SHA-256 hash for every payload file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mtx;

pub const SCHEMA_VERSION: u32 = 1;
pub const VERIFY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadRef {
    pub name: String,
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub parameters: serde_json::Value,
    pub tolerances: BTreeMap<String, f64>,
    /// Seconds since the Unix epoch.
    pub created_unix: u64,
    pub inputs: Vec<InputRef>,
    pub payloads: Vec<PayloadRef>,
}

impl Manifest {
    pub fn new(command: &str, parameters: serde_json::Value, tolerances: BTreeMap<String, f64>) -> Self {
        let created_unix =
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Manifest {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            parameters,
            tolerances,
            created_unix,
            inputs: Vec::new(),
            payloads: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    AtMost,
    AtLeast,
    /// Recorded, never fails.
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    pub pass: bool,
}

/// JSON has no infinities.
fn finite(v: f64) -> f64 {
    if v.is_nan() {
        f64::MAX
    } else {
        v.clamp(-f64::MAX, f64::MAX)
    }
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value: finite(value), relation: Relation::AtMost, limit: Some(limit), pass: value <= limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value: finite(value), relation: Relation::AtLeast, limit: Some(limit), pass: value >= limit }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Check { name: name.into(), value: finite(value), relation: Relation::Info, limit: None, pass: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub checks: Vec<Check>,
    /// Power-norm sequences and similar series.
    pub sequences: BTreeMap<String, Vec<f64>>,
    pub all_pass: bool,
}

impl Certificates {
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn sequence(&mut self, name: impl Into<String>, values: &[f64]) {
        self.sequences.insert(name.into(), values.iter().map(|v| finite(*v)).collect());
    }

    pub fn finish(mut self) -> Self {
        self.all_pass = self.checks.iter().all(|c| c.pass);
        self
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// The first stored value that the recomputation does not reproduce.
    pub fn first_divergence(&self, recomputed: &Certificates, tol: f64) -> Option<String> {
        let close = |a: f64, b: f64| (a - b).abs() <= tol * b.abs().max(1.0);
        if self.checks.len() != recomputed.checks.len() {
            return Some(format!("check count {} vs {}", self.checks.len(), recomputed.checks.len()));
        }
        for (s, r) in self.checks.iter().zip(&recomputed.checks) {
            if s.name != r.name {
                return Some(format!("check {} vs {}", s.name, r.name));
            }
            let limits = match (s.limit, r.limit) {
                (Some(a), Some(b)) => close(a, b),
                (None, None) => true,
                _ => false,
            };
            if !close(s.value, r.value) || !limits || s.pass != r.pass || s.relation != r.relation {
                return Some(format!("{}: stored {:e}, recomputed {:e}", s.name, s.value, r.value));
            }
        }
        if self.sequences.keys().ne(recomputed.sequences.keys()) {
            return Some("sequence names differ".into());
        }
        for (name, s) in &self.sequences {
            let r = &recomputed.sequences[name];
            if s.len() != r.len() || s.iter().zip(r).any(|(a, b)| !close(*a, *b)) {
                return Some(format!("sequence {name}"));
            }
        }
        if self.all_pass != recomputed.all_pass {
            return Some("overall pass flag".into());
        }
        None
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub type Payloads = BTreeMap<String, Matrix>;

/// Writes the payloads, fills in their references and writes both documents.
pub fn write_bundle(dir: &Path, manifest: &mut Manifest, certificates: &Certificates, payloads: &Payloads) -> Result<()> {
    let pdir = dir.join("payloads");
    std::fs::create_dir_all(&pdir)?;
    manifest.payloads.clear();
    for (name, m) in payloads {
        let text = mtx::to_string(m);
        let file = format!("payloads/{name}.mtx");
        std::fs::write(dir.join(&file), &text)?;
        manifest.payloads.push(PayloadRef { name: name.clone(), file, sha256: sha256_hex(text.as_bytes()) });
    }
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    std::fs::write(dir.join("certificates.json"), serde_json::to_string_pretty(certificates)?)?;
    Ok(())
}

/// Reads a bundle and checks every payload hash.
pub fn read_bundle(dir: &Path) -> Result<(Manifest, Certificates, Payloads)> {
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::Bundle(format!("unsupported schema version {}", manifest.schema_version)));
    }
    let certificates: Certificates = serde_json::from_str(&std::fs::read_to_string(dir.join("certificates.json"))?)?;
    let mut payloads = Payloads::new();
    for p in &manifest.payloads {
        let bytes = std::fs::read(dir.join(&p.file))?;
        if sha256_hex(&bytes) != p.sha256 {
            return Err(Error::Bundle(format!("payload {} does not match its hash", p.name)));
        }
        let text = String::from_utf8(bytes).map_err(|_| Error::Bundle(format!("payload {} is not text", p.name)))?;
        payloads.insert(p.name.clone(), mtx::parse(&text)?);
    }
    Ok((manifest, certificates, payloads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, identity};

    #[test]
    fn roundtrip_and_tamper() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("test", serde_json::json!({"x": 1}), BTreeMap::new());
        let mut certs = Certificates::default();
        certs.push(Check::at_most("residual", 1e-15, 1e-10));
        certs.sequence("norms", &[1.0, f64::INFINITY]);
        let certs = certs.finish();
        let mut payloads = Payloads::new();
        payloads.insert("t".into(), identity(3) * c(0.5, 0.0));
        write_bundle(dir.path(), &mut m, &certs, &payloads).unwrap();
        let (m2, c2, p2) = read_bundle(dir.path()).unwrap();
        assert_eq!(m2, m);
        assert_eq!(c2, certs);
        assert_eq!(p2, payloads);
        assert!(certs.first_divergence(&c2, VERIFY_TOL).is_none());

        let mut other = certs.clone();
        other.checks[0].value = 1e-3;
        assert!(certs.first_divergence(&other, VERIFY_TOL).is_some());

        let path = dir.path().join("payloads/t.mtx");
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 2;
        bytes[last] ^= 1;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_bundle(dir.path()), Err(Error::Bundle(_))));
    }
}
