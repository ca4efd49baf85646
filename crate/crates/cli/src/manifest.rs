use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SOFTWARE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// SHA-256 of the config's JSON form with object keys sorted at every level,
/// so field order in the source struct does not affect the hash.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let value = serde_json::to_value(config).expect("configs serialize to JSON");
    let canonical = serde_json::to_string(&canonicalize(value)).expect("JSON values serialize");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn canonicalize(value: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let sorted: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

/// Provenance of one batch run, written as `manifest.json` next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub config_hash: String,
    pub seed: u64,
    pub estimator: String,
    pub software_version: String,
    pub wall_time_seconds: f64,
    /// Voxel status name → count, including zero counts.
    pub voxel_status: BTreeMap<String, usize>,
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct A {
        x: u32,
        nested: B,
    }

    #[derive(Serialize)]
    struct B {
        q: f64,
        p: &'static str,
    }

    #[derive(Serialize)]
    struct Reordered {
        nested: BReordered,
        x: u32,
    }

    #[derive(Serialize)]
    struct BReordered {
        p: &'static str,
        q: f64,
    }

    #[test]
    fn hash_ignores_field_order() {
        let a = config_hash(&A { x: 3, nested: B { q: 0.5, p: "bjs" } });
        let b = config_hash(&Reordered { nested: BReordered { p: "bjs", q: 0.5 }, x: 3 });
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        assert_ne!(a, config_hash(&A { x: 4, nested: B { q: 0.5, p: "bjs" } }));
    }
}
