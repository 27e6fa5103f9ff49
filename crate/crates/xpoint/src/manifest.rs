//! Run manifests: the resolved parameters and input digests of one command.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    /// Positional argument name, or the flag (`--matrix`) that passed the file.
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Every flag value after defaults were applied, keyed by flag name.
    pub params: BTreeMap<String, Value>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes).as_slice()))
}

impl RunManifest {
    pub fn new(command: &str, params: BTreeMap<String, Value>, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            params,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed,
        }
    }

    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        let absolute = fs::canonicalize(path).map_err(Error::io(path))?;
        self.inputs.push(InputDigest {
            role: role.to_string(),
            path: absolute,
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        io::write_json(&dir.join(FILE_NAME), self)
    }

    /// Fails if any input file changed since the manifest was written.
    pub fn verify_inputs(&self) -> Result<()> {
        for input in &self.inputs {
            let now = sha256_file(&input.path)?;
            if now != input.sha256 {
                return Err(Error::Manifest(format!(
                    "{} changed since the run (sha256 {} != {})",
                    input.path.display(),
                    now,
                    input.sha256
                )));
            }
        }
        Ok(())
    }

    /// Same command, parameters and input contents.
    pub fn same_run(&self, other: &Self) -> bool {
        let digests = |m: &Self| m.inputs.iter().map(|i| (i.role.clone(), i.sha256.clone())).collect::<Vec<_>>();
        self.command == other.command && self.params == other.params && digests(self) == digests(other)
    }

    /// Command-line arguments (after the program name) that repeat this run.
    pub fn to_args(&self) -> Vec<String> {
        let mut args = vec![self.command.clone()];
        for input in self.inputs.iter().filter(|i| !i.role.starts_with("--")) {
            args.push(input.path.display().to_string());
        }
        for input in self.inputs.iter().filter(|i| i.role.starts_with("--")) {
            args.push(input.role.clone());
            args.push(input.path.display().to_string());
        }
        for (name, value) in &self.params {
            match value {
                Value::Null | Value::Bool(false) => {}
                Value::Bool(true) => args.push(format!("--{name}")),
                Value::String(s) => args.push(format!("--{name}={s}")),
                Value::Array(items) => {
                    let joined: Vec<String> = items.iter().map(scalar).collect();
                    args.push(format!("--{name}={}", joined.join(",")));
                }
                other => args.push(format!("--{name}={}", scalar(other))),
            }
        }
        args
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abc.txt");
        fs::write(&path, b"abc").unwrap();
        assert_eq!(
            sha256_file(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn args_follow_params() {
        let mut params = BTreeMap::new();
        params.insert("delta".to_string(), Value::from(-0.01));
        params.insert("json".to_string(), Value::Bool(false));
        params.insert("fresh".to_string(), Value::Bool(true));
        params.insert("deltas".to_string(), serde_json::json!([0.01, 0.02]));
        params.insert("subset-n".to_string(), Value::Null);
        let m = RunManifest::new("simulate", params, None);
        assert_eq!(m.to_args(), vec!["simulate", "--delta=-0.01", "--deltas=0.01,0.02", "--fresh"]);
    }
}
