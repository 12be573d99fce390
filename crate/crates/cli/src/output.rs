use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

/// Result document written as `<out>/<command>.json`.
#[derive(Debug, Serialize)]
pub struct Envelope<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config_hash: String,
    /// Hash of every input file, in the order given.
    pub inputs: Vec<InputDigest>,
    pub caveats: Vec<String>,
    pub result: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(&serde_json::to_vec(cfg).expect("config serialises"))
}

pub fn digest_file(path: &Path) -> Result<InputDigest, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(InputDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
}

/// Output directory plus the bookkeeping gathered while a command runs.
pub struct Run {
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub out: PathBuf,
    pub inputs: Vec<InputDigest>,
    pub caveats: Vec<String>,
}

impl Run {
    pub fn caveat(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        if !self.caveats.contains(&msg) {
            self.caveats.push(msg);
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(digest_file(path)?);
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn create(&self, name: &str) -> Result<fs::File, CliError> {
        let p = self.path(name);
        fs::File::create(&p).map_err(|e| CliError::output(format!("cannot create {}: {e}", p.display())))
    }

    /// Writes the envelope and returns it as pretty JSON text.
    pub fn finish(self, result: impl Serialize) -> Result<String, CliError> {
        let env = Envelope {
            tool: "tailkit",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            seed: self.seed,
            config_hash: config_hash(&self.config),
            inputs: self.inputs,
            caveats: self.caveats,
            result: serde_json::to_value(result).map_err(|e| CliError::output(e.to_string()))?,
        };
        let text = serde_json::to_string_pretty(&env).map_err(|e| CliError::output(e.to_string()))?;
        let p = self.out.join(format!("{}.json", self.command));
        fs::write(&p, format!("{text}\n")).map_err(|e| CliError::output(format!("cannot write {}: {e}", p.display())))?;
        Ok(text)
    }
}
