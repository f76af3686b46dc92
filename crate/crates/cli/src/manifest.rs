//! Run manifests: every report carries the command, its resolved parameters,
//! digests of the files it read and the tool version, which together are
//! enough to reproduce the output byte for byte.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub params: Value,
    pub inputs: Vec<InputDigest>,
}

impl RunManifest {
    pub fn new(command: &'static str) -> Self {
        RunManifest {
            tool: "seedscope",
            version: env!("CARGO_PKG_VERSION"),
            command,
            params: Value::Null,
            inputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let hash = Sha256::digest(&bytes);
        self.inputs.push(InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(())
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    manifest: &'a RunManifest,
    result: &'a T,
}

pub fn render<T: Serialize>(manifest: &RunManifest, result: &T) -> Result<String> {
    Ok(seedscope::numfmt::to_json_string(&Report { manifest, result })?)
}

/// Print the report and, when `out` is set, write it to `out/<name>` together
/// with `out/manifest.json`.
pub fn emit<T: Serialize>(manifest: &RunManifest, result: &T, out: Option<&Path>, name: &str) -> Result<()> {
    let text = render(manifest, result)?;
    print!("{text}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join(name), &text)?;
        fs::write(dir.join("manifest.json"), seedscope::numfmt::to_json_string(manifest)?)?;
    }
    Ok(())
}
