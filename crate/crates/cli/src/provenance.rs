//! Provenance sidecars written next to every run's outputs.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use cartoseg::synth::config::hex_digest;

#[derive(Serialize)]
struct Record<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    library_version: &'static str,
    command: &'a str,
    seed: Option<u64>,
    /// SHA-256 of `config` serialized as JSON.
    config_digest: String,
    config: &'a C,
}

/// `DIR/provenance.json` for a directory, `NAME.provenance.json` beside a file.
pub fn path_for(output: &Path) -> PathBuf {
    if output.is_dir() {
        return output.join("provenance.json");
    }
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    output.with_file_name(format!("{stem}.provenance.json"))
}

pub fn write(output: &Path, command: &str, seed: Option<u64>, config: &impl Serialize) -> anyhow::Result<()> {
    let json = serde_json::to_vec(config).context("serializing resolved configuration")?;
    let record = Record {
        tool: "cartoseg",
        version: env!("CARGO_PKG_VERSION"),
        library_version: cartoseg::VERSION,
        command,
        seed,
        config_digest: hex_digest(&json),
        config,
    };
    let path = path_for(output);
    let text = serde_json::to_string_pretty(&record)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    log::info!("provenance written to {}", path.display());
    Ok(())
}
