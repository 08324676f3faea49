//! CSV helpers. Floats are written with 17 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use crate::{CliError, RunConfig};

pub const MANIFEST: &str = "manifest.txt";

pub fn f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn writer(dir: &Path, name: &str, header: &[&str]) -> Result<(csv::Writer<fs::File>, PathBuf), CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    Ok((w, path))
}

/// Config echo plus versions; parses back to the same [`RunConfig`].
pub fn write_manifest(dir: &Path, name: &str, command: &str, config: &RunConfig) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let text = format!(
        "# latwave run manifest\n# command = {command}\n# latwave-cli {} / latwave-core {}\n{}",
        env!("CARGO_PKG_VERSION"),
        latwave_core::VERSION,
        config.to_text()
    );
    fs::write(&path, text)?;
    Ok(path)
}

pub fn read_manifest(dir: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    Ok(RunConfig::parse(&text)?)
}
