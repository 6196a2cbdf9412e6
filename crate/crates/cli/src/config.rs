//! Loading command configs from JSON or TOML.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;

/// Parses `path` as TOML when it ends in `.toml` and as JSON otherwise.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    if !path.exists() {
        bail!("config file {} does not exist", path.display());
    }
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_toml = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(&text).with_context(|| format!("parsing TOML config {}", path.display()))
    } else {
        serde_json::from_str(&text)
            .with_context(|| format!("parsing JSON config {}", path.display()))
    }
}
