//! TOML run configuration: a `[tracker]` table of [`TrackerConfig`] keys and
//! an optional `[network]` table describing the camera network.
//!
//! ```toml
//! [tracker]
//! n_scan = 10
//! w_a = 0.8
//!
//! [network]
//! mode = "ground_plane"
//! cameras = [0, 1]
//! ground_area = 400.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{validate_config, CameraNetworkModel, TrackerConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<CameraNetworkModel>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parses `text`, then applies `key=value` overrides. Keys are dotted
    /// paths; a bare key addresses the `tracker` table. Values are read as
    /// TOML literals and fall back to plain strings.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let doc = overridden_table(text, overrides, Some("tracker"))?;
        toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(vec![e.to_string()]))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// Checks the tracker parameters against the network.
    pub fn validate(&self, net: &CameraNetworkModel) -> Result<()> {
        let violations = validate_config(&self.tracker, net);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(violations.into_iter().map(|v| v.0).collect()))
        }
    }
}

/// Parses a TOML document and applies `key=value` overrides to it. Single
/// segment keys go under `default_table` when one is given.
pub fn overridden_table(text: &str, overrides: &[String], default_table: Option<&str>) -> Result<toml::Table> {
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::InvalidConfig(vec![e.to_string()]))?;
    for o in overrides {
        apply_override(&mut doc, o, default_table)?;
    }
    Ok(doc)
}

fn apply_override(doc: &mut toml::Table, spec: &str, default_table: Option<&str>) -> Result<()> {
    let bad = |m: &str| Error::InvalidConfig(vec![format!("override `{spec}`: {m}")]);
    let (key, raw) = spec.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(bad("empty key"));
    }
    let mut path: Vec<&str> = key.split('.').collect();
    if let (1, Some(t)) = (path.len(), default_table) {
        path.insert(0, t);
    }
    let value = parse_literal(raw.trim());
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = doc;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| bad("path crosses a non-table value"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
