//! Merging a JSON config file with command-line flags.
//!
//! The config file is a flat object keyed by flag name. Flags given on the
//! command line win; a flag counts as given when it serialises to something
//! other than `null` or `false`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use super::CliError;

/// Keys handled before the subcommand's own arguments.
pub const GLOBAL_KEYS: [&str; 4] = ["seed", "out", "precision", "workers"];

pub fn read_config(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Config(format!(
            "{}: expected a JSON object",
            path.display()
        ))),
        Err(e) => Err(CliError::Config(format!("{}: {e}", path.display()))),
    }
}

fn given(v: &Value) -> bool {
    !matches!(v, Value::Null | Value::Bool(false))
}

/// Overlays the flags in `cli` onto `file` and deserialises the result.
/// Keys the target type does not know are rejected.
pub fn merge<T: Serialize + DeserializeOwned>(
    cli: &T,
    file: &Map<String, Value>,
) -> Result<T, CliError> {
    let mut merged = file.clone();
    let Value::Object(flags) = serde_json::to_value(cli)? else {
        return Err(CliError::Config(
            "arguments did not serialise to an object".into(),
        ));
    };
    let known: Vec<String> = flags.keys().cloned().collect();
    for (k, v) in flags {
        if given(&v) {
            merged.insert(k, v);
        }
    }
    if let Some(bad) = merged.keys().find(|k| !known.contains(k)) {
        return Err(CliError::Config(format!("unknown config key `{bad}`")));
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Config(format!("config: {e}")))
}

/// Removes and returns the global keys from a config object.
pub fn split_globals(file: &mut Map<String, Value>) -> Map<String, Value> {
    GLOBAL_KEYS
        .iter()
        .filter_map(|k| file.remove(*k).map(|v| (k.to_string(), v)))
        .collect()
}
