//! Merging a JSON configuration file with command-line flags.
//!
//! Flags are serialized, stripped of unset entries (`null` and `false`) and laid over the file's
//! object; the result is deserialized back, so unknown keys are reported with their name.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};
use crate::GlobalArgs;

const GLOBAL_KEYS: [&str; 4] = ["seed", "threads", "out_dir", "tolerance_profile"];

pub fn read_config(path: &Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Config(format!("{}: the configuration must be a JSON object", path.display()))),
        Err(e) => Err(CliError::Config(format!(
            "{} line {} column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))),
    }
}

fn set_entries(flags: &impl Serialize) -> CliResult<Map<String, Value>> {
    match serde_json::to_value(flags)? {
        Value::Object(map) => Ok(map.into_iter().filter(|(_, v)| !v.is_null() && *v != Value::Bool(false)).collect()),
        _ => Ok(Map::new()),
    }
}

fn merge<T: Serialize + DeserializeOwned>(flags: &T, base: Map<String, Value>) -> CliResult<(T, Value)> {
    let mut merged = base;
    merged.extend(set_entries(flags)?);
    let value = Value::Object(merged);
    let resolved: T = serde_json::from_value(value.clone()).map_err(|e| CliError::Config(format!("configuration field: {e}")))?;
    Ok((resolved, value))
}

/// Command arguments: the file's non-global entries, overridden by flags.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&Map<String, Value>>) -> CliResult<(T, Value)> {
    let base = file
        .map(|m| m.iter().filter(|(k, _)| !GLOBAL_KEYS.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect())
        .unwrap_or_default();
    merge(flags, base)
}

/// Global options: the file's global entries, overridden by flags.
pub fn resolve_global(flags: &GlobalArgs, file: Option<&Map<String, Value>>) -> CliResult<(GlobalArgs, Value)> {
    let base = file
        .map(|m| m.iter().filter(|(k, _)| GLOBAL_KEYS.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect())
        .unwrap_or_default();
    let (mut global, value) = merge(flags, base)?;
    global.config = flags.config.clone();
    Ok((global, value))
}
