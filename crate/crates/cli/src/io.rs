//! JSON instance files.

use std::fs;
use std::path::Path;

use lottype_core::model::{validate_instance, Instance, RawInstance};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: invalid instance:\n{report}")]
    Invalid { path: String, report: lottype_core::ValidationReport },
}

pub fn parse_raw(text: &str, path: &str) -> Result<RawInstance, InputError> {
    serde_json::from_str(text).map_err(|e| InputError::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn read_raw(path: &Path) -> Result<RawInstance, InputError> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| InputError::Read { path: name.clone(), source })?;
    parse_raw(&text, &name)
}

pub fn read_instance(path: &Path) -> Result<Instance, InputError> {
    let raw = read_raw(path)?;
    validate_instance(&raw).map_err(|report| InputError::Invalid { path: path.display().to_string(), report })
}

/// Pretty JSON with a trailing newline; demand is written as decimal
/// strings at the instance scale.
pub fn instance_to_json(inst: &Instance) -> String {
    let mut s = serde_json::to_string_pretty(&inst.to_raw()).expect("instances serialize");
    s.push('\n');
    s
}

pub fn write_instance(path: &Path, inst: &Instance) -> std::io::Result<()> {
    fs::write(path, instance_to_json(inst))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_carry_positions() {
        let err = parse_raw("{\n  \"sizes\": [1,\n", "x.json").unwrap_err();
        match err {
            InputError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }
}
