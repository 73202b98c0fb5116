//! Shared shape for machine-readable command output.
//!
//! Every command emits one JSON object with the same envelope fields
//! (tool identity, command name, effective config, input digest) plus
//! command-specific payload fields, so downstream tooling can check
//! provenance before trusting numbers.

use std::io::Read;
use std::path::Path;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const TOOL_NAME: &str = "hypersense";

pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// SHA-256 of a file's bytes, as `sha256:<hex>`.
pub fn file_digest(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut file = std::fs::File::open(path)?;
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let out = hasher.finalize();
    let mut hex = String::with_capacity(7 + 64);
    hex.push_str("sha256:");
    for b in out {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

/// Envelope with the shared fields filled in. Callers add their payload
/// keys and serialize; the map keeps keys sorted, so output is stable.
pub fn envelope(command: &str, config: Value, input_digest: Option<String>) -> Map<String, Value> {
    let mut map = Map::new();
    let mut tool = Map::new();
    tool.insert("name".into(), Value::String(TOOL_NAME.into()));
    tool.insert("version".into(), Value::String(tool_version().into()));
    map.insert("tool".into(), Value::Object(tool));
    map.insert("command".into(), Value::String(command.into()));
    map.insert("config".into(), config);
    if let Some(digest) = input_digest {
        map.insert("input_digest".into(), Value::String(digest));
    }
    map
}

/// Serializes an envelope as pretty JSON with a trailing newline.
pub fn to_json_text(map: &Map<String, Value>) -> String {
    let mut text = serde_json::to_string_pretty(&Value::Object(map.clone()))
        .expect("envelope maps hold only plain JSON values");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_content_sensitive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        std::fs::write(&path, b"hello\n").unwrap();
        let d1 = file_digest(&path).unwrap();
        let d2 = file_digest(&path).unwrap();
        assert_eq!(d1, d2);
        assert!(d1.starts_with("sha256:"));
        assert_eq!(d1.len(), 7 + 64);
        // Known digest of "hello\n".
        assert_eq!(
            d1,
            "sha256:5891b5b522d5df086d0ff0b110fbd9d21bb4fc7163af34d08286a2e846f6be03"
        );
        std::fs::write(&path, b"hello!\n").unwrap();
        assert_ne!(file_digest(&path).unwrap(), d2);
    }

    #[test]
    fn envelope_orders_keys_and_round_trips() {
        let mut map = envelope(
            "score",
            serde_json::json!({"q_lo": 5.0}),
            Some("sha256:00".into()),
        );
        map.insert("zz_payload".into(), Value::Bool(true));
        map.insert("aa_payload".into(), Value::Bool(false));
        let text = to_json_text(&map);
        assert!(text.ends_with('\n'));
        let parsed: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["tool"]["name"], "hypersense");
        assert_eq!(parsed["command"], "score");
        assert_eq!(parsed["config"]["q_lo"], 5.0);
        // serde_json maps are sorted, so key order in the text is fixed.
        let aa = text.find("aa_payload").unwrap();
        let zz = text.find("zz_payload").unwrap();
        assert!(aa < zz);
    }
}
