//! Run manifests and key=value configuration files.
//!
//! A manifest records the command, the crate version, the full resolved
//! parameter set, and a checksum of the emitted CSV; re-running the command
//! with the recorded parameters reproduces the output byte-for-byte, which
//! `replay` verifies against the stored checksum.

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

pub type KvMap = BTreeMap<String, String>;

/// Parse `key=value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse_kv(text: &str) -> Result<KvMap, String> {
    let mut map = KvMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value, got {raw:?}", lineno + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Render a manifest: command and version first, parameters in the given
/// order, checksum last.
pub fn render(command: &str, params: &[(String, String)], csv: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("command={command}\n"));
    out.push_str(&format!("version={}\n", env!("CARGO_PKG_VERSION")));
    for (k, v) in params {
        out.push_str(&format!("{k}={v}\n"));
    }
    out.push_str(&format!("checksum=sha256:{}\n", sha256_hex(csv.as_bytes())));
    out
}
