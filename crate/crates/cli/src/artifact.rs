//! Stamped artifacts. JSON files wrap their payload next to a stamp; text
//! files carry the stamp on a leading comment line.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use goalgen_core::features::REGISTRY_VERSION;

pub const TOOL: &str = "goalgen";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const MARK: &str = "goalgen-stamp";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub tool: String,
    pub version: String,
    pub registry: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Stamp {
    pub fn new(registry: &str, seed: u64, config_hash: &str) -> Stamp {
        Stamp { tool: TOOL.into(), version: VERSION.into(), registry: registry.into(), seed, config_hash: config_hash.into() }
    }

    /// Same tool and version, and a registry derived from the current
    /// feature catalog.
    pub fn verify(&self, what: &str) -> Result<()> {
        if self.tool != TOOL {
            bail!("{what}: written by {}, not {TOOL}", self.tool);
        }
        if self.version != VERSION {
            bail!("{what}: written by {TOOL} {}, this is {VERSION}", self.version);
        }
        if !self.registry.starts_with(REGISTRY_VERSION) {
            bail!("{what}: feature registry {} does not match {REGISTRY_VERSION}", self.registry);
        }
        Ok(())
    }

    /// A comment line for text artifacts, e.g. `; goalgen-stamp {..}`.
    pub fn line(&self, comment: &str) -> String {
        format!("{comment} {MARK} {}\n", serde_json::to_string(self).unwrap())
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    stamp: Stamp,
    payload: T,
}

pub fn write_json<T: Serialize>(path: &Path, stamp: &Stamp, payload: &T) -> Result<()> {
    let text = serde_json::to_string(&Envelope { stamp: stamp.clone(), payload })?;
    write(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<(Stamp, T)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let e: Envelope<T> = serde_json::from_str(&text).with_context(|| format!("{}: not a stamped artifact", path.display()))?;
    e.stamp.verify(&path.display().to_string())?;
    Ok((e.stamp, e.payload))
}

/// Splits off a leading stamp line, if the text has one.
pub fn split_stamp(text: &str) -> Result<(Option<Stamp>, &str)> {
    let first = text.lines().next().unwrap_or("");
    let Some(i) = first.find(MARK) else { return Ok((None, text)) };
    let stamp: Stamp = serde_json::from_str(first[i + MARK.len()..].trim()).context("malformed stamp line")?;
    Ok((Some(stamp), &text[first.len()..].trim_start_matches(['\r', '\n'])))
}

/// Reads a text artifact that must carry a valid stamp.
pub fn read_stamped_text(path: &Path) -> Result<(Stamp, String)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (stamp, body) = split_stamp(&text)?;
    let stamp = stamp.with_context(|| format!("{}: missing {MARK} line", path.display()))?;
    stamp.verify(&path.display().to_string())?;
    Ok((stamp, body.to_string()))
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stamp_line_round_trips() {
        let s = Stamp::new(REGISTRY_VERSION, 9, "abc");
        let text = format!("{}(body)\n", s.line(";"));
        let (got, body) = split_stamp(&text).unwrap();
        assert_eq!(got, Some(s));
        assert_eq!(body, "(body)\n");
        assert_eq!(split_stamp("(plain)").unwrap().0, None);
    }

    #[test]
    fn foreign_stamps_are_refused() {
        let mut s = Stamp::new(REGISTRY_VERSION, 0, "x");
        s.version = "0.0.0-other".into();
        assert!(s.verify("f").is_err());
        let mut s = Stamp::new("other-features/2", 0, "x");
        assert!(s.verify("f").is_err());
        s.registry = format!("{REGISTRY_VERSION}-play_trace_database");
        assert!(s.verify("f").is_ok());
    }

    #[test]
    fn json_envelope() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("x.json");
        write_json(&p, &Stamp::new(REGISTRY_VERSION, 1, "h"), &vec![1, 2]).unwrap();
        let (s, v): (Stamp, Vec<i32>) = read_json(&p).unwrap();
        assert_eq!((s.seed, v), (1, vec![1, 2]));
        std::fs::write(&p, "[1,2]").unwrap();
        assert!(read_json::<Vec<i32>>(&p).is_err());
    }
}
