//! Loading games and traces from files, directories or the synthetic
//! generators.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use goalgen_core::dsl::{parse_games, Game};
use goalgen_core::trace::{load_trace, Trace};
use goalgen_core::{rng, synth};

fn synthetic_count(spec: &str) -> Result<Option<usize>> {
    match spec.strip_prefix("synthetic:") {
        None => Ok(None),
        Some(n) => Ok(Some(n.parse().with_context(|| format!("bad synthetic count in {spec}"))?)),
    }
}

fn files_in(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let p = e?.path();
        if p.is_file() && p.extension().and_then(|x| x.to_str()).is_some_and(|x| exts.contains(&x)) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

pub fn read_games(path: &Path) -> Result<Vec<Game>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_games(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Games from a file, every `.pddl`/`.txt`/`.dsl` file of a directory, or
/// `synthetic:N`.
pub fn load_corpus(spec: &str, seed: u64) -> Result<Vec<Game>> {
    if let Some(n) = synthetic_count(spec)? {
        return Ok(synth::corpus(&mut rng::substream(seed, "cli/synthetic-corpus"), n));
    }
    let p = Path::new(spec);
    if !p.exists() {
        bail!("corpus {spec} does not exist");
    }
    let files = if p.is_dir() { files_in(p, &["pddl", "txt", "dsl"])? } else { vec![p.to_path_buf()] };
    let mut games = Vec::new();
    for f in files {
        games.extend(read_games(&f)?);
    }
    if games.is_empty() {
        bail!("corpus {spec} holds no games");
    }
    Ok(games)
}

/// Traces from a `.jsonl` file, every `.jsonl` file of a directory, or
/// `synthetic:N`.
pub fn load_traces(spec: &str, seed: u64) -> Result<Vec<Trace>> {
    if let Some(n) = synthetic_count(spec)? {
        return Ok(synth::traces(&mut rng::substream(seed, "cli/synthetic-traces"), n, 12));
    }
    let p = Path::new(spec);
    if !p.exists() {
        bail!("traces {spec} do not exist");
    }
    let files = if p.is_dir() { files_in(p, &["jsonl"])? } else { vec![p.to_path_buf()] };
    files.iter().map(|f| load_trace(f).with_context(|| format!("loading trace {}", f.display()))).collect()
}
