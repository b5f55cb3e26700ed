//! Run configuration: a TOML tree with `include` support, overlaid by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use goalgen_core::fitness::TrainConfig;
use goalgen_core::qd::{ExemplarSet, KeySpace, Operator, QdConfig, EXEMPLAR_TEXTS};
use goalgen_core::trace::Thresholds;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// A game file, a directory of game files, or `synthetic:N`.
    pub corpus: Option<String>,
    /// A trace file, a directory of `.jsonl` traces, or `synthetic:N`.
    pub traces: Option<String>,
    pub model: Option<PathBuf>,
    pub archive: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Search settings; unset fields come from the profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub generations: Option<usize>,
    pub updates: Option<usize>,
    pub init_samples: Option<usize>,
    pub init_cap: Option<usize>,
    pub min_prefs: Option<usize>,
    pub max_prefs: Option<usize>,
    /// Exemplar preference names, in key order.
    pub exemplars: Option<Vec<String>>,
    /// Operator label → weight; unlisted operators keep the profile weight.
    pub weights: BTreeMap<String, f64>,
    pub pcfg_only: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    pub include: Vec<PathBuf>,
    pub seed: u64,
    /// `desk` or `standard`.
    pub profile: String,
    /// Worker threads for evaluation batches; 0 means all cores.
    pub threads: usize,
    pub paths: Paths,
    pub train: Table,
    pub search: SearchSection,
    pub thresholds: Option<Thresholds>,
}

impl Default for RawConfig {
    fn default() -> Self {
        RawConfig {
            include: Vec::new(),
            seed: 0,
            profile: "desk".into(),
            threads: 0,
            paths: Paths::default(),
            train: Table::new(),
            search: SearchSection::default(),
            thresholds: None,
        }
    }
}

/// The resolved configuration every subcommand works from.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub profile: String,
    pub threads: usize,
    pub paths: Paths,
    pub train: TrainConfig,
    pub qd: QdConfig,
    pub exemplars: ExemplarSet,
    pub thresholds: Thresholds,
}

/// Later tables win; nested tables merge key by key.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Reads a config file, resolving `include` paths relative to it. Included
/// files are applied first, in order, and the including file overrides them.
pub fn load_tree(path: &Path) -> Result<Table> {
    load_tree_depth(path, 0)
}

fn load_tree_depth(path: &Path, depth: usize) -> Result<Table> {
    if depth > 16 {
        bail!("include nesting too deep at {}", path.display());
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut own: Table = text.parse().with_context(|| format!("parsing config {}", path.display()))?;
    let includes = match own.remove("include") {
        None => Vec::new(),
        Some(Value::Array(a)) => a,
        Some(v @ Value::String(_)) => vec![v],
        Some(_) => bail!("{}: include must be a path or a list of paths", path.display()),
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tree = Table::new();
    for inc in includes {
        let Value::String(p) = inc else { bail!("{}: include entries must be strings", path.display()) };
        merge(&mut tree, load_tree_depth(&dir.join(p), depth + 1)?);
    }
    merge(&mut tree, own);
    Ok(tree)
}

/// Applies `a.b.c=value`; the value is read as TOML, or as a bare string.
pub fn set_key(tree: &mut Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').with_context(|| format!("--set expects key=value, got {assignment}"))?;
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => Value::String(raw.to_string()),
    };
    put(tree, key, value)
}

/// Sets the dotted `key` to `value`, creating tables on the way.
pub fn put(tree: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut t = tree;
    for p in &parts[..parts.len() - 1] {
        t = match t.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new())) {
            Value::Table(x) => x,
            _ => bail!("--set {key}: {p} is not a table"),
        };
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn exemplars_by_name(names: &[String]) -> Result<ExemplarSet> {
    let all = ExemplarSet::standard();
    let mut texts = Vec::new();
    for n in names {
        let i = all.exemplars.iter().position(|e| &e.name == n).with_context(|| {
            let known: Vec<&str> = all.exemplars.iter().map(|e| e.name.as_str()).collect();
            format!("unknown exemplar {n}; known: {}", known.join(", "))
        })?;
        texts.push(EXEMPLAR_TEXTS[i]);
    }
    Ok(ExemplarSet::from_texts(&texts)?)
}

/// Exemplar names of the desk profile.
pub const DESK_EXEMPLARS: [&str; 3] = ["throwAttempt", "throwInBin", "ballThrownToBed"];

impl RunConfig {
    pub fn resolve(tree: Table) -> Result<RunConfig> {
        let raw: RawConfig = Value::Table(tree).try_into().context("invalid configuration")?;
        let (mut train, mut qd, default_ex): (TrainConfig, QdConfig, Vec<String>) = match raw.profile.as_str() {
            "desk" => (TrainConfig::desk(), QdConfig::desk(), DESK_EXEMPLARS.iter().map(|s| s.to_string()).collect()),
            "standard" => (TrainConfig::default(), QdConfig::default(), ExemplarSet::standard().exemplars.into_iter().map(|e| e.name).collect()),
            p => bail!("unknown profile {p}; expected desk or standard"),
        };
        train.seed = raw.seed;
        let mut t = Table::try_from(&train)?;
        merge(&mut t, raw.train.clone());
        train = Value::Table(t).try_into().context("invalid [train] section")?;
        train.check()?;

        let s = &raw.search;
        qd.seed = s.seed.unwrap_or(raw.seed);
        qd.generations = s.generations.unwrap_or(qd.generations);
        qd.updates = s.updates.unwrap_or(qd.updates);
        qd.init_samples = s.init_samples.unwrap_or(qd.init_samples);
        qd.init_cap = s.init_cap.unwrap_or(qd.init_cap);
        qd.pcfg_only = s.pcfg_only.unwrap_or(qd.pcfg_only);
        for (label, w) in &s.weights {
            let op = Operator::from_label(label).with_context(|| format!("unknown operator {label}"))?;
            for x in qd.weights.iter_mut().filter(|x| x.0 == op) {
                x.1 = *w;
            }
        }
        let exemplars = exemplars_by_name(s.exemplars.as_ref().unwrap_or(&default_ex))?;
        qd.space = KeySpace {
            n_exemplars: exemplars.len(),
            min_prefs: s.min_prefs.unwrap_or(qd.space.min_prefs),
            max_prefs: s.max_prefs.unwrap_or(qd.space.max_prefs),
        };
        qd.check().map_err(anyhow::Error::msg)?;

        Ok(RunConfig {
            seed: raw.seed,
            profile: raw.profile,
            threads: raw.threads,
            paths: raw.paths,
            train,
            qd,
            exemplars,
            thresholds: raw.thresholds.unwrap_or_default(),
        })
    }

    /// Hash of every setting that affects results. Paths, thread counts and
    /// the generation budget are left out, so a search can be resumed with a
    /// larger budget.
    pub fn hash(&self) -> String {
        let qd = QdConfig { generations: 0, ..self.qd.clone() };
        let names: Vec<&str> = self.exemplars.exemplars.iter().map(|e| e.name.as_str()).collect();
        let view = serde_json::json!({
            "seed": self.seed,
            "profile": self.profile,
            "train": self.train,
            "qd": qd,
            "exemplars": names,
            "thresholds": self.thresholds,
        });
        let digest = Sha256::digest(view.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn includes_merge_and_flags_win() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "base.toml", "seed = 3\n[train]\nlr = 0.01\nk = 8\n[search]\ngenerations = 5\n");
        let top = write(d.path(), "run.toml", "include = [\"base.toml\"]\n[train]\nk = 16\n");
        let mut tree = load_tree(&top).unwrap();
        set_key(&mut tree, "search.updates=7").unwrap();
        let c = RunConfig::resolve(tree).unwrap();
        assert_eq!((c.seed, c.train.lr, c.train.k, c.train.seed), (3, 0.01, 16, 3));
        assert_eq!((c.qd.generations, c.qd.updates, c.qd.seed), (5, 7, 3));
        assert_eq!(c.qd.space, KeySpace::desk());
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut t = Table::new();
        set_key(&mut t, "profile=huge").unwrap();
        assert!(RunConfig::resolve(t).is_err());
        let mut t = Table::new();
        set_key(&mut t, "search.weights.teleport=1").unwrap();
        assert!(RunConfig::resolve(t).is_err());
        let mut t = Table::new();
        set_key(&mut t, "train.k=0").unwrap();
        assert!(RunConfig::resolve(t).is_err());
        let mut t = Table::new();
        set_key(&mut t, "colour=1").unwrap();
        assert!(RunConfig::resolve(t).is_err());
    }

    #[test]
    fn hash_ignores_paths_but_not_settings() {
        let base = RunConfig::resolve(Table::new()).unwrap();
        let mut t = Table::new();
        set_key(&mut t, "paths.out=\"elsewhere\"").unwrap();
        set_key(&mut t, "threads=2").unwrap();
        assert_eq!(RunConfig::resolve(t).unwrap().hash(), base.hash());
        let mut t = Table::new();
        set_key(&mut t, "search.generations=3").unwrap();
        assert_eq!(RunConfig::resolve(t).unwrap().hash(), base.hash());
        let mut t = Table::new();
        set_key(&mut t, "search.updates=3").unwrap();
        assert_ne!(RunConfig::resolve(t).unwrap().hash(), base.hash());
    }

    #[test]
    fn include_cycles_stop() {
        let d = tempfile::tempdir().unwrap();
        let a = write(d.path(), "a.toml", "include = \"a.toml\"\n");
        assert!(load_tree(&a).is_err());
    }
}
