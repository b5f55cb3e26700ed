use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use goalgen_core::analysis::{
    abstract_structures, describe, nearest_real, role_filler_stats, run_ablation, AblationSetup, Profile,
};
use goalgen_core::dsl::{print_game, sample_game, Game, Pcfg};
use goalgen_core::features::{write_table, FeatureContext, Registry, REGISTRY_VERSION};
use goalgen_core::fitness::{build_dataset, crossvalidate, gen_negatives, FitnessModel, TrainConfig};
use goalgen_core::interp::{activating_components, score_game_with, InterpConfig};
use goalgen_core::pipeline::fit_model;
use goalgen_core::qd::{init_archive, Archive, GenStats, MapElites};
use goalgen_core::trace::{PredicateDb, Trace};
use goalgen_core::rng;

use crate::artifact::{self, Stamp};
use crate::config::{load_tree, put, set_key, RunConfig};
use crate::inputs::{load_corpus, load_traces, read_games};
use crate::{Cmd, Global};

/// Config file, then flags, then `--set` overrides.
pub fn resolve(g: &Global) -> Result<RunConfig> {
    let mut tree = match &g.config {
        Some(p) => load_tree(p)?,
        None => Table::new(),
    };
    if let Some(s) = g.seed {
        put(&mut tree, "seed", Value::Integer(s as i64))?;
    }
    if let Some(p) = &g.profile {
        put(&mut tree, "profile", Value::String(p.clone()))?;
    }
    if let Some(t) = g.threads {
        put(&mut tree, "threads", Value::Integer(t as i64))?;
    }
    if let Some(c) = &g.corpus {
        put(&mut tree, "paths.corpus", Value::String(c.clone()))?;
    }
    if let Some(c) = &g.traces {
        put(&mut tree, "paths.traces", Value::String(c.clone()))?;
    }
    if let Some(o) = &g.out {
        put(&mut tree, "paths.out", Value::String(o.display().to_string()))?;
    }
    for s in &g.set {
        set_key(&mut tree, s)?;
    }
    RunConfig::resolve(tree)
}

/// What `train` writes and the other commands load.
#[derive(Serialize, Deserialize)]
pub struct ModelFile {
    pub pcfg: Pcfg,
    pub model: FitnessModel,
}

impl RunConfig {
    fn stamp(&self, registry: &str) -> Stamp {
        Stamp::new(registry, self.seed, &self.hash())
    }

    fn out_dir(&self) -> PathBuf {
        self.paths.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn corpus(&self) -> Result<Vec<Game>> {
        let spec = self.paths.corpus.as_deref().context("no corpus: pass --corpus or set paths.corpus")?;
        load_corpus(spec, self.seed)
    }

    fn traces(&self) -> Result<Vec<Trace>> {
        match self.paths.traces.as_deref() {
            Some(spec) => load_traces(spec, self.seed),
            None => Ok(Vec::new()),
        }
    }

    fn model_path(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| self.paths.model.clone()).unwrap_or_else(|| self.out_dir().join("model.json"))
    }

    fn archive_path(&self) -> PathBuf {
        self.paths.archive.clone().unwrap_or_else(|| self.out_dir().join("archive.jsonl"))
    }

    fn interp(&self) -> InterpConfig {
        InterpConfig { thresholds: self.thresholds, ..InterpConfig::default() }
    }
}

fn load_model(path: &Path) -> Result<ModelFile> {
    let (stamp, m): (Stamp, ModelFile) = artifact::read_json(path)?;
    if stamp.registry != m.model.registry.version {
        bail!("{}: stamp registry {} but model registry {}", path.display(), stamp.registry, m.model.registry.version);
    }
    let ctx = m.model.context.as_ref().with_context(|| format!("{}: model has no feature context", path.display()))?;
    m.model.check_registry(&ctx.registry)?;
    Ok(m)
}

/// Prints to stdout, or writes the file and names it on stderr.
fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => {
            artifact::write(p, text)?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn games_text(stamp: &Stamp, games: &[(Option<String>, &Game)]) -> String {
    let mut s = stamp.line(";");
    for (note, g) in games {
        if let Some(n) = note {
            let _ = writeln!(s, "; {n}");
        }
        s.push_str(&print_game(g));
        s.push_str("\n\n");
    }
    s
}

pub fn dispatch(cfg: &RunConfig, cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Sample { n, output } => sample(cfg, n, output.as_deref()),
        Cmd::Corrupt { game, n, output } => corrupt(cfg, &game, n, output.as_deref()),
        Cmd::Features { game, model, output } => features(cfg, &game, model, output.as_deref()),
        Cmd::Train { features, output } => train(cfg, &features, output),
        Cmd::Cv { folds, output } => cv(cfg, folds, output.as_deref()),
        Cmd::Search { model, resume, checkpoint_every } => search(cfg, model, resume.as_deref(), checkpoint_every),
        Cmd::Score { model, game } => score(cfg, model, &game),
        Cmd::Replay { game, trace, output } => replay(cfg, &game, trace.as_deref(), output.as_deref()),
        Cmd::Describe { game } => {
            for g in read_games(&game)? {
                println!("== {} ==\n{}", g.name, describe(&g));
            }
            Ok(())
        }
        Cmd::Analyze { archive } => analyze(cfg, archive.as_deref()),
        Cmd::Ablate { ablation } => ablate(cfg, &ablation),
    }
}

fn sample(cfg: &RunConfig, n: usize, output: Option<&Path>) -> Result<()> {
    let pcfg = Pcfg::fit(&cfg.corpus()?)?;
    let mut r = rng::substream(cfg.seed, "cli/sample");
    let games: Vec<Game> = (0..n)
        .map(|i| {
            let mut g = sample_game(&pcfg, &mut r);
            g.name = format!("sample-{i}");
            g
        })
        .collect();
    let refs: Vec<(Option<String>, &Game)> = games.iter().map(|g| (None, g)).collect();
    emit(output, &games_text(&cfg.stamp(REGISTRY_VERSION), &refs))
}

fn corrupt(cfg: &RunConfig, path: &Path, n: usize, output: Option<&Path>) -> Result<()> {
    let games = read_games(path)?;
    let pcfg = match cfg.paths.corpus {
        Some(_) => Pcfg::fit(&cfg.corpus()?)?,
        None => Pcfg::fit(&games)?,
    };
    let negs = gen_negatives(&games, &pcfg, n, cfg.seed);
    let mut named = Vec::new();
    for (g, ns) in games.iter().zip(&negs) {
        for (j, neg) in ns.iter().enumerate() {
            let mut c = neg.game.clone();
            c.name = format!("{}-neg{j}", g.name);
            named.push((format!("source {} node {} size {} height {}", g.name, neg.node, neg.size, neg.height), c));
        }
    }
    let refs: Vec<(Option<String>, &Game)> = named.iter().map(|(n, g)| (Some(n.clone()), g)).collect();
    emit(output, &games_text(&cfg.stamp(REGISTRY_VERSION), &refs))
}

fn db(cfg: &RunConfig, traces: &[Trace]) -> Option<PredicateDb> {
    (!traces.is_empty()).then(|| PredicateDb::build(traces, cfg.thresholds))
}

fn features(cfg: &RunConfig, path: &Path, model: Option<PathBuf>, output: Option<&Path>) -> Result<()> {
    let games = read_games(path)?;
    let ctx = match model {
        Some(p) => load_model(&p)?.model.context.unwrap(),
        None => {
            let corpus = cfg.corpus()?;
            let pcfg = Pcfg::fit(&corpus)?;
            let negs = gen_negatives(&corpus, &pcfg, cfg.train.m, cfg.train.seed);
            let refs: Vec<&Game> = negs.iter().flatten().map(|n| &n.game).collect();
            FeatureContext::fit(&corpus, &refs, db(cfg, &cfg.traces()?), Registry::full())?
        }
    };
    let rows: Vec<_> = games.iter().map(|g| ctx.extract_full(g)).collect();
    let ids: Vec<String> = games.iter().map(|g| g.name.clone()).collect();
    let full = Registry::full();
    let text = cfg.stamp(REGISTRY_VERSION).line("#") + &write_table(&full.names(), &ids, &rows);
    emit(output, &text)
}

fn train(cfg: &RunConfig, features: &str, output: Option<PathBuf>) -> Result<()> {
    let registry = match features {
        "full" | "no_common_sense" | "no_coherence_features" => Profile::parse(features)?.registry(),
        f => bail!("unknown feature set {f}; expected full, no_common_sense or no_coherence_features"),
    };
    let corpus = cfg.corpus()?;
    let traces = cfg.traces()?;
    let t = fit_model(&corpus, db(cfg, &traces), registry, &cfg.train)?;
    if let Some(r) = &t.model.report {
        eprintln!("trained on {} games: {} epochs, best validation loss {:.4} at epoch {}", corpus.len(), r.epochs, r.best_val_loss, r.best_epoch);
    }
    let path = cfg.model_path(output);
    let stamp = cfg.stamp(&t.model.registry.version);
    artifact::write_json(&path, &stamp, &ModelFile { pcfg: t.pcfg, model: t.model })?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Batch sizes, negatives per step as fractions of `m`, and two step sizes.
fn grid(base: &TrainConfig) -> Vec<TrainConfig> {
    let mut out = Vec::new();
    for b in [1, 2, 4] {
        for k in [base.m / 4, base.m / 2, base.m] {
            for lr in [1e-3, 4e-3] {
                out.push(TrainConfig { batch_size: b, k: k.max(1), lr, ..base.clone() });
            }
        }
    }
    out
}

fn cv(cfg: &RunConfig, folds: usize, output: Option<&Path>) -> Result<()> {
    let corpus = cfg.corpus()?;
    let pcfg = Pcfg::fit(&corpus)?;
    let negs = gen_negatives(&corpus, &pcfg, cfg.train.m, cfg.train.seed);
    let refs: Vec<&Game> = negs.iter().flatten().map(|n| &n.game).collect();
    let ctx = FeatureContext::fit(&corpus, &refs, db(cfg, &cfg.traces()?), Registry::full())?;
    let data = build_dataset(&ctx, &corpus, &negs);
    let (best, results) = crossvalidate(&data, &grid(&cfg.train), folds, cfg.seed)?;
    let mut s = cfg.stamp(REGISTRY_VERSION).line("#");
    s.push_str("batch_size\tk\tlr\tmean_loss\tbest\n");
    for r in &results {
        let c = &r.config;
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", c.batch_size, c.k, c.lr, r.mean_loss, (c == &best) as u8);
    }
    emit(output, &s)
}

fn checkpoint_text(stamp: &Stamp, generation: usize, a: &Archive) -> String {
    format!("{}# generation {generation}\n{}", stamp.line("#"), a.to_checkpoint())
}

/// Archive and generation count from a checkpoint written under the same
/// settings.
fn read_checkpoint(path: &Path, expect_hash: Option<&str>) -> Result<(Archive, usize)> {
    let (stamp, body) = artifact::read_stamped_text(path)?;
    if let Some(h) = expect_hash {
        if stamp.config_hash != h {
            bail!("{}: written under config {} but the current config is {h}", path.display(), stamp.config_hash);
        }
    }
    let (first, rest) = body.split_once('\n').unwrap_or((&body, ""));
    let generation = first
        .strip_prefix("# generation ")
        .and_then(|g| g.trim().parse().ok())
        .with_context(|| format!("{}: missing generation line", path.display()))?;
    Ok((Archive::from_checkpoint(rest)?, generation))
}

fn stats_text(stamp: &Stamp, stats: &[GenStats]) -> String {
    let mut s = stamp.line("#");
    s.push_str(GenStats::HEADER);
    s.push('\n');
    for g in stats {
        s.push_str(&g.row());
        s.push('\n');
    }
    s
}

fn search(cfg: &RunConfig, model: Option<PathBuf>, resume: Option<&Path>, every: Option<usize>) -> Result<()> {
    let m = load_model(&cfg.model_path(model))?;
    let ctx = m.model.context.as_ref().unwrap();
    let stamp = cfg.stamp(&m.model.registry.version);
    let (archive, generation) = match resume {
        Some(p) => read_checkpoint(p, Some(&stamp.config_hash))?,
        None => (init_archive(&cfg.qd, &m.pcfg, &m.model, ctx, &cfg.exemplars), 0),
    };
    let mut me = MapElites::new(cfg.qd.clone(), archive, generation, &m.pcfg, &m.model, ctx, &cfg.exemplars)?;
    let path = cfg.archive_path();
    let mut failure = None;
    me.run(|s, a| {
        if every.is_some_and(|k| k > 0 && s.generation % k == 0) && failure.is_none() {
            failure = artifact::write(&path, &checkpoint_text(&stamp, s.generation, a)).err();
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    artifact::write(&path, &checkpoint_text(&stamp, me.generation, &me.archive))?;
    let out = cfg.out_dir();
    artifact::write(&out.join("stats.tsv"), &stats_text(&stamp, &me.stats))?;
    let elites: Vec<(Option<String>, &Game)> = me
        .archive
        .reported()
        .into_iter()
        .map(|(k, e)| (Some(format!("key {} fitness {} generation {}", k.label(), e.fitness, e.generation)), &e.game))
        .collect();
    artifact::write(&out.join("elites.pddl"), &games_text(&stamp, &elites))?;
    let space = cfg.qd.space.enumerate().len();
    eprintln!(
        "generation {}: {}/{space} coherent cells, {} incoherent, mean coherent fitness {:.4}; wrote {}",
        me.generation,
        me.archive.coherent.len(),
        me.archive.incoherent.len(),
        me.archive.mean_coherent_fitness(),
        path.display()
    );
    Ok(())
}

fn score(cfg: &RunConfig, model: Option<PathBuf>, path: &Path) -> Result<()> {
    let m = load_model(&cfg.model_path(model))?;
    for g in read_games(path)? {
        println!("{}\t{}", g.name, m.model.score_game(&g)?);
    }
    Ok(())
}

#[derive(Serialize)]
struct ReplayRow<'a> {
    game: &'a str,
    trace: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<goalgen_core::interp::ScoreReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn replay(cfg: &RunConfig, path: &Path, trace: Option<&str>, output: Option<&Path>) -> Result<()> {
    let games = read_games(path)?;
    let traces = match trace {
        Some(spec) => load_traces(spec, cfg.seed)?,
        None => cfg.traces()?,
    };
    if traces.is_empty() {
        bail!("no traces: pass --trace or --traces");
    }
    let ic = cfg.interp();
    let mut rows = Vec::new();
    for g in &games {
        for t in &traces {
            let (report, error) = match score_game_with(g, t, &ic) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            rows.push(ReplayRow { game: &g.name, trace: &t.id, report, error });
        }
    }
    let text = serde_json::to_string_pretty(&serde_json::json!({ "stamp": cfg.stamp(REGISTRY_VERSION), "payload": rows }))?;
    emit(output, &(text + "\n"))
}

fn analyze(cfg: &RunConfig, archive: Option<&Path>) -> Result<()> {
    let corpus = cfg.corpus()?;
    let out = cfg.out_dir();
    let stamp = cfg.stamp(REGISTRY_VERSION);
    let structures = abstract_structures(&corpus);
    artifact::write(&out.join("structures.tsv"), &(stamp.line("#") + &structures.to_tsv()))?;
    artifact::write(&out.join("role_fillers.tsv"), &(stamp.line("#") + &role_filler_stats(&corpus).to_tsv()))?;
    eprintln!(
        "{} games: {} preference structures, {} unique, {} singletons, top-5 share {:.1}%",
        corpus.len(),
        structures.total(),
        structures.unique(),
        structures.singletons(),
        structures.top_share(5) * 100.0
    );
    let Some(p) = archive else { return Ok(()) };
    let (a, _) = read_checkpoint(p, None)?;
    let mut s = stamp.line("#");
    s.push_str("key\tfitness\tnearest\tdistance\n");
    for (k, e) in a.reported() {
        if let Some((i, d)) = nearest_real(&e.game, &corpus) {
            let _ = writeln!(s, "{}\t{}\t{}\t{d}", k.label(), e.fitness, corpus[i].name);
        }
    }
    artifact::write(&out.join("nearest.tsv"), &s)?;
    let traces = cfg.traces()?;
    if !traces.is_empty() {
        let ic = cfg.interp();
        let mut s = stamp.line("#");
        s.push_str("key\tcomponent\tactivating_traces\n");
        for (k, e) in a.reported() {
            match activating_components(&e.game, &traces, &ic) {
                Ok(m) => {
                    for (c, ts) in m {
                        let _ = writeln!(s, "{}\t{c}\t{}", k.label(), ts.len());
                    }
                }
                Err(err) => {
                    let _ = writeln!(s, "{}\terror: {err}\t0", k.label());
                }
            }
        }
        artifact::write(&out.join("coverage.tsv"), &s)?;
    }
    eprintln!("wrote analysis tables to {}", out.display());
    Ok(())
}

fn ablate(cfg: &RunConfig, ablation: &str) -> Result<()> {
    let profile = Profile::parse(ablation)?;
    let setup = AblationSetup {
        corpus: cfg.corpus()?,
        traces: cfg.traces()?,
        train: cfg.train.clone(),
        qd: cfg.qd.clone(),
        exemplars: cfg.exemplars.clone(),
        seed: cfg.seed,
    };
    let c = run_ablation(profile, &setup)?;
    let text = cfg.stamp(REGISTRY_VERSION).line("#") + &c.to_tsv();
    let path = cfg.out_dir().join(format!("ablation-{}.tsv", profile.label().replace(':', "-")));
    artifact::write(&path, &text)?;
    print!("{}", c.to_tsv());
    eprintln!("wrote {}", path.display());
    Ok(())
}
