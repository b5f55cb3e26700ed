//! Archive initialization and the generation loop.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mutate::{mutate, Operator};
use super::{behavioral_key, Archive, ArchiveKey, Elite, ExemplarSet, KeySpace};
use crate::dsl::ast::Game;
use crate::dsl::pcfg::{sample_game, Pcfg};
use crate::features::{coherence_check, FeatureContext};
use crate::fitness::{FitnessError, FitnessModel};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdConfig {
    pub weights: Vec<(Operator, f64)>,
    pub generations: usize,
    pub updates: usize,
    pub seed: u64,
    pub init_samples: usize,
    pub init_cap: usize,
    pub space: KeySpace,
    /// Replace mutation with fresh grammar samples.
    pub pcfg_only: bool,
}

impl Default for QdConfig {
    fn default() -> QdConfig {
        QdConfig {
            weights: Operator::ALL.iter().map(|&o| (o, 1.0)).collect(),
            generations: 8192,
            updates: 750,
            seed: 0,
            init_samples: 1024,
            init_cap: 128,
            space: KeySpace::standard(),
            pcfg_only: false,
        }
    }
}

impl QdConfig {
    /// Three exemplars, one or two preferences.
    pub fn desk() -> QdConfig {
        QdConfig { generations: 200, updates: 100, space: KeySpace::desk(), ..QdConfig::default() }
    }

    pub fn without(mut self, drop: impl Fn(Operator) -> bool) -> QdConfig {
        for w in &mut self.weights {
            if drop(w.0) {
                w.1 = 0.0;
            }
        }
        self
    }

    pub fn check(&self) -> Result<(), String> {
        if self.weights.iter().any(|w| !(w.1 >= 0.0) || !w.1.is_finite()) {
            return Err("operator weights must be finite and non-negative".into());
        }
        if !self.pcfg_only && !self.weights.iter().any(|w| w.1 > 0.0) {
            return Err("at least one operator weight must be positive".into());
        }
        if self.space.min_prefs == 0 || self.space.min_prefs > self.space.max_prefs {
            return Err("preference range must be non-empty and start at 1 or more".into());
        }
        Ok(())
    }
}

/// Occupancy and coherent-half fitness quartiles after one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenStats {
    pub generation: usize,
    pub coherent: usize,
    pub incoherent: usize,
    pub inserted: usize,
    pub noops: usize,
    /// min, q1, median, q3, max; NaN when the coherent half is empty.
    pub quartiles: [f64; 5],
}

impl GenStats {
    pub const HEADER: &'static str = "generation\tcoherent\tincoherent\tinserted\tnoops\tmin\tq1\tmedian\tq3\tmax";

    pub fn row(&self) -> String {
        let q: Vec<String> = self.quartiles.iter().map(|x| format!("{x}")).collect();
        format!("{}\t{}\t{}\t{}\t{}\t{}", self.generation, self.coherent, self.incoherent, self.inserted, self.noops, q.join("\t"))
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn stats(a: &Archive, generation: usize, inserted: usize, noops: usize) -> GenStats {
    let mut f: Vec<f64> = a.coherent.values().map(|e| e.fitness).collect();
    f.sort_by(f64::total_cmp);
    GenStats {
        generation,
        coherent: a.coherent.len(),
        incoherent: a.incoherent.len(),
        inserted,
        noops,
        quartiles: [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile(&f, q)),
    }
}

/// A scored candidate and where it goes.
struct Routed {
    key: ArchiveKey,
    coherent: bool,
    elite: Elite,
}

struct Evaluator<'a> {
    model: &'a FitnessModel,
    ctx: &'a FeatureContext,
    exemplars: &'a ExemplarSet,
    space: KeySpace,
}

impl Evaluator<'_> {
    fn route<R: Rng + ?Sized>(&self, game: Game, generation: usize, rng: &mut R) -> Option<Routed> {
        let (key, assignment) = behavioral_key(&game, self.exemplars, &self.space, rng).ok()?;
        let fv = self.ctx.extract_full(&game);
        let fitness = self.model.score_full(&fv).ok()?;
        let coherent = coherence_check(&fv);
        Some(Routed { key, coherent, elite: Elite { game, fitness, generation, assignment } })
    }
}

/// True once every value of every key dimension is held by some resident.
fn covers_all_values(a: &Archive, space: &KeySpace) -> bool {
    let keys: Vec<&ArchiveKey> = a.coherent.keys().chain(a.incoherent.keys()).collect();
    let dims = space.n_exemplars + 1;
    (0..dims).all(|i| (0..=space.max_prefs).all(|v| keys.iter().any(|k| k.counts[i] as usize == v)))
        && [false, true].iter().all(|s| keys.iter().any(|k| k.setup == *s))
}

/// Seeds an archive with the fittest of `init_samples` grammar samples,
/// stopping at `init_cap` occupied cells or once every key value is covered.
pub fn init_archive(
    cfg: &QdConfig,
    pcfg: &Pcfg,
    model: &FitnessModel,
    ctx: &FeatureContext,
    exemplars: &ExemplarSet,
) -> Archive {
    let ev = Evaluator { model, ctx, exemplars, space: cfg.space };
    let mut scored: Vec<Routed> = (0..cfg.init_samples)
        .into_par_iter()
        .filter_map(|i| {
            let mut r = rng::indexed(cfg.seed, "qd/init", i as u64, 0);
            let g = sample_game(pcfg, &mut r);
            ev.route(g, 0, &mut r)
        })
        .collect();
    // Stable sort keeps sample order among equal fitness.
    scored.sort_by(|a, b| b.elite.fitness.total_cmp(&a.elite.fitness));
    let mut a = Archive::default();
    for c in scored {
        if a.occupied() >= cfg.init_cap || covers_all_values(&a, &cfg.space) {
            break;
        }
        a.offer(c.key, c.coherent, c.elite);
    }
    a
}

pub struct MapElites<'a> {
    pub config: QdConfig,
    pub archive: Archive,
    pub generation: usize,
    pub stats: Vec<GenStats>,
    pcfg: &'a Pcfg,
    ev: Evaluator<'a>,
}

impl<'a> MapElites<'a> {
    /// Starts from an existing archive, e.g. a freshly initialized one or a
    /// checkpoint written after `generation` generations.
    pub fn new(
        config: QdConfig,
        archive: Archive,
        generation: usize,
        pcfg: &'a Pcfg,
        model: &'a FitnessModel,
        ctx: &'a FeatureContext,
        exemplars: &'a ExemplarSet,
    ) -> Result<MapElites<'a>, FitnessError> {
        model.check_registry(&ctx.registry)?;
        config.check().map_err(FitnessError::Config)?;
        let ev = Evaluator { model, ctx, exemplars, space: config.space };
        Ok(MapElites { config, archive, generation, stats: Vec::new(), pcfg, ev })
    }

    /// One batch of updates. Candidates are produced and scored in parallel
    /// and inserted in update order.
    pub fn step(&mut self) -> &GenStats {
        let gen = self.generation + 1;
        let parents: Vec<&Game> = self.archive.residents().into_iter().map(|e| &e.game).collect();
        let cfg = &self.config;
        let results: Vec<(bool, Vec<Routed>)> = (0..cfg.updates)
            .into_par_iter()
            .map(|u| {
                let mut r = rng::indexed(cfg.seed, "qd/update", gen as u64, u as u64);
                let children = match parents.choose(&mut r) {
                    Some(p) if !cfg.pcfg_only => {
                        let m = mutate(p, &cfg.weights, self.pcfg, &parents, &cfg.space, &mut r);
                        if m.is_noop() {
                            return (true, Vec::new());
                        }
                        std::iter::once(m.game).chain(m.sibling).collect()
                    }
                    _ => vec![sample_game(self.pcfg, &mut r)],
                };
                (false, children.into_iter().filter_map(|c| self.ev.route(c, gen, &mut r)).collect())
            })
            .collect();
        let noops = results.iter().filter(|r| r.0).count();
        let mut inserted = 0;
        for c in results.into_iter().flat_map(|r| r.1) {
            inserted += self.archive.offer(c.key, c.coherent, c.elite) as usize;
        }
        self.generation = gen;
        self.stats.push(stats(&self.archive, gen, inserted, noops));
        self.stats.last().unwrap()
    }

    /// Runs until `config.generations` generations have completed.
    pub fn run(&mut self, mut on_generation: impl FnMut(&GenStats, &Archive)) {
        while self.generation < self.config.generations {
            self.step();
            on_generation(self.stats.last().unwrap(), &self.archive);
        }
    }
}

/// Initializes and runs a full search.
pub fn run_map_elites(
    config: &QdConfig,
    pcfg: &Pcfg,
    model: &FitnessModel,
    ctx: &FeatureContext,
    exemplars: &ExemplarSet,
) -> Result<(Archive, Vec<GenStats>), FitnessError> {
    let archive = init_archive(config, pcfg, model, ctx, exemplars);
    let mut me = MapElites::new(config.clone(), archive, 0, pcfg, model, ctx, exemplars)?;
    me.run(|_, _| {});
    Ok((me.archive, me.stats))
}

impl Archive {
    /// Coherent residents: the search's reportable output.
    pub fn reported(&self) -> Vec<(&ArchiveKey, &Elite)> {
        self.coherent.iter().collect()
    }

    pub fn mean_coherent_fitness(&self) -> f64 {
        let n = self.coherent.len();
        if n == 0 {
            return f64::NAN;
        }
        self.coherent.values().map(|e| e.fitness).sum::<f64>() / n as f64
    }
}
