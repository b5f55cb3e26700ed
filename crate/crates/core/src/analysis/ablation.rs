//! Ablation re-runs: retrain and search under a modified setup, then compare
//! against the full model on matched archive cells.

use std::collections::BTreeMap;
use std::fmt::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{paired_t, welch_t, TTest};
use super::AnalysisError;
use crate::dsl::Game;
use crate::features::{Group, Registry};
use crate::fitness::TrainConfig;
use crate::interp::{activating_components, InterpConfig};
use crate::pipeline::{fit_model, Trained};
use crate::qd::{run_map_elites, Archive, ExemplarSet, GenStats, Operator, QdConfig};
use crate::trace::db::PredicateDb;
use crate::trace::{Thresholds, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Full,
    NoCommonSense,
    NoCoherenceFeatures,
    NoCrossover,
    NoCustomOps,
    PcfgOnly,
    /// Train on all but this fraction of the corpus.
    HeldOut(f64),
}

impl Profile {
    pub fn parse(s: &str) -> Result<Profile, AnalysisError> {
        Ok(match s {
            "full" => Profile::Full,
            "no_common_sense" => Profile::NoCommonSense,
            "no_coherence_features" => Profile::NoCoherenceFeatures,
            "no_crossover" => Profile::NoCrossover,
            "no_custom_ops" => Profile::NoCustomOps,
            "pcfg_only" => Profile::PcfgOnly,
            "held_out" => Profile::HeldOut(0.2),
            _ => match s.strip_prefix("held_out:").and_then(|f| f.parse::<f64>().ok()) {
                Some(f) if f > 0.0 && f < 1.0 => Profile::HeldOut(f),
                _ => return Err(AnalysisError::UnknownProfile(s.to_string())),
            },
        })
    }

    pub fn label(&self) -> String {
        match self {
            Profile::Full => "full".into(),
            Profile::NoCommonSense => "no_common_sense".into(),
            Profile::NoCoherenceFeatures => "no_coherence_features".into(),
            Profile::NoCrossover => "no_crossover".into(),
            Profile::NoCustomOps => "no_custom_ops".into(),
            Profile::PcfgOnly => "pcfg_only".into(),
            Profile::HeldOut(f) => format!("held_out:{f}"),
        }
    }

    pub fn registry(&self) -> Registry {
        match self {
            Profile::NoCommonSense => Registry::without_groups(&[Group::PlayTraceDatabase]),
            Profile::NoCoherenceFeatures => Registry::without_groups(&[Group::GameElementDisjointness]),
            _ => Registry::full(),
        }
    }

    pub fn qd_config(&self, base: &QdConfig) -> QdConfig {
        match self {
            Profile::NoCrossover => base.clone().without(|o| o == Operator::Crossover),
            Profile::NoCustomOps => base.clone().without(Operator::is_custom),
            Profile::PcfgOnly => QdConfig { pcfg_only: true, ..base.clone() },
            _ => base.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AblationSetup {
    pub corpus: Vec<Game>,
    pub traces: Vec<Trace>,
    pub train: TrainConfig,
    pub qd: QdConfig,
    pub exemplars: ExemplarSet,
    pub seed: u64,
}

pub struct Arm {
    pub profile: Profile,
    pub trained: Trained,
    pub archive: Archive,
    pub stats: Vec<GenStats>,
    /// Corpus indices used for training, and those held out.
    pub train_idx: Vec<usize>,
    pub held_idx: Vec<usize>,
}

fn split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut crate::rng::substream(seed, "analysis/held_out"));
    let held = ((n as f64) * fraction).round() as usize;
    let (h, t) = idx.split_at(held.min(n.saturating_sub(1)));
    let (mut t, mut h) = (t.to_vec(), h.to_vec());
    t.sort_unstable();
    h.sort_unstable();
    (t, h)
}

pub fn run_arm(profile: Profile, setup: &AblationSetup) -> Result<Arm, AnalysisError> {
    let (train_idx, held_idx) = match profile {
        Profile::HeldOut(f) => split(setup.corpus.len(), f, setup.seed),
        _ => ((0..setup.corpus.len()).collect(), Vec::new()),
    };
    let games: Vec<Game> = train_idx.iter().map(|&i| setup.corpus[i].clone()).collect();
    let db = (!setup.traces.is_empty()).then(|| PredicateDb::build(&setup.traces, Thresholds::default()));
    let trained = fit_model(&games, db, profile.registry(), &setup.train)?;
    let cfg = profile.qd_config(&setup.qd);
    let (archive, stats) = run_map_elites(&cfg, &trained.pcfg, &trained.model, trained.context(), &setup.exemplars)?;
    Ok(Arm { profile, trained, archive, stats, train_idx, held_idx })
}

/// Share of gameplay components (setup and preferences) of the coherent
/// elites that some trace activates. Games the interpreter rejects count as
/// activating nothing.
pub fn component_satisfaction(archive: &Archive, traces: &[Trace]) -> f64 {
    let cfg = InterpConfig::default();
    let per: Vec<(usize, usize)> = archive
        .coherent
        .values()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|e| {
            let n = e.game.preferences.len() + e.game.setup.is_some() as usize;
            match activating_components(&e.game, traces, &cfg) {
                Ok(m) => (m.values().filter(|s| !s.is_empty()).count(), n),
                Err(_) => (0, n),
            }
        })
        .collect();
    let (hit, all) = per.iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if all == 0 {
        f64::NAN
    } else {
        hit as f64 / all as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub profile: String,
    pub full_occupancy: usize,
    pub ablated_occupancy: usize,
    /// Mean coherent-elite fitness, both scored by the full model.
    pub full_mean_fitness: f64,
    pub ablated_mean_fitness: f64,
    /// Ablated minus full over cells both coherent halves occupy.
    pub paired: Option<TTest>,
    pub full_satisfaction: f64,
    pub ablated_satisfaction: f64,
    /// Held-out minus training positives, under the ablated model.
    pub held_out: Option<TTest>,
}

impl Comparison {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("metric\tvalue\n");
        let mut row = |k: &str, v: String| {
            let _ = writeln!(s, "{k}\t{v}");
        };
        row("profile", self.profile.clone());
        row("full_occupancy", self.full_occupancy.to_string());
        row("ablated_occupancy", self.ablated_occupancy.to_string());
        row("full_mean_fitness", self.full_mean_fitness.to_string());
        row("ablated_mean_fitness", self.ablated_mean_fitness.to_string());
        if let Some(t) = &self.paired {
            row("paired_n", t.n.to_string());
            row("paired_diff", t.diff.to_string());
            row("paired_t", t.t.to_string());
            row("paired_p", t.p.to_string());
        }
        row("full_satisfaction", self.full_satisfaction.to_string());
        row("ablated_satisfaction", self.ablated_satisfaction.to_string());
        if let Some(t) = &self.held_out {
            row("held_out_diff", t.diff.to_string());
            row("held_out_t", t.t.to_string());
            row("held_out_p", t.p.to_string());
        }
        s
    }
}

fn full_scores(full: &Arm, a: &Archive) -> BTreeMap<crate::qd::ArchiveKey, f64> {
    let m = &full.trained.model;
    a.coherent.iter().map(|(k, e)| (k.clone(), m.score_game(&e.game).expect("full model carries its context"))).collect()
}

pub fn compare(full: &Arm, ablated: &Arm, setup: &AblationSetup) -> Comparison {
    let fs = full_scores(full, &full.archive);
    let abl = full_scores(full, &ablated.archive);
    let mean = |m: &BTreeMap<_, f64>| if m.is_empty() { f64::NAN } else { m.values().sum::<f64>() / m.len() as f64 };
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (k, v) in &abl {
        if let Some(w) = fs.get(k) {
            a.push(*v);
            b.push(*w);
        }
    }
    let held_out = (!ablated.held_idx.is_empty()).then(|| {
        let m = &ablated.trained.model;
        let score = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| m.score_game(&setup.corpus[i]).unwrap()).collect() };
        welch_t(&score(&ablated.held_idx), &score(&ablated.train_idx))
    });
    Comparison {
        profile: ablated.profile.label(),
        full_occupancy: full.archive.coherent.len(),
        ablated_occupancy: ablated.archive.coherent.len(),
        full_mean_fitness: mean(&fs),
        ablated_mean_fitness: mean(&abl),
        paired: paired_t(&a, &b),
        full_satisfaction: component_satisfaction(&full.archive, &setup.traces),
        ablated_satisfaction: component_satisfaction(&ablated.archive, &setup.traces),
        held_out: held_out.flatten(),
    }
}

/// Runs the full model and the ablation, then compares them.
pub fn run_ablation(profile: Profile, setup: &AblationSetup) -> Result<Comparison, AnalysisError> {
    let full = run_arm(Profile::Full, setup)?;
    let ablated = run_arm(profile, setup)?;
    Ok(compare(&full, &ablated, setup))
}
