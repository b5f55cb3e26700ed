//! Shared inputs for the benchmarks.

use goalgen_core::dsl::{sample_game, Game, Pcfg};
use goalgen_core::features::Registry;
use goalgen_core::fitness::TrainConfig;
use goalgen_core::pipeline::{fit_model, Trained};
use goalgen_core::trace::Trace;
use goalgen_core::{rng, synth};

pub struct Fixture {
    pub corpus: Vec<Game>,
    pub samples: Vec<Game>,
    pub traces: Vec<Trace>,
    pub trained: Trained,
}

impl Fixture {
    /// A 20-game synthetic corpus, 16 grammar samples, 8 traces of 40 events
    /// and a desk-sized model.
    pub fn new() -> Fixture {
        let corpus = synth::corpus(&mut rng::substream(1, "bench/corpus"), 20);
        let traces = synth::traces(&mut rng::substream(1, "bench/traces"), 8, 40);
        let pcfg = Pcfg::fit(&corpus).unwrap();
        let mut r = rng::substream(1, "bench/samples");
        let samples = (0..16).map(|_| sample_game(&pcfg, &mut r)).collect();
        let trained = fit_model(&corpus, None, Registry::full(), &TrainConfig { seed: 1, ..TrainConfig::desk() }).unwrap();
        Fixture { corpus, samples, traces, trained }
    }
}

impl Default for Fixture {
    fn default() -> Self {
        Fixture::new()
    }
}
