use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mutate::{apply, crossover_at, insert_into};
use super::*;
use crate::dsl::nodes::{self, Category};
use crate::dsl::{parse_game, print_game, validate};
use crate::features::{coherence_check, Registry};
use crate::fitness::TrainConfig;
use crate::pipeline::{fit_model, Trained};

fn fixture() -> &'static Trained {
    static T: OnceLock<Trained> = OnceLock::new();
    T.get_or_init(|| {
        let corpus = crate::synth::corpus(&mut crate::rng::substream(5, "qd-tests"), 12);
        let cfg = TrainConfig { k: 4, m: 8, max_epochs: 150, plateau: 50, ..TrainConfig::default() };
        fit_model(&corpus, None, Registry::full(), &cfg).unwrap()
    })
}

fn bits(set: &[usize]) -> BcVector {
    let mut v = [false; BC_BITS];
    for &i in set {
        v[i] = true;
    }
    v
}

#[test]
fn exemplar_bits_match_table() {
    // 0 agent_holds|in_motion, 1 in, 2 on, 3 adjacent|near|touch,
    // 4 balls, 5 receptacles, 6 blocks|building, 7 furniture|room, 8 small|large|any
    let expected = [
        bits(&[0, 4]),
        bits(&[0, 1, 2, 4, 5, 7]),
        bits(&[0, 2, 3, 4, 7]),
        bits(&[1, 5, 8]),
        bits(&[2, 7, 8]),
        bits(&[0, 1, 6]),
        bits(&[1, 2, 6]),
        bits(&[0, 1, 3, 4, 5]),
        bits(&[0, 3, 7, 8]),
    ];
    let ex = ExemplarSet::standard();
    for (e, want) in ex.exemplars.iter().zip(expected) {
        assert_eq!(e.bits, want, "{}", e.name);
    }
    let names: BTreeSet<&str> = ex.exemplars.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(names.len(), 9);
}

#[test]
fn bc_vector_edge_cases() {
    let zero = parse_pref_def("(preference pp (at-end (game_start)))").unwrap();
    assert_eq!(pref_bc_vector(&zero), [false; BC_BITS]);
    let dodge = parse_pref_def("(preference pp (exists (?b - dodgeball) (at-end (game_start))))").unwrap();
    assert_eq!(pref_bc_vector(&dodge), bits(&[4]));
}

#[test]
fn wrapped_exemplars_are_coherent() {
    let ctx = fixture().context();
    let ex = ExemplarSet::standard();
    for i in 0..ex.len() {
        let g = ex.wrapped_game(i);
        assert!(validate(&g).is_empty());
        assert_eq!(parse_game(&print_game(&g)).unwrap(), g);
        let fv = ctx.extract_full(&g);
        let failing: Vec<_> = crate::features::coherence_features()
            .into_iter()
            .filter(|(n, want)| fv.get(n) != Some(*want))
            .map(|(n, _)| n)
            .collect();
        assert!(coherence_check(&fv), "{}: {failing:?}", ex.exemplars[i].name);
    }
}

fn binom(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

#[test]
fn key_space_sizes() {
    let keys = KeySpace::standard().enumerate();
    assert_eq!(keys.len(), 2000);
    let per: Vec<usize> = (1..=4).map(|n| keys.iter().filter(|k| k.total() == n).count()).collect();
    assert_eq!(per, vec![20, 110, 440, 1430]);
    // multisets of size n over 10 bins, times two setup states
    let oracle: Vec<usize> = (1..=4).map(|n| 2 * binom(n + 9, 9) as usize).collect();
    assert_eq!(per, oracle);
    let unique: BTreeSet<_> = keys.iter().collect();
    assert_eq!(unique.len(), keys.len());
    assert!(keys.iter().all(|k| KeySpace::standard().contains(k)));
    assert_eq!(KeySpace::desk().enumerate().len(), 28);
    for k in &keys[..5] {
        assert_eq!(ArchiveKey::parse_label(&k.label()).as_ref(), Some(k));
    }
}

fn game_with(prefs: &[&str], setup: bool) -> Game {
    let names: Vec<String> = prefs.iter().map(|p| parse_pref_def(p).unwrap().name().to_string()).collect();
    let scoring: Vec<String> = names.iter().map(|n| format!("(count {n})")).collect();
    let setup = if setup { "(:setup (exists (?h - hexagonal_bin) (game-conserved (near desk ?h))))" } else { "" };
    parse_game(&format!(
        "(define (game t-1) (:domain many-objects-room-v1) {setup} (:constraints (and {})) (:scoring (+ {})))",
        prefs.join(" "),
        scoring.join(" ")
    ))
    .unwrap()
}

#[test]
fn behavioral_key_examples() {
    let ex = ExemplarSet::standard();
    let mut r = ChaCha8Rng::seed_from_u64(0);
    let g = game_with(&[EXEMPLAR_TEXTS[0], EXEMPLAR_TEXTS[1]], true);
    let (k, a) = behavioral_key(&g, &ex, &KeySpace::standard(), &mut r).unwrap();
    assert_eq!(k.counts, vec![1, 1, 0, 0, 0, 0, 0, 0, 0, 0]);
    assert!(k.setup);
    assert_eq!(k.total(), 2);
    assert_eq!(a, vec![Some(0), Some(1)]);
    assert_eq!(key_from_assignment(&g, 9, &a), k);

    let far = "(preference pp (exists (?l - block ?c - chair) (at-end (and (in ?c ?l) (on ?c ?l) (touch ?c ?l)))))";
    let v = pref_bc_vector(&parse_pref_def(far).unwrap());
    for e in &ex.exemplars {
        let d: usize = e.bits.iter().zip(&v).filter(|(a, b)| a != b).count();
        assert!(d >= 2, "{} at {d}", e.name);
    }
    let (k, _) = behavioral_key(&game_with(&[far], false), &ex, &KeySpace::standard(), &mut r).unwrap();
    assert_eq!(k.counts[9], 1);
    assert!(!k.setup);

    let five = game_with(&[EXEMPLAR_TEXTS[0], EXEMPLAR_TEXTS[1], EXEMPLAR_TEXTS[2], EXEMPLAR_TEXTS[3], EXEMPLAR_TEXTS[4]], false);
    assert_eq!(
        behavioral_key(&five, &ex, &KeySpace::standard(), &mut r).unwrap_err(),
        QdError::PrefCount { found: 5, min: 1, max: 4 }
    );
}

#[test]
fn multi_match_is_random_but_seeded() {
    // two identical exemplars, so every match is a tie
    let ex = ExemplarSet::from_texts(&[EXEMPLAR_TEXTS[0], EXEMPLAR_TEXTS[0].replace("throwAttempt", "throwCopy").as_str()]).unwrap();
    let g = game_with(&[EXEMPLAR_TEXTS[0]], false);
    let space = KeySpace { n_exemplars: 2, min_prefs: 1, max_prefs: 2 };
    let picks: BTreeSet<Option<usize>> = (0..32)
        .map(|s| behavioral_key(&g, &ex, &space, &mut ChaCha8Rng::seed_from_u64(s)).unwrap().1[0])
        .collect();
    assert_eq!(picks, BTreeSet::from([Some(0), Some(1)]));
    let a = behavioral_key(&g, &ex, &space, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(a, behavioral_key(&g, &ex, &space, &mut ChaCha8Rng::seed_from_u64(3)).unwrap());
}

fn elite(g: &Game, f: f64) -> Elite {
    Elite { game: g.clone(), fitness: f, generation: 0, assignment: vec![None] }
}

#[test]
fn elite_rule_and_checkpoint() {
    let g = game_with(&[EXEMPLAR_TEXTS[0]], false);
    let k = ArchiveKey { counts: vec![1, 0, 0, 0], setup: false };
    let mut a = Archive::default();
    assert!(a.offer(k.clone(), true, elite(&g, 1.0)));
    assert!(!a.offer(k.clone(), true, elite(&g, 1.0)));
    assert!(!a.offer(k.clone(), true, elite(&g, 0.5)));
    assert!(a.offer(k.clone(), true, elite(&g, 1.5)));
    assert!(a.offer(k.clone(), false, elite(&g, -3.0)));
    assert_eq!(a.coherent[&k].fitness, 1.5);
    assert_eq!((a.occupied(), a.offered, a.accepted), (2, 5, 3));
    let back = Archive::from_checkpoint(&a.to_checkpoint()).unwrap();
    assert_eq!(back.coherent, a.coherent);
    assert_eq!(back.incoherent, a.incoherent);
    assert!(Archive::from_checkpoint("{\"nope\":1}").is_err());
}

#[test]
fn duplicate_preferences_detected() {
    let renamed = EXEMPLAR_TEXTS[0].replace("throwAttempt", "throwAgain");
    assert!(has_duplicate_preferences(&game_with(&[EXEMPLAR_TEXTS[0], &renamed], false)));
    assert!(!has_duplicate_preferences(&game_with(&[EXEMPLAR_TEXTS[0], EXEMPLAR_TEXTS[1]], false)));
}

#[test]
fn insert_grows_an_and() {
    let pcfg = &fixture().pcfg;
    let g = parse_game("(define (game t-1) (:domain many-objects-room-v1) (:constraints (and (preference pp (exists (?b - ball) (at-end (and (in_motion ?b) (agent_holds ?b))))))) (:scoring (count pp)))").unwrap();
    let and_id = nodes::nodes(&g)
        .into_iter()
        .find(|n| n.category == Category::Pred && matches!(nodes::get_fragment(&g, n.id).unwrap().0, nodes::Fragment::Pred(Pred::And(_))))
        .unwrap()
        .id;
    for s in 0..20 {
        let out = insert_into(&g, and_id, pcfg, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
        let nodes::Fragment::Pred(Pred::And(cs)) = nodes::get_fragment(&out, and_id).unwrap().0 else { panic!() };
        assert_eq!(cs.len(), 3);
        assert_eq!(parse_game(&print_game(&out)).unwrap(), out);
    }
}

#[test]
fn inserted_preference_is_scored() {
    let pcfg = &fixture().pcfg;
    let g = game_with(&[EXEMPLAR_TEXTS[0]], false);
    let out = insert_into(&g, 0, pcfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(out.preferences.len(), 2);
    let fresh = out.preferences.iter().find(|p| p.name() != "throwAttempt").unwrap().name().to_string();
    assert!(print_game(&out).contains(&format!("(count {fresh})")));
}

#[test]
fn crossover_swaps_preferences() {
    let a = game_with(&[EXEMPLAR_TEXTS[0]], false);
    let b = game_with(&[EXEMPLAR_TEXTS[4]], false);
    let child = crossover_at(&a, 1, &b, 1).unwrap();
    assert_eq!(child.preferences.len(), 1);
    assert_eq!(child.preferences[0].name(), "throwAttempt");
    assert_eq!(pref_bc_vector(&child.preferences[0]), ExemplarSet::standard().exemplars[4].bits);
    assert!(crossover_at(&a, 1, &b, 2).is_none());
}

#[test]
fn resample_setup_adds_a_section() {
    let pcfg = &fixture().pcfg;
    let g = game_with(&[EXEMPLAR_TEXTS[0]], false);
    for s in 0..10 {
        let out = apply(Operator::ResampleSetup, &g, pcfg, &[], &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
        assert!(out.setup.is_some());
    }
}

#[test]
fn mutation_closure_and_noop() {
    let t = fixture();
    let corpus = crate::synth::corpus(&mut crate::rng::substream(5, "qd-tests"), 12);
    let partners: Vec<&Game> = corpus.iter().collect();
    let space = KeySpace { n_exemplars: 9, min_prefs: 1, max_prefs: 4 };
    let weights: Vec<(Operator, f64)> = Operator::ALL.iter().map(|&o| (o, 1.0)).collect();
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let mut seen_ops = BTreeSet::new();
    for (i, g) in corpus.iter().cycle().take(120).enumerate() {
        let m = mutate(g, &weights, &t.pcfg, &partners, &space, &mut r);
        let again = mutate(g, &weights, &t.pcfg, &partners, &space, &mut ChaCha8Rng::seed_from_u64(i as u64));
        assert_eq!(again, mutate(g, &weights, &t.pcfg, &partners, &space, &mut ChaCha8Rng::seed_from_u64(i as u64)));
        if let Some(op) = m.operator {
            seen_ops.insert(op);
            assert!(validate(&m.game).is_empty());
            assert!(!has_duplicate_preferences(&m.game));
            assert!((1..=4).contains(&m.game.preferences.len()));
            assert_ne!(&m.game, g);
        }
    }
    assert!(seen_ops.len() >= 7, "{seen_ops:?}");

    // nothing to delete in a one-preference game without lists of two
    let single = parse_game("(define (game t-1) (:domain many-objects-room-v1) (:constraints (and (preference pp (exists (?b - ball) (at-end (in_motion ?b)))))) (:scoring (count pp)))").unwrap();
    let m = mutate(&single, &[(Operator::Delete, 1.0)], &t.pcfg, &[], &space, &mut r);
    assert!(m.is_noop());
    assert_eq!(m.game, single);
}

fn small_cfg() -> QdConfig {
    QdConfig { generations: 3, updates: 24, init_samples: 64, init_cap: 8, seed: 4, ..QdConfig::desk() }
}

#[test]
fn init_respects_cap_and_is_seeded() {
    let t = fixture();
    let ex = ExemplarSet::first(3);
    let cfg = QdConfig { init_samples: 8, init_cap: 4, ..small_cfg() };
    let a = init_archive(&cfg, &t.pcfg, &t.model, t.context(), &ex);
    assert!(a.occupied() <= 4);
    let b = init_archive(&cfg, &t.pcfg, &t.model, t.context(), &ex);
    assert_eq!(a, b);
}

#[test]
fn search_is_elitist_and_closed() {
    let t = fixture();
    let ex = ExemplarSet::first(3);
    let cfg = small_cfg();
    let init = init_archive(&cfg, &t.pcfg, &t.model, t.context(), &ex);

    let mut idle = MapElites::new(QdConfig { generations: 0, ..cfg.clone() }, init.clone(), 0, &t.pcfg, &t.model, t.context(), &ex).unwrap();
    idle.run(|_, _| {});
    assert_eq!(idle.archive, init);

    let mut me = MapElites::new(cfg.clone(), init.clone(), 0, &t.pcfg, &t.model, t.context(), &ex).unwrap();
    let mut prev = init.clone();
    me.run(|_, a| {
        for (half, before) in [(&a.coherent, &prev.coherent), (&a.incoherent, &prev.incoherent)] {
            for (k, e) in before {
                assert!(half[k].fitness >= e.fitness);
            }
        }
        prev = a.clone();
    });
    assert_eq!(me.stats.len(), 3);
    assert!(me.archive.occupied() >= init.occupied());
    for (coh, half) in [(true, &me.archive.coherent), (false, &me.archive.incoherent)] {
        for (k, e) in half {
            assert!(cfg.space.contains(k));
            assert_eq!(&key_from_assignment(&e.game, 3, &e.assignment), k);
            assert!(validate(&e.game).is_empty());
            assert_eq!(coherence_check(&t.context().extract_full(&e.game)), coh);
            assert!((t.model.score_game(&e.game).unwrap() - e.fitness).abs() < 1e-9);
        }
    }
    let (again, _) = run_map_elites(&cfg, &t.pcfg, &t.model, t.context(), &ex).unwrap();
    assert_eq!(again, me.archive);

    // resuming from a checkpoint continues identically
    let mut head = MapElites::new(QdConfig { generations: 1, ..cfg.clone() }, init, 0, &t.pcfg, &t.model, t.context(), &ex).unwrap();
    head.run(|_, _| {});
    let restored = Archive::from_checkpoint(&head.archive.to_checkpoint()).unwrap();
    let mut tail = MapElites::new(cfg.clone(), restored, 1, &t.pcfg, &t.model, t.context(), &ex).unwrap();
    tail.run(|_, _| {});
    assert_eq!(tail.archive.coherent, me.archive.coherent);
    assert_eq!(tail.archive.incoherent, me.archive.incoherent);
}

#[test]
fn pcfg_only_never_mutates() {
    let t = fixture();
    let ex = ExemplarSet::first(3);
    let cfg = QdConfig { pcfg_only: true, ..small_cfg() };
    let mut me = MapElites::new(cfg, Archive::default(), 0, &t.pcfg, &t.model, t.context(), &ex).unwrap();
    let s = me.step().clone();
    assert_eq!(s.noops, 0);
}
