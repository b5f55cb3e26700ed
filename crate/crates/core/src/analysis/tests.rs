use super::stats::*;
use super::*;
use crate::dsl::{parse_game, parse_pref_def, Game};
use crate::features::Registry;

fn game(prefs: &str) -> Game {
    parse_game(&format!("(define (game t-1) (:domain many-objects-room-v1) (:constraints (and {prefs})) (:scoring 1))")).unwrap()
}

const THROW: &str = "(preference throwAttempt (exists (?b - dodgeball) (then (once (agent_holds ?b)) (hold (and (not (agent_holds ?b)) (in_motion ?b))) (once (not (in_motion ?b))))))";

#[test]
fn structures_ignore_variable_names() {
    let c = vec![
        game("(preference pa (exists (?b - ball) (then (once (agent_holds ?b)) (hold (in_motion ?b)))))"),
        game("(preference pb (exists (?d - dodgeball) (then (once (agent_holds ?d)) (hold (in_motion ?d)))))"),
    ];
    let r = abstract_structures(&c);
    assert_eq!(
        r.counts,
        vec![("(hold (in_motion <obj>))".to_string(), 2), ("(once (agent_holds <obj>))".to_string(), 2)]
    );
    assert_eq!(r.singletons(), 0);

    let one = abstract_structures(&[game("(preference pa (exists (?b - ball) (at-end (in_motion ?b))))")]);
    assert_eq!((one.unique(), one.singletons(), one.singleton_share()), (1, 1, 1.0));

    let t = abstract_structures(&[game(THROW)]);
    assert!(t.counts.iter().any(|c| c.0 == "(hold (and (not (agent_holds <obj>)) (in_motion <obj>)))"));
    assert_eq!(t.total(), 3);
    assert_eq!(t.top_share(5), 1.0);
    assert_eq!(abstract_structures(&[]).top_share(5), 0.0);
}

#[test]
fn role_fillers_and_motifs() {
    let throw = game(THROW);
    assert_eq!(motifs(&throw), [Motif::Throwing].into());
    let t = role_filler_stats(std::slice::from_ref(&throw));
    assert_eq!(t.get(Split::ThrowingOnly, "agent_holds", "balls"), 1);
    assert_eq!(t.get(Split::Other, "agent_holds", "balls"), 0);
    assert!(role_filler_stats(&[]).is_empty());

    let stack = game("(preference stackA (exists (?a ?b - cube_block) (at-end (on ?a ?b))))");
    assert_eq!(motifs(&stack), [Motif::Stacking].into());
    let t = role_filler_stats(&[throw.clone(), stack.clone(), stack]);
    assert_eq!(t.get(Split::Other, "on", "blocks"), 2);
    assert_eq!(t.get(Split::ThrowingOnly, "in_motion", "balls"), 1);

    let place = game("(preference placeA (exists (?o - ball) (at-end (in top_drawer ?o))))");
    assert_eq!(motifs(&place), [Motif::Placement].into());
}

/// Full-matrix Wagner–Fischer, written independently of the library.
fn oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let c = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + c);
        }
    }
    d[a.len()][b.len()]
}

#[test]
fn edit_distance_examples() {
    assert_eq!(levenshtein("kitten", "sitting"), 3);
    assert_eq!(oracle("kitten", "sitting"), 3);
    for (a, b) in [("", "abc"), ("flaw", "lawn"), ("intention", "execution"), ("same", "same")] {
        assert_eq!(levenshtein(a, b), oracle(a, b));
    }
    let a = "(define (game a-1) (:domain few-objects-room-v1)  (:scoring   1))";
    assert_eq!(preprocess(a), "(:scoring 1))");
    let g = game(THROW);
    let mut h = g.clone();
    h.name = "other-name".into();
    assert_eq!(game_distance(&g, &h), 0);
}

#[test]
fn nearest_real_ties_first() {
    let a = game(THROW);
    let b = game("(preference stackA (exists (?a ?b - cube_block) (at-end (on ?a ?b))))");
    assert_eq!(nearest_real(&a, &[b.clone(), a.clone(), a.clone()]), Some((1, 0)));
    assert_eq!(nearest_real(&a, std::slice::from_ref(&b)).map(|r| r.0), Some(0));
    assert_eq!(nearest_real(&a, &[]), None);
}

#[test]
fn describe_matches_template_style() {
    let sf = parse_pref_def("(preference pp (exists (?d - dodgeball ?p - pyramid_block) (then (once (and (agent_holds ?d) (adjacent ?p agent))) (hold (and (not (agent_holds ?d)) (in_motion ?d))))))").unwrap();
    let text = describe::preference(&sf);
    assert!(text.contains("- first, there is a state where (the agent is holding ?d) and (?p is adjacent to agent)\n"), "{text}");
    assert!(text.contains(
        "- finally, there is a sequence of one or more states where (it's not the case that the agent is holding ?d) and (?d is in motion)"
    ));
    assert!(text.contains("-?d of type dodgeball\n"));
    let at_end = parse_pref_def("(preference pq (exists (?b - building ?f - flat_block ?l - cube_block) (at-end (and (is_setup_object ?f) (in ?b ?f) (in ?b ?l)))))").unwrap();
    assert!(describe::preference(&at_end)
        .contains("- in the final game state, (?f is used in the setup), (?f is inside of ?b), and (?l is inside of ?b)"));
    let g = game(THROW);
    assert_eq!(describe(&g), describe(&g.clone()));
}

#[test]
fn rank_statistics() {
    assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 25.0, 100.0]) - 1.0).abs() < 1e-12);
    assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    // d = [1, 2, 3]: mean 2, sd 1, t = 2·√3
    let t = paired_t(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
    assert!((t.t - 2.0 * 3f64.sqrt()).abs() < 1e-12);
    assert_eq!(t.df, 2.0);
    assert!(t.p > 0.05 && t.p < 0.1, "{}", t.p);
    assert!(paired_t(&[1.0], &[1.0]).is_none());
    let w = welch_t(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(w.diff, 0.0);
    assert!((w.p - 1.0).abs() < 1e-12);
}

#[test]
fn profiles_parse() {
    for p in ["full", "no_common_sense", "no_coherence_features", "no_crossover", "no_custom_ops", "pcfg_only"] {
        assert_eq!(Profile::parse(p).unwrap().label(), p);
    }
    assert_eq!(Profile::parse("held_out").unwrap(), Profile::HeldOut(0.2));
    assert_eq!(Profile::parse("held_out:0.3").unwrap(), Profile::HeldOut(0.3));
    assert!(Profile::parse("nope").is_err());
    assert!(Profile::parse("held_out:2").is_err());
    assert_eq!(Profile::NoCommonSense.registry().len(), Registry::full().len() - 2);
}
