use super::*;
use crate::dsl::parse::{parse_game, parse_pref_def};
use crate::trace::parse_trace;

const THROW: &str = "(preference throwAttempt (exists (?b - dodgeball) (then (once (agent_holds ?b)) (hold (and (not (agent_holds ?b)) (in_motion ?b))) (once (not (in_motion ?b))))))";

/// One dodgeball `b`; each row is (held, in_motion, x).
fn ball_trace(id: &str, rows: &[(bool, bool, f64)]) -> Trace {
    let mut s = format!(r#"{{"trace":"{id}","objects":[{{"id":"b","type":"dodgeball"}},{{"id":"h","type":"hexagonal_bin"}},{{"id":"bed","type":"bed"}}]}}"#);
    s.push('\n');
    for (i, (h, m, x)) in rows.iter().enumerate() {
        s.push_str(&format!(
            r#"{{"index":{i},"objects":{{"b":{{"position":[{x},0,0],"held":{h},"in_motion":{m}}},"h":{{"position":[2,0,0]}},"bed":{{"position":[5,0,0]}}}}}}"#
        ));
        s.push('\n');
    }
    parse_trace(&s).unwrap()
}

fn two_throws() -> Trace {
    ball_trace(
        "two",
        &[(true, false, 0.0), (false, true, 1.0), (false, true, 2.0), (false, false, 3.0), (true, false, 3.0), (false, false, 3.0)],
    )
}

fn game(scoring: &str, terminal: &str) -> Game {
    parse_game(&format!("(define (game g1) (:domain many-objects-room-v1) (:constraints (and {THROW})) {terminal} (:scoring {scoring}))")).unwrap()
}

#[test]
fn counts_two_throws() {
    let r = score_game(&game("(count throwAttempt)", ""), &two_throws()).unwrap();
    assert_eq!(r.total, Some(2.0));
    let iv: Vec<_> = r.satisfactions["throwAttempt"].iter().map(|s| (s.start, s.end)).collect();
    assert_eq!(iv, vec![(0, 3), (4, 5)]);
    assert_eq!(r.terminal_state, None);
}

#[test]
fn terminal_on_score_cuts_later_satisfactions() {
    let r = score_game(&game("(count throwAttempt)", "(:terminal (>= (total-score) 1))"), &two_throws()).unwrap();
    assert_eq!(r.terminal_state, Some(3));
    assert_eq!(r.total, Some(1.0));
    let r = score_game(&game("(count throwAttempt)", "(:terminal (>= (total-time) 4))"), &two_throws()).unwrap();
    assert_eq!((r.terminal_state, r.total), (Some(4), Some(1.0)));
}

#[test]
fn multiplier_and_division() {
    let rows: Vec<(bool, bool, f64)> = (0..5).flat_map(|_| [(true, false, 0.0), (false, false, 0.0)]).collect();
    let t = ball_trace("five", &rows);
    let r = score_game(&game("(* 0.4 (count throwAttempt))", ""), &t).unwrap();
    assert!((r.total.unwrap() - 2.0).abs() < 1e-12);
    let r = score_game(&game("(/ 1 (- (count throwAttempt) 5))", ""), &t).unwrap();
    assert_eq!(r.total, None);
    assert_eq!(r.errors, vec!["division by zero".to_string()]);
}

#[test]
fn hold_while_needs_secondary() {
    // the ball moves but is never near the bed while flying
    let t = two_throws();
    let plain = "(preference pp (exists (?b - dodgeball) (then (once (agent_holds ?b)) (hold (in_motion ?b)) (once (not (in_motion ?b))))))";
    let hw = "(preference pp (exists (?b - dodgeball) (then (once (agent_holds ?b)) (hold-while (in_motion ?b) (touch ?b bed)) (once (not (in_motion ?b))))))";
    let ev = Evaluator::new(&t);
    let n = |src: &str| run_preference(&compile_preference(&parse_pref_def(src).unwrap()), &t, &ev).unwrap().all.len();
    assert!(n(plain) > 0);
    assert_eq!(n(hw), 0);
}

#[test]
fn hold_while_secondaries_in_order() {
    let t = two_throws();
    let ev = Evaluator::new(&t);
    let run = |sec: &str| {
        let src = format!("(preference pp (exists (?b - dodgeball) (then (once (agent_holds ?b)) (hold-while (in_motion ?b) {sec}) (once (not (in_motion ?b))))))");
        let r = run_preference(&compile_preference(&parse_pref_def(&src).unwrap()), &t, &ev).unwrap();
        r.all.iter().map(|s| (s.start, s.end)).collect::<Vec<_>>()
    };
    // x=1 then x=2 during the flight
    let at = |x: f64| format!("(= (x_position ?b) {x})");
    assert_eq!(run(&format!("{} {}", at(1.0), at(2.0))), vec![(0, 3)]);
    assert!(run(&format!("{} {}", at(2.0), at(1.0))).is_empty());
}

#[test]
fn no_throws_without_holding() {
    let t = ball_trace("still", &[(false, false, 0.0), (false, true, 1.0), (false, false, 2.0)]);
    assert_eq!(score_game(&game("(count throwAttempt)", ""), &t).unwrap().total, Some(0.0));
}

fn sat(binding: &[(&str, &str)], n_external: usize, start: usize, end: usize, measure: Option<f64>) -> Satisfaction {
    Satisfaction {
        pref: "p".into(),
        binding: binding.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        n_external,
        start,
        end,
        measure,
    }
}

#[test]
fn count_modes_on_constructed_sets() {
    let t = two_throws();
    let th = PositionThresholds::default();
    let sets = vec![sat(&[("?b", "b")], 0, 0, 2, None), sat(&[("?b", "h")], 0, 1, 3, None), sat(&[("?b", "b")], 0, 4, 5, None)];
    let c = |m| count_mode(m, &sets, &t, &th).unwrap();
    assert_eq!(c(CountMode::Count), 2.0);
    assert_eq!(c(CountMode::Overlapping), 3.0);
    assert_eq!(c(CountMode::Once), 1.0);
    assert_eq!(c(CountMode::OncePerObjects), 2.0);
    let m = vec![sat(&[], 0, 0, 1, Some(1.5)), sat(&[], 0, 2, 3, Some(2.5))];
    assert_eq!(count_mode(CountMode::Measure, &m, &t, &th).unwrap(), 4.0);
    let ext = vec![sat(&[("?h", "h"), ("?b", "b")], 1, 0, 1, None), sat(&[("?h", "h"), ("?b", "bed")], 1, 2, 3, None)];
    assert_eq!(count_mode(CountMode::OncePerExternalObjects, &ext, &t, &th).unwrap(), 1.0);
    assert!(count_mode(CountMode::Measure, &sets, &t, &th).is_err());
}

#[test]
fn positional_modes() {
    // b rests at x=0 (states 0-1), x=3 (3-5); moves during 1-3
    let t = two_throws();
    let th = PositionThresholds::default();
    let sets = vec![sat(&[("?b", "b")], 0, 3, 3, None), sat(&[("?b", "b")], 0, 4, 5, None), sat(&[("?b", "b")], 0, 0, 0, None), sat(&[("?b", "b")], 0, 1, 2, None)];
    assert_eq!(count_mode(CountMode::UniquePositions, &sets, &t, &th).unwrap(), 2.0);
    assert_eq!(count_mode(CountMode::SamePositions, &sets, &t, &th).unwrap(), 2.0);
}

fn setup_trace(on_rows: &[bool]) -> Trace {
    let mut s = String::from(r#"{"trace":"s","objects":[{"id":"bed","type":"bed"},{"id":"h","type":"hexagonal_bin"},{"id":"b","type":"dodgeball"},{"id":"desk","type":"desk"}]}"#);
    s.push('\n');
    for (i, on) in on_rows.iter().enumerate() {
        let rel = if *on { r#"[["bed","h"]]"# } else { "[]" };
        let desk = if i == 2 { r#"[["desk","b"]]"# } else { "[]" };
        let on_all = format!("[{}{}{}]", &rel[1..rel.len() - 1], if *on && i == 2 { "," } else { "" }, &desk[1..desk.len() - 1]);
        s.push_str(&format!(
            r#"{{"index":{i},"objects":{{"bed":{{"position":[0,0,0]}},"h":{{"position":[0,1,0]}},"b":{{"position":[1,1,0]}},"desk":{{"position":[3,0,0]}}}},"on":{on_all}}}"#
        ));
        s.push('\n');
    }
    parse_trace(&s).unwrap()
}

fn setup_of(text: &str) -> Setup {
    let g = parse_game(&format!("(define (game g1) (:domain dom) (:setup {text}) (:constraints (and (preference pp (at-end (game_over))))) (:scoring (count pp)))")).unwrap();
    g.setup.unwrap()
}

#[test]
fn setup_conserved_and_optional() {
    let th = Thresholds::default();
    let s = setup_of("(exists (?h - hexagonal_bin) (game-conserved (on bed ?h)))");
    let r = eval_setup(&s, &setup_trace(&[true; 7]), th).unwrap();
    assert_eq!((r.satisfied_at, r.conserved_ok), (Some(0), true));
    assert!(r.objects.contains("h"));
    let r = eval_setup(&s, &setup_trace(&[true, true, true, true, true, false, false]), th).unwrap();
    assert_eq!((r.satisfied_at, r.conserved_ok), (Some(0), false));
    let s = setup_of("(exists (?b - dodgeball) (game-optional (on desk ?b)))");
    let r = eval_setup(&s, &setup_trace(&[true; 5]), th).unwrap();
    assert_eq!(r.satisfied_at, Some(2));
}

#[test]
fn activating_sets_and_jaccard() {
    let g = game("(count throwAttempt)", "");
    let still = ball_trace("still", &[(false, false, 0.0), (false, false, 0.0)]);
    let mut other = two_throws();
    other.id = "two-b".into();
    let traces = vec![two_throws(), still, other];
    let comps = activating_components(&g, &traces, &InterpConfig::default()).unwrap();
    assert_eq!(comps["throwAttempt"].len(), 2);
    let a = activating_traces(&comps);
    assert_eq!(jaccard(&a, &a), 1.0);
    assert_eq!(jaccard(&BTreeSet::new(), &BTreeSet::new()), 1.0);
    let never = parse_game("(define (game g1) (:domain dom) (:constraints (and (preference pp (exists (?b - dodgeball) (at-end (and (agent_holds ?b) (not (agent_holds ?b)))))))) (:scoring (count pp)))").unwrap();
    let comps = activating_components(&never, &traces, &InterpConfig::default()).unwrap();
    assert!(comps.values().all(BTreeSet::is_empty));
}

#[test]
fn external_maximize_and_type_qualifiers() {
    let t = two_throws();
    let src = "(define (game g1) (:domain dom) (:constraints (and (forall (?o - (either dodgeball hexagonal_bin)) (preference pp (at-end (agent_holds ?o)))))) (:scoring (+ (external-forall-maximize (count pp)) (* 10 (count pp:hexagonal_bin)) (* 100 (count-once-per-external-objects pp)))))";
    let g = parse_game(src).unwrap();
    // final state: nothing held
    assert_eq!(score_game(&g, &t).unwrap().total, Some(0.0));
    let t2 = ball_trace("held", &[(false, false, 0.0), (true, false, 0.0)]);
    let r = score_game(&g, &t2).unwrap();
    assert_eq!(r.total, Some(1.0 + 0.0 + 100.0));
}

#[test]
fn measure_sums_function_values() {
    let t = two_throws();
    let src = format!("(define (game g1) (:domain dom) (:constraints (and (preference mm (exists (?b - dodgeball) (then (once (agent_holds ?b)) (hold (in_motion ?b)) (once-measure (not (in_motion ?b)) (distance ?b bed))))))) (:scoring (count-measure mm)))");
    let r = score_game(&parse_game(&src).unwrap(), &t).unwrap();
    // both throws end with the ball at x=3, bed at x=5
    assert_eq!(r.total, Some(4.0));
}
