use std::path::Path;
use std::process::{Command, Output};

use goalgen_core::dsl::parse_games;
use goalgen_core::features::Registry;
use goalgen_core::fitness::TrainConfig;
use goalgen_core::pipeline::fit_model;
use goalgen_core::{rng, synth};

fn goalgen(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goalgen"))
        .current_dir(dir)
        .env_remove("GOALGEN_CORPUS")
        .env_remove("GOALGEN_TRACES")
        .env_remove("GOALGEN_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = goalgen(dir, args);
    assert!(o.status.success(), "goalgen {args:?} failed:\n{}", String::from_utf8_lossy(&o.stderr));
    o
}

#[test]
fn sampling_is_byte_identical_for_a_seed() {
    let d = tempfile::tempdir().unwrap();
    let args = ["--corpus", "synthetic:12", "sample", "--n", "10", "--seed", "7"];
    let a = ok(d.path(), &args).stdout;
    let b = ok(d.path(), &args).stdout;
    assert_eq!(a, b);
    let games = parse_games(&String::from_utf8(a.clone()).unwrap()).unwrap();
    assert_eq!(games.len(), 10);
    let c = ok(d.path(), &["--corpus", "synthetic:12", "sample", "--n", "10", "--seed", "8"]).stdout;
    assert_ne!(a, c);
}

#[test]
fn score_matches_the_library() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["--corpus", "synthetic:12", "--seed", "3", "--set", "train.max_epochs=200", "train", "-o", "m.json"]);
    ok(d.path(), &["--corpus", "synthetic:12", "--seed", "3", "sample", "--n", "4", "-o", "s.pddl"]);
    let out = ok(d.path(), &["--seed", "3", "score", "--model", "m.json", "--game", "s.pddl"]).stdout;

    // The same corpus and settings through the library directly.
    let corpus = synth::corpus(&mut rng::substream(3, "cli/synthetic-corpus"), 12);
    let cfg = TrainConfig { seed: 3, max_epochs: 200, ..TrainConfig::desk() };
    let t = fit_model(&corpus, None, Registry::full(), &cfg).unwrap();
    let games = parse_games(&std::fs::read_to_string(d.path().join("s.pddl")).unwrap()).unwrap();
    let lines: Vec<&str> = std::str::from_utf8(&out).unwrap().lines().collect();
    assert_eq!(lines.len(), games.len());
    for (line, g) in lines.iter().zip(&games) {
        let (name, f) = line.split_once('\t').unwrap();
        assert_eq!(name, g.name);
        let want = t.model.score_game(g).unwrap();
        assert!((f.parse::<f64>().unwrap() - want).abs() <= 1e-9 * want.abs().max(1.0), "{name}: {f} vs {want}");
    }
}

#[test]
fn search_resumes_to_the_same_archive() {
    let d = tempfile::tempdir().unwrap();
    let base = ["--corpus", "synthetic:12", "--seed", "5", "--set", "search.init_samples=60", "--set", "search.updates=8"];
    let with = |extra: &[&str]| -> Vec<String> { base.iter().chain(extra).map(|s| s.to_string()).collect() };
    let run = |extra: &[&str]| {
        let a = with(extra);
        ok(d.path(), &a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    run(&["--set", "train.max_epochs=100", "train", "-o", "m.json"]);

    run(&["--out", "straight", "--set", "search.generations=4", "search", "--model", "m.json"]);
    run(&["--out", "split", "--set", "search.generations=2", "search", "--model", "m.json"]);
    run(&["--out", "split", "--set", "search.generations=4", "search", "--model", "m.json", "--resume", "split/archive.jsonl"]);

    let read = |p: &str| std::fs::read_to_string(d.path().join(p)).unwrap();
    let straight = read("straight/archive.jsonl");
    assert!(straight.contains("# generation 4"));
    assert_eq!(straight, read("split/archive.jsonl"));
    assert_eq!(read("straight/elites.pddl"), read("split/elites.pddl"));
}

#[test]
fn resume_refuses_other_settings() {
    let d = tempfile::tempdir().unwrap();
    let base = ["--corpus", "synthetic:12", "--seed", "5", "--set", "search.init_samples=30", "--set", "search.updates=4"];
    let mut a: Vec<&str> = base.to_vec();
    a.extend(["--set", "train.max_epochs=50", "train", "-o", "m.json"]);
    ok(d.path(), &a);
    let mut a: Vec<&str> = base.to_vec();
    a.extend(["--set", "search.generations=1", "search", "--model", "m.json"]);
    ok(d.path(), &a);
    let o = goalgen(d.path(), &["--corpus", "synthetic:12", "--seed", "6", "--set", "search.generations=2", "search", "--model", "m.json", "--resume", "out/archive.jsonl"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("config"));
}

#[test]
fn bad_input_exits_nonzero() {
    let d = tempfile::tempdir().unwrap();
    assert!(!goalgen(d.path(), &["sample", "--bogus"]).status.success());
    assert!(!goalgen(d.path(), &["--corpus", "synthetic:4", "--profile", "huge", "sample"]).status.success());
    assert!(!goalgen(d.path(), &["--corpus", "no/such/dir", "sample"]).status.success());
    assert!(!goalgen(d.path(), &["--corpus", "synthetic:4", "--set", "train.k=0", "train"]).status.success());

    // An artifact from another version is refused.
    ok(d.path(), &["--corpus", "synthetic:8", "--set", "train.max_epochs=20", "train", "-o", "m.json"]);
    let p = d.path().join("m.json");
    let text = std::fs::read_to_string(&p).unwrap();
    let v = format!("\"version\":\"{}\"", env!("CARGO_PKG_VERSION"));
    assert!(text.contains(&v));
    std::fs::write(&p, text.replace(&v, "\"version\":\"0.0.0-old\"")).unwrap();
    std::fs::write(d.path().join("g.pddl"), "(define (game gg) (:domain d) (:constraints (and (preference p (at-end (agent_holds ball))))) (:scoring (count p)))").unwrap();
    let o = goalgen(d.path(), &["score", "--model", "m.json", "--game", "g.pddl"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("0.0.0-old"));
}

#[test]
fn config_file_includes_and_flags() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("base.toml"), "seed = 7\n[paths]\ncorpus = \"synthetic:12\"\n").unwrap();
    std::fs::write(d.path().join("run.toml"), "include = [\"base.toml\"]\n").unwrap();
    let a = ok(d.path(), &["-c", "run.toml", "sample", "--n", "3"]).stdout;
    let b = ok(d.path(), &["--corpus", "synthetic:12", "--seed", "7", "sample", "--n", "3"]).stdout;
    assert_eq!(a, b);
    let c = ok(d.path(), &["-c", "run.toml", "--seed", "8", "sample", "--n", "3"]).stdout;
    assert_ne!(a, c);
}
