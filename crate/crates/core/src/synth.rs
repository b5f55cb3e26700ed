//! Synthetic stand-ins for the human game corpus and play traces: small
//! template families (throwing, stacking, placement) and a scripted room
//! simulator.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dsl::ast::Game;
use crate::dsl::parse::parse_game;
use crate::trace::{AgentState, ObjectDecl, ObjectState, Trace, WorldState};

const BALLS: &[&str] = &["dodgeball", "ball", "basketball", "golfball", "beachball"];
const BLOCKS: &[&str] = &["block", "cube_block", "pyramid_block", "flat_block", "cylindrical_block"];
const SMALL: &[&str] = &["watch", "cellphone", "mug", "key_chain", "alarm_clock", "cd"];
const MULTIPLIERS: &[&str] = &["2", "3", "5", "10", "0.5"];

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().unwrap()
}

fn throw_pref<R: Rng>(rng: &mut R, name: &str) -> String {
    let ball = pick(rng, BALLS);
    let start = match rng.gen_range(0..4) {
        0 => "(agent_holds ?b)".to_string(),
        1 => "(and (agent_holds ?b) (adjacent desk agent))".to_string(),
        2 => "(and (on rug agent) (agent_holds ?b))".to_string(),
        _ => "(and (agent_holds ?b) (near bed agent))".to_string(),
    };
    let flight = "(hold (and (not (agent_holds ?b)) (in_motion ?b)))";
    match rng.gen_range(0..4) {
        0 => format!("(preference {name} (exists (?b - {ball}) (then (once {start}) {flight} (once (not (in_motion ?b))))))"),
        1 => format!("(preference {name} (exists (?b - {ball}) (then (once {start}) {flight} (once (and (not (in_motion ?b)) (on bed ?b))))))"),
        2 => {
            let bin = pick(rng, &["hexagonal_bin", "doggie_bed"]);
            format!("(preference {name} (exists (?b - {ball} ?h - {bin}) (then (once {start}) {flight} (once (and (not (in_motion ?b)) (in ?h ?b))))))")
        }
        _ => format!("(preference {name} (exists (?b - {ball} ?h - hexagonal_bin) (then (once {start}) (hold-while (and (not (agent_holds ?b)) (in_motion ?b)) (touch ?b ?h)) (once (and (not (in_motion ?b)) (in ?h ?b))))))"),
    }
}

fn stack_pref<R: Rng>(rng: &mut R, name: &str) -> String {
    let (a, b) = (pick(rng, BLOCKS), pick(rng, BLOCKS));
    match rng.gen_range(0..3) {
        0 => format!("(preference {name} (exists (?l - {a} ?m - {b}) (at-end (on ?m ?l))))"),
        1 => format!("(preference {name} (exists (?l - {a}) (then (once (agent_holds ?l)) (hold (in_motion ?l)) (once (exists (?m - {b}) (on ?m ?l))))))"),
        _ => format!("(preference {name} (exists (?l - {a} ?m - {b}) (at-end (and (on ?m ?l) (not (agent_holds ?l))))))"),
    }
}

fn place_pref<R: Rng>(rng: &mut R, name: &str) -> String {
    let o = pick(rng, SMALL);
    match rng.gen_range(0..4) {
        0 => format!("(preference {name} (exists (?o - {o}) (at-end (in top_drawer ?o))))"),
        1 => format!("(preference {name} (exists (?o - {o} ?s - shelf) (at-end (on ?s ?o))))"),
        2 => format!("(preference {name} (exists (?o - {o}) (then (once (agent_holds ?o)) (hold (agent_holds ?o)) (once (on desk ?o)))))"),
        _ => format!("(preference {name} (exists (?o - {o}) (at-end (and (in top_drawer ?o) (not (open top_drawer))))))"),
    }
}

/// One synthetic game; `k` picks the family mix.
pub fn game<R: Rng>(rng: &mut R, k: usize) -> Game {
    let n_prefs = rng.gen_range(1..=3);
    let family = k % 3;
    let mut prefs = Vec::new();
    let mut names = Vec::new();
    for i in 0..n_prefs {
        let f = if i == 0 { family } else { rng.gen_range(0..3) };
        let name = format!("{}{}", ["throw", "stack", "place"][f], ["A", "B", "C"][i]);
        prefs.push(match f {
            0 => throw_pref(rng, &name),
            1 => stack_pref(rng, &name),
            _ => place_pref(rng, &name),
        });
        names.push(name);
    }
    let mode = |rng: &mut R, n: &str| {
        if n.starts_with("throw") {
            pick(rng, &["count", "count", "count-once-per-objects"])
        } else {
            pick(rng, &["count-once-per-objects", "count-once", "count"])
        }
    };
    let terms: Vec<String> = names
        .iter()
        .map(|n| {
            let m = mode(rng, n);
            if rng.gen_bool(0.5) {
                format!("(* {} ({m} {n}))", pick(rng, MULTIPLIERS))
            } else {
                format!("({m} {n})")
            }
        })
        .collect();
    let scoring = if terms.len() == 1 { terms[0].clone() } else { format!("(+ {})", terms.join(" ")) };
    let setup = match rng.gen_range(0..4) {
        0 => "(:setup (exists (?h - hexagonal_bin) (game-conserved (adjacent ?h bed))))\n".to_string(),
        1 => "(:setup (exists (?h - hexagonal_bin) (game-optional (near desk ?h))))\n".to_string(),
        _ => String::new(),
    };
    let terminal = match rng.gen_range(0..4) {
        0 => format!("(:terminal (>= (total-time) {}))\n", pick(rng, &["30", "60", "120"])),
        1 => format!("(:terminal (>= ({} {}) {}))\n", "count", names[0], pick(rng, &["3", "5", "10"])),
        _ => String::new(),
    };
    let text = format!(
        "(define (game synth-{k}) (:domain many-objects-room-v1)\n{setup}(:constraints (and {}))\n{terminal}(:scoring {scoring}))",
        prefs.join(" ")
    );
    parse_game(&text).unwrap_or_else(|e| panic!("template produced bad game: {e}\n{text}"))
}

/// `n` synthetic games with distinct names; families rotate.
pub fn corpus<R: Rng>(rng: &mut R, n: usize) -> Vec<Game> {
    let mut out: Vec<Game> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut k = 0;
    while out.len() < n {
        let g = game(rng, k);
        k += 1;
        let mut key = g.clone();
        key.name.clear();
        if seen.insert(crate::dsl::print::print_game(&key)) {
            let mut g = g;
            g.name = format!("synth-{}", out.len());
            out.push(g);
        }
    }
    out
}

const ROOM: &[(&str, &str, [f64; 3])] = &[
    ("ball1", "dodgeball_blue", [1.0, 0.1, 1.0]),
    ("ball2", "basketball", [1.5, 0.1, -1.0]),
    ("ball3", "golfball_white", [-1.0, 0.05, 0.5]),
    ("bin", "hexagonal_bin", [3.0, 0.0, 0.0]),
    ("dbed", "doggie_bed", [-2.5, 0.0, 2.0]),
    ("bed", "bed", [0.0, 0.3, 3.5]),
    ("desk", "desk", [-3.0, 0.4, -2.0]),
    ("rug", "rug", [0.0, 0.0, 0.0]),
    ("top_shelf", "top_shelf", [-3.5, 1.5, 1.0]),
    ("top_drawer", "top_drawer", [-2.0, 0.5, -3.0]),
    ("c1", "cube_block_blue", [2.0, 0.05, 2.0]),
    ("c2", "cube_block_yellow", [2.2, 0.05, 2.4]),
    ("p1", "pyramid_block_red", [1.8, 0.05, 2.6]),
    ("f1", "flat_block_gray", [2.4, 0.05, 1.8]),
    ("w1", "watch", [-1.0, 0.4, -1.5]),
    ("m1", "mug", [-2.8, 0.8, -2.0]),
    ("k1", "key_chain", [0.5, 0.3, 3.3]),
    ("cell", "cellphone", [-0.5, 0.3, 3.2]),
];

struct Sim {
    states: Vec<WorldState>,
    cur: WorldState,
}

impl Sim {
    fn push(&mut self) {
        let mut s = self.cur.clone();
        s.index = self.states.len();
        self.states.push(s);
    }

    fn detach(&mut self, id: &str) {
        self.cur.contains.retain(|(_, b)| b != id);
        self.cur.supports.retain(|(_, b)| b != id);
        self.cur.touches.retain(|(a, b)| a != id && b != id);
    }

    fn walk_to(&mut self, target: [f64; 3], steps: usize) {
        let from = self.cur.agent.position;
        for k in 1..=steps {
            let f = k as f64 / steps as f64;
            self.cur.agent.position = [from[0] + (target[0] - from[0]) * f, 0.0, from[2] + (target[2] - from[2]) * f];
            self.carry();
            self.push();
        }
    }

    fn carry(&mut self) {
        let a = self.cur.agent.position;
        for o in self.cur.objects.values_mut() {
            if o.held {
                o.position = [a[0], 1.0, a[2]];
            }
        }
    }

    fn pick_up(&mut self, id: &str) {
        let p = self.cur.objects[id].position;
        self.walk_to([p[0] - 0.3, 0.0, p[2]], 2);
        self.detach(id);
        self.cur.objects.get_mut(id).unwrap().held = true;
        self.carry();
        self.push();
    }

    /// Releases a held object along a straight flight to `to`.
    fn fly(&mut self, id: &str, to: [f64; 3], steps: usize) {
        let from = self.cur.objects[id].position;
        {
            let o = self.cur.objects.get_mut(id).unwrap();
            o.held = false;
            o.in_motion = true;
        }
        for k in 1..=steps {
            let f = k as f64 / (steps + 1) as f64;
            self.cur.objects.get_mut(id).unwrap().position = [0, 1, 2].map(|i| from[i] + (to[i] - from[i]) * f);
            self.push();
        }
        let o = self.cur.objects.get_mut(id).unwrap();
        o.in_motion = false;
        o.position = to;
    }
}

/// A scripted play session in a fixed room.
pub fn trace<R: Rng>(rng: &mut R, id: &str, events: usize) -> Trace {
    let objects: Vec<ObjectDecl> =
        ROOM.iter().map(|(i, t, _)| ObjectDecl { id: i.to_string(), type_name: t.to_string(), color: None }).collect();
    let objs: BTreeMap<String, ObjectState> = ROOM
        .iter()
        .map(|(i, _, p)| {
            (
                i.to_string(),
                ObjectState { position: *p, orientation: None, in_motion: false, held: false, open: false, toggled_on: false, broken: false },
            )
        })
        .collect();
    let mut supports = BTreeSet::new();
    supports.insert(("desk".to_string(), "m1".to_string()));
    supports.insert(("bed".to_string(), "k1".to_string()));
    supports.insert(("bed".to_string(), "cell".to_string()));
    let cur = WorldState {
        index: 0,
        agent: AgentState { position: [0.0, 0.0, 0.0], crouching: false },
        objects: objs,
        contains: BTreeSet::new(),
        supports,
        touches: BTreeSet::new(),
        is_first: true,
        is_last: false,
        buildings: Vec::new(),
    };
    let mut sim = Sim { states: Vec::new(), cur };
    sim.push();
    let pos = |sim: &Sim, id: &str| sim.cur.objects[id].position;
    for _ in 0..events {
        match rng.gen_range(0..6) {
            0..=2 => {
                let ball = *["ball1", "ball2", "ball3"].choose(rng).unwrap();
                sim.pick_up(ball);
                if rng.gen_bool(0.5) {
                    sim.walk_to(*[[-2.6, 0.0, -1.6], [0.2, 0.0, 0.2], [0.0, 0.0, 2.8]].choose(rng).unwrap(), 2);
                }
                let target = rng.gen_range(0..4);
                let dest = match target {
                    0 => [pos(&sim, "bin")[0], 0.2, pos(&sim, "bin")[2]],
                    1 => [rng.gen_range(-0.8..0.8), 0.5, 3.5],
                    2 => [pos(&sim, "dbed")[0], 0.1, pos(&sim, "dbed")[2]],
                    _ => [rng.gen_range(-3.0..3.0), 0.1, rng.gen_range(-3.0..3.0)],
                };
                sim.fly(ball, dest, rng.gen_range(2..4));
                if target == 0 && rng.gen_bool(0.3) {
                    sim.cur.touches.insert((ball.to_string(), "bin".to_string()));
                }
                match target {
                    0 => {
                        sim.cur.contains.insert(("bin".into(), ball.into()));
                    }
                    1 => {
                        sim.cur.supports.insert(("bed".into(), ball.into()));
                    }
                    2 => {
                        sim.cur.contains.insert(("dbed".into(), ball.into()));
                    }
                    _ => {}
                }
                sim.push();
                sim.cur.touches.clear();
            }
            3 => {
                let blocks = ["c1", "c2", "p1", "f1"];
                let top = *blocks.choose(rng).unwrap();
                let free: Vec<&str> = blocks
                    .iter()
                    .copied()
                    .filter(|b| *b != top && !sim.cur.supports.iter().any(|(base, _)| base == b))
                    .collect();
                let Some(base) = free.choose(rng).copied() else { continue };
                sim.pick_up(top);
                let bp = pos(&sim, base);
                sim.walk_to([bp[0] - 0.3, 0.0, bp[2]], 2);
                sim.fly(top, [bp[0], bp[1] + 0.1, bp[2]], 1);
                sim.cur.supports.insert((base.into(), top.into()));
                sim.push();
            }
            4 => {
                let o = *["w1", "m1", "k1", "cell"].choose(rng).unwrap();
                sim.pick_up(o);
                let (dest, rel): ([f64; 3], &str) = match rng.gen_range(0..3) {
                    0 => (pos(&sim, "top_drawer"), "top_drawer"),
                    1 => (pos(&sim, "top_shelf"), "top_shelf"),
                    _ => (pos(&sim, "desk"), "desk"),
                };
                sim.walk_to([dest[0] + 0.3, 0.0, dest[2]], 3);
                if rel == "top_drawer" {
                    sim.cur.objects.get_mut("top_drawer").unwrap().open = true;
                    sim.push();
                }
                sim.fly(o, [dest[0], dest[1] + 0.05, dest[2]], 1);
                if rel == "top_drawer" {
                    sim.cur.contains.insert((rel.into(), o.into()));
                    sim.push();
                    if rng.gen_bool(0.6) {
                        sim.cur.objects.get_mut("top_drawer").unwrap().open = false;
                    }
                } else {
                    sim.cur.supports.insert((rel.into(), o.into()));
                }
                sim.push();
            }
            _ => {
                sim.cur.agent.crouching = rng.gen_bool(0.5);
                let to = [rng.gen_range(-3.0..3.0), 0.0, rng.gen_range(-3.0..3.0)];
                sim.walk_to(to, rng.gen_range(1..4));
            }
        }
    }
    Trace::new(id, objects, sim.states)
}

pub fn traces<R: Rng>(rng: &mut R, n: usize, events: usize) -> Vec<Trace> {
    (0..n).map(|i| trace(rng, &format!("synth-trace-{i}"), events)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{print_game, validate};
    use crate::rng::substream;

    #[test]
    fn corpus_is_valid_and_distinct() {
        let mut rng = substream(1, "synth");
        let c = corpus(&mut rng, 40);
        let texts: BTreeSet<String> = c.iter().map(print_game).collect();
        assert_eq!(texts.len(), 40);
        for g in &c {
            assert!(validate(g).is_empty(), "{}", print_game(g));
            assert_eq!(parse_game(&print_game(g)).unwrap(), *g);
        }
    }

    #[test]
    fn traces_roundtrip_and_contain_throws() {
        let mut rng = substream(1, "traces");
        let t = trace(&mut rng, "t0", 12);
        let back = crate::trace::parse_trace(&t.to_jsonl()).unwrap();
        for (a, b) in back.states.iter().zip(&t.states) {
            assert_eq!(a, b, "state {}", a.index);
        }
        assert_eq!(back, t);
        assert!(t.states.iter().any(|s| s.objects.values().any(|o| o.in_motion)));
    }
}
