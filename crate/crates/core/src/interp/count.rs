//! Count modes over a preference's satisfactions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dsl::ast::CountMode;
use crate::trace::Trace;

use super::automaton::{non_overlapping, Satisfaction};

/// Distances for the positional count modes, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionThresholds {
    /// Maximum drift for an object to count as stationary.
    pub stationary: f64,
    /// Maximum distance for two positions to count as the same.
    pub same: f64,
}

impl Default for PositionThresholds {
    fn default() -> Self {
        PositionThresholds { stationary: 0.05, same: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountError {
    NoMeasure,
}

/// Applies a count mode. `all` is the overlapping satisfaction set; the
/// non-overlapping set is derived from it.
pub fn count_mode(mode: CountMode, all: &[Satisfaction], trace: &Trace, th: &PositionThresholds) -> Result<f64, CountError> {
    let disjoint = || non_overlapping(all);
    Ok(match mode {
        CountMode::Count => disjoint().len() as f64,
        CountMode::Overlapping => all.len() as f64,
        CountMode::Once => (!all.is_empty()) as u8 as f64,
        CountMode::OncePerObjects => all.iter().map(|s| &s.binding).collect::<BTreeSet<_>>().len() as f64,
        CountMode::OncePerExternalObjects => all.iter().map(|s| s.external()).collect::<BTreeSet<_>>().len() as f64,
        CountMode::Measure => {
            let mut sum = 0.0;
            for s in disjoint() {
                sum += s.measure.ok_or(CountError::NoMeasure)?;
            }
            sum
        }
        CountMode::UniquePositions | CountMode::SamePositions => {
            let keys: Vec<Vec<[f64; 3]>> = disjoint().iter().filter_map(|s| stationary_key(s, trace, th)).collect();
            let same = |a: &Vec<[f64; 3]>, b: &Vec<[f64; 3]>| a.iter().zip(b).all(|(p, q)| dist(*p, *q) <= th.same);
            if mode == CountMode::UniquePositions {
                let mut kept: Vec<&Vec<[f64; 3]>> = Vec::new();
                for k in &keys {
                    if !kept.iter().any(|q| same(k, q)) {
                        kept.push(k);
                    }
                }
                kept.len() as f64
            } else {
                keys.iter().map(|k| keys.iter().filter(|q| same(k, q)).count()).max().unwrap_or(0) as f64
            }
        }
    })
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Start positions of the bound objects, if all of them stay put for the
/// whole satisfaction. Bindings to non-objects (colors, the agent) are
/// ignored.
fn stationary_key(s: &Satisfaction, trace: &Trace, th: &PositionThresholds) -> Option<Vec<[f64; 3]>> {
    let mut key = Vec::new();
    for (_, id) in &s.binding {
        let Some(p0) = trace.states[s.start].objects.get(id).map(|o| o.position) else {
            continue;
        };
        let moved = (s.start..=s.end).any(|t| trace.states[t].objects.get(id).is_some_and(|o| dist(o.position, p0) >= th.stationary));
        if moved {
            return None;
        }
        key.push(p0);
    }
    Some(key)
}
