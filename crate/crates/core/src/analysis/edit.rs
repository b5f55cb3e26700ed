//! Character-level Levenshtein distance between printed games.

use rayon::prelude::*;

use crate::dsl::{print_game, Game};

/// Drops the `(define (game ..) (:domain ..)` header and collapses runs of
/// whitespace.
pub fn preprocess(text: &str) -> String {
    let mut body = text.trim();
    if body.starts_with("(define") {
        if let Some(d) = body.find("(:domain") {
            if let Some(close) = body[d..].find(')') {
                body = &body[d + close + 1..];
            }
        }
    }
    body.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Plain Levenshtein distance over chars, two-row table.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let sub = prev[j - 1] + (a[i - 1] != b[j - 1]) as usize;
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Distance between two canonical game texts after preprocessing.
pub fn edit_distance(a: &str, b: &str) -> usize {
    levenshtein(&preprocess(a), &preprocess(b))
}

pub fn game_distance(a: &Game, b: &Game) -> usize {
    edit_distance(&print_game(a), &print_game(b))
}

/// Index of the closest corpus game and its distance; ties go to the
/// earliest. `None` for an empty corpus.
pub fn nearest_real(sample: &Game, corpus: &[Game]) -> Option<(usize, usize)> {
    let s = preprocess(&print_game(sample));
    let ds: Vec<usize> = corpus.par_iter().map(|g| levenshtein(&s, &preprocess(&print_game(g)))).collect();
    ds.into_iter().enumerate().min_by_key(|&(i, d)| (d, i))
}
