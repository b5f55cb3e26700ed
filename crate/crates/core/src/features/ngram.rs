//! Token n-gram models scored with stupid backoff.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dsl::ast::*;
use crate::dsl::print;
use crate::dsl::vocab::VarClass;

pub const START: &str = "<s>";
pub const END: &str = "</s>";
pub const PREF_TOKEN: &str = "<pref>";
pub const DISCOUNT: f64 = 0.4;
pub const DEFAULT_N: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramModel {
    pub n: usize,
    #[serde(with = "counts_serde")]
    counts: HashMap<Vec<String>, u64>,
    /// Sum of unigram counts.
    total: u64,
}

mod counts_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(c: &HashMap<Vec<String>, u64>, s: S) -> Result<S::Ok, S::Error> {
        let mut rows: Vec<(&Vec<String>, &u64)> = c.iter().collect();
        rows.sort();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<HashMap<Vec<String>, u64>, D::Error> {
        let rows: Vec<(Vec<String>, u64)> = Vec::deserialize(d)?;
        Ok(rows.into_iter().collect())
    }
}

/// `n − 1` start symbols, the tokens, one end symbol.
pub fn pad(tokens: &[String], n: usize) -> Vec<String> {
    let mut v: Vec<String> = std::iter::repeat_n(START.to_string(), n.saturating_sub(1)).collect();
    v.extend(tokens.iter().cloned());
    v.push(END.to_string());
    v
}

impl NGramModel {
    pub fn train<S: AsRef<[String]>>(seqs: &[S], n: usize) -> NGramModel {
        assert!(n >= 1);
        let mut m = NGramModel { n, counts: HashMap::new(), total: 0 };
        for s in seqs {
            let p = pad(s.as_ref(), n);
            for k in 1..=n {
                for w in p.windows(k) {
                    *m.counts.entry(w.to_vec()).or_insert(0) += 1;
                }
            }
            m.total += p.len() as u64;
        }
        m
    }

    pub fn count(&self, gram: &[String]) -> u64 {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Stupid-backoff score of the last token of `gram` given the rest.
    pub fn score(&self, gram: &[String]) -> f64 {
        if gram.len() == 1 {
            let total = self.total.max(1) as f64;
            let c = self.count(gram);
            return if c > 0 { c as f64 / total } else { 1.0 / (2.0 * total) };
        }
        let c = self.count(gram);
        if c > 0 {
            c as f64 / self.count(&gram[..gram.len() - 1]) as f64
        } else {
            DISCOUNT * self.score(&gram[1..])
        }
    }

    /// Mean log score over every token after the start padding, the end
    /// symbol included.
    pub fn mean_log_score(&self, tokens: &[String]) -> f64 {
        let p = pad(tokens, self.n);
        let start = self.n - 1;
        let sum: f64 = (start..p.len()).map(|i| self.score(&p[i + 1 - self.n..=i]).ln()).sum();
        sum / (p.len() - start) as f64
    }
}

/// Section token streams for a game; `None` for absent sections.
pub struct SectionTokens {
    pub full: Vec<String>,
    pub setup: Option<Vec<String>>,
    pub constraints: Vec<String>,
    pub terminal: Option<Vec<String>>,
    pub scoring: Vec<String>,
}

/// Splits printed DSL into tokens: parentheses dropped, variables replaced
/// by their class placeholder, preference names by `<pref>`.
pub fn tokenize(text: &str, prefs: &BTreeSet<&str>) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split(|c: char| c == '(' || c == ')' || c.is_whitespace()) {
        if raw.is_empty() {
            continue;
        }
        if raw.starts_with('?') {
            out.push(VarClass::of_variable(raw).unwrap_or(VarClass::Object).placeholder().to_string());
            continue;
        }
        let mut parts = raw.split(':');
        let head = parts.next().unwrap_or_default();
        if prefs.contains(head) {
            out.push(PREF_TOKEN.to_string());
            out.extend(parts.map(String::from));
        } else {
            out.push(raw.to_string());
        }
    }
    out
}

pub fn section_tokens(g: &Game) -> SectionTokens {
    let names: BTreeSet<&str> = g.preference_names().into_iter().collect();
    let tok = |s: String| tokenize(&s, &names);
    let setup = g.setup.as_ref().map(|s| tok(print::print_setup(s)));
    let constraints = tok(print::print_constraints(&g.preferences));
    let terminal = g.terminal.as_ref().map(|t| tok(print::print_terminal(t)));
    let scoring = tok(print::print_scoring(&g.scoring));
    let mut full = Vec::new();
    if let Some(s) = &setup {
        full.push(":setup".to_string());
        full.extend(s.iter().cloned());
    }
    full.push(":constraints".to_string());
    full.extend(constraints.iter().cloned());
    if let Some(t) = &terminal {
        full.push(":terminal".to_string());
        full.extend(t.iter().cloned());
    }
    full.push(":scoring".to_string());
    full.extend(scoring.iter().cloned());
    SectionTokens { full, setup, constraints, terminal, scoring }
}

/// One model per section, in feature order: full, setup, constraints,
/// terminal, scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramSet {
    pub models: Vec<NGramModel>,
}

impl NGramSet {
    pub fn train(corpus: &[Game], n: usize) -> NGramSet {
        let toks: Vec<SectionTokens> = corpus.iter().map(section_tokens).collect();
        let full: Vec<Vec<String>> = toks.iter().map(|t| t.full.clone()).collect();
        let setup: Vec<Vec<String>> = toks.iter().filter_map(|t| t.setup.clone()).collect();
        let cons: Vec<Vec<String>> = toks.iter().map(|t| t.constraints.clone()).collect();
        let term: Vec<Vec<String>> = toks.iter().filter_map(|t| t.terminal.clone()).collect();
        let scoring: Vec<Vec<String>> = toks.iter().map(|t| t.scoring.clone()).collect();
        NGramSet {
            models: [full, setup, cons, term, scoring].iter().map(|s| NGramModel::train(s, n)).collect(),
        }
    }

    /// Raw scores; NaN for an absent section.
    pub fn scores(&self, g: &Game) -> [f64; 5] {
        let t = section_tokens(g);
        let m = &self.models;
        let opt = |i: usize, s: &Option<Vec<String>>| s.as_ref().map_or(f64::NAN, |s| m[i].mean_log_score(s));
        [
            m[0].mean_log_score(&t.full),
            opt(1, &t.setup),
            m[2].mean_log_score(&t.constraints),
            opt(3, &t.terminal),
            m[4].mean_log_score(&t.scoring),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> Vec<String> {
        x.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn bigram_counts_with_padding() {
        let m = NGramModel::train(&[s("a b c")], 2);
        assert_eq!(m.count(&s("a b")), 1);
        assert_eq!(m.count(&s("b c")), 1);
        assert_eq!(m.count(&s("<s> a")), 1);
        assert_eq!(m.count(&s("c </s>")), 1);
        assert_eq!(m.total(), 5);
    }

    #[test]
    fn backoff_values() {
        let m = NGramModel::train(&[s("a b c"), s("a b c")], 3);
        assert_eq!(m.score(&s("a b c")), 1.0);
        // unseen trigram, S(c|b) = 2/2 → 0.4
        assert_eq!(m.score(&s("c b c")), 0.4 * 1.0);
        let m = NGramModel::train(&[s("x b c"), s("y b d")], 3);
        assert!((m.score(&s("a b c")) - 0.4 * 0.5).abs() < 1e-15);
        assert_eq!(m, NGramModel::train(&[s("x b c"), s("y b d")], 3));
    }

    #[test]
    fn tokens_abstract_names() {
        let names: BTreeSet<&str> = ["throwIt"].into_iter().collect();
        let t = tokenize("(* 2 (count throwIt:dodgeball)) (agent_holds ?b) (same_color ?o ?x)", &names);
        assert_eq!(t, s("* 2 count <pref> dodgeball agent_holds <obj> same_color <obj> <color>"));
    }
}
