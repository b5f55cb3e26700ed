//! Maps raw features into `[0, 1]` using ranges observed on a fitting set.

use serde::{Deserialize, Serialize};

use super::{table, FeatureVector, Group, RawFeatures, BINS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NormalizeError {
    #[error("need at least 2 rows to fit a normalizer, got {0}")]
    TooFewRows(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub ngram_min: [f64; 5],
    pub ngram_max: [f64; 5],
    /// Quintile cut points per counting metric.
    pub cuts: [[f64; BINS - 1]; 8],
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Min-max scaling with clamping; a constant or unseen range, or a missing
/// value, maps to the midpoint.
pub fn min_max(v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        0.5
    } else {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

impl Normalizer {
    pub fn fit(rows: &[RawFeatures]) -> Result<Normalizer, NormalizeError> {
        if rows.len() < 2 {
            return Err(NormalizeError::TooFewRows(rows.len()));
        }
        let mut ngram_min = [f64::INFINITY; 5];
        let mut ngram_max = [f64::NEG_INFINITY; 5];
        for r in rows {
            for i in 0..5 {
                let v = r.ngram[i];
                if v.is_finite() {
                    ngram_min[i] = ngram_min[i].min(v);
                    ngram_max[i] = ngram_max[i].max(v);
                }
            }
        }
        let mut cuts = [[0.0; BINS - 1]; 8];
        for (m, c) in cuts.iter_mut().enumerate() {
            let mut col: Vec<f64> = rows.iter().map(|r| r.counts[m]).collect();
            col.sort_by(f64::total_cmp);
            for (k, cut) in c.iter_mut().enumerate() {
                *cut = quantile(&col, (k + 1) as f64 / BINS as f64);
            }
        }
        Ok(Normalizer { ngram_min, ngram_max, cuts })
    }

    /// Bin of a counting metric: the number of cut points strictly below it.
    pub fn bin(&self, metric: usize, v: f64) -> usize {
        self.cuts[metric].iter().filter(|&&c| c < v).count()
    }

    /// Full-catalog vector.
    pub fn apply(&self, raw: &RawFeatures) -> FeatureVector {
        let defs = table();
        let mut values = Vec::with_capacity(defs.len());
        let (mut ng, mut cnt) = (0, 0);
        for d in &defs {
            let v = match d.group {
                Group::Ngram => {
                    let v = min_max(raw.ngram[ng], self.ngram_min[ng], self.ngram_max[ng]);
                    ng += 1;
                    v
                }
                Group::Counting => {
                    let (metric, bin) = (cnt / BINS, cnt % BINS);
                    cnt += 1;
                    if self.bin(metric, raw.counts[metric]) == bin {
                        1.0
                    } else {
                        0.0
                    }
                }
                _ => raw.values.get(&d.name).copied().unwrap_or(0.0).clamp(0.0, 1.0),
            };
            values.push(v);
        }
        FeatureVector { values }
    }
}
