use std::collections::BTreeMap;

use super::Excerpt;
use crate::error::{Error, Result};
use crate::label::Label;

pub const DEFAULT_OVERSAMPLE_ALPHA: f64 = 0.5;

/// Duplicate training excerpts that carry minority labels.
///
/// With `c_max` the most frequent label's span count, every label `L` with
/// `c_L < alpha * c_max` gets multiplier `ceil(alpha * c_max / c_L)`. Each
/// excerpt appears as many times as the largest multiplier among its labels
/// (once if it has none). Copies follow their original in input order.
///
/// Only ever call this on a training split.
pub fn oversample_training(train: &[Excerpt], alpha: f64) -> Result<Vec<Excerpt>> {
    if train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("oversampling alpha {alpha} outside (0, 1]")));
    }
    let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
    for ex in train {
        for span in &ex.spans {
            *counts.entry(span.label).or_insert(0) += 1;
        }
    }
    let c_max = counts.values().copied().max().unwrap_or(0);
    let target = alpha * c_max as f64;
    let multiplier: BTreeMap<Label, usize> = counts
        .iter()
        .filter(|&(_, &c)| (c as f64) < target)
        .map(|(&l, &c)| (l, (target / c as f64).ceil() as usize))
        .collect();

    let mut out = Vec::with_capacity(train.len());
    for ex in train {
        let copies = ex
            .spans
            .iter()
            .filter_map(|s| multiplier.get(&s.label).copied())
            .max()
            .unwrap_or(1);
        out.extend(std::iter::repeat_n(ex, copies).cloned());
    }
    Ok(out)
}
