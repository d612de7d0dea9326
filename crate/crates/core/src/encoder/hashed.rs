//! Hashed multi-attribute token embedder.

use std::hash::Hasher;

use fnv::FnvHasher;
use ndarray::{Array2, ArrayView2};

use crate::corpus::Excerpt;
use crate::tensor::Real;

pub const ATTRIBUTES: usize = 4;

/// Word-shape signature: `X` upper, `x` lower, `d` digit, other characters
/// verbatim; runs of one class are cut after four.
pub fn shape(surface: &str) -> String {
    let mut out = String::new();
    let mut last = None;
    let mut run = 0;
    for c in surface.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_ascii_digit() {
            'd'
        } else {
            c
        };
        if Some(s) == last {
            run += 1;
        } else {
            run = 1;
            last = Some(s);
        }
        if run <= 4 {
            out.push(s);
        }
    }
    out
}

fn bucket(attribute: u8, value: &str, buckets: usize) -> usize {
    let mut h = FnvHasher::default();
    h.write_u8(attribute);
    h.write(value.as_bytes());
    (h.finish() % buckets as u64) as usize
}

/// Table rows for the lowercase form, 3-char prefix, 3-char suffix and shape
/// of every token.
pub fn token_rows(excerpt: &Excerpt, buckets: usize) -> Vec<[usize; ATTRIBUTES]> {
    excerpt
        .tokens
        .iter()
        .map(|tok| {
            let lower = tok.surface.to_lowercase();
            let chars: Vec<char> = lower.chars().collect();
            let prefix: String = chars.iter().take(3).collect();
            let suffix: String = chars[chars.len().saturating_sub(3)..].iter().collect();
            [
                bucket(0, &lower, buckets),
                bucket(1, &prefix, buckets),
                bucket(2, &suffix, buckets),
                bucket(3, &shape(&tok.surface), buckets),
            ]
        })
        .collect()
}

pub fn embed_rows<F: Real>(rows: &[[usize; ATTRIBUTES]], table: ArrayView2<F>) -> Array2<F> {
    let mut out = Array2::zeros((rows.len(), table.ncols()));
    for (t, ids) in rows.iter().enumerate() {
        let mut row = out.row_mut(t);
        for &id in ids {
            row += &table.row(id);
        }
    }
    out
}

/// Scatter per-token gradients back onto the table rows they came from.
pub fn embed_backward<F: Real>(rows: &[[usize; ATTRIBUTES]], d_out: ArrayView2<F>, d_table: &mut Array2<F>) {
    for (t, ids) in rows.iter().enumerate() {
        for &id in ids {
            let mut r = d_table.row_mut(id);
            r += &d_out.row(t);
        }
    }
}
