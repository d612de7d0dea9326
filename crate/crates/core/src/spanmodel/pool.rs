//! Span pooling: reduce the rows of a span to one vector per reducer.

use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewMut1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    Mean,
    Max,
    First,
    Last,
}

pub const DEFAULT_POOLING: [Pool; 4] = [Pool::Mean, Pool::Max, Pool::First, Pool::Last];

fn reduce_into<F: Real>(encoding: ArrayView2<F>, (start, end): (usize, usize), pool: Pool, mut out: ArrayViewMut1<F>) {
    let rows = encoding.slice(s![start..end, ..]);
    match pool {
        Pool::Mean => {
            let n = F::of((end - start) as f64);
            for (j, o) in out.iter_mut().enumerate() {
                *o = rows.column(j).sum() / n;
            }
        }
        Pool::Max => {
            for (j, o) in out.iter_mut().enumerate() {
                *o = rows.column(j).iter().copied().fold(F::neg_infinity(), F::max);
            }
        }
        Pool::First => out.assign(&encoding.row(start)),
        Pool::Last => out.assign(&encoding.row(end - 1)),
    }
}

fn check_span(encoding: ArrayView2<impl Real>, span: (usize, usize)) -> Result<()> {
    if span.0 >= span.1 || span.1 > encoding.nrows() {
        return Err(Error::Config(format!(
            "cannot pool span ({}, {}) over {} tokens",
            span.0,
            span.1,
            encoding.nrows()
        )));
    }
    Ok(())
}

/// Concatenation, in `pools` order, of the selected reductions of the span's
/// rows.
pub fn pool_span<F: Real>(encoding: ArrayView2<F>, span: (usize, usize), pools: &[Pool]) -> Result<Array1<F>> {
    check_span(encoding, span)?;
    let d = encoding.ncols();
    let mut out = Array1::zeros(d * pools.len());
    for (k, &pool) in pools.iter().enumerate() {
        reduce_into(encoding, span, pool, out.slice_mut(s![k * d..(k + 1) * d]));
    }
    Ok(out)
}

/// One pooled row per candidate.
pub fn pool_spans<F: Real>(encoding: ArrayView2<F>, spans: &[(usize, usize)], pools: &[Pool]) -> Result<Array2<F>> {
    let d = encoding.ncols();
    let mut out = Array2::zeros((spans.len(), d * pools.len()));
    for (i, &span) in spans.iter().enumerate() {
        check_span(encoding, span)?;
        let mut row = out.row_mut(i);
        for (k, &pool) in pools.iter().enumerate() {
            reduce_into(encoding, span, pool, row.slice_mut(s![k * d..(k + 1) * d]));
        }
    }
    Ok(out)
}

/// Add the gradient of the pooled rows back onto the encoding rows. Max
/// routes to the first maximal row.
pub fn pool_spans_backward<F: Real>(
    encoding: ArrayView2<F>,
    spans: &[(usize, usize)],
    pools: &[Pool],
    d_pooled: ArrayView2<F>,
    d_encoding: &mut Array2<F>,
) {
    let d = encoding.ncols();
    for (i, &(start, end)) in spans.iter().enumerate() {
        let grad = d_pooled.row(i);
        for (k, &pool) in pools.iter().enumerate() {
            let g = grad.slice(s![k * d..(k + 1) * d]);
            match pool {
                Pool::Mean => {
                    let n = F::of((end - start) as f64);
                    for t in start..end {
                        let mut r = d_encoding.row_mut(t);
                        r.zip_mut_with(&g, |a, &b| *a += b / n);
                    }
                }
                Pool::Max => {
                    for j in 0..d {
                        let mut best = start;
                        for t in start + 1..end {
                            if encoding[[t, j]] > encoding[[best, j]] {
                                best = t;
                            }
                        }
                        d_encoding[[best, j]] += g[j];
                    }
                }
                Pool::First => {
                    let mut r = d_encoding.row_mut(start);
                    r += &g;
                }
                Pool::Last => {
                    let mut r = d_encoding.row_mut(end - 1);
                    r += &g;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hand_arithmetic() {
        let enc = array![[1.0, 3.0], [3.0, 1.0]];
        let pooled = pool_span(enc.view(), (0, 2), &DEFAULT_POOLING).unwrap();
        assert_eq!(pooled.to_vec(), vec![2.0, 2.0, 3.0, 3.0, 1.0, 3.0, 3.0, 1.0]);
    }

    #[test]
    fn identical_rows_and_single_tokens() {
        let enc = array![[0.5, -1.0], [0.5, -1.0], [0.5, -1.0], [9.0, 9.0]];
        let pooled = pool_span(enc.view(), (0, 3), &DEFAULT_POOLING).unwrap();
        assert_eq!(pooled.to_vec(), [0.5, -1.0].repeat(4));
        let single = pool_span(enc.view(), (3, 4), &DEFAULT_POOLING).unwrap();
        assert_eq!(single.to_vec(), [9.0, 9.0].repeat(4));
    }

    #[test]
    fn empty_span_rejected() {
        let enc = array![[1.0f64]];
        assert!(pool_span(enc.view(), (0, 0), &DEFAULT_POOLING).is_err());
        assert!(pool_span(enc.view(), (0, 2), &DEFAULT_POOLING).is_err());
    }

    #[test]
    fn mean_and_max_ignore_interior_order() {
        let enc = array![[1.0, 2.0], [5.0, -1.0], [0.0, 4.0], [2.0, 2.0]];
        let swapped = array![[1.0, 2.0], [0.0, 4.0], [5.0, -1.0], [2.0, 2.0]];
        for pool in [Pool::Mean, Pool::Max] {
            assert_eq!(
                pool_span(enc.view(), (0, 4), &[pool]).unwrap(),
                pool_span(swapped.view(), (0, 4), &[pool]).unwrap()
            );
        }
        let rotated = array![[5.0, -1.0], [0.0, 4.0], [2.0, 2.0], [1.0, 2.0]];
        assert_ne!(
            pool_span(enc.view(), (0, 4), &[Pool::First]).unwrap(),
            pool_span(rotated.view(), (0, 4), &[Pool::First]).unwrap()
        );
        assert_ne!(
            pool_span(enc.view(), (0, 4), &[Pool::Last]).unwrap(),
            pool_span(rotated.view(), (0, 4), &[Pool::Last]).unwrap()
        );
    }

    #[test]
    fn batched_matches_single() {
        let enc = array![[1.0, 2.0], [5.0, -1.0], [0.0, 4.0]];
        let spans = [(0, 3), (1, 2), (0, 1)];
        let batch = pool_spans(enc.view(), &spans, &DEFAULT_POOLING).unwrap();
        for (i, &span) in spans.iter().enumerate() {
            assert_eq!(batch.row(i), pool_span(enc.view(), span, &DEFAULT_POOLING).unwrap());
        }
    }
}
