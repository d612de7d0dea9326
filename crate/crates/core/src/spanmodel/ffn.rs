//! Feed-forward block between pooling and the output layer.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{mish, mish_grad, uniform_matrix, Real};

pub const MAXOUT_PIECES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Maxout,
    Mish,
    /// Two independent mish stacks over the same input, concatenated.
    DualMish,
}

impl Activation {
    fn stacks(self) -> usize {
        match self {
            Activation::DualMish => 2,
            _ => 1,
        }
    }

    fn rows_per_unit(self) -> usize {
        match self {
            Activation::Maxout => MAXOUT_PIECES,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FfnLayer<F> {
    /// `units * rows_per_unit x input`; maxout piece `p` of unit `j` is row
    /// `j * 3 + p`.
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FfnParams<F> {
    pub stacks: Vec<Vec<FfnLayer<F>>>,
}

impl<F: Real> FfnParams<F> {
    fn build(input: usize, hidden: usize, depth: usize, activation: Activation, mut make: impl FnMut(usize, usize) -> Array2<F>) -> Self {
        let rows = hidden * activation.rows_per_unit();
        let stacks = (0..activation.stacks())
            .map(|_| {
                (0..depth)
                    .map(|l| {
                        let fan_in = if l == 0 { input } else { hidden };
                        FfnLayer {
                            weight: make(rows, fan_in),
                            bias: Array1::zeros(rows),
                        }
                    })
                    .collect()
            })
            .collect();
        Self { stacks }
    }

    pub fn zeros(input: usize, hidden: usize, depth: usize, activation: Activation) -> Self {
        Self::build(input, hidden, depth, activation, |r, c| Array2::zeros((r, c)))
    }

    pub fn init<R: Rng>(input: usize, hidden: usize, depth: usize, activation: Activation, rng: &mut R) -> Self {
        Self::build(input, hidden, depth, activation, |r, c| uniform_matrix(r, c, c, rng))
    }
}

pub fn ffn_output_dim(hidden: usize, activation: Activation) -> usize {
    hidden * activation.stacks()
}

#[derive(Clone, Debug)]
struct LayerCache<F> {
    input: Array2<F>,
    pre: Array2<F>,
    winners: Option<Vec<u8>>,
    mask: Option<Array2<F>>,
}

#[derive(Clone, Debug)]
pub struct FfnCache<F> {
    stacks: Vec<Vec<LayerCache<F>>>,
}

fn layer_forward<F: Real>(
    x: ArrayView2<F>,
    layer: &FfnLayer<F>,
    activation: Activation,
    dropout: f64,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> Result<(Array2<F>, LayerCache<F>)> {
    if x.ncols() != layer.weight.ncols() {
        return Err(Error::DimensionMismatch {
            what: "feed-forward input".into(),
            expected: layer.weight.ncols(),
            found: x.ncols(),
        });
    }
    let pre = x.dot(&layer.weight.t()) + &layer.bias;
    let (mut out, winners) = match activation {
        Activation::Maxout => {
            let units = pre.ncols() / MAXOUT_PIECES;
            let mut out = Array2::zeros((pre.nrows(), units));
            let mut winners = vec![0u8; pre.nrows() * units];
            for n in 0..pre.nrows() {
                for j in 0..units {
                    let mut best = 0;
                    for p in 1..MAXOUT_PIECES {
                        if pre[[n, j * MAXOUT_PIECES + p]] > pre[[n, j * MAXOUT_PIECES + best]] {
                            best = p;
                        }
                    }
                    out[[n, j]] = pre[[n, j * MAXOUT_PIECES + best]];
                    winners[n * units + j] = best as u8;
                }
            }
            (out, Some(winners))
        }
        Activation::Mish | Activation::DualMish => (pre.mapv(mish), None),
    };
    let mask = match rng {
        Some(rng) if dropout > 0.0 => {
            let keep = F::of(1.0 / (1.0 - dropout));
            let mask = Array2::from_shape_simple_fn(out.raw_dim(), || {
                if rng.gen::<f64>() < dropout {
                    F::zero()
                } else {
                    keep
                }
            });
            out *= &mask;
            Some(mask)
        }
        _ => None,
    };
    Ok((
        out,
        LayerCache {
            input: x.to_owned(),
            pre,
            winners,
            mask,
        },
    ))
}

/// Run the block over `x` (`N x input`). Dropout is inverted and only applied
/// when an RNG is supplied (training).
pub fn ffn_forward<F: Real>(
    x: ArrayView2<F>,
    params: &FfnParams<F>,
    activation: Activation,
    dropout: f64,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(Array2<F>, FfnCache<F>)> {
    let mut outputs = Vec::with_capacity(params.stacks.len());
    let mut caches = Vec::with_capacity(params.stacks.len());
    for stack in &params.stacks {
        let mut h = x.to_owned();
        let mut stack_cache = Vec::with_capacity(stack.len());
        for layer in stack {
            let (out, cache) = layer_forward(h.view(), layer, activation, dropout, &mut rng)?;
            stack_cache.push(cache);
            h = out;
        }
        outputs.push(h);
        caches.push(stack_cache);
    }
    let out = if outputs.len() == 1 {
        outputs.pop().expect("one stack")
    } else {
        let views: Vec<_> = outputs.iter().map(|o| o.view()).collect();
        concatenate(Axis(1), &views).expect("stacks share row count")
    };
    Ok((out, FfnCache { stacks: caches }))
}

/// Single-vector convenience wrapper (inference mode).
pub fn ffn_forward_vec<F: Real>(x: &Array1<F>, params: &FfnParams<F>, activation: Activation) -> Result<Array1<F>> {
    let row = x.view().insert_axis(Axis(0));
    let (out, _) = ffn_forward(row, params, activation, 0.0, None)?;
    Ok(out.row(0).to_owned())
}

/// Returns the input gradient and adds parameter gradients into `grads`.
pub fn ffn_backward<F: Real>(
    cache: &FfnCache<F>,
    d_out: ArrayView2<F>,
    params: &FfnParams<F>,
    activation: Activation,
    grads: &mut FfnParams<F>,
) -> Array2<F> {
    let mut d_input: Option<Array2<F>> = None;
    let mut offset = 0;
    for (k, stack_cache) in cache.stacks.iter().enumerate() {
        let width = params.stacks[k].last().map(|l| l.weight.nrows() / activation.rows_per_unit()).unwrap_or(0);
        let mut d = d_out.slice(s![.., offset..offset + width]).to_owned();
        offset += width;
        for (l, lc) in stack_cache.iter().enumerate().rev() {
            if let Some(mask) = &lc.mask {
                d *= mask;
            }
            let d_pre = match activation {
                Activation::Maxout => {
                    let winners = lc.winners.as_ref().expect("maxout winners");
                    let units = d.ncols();
                    let mut d_pre = Array2::zeros(lc.pre.raw_dim());
                    for n in 0..d.nrows() {
                        for j in 0..units {
                            let p = winners[n * units + j] as usize;
                            d_pre[[n, j * MAXOUT_PIECES + p]] = d[[n, j]];
                        }
                    }
                    d_pre
                }
                Activation::Mish | Activation::DualMish => {
                    let mut d_pre = lc.pre.mapv(mish_grad);
                    d_pre *= &d;
                    d_pre
                }
            };
            let layer = &params.stacks[k][l];
            let g = &mut grads.stacks[k][l];
            g.weight += &d_pre.t().dot(&lc.input);
            g.bias += &d_pre.sum_axis(Axis(0));
            d = d_pre.dot(&layer.weight);
        }
        d_input = Some(match d_input {
            Some(acc) => acc + d,
            None => d,
        });
    }
    d_input.expect("at least one stack")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn maxout_of_constant_pieces() {
        let mut params = FfnParams::<f64>::zeros(5, 4, 1, Activation::Maxout);
        for j in 0..4 {
            let b = &mut params.stacks[0][0].bias;
            b[j * 3] = 1.0;
            b[j * 3 + 1] = 2.0;
            b[j * 3 + 2] = 0.0;
        }
        let out = ffn_forward_vec(&array![0.3, -2.0, 1.0, 4.0, 0.0], &params, Activation::Maxout).unwrap();
        assert_eq!(out.to_vec(), vec![2.0; 4]);
    }

    #[test]
    fn mish_layer_values() {
        let mut params = FfnParams::<f64>::zeros(1, 2, 1, Activation::Mish);
        params.stacks[0][0].weight = array![[0.0], [1.0]];
        let out = ffn_forward_vec(&array![1.0], &params, Activation::Mish).unwrap();
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 0.86509).abs() < 1e-5);
    }

    #[test]
    fn dual_mish_width() {
        let params = FfnParams::<f32>::zeros(10, 128, 2, Activation::DualMish);
        let out = ffn_forward_vec(&Array1::zeros(10), &params, Activation::DualMish).unwrap();
        assert_eq!(out.len(), 256);
        assert_eq!(ffn_output_dim(128, Activation::DualMish), 256);
    }

    #[test]
    fn dropout_only_in_training() {
        use rand::SeedableRng;
        let mut params = FfnParams::<f64>::zeros(2, 50, 1, Activation::Mish);
        params.stacks[0][0].bias.fill(1.0);
        let x = Array2::zeros((4, 2));
        let (eval, _) = ffn_forward(x.view(), &params, Activation::Mish, 0.4, None).unwrap();
        assert!(eval.iter().all(|&v| (v - mish(1.0)).abs() < 1e-12));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (train, _) = ffn_forward(x.view(), &params, Activation::Mish, 0.4, Some(&mut rng)).unwrap();
        let zeros = train.iter().filter(|&&v| v == 0.0).count();
        assert!(zeros > 0 && zeros < train.len());
        assert!(train.iter().all(|&v| v == 0.0 || (v - mish(1.0) / 0.6).abs() < 1e-12));
    }

    #[test]
    fn mismatched_input() {
        let params = FfnParams::<f64>::zeros(3, 2, 1, Activation::Mish);
        assert!(ffn_forward(Array2::zeros((1, 4)).view(), &params, Activation::Mish, 0.0, None).is_err());
    }
}
