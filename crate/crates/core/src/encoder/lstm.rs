//! Single-layer bidirectional LSTM with explicit backpropagation.
//!
//! Gate rows are packed `[input; forget; cell; output]`, each `hidden` wide.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{sigmoid, uniform_matrix, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<F> {
    /// `4H x D`
    pub w_input: Array2<F>,
    /// `4H x H`
    pub w_hidden: Array2<F>,
    /// `4H`
    pub bias: Array1<F>,
}

impl<F: Real> LstmParams<F> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_input: Array2::zeros((4 * hidden, input)),
            w_hidden: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    /// Uniform weights, zero biases except the forget gate at 1.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut bias = Array1::zeros(4 * hidden);
        bias.slice_mut(s![hidden..2 * hidden]).fill(F::one());
        Self {
            w_input: uniform_matrix(4 * hidden, input, input, rng),
            w_hidden: uniform_matrix(4 * hidden, hidden, hidden, rng),
            bias,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.ncols()
    }

    pub fn input(&self) -> usize {
        self.w_input.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiLstmParams<F> {
    pub forward: LstmParams<F>,
    pub backward: LstmParams<F>,
}

impl<F: Real> BiLstmParams<F> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            forward: LstmParams::zeros(input, hidden),
            backward: LstmParams::zeros(input, hidden),
        }
    }

    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            forward: LstmParams::init(input, hidden, rng),
            backward: LstmParams::init(input, hidden, rng),
        }
    }
}

/// Activations saved by one direction, in processing order.
#[derive(Clone, Debug)]
struct DirectionCache<F> {
    input: Array2<F>,
    gates: Array2<F>,
    cells: Array2<F>,
    hiddens: Array2<F>,
    tanh_cells: Array2<F>,
}

#[derive(Clone, Debug)]
pub struct BiLstmCache<F> {
    forward: DirectionCache<F>,
    backward: DirectionCache<F>,
}

fn run_direction<F: Real>(input: Array2<F>, p: &LstmParams<F>) -> DirectionCache<F> {
    let steps = input.nrows();
    let h = p.hidden();
    let projected = input.dot(&p.w_input.t()) + &p.bias;
    let mut gates = Array2::zeros((steps, 4 * h));
    let mut cells = Array2::zeros((steps, h));
    let mut hiddens = Array2::zeros((steps, h));
    let mut tanh_cells = Array2::zeros((steps, h));
    let mut h_prev = Array1::<F>::zeros(h);
    let mut c_prev = Array1::<F>::zeros(h);
    for t in 0..steps {
        let z = &projected.row(t) + &p.w_hidden.dot(&h_prev);
        let mut g = gates.row_mut(t);
        for j in 0..h {
            g[j] = sigmoid(z[j]);
            g[h + j] = sigmoid(z[h + j]);
            g[2 * h + j] = z[2 * h + j].tanh();
            g[3 * h + j] = sigmoid(z[3 * h + j]);
        }
        for j in 0..h {
            let c = g[h + j] * c_prev[j] + g[j] * g[2 * h + j];
            let tc = c.tanh();
            cells[[t, j]] = c;
            tanh_cells[[t, j]] = tc;
            hiddens[[t, j]] = g[3 * h + j] * tc;
        }
        h_prev.assign(&hiddens.row(t));
        c_prev.assign(&cells.row(t));
    }
    DirectionCache {
        input,
        gates,
        cells,
        hiddens,
        tanh_cells,
    }
}

/// Returns the input gradient; parameter gradients are added into `grads`.
fn backprop_direction<F: Real>(
    cache: &DirectionCache<F>,
    d_hidden: ArrayView2<F>,
    p: &LstmParams<F>,
    grads: &mut LstmParams<F>,
) -> Array2<F> {
    let steps = cache.input.nrows();
    let h = p.hidden();
    let mut d_gates = Array2::<F>::zeros((steps, 4 * h));
    let mut dh_next = Array1::<F>::zeros(h);
    let mut dc_next = Array1::<F>::zeros(h);
    let one = F::one();
    for t in (0..steps).rev() {
        let g = cache.gates.row(t);
        let mut dz = d_gates.row_mut(t);
        for j in 0..h {
            let (i, f, c_hat, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = cache.tanh_cells[[t, j]];
            let c_prev = if t > 0 { cache.cells[[t - 1, j]] } else { F::zero() };
            let dh = d_hidden[[t, j]] + dh_next[j];
            let d_o = dh * tc;
            let dc = dh * o * (one - tc * tc) + dc_next[j];
            dz[j] = dc * c_hat * i * (one - i);
            dz[h + j] = dc * c_prev * f * (one - f);
            dz[2 * h + j] = dc * i * (one - c_hat * c_hat);
            dz[3 * h + j] = d_o * o * (one - o);
            dc_next[j] = dc * f;
        }
        dh_next = p.w_hidden.t().dot(&dz);
    }
    grads.w_input += &d_gates.t().dot(&cache.input);
    if steps > 1 {
        let prev_h = cache.hiddens.slice(s![..steps - 1, ..]);
        grads.w_hidden += &d_gates.slice(s![1.., ..]).t().dot(&prev_h);
    }
    grads.bias += &d_gates.sum_axis(Axis(0));
    d_gates.dot(&p.w_input)
}

fn reversed<F: Real>(m: ArrayView2<F>) -> Array2<F> {
    m.slice(s![..;-1, ..]).to_owned()
}

/// Run both directions over `input` (`T x D`) and concatenate per token:
/// output is `T x 2H`, forward half first.
pub fn bilstm_forward<F: Real>(input: ArrayView2<F>, params: &BiLstmParams<F>) -> Result<(Array2<F>, BiLstmCache<F>)> {
    let expected = params.forward.input();
    if input.ncols() != expected {
        return Err(Error::DimensionMismatch {
            what: "bi-lstm input".into(),
            expected,
            found: input.ncols(),
        });
    }
    let forward = run_direction(input.to_owned(), &params.forward);
    let backward = run_direction(reversed(input), &params.backward);
    let out = concatenate(Axis(1), &[forward.hiddens.view(), reversed(backward.hiddens.view()).view()])
        .expect("matching row counts");
    Ok((out, BiLstmCache { forward, backward }))
}

pub fn bilstm_backward<F: Real>(
    cache: &BiLstmCache<F>,
    d_out: ArrayView2<F>,
    params: &BiLstmParams<F>,
    grads: &mut BiLstmParams<F>,
) -> Array2<F> {
    let h = params.forward.hidden();
    let d_fwd = d_out.slice(s![.., ..h]);
    let d_bwd = reversed(d_out.slice(s![.., h..]));
    let dx_fwd = backprop_direction(&cache.forward, d_fwd, &params.forward, &mut grads.forward);
    let dx_bwd = backprop_direction(&cache.backward, d_bwd.view(), &params.backward, &mut grads.backward);
    dx_fwd + reversed(dx_bwd.view())
}
