//! Scalar abstraction and parameter plumbing shared by the neural modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;

/// Floating-point type the networks run in: `f32` for training, `f64` for
/// gradient checks.
pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

pub fn softplus<F: Real>(x: F) -> F {
    // log1p(exp(x)) without overflow
    if x > F::of(20.0) {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn mish<F: Real>(x: F) -> F {
    x * softplus(x).tanh()
}

pub fn mish_grad<F: Real>(x: F) -> F {
    let t = softplus(x).tanh();
    t + x * (F::one() - t * t) * sigmoid(x)
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub fn uniform_matrix<F: Real, R: Rng>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Array2<F> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || F::of(rng.gen_range(-bound..bound)))
}

pub fn zeros_vec<F: Real>(n: usize) -> Array1<F> {
    Array1::zeros(n)
}

/// Uniform access to every trainable tensor of a parameter set, in a fixed
/// order, under stable names.
pub trait Parameters<F: Real> {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, F>)>;
    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)>;

    fn zero(&mut self) {
        for (_, mut t) in self.tensors_mut() {
            t.fill(F::zero());
        }
    }

    /// `self += scale * other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, scale: F) {
        let theirs = other.tensors();
        for ((_, mut mine), (_, t)) in self.tensors_mut().into_iter().zip(theirs) {
            mine.scaled_add(scale, &t);
        }
    }

    fn scale(&mut self, factor: F) {
        for (_, mut t) in self.tensors_mut() {
            t.mapv_inplace(|v| v * factor);
        }
    }

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}
