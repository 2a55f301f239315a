//! Dense linear algebra, activations, deterministic random numbers, and
//! parameter initialization. Everything is `f64`; every operation is
//! deterministic given identical inputs and seed.

mod adam;
mod matrix;
mod rng;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use matrix::{sigmoid, sigmoid_scalar, tanh_m, tanh_scalar, Matrix};
pub use rng::{fnv1a, Rng};
