//! Dense numerics shared by every other module: row-major matrices,
//! activations with their derivatives, flat-vector helpers, seeded random
//! streams and parameter initialization.

mod activation;
mod init;
mod matrix;
mod rng;
mod vector;

pub use activation::{
    cross_entropy, leaky_relu, leaky_relu_grad, log_softmax_row, relu, relu_grad, softmax,
    softmax_row, CrossEntropy, DEFAULT_LEAKY_SLOPE,
};
pub use init::{init_params, InitScheme};
pub use matrix::Matrix;
pub use rng::RngStream;
pub use vector::{axpy, cosine_similarity, dot, norm, scale, COSINE_EPS};
