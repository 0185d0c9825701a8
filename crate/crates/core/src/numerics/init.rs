use super::{RngStream, Tensor};

/// Uniform fan-based initialization on `[-s, s]`,
/// `s = sqrt(6 / (fan_in + fan_out))`.
pub fn init_weight(fan_in: usize, fan_out: usize, rng: &mut RngStream) -> Tensor {
    let s = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    Tensor::from_fn(fan_in, fan_out, |_, _| rng.uniform_range(-s, s))
}

pub fn init_bias(width: usize) -> Tensor {
    Tensor::zeros(1, width)
}
