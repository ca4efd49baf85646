//! Diffusion signal models: single-tensor fitting, the response kernel, forward
//! synthesis by spherical convolution, and Rician noise.

mod response;
mod synth;
mod tensor;

pub use response::{
    build_r_matrix, estimate_response, gauss_legendre, response_sh_coefficients, KernelParams, RMatrix,
    ResponseKernel, ResponseSelection, DEFAULT_QUADRATURE_POINTS, DEGENERATE_LEVEL,
};
pub use synth::{add_rician_noise, add_rician_noise_with, noise_rng, synthesize_signal, FiberConfiguration};
pub use tensor::{fa_from_eigenvalues, fractional_anisotropy, single_tensor_fit, DiffusionTensor, SIGNAL_FLOOR};
