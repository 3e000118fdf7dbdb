//! Kernels, weights and the symmetric eigensolver.

mod eigen;
mod kernel;

pub use eigen::{fix_column_signs, top_r_symmetric_eig, EigenResult};
pub use kernel::{density_estimate, kernel_value, kernel_weights, roughness, KernelKind, KernelWeights};
