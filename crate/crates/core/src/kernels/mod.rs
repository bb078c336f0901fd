//! Low-pass filter, projection kernels and the compiled localized kernel.

mod filter;
mod proj;
mod table;

pub use filter::{filter_h, FilterSpec};
pub use proj::{
    d_sequence, mehler_closed_form, mehler_forms, p_coeffs, phi_localized, proj_reduced,
    proj_tensor, DSequence, PCoeffs,
};
pub use table::{compile_kernel, eval_kernel, KernelTable, RadialKernel, TabulatedKernel};
