//! Dense tensors, unitary Fourier transforms and the reverse-mode tape.

pub mod fft;
pub mod gradcheck;
pub mod tape;
pub mod tensor;

pub use fft::{dft_axis, irfft_t, rfft_bins, rfft_t, FftPlan};
pub use gradcheck::{check_gradients, GradCheckOptions, GradCheckReport, GradMismatch};
pub use tape::{chebyshev_basis, gelu, top_k_mask, Gradients, ParamId, Tape, Var};
pub use tensor::{ComplexTensor, Tensor};

/// Unitary DFT (or inverse) along the subcarrier axis: the second-to-last
/// axis of a `... x K x A` tensor, or the only axis of a length-`K` vector.
pub fn dft_k(x: &ComplexTensor, inverse: bool) -> crate::Result<ComplexTensor> {
    let rank = x.shape().len();
    dft_axis(x, rank.saturating_sub(2), inverse)
}
