//! Discretized Vladimirov diffusion on the truncated p-adic tree.
//!
//! The generator `A` acting on level-`m` locally constant functions has
//! off-diagonal entries `kappa * p^-m / |i - j|_p^(alpha + 1)` and a diagonal
//! that makes every row sum to zero. `A` is dissipative: the ODE right-hand
//! side uses `+A`.
//!
//! Two application strategies are registered by name in [`OperatorRegistry`]:
//! `dense` (explicit matrix, kept as the oracle) and `fast` (ball-sum
//! hierarchy, `O(m p^m)` per product).

mod generator;
mod operator;
mod spectrum;

pub use generator::{build_generator, kappa, kappa_in, level_weights, mu, mu_in, GeneratorMatrix};
pub use operator::{
    apply_fast, DenseOperator, DiffusionOperator, FastOperator, OperatorFactory, OperatorRegistry, OperatorSpec,
    FAST_THRESHOLD,
};
pub use spectrum::{
    expected_spectrum, expected_spectrum_in, kozyrev_residuals, symmetric_eigenvalues, verify_spectrum, SpectralLine,
    SpectrumReport, SpectrumRow,
};

use crate::padic::PadicError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VladimirovError {
    #[error(transparent)]
    Lattice(#[from] PadicError),
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("vector length {got} does not match generator dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown diffusion operator `{0}`")]
    UnknownOperator(String),
}
