pub mod analysis;
pub mod divergence;
pub mod eigen;
pub mod error;
pub mod oracle;
pub mod potential;
pub mod scaled;
pub mod transfer;

pub use error::{Error, Result};
pub use potential::SegmentedPotential;
pub use scaled::Scaled;
pub use transfer::{propagate, PropagationConfig, Side, StartMode, WaveSolution};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/segments.md")]
    mod segments {}
    #[doc = include_str!("../../../book/src/divergence.md")]
    mod divergence {}
    #[doc = include_str!("../../../book/src/eigenvalues.md")]
    mod eigenvalues {}
    #[doc = include_str!("../../../book/src/uncertainty.md")]
    mod uncertainty {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
}
