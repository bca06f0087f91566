//! Monte Carlo laboratory for excursion sets of stationary Gaussian fields.
//!
//! The crate synthesizes stationary Gaussian fields with exact grid
//! covariances, thresholds them into excursion masks, labels and classifies
//! connected components, builds nonnegative deterministic shifts with
//! verified floor guarantees, counts boundary components / critical points /
//! trifurcation points, and orchestrates the ensemble experiments behind
//! uniqueness-of-the-giant-component studies. Start with the guide in
//! `book/` (each chapter's code compiles as a doc-test of this crate) or the
//! module docs below.

pub mod burton_keane;
pub mod connectivity;
pub mod counting;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod rng;
pub mod shift;
pub mod stats;
pub mod synthesis;

pub use error::{Error, Result};

// Compile every code block in the README and the guide as a doc-test so
// neither can drift from the API.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/synthesis.md")]
    mod synthesis {}
    #[doc = include_str!("../../../book/src/excursion-sets.md")]
    mod excursion_sets {}
    #[doc = include_str!("../../../book/src/shift.md")]
    mod shift {}
    #[doc = include_str!("../../../book/src/counting.md")]
    mod counting {}
    #[doc = include_str!("../../../book/src/trifurcations.md")]
    mod trifurcations {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
