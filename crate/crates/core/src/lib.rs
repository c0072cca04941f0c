//! Echo state network reservoirs: generation, spectra, cycle densities,
//! readout training, memory and correlation metrics, frequency responses, and
//! tuning cycle densities to a target signal's spectrum.
//!
//! ```
//! use esnkit::generate::gen_er;
//! use esnkit::reservoir::GenOptions;
//! use esnkit::spectral;
//!
//! let res = gen_er(50, 5.0, 1, &GenOptions::default()).unwrap();
//! let radius = spectral::spectral_radius(&res.w.to_dense()).unwrap();
//! assert!((radius - 1.0).abs() < 1e-8);
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapt;
pub mod cycles;
pub mod error;
pub mod esn;
pub mod experiment;
pub mod generate;
pub mod matrix;
pub mod metrics;
pub mod reservoir;
pub mod signal;
pub mod spectral;
pub mod tasks;

pub use error::{Error, ErrorClass, Result};
pub use matrix::SparseMatrix;
pub use reservoir::{GenOptions, Normalization, Reservoir};

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/reservoirs.md")]
    mod reservoirs {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    mod spectra {}
    #[doc = include_str!("../../../book/src/cycles.md")]
    mod cycles {}
    #[doc = include_str!("../../../book/src/readouts.md")]
    mod readouts {}
    #[doc = include_str!("../../../book/src/memory.md")]
    mod memory {}
    #[doc = include_str!("../../../book/src/frequency.md")]
    mod frequency {}
    #[doc = include_str!("../../../book/src/tasks.md")]
    mod tasks {}
    #[doc = include_str!("../../../book/src/adaptation.md")]
    mod adaptation {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
