//! Absolute brightness, heralding efficiency and time-correlation structure of
//! narrow-band SPDC sources, computed from classical overlap integrals for
//! collinear Gaussian beams in periodically poled crystals.
//!
//! The guide in `book/` walks through the physics; each chapter's snippets are
//! compiled as doc-tests of this crate.

pub mod classical;
pub mod config;
pub mod error;
pub mod filters;
pub mod materials;
pub mod modebasis;
pub mod optimizer;
pub mod overlap;
pub mod quadrature;
pub mod quantities;
pub mod quantum;
pub mod source;
pub mod textfmt;
pub mod validation;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/units-and-config.md")]
    mod units_and_config {}
    #[doc = include_str!("../../../book/src/overlap.md")]
    mod overlap {}
    #[doc = include_str!("../../../book/src/efficiencies.md")]
    mod efficiencies {}
    #[doc = include_str!("../../../book/src/filters.md")]
    mod filters {}
    #[doc = include_str!("../../../book/src/heralding.md")]
    mod heralding {}
    #[doc = include_str!("../../../book/src/design.md")]
    mod design {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
