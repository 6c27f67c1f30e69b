//! Minimum error entropy regression: the empirical objective and its fit,
//! population oracles for the functionals it targets, and a lab for
//! consistency experiments.
//!
//! The guide in `book/` walks through each part; its snippets are compiled
//! as doctests of this crate.

pub mod error;
pub mod quadrature;
pub mod special;
pub mod noise;
pub mod rng;
pub mod data;
pub mod hypothesis;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod fit;
pub mod lab;
pub mod config;
pub mod io;
pub mod run;

// the guide's chapters, so their snippets run as doctests
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/objective.md")]
    mod objective {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/counterexample.md")]
    mod counterexample {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
