//! Cost-efficient and robust cost-efficient payoffs under model ambiguity.
//!
//! A static one-period market is priced by a lognormal martingale measure
//! while the real-world measure is only known to lie in an ambiguity set.
//! This crate constructs the cheapest payoff whose distribution dominates a
//! target law under every plausible measure in a chosen stochastic order,
//! verifies the hypotheses behind that construction, and solves robust
//! expected-utility and rank-dependent-utility portfolio problems in closed
//! form with independent numerical cross-checks.
//!
//! Modules map one-to-one onto the moving parts:
//!
//! - [`numerics`]: normal cdf/quantile, adaptive quadrature, root finding,
//!   concave envelopes;
//! - [`distributions`]: target laws with cdf / generalized inverse / partial
//!   expectation and quantile-cdf composition;
//! - [`markets`]: pricing measure, physical measures, likelihood ratios,
//!   ambiguity sets and least favorable measures;
//! - [`orders`]: first-, second- and third-order stochastic dominance checks;
//! - [`efficiency`]: cost-efficient payoff construction, pricing and audits;
//! - [`portfolio`]: robust expected-utility and rank-dependent-utility
//!   solvers plus utility rationalization;
//! - [`cli`]: scenario files in, verdict / price / curve files out.

// validation guards are written `!(x > 0.0)` so NaN inputs fail them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod distributions;
pub mod efficiency;
mod error;
pub mod markets;
pub mod numerics;
pub mod orders;
pub mod portfolio;

pub use error::{Error, Result};
