//! Manipulation-robust audit metrics for recommender-system safety audits.
//!
//! The crate models a published audit protocol over a finite catalog of
//! content variants, the platform strategies that game a per-variant scoring
//! metric, and the semantic-envelope repair that certifies harmful-exposure
//! ceilings against every such strategy. Arithmetic is exact rational
//! throughout; floating point appears only in rendered output.

pub mod bestresponse;
pub mod builtin;
pub mod catalog;
pub mod certify;
pub mod formal;
pub mod generator;
pub mod gridverify;
pub mod harness;
pub mod io;
pub mod metric;
pub mod protocol;
pub mod rational;
