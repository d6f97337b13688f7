//! Core algorithms for analysing Vega-Lite corpora and building
//! natural-language chart datasets.
//!
//! Everything here is `no_std` (with `alloc`): parsing, structural metrics,
//! corpus bookkeeping, prompt rendering, response parsing, aggregation,
//! diversity metrics and lexical statistics. File IO, HTTP and the command
//! line live in the `chartnl` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod diversity;
pub mod fielddata;
pub mod gateway;
pub mod json;
pub mod levenshtein;
pub mod lexical;
pub mod pipeline;
pub mod preprocess;
pub mod promptforge;
pub mod qualcoding;
pub mod spec_model;
