//! File formats, experiment drivers and the `cmc` command line built on
//! `cmc-core`.

#![forbid(unsafe_code)]
// Negated comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod experiments;
pub mod formats;
pub mod meta;
