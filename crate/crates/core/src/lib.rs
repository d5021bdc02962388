// SPDX-License-Identifier: Apache-2.0

//! Gate-level hardware-trojan triage.
//!
//! The pipeline runs netlist text through [`netlist::parse_netlist`], builds a
//! [`featex::CircuitGraph`], extracts five topology features per driven net and
//! labels each net. The resulting [`dataset::Dataset`] feeds two explainable
//! classifiers:
//!
//! - [`propxai`]: 31 class-weighted RBF SVMs, one per non-empty feature subset,
//!   whose votes are tallied with per-property effectiveness weights.
//! - [`casexai`]: a single all-feature SVM whose decision is backed by weighted
//!   nearest-neighbour cases drawn from an exact-match training index.
//!
//! [`synthgen`] produces labelled synthetic netlists for end-to-end runs.

pub mod casexai;
pub mod class;
pub mod dataset;
pub mod featex;
pub mod metrics;
pub mod netlist;
pub mod propxai;
pub mod svm;
pub mod synthgen;

pub use class::{Class, ClassMap};
pub use dataset::{Dataset, NetRecord, Origin};
pub use featex::{Feature, FeatureSet, FeatureVector};
