//! Median-centric filtering of out-of-distribution samples from unlabeled
//! "wild" data.
//!
//! The pipeline: train an in-distribution classifier, take its mean
//! per-sample loss gradient as a reference, pseudo-label the wild set, and
//! greedily peel off the samples whose removal moves the element-wise
//! median of the wild gradients closest to the reference
//! ([`filter::medix_filter`]). The flagged samples then serve as negatives
//! for a binary OOD detector ([`detector::train_ood_detector`]).
//!
//! [`bounds`] turns the misclassification guarantees for this filter into
//! calculators with Monte-Carlo coverage checks; [`synth`] provides the
//! synthetic worlds; [`experiments`] holds the end-to-end runs behind the
//! `medix` binary.

pub mod bounds;
pub mod detector;
pub mod error;
pub mod experiments;
pub mod filter;
pub mod gradients;
pub mod plot;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{MedixError, Result};
