//! Dynamic selection of inductive biases for multimodal activity recognition.
//!
//! The crate is organised around the pipeline it supports:
//!
//! - [`hyperspace`]: typed hyperparameter domains, configurations and trial records.
//! - [`explorer`]: budgeted exploration strategies producing a trial log.
//! - [`fanova`]: random-forest surrogate and functional-ANOVA decomposition.
//! - [`dgp`]: per-activity data-source importance, interactions and subset selection.
//! - [`sensors`]: synthetic sensor streams with planted ground truth, CSV ingestion,
//!   segmentation and meta-segmented fold assignment.
//! - [`learner`]: a small multimodal classifier, masked augmentation and the
//!   cross-validated evaluation protocol.

pub mod dgp;
pub mod explorer;
pub mod fanova;
pub mod hyperspace;
pub mod learner;
pub mod seed;
pub mod sensors;

pub use hyperspace::{Configuration, ParamKind, ParamSpec, ParamValue, Prior, SearchSpace, Trial};
