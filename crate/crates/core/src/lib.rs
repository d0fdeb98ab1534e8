//! Boosted pixel classification for biomedical image segmentation.
//!
//! The crate is organised bottom-up:
//!
//! * [`imagecore`] raster types, channel stacks, score normalization, feature
//!   channels, pyramids and volume reslicing.
//! * [`kernelbank`] sample selection, positive-patch clustering and the
//!   weighted-ridge kernel learner that produces each boosting round's filter bank.
//! * [`pooling`] window-max pooling, SLIC superpixels and superpixel pooling.
//! * [`gradboost`] gradient boosting with regression trees whose node tests are
//!   pooled kernel responses.
//! * [`context`] the Auto-Context, Expanded Trees and Knotted Trees cascades.
//! * [`fusion`] snowflake descriptors and the final random forest.
//! * [`harness`] configuration, datasets, synthetic suites, metrics and model files.

pub mod context;
pub mod error;
pub mod fusion;
pub mod gradboost;
pub mod harness;
pub mod imagecore;
pub mod kernelbank;
pub mod pooling;
pub mod seed;

pub use error::{Error, Result};
