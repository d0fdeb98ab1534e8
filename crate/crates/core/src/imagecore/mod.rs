//! Raster types, channel stacks, score normalization, feature channels,
//! pyramids and volume reslicing.

pub mod filters;
pub mod io;
mod normalize;
pub mod plane;
pub mod pyramid;
mod stack;
pub mod volume;

pub use filters::{compute_feature_channels, FeatureGenerator, FeatureSpec};
pub use normalize::{normalize_scores, normalize_value};
pub use plane::{eligible, reflect_index, ImagePlane, LabelMap, Mask, ScoreMap};
pub use pyramid::build_pyramid;
pub use stack::{Channel, ChannelKind, ChannelStack};
pub use volume::{reslice, Axis, ReslicePlane, Volume};
