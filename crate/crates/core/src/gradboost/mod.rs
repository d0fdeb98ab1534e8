//! Gradient boosting with regression trees whose node tests threshold
//! pooled responses of learned kernels.

pub mod loss;
pub mod tree;

pub use loss::{deviance, newton_leaf, pseudo_residuals, LEAF_CAP};
pub use tree::{fit_tree, FeatureKey, NodeTest, Part, RegressionTree, TreeConfig, TreeNode};
mod features;
mod model;
mod train;

pub use features::{dense_planes, feature_planes};
pub use model::{predict_scores, predict_scores_with, BoostModel, LOSS_ID};
pub use train::{
    resume_kernelboost, train_kernelboost, train_kernelboost_report, RoundStats, TrainConfig,
    TrainImage, TrainReport,
};
