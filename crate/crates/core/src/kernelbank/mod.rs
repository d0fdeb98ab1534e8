//! Filter generation: sample selection, positive-patch clustering, ridge
//! kernel learning, bank generation, and the correlation/POSNEG operators.

mod bank;
mod cluster;
mod conv;
mod ridge;
mod sampling;

pub use bank::{generate_bank, BankConfig, BankInputs, BankOutcome};
pub use cluster::{cluster_positives, ClusterSet};
pub use conv::{convolve, kernel_response, posneg, Kernel};
pub use ridge::{learn_kernel, learn_kernel_with, KernelFit, RidgePenalty};
pub use sampling::{count_eligible, sample_locations, Patch, SampleSource, TrainSample};
