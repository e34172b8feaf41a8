//! Information and learnability metrics for embodied robot-learning datasets.
//!
//! Every metric works on a [`FeatureMatrix`]: one row per episode, built by
//! concatenating encoder embeddings of the episode's first, middle and last
//! frames (see [`manifest::assemble_unified_feature`]).
//!
//! | module | provides |
//! |--------|----------|
//! | [`manifest`], [`features`] | dataset manifests, the EDMF feature file |
//! | [`kernel`], [`blocked`] | distances, Gaussian kernels, tiled evaluation |
//! | [`diversity`] | Parzen-window diversity entropy and its approximations |
//! | [`learnability`] | memorization ease, expressiveness, task priors and transfer |
//! | [`lowlevel`] | luminance, spatial information, contrast, colorfulness, blur |
//! | [`validation`] | rank correlations, the bundled score fixture, synthetic scenarios |

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocked;
pub mod config;
pub mod diversity;
pub mod error;
pub mod features;
pub mod kernel;
pub mod learnability;
pub mod lowlevel;
pub mod manifest;
pub mod validation;

pub use config::Hyperparams;
pub use diversity::{EntropyResult, Method};
pub use error::{Error, Result};
pub use features::FeatureMatrix;
pub use kernel::{KernelConfig, KernelConvention};
pub use manifest::{DatasetManifest, EpisodeRecord};
