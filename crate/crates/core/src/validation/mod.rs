//! Score correlations, the bundled score fixture, synthetic data and the
//! directional scenarios.

pub mod correlation;
pub mod directional;
pub mod fixture;
pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::config::Hyperparams;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::learnability::{learnability_report, LearnabilityReport};
use crate::manifest::DatasetManifest;

pub use correlation::{correlations, Correlations};
pub use directional::{directional_suite, DirectionalReport};
pub use fixture::fixture_check;
pub use synthetic::{generate_synthetic, ClusterSpec, SyntheticSpec};

/// Per-task scores with and without the prior and transfer terms, each
/// correlated against the same ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub raw: Correlations,
    pub adjusted: Correlations,
    pub report: LearnabilityReport,
}

pub fn transfer_ablation(
    manifest: &DatasetManifest,
    x: &FeatureMatrix,
    hp: &Hyperparams,
    ground_truth: &[f64],
) -> Result<AblationReport> {
    let report = learnability_report(manifest, x, hp)?;
    if ground_truth.len() != report.tasks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} ground-truth scores for {} tasks",
            ground_truth.len(),
            report.tasks.len()
        )));
    }
    Ok(AblationReport {
        raw: correlations(&report.l_raw(), ground_truth)?,
        adjusted: correlations(&report.l_adjusted(), ground_truth)?,
        report,
    })
}
