//! Seeded isotropic Gaussian clusters with a matching manifest.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::manifest::{DatasetManifest, EpisodeRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub center: Vec<f64>,
    pub spread: f64,
    pub count: usize,
    pub task_id: usize,
    pub mean_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub clusters: Vec<ClusterSpec>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let first = self.clusters.first().ok_or(Error::Empty("no clusters"))?;
        for (i, c) in self.clusters.iter().enumerate() {
            if c.center.len() != first.center.len() || c.center.is_empty() {
                return Err(Error::DimensionMismatch(format!(
                    "cluster {i} center has dimension {}",
                    c.center.len()
                )));
            }
            if c.count == 0 || !(c.spread >= 0.0) || !(c.mean_length >= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "cluster {i}: need count >= 1, spread >= 0, mean_length >= 1"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.clusters.first().map_or(0, |c| c.center.len())
    }

    pub fn task_count(&self) -> usize {
        self.clusters.iter().map(|c| c.task_id + 1).max().unwrap_or(0)
    }

    /// Standard layout for the directional scenarios: three 12-sample tasks in
    /// 32 dimensions, spread 0.03, centers at the origin, `0.2·e0` and `0.2·e1`.
    pub fn directional_default(seed: u64) -> Self {
        let dim = 32;
        let center = |axis: Option<usize>| {
            let mut c = vec![0.0; dim];
            if let Some(a) = axis {
                c[a] = 0.2;
            }
            c
        };
        let clusters = [None, Some(0), Some(1)]
            .into_iter()
            .enumerate()
            .map(|(task_id, axis)| ClusterSpec {
                center: center(axis),
                spread: 0.03,
                count: 12,
                task_id,
                mean_length: 100.0,
            })
            .collect();
        Self { clusters, seed }
    }
}

/// Draws `center + spread · z`, `z ~ N(0, I)`, continuing the stream in `rng`.
pub fn draw_point(rng: &mut ChaCha8Rng, center: &[f64], spread: f64) -> Vec<f64> {
    center
        .iter()
        .map(|&c| {
            let z: f64 = StandardNormal.sample(rng);
            c + spread * z
        })
        .collect()
}

/// Rows in cluster order; each row becomes one episode of its cluster's task.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(FeatureMatrix, DatasetManifest)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.dim();
    let total: usize = spec.clusters.iter().map(|c| c.count).sum();
    let mut data = Vec::with_capacity(total * dim);
    let mut episodes = Vec::with_capacity(total);
    for c in &spec.clusters {
        for _ in 0..c.count {
            data.extend(draw_point(&mut rng, &c.center, c.spread));
            episodes.push(EpisodeRecord {
                episode_id: episodes.len() as u64,
                task_id: c.task_id,
                length: c.mean_length.round() as usize,
                frame_refs: None,
            });
        }
    }
    let x = FeatureMatrix::new(total, dim, data)?;
    let manifest = DatasetManifest {
        name: "synthetic".into(),
        feature_file: PathBuf::from("synthetic.edmf"),
        task_count: spec.task_count(),
        episodes,
        notes: Some(format!("seed {}", spec.seed)),
        base_dir: None,
    };
    manifest.validate()?;
    Ok((x, manifest))
}
