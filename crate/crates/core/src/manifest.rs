//! Dataset manifests and the 3-frame unified representation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_id: u64,
    pub task_id: usize,
    /// Operation steps in the episode.
    pub length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_refs: Option<Vec<PathBuf>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub feature_file: PathBuf,
    pub task_count: usize,
    pub episodes: Vec<EpisodeRecord>,
    /// Free-form metadata (resolution, camera views, action dim).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    /// Directory relative paths are resolved against; the manifest's own directory when loaded.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.episodes.is_empty() {
            return Err(Error::Empty("manifest has no episodes"));
        }
        for (i, ep) in self.episodes.iter().enumerate() {
            if ep.task_id >= self.task_count {
                return Err(Error::TaskIdOutOfRange {
                    episode: i,
                    task_id: ep.task_id,
                    task_count: self.task_count,
                });
            }
            if ep.length < 1 {
                return Err(Error::EmptyEpisode { episode: i });
            }
            if let Some(frames) = &ep.frame_refs {
                if frames.len() != ep.length {
                    return Err(Error::FrameCountMismatch {
                        episode: i,
                        frames: frames.len(),
                        length: ep.length,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn feature_path(&self) -> PathBuf {
        self.resolve(&self.feature_file)
    }

    pub fn task_ids(&self) -> Vec<usize> {
        self.episodes.iter().map(|e| e.task_id).collect()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.episodes.iter().map(|e| e.length).collect()
    }
}

pub fn parse_manifest(text: &str, origin: &Path) -> Result<DatasetManifest> {
    let m: DatasetManifest = serde_json::from_str(text).map_err(|e| Error::Manifest {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    m.validate()?;
    Ok(m)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m = parse_manifest(&text, path)?;
    m.base_dir = Some(
        path.parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    );
    Ok(m)
}

pub fn save_manifest(path: impl AsRef<Path>, m: &DatasetManifest) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(m).expect("manifest serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Index of the middle keyframe of a `t`-frame episode.
pub fn mid_index(t: usize) -> usize {
    t.saturating_sub(1) / 2
}

/// Concatenates the first, middle and last frame embeddings of an episode.
pub fn assemble_unified_feature<F: AsRef<[f64]>>(frames: &[F]) -> Result<Vec<f64>> {
    let first = frames.first().ok_or(Error::Empty("episode has no frames"))?;
    let d = first.as_ref().len();
    for (i, f) in frames.iter().enumerate() {
        let f = f.as_ref();
        if f.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "frame {i} has dim {}, expected {d}",
                f.len()
            )));
        }
        if let Some(col) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col });
        }
    }
    let t = frames.len();
    let mut out = Vec::with_capacity(3 * d);
    for idx in [0, mid_index(t), t - 1] {
        out.extend_from_slice(frames[idx].as_ref());
    }
    Ok(out)
}
