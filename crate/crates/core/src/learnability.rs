//! Task-level learnability: memorization ease `E_t`, expressiveness `R_t`,
//! their geometric blend `L_raw = R^β · E^(1-β)`, task priors `π_t`, the
//! centroid transfer kernel `I_it` and the dataset mean of
//! `L_adj[t] = π_t · Σ_i I_it · L_raw[i]`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blocked::{self, BlockPlan, DEFAULT_MEMORY_BUDGET};
use crate::config::Hyperparams;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::kernel::{sq_dist, KernelConfig};
use crate::manifest::DatasetManifest;

/// Eigenvalues below this fraction of the spectrum total count as zero.
const EIGEN_REL_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TaskGroup {
    pub task_id: usize,
    pub row_indices: Vec<usize>,
    pub mean_length: f64,
    pub centroid: Vec<f64>,
}

/// Splits the rows of `x` by the manifest's task ids, in ascending task order.
pub fn group_tasks(manifest: &DatasetManifest, x: &FeatureMatrix) -> Result<Vec<TaskGroup>> {
    if x.rows() != manifest.episodes.len() {
        return Err(Error::RowCountMismatch {
            expected: manifest.episodes.len(),
            found: x.rows(),
        });
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); manifest.task_count];
    let mut lengths = vec![0usize; manifest.task_count];
    for (i, ep) in manifest.episodes.iter().enumerate() {
        let slot = members.get_mut(ep.task_id).ok_or(Error::TaskIdOutOfRange {
            episode: i,
            task_id: ep.task_id,
            task_count: manifest.task_count,
        })?;
        slot.push(i);
        lengths[ep.task_id] += ep.length;
    }
    members
        .into_iter()
        .zip(lengths)
        .enumerate()
        .map(|(task_id, (rows, total_len))| {
            if rows.is_empty() {
                return Err(Error::EmptyTask(task_id));
            }
            let centroid = centroid(x, &rows);
            Ok(TaskGroup {
                task_id,
                mean_length: total_len as f64 / rows.len() as f64,
                row_indices: rows,
                centroid,
            })
        })
        .collect()
}

fn centroid(x: &FeatureMatrix, rows: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; x.dim()];
    for &i in rows {
        for (acc, v) in c.iter_mut().zip(x.row(i)) {
            *acc += v;
        }
    }
    let n = rows.len() as f64;
    c.iter_mut().for_each(|v| *v /= n);
    c
}

/// `E = (1 / ln(1 + L̄)) · (1/N²) Σ_ij exp(-|x_i - x_j|² / 2σ_t²)`.
pub fn memorization_ease(task: &FeatureMatrix, mean_length: f64, sigma_task: f64) -> Result<f64> {
    if !(mean_length >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "mean episode length must be >= 1, got {mean_length}"
        )));
    }
    let cfg = KernelConfig::unnormalized(sigma_task);
    cfg.validate()?;
    let n = task.rows();
    let plan = BlockPlan::symmetric(n, task.dim(), DEFAULT_MEMORY_BUDGET)?;
    let sums = blocked::symmetric_row_sums(task, &plan, |d2| cfg.shape(d2));
    let pair_mean = sums.iter().sum::<f64>() / (n as f64 * n as f64);
    Ok(pair_mean / mean_length.ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expressiveness {
    /// `R = H_dir · C_spatial`.
    pub r: f64,
    /// Entropy of the normalized covariance spectrum.
    pub directional: f64,
    /// `N · tanh(d̄ / scale)`.
    pub spatial: f64,
    /// Mean distance over unordered pairs.
    pub mean_pairwise_distance: f64,
}

/// Eigenvalues of the unbiased sample covariance of `task`, clamped at 0.
///
/// When `N - 1 < D` the nonzero spectrum is taken from the `N × N` Gram matrix
/// of the centered rows, which shares it with the `D × D` covariance.
pub fn covariance_spectrum(task: &FeatureMatrix) -> Vec<f64> {
    let (n, d) = (task.rows(), task.dim());
    if n < 2 {
        return vec![0.0; d];
    }
    let all: Vec<usize> = (0..n).collect();
    let mu = centroid(task, &all);
    let centered = DMatrix::from_fn(n, d, |i, j| task.row(i)[j] - mu[j]);
    let denom = (n - 1) as f64;
    let m = if n - 1 < d {
        &centered * centered.transpose() / denom
    } else {
        centered.transpose() * &centered / denom
    };
    m.symmetric_eigenvalues().iter().map(|&l| l.max(0.0)).collect()
}

/// Shannon entropy (nats) of a nonnegative spectrum normalized to sum 1.
/// Eigenvalues below `1e-12` of the total are treated as exact zeros.
pub fn spectral_entropy(eigenvalues: &[f64]) -> f64 {
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let kept: Vec<f64> = eigenvalues.iter().copied().filter(|&l| l > EIGEN_REL_ZERO * total).collect();
    let kept_total: f64 = kept.iter().sum();
    let mut h = 0.0;
    for l in kept {
        let p = l / kept_total;
        h -= p * p.ln();
    }
    h
}

fn mean_pairwise_distance(task: &FeatureMatrix) -> Result<f64> {
    let n = task.rows();
    if n < 2 {
        return Ok(0.0);
    }
    let plan = BlockPlan::symmetric(n, task.dim(), DEFAULT_MEMORY_BUDGET)?;
    let sums = blocked::symmetric_row_sums(task, &plan, f64::sqrt);
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(sums.iter().sum::<f64>() / 2.0 / pairs)
}

/// Covariance-spectrum entropy times tanh-scaled spatial coverage.
pub fn expressiveness(task: &FeatureMatrix, spatial_scale: f64, variance_floor: f64) -> Result<Expressiveness> {
    if !(spatial_scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spatial scale must be > 0, got {spatial_scale}"
        )));
    }
    let n = task.rows();
    let spectrum = covariance_spectrum(task);
    let total: f64 = spectrum.iter().sum();
    let directional = if n < 2 || total < variance_floor {
        0.0
    } else {
        spectral_entropy(&spectrum)
    };
    let d_bar = mean_pairwise_distance(task)?;
    let spatial = n as f64 * (d_bar / spatial_scale).tanh();
    let r = if n < 2 || total < variance_floor {
        0.0
    } else {
        directional * spatial
    };
    Ok(Expressiveness {
        r,
        directional,
        spatial,
        mean_pairwise_distance: d_bar,
    })
}

/// `R^β · E^(1-β)`.
pub fn raw_learnability(r: f64, e: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in [0, 1], got {beta}"
        )));
    }
    if !(r >= 0.0) || !(e > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need R >= 0 and E > 0, got R = {r}, E = {e}"
        )));
    }
    Ok(r.powf(beta) * e.powf(1.0 - beta))
}

/// `π_t = tanh(N_t / (Σ N · σ_model))`.
pub fn task_priors(counts: &[usize], sigma_model: f64) -> Result<Vec<f64>> {
    if !(sigma_model > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma_model must be > 0, got {sigma_model}"
        )));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::Empty("task sample counts sum to 0"));
    }
    let scale = total as f64 * sigma_model;
    Ok(counts.iter().map(|&c| (c as f64 / scale).tanh()).collect())
}

/// `I[i][t] = exp(-|μ_i - μ_t|² / 2σ_c²)`, symmetric with unit diagonal.
pub fn task_transfer_matrix<C: AsRef<[f64]>>(centroids: &[C], sigma_center: f64) -> Result<Vec<Vec<f64>>> {
    let cfg = KernelConfig::unnormalized(sigma_center);
    cfg.validate()?;
    let t = centroids.len();
    if t == 0 {
        return Err(Error::Empty("no task centroids"));
    }
    let d = centroids[0].as_ref().len();
    if centroids.iter().any(|c| c.as_ref().len() != d) {
        return Err(Error::DimensionMismatch("centroids differ in dimension".into()));
    }
    let mut m = vec![vec![1.0; t]; t];
    for i in 0..t {
        for j in i + 1..t {
            let k = cfg.shape(sq_dist(centroids[i].as_ref(), centroids[j].as_ref()));
            m[i][j] = k;
            m[j][i] = k;
        }
    }
    Ok(m)
}

/// Per-task `π_t · Σ_i I[i][t] · L_raw[i]` and their mean.
pub fn adjusted_learnability(l_raw: &[f64], transfer: &[Vec<f64>], priors: &[f64]) -> Result<(Vec<f64>, f64)> {
    let t = l_raw.len();
    if t == 0 {
        return Err(Error::Empty("no tasks"));
    }
    if priors.len() != t || transfer.len() != t || transfer.iter().any(|r| r.len() != t) {
        return Err(Error::DimensionMismatch(format!(
            "{t} raw scores, {} priors, {}x? transfer matrix",
            priors.len(),
            transfer.len()
        )));
    }
    let adjusted: Vec<f64> = (0..t)
        .map(|task| {
            let mixed: f64 = (0..t).map(|i| transfer[i][task] * l_raw[i]).sum();
            priors[task] * mixed
        })
        .collect();
    let mean = adjusted.iter().sum::<f64>() / t as f64;
    Ok((adjusted, mean))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task_id: usize,
    pub samples: usize,
    pub mean_length: f64,
    pub e: f64,
    pub r: f64,
    pub directional: f64,
    pub spatial: f64,
    pub mean_pairwise_distance: f64,
    pub l_raw: f64,
    pub prior: f64,
    pub l_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnabilityReport {
    pub tasks: Vec<TaskReport>,
    pub transfer_matrix: Vec<Vec<f64>>,
    pub l_dataset: f64,
}

impl LearnabilityReport {
    pub fn l_raw(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.l_raw).collect()
    }

    pub fn l_adjusted(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.l_adjusted).collect()
    }
}

pub fn learnability_report(
    manifest: &DatasetManifest,
    x: &FeatureMatrix,
    hp: &Hyperparams,
) -> Result<LearnabilityReport> {
    hp.validate()?;
    let groups = group_tasks(manifest, x)?;
    let mut tasks = Vec::with_capacity(groups.len());
    for g in &groups {
        let rows = x.select_rows(&g.row_indices)?;
        let e = memorization_ease(&rows, g.mean_length, hp.sigma_task)?;
        let ex = expressiveness(&rows, hp.spatial_scale(), hp.variance_floor)?;
        let l_raw = raw_learnability(ex.r, e, hp.beta)?;
        tasks.push(TaskReport {
            task_id: g.task_id,
            samples: g.row_indices.len(),
            mean_length: g.mean_length,
            e,
            r: ex.r,
            directional: ex.directional,
            spatial: ex.spatial,
            mean_pairwise_distance: ex.mean_pairwise_distance,
            l_raw,
            prior: 0.0,
            l_adjusted: 0.0,
        });
    }
    let counts: Vec<usize> = tasks.iter().map(|t| t.samples).collect();
    let priors = task_priors(&counts, hp.sigma_model)?;
    let centroids: Vec<&[f64]> = groups.iter().map(|g| g.centroid.as_slice()).collect();
    let transfer = task_transfer_matrix(&centroids, hp.sigma_center)?;
    let l_raw: Vec<f64> = tasks.iter().map(|t| t.l_raw).collect();
    let (adjusted, l_dataset) = adjusted_learnability(&l_raw, &transfer, &priors)?;
    for ((t, p), a) in tasks.iter_mut().zip(priors).zip(adjusted) {
        t.prior = p;
        t.l_adjusted = a;
    }
    Ok(LearnabilityReport {
        tasks,
        transfer_matrix: transfer,
        l_dataset,
    })
}
