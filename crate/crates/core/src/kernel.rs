//! Pairwise distances and the Gaussian kernel.
//!
//! The dense helpers here materialize `n × n` matrices and refuse inputs with
//! more than [`DENSE_ROW_LIMIT`] rows. The estimators in [`crate::diversity`]
//! go through [`crate::blocked`] instead and never hold more than one tile.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Largest row count for which a dense `n × n` matrix is built.
pub const DENSE_ROW_LIMIT: usize = 20_000;

/// `exp(-x)` is exactly `0.0` in `f64` beyond this exponent.
pub(crate) const EXP_UNDERFLOW: f64 = 745.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelConvention {
    /// `exp(-d² / 2σ²)`; self-similarity is 1.
    #[default]
    Unnormalized,
    /// `(2πσ²)^(-D/2) · exp(-d² / 2σ²)`, a proper density in `D` dimensions.
    Normalized,
}

impl std::fmt::Display for KernelConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelConvention::Unnormalized => "unnormalized",
            KernelConvention::Normalized => "normalized",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub sigma: f64,
    pub convention: KernelConvention,
}

impl KernelConfig {
    pub fn unnormalized(sigma: f64) -> Self {
        Self {
            sigma,
            convention: KernelConvention::Unnormalized,
        }
    }

    pub fn normalized(sigma: f64) -> Self {
        Self {
            sigma,
            convention: KernelConvention::Normalized,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma > 0.0 && self.sigma.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "kernel sigma must be > 0, got {}",
                self.sigma
            )))
        }
    }

    /// `ln K(0)` in `dim` dimensions.
    pub fn log_peak(&self, dim: usize) -> f64 {
        match self.convention {
            KernelConvention::Unnormalized => 0.0,
            KernelConvention::Normalized => {
                -(dim as f64 / 2.0) * (2.0 * PI * self.sigma * self.sigma).ln()
            }
        }
    }

    /// `1 / 2σ²`.
    pub(crate) fn inv_two_sigma_sq(&self) -> f64 {
        1.0 / (2.0 * self.sigma * self.sigma)
    }

    /// Unnormalized kernel value at squared distance `d2`.
    #[inline]
    pub fn shape(&self, d2: f64) -> f64 {
        let x = d2 * self.inv_two_sigma_sq();
        if x > EXP_UNDERFLOW {
            0.0
        } else {
            (-x).exp()
        }
    }

    /// Kernel value at squared distance `d2` under this convention.
    pub fn eval_sq(&self, d2: f64, dim: usize) -> f64 {
        (self.log_peak(dim) - d2 * self.inv_two_sigma_sq()).exp()
    }
}

/// Dense symmetric `n × n` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dense(x: &FeatureMatrix) -> Result<()> {
    if x.rows() > DENSE_ROW_LIMIT {
        return Err(Error::TooLarge {
            rows: x.rows(),
            limit: DENSE_ROW_LIMIT,
        });
    }
    Ok(())
}

fn squared_distance_matrix(x: &FeatureMatrix) -> SquareMatrix {
    let n = x.rows();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d2 = sq_dist(x.row(i), x.row(j));
            data[i * n + j] = d2;
            data[j * n + i] = d2;
        }
    }
    SquareMatrix { n, data }
}

/// Euclidean distance matrix, each unordered pair computed once.
pub fn pairwise_distances(x: &FeatureMatrix) -> Result<SquareMatrix> {
    check_dense(x)?;
    let mut m = squared_distance_matrix(x);
    m.data.iter_mut().for_each(|v| *v = v.sqrt());
    Ok(m)
}

pub fn gaussian_kernel_matrix(x: &FeatureMatrix, cfg: &KernelConfig) -> Result<SquareMatrix> {
    cfg.validate()?;
    check_dense(x)?;
    let mut m = squared_distance_matrix(x);
    let dim = x.dim();
    m.data.iter_mut().for_each(|v| *v = cfg.eval_sq(*v, dim));
    Ok(m)
}

/// Lower median of the `n(n-1)/2` pairwise distances.
pub fn median_bandwidth(x: &FeatureMatrix) -> Result<f64> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "median bandwidth needs at least 2 rows".into(),
        ));
    }
    check_dense(x)?;
    let mut d2 = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d2.push(sq_dist(x.row(i), x.row(j)));
        }
    }
    let k = (d2.len() - 1) / 2;
    let (_, median, _) = d2.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    let median = median.sqrt();
    if median > 0.0 {
        Ok(median)
    } else {
        Err(Error::DegenerateBandwidth)
    }
}
