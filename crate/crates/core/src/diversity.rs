//! Parzen-window diversity entropy and its large-`n` approximations.
//!
//! For features `x_1..x_n` the estimate is
//!
//! ```text
//! H = -(1/n) Σ_i ln( (1/n) Σ_j K_σ(x_i, x_j) + ε )
//! ```
//!
//! in nats. Kernel sums are always accumulated on the unnormalized kernel
//! `exp(-d²/2σ²)`; the normalized convention adds `-ln K(0) = (D/2) ln(2πσ²)`
//! afterwards, which is the same quantity without overflowing `K(0)` in high
//! dimension. The log guard `ε` is applied on the unnormalized scale.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blocked::{self, BlockPlan, DEFAULT_MEMORY_BUDGET};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::kernel::{KernelConfig, KernelConvention};

/// Default log guard.
pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Method {
    Exact,
    Subsampled { m: usize, repeats: usize, seed: u64 },
    Truncated { tau: f64 },
    Knn { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    /// Entropy in nats.
    pub value: f64,
    /// Sample count the estimate is taken over.
    pub n: usize,
    pub sigma: f64,
    pub convention: KernelConvention,
    pub method: Method,
    pub bounds: (f64, f64),
}

/// Closed-form range of the estimator for `n` samples in `dim` dimensions.
///
/// Unnormalized: `(0, ln n)`. Normalized: `(c, c + ln n)` with `c = (D/2) ln(2πσ²)`.
pub fn entropy_bounds(n: usize, dim: usize, cfg: &KernelConfig) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Empty("entropy bounds need n >= 1"));
    }
    cfg.validate()?;
    let lower = -cfg.log_peak(dim);
    Ok((lower, lower + (n as f64).ln()))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1e-6 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1e-6], got {epsilon}"
        )))
    }
}

/// Entropy from per-row unnormalized kernel sums, summed in row order.
fn entropy_from_sums(sums: &[f64], dim: usize, cfg: &KernelConfig, epsilon: f64) -> f64 {
    let n = sums.len() as f64;
    let mut acc = 0.0;
    for s in sums {
        acc += (s / n + epsilon).ln();
    }
    -acc / n - cfg.log_peak(dim)
}

fn result(
    value: f64,
    n: usize,
    dim: usize,
    cfg: &KernelConfig,
    method: Method,
) -> Result<EntropyResult> {
    Ok(EntropyResult {
        value,
        n,
        sigma: cfg.sigma,
        convention: cfg.convention,
        method,
        bounds: entropy_bounds(n, dim, cfg)?,
    })
}

pub fn diversity_entropy(x: &FeatureMatrix, cfg: &KernelConfig, epsilon: f64) -> Result<EntropyResult> {
    diversity_entropy_with_budget(x, cfg, epsilon, DEFAULT_MEMORY_BUDGET)
}

/// Exact estimate holding at most `memory_budget` bytes of working set.
pub fn diversity_entropy_with_budget(
    x: &FeatureMatrix,
    cfg: &KernelConfig,
    epsilon: f64,
    memory_budget: usize,
) -> Result<EntropyResult> {
    let plan = BlockPlan::symmetric(x.rows(), x.dim(), memory_budget)?;
    diversity_entropy_with_plan(x, cfg, epsilon, &plan)
}

pub fn diversity_entropy_with_plan(
    x: &FeatureMatrix,
    cfg: &KernelConfig,
    epsilon: f64,
    plan: &BlockPlan,
) -> Result<EntropyResult> {
    cfg.validate()?;
    check_epsilon(epsilon)?;
    let sums = blocked::symmetric_row_sums(x, plan, |d2| cfg.shape(d2));
    let value = entropy_from_sums(&sums, x.dim(), cfg, epsilon);
    result(value, x.rows(), x.dim(), cfg, Method::Exact)
}

/// Mean of exact estimates over `repeats` uniform draws of `m` rows without replacement.
pub fn diversity_entropy_subsampled(
    x: &FeatureMatrix,
    cfg: &KernelConfig,
    epsilon: f64,
    m: usize,
    repeats: usize,
    seed: u64,
) -> Result<EntropyResult> {
    let n = x.rows();
    if m < 1 || m > n {
        return Err(Error::InvalidParameter(format!(
            "subsample size m = {m} must lie in [1, {n}]"
        )));
    }
    if repeats < 1 {
        return Err(Error::InvalidParameter("repeats must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..repeats {
        let mut rows = index::sample(&mut rng, n, m).into_vec();
        rows.sort_unstable();
        let sub = x.select_rows(&rows)?;
        total += diversity_entropy(&sub, cfg, epsilon)?.value;
    }
    result(
        total / repeats as f64,
        m,
        x.dim(),
        cfg,
        Method::Subsampled { m, repeats, seed },
    )
}

/// Exact estimate with every pair farther apart than `tau` contributing 0.
pub fn diversity_entropy_truncated(
    x: &FeatureMatrix,
    cfg: &KernelConfig,
    epsilon: f64,
    tau: f64,
) -> Result<EntropyResult> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
    }
    cfg.validate()?;
    check_epsilon(epsilon)?;
    let plan = BlockPlan::symmetric(x.rows(), x.dim(), DEFAULT_MEMORY_BUDGET)?;
    let tau2 = tau * tau;
    let sums = blocked::symmetric_row_sums(x, &plan, |d2| if d2 > tau2 { 0.0 } else { cfg.shape(d2) });
    let value = entropy_from_sums(&sums, x.dim(), cfg, epsilon);
    result(value, x.rows(), x.dim(), cfg, Method::Truncated { tau })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Neighbor {
    d2: f64,
    index: usize,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `k` nearest rows of every row (itself included), ascending by distance then index.
pub fn nearest_neighbors(x: &FeatureMatrix, k: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    let n = x.rows();
    if k < 1 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in [1, {n}]")));
    }
    let plan = BlockPlan::sweep(n, x.dim(), DEFAULT_MEMORY_BUDGET, 16 * (k + 1))?;
    let heaps = blocked::row_sweep(
        x,
        &plan,
        |_| BinaryHeap::with_capacity(k + 1),
        |heap: &mut BinaryHeap<Neighbor>, index, d2| {
            let cand = Neighbor { d2, index };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("k >= 1") {
                heap.pop();
                heap.push(cand);
            }
        },
    );
    Ok(heaps
        .into_iter()
        .map(|h| h.into_sorted_vec().into_iter().map(|nb| (nb.index, nb.d2)).collect())
        .collect())
}

/// Exact estimate with each density restricted to the point's `k` nearest neighbors.
pub fn diversity_entropy_knn(
    x: &FeatureMatrix,
    cfg: &KernelConfig,
    epsilon: f64,
    k: usize,
) -> Result<EntropyResult> {
    cfg.validate()?;
    check_epsilon(epsilon)?;
    let neighbors = nearest_neighbors(x, k)?;
    let sums: Vec<f64> = neighbors
        .iter()
        .map(|nbrs| nbrs.iter().map(|&(_, d2)| cfg.shape(d2)).sum())
        .collect();
    let value = entropy_from_sums(&sums, x.dim(), cfg, epsilon);
    result(value, x.rows(), x.dim(), cfg, Method::Knn { k })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(r: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(r).unwrap()
    }

    fn spread_points(n: usize, gap: f64) -> FeatureMatrix {
        FeatureMatrix::new(n, 2, (0..n).flat_map(|i| [i as f64 * gap, 0.0]).collect()).unwrap()
    }

    #[test]
    fn fifty_distant_samples_reach_ln_n() {
        let cfg = KernelConfig::unnormalized(0.1);
        let r = diversity_entropy(&spread_points(50, 1.0), &cfg, DEFAULT_EPSILON).unwrap();
        assert!((r.value - 50f64.ln()).abs() < 1e-9);
        assert!((r.value - 3.9120).abs() < 1e-3);
        assert_eq!(r.bounds, (0.0, 50f64.ln()));
    }

    #[test]
    fn identical_samples_have_zero_entropy() {
        let x = FeatureMatrix::new(7, 3, [0.3, -1.0, 2.0].repeat(7)).unwrap();
        let r = diversity_entropy(&x, &KernelConfig::unnormalized(0.1), DEFAULT_EPSILON).unwrap();
        assert!(r.value.abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn two_point_closed_form() {
        let sigma = 0.1;
        let d = sigma * (2.0 * 2f64.ln()).sqrt();
        let x = rows(&[&[0.0], &[d]]);
        let r = diversity_entropy(&x, &KernelConfig::unnormalized(sigma), DEFAULT_EPSILON).unwrap();
        assert!((r.value - (-(0.75f64).ln())).abs() < 1e-9);
        assert!((r.value - 0.287682).abs() < 1e-6);
    }

    #[test]
    fn bounds_examples() {
        assert_eq!(
            entropy_bounds(50, 5, &KernelConfig::unnormalized(0.1)).unwrap(),
            (0.0, 50f64.ln())
        );
        assert_eq!(entropy_bounds(1, 5, &KernelConfig::unnormalized(0.1)).unwrap(), (0.0, 0.0));
        let (lo, hi) = entropy_bounds(10, 2, &KernelConfig::normalized(1.0)).unwrap();
        assert!((lo - 1.837877).abs() < 1e-6);
        assert!((hi - 4.140462).abs() < 1e-6);
    }

    #[test]
    fn normalized_identical_samples_sit_on_lower_bound() {
        let x = FeatureMatrix::new(4, 3, vec![1.0; 12]).unwrap();
        let cfg = KernelConfig::normalized(0.5);
        let r = diversity_entropy(&x, &cfg, DEFAULT_EPSILON).unwrap();
        assert!((r.value - r.bounds.0).abs() < 1e-9);
    }

    #[test]
    fn subsample_of_everything_is_exact() {
        let x = spread_points(30, 0.05);
        let cfg = KernelConfig::unnormalized(0.1);
        let exact = diversity_entropy(&x, &cfg, DEFAULT_EPSILON).unwrap();
        let sub = diversity_entropy_subsampled(&x, &cfg, DEFAULT_EPSILON, 30, 3, 9).unwrap();
        assert!((exact.value - sub.value).abs() < 1e-12);
        let again = diversity_entropy_subsampled(&x, &cfg, DEFAULT_EPSILON, 12, 4, 9).unwrap();
        let twice = diversity_entropy_subsampled(&x, &cfg, DEFAULT_EPSILON, 12, 4, 9).unwrap();
        assert_eq!(again.value.to_bits(), twice.value.to_bits());
        assert!(diversity_entropy_subsampled(&x, &cfg, DEFAULT_EPSILON, 31, 1, 0).is_err());
    }

    #[test]
    fn truncation_extremes() {
        let x = spread_points(40, 0.03);
        let cfg = KernelConfig::unnormalized(0.1);
        let exact = diversity_entropy(&x, &cfg, DEFAULT_EPSILON).unwrap();
        let wide = diversity_entropy_truncated(&x, &cfg, DEFAULT_EPSILON, 10.0).unwrap();
        assert!((exact.value - wide.value).abs() < 1e-12);
        let tiny = diversity_entropy_truncated(&x, &cfg, DEFAULT_EPSILON, 1e-9).unwrap();
        assert!((tiny.value - 40f64.ln()).abs() < 1e-9);
        let mid = diversity_entropy_truncated(&x, &cfg, DEFAULT_EPSILON, 0.1).unwrap();
        assert!(mid.value >= exact.value);
        assert!(diversity_entropy_truncated(&x, &cfg, DEFAULT_EPSILON, 0.0).is_err());
    }

    #[test]
    fn knn_extremes() {
        let x = spread_points(25, 0.04);
        let cfg = KernelConfig::unnormalized(0.1);
        let exact = diversity_entropy(&x, &cfg, DEFAULT_EPSILON).unwrap();
        let full = diversity_entropy_knn(&x, &cfg, DEFAULT_EPSILON, 25).unwrap();
        assert!((exact.value - full.value).abs() < 1e-12);
        let one = diversity_entropy_knn(&x, &cfg, DEFAULT_EPSILON, 1).unwrap();
        assert!((one.value - 25f64.ln()).abs() < 1e-9);
        assert!(diversity_entropy_knn(&x, &cfg, DEFAULT_EPSILON, 0).is_err());
    }

    #[test]
    fn neighbors_are_sorted_and_include_self() {
        let x = rows(&[&[0.0], &[1.0], &[3.0], &[3.5]]);
        let nn = nearest_neighbors(&x, 2).unwrap();
        assert_eq!(nn[0][0].0, 0);
        assert_eq!(nn[0][1].0, 1);
        assert_eq!(nn[2][1].0, 3);
        assert_eq!(nn[3][1], (2, 0.25));
    }

    #[test]
    fn rejects_bad_epsilon() {
        let x = spread_points(3, 1.0);
        assert!(diversity_entropy(&x, &KernelConfig::unnormalized(0.1), 0.0).is_err());
        assert!(diversity_entropy(&x, &KernelConfig::unnormalized(-1.0), 1e-12).is_err());
    }
}
