//! Tiled squared-distance evaluation with a bounded working set.
//!
//! Rows are split into blocks of `block_rows`. A tile is the squared-distance
//! matrix between two row blocks, computed as `|a|² + |b|² - 2 a·b` with a
//! GEMM on copies of both blocks centered at their joint mean. Pairs whose
//! result falls below [`REFINE_REL`] of the centered norms are recomputed by
//! direct differencing, so exact duplicates come out as exactly 0.
//!
//! Every per-row reduction runs over column blocks in ascending order and,
//! within a tile, over columns in ascending order. Worker count only decides
//! which thread computes a tile, never the order of additions, so results are
//! bit-identical for any thread count.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::kernel::sq_dist;

/// Default ceiling on the working set of the blocked estimators.
pub const DEFAULT_MEMORY_BUDGET: usize = 512 << 20;

const MAX_BLOCK: usize = 2048;
const MIN_BLOCK: usize = 8;
const REFINE_REL: f64 = 1e-3;
const F64: usize = std::mem::size_of::<f64>();

/// Block layout chosen to fit a memory budget.
///
/// The block size depends only on the input shape and the budget, never on the
/// worker count; the budget instead caps how many tiles are in flight at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    pub block_rows: usize,
    pub blocks: usize,
    /// Maximum number of tiles computed concurrently.
    pub concurrency: usize,
    /// Upper bound on bytes held by the estimator beyond the input matrix.
    pub peak_bytes: usize,
}

impl BlockPlan {
    fn scratch_bytes(b: usize, dim: usize) -> usize {
        // two centered row blocks plus one tile
        (2 * b * dim + b * b) * F64
    }

    /// Layout for the symmetric pair reduction (each unordered block pair visited once).
    pub fn symmetric(n: usize, dim: usize, budget: usize) -> Result<Self> {
        Self::choose(n, dim, budget, |b, blocks| {
            // per-pair row and column partials, plus final sums
            blocks * (blocks + 1) * b * F64 + n * F64
        })
    }

    /// Layout for a row sweep holding `state_bytes` per row.
    pub fn sweep(n: usize, dim: usize, budget: usize, state_bytes: usize) -> Result<Self> {
        Self::choose(n, dim, budget, |_, _| n * state_bytes)
    }

    /// Fixed layout, ignoring any budget.
    pub fn with_block_rows(n: usize, block_rows: usize) -> Self {
        let block_rows = block_rows.clamp(1, n.max(1));
        Self {
            block_rows,
            blocks: n.div_ceil(block_rows),
            concurrency: rayon::current_num_threads().max(1),
            peak_bytes: 0,
        }
    }

    fn choose(n: usize, dim: usize, budget: usize, extra: impl Fn(usize, usize) -> usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("no rows to tile"));
        }
        let mut b = n.min(MAX_BLOCK);
        let mut smallest_need = usize::MAX;
        loop {
            let blocks = n.div_ceil(b);
            let scratch = Self::scratch_bytes(b, dim);
            let fixed = extra(b, blocks);
            let need = scratch + fixed;
            if need <= budget {
                let fit = (budget - fixed) / scratch;
                let concurrency = fit.min(rayon::current_num_threads()).max(1);
                return Ok(Self {
                    block_rows: b,
                    blocks,
                    concurrency,
                    peak_bytes: concurrency * scratch + fixed,
                });
            }
            smallest_need = smallest_need.min(need);
            if b <= MIN_BLOCK {
                return Err(Error::MemoryBudget {
                    budget,
                    needed: smallest_need,
                });
            }
            b = (b / 2).max(MIN_BLOCK);
        }
    }

    fn range(&self, block: usize, n: usize) -> Range<usize> {
        let start = block * self.block_rows;
        start..(start + self.block_rows).min(n)
    }
}

struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    an: Vec<f64>,
    bn: Vec<f64>,
    tile: Vec<f64>,
}

impl Scratch {
    fn new() -> Self {
        Self {
            a: Vec::new(),
            b: Vec::new(),
            an: Vec::new(),
            bn: Vec::new(),
            tile: Vec::new(),
        }
    }

    /// Fills `self.tile` with squared distances between `rows` and `cols`, row-major.
    fn compute(&mut self, x: &FeatureMatrix, rows: Range<usize>, cols: Range<usize>) {
        let dim = x.dim();
        let (m, k) = (rows.len(), cols.len());

        let mut center = vec![0.0; dim];
        for i in rows.clone().chain(cols.clone()) {
            for (c, v) in center.iter_mut().zip(x.row(i)) {
                *c += v;
            }
        }
        let count = (m + k) as f64;
        center.iter_mut().for_each(|c| *c /= count);

        fn fill(dst: &mut Vec<f64>, norms: &mut Vec<f64>, x: &FeatureMatrix, r: Range<usize>, center: &[f64]) {
            dst.clear();
            norms.clear();
            for i in r {
                let mut nrm = 0.0;
                for (v, c) in x.row(i).iter().zip(center) {
                    let d = v - c;
                    dst.push(d);
                    nrm += d * d;
                }
                norms.push(nrm);
            }
        }
        fill(&mut self.a, &mut self.an, x, rows.clone(), &center);
        fill(&mut self.b, &mut self.bn, x, cols.clone(), &center);

        self.tile.clear();
        self.tile.resize(m * k, 0.0);
        // SAFETY: a is m×dim row-major, b is k×dim row-major read as dim×k
        // (row stride 1, column stride dim), tile is m×k row-major; all
        // buffers hold exactly that many elements.
        unsafe {
            matrixmultiply::dgemm(
                m,
                dim,
                k,
                1.0,
                self.a.as_ptr(),
                dim as isize,
                1,
                self.b.as_ptr(),
                1,
                dim as isize,
                0.0,
                self.tile.as_mut_ptr(),
                k as isize,
                1,
            );
        }

        for (li, i) in rows.enumerate() {
            let ni = self.an[li];
            let out = &mut self.tile[li * k..(li + 1) * k];
            for (lj, j) in cols.clone().enumerate() {
                if i == j {
                    out[lj] = 0.0;
                    continue;
                }
                let scale = ni + self.bn[lj];
                let d2 = scale - 2.0 * out[lj];
                out[lj] = if d2 < REFINE_REL * scale {
                    sq_dist(&self.a[li * dim..(li + 1) * dim], &self.b[lj * dim..(lj + 1) * dim])
                } else {
                    d2
                };
            }
        }
    }
}

/// For every row `i`, `Σ_j weight(d²(i, j))` over all rows `j` (including `i`).
///
/// Each unordered block pair is computed once; its row and column partial sums
/// are kept and folded per row in ascending column-block order.
pub(crate) fn symmetric_row_sums<W>(x: &FeatureMatrix, plan: &BlockPlan, weight: W) -> Vec<f64>
where
    W: Fn(f64) -> f64 + Sync,
{
    let n = x.rows();
    let nb = plan.blocks;
    let pairs: Vec<(usize, usize)> = (0..nb).flat_map(|i| (i..nb).map(move |j| (i, j))).collect();

    let mut partials: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(pairs.len());
    for wave in pairs.chunks(plan.concurrency.max(1)) {
        let done: Vec<_> = wave
            .par_iter()
            .map(|&(bi, bj)| {
            let mut scratch = Scratch::new();
            let s = &mut scratch;
            let rows = plan.range(bi, n);
            let cols = plan.range(bj, n);
            s.compute(x, rows.clone(), cols.clone());
            let k = cols.len();
            let mut row_part = vec![0.0; rows.len()];
            let mut col_part = if bi == bj { Vec::new() } else { vec![0.0; k] };
            for (li, rp) in row_part.iter_mut().enumerate() {
                let tile_row = &s.tile[li * k..(li + 1) * k];
                let mut acc = 0.0;
                for (lj, &d2) in tile_row.iter().enumerate() {
                    let w = weight(d2);
                    acc += w;
                    if bi != bj {
                        col_part[lj] += w;
                    }
                }
                *rp = acc;
            }
            (row_part, col_part)
        })
        .collect();
        partials.extend(done);
    }

    let mut index = vec![usize::MAX; nb * nb];
    for (p, &(bi, bj)) in pairs.iter().enumerate() {
        index[bi * nb + bj] = p;
    }

    let mut sums = vec![0.0; n];
    for bj in 0..nb {
        let rows = plan.range(bj, n);
        for (li, i) in rows.enumerate() {
            let mut acc = 0.0;
            for other in 0..nb {
                acc += if other < bj {
                    partials[index[other * nb + bj]].1[li]
                } else {
                    partials[index[bj * nb + other]].0[li]
                };
            }
            sums[i] = acc;
        }
    }
    sums
}

/// Visits every `(i, j, d²)` with `j` ascending for each row `i`, folding into per-row state.
pub(crate) fn row_sweep<S, I, V>(x: &FeatureMatrix, plan: &BlockPlan, init: I, visit: V) -> Vec<S>
where
    S: Send,
    I: Fn(usize) -> S + Sync,
    V: Fn(&mut S, usize, f64) + Sync,
{
    let n = x.rows();
    let nb = plan.blocks;
    let blocks: Vec<usize> = (0..nb).collect();
    let mut per_block: Vec<Vec<S>> = Vec::with_capacity(nb);
    for wave in blocks.chunks(plan.concurrency.max(1)) {
        let done: Vec<Vec<S>> = wave
            .par_iter()
            .map(|&bi| {
            let mut scratch = Scratch::new();
            let s = &mut scratch;
            let rows = plan.range(bi, n);
            let mut states: Vec<S> = rows.clone().map(&init).collect();
            for bj in 0..nb {
                let cols = plan.range(bj, n);
                s.compute(x, rows.clone(), cols.clone());
                let k = cols.len();
                for (li, st) in states.iter_mut().enumerate() {
                    for (lj, &d2) in s.tile[li * k..(li + 1) * k].iter().enumerate() {
                        visit(st, cols.start + lj, d2);
                    }
                }
            }
            states
        })
        .collect();
        per_block.extend(done);
    }
    per_block.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, d: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0) + 5.0).collect();
        FeatureMatrix::new(n, d, data).unwrap()
    }

    #[test]
    fn tiles_match_direct_differences() {
        let x = random(37, 11, 1);
        let mut s = Scratch::new();
        s.compute(&x, 3..20, 10..37);
        for (li, i) in (3..20).enumerate() {
            for (lj, j) in (10..37).enumerate() {
                let want = sq_dist(x.row(i), x.row(j));
                let got = s.tile[li * 27 + lj];
                assert!((got - want).abs() <= 1e-12 * (1.0 + want), "({i},{j}) {got} vs {want}");
                if i == j {
                    assert_eq!(got, 0.0);
                }
            }
        }
    }

    #[test]
    fn duplicates_are_exactly_zero() {
        let mut x = random(5, 64, 2);
        let r = x.row(1).to_vec();
        x.push_row(&r).unwrap();
        let mut s = Scratch::new();
        s.compute(&x, 0..6, 0..6);
        assert_eq!(s.tile[6 + 5], 0.0);
        assert_eq!(s.tile[5 * 6 + 1], 0.0);
    }

    #[test]
    fn row_sums_match_naive_for_every_block_size() {
        let x = random(53, 7, 3);
        let naive: Vec<f64> = (0..53)
            .map(|i| (0..53).map(|j| (-sq_dist(x.row(i), x.row(j))).exp()).sum())
            .collect();
        for b in [8, 16, 53] {
            let plan = BlockPlan::with_block_rows(53, b);
            let sums = symmetric_row_sums(&x, &plan, |d2| (-d2).exp());
            for (a, w) in sums.iter().zip(&naive) {
                assert!((a - w).abs() < 1e-12, "block {b}: {a} vs {w}");
            }
        }
    }

    #[test]
    fn sweep_visits_all_columns_in_order() {
        let x = random(20, 3, 4);
        let plan = BlockPlan::with_block_rows(20, 8);
        let seen = row_sweep(&x, &plan, |_| Vec::new(), |v: &mut Vec<usize>, j, _| v.push(j));
        assert_eq!(seen.len(), 20);
        for v in seen {
            assert_eq!(v, (0..20).collect::<Vec<_>>());
        }
    }

    #[test]
    fn plan_respects_budget() {
        let plan = BlockPlan::symmetric(100_000, 1536, 512 << 20).unwrap();
        assert!(plan.peak_bytes <= 512 << 20);
        assert!(plan.block_rows < 20_000);
        assert!(matches!(
            BlockPlan::symmetric(100_000, 1536, 1 << 20),
            Err(Error::MemoryBudget { .. })
        ));
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let x = random(300, 16, 5);
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let plan = BlockPlan::symmetric(300, 16, 1 << 20).unwrap();
                symmetric_row_sums(&x, &plan, |d2| (-d2 / 8.0).exp())
            })
        };
        let a = run(1);
        let b = run(4);
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
