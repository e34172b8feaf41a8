//! Independent reference implementations and pinned inputs shared by the
//! integration tests. Everything here is written as plain loops so that it
//! shares no code path with the library.
#![allow(dead_code, clippy::needless_range_loop)]

use edm_core::{DatasetManifest, FeatureMatrix, Hyperparams};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `clusters` Gaussian blobs of `per` rows with random unit-norm centers.
pub fn clustered(seed: u64, clusters: usize, per: usize, dim: usize, spread: f64) -> FeatureMatrix {
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(clusters * per * dim);
    for _ in 0..clusters {
        let mut c: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        c.iter_mut().for_each(|v| *v /= norm);
        for _ in 0..per {
            for &cv in &c {
                data.push(cv + spread * r.sample::<f64, _>(StandardNormal));
            }
        }
    }
    FeatureMatrix::new(clusters * per, dim, data).unwrap()
}

pub fn naive_entropy(x: &FeatureMatrix, sigma: f64, eps: f64) -> f64 {
    let n = x.rows();
    let mut total = 0.0;
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            let mut d2 = 0.0;
            for k in 0..x.dim() {
                let d = x.row(i)[k] - x.row(j)[k];
                d2 += d * d;
            }
            s += (-d2 / (2.0 * sigma * sigma)).exp();
        }
        total += (s / n as f64 + eps).ln();
    }
    -total / n as f64
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

#[derive(Debug, Clone)]
pub struct OracleTask {
    pub e: f64,
    pub r: f64,
    pub directional: f64,
    pub spatial: f64,
    pub mean_pairwise_distance: f64,
    pub l_raw: f64,
    pub prior: f64,
    pub l_adjusted: f64,
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub tasks: Vec<OracleTask>,
    pub transfer: Vec<Vec<f64>>,
    pub l_dataset: f64,
}

/// Learnability straight from the defining formulas, with the full `D × D`
/// covariance and Jacobi eigenvalues.
pub fn oracle_learnability(m: &DatasetManifest, x: &FeatureMatrix, hp: &Hyperparams) -> OracleReport {
    let d = x.dim();
    let t_count = m.task_count;
    let mut tasks = Vec::new();
    let mut centroids = Vec::new();
    let mut counts = Vec::new();
    for t in 0..t_count {
        let rows: Vec<&[f64]> = m
            .episodes
            .iter()
            .enumerate()
            .filter(|(_, e)| e.task_id == t)
            .map(|(i, _)| x.row(i))
            .collect();
        let lens: Vec<f64> = m.episodes.iter().filter(|e| e.task_id == t).map(|e| e.length as f64).collect();
        let n = rows.len();
        let nf = n as f64;
        let mean_len = lens.iter().sum::<f64>() / nf;

        let mut ksum = 0.0;
        let mut dsum = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d2: f64 = (0..d).map(|k| (rows[i][k] - rows[j][k]).powi(2)).sum();
                ksum += (-d2 / (2.0 * hp.sigma_task * hp.sigma_task)).exp();
                if i < j {
                    dsum += d2.sqrt();
                }
            }
        }
        let e = ksum / (nf * nf) / (1.0 + mean_len).ln();

        let mu: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / nf).collect();
        let (directional, d_bar) = if n < 2 {
            (0.0, 0.0)
        } else {
            let mut cov = vec![vec![0.0; d]; d];
            for r in &rows {
                for a in 0..d {
                    for b in 0..d {
                        cov[a][b] += (r[a] - mu[a]) * (r[b] - mu[b]) / (nf - 1.0);
                    }
                }
            }
            let eig: Vec<f64> = jacobi_eigenvalues(cov).into_iter().map(|v| v.max(0.0)).collect();
            let total: f64 = eig.iter().sum();
            let h = if total < hp.variance_floor {
                0.0
            } else {
                let kept: Vec<f64> = eig.iter().copied().filter(|&l| l > 1e-12 * total).collect();
                let kt: f64 = kept.iter().sum();
                kept.iter().map(|&l| -(l / kt) * (l / kt).ln()).sum()
            };
            (h, dsum / (nf * (nf - 1.0) / 2.0))
        };
        let spatial = nf * (d_bar / hp.spatial_scale.unwrap_or(hp.sigma_task)).tanh();
        let r = if n < 2 { 0.0 } else { directional * spatial };
        let l_raw = r.powf(hp.beta) * e.powf(1.0 - hp.beta);
        tasks.push(OracleTask {
            e,
            r,
            directional,
            spatial,
            mean_pairwise_distance: d_bar,
            l_raw,
            prior: 0.0,
            l_adjusted: 0.0,
        });
        centroids.push(mu);
        counts.push(nf);
    }
    let total: f64 = counts.iter().sum();
    let transfer: Vec<Vec<f64>> = (0..t_count)
        .map(|i| {
            (0..t_count)
                .map(|t| {
                    let d2: f64 = (0..d).map(|k| (centroids[i][k] - centroids[t][k]).powi(2)).sum();
                    (-d2 / (2.0 * hp.sigma_center * hp.sigma_center)).exp()
                })
                .collect()
        })
        .collect();
    let mut l_sum = 0.0;
    for t in 0..t_count {
        let prior = (counts[t] / (total * hp.sigma_model)).tanh();
        let mix: f64 = (0..t_count).map(|i| transfer[i][t] * tasks[i].l_raw).sum();
        tasks[t].prior = prior;
        tasks[t].l_adjusted = prior * mix;
        l_sum += prior * mix;
    }
    OracleReport {
        tasks,
        transfer,
        l_dataset: l_sum / t_count as f64,
    }
}

/// The five image statistics by direct per-pixel loops.
pub fn oracle_image_stats(img: &RgbImage) -> [f64; 5] {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px = |x: usize, y: usize| img.get_pixel(x as u32, y as u32).0;
    let gray = |x: usize, y: usize| {
        let p = px(x, y);
        0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
    };
    let count = (w * h) as f64;

    let mut sum = 0.0;
    for y in 0..h {
        for x in 0..w {
            sum += gray(x, y);
        }
    }
    let lum = sum / count;
    let mut ss = 0.0;
    for y in 0..h {
        for x in 0..w {
            ss += (gray(x, y) - lum).powi(2);
        }
    }
    let sigma = (ss / count).sqrt();

    let mut lo = [[f64::MAX; 4]; 4];
    let mut hi = [[f64::MIN; 4]; 4];
    for y in 0..h {
        for x in 0..w {
            let cy = (y / (h / 4)).min(3);
            let cx = (x / (w / 4)).min(3);
            lo[cy][cx] = lo[cy][cx].min(gray(x, y));
            hi[cy][cx] = hi[cy][cx].max(gray(x, y));
        }
    }
    let mut ranges = 0.0;
    for cy in 0..4 {
        for cx in 0..4 {
            ranges += hi[cy][cx] - lo[cy][cx];
        }
    }
    let contrast = ranges / (16.0 * if sigma > 1.0 { sigma } else { 1.0 });

    let (mut srg, mut syb) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let p = px(x, y);
            let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
            srg += r - g;
            syb += 0.5 * (r + g) - b;
        }
    }
    let (mrg, myb) = (srg / count, syb / count);
    let (mut vrg, mut vyb) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let p = px(x, y);
            let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
            vrg += (r - g - mrg).powi(2);
            vyb += (0.5 * (r + g) - b - myb).powi(2);
        }
    }
    let colorfulness = (vrg / count + vyb / count).sqrt() + 0.3 * (mrg * mrg + myb * myb).sqrt();

    const KX: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    const KY: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
    let mut resp = Vec::new();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for dy in 0..3 {
                for dx in 0..3 {
                    let g = gray(x + dx - 1, y + dy - 1);
                    gx += KX[dy][dx] * g;
                    gy += KY[dy][dx] * g;
                }
            }
            resp.push(gx + gy);
        }
    }
    let rm = resp.iter().sum::<f64>() / resp.len() as f64;
    let blur = resp.iter().map(|v| (v - rm).powi(2)).sum::<f64>() / resp.len() as f64;

    [lum, sigma, contrast, colorfulness, blur]
}

pub fn random_image(seed: u64, w: u32, h: u32) -> RgbImage {
    let mut r = rng(seed);
    RgbImage::from_fn(w, h, |_, _| Rgb([r.random(), r.random(), r.random()]))
}

/// Twenty pinned textures: uniform noise, sinusoidal gratings and random blocks.
pub fn texture_corpus() -> Vec<RgbImage> {
    let (w, h) = (48u32, 40u32);
    let mut out = Vec::with_capacity(20);
    for k in 0..8 {
        out.push(random_image(1000 + k, w, h));
    }
    for k in 0..6 {
        let fx = 0.3 + 0.25 * k as f64;
        let fy = 0.9 - 0.12 * k as f64;
        out.push(RgbImage::from_fn(w, h, |x, y| {
            let v = 127.5 + 100.0 * (fx * x as f64 + fy * y as f64).sin();
            let v = v.round() as u8;
            Rgb([v, v.saturating_sub(20), 255 - v])
        }));
    }
    for k in 0..6u64 {
        let block = 2 + k as u32;
        let mut r = rng(2000 + k);
        let cols = w.div_ceil(block) as usize;
        let rows = h.div_ceil(block) as usize;
        let cells: Vec<[u8; 3]> = (0..cols * rows).map(|_| [r.random(), r.random(), r.random()]).collect();
        out.push(RgbImage::from_fn(w, h, |x, y| {
            Rgb(cells[(y / block) as usize * cols + (x / block) as usize])
        }));
    }
    out
}

/// 3×3 mean filter with clamped borders, rounded back to 8 bits.
pub fn box_blur(img: &RgbImage) -> RgbImage {
    let (w, h) = (img.width() as i64, img.height() as i64);
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let mut acc = [0.0f64; 3];
        for dy in -1..=1 {
            for dx in -1..=1 {
                let xx = (x as i64 + dx).clamp(0, w - 1) as u32;
                let yy = (y as i64 + dy).clamp(0, h - 1) as u32;
                let p = img.get_pixel(xx, yy).0;
                for c in 0..3 {
                    acc[c] += p[c] as f64;
                }
            }
        }
        Rgb(acc.map(|v| (v / 9.0).round() as u8))
    })
}
