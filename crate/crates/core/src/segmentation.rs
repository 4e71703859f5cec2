//! Gaussian noise injection, scalar k-means and label rendering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Mean of the additive noise (the noise level).
    pub mean: f64,
    pub variance: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(mean: f64, variance: f64, seed: u64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) || !mean.is_finite() {
            return Err(Error::ParameterDomain(format!(
                "noise needs finite mean and variance >= 0, got mean {mean}, variance {variance}"
            )));
        }
        Ok(Self {
            mean,
            variance,
            seed,
        })
    }
}

/// Pre-clip i.i.d. `N(mean, variance)` samples, row-major.
pub fn noise_field(rows: usize, cols: usize, spec: &NoiseSpec) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(spec.mean, spec.variance.sqrt()).expect("validated variance");
    (0..rows * cols).map(|_| normal.sample(&mut rng)).collect()
}

/// `clip(im + noise, 0, 1)`.
pub fn add_gaussian_noise(im: &ImageGrid, spec: &NoiseSpec) -> ImageGrid {
    let noise = noise_field(im.rows(), im.cols(), spec);
    let data = im
        .as_slice()
        .iter()
        .zip(noise)
        .map(|(v, n)| (v + n).clamp(0.0, 1.0))
        .collect();
    ImageGrid::from_vec(im.rows(), im.cols(), data).expect("finite noisy image")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub k: usize,
    /// Per-value cluster index, with clusters ordered by ascending centroid.
    pub labels: Vec<usize>,
    pub centroids: Vec<f64>,
    /// Within-cluster sum of squares after each Lloyd iteration of the
    /// selected run.
    pub objective_history: Vec<f64>,
}

impl Clustering {
    pub fn objective(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.labels)
            .map(|(v, &l)| (v - self.centroids[l]).powi(2))
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest objective wins.
    pub restarts: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            restarts: 10,
        }
    }
}

fn distinct_count(values: &[f64]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    sorted.len()
}

fn nearest(v: f64, centroids: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, &mu) in centroids.iter().enumerate() {
        let d = (v - mu) * (v - mu);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn plus_plus_seeds(values: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = values.len();
    let mut centroids = vec![values[rng.random_range(0..n)]];
    let mut dist: Vec<f64> = values.iter().map(|v| (v - centroids[0]).powi(2)).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // guard against rounding landing on an existing centroid
            if dist[chosen] == 0.0 {
                dist.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0)
            } else {
                chosen
            }
        } else {
            rng.random_range(0..n)
        };
        let c = values[pick];
        centroids.push(c);
        for (d, v) in dist.iter_mut().zip(values) {
            *d = d.min((v - c).powi(2));
        }
    }
    centroids
}

fn lloyd(
    values: &[f64],
    mut centroids: Vec<f64>,
    max_iter: usize,
) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let k = centroids.len();
    let mut labels: Vec<usize> = values.iter().map(|&v| nearest(v, &centroids)).collect();
    let mut history = Vec::new();
    for _ in 0..max_iter {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&v, &l) in values.iter().zip(&labels) {
            sums[l] += v;
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c] / counts[c] as f64;
            } else {
                // Re-seed an empty cluster at the worst-served value.
                let far = values
                    .iter()
                    .zip(&labels)
                    .map(|(v, &l)| (v - centroids[l]).powi(2))
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                centroids[c] = values[far];
                labels[far] = c;
            }
        }
        let next: Vec<usize> = values.iter().map(|&v| nearest(v, &centroids)).collect();
        let objective: f64 = values
            .iter()
            .zip(&next)
            .map(|(v, &l)| (v - centroids[l]).powi(2))
            .sum();
        history.push(objective);
        let changed = next != labels;
        labels = next;
        if !changed {
            break;
        }
    }
    // Final means for the fixpoint assignment.
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&v, &l) in values.iter().zip(&labels) {
        sums[l] += v;
        counts[l] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            centroids[c] = sums[c] / counts[c] as f64;
        }
    }
    (labels, centroids, history)
}

/// Weighted distinct values with prefix sums for O(1) segment costs.
struct SortedRuns {
    weight: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl SortedRuns {
    fn new(distinct: &[(f64, usize)]) -> Self {
        let mut weight = vec![0.0];
        let mut first = vec![0.0];
        let mut second = vec![0.0];
        for &(v, n) in distinct {
            let n = n as f64;
            weight.push(weight.last().unwrap() + n);
            first.push(first.last().unwrap() + n * v);
            second.push(second.last().unwrap() + n * v * v);
        }
        Self {
            weight,
            first,
            second,
        }
    }

    // Sum of squares of runs lo..hi (exclusive) about their mean.
    fn cost(&self, lo: usize, hi: usize) -> f64 {
        let w = self.weight[hi] - self.weight[lo];
        let s = self.first[hi] - self.first[lo];
        let q = self.second[hi] - self.second[lo];
        (q - s * s / w).max(0.0)
    }

    fn mean(&self, lo: usize, hi: usize) -> f64 {
        (self.first[hi] - self.first[lo]) / (self.weight[hi] - self.weight[lo])
    }
}

// Fills cur[j] for j in lo..hi, knowing the optimal split lies in opt_lo..=opt_hi.
#[allow(clippy::too_many_arguments)]
fn fill_layer(
    runs: &SortedRuns,
    prev: &[f64],
    cur: &mut [f64],
    split: &mut [usize],
    lo: usize,
    hi: usize,
    opt_lo: usize,
    opt_hi: usize,
) {
    if lo >= hi {
        return;
    }
    let mid = (lo + hi) / 2;
    let mut best = (f64::INFINITY, opt_lo);
    let last = opt_hi.min(mid - 1);
    for (s, &p) in prev.iter().enumerate().take(last + 1).skip(opt_lo) {
        let c = p + runs.cost(s, mid);
        if c < best.0 {
            best = (c, s);
        }
    }
    cur[mid] = best.0;
    split[mid] = best.1;
    fill_layer(runs, prev, cur, split, lo, mid, opt_lo, best.1);
    fill_layer(runs, prev, cur, split, mid + 1, hi, best.1, opt_hi);
}

/// Centroids of the globally optimal partition of scalar values into `k`
/// contiguous runs, which is optimal for 1-D k-means.
fn optimal_scalar_centroids(values: &[f64], k: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for v in sorted {
        match distinct.last_mut() {
            Some((last, n)) if *last == v => *n += 1,
            _ => distinct.push((v, 1)),
        }
    }
    let m = distinct.len();
    let runs = SortedRuns::new(&distinct);
    // layer[j]: best cost of the first j runs in c clusters.
    let mut layer: Vec<f64> = (0..=m)
        .map(|j| if j == 0 { 0.0 } else { runs.cost(0, j) })
        .collect();
    let mut splits = Vec::with_capacity(k);
    splits.push(vec![0; m + 1]);
    for c in 1..k {
        let mut next = vec![f64::INFINITY; m + 1];
        let mut split = vec![0; m + 1];
        fill_layer(&runs, &layer, &mut next, &mut split, c + 1, m + 1, c, m);
        layer = next;
        splits.push(split);
    }
    let mut centroids = vec![0.0; k];
    let mut hi = m;
    for c in (0..k).rev() {
        let lo = splits[c][hi];
        centroids[c] = runs.mean(lo, hi);
        hi = lo;
    }
    centroids
}

/// Lloyd iterations from k-means++ seeding on scalar values. One extra
/// start is seeded at the exact 1-D optimum; the lowest objective wins.
pub fn kmeans(values: &[f64], k: usize, seed: u64, options: KMeansOptions) -> Result<Clustering> {
    let distinct = distinct_count(values);
    if k == 0 || k > distinct {
        return Err(Error::ClusterDomain { k, distinct });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kmeans input"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (objective, labels, centroids, history)
    type Run = (f64, Vec<usize>, Vec<f64>, Vec<f64>);
    let mut best: Option<Run> = None;
    let restarts = options.restarts.max(1);
    for run in 0..=restarts {
        let seeds = if run < restarts {
            plus_plus_seeds(values, k, &mut rng)
        } else {
            optimal_scalar_centroids(values, k)
        };
        let (labels, centroids, history) = lloyd(values, seeds, options.max_iter);
        let objective: f64 = values
            .iter()
            .zip(&labels)
            .map(|(v, &l)| (v - centroids[l]).powi(2))
            .sum();
        if best.as_ref().is_none_or(|b| objective < b.0) {
            best = Some((objective, labels, centroids, history));
        }
    }
    let (_, labels, centroids, history) = best.expect("at least one restart");

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centroids[a].total_cmp(&centroids[b]));
    let mut remap = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    Ok(Clustering {
        k,
        labels: labels.into_iter().map(|l| remap[l]).collect(),
        centroids: order.iter().map(|&c| centroids[c]).collect(),
        objective_history: history,
    })
}

/// Clusters pixel intensities and paints each pixel with its cluster's
/// palette entry (ascending-centroid order) or, without a palette, its centroid.
pub fn segment_image(
    u: &ImageGrid,
    k: usize,
    seed: u64,
    palette: Option<&[f64]>,
) -> Result<(ImageGrid, Clustering)> {
    if let Some(p) = palette {
        if p.len() != k {
            return Err(Error::ParameterDomain(format!(
                "palette has {} entries but k = {k}",
                p.len()
            )));
        }
    }
    let clustering = kmeans(u.as_slice(), k, seed, KMeansOptions::default())?;
    let colors = palette.unwrap_or(&clustering.centroids);
    let data = clustering.labels.iter().map(|&l| colors[l]).collect();
    let out = ImageGrid::from_vec(u.rows(), u.cols(), data)?;
    Ok((out, clustering))
}
