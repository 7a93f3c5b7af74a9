//! One-dimensional k-means over masked pixels and IoU-based assignment of
//! the three clusters to the roles nucleus / cytoplasm / background.
//!
//! The clustering feature is a single intensity per pixel (the stretched
//! a* plane in the pipeline), so Lloyd's algorithm runs on a flat list of
//! in-domain samples. Centroid updates fold fixed-size block partials in
//! block order, which makes the result bit-identical across thread counts
//! and with the sequential fallback.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::raster::{BinaryMask, FloatPlane, LabelMap};

/// How initial centroids are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Centroids at evenly spaced quantiles of the in-domain values
    /// (deterministic, the default).
    Quantile,
    /// k distinct in-domain values sampled with the configured seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub init: InitMode,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 3,
            max_iterations: 100,
            tolerance: 1e-4,
            seed: 42,
            init: InitMode::Quantile,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidConfig("kmeans k must be at least 1".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig(
                "kmeans max_iterations must be at least 1".into(),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(
                "kmeans tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Converged clustering of the in-domain pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    /// Ascending centroid values; cluster label `i+1` has centroid `[i]`.
    pub centroids: Vec<f64>,
    /// Label 1..=k per in-domain pixel, 0 outside the domain.
    pub assignments: LabelMap,
    /// Sum of squared distances of in-domain pixels to their centroids.
    pub inertia: f64,
    pub iterations_run: usize,
}

impl ClusterOutcome {
    /// Mask of the pixels assigned to cluster `label` (1-based).
    pub fn cluster_mask(&self, label: u32) -> BinaryMask {
        self.assignments.mask_of(label)
    }
}

/// Nearest centroid index for one value; ties go to the lowest index.
#[inline]
fn nearest(centroids: &[f64], v: f64) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (i, &c) in centroids.iter().enumerate() {
        let d = (v - c) * (v - c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Per-block assignment statistics: per-cluster count, sum, and the block
/// inertia under the current centroids.
fn block_stats(block: &[f64], centroids: &[f64]) -> (Vec<u64>, Vec<f64>, f64) {
    let k = centroids.len();
    let mut counts = vec![0u64; k];
    let mut sums = vec![0.0f64; k];
    let mut inertia = 0.0f64;
    for &v in block {
        let i = nearest(centroids, v);
        counts[i] += 1;
        sums[i] += v;
        let d = v - centroids[i];
        inertia += d * d;
    }
    (counts, sums, inertia)
}

const BLOCK: usize = 4096;

fn initial_centroids(unique: &[f64], cfg: &KMeansConfig) -> Vec<f64> {
    let k = cfg.k;
    match cfg.init {
        InitMode::Quantile => {
            // Values at the (2i+1)/(2k) quantiles of the distinct-value
            // list, nudged forward when concentration makes two quantiles
            // collide; the precondition guarantees enough distinct values.
            let n = unique.len();
            let mut picked: Vec<f64> = Vec::with_capacity(k);
            let mut last_idx: Option<usize> = None;
            for i in 0..k {
                let q = (2 * i + 1) as f64 / (2 * k) as f64;
                let mut idx = (q * (n as f64 - 1.0)).round() as usize;
                if let Some(prev) = last_idx {
                    idx = idx.max(prev + 1);
                }
                picked.push(unique[idx]);
                last_idx = Some(idx);
            }
            picked
        }
        InitMode::Random => {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut chosen: Vec<f64> = unique
                .choose_multiple(&mut rng, k)
                .copied()
                .collect();
            chosen.sort_by(|a, b| a.partial_cmp(b).expect("finite centroids"));
            chosen
        }
    }
}

/// Lloyd's algorithm on the in-domain samples of a plane.
///
/// Iterates assignment and centroid recomputation until the largest
/// centroid movement falls below the tolerance or the iteration budget is
/// spent. Afterwards centroids are sorted ascending and a final
/// assignment pass fixes labels, so relabeling noise cannot leak out.
/// Inertia is non-increasing across iterations; the loop asserts it.
pub fn kmeans_1d(
    values: &FloatPlane,
    domain: &BinaryMask,
    cfg: &KMeansConfig,
) -> Result<ClusterOutcome> {
    cfg.validate()?;
    domain.same_dims(values)?;
    let samples: Vec<f64> = domain
        .data()
        .iter()
        .zip(values.data().iter())
        .filter(|(&d, _)| d)
        .map(|(_, &v)| v)
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let mut unique = samples.clone();
    unique.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    unique.dedup();
    if unique.len() < cfg.k {
        return Err(Error::TooFewDistinctValues {
            needed: cfg.k,
            found: unique.len(),
        });
    }

    let mut centroids = initial_centroids(&unique, cfg);
    let blocks: Vec<&[f64]> = samples.chunks(BLOCK).collect();
    let mut prev_inertia = f64::INFINITY;
    let mut iterations_run = 0usize;
    for _ in 0..cfg.max_iterations {
        let stats = parallel::map_slice(&blocks, |b| block_stats(b, &centroids));
        let k = cfg.k;
        let mut counts = vec![0u64; k];
        let mut sums = vec![0.0f64; k];
        let mut inertia = 0.0f64;
        for (bc, bs, bi) in stats {
            for i in 0..k {
                counts[i] += bc[i];
                sums[i] += bs[i];
            }
            inertia += bi;
        }
        debug_assert!(
            inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12,
            "Lloyd inertia increased: {prev_inertia} -> {inertia}"
        );
        prev_inertia = inertia;
        iterations_run += 1;
        let mut movement = 0.0f64;
        for i in 0..k {
            if counts[i] > 0 {
                let c = sums[i] / counts[i] as f64;
                movement = movement.max((c - centroids[i]).abs());
                centroids[i] = c;
            }
            // An empty cluster keeps its stale centroid; it can pick up
            // samples again once the others move.
        }
        if movement < cfg.tolerance {
            break;
        }
    }

    centroids.sort_by(|a, b| a.partial_cmp(b).expect("finite centroids"));
    // Final labeling under the canonical centroid order; also recompute
    // inertia so the reported value matches the reported assignment.
    let mut label_data = vec![0u32; values.data().len()];
    let mut inertia = 0.0f64;
    let stats = parallel::map_rows(values.height() as usize, |y| {
        let w = values.width() as usize;
        let mut row = vec![0u32; w];
        let mut row_inertia = 0.0f64;
        for (x, slot) in row.iter_mut().enumerate() {
            if domain.get(x as u32, y as u32) {
                let v = values.get(x as u32, y as u32);
                let i = nearest(&centroids, v);
                *slot = (i + 1) as u32;
                let d = v - centroids[i];
                row_inertia += d * d;
            }
        }
        (row, row_inertia)
    });
    for (y, (row, row_inertia)) in stats.into_iter().enumerate() {
        let w = values.width() as usize;
        label_data[y * w..(y + 1) * w].copy_from_slice(&row);
        inertia += row_inertia;
    }
    Ok(ClusterOutcome {
        centroids,
        assignments: LabelMap::new(values.width(), values.height(), label_data)?,
        inertia,
        iterations_run,
    })
}

/// Intersection over union of two masks; 1.0 when both are empty (two
/// empty regions agree perfectly).
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.same_dims(b)?;
    let mut inter = 0u64;
    let mut union = 0u64;
    for (&x, &y) in a.data().iter().zip(b.data().iter()) {
        if x && y {
            inter += 1;
        }
        if x || y {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Which cluster plays which biological role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleAssignment {
    /// Cluster label (1..=3) covering the nucleus.
    pub nucleus: u32,
    pub cytoplasm: u32,
    pub background: u32,
    /// IoU of each cluster (index 0 ↔ label 1) against the rough nucleus
    /// mask.
    pub iou_scores: Vec<f64>,
}

/// Assign roles by overlap with a rough nucleus mask: the cluster with the
/// highest IoU is the nucleus, the lowest is the background, the remaining
/// one the cytoplasm. Score ties break by centroid value — darker (lower
/// a*) for nucleus, lighter for background; with centroids sorted
/// ascending that means lower label wins nucleus ties and higher label
/// wins background ties.
pub fn resolve_roles(
    outcome: &ClusterOutcome,
    rough_nucleus: &BinaryMask,
) -> Result<RoleAssignment> {
    if outcome.centroids.len() != 3 {
        return Err(Error::KNotThree(outcome.centroids.len()));
    }
    rough_nucleus.same_dims(&outcome.assignments)?;
    let mut scores = Vec::with_capacity(3);
    for label in 1..=3u32 {
        scores.push(iou(&outcome.cluster_mask(label), rough_nucleus)?);
    }
    let mut nucleus = 1u32;
    for label in 2..=3u32 {
        if scores[label as usize - 1] > scores[nucleus as usize - 1] {
            nucleus = label;
        }
    }
    let mut background = 0u32;
    for label in 1..=3u32 {
        if label == nucleus {
            continue;
        }
        if background == 0 || scores[label as usize - 1] <= scores[background as usize - 1] {
            background = label;
        }
    }
    let cytoplasm = (1..=3u32)
        .find(|&l| l != nucleus && l != background)
        .expect("three labels minus two distinct picks leaves one");
    Ok(RoleAssignment {
        nucleus,
        cytoplasm,
        background,
        iou_scores: scores,
    })
}
