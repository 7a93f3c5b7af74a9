//! End-to-end orchestration of the three segmentation stages on a single
//! slide image.
//!
//! Stage 1 builds a semantic cell-vs-background mask from the CMYK planes:
//! cells have the weakest contrast in the yellow plane and the strongest
//! in the magenta plane, so the conjunction of a dark-Y mask and a
//! bright-M mask isolates whole cells (nucleus plus cytoplasm). Stage 2
//! clusters the in-mask pixels on the stretched a* plane into three groups
//! and names them nucleus / cytoplasm / background by overlap with a rough
//! grayscale nucleus mask. Stage 3 converts the nucleus cluster into
//! watershed seeds via its distance transform and grows them over the
//! negated distance transform of the semantic mask, splitting touching
//! cells along the ridge between them.

mod render;

pub use render::{dump_stages, render_outputs, InstanceMetrics, MetricsReport};

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans_1d, resolve_roles, ClusterOutcome, KMeansConfig, RoleAssignment};
use crate::colorspace::{cmyk_plane_to_gray, rgb_to_cmyk, rgb_to_gray, rgb_to_lab};
use crate::error::{Error, Result, Stage};
use crate::imgproc::{
    close, distance_transform, equalize_histogram, mask_and, otsu_threshold, stretch_contrast,
    threshold, Polarity, SeShape, StructuringElement,
};
use crate::raster::{BinaryMask, FloatPlane, LabelMap, RasterImage};
use crate::watershed::{extract_seeds, watershed, SeedConfig, WatershedResult};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Which pixels stage 2 clusters over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterDomain {
    /// Only pixels inside the stage-1 semantic mask (the default; the
    /// background cluster forms from residual non-cell pixels inside it).
    Masked,
    /// Every pixel of the frame.
    FullFrame,
}

/// Artifact classes [`render_outputs`] can write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmitKind {
    Labelmap,
    Overlay,
    Contours,
    Crops,
    Masks,
    MetricsJson,
}

impl std::str::FromStr for EmitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "labelmap" => Ok(Self::Labelmap),
            "overlay" => Ok(Self::Overlay),
            "contours" => Ok(Self::Contours),
            "crops" => Ok(Self::Crops),
            "masks" => Ok(Self::Masks),
            "metrics-json" => Ok(Self::MetricsJson),
            other => Err(Error::InvalidConfig(format!(
                "unknown emit kind {other:?} (expected labelmap, overlay, contours, \
                 crops, masks, or metrics-json)"
            ))),
        }
    }
}

/// All knobs of the three stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub se_shape: SeShape,
    pub se_radius: u32,
    /// Percentile pair shared by the stage-1 Y stretch and the stage-2 a*
    /// stretch.
    pub stretch_percentiles: (f64, f64),
    /// Stage-1 Y-plane threshold side; cells are dark in Y.
    pub y_polarity: Polarity,
    /// Stage-1 M-plane threshold side; cells are bright in M.
    pub m_polarity: Polarity,
    pub kmeans: KMeansConfig,
    pub seed_cfg: SeedConfig,
    /// Watershed regions smaller than this are merged into a touching
    /// neighbor or dropped.
    pub min_cell_area: usize,
    pub cluster_domain: ClusterDomain,
    pub emit: BTreeSet<EmitKind>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            se_shape: SeShape::Ellipse,
            se_radius: 3,
            stretch_percentiles: (0.01, 0.99),
            y_polarity: Polarity::Below,
            m_polarity: Polarity::Above,
            kmeans: KMeansConfig::default(),
            seed_cfg: SeedConfig::default(),
            min_cell_area: 50,
            cluster_domain: ClusterDomain::Masked,
            emit: BTreeSet::from([
                EmitKind::Labelmap,
                EmitKind::Overlay,
                EmitKind::Crops,
                EmitKind::MetricsJson,
            ]),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.se_radius < 1 {
            return Err(Error::InvalidConfig(
                "se_radius must be at least 1".into(),
            ));
        }
        let (lo, hi) = self.stretch_percentiles;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(Error::InvalidPercentiles { low: lo, high: hi });
        }
        self.kmeans.validate()?;
        if self.kmeans.k != 3 {
            // Role resolution names exactly three clusters.
            return Err(Error::KNotThree(self.kmeans.k));
        }
        self.seed_cfg.validate()?;
        if self.min_cell_area < 1 {
            return Err(Error::InvalidConfig(
                "min_cell_area must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// One segmented cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// 1-based id; also the pixel value in the exported label map.
    pub id: u32,
    /// Full-frame mask of the cell.
    pub mask: BinaryMask,
    /// Tight bounding box (x, y, w, h).
    pub bbox: (u32, u32, u32, u32),
    /// True-pixel count of `mask`.
    pub area: usize,
    /// Mean pixel coordinate.
    pub centroid: (f64, f64),
    /// Pixels of the cell assigned to the nucleus cluster.
    pub nucleus_area: usize,
    /// Pixels of the cell assigned to the cytoplasm cluster.
    pub cytoplasm_area: usize,
}

/// All instances of one slide plus the context they were cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    pub source_id: String,
    pub instances: Vec<Instance>,
    pub semantic_mask: BinaryMask,
    pub roles: RoleAssignment,
}

impl InstanceSet {
    /// Union of all instance masks.
    pub fn union_mask(&self) -> BinaryMask {
        let mut out = BinaryMask::filled(self.semantic_mask.width(), self.semantic_mask.height(), false)
            .expect("semantic mask dimensions are valid");
        for inst in &self.instances {
            for (x, y) in inst.mask.iter_true() {
                out.set(x, y, true);
            }
        }
        out
    }

    /// Instance ids as a label map (0 where no instance claims the pixel).
    pub fn instance_labels(&self) -> LabelMap {
        let mut out = LabelMap::zeroed(self.semantic_mask.width(), self.semantic_mask.height())
            .expect("semantic mask dimensions are valid");
        for inst in &self.instances {
            for (x, y) in inst.mask.iter_true() {
                debug_assert_eq!(out.get(x, y), 0, "instance masks must be disjoint");
                out.set(x, y, inst.id);
            }
        }
        out
    }

    /// Audit the type invariants: pairwise-disjoint masks contained in the
    /// semantic mask, and consistent per-instance bookkeeping.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BinaryMask::filled(
            self.semantic_mask.width(),
            self.semantic_mask.height(),
            false,
        )?;
        for inst in &self.instances {
            self.semantic_mask.same_dims(&inst.mask)?;
            let mut area = 0usize;
            for (x, y) in inst.mask.iter_true() {
                if seen.get(x, y) {
                    return Err(Error::InvalidGeometry(format!(
                        "instance {} overlaps another instance at ({x},{y})",
                        inst.id
                    )));
                }
                seen.set(x, y, true);
                if !self.semantic_mask.get(x, y) {
                    return Err(Error::InvalidGeometry(format!(
                        "instance {} leaves the semantic mask at ({x},{y})",
                        inst.id
                    )));
                }
                let (bx, by, bw, bh) = inst.bbox;
                if x < bx || y < by || x >= bx + bw || y >= by + bh {
                    return Err(Error::InvalidGeometry(format!(
                        "instance {} pixel ({x},{y}) outside its bbox",
                        inst.id
                    )));
                }
                area += 1;
            }
            if area != inst.area {
                return Err(Error::InvalidGeometry(format!(
                    "instance {} area {} does not match mask count {area}",
                    inst.id, inst.area
                )));
            }
            if inst.nucleus_area + inst.cytoplasm_area > inst.area {
                return Err(Error::InvalidGeometry(format!(
                    "instance {} part areas exceed total",
                    inst.id
                )));
            }
        }
        Ok(())
    }
}

/// Every intermediate of one pipeline run, for debugging dumps and
/// artifact rendering.
#[derive(Debug, Clone)]
pub struct PipelineTrace {
    pub y_plane: RasterImage,
    pub y_equalized: RasterImage,
    pub y_stretched: RasterImage,
    pub y_mask: BinaryMask,
    pub m_plane: RasterImage,
    pub m_mask: BinaryMask,
    pub semantic: BinaryMask,
    pub a_stretched: FloatPlane,
    pub clusters: ClusterOutcome,
    pub roles: RoleAssignment,
    pub rough_nucleus: BinaryMask,
    pub cell_distance: FloatPlane,
    pub seeds: LabelMap,
    pub watershed: WatershedResult,
    pub instances: InstanceSet,
    /// Wall-clock milliseconds per stage (and total).
    pub timings_ms: BTreeMap<String, f64>,
}

// ---------------------------------------------------------------------------
// Stage 1: semantic mask
// ---------------------------------------------------------------------------

struct Stage1Trace {
    y_plane: RasterImage,
    y_equalized: RasterImage,
    y_stretched: RasterImage,
    y_mask: BinaryMask,
    m_plane: RasterImage,
    m_mask: BinaryMask,
    semantic: BinaryMask,
}

fn stage1_detailed(img: &RasterImage, cfg: &PipelineConfig) -> Result<Stage1Trace> {
    cfg.validate()?;
    let cmyk = rgb_to_cmyk(img)?;
    let se = StructuringElement::new(cfg.se_shape, cfg.se_radius)?;
    let (lo, hi) = cfg.stretch_percentiles;

    let y_plane = cmyk_plane_to_gray(&cmyk.y)?;
    let y_equalized = equalize_histogram(&y_plane)?;
    let stretched = stretch_contrast(&y_equalized, lo, hi)?;
    let m_plane = cmyk_plane_to_gray(&cmyk.m)?;

    if stretched.degenerate {
        // A constant Y plane (blank or synthetic-flat input) carries no
        // cells; report an empty mask rather than thresholding noise.
        log::warn!("stage 1: degenerate Y contrast, emitting empty semantic mask");
        let empty = BinaryMask::filled(img.width(), img.height(), false)?;
        return Ok(Stage1Trace {
            y_plane,
            y_equalized,
            y_stretched: stretched.image,
            y_mask: empty.clone(),
            m_plane,
            m_mask: empty.clone(),
            semantic: empty,
        });
    }

    let y_t = otsu_threshold(&stretched.image)?;
    let y_mask = close(&threshold(&stretched.image, y_t, cfg.y_polarity)?, &se);
    let m_t = otsu_threshold(&m_plane)?;
    let m_mask = close(&threshold(&m_plane, m_t, cfg.m_polarity)?, &se);
    let semantic = mask_and(&y_mask, &m_mask)?;
    Ok(Stage1Trace {
        y_plane,
        y_equalized,
        y_stretched: stretched.image,
        y_mask,
        m_plane,
        m_mask,
        semantic,
    })
}

/// Stage 1: cell-vs-background mask from the CMYK planes — the AND of the
/// dark-in-Y mask and the bright-in-M mask, each cleaned by morphological
/// closing.
pub fn stage1_semantic(img: &RasterImage, cfg: &PipelineConfig) -> Result<BinaryMask> {
    Ok(stage1_detailed(img, cfg)?.semantic)
}

// ---------------------------------------------------------------------------
// Stage 2: clustering
// ---------------------------------------------------------------------------

/// Percentile contrast stretch of a float plane over a pixel domain: the
/// in-domain values at the two percentiles map linearly onto [0, 255]
/// (clamped). This is the float-plane sibling of
/// [`crate::imgproc::stretch_contrast`], needed because a* is not
/// quantized before clustering.
fn stretch_plane(
    plane: &FloatPlane,
    domain: &BinaryMask,
    (low, high): (f64, f64),
) -> Result<FloatPlane> {
    if !(0.0..=1.0).contains(&low) || !(0.0..=1.0).contains(&high) || low >= high {
        return Err(Error::InvalidPercentiles { low, high });
    }
    domain.same_dims(plane)?;
    let mut samples: Vec<f64> = domain
        .data()
        .iter()
        .zip(plane.data().iter())
        .filter(|(&d, _)| d)
        .map(|(_, &v)| v)
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyDomain);
    }
    samples.sort_by(|a, b| a.total_cmp(b));
    let rank = |p: f64| samples[(p * (samples.len() as f64 - 1.0)).round() as usize];
    let (lo_v, hi_v) = (rank(low), rank(high));
    if hi_v <= lo_v {
        // No usable contrast; a constant plane lets the caller's k-means
        // report the distinct-value shortage precisely.
        return FloatPlane::filled(plane.width(), plane.height(), 0.0);
    }
    let scale = 255.0 / (hi_v - lo_v);
    let data = plane
        .data()
        .iter()
        .map(|&v| ((v - lo_v) * scale).clamp(0.0, 255.0))
        .collect();
    FloatPlane::new(plane.width(), plane.height(), data)
}

struct Stage2Trace {
    a_stretched: FloatPlane,
    clusters: ClusterOutcome,
    roles: RoleAssignment,
    rough_nucleus: BinaryMask,
}

fn stage2_detailed(
    img: &RasterImage,
    semantic: &BinaryMask,
    cfg: &PipelineConfig,
) -> Result<Stage2Trace> {
    if semantic.is_empty() {
        return Err(Error::EmptySemanticMask);
    }
    let domain = match cfg.cluster_domain {
        ClusterDomain::Masked => semantic.clone(),
        ClusterDomain::FullFrame => BinaryMask::filled(semantic.width(), semantic.height(), true)?,
    };
    let lab = rgb_to_lab(img)?;
    let a_stretched = stretch_plane(&lab.a, &domain, cfg.stretch_percentiles)?;
    let clusters = kmeans_1d(&a_stretched, &domain, &cfg.kmeans)?;
    let gray = rgb_to_gray(img)?;
    let t = otsu_threshold(&gray)?;
    // Nuclei are the darkest structures; a below-threshold cut of the
    // luma restricted to the clustering domain is rough but unbiased.
    let rough_nucleus = mask_and(&threshold(&gray, t, Polarity::Below)?, &domain)?;
    let roles = resolve_roles(&clusters, &rough_nucleus)?;
    Ok(Stage2Trace {
        a_stretched,
        clusters,
        roles,
        rough_nucleus,
    })
}

/// Stage 2: three-way k-means on the stretched a* plane inside the
/// clustering domain, plus IoU-based naming of the clusters.
pub fn stage2_cluster(
    img: &RasterImage,
    semantic: &BinaryMask,
    cfg: &PipelineConfig,
) -> Result<(ClusterOutcome, RoleAssignment)> {
    let t = stage2_detailed(img, semantic, cfg)?;
    Ok((t.clusters, t.roles))
}

// ---------------------------------------------------------------------------
// Stage 3: instances
// ---------------------------------------------------------------------------

/// Merge watershed regions smaller than `min_cell_area` into their
/// largest boundary-sharing neighbor; regions with no neighbor are
/// dropped. Returns the surviving original labels and the relabeled map
/// (ids 1..=n, ascending by original label).
fn apply_min_area_policy(
    ws: &WatershedResult,
    min_cell_area: usize,
) -> LabelMap {
    let mut labels = ws.labels.clone();
    let (w, h) = (labels.width(), labels.height());

    loop {
        let max = labels.max_label();
        if max == 0 {
            break;
        }
        let mut areas = vec![0usize; max as usize + 1];
        for &l in labels.data() {
            areas[l as usize] += 1;
        }
        // Label adjacency: direct 8-contact or a shared stretch of
        // watershed line (labels around the same boundary pixel).
        let mut adjacent: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for y in 0..h {
            for x in 0..w {
                let mut around: BTreeSet<u32> = BTreeSet::new();
                let center = labels.get(x, y);
                if center == 0 && !ws.boundary.get(x, y) {
                    continue;
                }
                if center != 0 {
                    around.insert(center);
                }
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let l = labels.get(nx as u32, ny as u32);
                        if l != 0 {
                            around.insert(l);
                        }
                    }
                }
                for &a in &around {
                    for &b in &around {
                        if a != b {
                            adjacent.entry(a).or_default().insert(b);
                        }
                    }
                }
            }
        }
        // Smallest fragments merge first so chains of slivers collapse
        // into their common large neighbor deterministically.
        let mut smalls: Vec<u32> = (1..=max)
            .filter(|&l| areas[l as usize] > 0 && areas[l as usize] < min_cell_area)
            .collect();
        smalls.sort_by_key(|&l| (areas[l as usize], l));
        let mut merged_any = false;
        for small in smalls {
            if areas[small as usize] >= min_cell_area {
                continue; // grew by absorbing an earlier sliver
            }
            let target = adjacent
                .get(&small)
                .into_iter()
                .flatten()
                .copied()
                .filter(|&n| areas[n as usize] > 0 && n != small)
                // Largest neighbor wins; label order breaks ties.
                .min_by_key(|&n| (std::cmp::Reverse(areas[n as usize]), n));
            if let Some(target) = target {
                for idx in 0..labels.data().len() {
                    let (x, y) = (idx as u32 % w, idx as u32 / w);
                    if labels.get(x, y) == small {
                        labels.set(x, y, target);
                    }
                }
                areas[target as usize] += areas[small as usize];
                areas[small as usize] = 0;
                merged_any = true;
            }
        }
        if !merged_any {
            // Remaining smalls are isolated; drop them.
            let mut dropped = false;
            for l in 1..=max {
                if areas[l as usize] > 0 && areas[l as usize] < min_cell_area {
                    for idx in 0..labels.data().len() {
                        let (x, y) = (idx as u32 % w, idx as u32 / w);
                        if labels.get(x, y) == l {
                            labels.set(x, y, 0);
                        }
                    }
                    dropped = true;
                }
            }
            let _ = dropped;
            break;
        }
    }
    relabel_ascending(&labels)
}

/// Renumber nonzero labels to 1..=n preserving their numeric order.
fn relabel_ascending(labels: &LabelMap) -> LabelMap {
    let mut present: Vec<u32> = labels.data().iter().copied().filter(|&l| l != 0).collect();
    present.sort_unstable();
    present.dedup();
    let remap: BTreeMap<u32, u32> = present
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, i as u32 + 1))
        .collect();
    let data = labels
        .data()
        .iter()
        .map(|&l| if l == 0 { 0 } else { remap[&l] })
        .collect();
    LabelMap::new(labels.width(), labels.height(), data).expect("relabel preserves dimensions")
}

fn build_instances(
    final_labels: &LabelMap,
    nucleus_cluster: &BinaryMask,
    cytoplasm_cluster: &BinaryMask,
) -> Vec<Instance> {
    let (w, h) = (final_labels.width(), final_labels.height());
    let n = final_labels.max_label() as usize;
    #[derive(Clone)]
    struct Acc {
        min_x: u32,
        min_y: u32,
        max_x: u32,
        max_y: u32,
        area: usize,
        sum_x: f64,
        sum_y: f64,
        nucleus: usize,
        cytoplasm: usize,
        mask: BinaryMask,
    }
    let empty = Acc {
        min_x: u32::MAX,
        min_y: u32::MAX,
        max_x: 0,
        max_y: 0,
        area: 0,
        sum_x: 0.0,
        sum_y: 0.0,
        nucleus: 0,
        cytoplasm: 0,
        mask: BinaryMask::filled(w, h, false).expect("label dimensions are valid"),
    };
    let mut accs = vec![empty; n];
    for y in 0..h {
        for x in 0..w {
            let l = final_labels.get(x, y);
            if l == 0 {
                continue;
            }
            let acc = &mut accs[l as usize - 1];
            acc.min_x = acc.min_x.min(x);
            acc.min_y = acc.min_y.min(y);
            acc.max_x = acc.max_x.max(x);
            acc.max_y = acc.max_y.max(y);
            acc.area += 1;
            acc.sum_x += x as f64;
            acc.sum_y += y as f64;
            if nucleus_cluster.get(x, y) {
                acc.nucleus += 1;
            } else if cytoplasm_cluster.get(x, y) {
                acc.cytoplasm += 1;
            }
            acc.mask.set(x, y, true);
        }
    }
    accs.into_iter()
        .enumerate()
        .filter(|(_, a)| a.area > 0)
        .map(|(i, a)| Instance {
            id: i as u32 + 1,
            bbox: (a.min_x, a.min_y, a.max_x - a.min_x + 1, a.max_y - a.min_y + 1),
            area: a.area,
            centroid: (a.sum_x / a.area as f64, a.sum_y / a.area as f64),
            nucleus_area: a.nucleus,
            cytoplasm_area: a.cytoplasm,
            mask: a.mask,
        })
        .collect()
}

struct Stage3Trace {
    cell_distance: FloatPlane,
    seeds: LabelMap,
    watershed: WatershedResult,
    instances: Vec<Instance>,
}

fn stage3_detailed(
    semantic: &BinaryMask,
    clusters: &ClusterOutcome,
    roles: &RoleAssignment,
    cfg: &PipelineConfig,
) -> Result<Stage3Trace> {
    // Clamp the nucleus cluster to the semantic mask: under full-frame
    // clustering the cluster may reach outside the cells.
    let nucleus_cluster = mask_and(&clusters.cluster_mask(roles.nucleus), semantic)?;
    let seeds = extract_seeds(&nucleus_cluster, &cfg.seed_cfg)?;
    if seeds.max_label() == 0 {
        return Err(Error::NoSeedsFound);
    }
    let cell_distance = distance_transform(semantic);
    // Ridges of the cell-mask distance transform (the thin necks between
    // touching cells) become the highest points of the flooding surface.
    let surface = cell_distance.negated();
    let ws = watershed(&surface, &seeds, semantic)?;
    let final_labels = apply_min_area_policy(&ws, cfg.min_cell_area);
    let cytoplasm_cluster = mask_and(&clusters.cluster_mask(roles.cytoplasm), semantic)?;
    let instances = build_instances(&final_labels, &nucleus_cluster, &cytoplasm_cluster);
    Ok(Stage3Trace {
        cell_distance,
        seeds,
        watershed: ws,
        instances,
    })
}

/// Stage 3: watershed instance separation plus per-cell record
/// extraction.
pub fn stage3_instances(
    semantic: &BinaryMask,
    clusters: &ClusterOutcome,
    roles: &RoleAssignment,
    cfg: &PipelineConfig,
) -> Result<(WatershedResult, Vec<Instance>)> {
    let t = stage3_detailed(semantic, clusters, roles, cfg)?;
    Ok((t.watershed, t.instances))
}

// ---------------------------------------------------------------------------
// Full runs
// ---------------------------------------------------------------------------

/// Run all three stages and keep every intermediate.
pub fn run_pipeline_traced(
    img: &RasterImage,
    source_id: &str,
    cfg: &PipelineConfig,
) -> Result<PipelineTrace> {
    let t0 = Instant::now();
    let s1 = stage1_detailed(img, cfg).map_err(|e| e.in_stage(Stage::Semantic))?;
    let t1 = Instant::now();
    let s2 = stage2_detailed(img, &s1.semantic, cfg).map_err(|e| e.in_stage(Stage::Clustering))?;
    let t2 = Instant::now();
    let s3 = stage3_detailed(&s1.semantic, &s2.clusters, &s2.roles, cfg)
        .map_err(|e| e.in_stage(Stage::Instances))?;
    let t3 = Instant::now();

    let instances = InstanceSet {
        source_id: source_id.to_string(),
        instances: s3.instances,
        semantic_mask: s1.semantic.clone(),
        roles: s2.roles.clone(),
    };
    let mut timings_ms = BTreeMap::new();
    timings_ms.insert("stage1_semantic".into(), ms(t1 - t0));
    timings_ms.insert("stage2_cluster".into(), ms(t2 - t1));
    timings_ms.insert("stage3_instances".into(), ms(t3 - t2));
    timings_ms.insert("total".into(), ms(t3 - t0));
    Ok(PipelineTrace {
        y_plane: s1.y_plane,
        y_equalized: s1.y_equalized,
        y_stretched: s1.y_stretched,
        y_mask: s1.y_mask,
        m_plane: s1.m_plane,
        m_mask: s1.m_mask,
        semantic: s1.semantic,
        a_stretched: s2.a_stretched,
        clusters: s2.clusters,
        roles: s2.roles,
        rough_nucleus: s2.rough_nucleus,
        cell_distance: s3.cell_distance,
        seeds: s3.seeds,
        watershed: s3.watershed,
        instances,
        timings_ms,
    })
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Run the full pipeline on one slide.
pub fn run_pipeline(
    img: &RasterImage,
    source_id: &str,
    cfg: &PipelineConfig,
) -> Result<InstanceSet> {
    Ok(run_pipeline_traced(img, source_id, cfg)?.instances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_slide, SynthConfig};

    fn small_slide(seed: u64, n_cells: usize, overlap_pairs: usize) -> (RasterImage, crate::synth::GroundTruth) {
        generate_slide(&SynthConfig {
            width: 256,
            height: 256,
            n_cells,
            overlap_pairs,
            radius_range: (16.0, 24.0),
            seed,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let mut cfg = PipelineConfig::default();
        cfg.kmeans.k = 2;
        assert!(matches!(cfg.validate(), Err(Error::KNotThree(2))));
        let cfg = PipelineConfig {
            stretch_percentiles: (0.9, 0.1),
            ..PipelineConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidPercentiles { .. })));
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = PipelineConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert!(text.contains("metrics-json"), "emit kinds use kebab-case");
    }

    #[test]
    fn stretch_plane_maps_percentile_span() {
        let plane = FloatPlane::new(3, 1, vec![10.0, 15.0, 20.0]).unwrap();
        let domain = BinaryMask::filled(3, 1, true).unwrap();
        let out = stretch_plane(&plane, &domain, (0.0, 1.0)).unwrap();
        assert_eq!(out.data(), &[0.0, 127.5, 255.0]);
        let flat = FloatPlane::filled(3, 1, 4.0).unwrap();
        let out = stretch_plane(&flat, &domain, (0.0, 1.0)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stage1_white_image_is_empty() {
        let img = RasterImage::filled(64, 64, 3, 255).unwrap();
        let mask = stage1_semantic(&img, &PipelineConfig::default()).unwrap();
        assert!(mask.is_empty());
    }

    #[test]
    fn stage1_covers_synthetic_cells() {
        let (img, truth) = small_slide(11, 4, 0);
        let mask = stage1_semantic(&img, &PipelineConfig::default()).unwrap();
        let covered = crate::imgproc::mask_and(&mask, &truth.semantic_mask)
            .unwrap()
            .count_true();
        let cell_px = truth.semantic_mask.count_true();
        assert!(
            covered as f64 >= 0.95 * cell_px as f64,
            "mask covers only {covered}/{cell_px} cell pixels"
        );
        let spill = crate::imgproc::mask_diff(&mask, &truth.semantic_mask)
            .unwrap()
            .count_true();
        let bg_px = (256 * 256) - cell_px;
        assert!(
            (spill as f64) <= 0.05 * bg_px as f64,
            "mask spills onto {spill}/{bg_px} background pixels"
        );
    }

    #[test]
    fn stage2_finds_nucleus_band() {
        let (img, truth) = small_slide(12, 4, 0);
        let cfg = PipelineConfig::default();
        let semantic = stage1_semantic(&img, &cfg).unwrap();
        let (clusters, roles) = stage2_cluster(&img, &semantic, &cfg).unwrap();
        let nucleus = clusters.cluster_mask(roles.nucleus);
        let covered = crate::imgproc::mask_and(&nucleus, &truth.nucleus_mask)
            .unwrap()
            .count_true();
        let truth_px = truth.nucleus_mask.count_true();
        assert!(
            covered as f64 >= 0.9 * truth_px as f64,
            "nucleus cluster covers only {covered}/{truth_px}"
        );
        let mut sorted = [roles.nucleus, roles.cytoplasm, roles.background];
        sorted.sort();
        assert_eq!(sorted, [1, 2, 3]);
    }

    #[test]
    fn stage2_empty_mask_errors() {
        let img = RasterImage::filled(32, 32, 3, 255).unwrap();
        let empty = BinaryMask::filled(32, 32, false).unwrap();
        assert!(matches!(
            stage2_cluster(&img, &empty, &PipelineConfig::default()),
            Err(Error::EmptySemanticMask)
        ));
    }

    #[test]
    fn full_run_on_disjoint_cells() {
        let (img, truth) = small_slide(13, 5, 0);
        let set = run_pipeline(&img, "t", &PipelineConfig::default()).unwrap();
        set.validate().unwrap();
        assert_eq!(set.instances.len(), 5);
        // Each prediction matches one truth instance well.
        for inst in &set.instances {
            let best = (1..=truth.instances.max_label())
                .map(|l| {
                    crate::clustering::iou(&inst.mask, &truth.instances.mask_of(l)).unwrap()
                })
                .fold(0.0f64, f64::max);
            assert!(best >= 0.8, "instance {} best IoU {best}", inst.id);
        }
    }

    #[test]
    fn overlapping_pair_splits_into_two() {
        let (img, truth) = small_slide(14, 2, 1);
        assert_eq!(truth.instances.max_label(), 2);
        let set = run_pipeline(&img, "t", &PipelineConfig::default()).unwrap();
        assert_eq!(set.instances.len(), 2, "touching pair must split");
    }

    #[test]
    fn determinism_end_to_end() {
        let (img, _) = small_slide(15, 4, 1);
        let cfg = PipelineConfig::default();
        let a = run_pipeline(&img, "t", &cfg).unwrap();
        let b = run_pipeline(&img, "t", &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gray_input_names_stage_one() {
        let img = RasterImage::filled(16, 16, 1, 0).unwrap();
        let err = run_pipeline(&img, "t", &PipelineConfig::default()).unwrap_err();
        assert_eq!(err.stage(), Some(Stage::Semantic));
        assert!(err.to_string().contains("stage 1"));
    }

    #[test]
    fn min_area_monotonicity() {
        let (img, _) = small_slide(16, 6, 1);
        let mut counts = Vec::new();
        for min_cell_area in [10, 50, 200, 800] {
            let cfg = PipelineConfig {
                min_cell_area,
                ..PipelineConfig::default()
            };
            counts.push(run_pipeline(&img, "t", &cfg).unwrap().instances.len());
        }
        for pair in counts.windows(2) {
            assert!(pair[1] <= pair[0], "counts {counts:?} not non-increasing");
        }
    }

    #[test]
    fn brightness_offset_changes_little() {
        let (img, _) = small_slide(17, 4, 0);
        let cfg = PipelineConfig::default();
        let base = stage1_semantic(&img, &cfg).unwrap();
        for offset in [-10i16, 10] {
            let shifted = RasterImage::new(
                img.width(),
                img.height(),
                3,
                img.data()
                    .iter()
                    .map(|&v| (v as i16 + offset).clamp(0, 255) as u8)
                    .collect(),
            )
            .unwrap();
            let mask = stage1_semantic(&shifted, &cfg).unwrap();
            let differing = crate::imgproc::mask_diff(&mask, &base)
                .unwrap()
                .count_true()
                + crate::imgproc::mask_diff(&base, &mask).unwrap().count_true();
            let total = (img.width() * img.height()) as f64;
            assert!(
                (differing as f64) < 0.05 * total,
                "offset {offset}: {differing} pixels differ"
            );
        }
    }

    #[test]
    fn small_fragments_merge_into_neighbors() {
        // A 10×4 domain split into a big left region and a thin right
        // sliver by a boundary column; the sliver is below the area
        // threshold and must merge leftward across the line.
        let mut labels = LabelMap::zeroed(10, 4).unwrap();
        let mut boundary = BinaryMask::filled(10, 4, false).unwrap();
        for y in 0..4 {
            for x in 0..7 {
                labels.set(x, y, 1);
            }
            boundary.set(7, y, true);
            for x in 8..10 {
                labels.set(x, y, 2);
            }
        }
        let ws = WatershedResult { labels, boundary };
        let merged = apply_min_area_policy(&ws, 20);
        assert_eq!(merged.max_label(), 1);
        assert_eq!(merged.get(9, 0), 1, "sliver pixels adopt the neighbor label");
        assert_eq!(merged.get(7, 0), 0, "watershed line stays unowned");
    }

    #[test]
    fn isolated_small_fragments_drop() {
        let mut labels = LabelMap::zeroed(10, 4).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                labels.set(x, y, 1);
            }
        }
        labels.set(9, 3, 2); // lone pixel far from label 1
        let ws = WatershedResult {
            labels,
            boundary: BinaryMask::filled(10, 4, false).unwrap(),
        };
        let merged = apply_min_area_policy(&ws, 4);
        assert_eq!(merged.max_label(), 1);
        assert_eq!(merged.get(9, 3), 0);
    }
}
