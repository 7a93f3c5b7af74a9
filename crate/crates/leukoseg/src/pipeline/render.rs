//! File artifacts of a pipeline run: label maps, contour overlays,
//! per-instance crops and masks, metrics JSON, and the per-stage debug
//! dump.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EmitKind, Instance, InstanceSet, PipelineConfig, PipelineTrace};
use crate::error::Result;
use crate::raster::{
    label_to_image, mask_to_image, save_image, save_label_map, write_atomic, BinaryMask,
    FloatPlane, RasterImage,
};

/// Seed of the per-instance overlay palette; fixed so reruns color cells
/// identically.
const PALETTE_SEED: u64 = 0x0e11;

// ---------------------------------------------------------------------------
// Metrics JSON
// ---------------------------------------------------------------------------

/// One instance row of the metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    pub id: u32,
    /// x, y, width, height.
    pub bbox: [u32; 4],
    pub area: usize,
    pub nucleus_area: usize,
    pub cytoplasm_area: usize,
    pub centroid: [f64; 2],
}

impl From<&Instance> for InstanceMetrics {
    fn from(inst: &Instance) -> Self {
        let (x, y, w, h) = inst.bbox;
        Self {
            id: inst.id,
            bbox: [x, y, w, h],
            area: inst.area,
            nucleus_area: inst.nucleus_area,
            cytoplasm_area: inst.cytoplasm_area,
            centroid: [inst.centroid.0, inst.centroid.1],
        }
    }
}

/// The `{source-id}_metrics.json` payload: per-instance measurements plus
/// an echo of the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub source_id: String,
    pub n_instances: usize,
    pub instances: Vec<InstanceMetrics>,
    pub config: PipelineConfig,
    /// Per-stage wall-clock times; omitted by default so reruns are
    /// byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl MetricsReport {
    pub fn new(
        set: &InstanceSet,
        cfg: &PipelineConfig,
        timings_ms: Option<BTreeMap<String, f64>>,
    ) -> Self {
        Self {
            source_id: set.source_id.clone(),
            n_instances: set.instances.len(),
            instances: set.instances.iter().map(InstanceMetrics::from).collect(),
            config: cfg.clone(),
            timings_ms,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serialization is infallible");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

// ---------------------------------------------------------------------------
// Drawing helpers
// ---------------------------------------------------------------------------

/// Pixels of `mask` with at least one 4-neighbor outside the mask (or
/// outside the frame).
pub fn contour_of(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut out = BinaryMask::filled(w, h, false).expect("mask dimensions are valid");
    for (x, y) in mask.iter_true() {
        let on_edge = [(0i64, -1i64), (-1, 0), (1, 0), (0, 1)]
            .iter()
            .any(|&(dx, dy)| {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                nx < 0
                    || ny < 0
                    || nx >= w as i64
                    || ny >= h as i64
                    || !mask.get(nx as u32, ny as u32)
            });
        if on_edge {
            out.set(x, y, true);
        }
    }
    out
}

/// Union of the contours of all instances.
fn all_contours(set: &InstanceSet) -> BinaryMask {
    let mut out = BinaryMask::filled(
        set.semantic_mask.width(),
        set.semantic_mask.height(),
        false,
    )
    .expect("mask dimensions are valid");
    for inst in &set.instances {
        for (x, y) in contour_of(&inst.mask).iter_true() {
            out.set(x, y, true);
        }
    }
    out
}

/// Copy of `img` (grayscale promoted to RGB) with each instance's contour
/// drawn in that instance's palette color.
fn draw_overlay(img: &RasterImage, set: &InstanceSet) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(w as usize * h as usize * 3);
    if img.channels() == 3 {
        data.extend_from_slice(img.data());
    } else {
        for &v in img.data() {
            data.extend_from_slice(&[v, v, v]);
        }
    }
    let mut out = RasterImage::new(w, h, 3, data).expect("overlay buffer matches source");
    let colors = label_to_image(&set.instance_labels(), PALETTE_SEED);
    for inst in &set.instances {
        for (x, y) in contour_of(&inst.mask).iter_true() {
            let c = colors.pixel(x, y);
            out.set_pixel(x, y, &[c[0], c[1], c[2]]);
        }
    }
    out
}

/// Min-max scale a float plane to an 8-bit grayscale image for
/// visualization. A constant plane renders black.
fn plane_to_viz(plane: &FloatPlane) -> RasterImage {
    let (lo, hi) = plane
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let data = if hi > lo {
        let scale = 255.0 / (hi - lo);
        plane
            .data()
            .iter()
            .map(|&v| ((v - lo) * scale).round() as u8)
            .collect()
    } else {
        vec![0; plane.data().len()]
    };
    RasterImage::new(plane.width(), plane.height(), 1, data).expect("viz buffer matches plane")
}

// ---------------------------------------------------------------------------
// render_outputs
// ---------------------------------------------------------------------------

/// Write the artifact classes selected by `cfg.emit` into `out_dir`, all
/// named `{source-id}_…`; per-instance crops are `{source-id}_{instance-id}.png`
/// and per-instance masks `{source-id}_{instance-id}_mask.png`. Returns
/// the paths written, in write order.
pub fn render_outputs(
    img: &RasterImage,
    set: &InstanceSet,
    out_dir: &Path,
    cfg: &PipelineConfig,
    timings_ms: Option<BTreeMap<String, f64>>,
) -> Result<Vec<PathBuf>> {
    fn emit(
        path: PathBuf,
        written: &mut Vec<PathBuf>,
        save: &dyn Fn(&Path) -> Result<()>,
    ) -> Result<()> {
        save(&path)?;
        written.push(path);
        Ok(())
    }
    let id = &set.source_id;
    let mut written = Vec::new();

    if cfg.emit.contains(&EmitKind::Labelmap) {
        let labels = set.instance_labels();
        emit(
            out_dir.join(format!("{id}_labels.png")),
            &mut written,
            &|p| save_label_map(p, &labels),
        )?;
    }
    if cfg.emit.contains(&EmitKind::Overlay) {
        let overlay = draw_overlay(img, set);
        emit(
            out_dir.join(format!("{id}_overlay.png")),
            &mut written,
            &|p| save_image(p, &overlay),
        )?;
    }
    if cfg.emit.contains(&EmitKind::Contours) {
        let contours = mask_to_image(&all_contours(set));
        emit(
            out_dir.join(format!("{id}_contours.png")),
            &mut written,
            &|p| save_image(p, &contours),
        )?;
    }
    if cfg.emit.contains(&EmitKind::Crops) {
        for inst in &set.instances {
            let (x, y, w, h) = inst.bbox;
            let crop = img.crop(x, y, w, h)?;
            emit(
                out_dir.join(format!("{id}_{}.png", inst.id)),
                &mut written,
                &|p| save_image(p, &crop),
            )?;
        }
    }
    if cfg.emit.contains(&EmitKind::Masks) {
        for inst in &set.instances {
            let mask = mask_to_image(&inst.mask);
            emit(
                out_dir.join(format!("{id}_{}_mask.png", inst.id)),
                &mut written,
                &|p| save_image(p, &mask),
            )?;
        }
    }
    if cfg.emit.contains(&EmitKind::MetricsJson) {
        let report = MetricsReport::new(set, cfg, timings_ms);
        emit(
            out_dir.join(format!("{id}_metrics.json")),
            &mut written,
            &|p| write_json(p, &report),
        )?;
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// dump_stages
// ---------------------------------------------------------------------------

/// Run the full pipeline on `img` and write every intermediate into
/// `out_dir` as numbered PNGs (`01_y_plane.png` through the final
/// overlay). Returns the trace and the written paths.
pub fn dump_stages(
    img: &RasterImage,
    source_id: &str,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<(PipelineTrace, Vec<PathBuf>)> {
    let trace = super::run_pipeline_traced(img, source_id, cfg)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, image: &RasterImage| -> Result<()> {
        let path = out_dir.join(name);
        save_image(&path, image)?;
        written.push(path);
        Ok(())
    };

    emit("01_y_plane.png", &trace.y_plane)?;
    emit("02_y_equalized.png", &trace.y_equalized)?;
    emit("03_y_stretched.png", &trace.y_stretched)?;
    emit("04_y_mask.png", &mask_to_image(&trace.y_mask))?;
    emit("05_m_plane.png", &trace.m_plane)?;
    emit("06_m_mask.png", &mask_to_image(&trace.m_mask))?;
    emit("07_semantic_mask.png", &mask_to_image(&trace.semantic))?;
    emit("08_a_stretched.png", &plane_to_viz(&trace.a_stretched))?;
    emit(
        "09_clusters.png",
        &label_to_image(&trace.clusters.assignments, PALETTE_SEED),
    )?;
    for label in 1..=3u32 {
        emit(
            &format!("{:02}_cluster_{label}.png", 9 + label),
            &mask_to_image(&trace.clusters.cluster_mask(label)),
        )?;
    }
    emit(
        "13_rough_nucleus.png",
        &mask_to_image(&trace.rough_nucleus),
    )?;
    emit("14_cell_distance.png", &plane_to_viz(&trace.cell_distance))?;
    emit("15_seeds.png", &label_to_image(&trace.seeds, PALETTE_SEED))?;
    emit(
        "16_watershed_labels.png",
        &label_to_image(&trace.watershed.labels, PALETTE_SEED),
    )?;
    emit(
        "17_watershed_boundary.png",
        &mask_to_image(&trace.watershed.boundary),
    )?;
    emit(
        "18_instances.png",
        &label_to_image(&trace.instances.instance_labels(), PALETTE_SEED),
    )?;
    emit("19_overlay.png", &draw_overlay(img, &trace.instances))?;
    drop(emit);
    Ok((trace, written))
}
