//! Synthetic stained-slide generator with exact per-pixel ground truth.
//!
//! Slides imitate the composition of stained bone-marrow imagery: a pale
//! plasma background, a carpet of small red cells scattered over it, and
//! elliptical white cells with a darker-stained interior nucleus, with
//! optional deliberately touching cell pairs and Gaussian pixel noise.
//! Red cells are distractors only — they appear in the image but never in
//! the ground truth, exactly as a white-cell segmenter should treat them.
//! The truth (instance labels and nucleus/cytoplasm/semantic masks) is
//! recorded from the clean geometry before noise is applied, so it is
//! exact by construction. Everything is driven by one seeded generator,
//! making each slide bit-reproducible.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{
    self, BinaryMask, LabelMap, RasterImage,
};

/// Base colors of a slide, loosely after Giemsa staining, with jitter
/// amplitudes.
///
/// The defaults keep the four layers separable the way real smears are:
/// red cells sit close to the plasma in luminance but carry far more
/// yellow, white-cell cytoplasm is a washed blue, and nuclei are dark
/// violet. Jitter amplitudes are small enough that the layers' histogram
/// modes stay distinct on every color plane the pipeline thresholds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Palette {
    pub background: [u8; 3],
    /// Red-cell carpet color; present in the image, absent from the truth.
    pub red_cell: [u8; 3],
    pub cytoplasm: [u8; 3],
    pub nucleus: [u8; 3],
    /// Uniform per-cell color shift, applied to that cell's cytoplasm and
    /// nucleus alike (±range per channel).
    pub cell_jitter: u8,
    /// Uniform per-red-cell color shift (±range per channel).
    pub red_cell_jitter: u8,
    /// Uniform per-slide background shift (±range per channel).
    pub background_jitter: u8,
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            background: [238, 220, 223],
            red_cell: [246, 196, 194],
            cytoplasm: [150, 185, 240],
            nucleus: [88, 60, 100],
            cell_jitter: 5,
            red_cell_jitter: 5,
            background_jitter: 4,
        }
    }
}

/// Parameters of one synthetic slide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: u32,
    pub height: u32,
    pub n_cells: usize,
    /// Ellipse semi-axis range in pixels.
    pub radius_range: (f64, f64),
    /// Nucleus size as a fraction of the cell's semi-axes. Must stay below
    /// 0.7 so the nuclei of a touching pair (centers 1.4 mean radii apart)
    /// remain disjoint and can still split the pair.
    pub nucleus_fraction_range: (f64, f64),
    /// Number of deliberately touching cell pairs among `n_cells`.
    pub overlap_pairs: usize,
    /// Target fraction of the non-cell area covered by the red-cell
    /// carpet. Zero disables the carpet; the achieved fraction can fall
    /// short when placement saturates.
    pub red_cell_fill: f64,
    /// Red-cell semi-axis range in pixels.
    pub red_cell_radius_range: (f64, f64),
    pub noise_sigma: f64,
    pub seed: u64,
    pub palette: Palette,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            n_cells: 8,
            radius_range: (18.0, 34.0),
            nucleus_fraction_range: (0.52, 0.62),
            overlap_pairs: 1,
            red_cell_fill: 0.25,
            red_cell_radius_range: (7.0, 12.0),
            noise_sigma: 2.5,
            seed: 42,
            palette: Palette::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidSpec("slide dimensions must be positive".into()));
        }
        let (rlo, rhi) = self.radius_range;
        if !(rlo > 0.0 && rlo <= rhi) {
            return Err(Error::InvalidSpec(format!(
                "radius_range must satisfy 0 < lo <= hi, got ({rlo}, {rhi})"
            )));
        }
        if 2.0 * rhi + 2.0 >= self.width.min(self.height) as f64 {
            return Err(Error::InvalidSpec(format!(
                "cells of radius {rhi} cannot fit a {}x{} frame",
                self.width, self.height
            )));
        }
        let (flo, fhi) = self.nucleus_fraction_range;
        if !(flo > 0.0 && flo <= fhi && fhi < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "nucleus_fraction_range must lie strictly inside (0, 1), got ({flo}, {fhi})"
            )));
        }
        if self.overlap_pairs * 2 > self.n_cells {
            return Err(Error::InvalidSpec(format!(
                "{} overlap pairs need {} cells but n_cells is {}",
                self.overlap_pairs,
                self.overlap_pairs * 2,
                self.n_cells
            )));
        }
        if !(0.0..1.0).contains(&self.red_cell_fill) {
            return Err(Error::InvalidSpec(format!(
                "red_cell_fill must lie in [0, 1), got {}",
                self.red_cell_fill
            )));
        }
        let (rclo, rchi) = self.red_cell_radius_range;
        if self.red_cell_fill > 0.0 && !(rclo > 0.0 && rclo <= rchi) {
            return Err(Error::InvalidSpec(format!(
                "red_cell_radius_range must satisfy 0 < lo <= hi, got ({rclo}, {rchi})"
            )));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidSpec("noise_sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Exact per-pixel annotation of a generated slide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub instances: LabelMap,
    pub nucleus_mask: BinaryMask,
    pub cytoplasm_mask: BinaryMask,
    pub semantic_mask: BinaryMask,
}

#[derive(Debug, Clone)]
struct Cell {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    nucleus_fraction: f64,
    color_shift: [i16; 3],
}

impl Cell {
    /// Squared normalized ellipse coordinate; ≤ 1 inside the cell.
    #[inline]
    fn coord(&self, x: f64, y: f64) -> f64 {
        let dx = (x - self.cx) / self.rx;
        let dy = (y - self.cy) / self.ry;
        dx * dx + dy * dy
    }

    #[inline]
    fn contains(&self, x: f64, y: f64) -> bool {
        self.coord(x, y) <= 1.0
    }

    /// Inside the concentric nucleus ellipse.
    #[inline]
    fn in_nucleus(&self, x: f64, y: f64) -> bool {
        self.coord(x, y) <= self.nucleus_fraction * self.nucleus_fraction
    }

    fn mean_radius(&self) -> f64 {
        0.5 * (self.rx + self.ry)
    }

    /// Conservative clearance radius for keeping unrelated cells apart.
    fn reach(&self) -> f64 {
        self.rx.max(self.ry)
    }
}

const PLACEMENT_RETRIES: usize = 400;

/// Attempt budget for the red-cell carpet. Placement saturates long before
/// this on ordinary frames; the cap only bounds work on crowded ones.
const RED_CELL_ATTEMPTS: usize = 40_000;

/// Minimum plasma gap, in pixels, kept between unrelated stained blobs
/// (white cell vs. white cell, red vs. red, red vs. white). The gap is
/// wider than twice the pipeline's default closing radius, so closing one
/// of the threshold masks can never bridge two separate blobs.
const MIN_GAP: f64 = 7.0;

/// True when two blobs with the given centers and reaches are guaranteed
/// separated by at least [`MIN_GAP`] of background.
fn separated(ax: f64, ay: f64, a_reach: f64, bx: f64, by: f64, b_reach: f64) -> bool {
    let dx = ax - bx;
    let dy = ay - by;
    let min_dist = a_reach + b_reach + MIN_GAP;
    dx * dx + dy * dy > min_dist * min_dist
}

fn sample_cell(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Cell {
    let (rlo, rhi) = cfg.radius_range;
    let (flo, fhi) = cfg.nucleus_fraction_range;
    let j = cfg.palette.cell_jitter as i16;
    Cell {
        cx: 0.0,
        cy: 0.0,
        rx: rng.gen_range(rlo..=rhi),
        ry: rng.gen_range(rlo..=rhi),
        nucleus_fraction: rng.gen_range(flo..=fhi),
        color_shift: [
            rng.gen_range(-j..=j),
            rng.gen_range(-j..=j),
            rng.gen_range(-j..=j),
        ],
    }
}

/// True when the two cells are guaranteed separated by a background gap.
fn well_separated(a: &Cell, b: &Cell) -> bool {
    separated(a.cx, a.cy, a.reach(), b.cx, b.cy, b.reach())
}

fn in_frame(cell: &Cell, cfg: &SynthConfig) -> bool {
    cell.cx - cell.rx >= 0.0
        && cell.cy - cell.ry >= 0.0
        && cell.cx + cell.rx <= cfg.width as f64 - 1.0
        && cell.cy + cell.ry <= cfg.height as f64 - 1.0
}

/// Place cells: first the solitary ones, then each touching pair (the
/// pair's second cell sits at 1.4 mean radii from the first, so cytoplasm
/// fuses while nuclei stay apart). Cells from different groups never
/// touch.
fn place_cells(rng: &mut ChaCha8Rng, cfg: &SynthConfig) -> Result<Vec<Cell>> {
    let n_singles = cfg.n_cells - 2 * cfg.overlap_pairs;
    let mut cells: Vec<Cell> = Vec::with_capacity(cfg.n_cells);
    // Group id per placed cell: members of one pair share a group and are
    // exempt from the separation check against each other.
    let mut groups: Vec<usize> = Vec::with_capacity(cfg.n_cells);

    let place_single = |rng: &mut ChaCha8Rng,
                            cells: &mut Vec<Cell>,
                            groups: &mut Vec<usize>,
                            group: usize|
     -> Result<()> {
        let mut cell = sample_cell(rng, cfg);
        for _ in 0..PLACEMENT_RETRIES {
            cell.cx = rng.gen_range(cell.rx..=(cfg.width as f64 - 1.0 - cell.rx));
            cell.cy = rng.gen_range(cell.ry..=(cfg.height as f64 - 1.0 - cell.ry));
            if cells.iter().all(|c| well_separated(c, &cell)) {
                cells.push(cell);
                groups.push(group);
                return Ok(());
            }
        }
        Err(Error::CellsDoNotFit {
            requested: cfg.n_cells,
            unplaced: cfg.n_cells - cells.len(),
            retries: PLACEMENT_RETRIES,
        })
    };

    for group in 0..n_singles {
        place_single(rng, &mut cells, &mut groups, group)?;
    }
    for pair in 0..cfg.overlap_pairs {
        let group = n_singles + pair;
        place_single(rng, &mut cells, &mut groups, group)?;
        let anchor = cells.last().expect("anchor just placed").clone();
        let mut partner = sample_cell(rng, cfg);
        let dist = 1.4 * 0.5 * (anchor.mean_radius() + partner.mean_radius());
        let mut placed = false;
        for _ in 0..PLACEMENT_RETRIES {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            partner.cx = anchor.cx + dist * angle.cos();
            partner.cy = anchor.cy + dist * angle.sin();
            let clear = cells
                .iter()
                .zip(groups.iter())
                .all(|(c, &g)| g == group || well_separated(c, &partner));
            if in_frame(&partner, cfg) && clear {
                cells.push(partner);
                groups.push(group);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::CellsDoNotFit {
                requested: cfg.n_cells,
                unplaced: cfg.n_cells - cells.len(),
                retries: PLACEMENT_RETRIES,
            });
        }
    }
    Ok(cells)
}

#[inline]
fn shift_color(base: [u8; 3], shift: [i16; 3]) -> [u8; 3] {
    [
        (base[0] as i16 + shift[0]).clamp(0, 255) as u8,
        (base[1] as i16 + shift[1]).clamp(0, 255) as u8,
        (base[2] as i16 + shift[2]).clamp(0, 255) as u8,
    ]
}

#[derive(Debug, Clone)]
struct RedCell {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    color: [u8; 3],
}

/// Paint one red cell into the carpet overlay, clipped to the frame, and
/// return how many pixels it covered.
fn paint_red_cell(rc: &RedCell, w: u32, h: u32, carpet: &mut [Option<[u8; 3]>]) -> usize {
    let x0 = (rc.cx - rc.rx).floor().max(0.0) as u32;
    let x1 = ((rc.cx + rc.rx).ceil() as u32).min(w - 1);
    let y0 = (rc.cy - rc.ry).floor().max(0.0) as u32;
    let y1 = ((rc.cy + rc.ry).ceil() as u32).min(h - 1);
    let mut painted = 0;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = (x as f64 - rc.cx) / rc.rx;
            let dy = (y as f64 - rc.cy) / rc.ry;
            if dx * dx + dy * dy <= 1.0 {
                carpet[(y * w + x) as usize] = Some(rc.color);
                painted += 1;
            }
        }
    }
    painted
}

/// Scatter the red-cell carpet into `carpet` and return the number of
/// covered pixels. Red cells may be clipped by the frame edge but never
/// overlap each other or a white cell: every stained blob keeps its
/// [`MIN_GAP`] moat of plasma. Placement stops once the requested fill is
/// reached or the attempt budget is spent, so a crowded frame comes out
/// slightly sparser instead of failing.
fn lay_red_carpet(
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    cells: &[Cell],
    carpet: &mut [Option<[u8; 3]>],
) -> usize {
    if cfg.red_cell_fill <= 0.0 {
        return 0;
    }
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let cell_area: f64 = cells.iter().map(|c| std::f64::consts::PI * c.rx * c.ry).sum();
    let target = (cfg.red_cell_fill * (w * h - cell_area).max(0.0)) as usize;
    let (rlo, rhi) = cfg.red_cell_radius_range;
    let j = cfg.palette.red_cell_jitter as i16;
    let mut placed: Vec<RedCell> = Vec::new();
    let mut covered = 0;
    for _ in 0..RED_CELL_ATTEMPTS {
        if covered >= target {
            break;
        }
        let rc = RedCell {
            rx: rng.gen_range(rlo..=rhi),
            ry: rng.gen_range(rlo..=rhi),
            cx: rng.gen_range(0.0..=(w - 1.0)),
            cy: rng.gen_range(0.0..=(h - 1.0)),
            color: shift_color(
                cfg.palette.red_cell,
                [
                    rng.gen_range(-j..=j),
                    rng.gen_range(-j..=j),
                    rng.gen_range(-j..=j),
                ],
            ),
        };
        let reach = rc.rx.max(rc.ry);
        let clear = cells
            .iter()
            .all(|c| separated(rc.cx, rc.cy, reach, c.cx, c.cy, c.reach()))
            && placed
                .iter()
                .all(|o| separated(rc.cx, rc.cy, reach, o.cx, o.cy, o.rx.max(o.ry)));
        if clear {
            covered += paint_red_cell(&rc, cfg.width, cfg.height, carpet);
            placed.push(rc);
        }
    }
    covered
}

/// Generate one slide and its exact ground truth.
pub fn generate_slide(cfg: &SynthConfig) -> Result<(RasterImage, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bgj = cfg.palette.background_jitter as i16;
    let bg_shift = [
        rng.gen_range(-bgj..=bgj),
        rng.gen_range(-bgj..=bgj),
        rng.gen_range(-bgj..=bgj),
    ];
    let background = shift_color(cfg.palette.background, bg_shift);
    let cells = place_cells(&mut rng, cfg)?;

    let (w, h) = (cfg.width, cfg.height);
    let n_px = (w as usize) * (h as usize);
    let mut carpet: Vec<Option<[u8; 3]>> = vec![None; n_px];
    lay_red_carpet(&mut rng, cfg, &cells, &mut carpet);
    let mut image = Vec::with_capacity(n_px * 3);
    let mut instances = vec![0u32; n_px];
    let mut nucleus = vec![false; n_px];
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            // Of all cells covering this pixel, the one whose normalized
            // ellipse coordinate is smallest (pixel closest to its core)
            // wins; this is only ever contested inside a touching pair.
            let winner = cells
                .iter()
                .enumerate()
                .filter(|(_, c)| c.contains(fx, fy))
                .min_by(|(_, a), (_, b)| {
                    a.coord(fx, fy).total_cmp(&b.coord(fx, fy))
                });
            match winner {
                Some((i, cell)) => {
                    let idx = (y * w + x) as usize;
                    instances[idx] = (i + 1) as u32;
                    let in_nuc = cell.in_nucleus(fx, fy);
                    nucleus[idx] = in_nuc;
                    let base = if in_nuc {
                        cfg.palette.nucleus
                    } else {
                        cfg.palette.cytoplasm
                    };
                    image.extend_from_slice(&shift_color(base, cell.color_shift));
                }
                None => match carpet[(y * w + x) as usize] {
                    Some(color) => image.extend_from_slice(&color),
                    None => image.extend_from_slice(&background),
                },
            }
        }
    }

    let instances = LabelMap::new(w, h, instances)?;
    let semantic_mask = instances.foreground();
    let nucleus_mask = BinaryMask::new(w, h, nucleus)?;
    let cytoplasm_mask = crate::imgproc::mask_diff(&semantic_mask, &nucleus_mask)?;

    if cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma)
            .map_err(|e| Error::InvalidSpec(format!("noise distribution: {e}")))?;
        for sample in image.iter_mut() {
            let noisy = *sample as f64 + normal.sample(&mut rng);
            *sample = noisy.round().clamp(0.0, 255.0) as u8;
        }
    }

    Ok((
        RasterImage::new(w, h, 3, image)?,
        GroundTruth {
            instances,
            nucleus_mask,
            cytoplasm_mask,
            semantic_mask,
        },
    ))
}

impl GroundTruth {
    /// Write the truth files for slide `id` into `dir`: the instance label
    /// map as 16-bit PNG plus the three masks as grayscale PNGs.
    pub fn save(&self, dir: &Path, id: &str) -> Result<()> {
        raster::save_label_map(&dir.join(format!("{id}_instances.png")), &self.instances)?;
        for (suffix, mask) in [
            ("nucleus", &self.nucleus_mask),
            ("cytoplasm", &self.cytoplasm_mask),
            ("semantic", &self.semantic_mask),
        ] {
            raster::save_image(
                &dir.join(format!("{id}_{suffix}.png")),
                &raster::mask_to_image(mask),
            )?;
        }
        Ok(())
    }

    /// Reload truth files written by [`GroundTruth::save`].
    pub fn load(dir: &Path, id: &str) -> Result<Self> {
        let instances = raster::load_label_map(&dir.join(format!("{id}_instances.png")))?;
        let mut masks = Vec::with_capacity(3);
        for suffix in ["nucleus", "cytoplasm", "semantic"] {
            let img = raster::load_image(&dir.join(format!("{id}_{suffix}.png")))?;
            masks.push(raster::mask_from_image(&img)?);
        }
        let semantic_mask = masks.pop().expect("three masks loaded");
        let cytoplasm_mask = masks.pop().expect("two masks left");
        let nucleus_mask = masks.pop().expect("one mask left");
        Ok(Self {
            instances,
            nucleus_mask,
            cytoplasm_mask,
            semantic_mask,
        })
    }
}

/// Description of a whole synthetic corpus: `n_images` slides that share
/// geometry and palette settings while cell count and placement vary per
/// slide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub n_images: usize,
    pub width: u32,
    pub height: u32,
    /// Inclusive per-slide cell-count range.
    pub n_cells_range: (usize, usize),
    pub overlap_pairs: usize,
    pub radius_range: (f64, f64),
    pub nucleus_fraction_range: (f64, f64),
    pub red_cell_fill: f64,
    pub red_cell_radius_range: (f64, f64),
    pub noise_sigma: f64,
    pub seed: u64,
    pub palette: Palette,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        let slide = SynthConfig::default();
        Self {
            n_images: 50,
            width: slide.width,
            height: slide.height,
            n_cells_range: (5, 12),
            overlap_pairs: slide.overlap_pairs,
            radius_range: slide.radius_range,
            nucleus_fraction_range: slide.nucleus_fraction_range,
            red_cell_fill: slide.red_cell_fill,
            red_cell_radius_range: slide.red_cell_radius_range,
            noise_sigma: slide.noise_sigma,
            seed: slide.seed,
            palette: slide.palette,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.n_cells_range;
        if lo > hi {
            return Err(Error::InvalidSpec(format!(
                "n_cells_range must satisfy lo <= hi, got ({lo}, {hi})"
            )));
        }
        // Every per-slide config must be valid even at the extremes.
        for n_cells in [lo, hi] {
            SynthConfig {
                n_cells,
                ..self.slide_template(0)
            }
            .validate()?;
        }
        Ok(())
    }

    fn slide_template(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            width: self.width,
            height: self.height,
            n_cells: 0,
            radius_range: self.radius_range,
            nucleus_fraction_range: self.nucleus_fraction_range,
            overlap_pairs: self.overlap_pairs,
            red_cell_fill: self.red_cell_fill,
            red_cell_radius_range: self.red_cell_radius_range,
            noise_sigma: self.noise_sigma,
            seed,
            palette: self.palette.clone(),
        }
    }

    /// The per-slide ids and configs, derived deterministically from the
    /// corpus seed.
    pub fn slides(&self) -> Result<Vec<(String, SynthConfig)>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = self.n_cells_range;
        let mut out = Vec::with_capacity(self.n_images);
        for i in 0..self.n_images {
            let n_cells = rng.gen_range(lo..=hi);
            let seed = rng.gen::<u64>();
            let mut cfg = self.slide_template(seed);
            cfg.n_cells = n_cells;
            out.push((format!("slide_{i:03}"), cfg));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgproc::{connected_components, mask_and, mask_or, Connectivity};

    #[test]
    fn zero_cells_without_carpet_is_pure_background() {
        let cfg = SynthConfig {
            n_cells: 0,
            overlap_pairs: 0,
            red_cell_fill: 0.0,
            noise_sigma: 0.0,
            ..SynthConfig::default()
        };
        let (img, truth) = generate_slide(&cfg).unwrap();
        assert!(truth.semantic_mask.is_empty());
        assert_eq!(truth.instances.max_label(), 0);
        // Noise-free, no red cells: every pixel is exactly the jittered
        // background.
        let first = img.pixel(0, 0).to_vec();
        for y in 0..img.height() {
            for x in 0..img.width() {
                assert_eq!(img.pixel(x, y), first.as_slice());
            }
        }
    }

    /// The single most common color of a noise-free slide is the
    /// background (the carpet caps out well below half the frame).
    fn modal_color(img: &RasterImage) -> [u8; 3] {
        let mut counts: std::collections::HashMap<[u8; 3], usize> = std::collections::HashMap::new();
        for y in 0..img.height() {
            for x in 0..img.width() {
                let p = img.pixel(x, y);
                *counts.entry([p[0], p[1], p[2]]).or_default() += 1;
            }
        }
        counts
            .into_iter()
            .max_by_key(|&(_, n)| n)
            .expect("image has pixels")
            .0
    }

    #[test]
    fn red_carpet_fills_near_requested_fraction() {
        let cfg = SynthConfig {
            n_cells: 0,
            overlap_pairs: 0,
            noise_sigma: 0.0,
            ..SynthConfig::default()
        };
        let (img, truth) = generate_slide(&cfg).unwrap();
        assert!(truth.semantic_mask.is_empty(), "red cells are not truth");
        let bg = modal_color(&img);
        let mut carpet_px = 0usize;
        for y in 0..img.height() {
            for x in 0..img.width() {
                if img.pixel(x, y) != bg.as_slice() {
                    carpet_px += 1;
                }
            }
        }
        let frac = carpet_px as f64 / (img.width() * img.height()) as f64;
        // Placement may fall a little short of the target but must come
        // close, and can overshoot by at most one red cell.
        assert!(
            (0.15..=0.26).contains(&frac),
            "carpet fraction {frac:.3} strays from the 0.25 target"
        );
    }

    #[test]
    fn red_carpet_keeps_a_clear_moat_around_cells() {
        let cfg = SynthConfig {
            n_cells: 5,
            overlap_pairs: 0,
            noise_sigma: 0.0,
            seed: 11,
            ..SynthConfig::default()
        };
        let (img, truth) = generate_slide(&cfg).unwrap();
        let bg = modal_color(&img);
        // Every pixel within 3 of a cell but outside it must be plain
        // background: the closing in the pipeline can then never fuse a
        // red cell (or anything else) onto a white cell.
        let se = crate::imgproc::StructuringElement::new(
            crate::imgproc::SeShape::Ellipse,
            3,
        )
        .unwrap();
        let grown = crate::imgproc::dilate(&truth.semantic_mask, &se);
        let ring = crate::imgproc::mask_diff(&grown, &truth.semantic_mask).unwrap();
        for y in 0..img.height() {
            for x in 0..img.width() {
                if ring.get(x, y) {
                    assert_eq!(
                        img.pixel(x, y),
                        bg.as_slice(),
                        "moat pixel ({x}, {y}) is stained"
                    );
                }
            }
        }
    }

    #[test]
    fn disjoint_slides_have_disjoint_connected_instances() {
        let cfg = SynthConfig {
            n_cells: 5,
            overlap_pairs: 0,
            seed: 42,
            ..SynthConfig::default()
        };
        let (_, truth) = generate_slide(&cfg).unwrap();
        assert_eq!(truth.instances.max_label(), 5);
        let cc = connected_components(&truth.semantic_mask, Connectivity::Eight);
        assert_eq!(cc.max_label(), 5, "separated cells stay separate blobs");
        for label in 1..=5 {
            let inst = truth.instances.mask_of(label);
            assert!(!inst.is_empty());
            assert_eq!(
                connected_components(&inst, Connectivity::Eight).max_label(),
                1,
                "instance {label} must be connected"
            );
        }
    }

    #[test]
    fn overlap_pair_fuses_semantically_but_not_in_labels() {
        let cfg = SynthConfig {
            n_cells: 2,
            overlap_pairs: 1,
            seed: 7,
            ..SynthConfig::default()
        };
        let (_, truth) = generate_slide(&cfg).unwrap();
        assert_eq!(truth.instances.max_label(), 2);
        let cc = connected_components(&truth.semantic_mask, Connectivity::Eight);
        assert_eq!(cc.max_label(), 1, "the pair's union must be one blob");
        // The two nuclei must stay disjoint — that is what lets the
        // pipeline split the pair later.
        let n1 = mask_and(&truth.instances.mask_of(1), &truth.nucleus_mask).unwrap();
        let n2 = mask_and(&truth.instances.mask_of(2), &truth.nucleus_mask).unwrap();
        assert!(!n1.is_empty() && !n2.is_empty());
        let both = mask_and(&n1, &n2).unwrap();
        assert!(both.is_empty());
        let nuclei_cc = connected_components(&truth.nucleus_mask, Connectivity::Eight);
        assert_eq!(nuclei_cc.max_label(), 2, "separate nuclei blobs");
    }

    #[test]
    fn ground_truth_invariants() {
        let cfg = SynthConfig {
            n_cells: 9,
            overlap_pairs: 2,
            seed: 3,
            ..SynthConfig::default()
        };
        let (_, truth) = generate_slide(&cfg).unwrap();
        assert!(mask_and(&truth.nucleus_mask, &truth.cytoplasm_mask).unwrap().is_empty());
        assert_eq!(
            mask_or(&truth.nucleus_mask, &truth.cytoplasm_mask).unwrap(),
            truth.semantic_mask
        );
        assert_eq!(truth.instances.foreground(), truth.semantic_mask);
        assert!(truth.instances.is_compact());
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = SynthConfig::default();
        let (img_a, truth_a) = generate_slide(&cfg).unwrap();
        let (img_b, truth_b) = generate_slide(&cfg).unwrap();
        assert_eq!(img_a, img_b);
        assert_eq!(truth_a, truth_b);
        let other = SynthConfig { seed: 43, ..cfg };
        let (img_c, _) = generate_slide(&other).unwrap();
        assert_ne!(img_a, img_c);
    }

    #[test]
    fn spec_validation_errors() {
        let bad = SynthConfig {
            radius_range: (300.0, 300.0),
            ..SynthConfig::default()
        };
        assert!(matches!(generate_slide(&bad), Err(Error::InvalidSpec(_))));
        let bad = SynthConfig {
            overlap_pairs: 5,
            n_cells: 4,
            ..SynthConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidSpec(_))));
        let bad = SynthConfig {
            nucleus_fraction_range: (0.5, 1.0),
            ..SynthConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidSpec(_))));
        let bad = SynthConfig {
            red_cell_fill: 1.0,
            ..SynthConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidSpec(_))));
        let bad = SynthConfig {
            red_cell_radius_range: (9.0, 6.0),
            ..SynthConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidSpec(_))));
        // A degenerate red-cell radius range is fine while the carpet is
        // disabled.
        let ok = SynthConfig {
            red_cell_fill: 0.0,
            red_cell_radius_range: (0.0, 0.0),
            ..SynthConfig::default()
        };
        ok.validate().unwrap();
    }

    #[test]
    fn crowded_frame_reports_unplaced_cells() {
        let bad = SynthConfig {
            width: 160,
            height: 160,
            n_cells: 60,
            overlap_pairs: 0,
            radius_range: (30.0, 34.0),
            ..SynthConfig::default()
        };
        match generate_slide(&bad) {
            Err(Error::CellsDoNotFit { requested, unplaced, .. }) => {
                assert_eq!(requested, 60);
                assert!(unplaced > 0);
            }
            other => panic!("expected CellsDoNotFit, got {other:?}"),
        }
    }

    #[test]
    fn truth_round_trips_through_files() {
        let cfg = SynthConfig {
            width: 96,
            height: 96,
            n_cells: 2,
            overlap_pairs: 0,
            radius_range: (10.0, 14.0),
            ..SynthConfig::default()
        };
        let (_, truth) = generate_slide(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        truth.save(dir.path(), "t0").unwrap();
        let loaded = GroundTruth::load(dir.path(), "t0").unwrap();
        assert_eq!(loaded, truth);
    }

    #[test]
    fn corpus_spec_produces_stable_slides() {
        let spec = CorpusSpec {
            n_images: 4,
            ..CorpusSpec::default()
        };
        let a = spec.slides().unwrap();
        let b = spec.slides().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert_eq!(a[0].0, "slide_000");
        for (_, cfg) in &a {
            let (lo, hi) = spec.n_cells_range;
            assert!((lo..=hi).contains(&cfg.n_cells));
            cfg.validate().unwrap();
        }
        // Distinct seeds per slide keep content distinct.
        assert_ne!(a[0].1.seed, a[1].1.seed);
    }
}
