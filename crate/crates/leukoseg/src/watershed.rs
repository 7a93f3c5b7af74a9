//! Marker-based watershed: grow labeled seeds over a topographic surface
//! until fronts meet; the meeting pixels become instance boundaries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::{connected_components, distance_transform, Connectivity};
use crate::raster::{BinaryMask, FloatPlane, LabelMap};

/// Parameters for turning a nucleus mask into watershed seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedConfig {
    /// Per-component cut on the distance transform, as a fraction of the
    /// component's maximum; a pixel survives when dt ≥ fraction · max.
    pub dt_fraction: f64,
    /// Seeds smaller than this many pixels are discarded as noise.
    pub min_seed_area: usize,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            dt_fraction: 0.5,
            min_seed_area: 9,
        }
    }
}

impl SeedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_fraction > 0.0 && self.dt_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "seed dt_fraction must lie strictly between 0 and 1".into(),
            ));
        }
        if self.min_seed_area < 1 {
            return Err(Error::InvalidConfig(
                "seed min_seed_area must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Labeled growth result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatershedResult {
    /// 0 = background/outside, 1..=L = instances.
    pub labels: LabelMap,
    /// Watershed-line pixels; owned by no label.
    pub boundary: BinaryMask,
}

/// Derive watershed seeds from a nucleus mask.
///
/// Each connected component of the mask is cut at `dt_fraction` of its own
/// distance-transform maximum, so large and small nuclei are treated
/// alike. A component whose interior has two distance peaks (two fused
/// nuclei) splits into two surviving plateaus — that split is what later
/// separates touching cells. Survivors below `min_seed_area` are dropped;
/// remaining seeds are relabeled 1..=L in raster order.
pub fn extract_seeds(nucleus_mask: &BinaryMask, cfg: &SeedConfig) -> Result<LabelMap> {
    cfg.validate()?;
    let components = connected_components(nucleus_mask, Connectivity::Eight);
    let n_components = components.max_label() as usize;
    if n_components == 0 {
        return LabelMap::zeroed(nucleus_mask.width(), nucleus_mask.height());
    }
    let dt = distance_transform(nucleus_mask);
    let mut peak = vec![0.0f64; n_components + 1];
    for (idx, &label) in components.data().iter().enumerate() {
        if label > 0 && dt.data()[idx] > peak[label as usize] {
            peak[label as usize] = dt.data()[idx];
        }
    }
    let survivors: Vec<bool> = components
        .data()
        .iter()
        .zip(dt.data().iter())
        .map(|(&label, &d)| label > 0 && d >= cfg.dt_fraction * peak[label as usize])
        .collect();
    let survivors = BinaryMask::new(nucleus_mask.width(), nucleus_mask.height(), survivors)?;
    let seeds = connected_components(&survivors, Connectivity::Eight);

    let mut areas = vec![0usize; seeds.max_label() as usize + 1];
    for &label in seeds.data() {
        areas[label as usize] += 1;
    }
    let filtered: Vec<u32> = seeds
        .data()
        .iter()
        .map(|&label| {
            if label > 0 && areas[label as usize] >= cfg.min_seed_area {
                label
            } else {
                0
            }
        })
        .collect();
    Ok(LabelMap::new(nucleus_mask.width(), nucleus_mask.height(), filtered)?.compacted())
}

/// Heap entry: the flood level a pixel will be absorbed at, plus the
/// insertion sequence and raster index as deterministic tie-breakers.
struct QueueItem {
    level: f64,
    seq: u64,
    idx: u32,
}

impl PartialEq for QueueItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueItem {}
impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap and we need the lowest level
        // first.
        other
            .level
            .total_cmp(&self.level)
            .then(other.seq.cmp(&self.seq))
            .then(other.idx.cmp(&self.idx))
    }
}

/// Priority-flood watershed over a surface.
///
/// Seed pixels keep their labels. Every other domain pixel enters a
/// min-heap once, keyed by its flood level — the maximum of its own
/// surface height and the level of the pixel that queued it, which makes
/// absorption levels non-decreasing. On absorption a pixel adjacent
/// (4-connectivity) to exactly one label joins it; a pixel reached by two
/// or more labels becomes a boundary pixel and stops the front. Domain
/// pockets sealed off by boundary pixels, and domain components containing
/// no seed at all, cannot be claimed by any label and are swept into the
/// boundary mask at the end, so labels, boundary, and out-of-domain pixels
/// always partition the frame.
pub fn watershed(
    surface: &FloatPlane,
    seeds: &LabelMap,
    domain: &BinaryMask,
) -> Result<WatershedResult> {
    domain.same_dims(surface)?;
    domain.same_dims(seeds)?;
    let (w, h) = (domain.width(), domain.height());
    if seeds.max_label() == 0 {
        return Err(Error::EmptySeeds);
    }
    for (idx, &label) in seeds.data().iter().enumerate() {
        if label > 0 {
            let (x, y) = (idx as u32 % w, idx as u32 / w);
            if !domain.get(x, y) {
                return Err(Error::SeedOutsideDomain { x, y });
            }
        }
    }

    let mut labels = seeds.clone();
    let mut boundary = BinaryMask::filled(w, h, false)?;
    let mut queued = vec![false; (w * h) as usize];
    let mut heap: BinaryHeap<QueueItem> = BinaryHeap::new();
    let mut seq = 0u64;

    let neighbors = |x: u32, y: u32| {
        Connectivity::Four.offsets().iter().filter_map(move |&(dx, dy)| {
            let nx = x as i64 + dx as i64;
            let ny = y as i64 + dy as i64;
            (nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64)
                .then_some((nx as u32, ny as u32))
        })
    };

    let push = |heap: &mut BinaryHeap<QueueItem>,
                    queued: &mut Vec<bool>,
                    seq: &mut u64,
                    x: u32,
                    y: u32,
                    parent_level: f64| {
        let idx = y * w + x;
        if queued[idx as usize] {
            return;
        }
        queued[idx as usize] = true;
        heap.push(QueueItem {
            level: surface.get(x, y).max(parent_level),
            seq: *seq,
            idx,
        });
        *seq += 1;
    };

    for idx in 0..(w * h) {
        let (x, y) = (idx % w, idx / w);
        if seeds.get(x, y) == 0 {
            continue;
        }
        queued[idx as usize] = true; // seed pixels never enter the heap
        for (nx, ny) in neighbors(x, y) {
            if domain.get(nx, ny) && seeds.get(nx, ny) == 0 {
                push(&mut heap, &mut queued, &mut seq, nx, ny, surface.get(x, y));
            }
        }
    }

    let mut last_level = f64::NEG_INFINITY;
    while let Some(item) = heap.pop() {
        debug_assert!(
            item.level >= last_level,
            "absorption levels must be non-decreasing"
        );
        last_level = item.level;
        let (x, y) = (item.idx % w, item.idx / w);
        let mut seen: Option<u32> = None;
        let mut contested = false;
        for (nx, ny) in neighbors(x, y) {
            let l = labels.get(nx, ny);
            if l == 0 {
                continue;
            }
            match seen {
                None => seen = Some(l),
                Some(prev) if prev != l => {
                    contested = true;
                    break;
                }
                Some(_) => {}
            }
        }
        if contested {
            boundary.set(x, y, true);
            continue;
        }
        let label = seen.expect("queued pixels always touch a labeled neighbor");
        labels.set(x, y, label);
        for (nx, ny) in neighbors(x, y) {
            if domain.get(nx, ny) && labels.get(nx, ny) == 0 {
                push(&mut heap, &mut queued, &mut seq, nx, ny, item.level);
            }
        }
    }

    // Unreached pockets and seedless domain components become boundary.
    for y in 0..h {
        for x in 0..w {
            if domain.get(x, y) && labels.get(x, y) == 0 && !boundary.get(x, y) {
                boundary.set(x, y, true);
            }
        }
    }

    Ok(WatershedResult { labels, boundary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_surface(w: u32, h: u32) -> FloatPlane {
        FloatPlane::filled(w, h, 0.0).unwrap()
    }

    #[test]
    fn seed_config_validation() {
        assert!(SeedConfig::default().validate().is_ok());
        assert!(SeedConfig { dt_fraction: 1.0, min_seed_area: 9 }.validate().is_err());
        assert!(SeedConfig { dt_fraction: 0.5, min_seed_area: 0 }.validate().is_err());
    }

    #[test]
    fn seeds_from_empty_mask() {
        let m = BinaryMask::filled(8, 8, false).unwrap();
        let seeds = extract_seeds(&m, &SeedConfig::default()).unwrap();
        assert_eq!(seeds.max_label(), 0);
    }

    fn disk_mask(w: u32, h: u32, cx: f64, cy: f64, r: f64) -> BinaryMask {
        let mut m = BinaryMask::filled(w, h, false).unwrap();
        for y in 0..h {
            for x in 0..w {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                if dx * dx + dy * dy <= r * r {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    #[test]
    fn solid_disk_yields_one_central_seed() {
        let m = disk_mask(32, 32, 15.5, 15.5, 10.0);
        let seeds = extract_seeds(&m, &SeedConfig::default()).unwrap();
        assert_eq!(seeds.max_label(), 1);
        // The seed sits in the disk interior, well away from the rim.
        for (idx, &label) in seeds.data().iter().enumerate() {
            if label > 0 {
                let (x, y) = (idx as u32 % 32, idx as u32 / 32);
                let dx = x as f64 - 15.5;
                let dy = y as f64 - 15.5;
                assert!(dx * dx + dy * dy < 6.0 * 6.0, "seed pixel ({x},{y}) near rim");
            }
        }
    }

    #[test]
    fn merged_disks_split_into_two_seeds() {
        // Two radius-8 disks with centers 14 px apart fuse into one blob;
        // the fractional distance cut must recover both cores.
        let a = disk_mask(48, 32, 16.0, 15.0, 8.0);
        let b = disk_mask(48, 32, 30.0, 15.0, 8.0);
        let blob = crate::imgproc::mask_or(&a, &b).unwrap();
        assert_eq!(
            connected_components(&blob, Connectivity::Eight).max_label(),
            1,
            "fixture must be a single fused blob"
        );
        let seeds = extract_seeds(&blob, &SeedConfig::default()).unwrap();
        assert_eq!(seeds.max_label(), 2);
    }

    #[test]
    fn two_disjoint_blobs_flood_without_boundary() {
        let mut domain = BinaryMask::filled(9, 4, false).unwrap();
        let mut seeds = LabelMap::zeroed(9, 4).unwrap();
        for y in 0..4 {
            for x in 0..3 {
                domain.set(x, y, true);
                domain.set(x + 6, y, true);
            }
        }
        seeds.set(1, 1, 1);
        seeds.set(7, 2, 2);
        let out = watershed(&flat_surface(9, 4), &seeds, &domain).unwrap();
        assert!(out.boundary.is_empty());
        for y in 0..4 {
            for x in 0..3 {
                assert_eq!(out.labels.get(x, y), 1);
                assert_eq!(out.labels.get(x + 6, y), 2);
            }
        }
    }

    #[test]
    fn flat_rectangle_splits_at_middle_column() {
        // 6×3 domain, flat surface, full-height seeds at both ends: the
        // fronts advance one column per wave and meet at column 3, which
        // becomes the watershed line.
        let domain = BinaryMask::filled(6, 3, true).unwrap();
        let mut seeds = LabelMap::zeroed(6, 3).unwrap();
        for y in 0..3 {
            seeds.set(0, y, 1);
            seeds.set(5, y, 2);
        }
        let out = watershed(&flat_surface(6, 3), &seeds, &domain).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(out.labels.get(x, y), 1, "({x},{y})");
            }
            assert_eq!(out.labels.get(3, y), 0, "(3,{y}) is the contact line");
            assert!(out.boundary.get(3, y));
            for x in 4..6 {
                assert_eq!(out.labels.get(x, y), 2, "({x},{y})");
            }
        }
    }

    #[test]
    fn single_seed_claims_whole_domain() {
        let domain = disk_mask(16, 16, 8.0, 8.0, 6.0);
        let mut seeds = LabelMap::zeroed(16, 16).unwrap();
        seeds.set(8, 8, 1);
        let out = watershed(&flat_surface(16, 16), &seeds, &domain).unwrap();
        assert!(out.boundary.is_empty());
        assert_eq!(out.labels.foreground(), domain);
    }

    #[test]
    fn error_contracts() {
        let domain = BinaryMask::filled(4, 4, true).unwrap();
        let empty = LabelMap::zeroed(4, 4).unwrap();
        assert!(matches!(
            watershed(&flat_surface(4, 4), &empty, &domain),
            Err(Error::EmptySeeds)
        ));
        let mut outside = LabelMap::zeroed(4, 4).unwrap();
        outside.set(2, 2, 1);
        let mut holed = domain.clone();
        holed.set(2, 2, false);
        assert!(matches!(
            watershed(&flat_surface(4, 4), &outside, &holed),
            Err(Error::SeedOutsideDomain { x: 2, y: 2 })
        ));
    }

    #[test]
    fn invariants_on_random_seeded_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for round in 0..40 {
            let w = rng.gen_range(8..28u32);
            let h = rng.gen_range(8..28u32);
            let data = (0..(w * h) as usize).map(|_| rng.gen_bool(0.7)).collect();
            let domain = BinaryMask::new(w, h, data).unwrap();
            // Seed a few random domain pixels.
            let mut seeds = LabelMap::zeroed(w, h).unwrap();
            let mut next = 1u32;
            for _ in 0..rng.gen_range(1..5) {
                let x = rng.gen_range(0..w);
                let y = rng.gen_range(0..h);
                if domain.get(x, y) && seeds.get(x, y) == 0 {
                    seeds.set(x, y, next);
                    next += 1;
                }
            }
            if seeds.max_label() == 0 {
                continue;
            }
            let surface = FloatPlane::new(
                w,
                h,
                (0..(w * h) as usize).map(|_| rng.gen_range(-4.0..4.0)).collect(),
            )
            .unwrap();
            let out = watershed(&surface, &seeds, &domain).unwrap();

            for y in 0..h {
                for x in 0..w {
                    let labeled = out.labels.get(x, y) > 0;
                    let on_boundary = out.boundary.get(x, y);
                    let in_domain = domain.get(x, y);
                    // Partition: in-domain pixels are labeled xor boundary;
                    // out-of-domain pixels are neither.
                    assert_eq!(in_domain, labeled ^ on_boundary, "round {round} ({x},{y})");
                    let seed = seeds.get(x, y);
                    if seed > 0 {
                        assert_eq!(out.labels.get(x, y), seed, "seed relabeled");
                    }
                }
            }
            // Each label region is one 8-connected piece.
            for label in 1..=out.labels.max_label() {
                let region = out.labels.mask_of(label);
                if region.is_empty() {
                    continue;
                }
                assert_eq!(
                    connected_components(&region, Connectivity::Eight).max_label(),
                    1,
                    "round {round} label {label} fragmented"
                );
            }
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let domain = BinaryMask::filled(20, 20, true).unwrap();
        let mut seeds = LabelMap::zeroed(20, 20).unwrap();
        seeds.set(3, 3, 1);
        seeds.set(16, 16, 2);
        seeds.set(16, 3, 3);
        let surface = FloatPlane::new(
            20,
            20,
            (0..400).map(|i| ((i * 7919) % 101) as f64 / 10.0).collect(),
        )
        .unwrap();
        let a = watershed(&surface, &seeds, &domain).unwrap();
        let b = watershed(&surface, &seeds, &domain).unwrap();
        assert_eq!(a, b);
    }
}
