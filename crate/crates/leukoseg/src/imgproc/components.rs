//! Connected-component labeling of binary masks.

use crate::raster::{BinaryMask, LabelMap};

/// Pixel adjacency: edge neighbors only, or edges plus diagonals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub(crate) fn offsets(self) -> &'static [(i32, i32)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }
}

/// Label each maximal connected foreground region with a distinct id.
///
/// Labels start at 1 and are assigned in raster-scan order of each
/// region's first pixel, so the result is deterministic. Background stays
/// 0. The flood itself is a breadth-first walk; recursion depth is never
/// an issue regardless of region size.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> LabelMap {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = LabelMap::zeroed(w, h).expect("mask dimensions are valid");
    let mut queue = std::collections::VecDeque::new();
    let mut next = 1u32;
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || labels.get(x, y) != 0 {
                continue;
            }
            labels.set(x, y, next);
            queue.push_back((x, y));
            while let Some((cx, cy)) = queue.pop_front() {
                for &(dx, dy) in connectivity.offsets() {
                    let nx = cx as i64 + dx as i64;
                    let ny = cy as i64 + dy as i64;
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let (nx, ny) = (nx as u32, ny as u32);
                    if mask.get(nx, ny) && labels.get(nx, ny) == 0 {
                        labels.set(nx, ny, next);
                        queue.push_back((nx, ny));
                    }
                }
            }
            next += 1;
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_mask_has_no_labels() {
        let m = BinaryMask::filled(4, 4, false).unwrap();
        let lm = connected_components(&m, Connectivity::Four);
        assert_eq!(lm.max_label(), 0);
    }

    #[test]
    fn diagonal_touch_depends_on_connectivity() {
        let mut m = BinaryMask::filled(3, 3, false).unwrap();
        m.set(0, 0, true);
        m.set(1, 1, true);
        assert_eq!(connected_components(&m, Connectivity::Four).max_label(), 2);
        assert_eq!(connected_components(&m, Connectivity::Eight).max_label(), 1);
    }

    #[test]
    fn labels_follow_raster_first_encounter() {
        // Three blobs whose first pixels appear left-to-right, top-to-bottom.
        let mut m = BinaryMask::filled(7, 3, false).unwrap();
        m.set(5, 0, true); // blob A: first pixel in row 0
        m.set(0, 1, true); // blob B
        m.set(3, 2, true); // blob C
        let lm = connected_components(&m, Connectivity::Eight);
        assert_eq!(lm.get(5, 0), 1);
        assert_eq!(lm.get(0, 1), 2);
        assert_eq!(lm.get(3, 2), 3);
        assert!(lm.is_compact());
    }

    #[test]
    fn snake_region_is_single_component() {
        // An S-shaped path only 4-connected end to end.
        let mut m = BinaryMask::filled(5, 3, false).unwrap();
        for x in 0..5 {
            m.set(x, 0, true);
        }
        m.set(4, 1, true);
        for x in 0..5 {
            m.set(x, 2, true);
        }
        let lm = connected_components(&m, Connectivity::Four);
        assert_eq!(lm.max_label(), 1);
        assert_eq!(lm.foreground(), m);
    }
}
