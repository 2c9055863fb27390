//! Connected-component labelling on binary masks.

use std::collections::VecDeque;

use crate::image::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
        const EIGHT: [(isize, isize); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    pub area: usize,
    pub touches_border: bool,
}

/// Component labelling of the set pixels. `labels[i]` is `0` for background,
/// otherwise the 1-based index into `components`. Components are numbered
/// in raster order of their first pixel.
#[derive(Debug, Clone)]
pub struct Labeling {
    pub labels: Vec<u32>,
    pub components: Vec<Component>,
}

impl Labeling {
    pub fn component_of(&self, idx: usize) -> Option<&Component> {
        match self.labels[idx] {
            0 => None,
            l => Some(&self.components[l as usize - 1]),
        }
    }
}

pub fn label(mask: &BinaryMask, connectivity: Connectivity) -> Labeling {
    let (w, h) = mask.dims();
    let bits = mask.bits();
    let mut labels = vec![0u32; w * h];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..bits.len() {
        if !bits[start] || labels[start] != 0 {
            continue;
        }
        let id = components.len() as u32 + 1;
        let mut comp = Component {
            area: 0,
            touches_border: false,
        };
        labels[start] = id;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let (x, y) = (idx % w, idx / w);
            comp.area += 1;
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                comp.touches_border = true;
            }
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let n = ny as usize * w + nx as usize;
                if bits[n] && labels[n] == 0 {
                    labels[n] = id;
                    queue.push_back(n);
                }
            }
        }
        components.push(comp);
    }
    Labeling { labels, components }
}

/// Keeps the pixels whose component satisfies `keep`.
pub fn retain_components(
    mask: &BinaryMask,
    connectivity: Connectivity,
    keep: impl Fn(&Component) -> bool,
) -> BinaryMask {
    let labeling = label(mask, connectivity);
    let keep: Vec<bool> = labeling.components.iter().map(keep).collect();
    let (w, h) = mask.dims();
    let bits = labeling
        .labels
        .iter()
        .map(|&l| l != 0 && keep[l as usize - 1])
        .collect();
    BinaryMask::new(w, h, bits).expect("dimensions preserved")
}

/// Fills background regions fully enclosed by the foreground, i.e.
/// 4-connected background components that do not reach the image border.
/// With `max_area`, only holes strictly smaller than it are filled.
pub fn fill_holes(mask: &BinaryMask, max_area: Option<usize>) -> BinaryMask {
    let background = mask.not();
    let holes = retain_components(&background, Connectivity::Four, |c| {
        !c.touches_border && max_area.is_none_or(|m| c.area < m)
    });
    mask.or(&holes).expect("dimensions preserved")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(rows: &[&str]) -> BinaryMask {
        let h = rows.len();
        let w = rows[0].len();
        BinaryMask::from_fn(w, h, |x, y| rows[y].as_bytes()[x] == b'#')
    }

    #[test]
    fn diagonal_pixels_join_only_under_eight() {
        let m = mask(&["#..", ".#.", "..#"]);
        assert_eq!(label(&m, Connectivity::Four).components.len(), 3);
        let eight = label(&m, Connectivity::Eight);
        assert_eq!(eight.components.len(), 1);
        assert_eq!(eight.components[0].area, 3);
        assert!(eight.components[0].touches_border);
    }

    #[test]
    fn interior_component_does_not_touch_border() {
        let m = mask(&[".....", ".##..", ".##..", "....."]);
        let l = label(&m, Connectivity::Eight);
        assert_eq!(
            l.components,
            vec![Component {
                area: 4,
                touches_border: false
            }]
        );
    }

    #[test]
    fn hole_filling_respects_size_limit() {
        let m = mask(&[
            "#######", //
            "#.#...#", //
            "###...#", //
            "#.#...#", //
            "#######",
        ]);
        let all = fill_holes(&m, None);
        assert!(all.bits().iter().all(|&b| b));
        let small = fill_holes(&m, Some(2));
        assert!(small.get(1, 1) && small.get(1, 3));
        assert!(!small.get(4, 2));
    }

    #[test]
    fn open_background_is_not_a_hole() {
        let m = mask(&["###", "#..", "###"]);
        assert_eq!(fill_holes(&m, None), m);
    }
}
