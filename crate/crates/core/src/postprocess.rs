//! From a label field to a cleaned binary lesion mask.

use crate::components::{self, Connectivity};
use crate::error::{Error, Result};
use crate::image::{check_dims, BinaryMask};
use crate::mrf::{ClassParams, LabelField};

/// Lesions are hyperintense relative to aerated lung, so the lesion class is
/// the one with the highest mean. Returns the roi pixels carrying it.
pub fn extract_lesion_mask(lf: &LabelField, params: &ClassParams, roi: &BinaryMask) -> Result<BinaryMask> {
    check_dims(lf.dims(), roi.dims())?;
    let (w, h) = roi.dims();
    if roi.is_empty() {
        return Ok(BinaryMask::empty(w, h));
    }
    let classes = params.classes();
    let mut top = 0;
    for c in 1..classes.len() {
        if classes[c].mean > classes[top].mean {
            top = c;
        }
    }
    if let Some(other) = (0..classes.len()).find(|&c| c != top && classes[c].mean == classes[top].mean) {
        return Err(Error::AmbiguousClass(top.min(other), top.max(other)));
    }
    lf.mask_of(top as u8).and(roi)
}

fn erode(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    // Outside the image counts as background.
    BinaryMask::from_fn(w, h, |x, y| {
        if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
            return false;
        }
        (y - 1..=y + 1).all(|yy| (x - 1..=x + 1).all(|xx| mask.get(xx, yy)))
    })
}

fn dilate(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        let ys = y.saturating_sub(1)..=(y + 1).min(h - 1);
        ys.into_iter()
            .any(|yy| (x.saturating_sub(1)..=(x + 1).min(w - 1)).any(|xx| mask.get(xx, yy)))
    })
}

/// Opening (removes specks) followed by closing (fills pinholes and
/// hairline gaps), both with a 3x3 square.
pub fn morphological_smooth(mask: &BinaryMask) -> BinaryMask {
    let opened = dilate(&erode(mask));
    erode(&dilate(&opened))
}

/// Drops 8-connected components with fewer than `min_area` pixels.
pub fn remove_small_components(mask: &BinaryMask, min_area: usize) -> BinaryMask {
    if min_area == 0 {
        return mask.clone();
    }
    components::retain_components(mask, Connectivity::Eight, |c| c.area >= min_area)
}
