//! Raster preprocessing: object crops, degradation and Canny edges.

use crate::error::{Error, Result};
use crate::model::BBox;
use crate::raster::{Mask, Raster};

/// Side length both crops are resized to before they are compared.
pub const COMPARE_SIDE: u32 = 224;
/// Down-scaling factor of [`degrade`].
pub const DEGRADE_FACTOR: u32 = 4;
pub const CANNY_LOW: f32 = 100.0;
pub const CANNY_HIGH: f32 = 200.0;

/// An object cut out of an image with everything but the object zeroed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectCrop {
    pub raster: Raster,
    /// Mask area in pixels.
    pub area: f64,
    /// Mask centroid in original image coordinates.
    pub center_of_mass: (f64, f64),
}

/// Minimal square window around inclusive pixel bounds, centered on them.
fn square_window(x0: u32, y0: u32, x1: u32, y1: u32) -> (i64, i64, u32) {
    let w = x1 - x0 + 1;
    let h = y1 - y0 + 1;
    let side = w.max(h);
    let sx = x0 as i64 - ((side - w) / 2) as i64;
    let sy = y0 as i64 - ((side - h) / 2) as i64;
    (sx, sy, side)
}

/// Zeroes non-object pixels and cuts the minimal enclosing square.
pub fn object_crop(image: &Raster, mask: &Mask) -> Result<ObjectCrop> {
    let (x0, y0, x1, y1) = mask
        .bounds()
        .ok_or_else(|| Error::invalid("object crop of an empty mask"))?;
    let kept = image.keep(mask)?;
    let (sx, sy, side) = square_window(x0, y0, x1, y1);
    Ok(ObjectCrop {
        raster: kept.crop(sx, sy, side, side),
        area: mask.area() as f64,
        center_of_mass: mask.centroid().expect("nonempty mask"),
    })
}

/// Minimal square of the image (not zeroed) enclosing every box.
pub fn square_region(image: &Raster, boxes: &[BBox]) -> Result<Raster> {
    let union = boxes
        .iter()
        .copied()
        .reduce(|a, b| a.union(&b))
        .ok_or_else(|| Error::invalid("square region of no boxes"))?;
    let x0 = union.x.floor().max(0.0) as u32;
    let y0 = union.y.floor().max(0.0) as u32;
    let x1 = (union.right().ceil() as u32).saturating_sub(1).max(x0);
    let y1 = (union.bottom().ceil() as u32).saturating_sub(1).max(y0);
    let (sx, sy, side) = square_window(x0, y0, x1, y1);
    Ok(image.crop(sx, sy, side, side))
}

/// Resizes a crop to the common comparison size.
pub fn normalize_crop(crop: &Raster) -> Raster {
    crop.resize(COMPARE_SIDE, COMPARE_SIDE)
}

/// Rec. 601 grayscale, down-scaled by 4 with block averaging and scaled back
/// up by pixel replication. Blocks at the right and bottom edges may be
/// partial. The round trip is idempotent, which a bilinear up-scale is not.
pub fn degrade(image: &Raster) -> Raster {
    let (w, h) = image.dims();
    let f = DEGRADE_FACTOR;
    let bw = w.div_ceil(f);
    let bh = h.div_ceil(f);
    let mut sums = vec![(0.0f64, 0u32); (bw * bh) as usize];
    for y in 0..h {
        for x in 0..w {
            let b = &mut sums[((y / f) * bw + x / f) as usize];
            b.0 += image.luma(x, y) as f64;
            b.1 += 1;
        }
    }
    Raster::from_fn(w, h, |x, y| {
        let (s, n) = sums[((y / f) * bw + x / f) as usize];
        [(s / n as f64) as f32; 3]
    })
}

/// Canny edges of the 8-bit luminance: 3×3 Sobel, L1 magnitude, non-maximum
/// suppression, and 8-connected hysteresis with thresholds 100 and 200.
pub fn edge_map(image: &Raster) -> Mask {
    let (w, h) = image.dims();
    let (wi, hi) = (w as i64, h as i64);
    let lum: Vec<f32> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (y, x)))
        .map(|(y, x)| (image.luma(x, y).clamp(0.0, 1.0) * 255.0).round())
        .collect();
    let at = |x: i64, y: i64| -> f32 {
        let cx = x.clamp(0, wi - 1);
        let cy = y.clamp(0, hi - 1);
        lum[(cy * wi + cx) as usize]
    };

    let n = (w * h) as usize;
    let mut dx = vec![0f32; n];
    let mut dy = vec![0f32; n];
    let mut mag = vec![0f32; n];
    for y in 0..hi {
        for x in 0..wi {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = (y * wi + x) as usize;
            dx[i] = gx;
            dy[i] = gy;
            mag[i] = gx.abs() + gy.abs();
        }
    }
    let m = |x: i64, y: i64| -> f32 {
        if x < 0 || y < 0 || x >= wi || y >= hi {
            0.0
        } else {
            mag[(y * wi + x) as usize]
        }
    };

    // 0 = not an edge, 1 = weak candidate, 2 = strong.
    let tan22 = (std::f32::consts::PI / 8.0).tan();
    let tan67 = (3.0 * std::f32::consts::PI / 8.0).tan();
    let mut state = vec![0u8; n];
    let mut stack = Vec::new();
    for y in 0..hi {
        for x in 0..wi {
            let i = (y * wi + x) as usize;
            let v = mag[i];
            if v <= CANNY_LOW {
                continue;
            }
            let (ax, ay) = (dx[i].abs(), dy[i].abs());
            let is_max = if ay < ax * tan22 {
                v > m(x - 1, y) && v >= m(x + 1, y)
            } else if ay > ax * tan67 {
                v > m(x, y - 1) && v >= m(x, y + 1)
            } else if (dx[i] < 0.0) != (dy[i] < 0.0) {
                v > m(x + 1, y - 1) && v > m(x - 1, y + 1)
            } else {
                v > m(x - 1, y - 1) && v > m(x + 1, y + 1)
            };
            if !is_max {
                continue;
            }
            if v > CANNY_HIGH {
                state[i] = 2;
                stack.push((x, y));
            } else {
                state[i] = 1;
            }
        }
    }
    while let Some((x, y)) = stack.pop() {
        for ny in (y - 1)..=(y + 1) {
            for nx in (x - 1)..=(x + 1) {
                if nx < 0 || ny < 0 || nx >= wi || ny >= hi {
                    continue;
                }
                let j = (ny * wi + nx) as usize;
                if state[j] == 1 {
                    state[j] = 2;
                    stack.push((nx, ny));
                }
            }
        }
    }
    Mask::from_fn(w, h, |x, y| state[(y * w + x) as usize] == 2)
}

/// Edge mask as a black/white raster for perceptual comparison.
pub fn edge_raster(image: &Raster) -> Raster {
    let e = edge_map(image);
    Raster::from_fn(e.width(), e.height(), |x, y| {
        if e.get(x, y) {
            [1.0; 3]
        } else {
            [0.0; 3]
        }
    })
}
