//! RGB rasters with unit-range channels, binary masks, and PNG I/O.

use std::path::Path;

use image::imageops::FilterType;
use image::{GrayImage, Luma, Rgb, Rgb32FImage, RgbImage};

use crate::error::{Error, Result};
use crate::model::BBox;

/// Row-major interleaved RGB raster, channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl Raster {
    pub fn new(width: u32, height: u32) -> Self {
        Raster::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: u32, height: u32, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            data.extend_from_slice(&rgb);
        }
        Raster {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Raster {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    fn idx(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> [f32; 3] {
        let i = self.idx(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [f32; 3]) {
        let i = self.idx(x, y);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Rec. 601 luma of one pixel.
    pub fn luma(&self, x: u32, y: u32) -> f32 {
        let [r, g, b] = self.get(x, y);
        0.299 * r + 0.587 * g + 0.114 * b
    }

    pub fn to_image(&self) -> Rgb32FImage {
        Rgb32FImage::from_raw(self.width, self.height, self.data.clone())
            .expect("buffer matches dimensions")
    }

    pub fn from_image(img: &Rgb32FImage) -> Self {
        Raster {
            width: img.width(),
            height: img.height(),
            data: img.as_raw().clone(),
        }
    }

    pub fn to_rgb8(&self) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| {
            let p = self.get(x, y);
            Rgb(p.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
        })
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        Raster::from_fn(img.width(), img.height(), |x, y| {
            img.get_pixel(x, y).0.map(|v| v as f32 / 255.0)
        })
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(Raster::from_rgb8(&img.to_rgb8()))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.to_rgb8().save(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Bilinear (triangle-filter) resampling.
    pub fn resize(&self, width: u32, height: u32) -> Raster {
        if (width, height) == self.dims() {
            return self.clone();
        }
        let out = image::imageops::resize(&self.to_image(), width, height, FilterType::Triangle);
        let mut r = Raster::from_image(&out);
        r.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        r
    }

    /// Crops a window that may extend past the border; outside pixels are zero.
    pub fn crop(&self, x0: i64, y0: i64, width: u32, height: u32) -> Raster {
        Raster::from_fn(width, height, |x, y| {
            let sx = x0 + x as i64;
            let sy = y0 + y as i64;
            if sx < 0 || sy < 0 || sx >= self.width as i64 || sy >= self.height as i64 {
                [0.0; 3]
            } else {
                self.get(sx as u32, sy as u32)
            }
        })
    }

    /// Keeps pixels inside the mask, zeroing the rest.
    pub fn keep(&self, mask: &Mask) -> Result<Raster> {
        self.check_same(mask.dims())?;
        Ok(Raster::from_fn(self.width, self.height, |x, y| {
            if mask.get(x, y) {
                self.get(x, y)
            } else {
                [0.0; 3]
            }
        }))
    }

    /// Zeroes pixels inside the mask.
    pub fn blank(&self, mask: &Mask) -> Result<Raster> {
        self.check_same(mask.dims())?;
        Ok(Raster::from_fn(self.width, self.height, |x, y| {
            if mask.get(x, y) {
                [0.0; 3]
            } else {
                self.get(x, y)
            }
        }))
    }

    pub fn check_same(&self, dims: (u32, u32)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::Dimension(format!(
                "raster is {}x{}, expected {}x{}",
                self.width, self.height, dims.0, dims.1
            )));
        }
        Ok(())
    }
}

/// Binary mask in image coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl Mask {
    pub fn empty(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            data: vec![true; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Mask {
            width,
            height,
            data,
        }
    }

    /// Pixels whose centers fall inside the box.
    pub fn from_bbox(width: u32, height: u32, b: &BBox) -> Self {
        Mask::from_fn(width, height, |x, y| {
            let cx = x as f64 + 0.5;
            let cy = y as f64 + 0.5;
            cx >= b.x && cx < b.right() && cy >= b.y && cy < b.bottom()
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = v;
    }

    pub fn area(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|v| *v)
    }

    /// Tight pixel bounds `(x0, y0, x1, y1)`, inclusive.
    pub fn bounds(&self) -> Option<(u32, u32, u32, u32)> {
        let mut b: Option<(u32, u32, u32, u32)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    b = Some(match b {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        b
    }

    pub fn bbox(&self) -> Option<BBox> {
        self.bounds().map(|(x0, y0, x1, y1)| {
            BBox::new(
                x0 as f64,
                y0 as f64,
                (x1 - x0 + 1) as f64,
                (y1 - y0 + 1) as f64,
            )
        })
    }

    /// Mean of pixel-center coordinates.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    sx += x as f64 + 0.5;
                    sy += y as f64 + 0.5;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        if self.dims() != other.dims() {
            return Err(Error::Dimension(format!(
                "mask union of {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a || *b).collect(),
        })
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let g = img.to_luma8();
        Ok(Mask::from_fn(g.width(), g.height(), |x, y| {
            g.get_pixel(x, y).0[0] >= 128
        }))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let img = GrayImage::from_fn(self.width, self.height, |x, y| {
            Luma([if self.get(x, y) { 255 } else { 0 }])
        });
        img.save(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Nearest-neighbour resampling of a window `(x0, y0, side_w, side_h)`
    /// of this mask onto a `width`×`height` grid.
    pub fn resample_window(
        &self,
        x0: f64,
        y0: f64,
        win_w: f64,
        win_h: f64,
        width: u32,
        height: u32,
    ) -> Mask {
        Mask::from_fn(width, height, |x, y| {
            let sx = x0 + (x as f64 + 0.5) * win_w / width as f64;
            let sy = y0 + (y as f64 + 0.5) * win_h / height as f64;
            let (ix, iy) = (sx.floor(), sy.floor());
            ix >= 0.0
                && iy >= 0.0
                && (ix as u32) < self.width
                && (iy as u32) < self.height
                && self.get(ix as u32, iy as u32)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_exact_on_8bit_values() {
        let dir = tempfile::tempdir().unwrap();
        let r = Raster::from_fn(7, 5, |x, y| {
            [x as f32 * 30.0 / 255.0, y as f32 * 50.0 / 255.0, 1.0]
        });
        let p = dir.path().join("a.png");
        r.save_png(&p).unwrap();
        let back = Raster::load_png(&p).unwrap();
        assert_eq!(back.dims(), (7, 5));
        for (a, b) in r.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn mask_geometry() {
        let m = Mask::from_bbox(20, 20, &BBox::new(2.0, 4.0, 10.0, 6.0));
        assert_eq!(m.area(), 60);
        assert_eq!(m.bounds(), Some((2, 4, 11, 9)));
        assert_eq!(m.centroid(), Some((7.0, 7.0)));
        assert_eq!(m.bbox(), Some(BBox::new(2.0, 4.0, 10.0, 6.0)));
    }

    #[test]
    fn crop_pads_with_zero() {
        let r = Raster::filled(4, 4, [1.0; 3]);
        let c = r.crop(-2, 0, 4, 4);
        assert_eq!(c.get(0, 0), [0.0; 3]);
        assert_eq!(c.get(2, 0), [1.0; 3]);
    }
}
