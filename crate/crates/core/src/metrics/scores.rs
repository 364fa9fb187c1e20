//! Normalized atomic scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SizeDirection;
use crate::raster::Raster;

/// Unit-norm tolerance on embeddings fed to [`clip_alignment`].
pub const UNIT_TOLERANCE: f64 = 1e-4;

/// `1 - tanh(fid / 25)`.
pub fn iq_score(fid: f64) -> Result<f64> {
    if !(fid >= 0.0) {
        return Err(Error::invalid(format!("FID must be nonnegative, got {fid}")));
    }
    Ok(1.0 - (fid / 25.0).tanh())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine of a zero vector"));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Maps a cosine similarity of unit vectors to `[0, 1]` as `(c + 1) / 2`.
pub fn clip_alignment(text: &[f64], image: &[f64]) -> Result<f64> {
    for (name, v) in [("text", text), ("image", image)] {
        let n = norm(v);
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::invalid(format!(
                "{name} embedding has norm {n}, expected unit length"
            )));
        }
    }
    Ok((cosine(text, image)? + 1.0) / 2.0)
}

/// `(cos + 1) / 2` for patch embeddings.
pub fn embedding_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok((cosine(a, b)? + 1.0) / 2.0)
}

/// `1 / (1 + d)`.
pub fn distance_to_similarity(d: f64) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::invalid(format!("distance must be nonnegative, got {d}")));
    }
    Ok(1.0 / (1.0 + d))
}

/// `1 - RMSE` over all channel values of two unit-range rasters.
pub fn l2_similarity(a: &Raster, b: &Raster) -> Result<f64> {
    a.check_same(b.dims())?;
    let n = a.data().len();
    if n == 0 {
        return Ok(1.0);
    }
    let se: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (*x as f64 - *y as f64).powi(2))
        .sum();
    Ok((1.0 - (se / n as f64).sqrt()).clamp(0.0, 1.0))
}

/// Full-score thresholds of the size-fidelity ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeThresholds {
    pub r1: f64,
    pub r2: f64,
}

impl Default for SizeThresholds {
    fn default() -> Self {
        SizeThresholds {
            r1: 1.5,
            r2: 2.0 / 3.0,
        }
    }
}

impl SizeThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.r1 > 1.0 && 1.0 > self.r2 && self.r2 > 0.0) {
            return Err(Error::invalid(format!(
                "size thresholds need r1 > 1 > r2 > 0, got r1 = {}, r2 = {}",
                self.r1, self.r2
            )));
        }
        Ok(())
    }
}

fn check_area(name: &str, a: f64) -> Result<()> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::invalid(format!("{name} must be a nonnegative area, got {a}")));
    }
    Ok(())
}

/// Rewards a size change in the requested direction. `rho = sqrt(ae / a0)`.
pub fn size_fidelity(
    a0: f64,
    ae: f64,
    direction: SizeDirection,
    thresholds: SizeThresholds,
) -> Result<f64> {
    thresholds.validate()?;
    if !(a0 > 0.0) {
        return Err(Error::invalid(format!("original area must be positive, got {a0}")));
    }
    check_area("edited area", ae)?;
    let rho = (ae / a0).sqrt();
    let SizeThresholds { r1, r2 } = thresholds;
    Ok(match direction {
        SizeDirection::Larger => {
            if rho <= 1.0 {
                0.0
            } else if rho >= r1 {
                1.0
            } else {
                (rho - 1.0) / (r1 - 1.0)
            }
        }
        SizeDirection::Smaller => {
            if rho >= 1.0 {
                0.0
            } else if rho <= r2 {
                1.0
            } else {
                (1.0 - rho) / (1.0 - r2)
            }
        }
    })
}

/// Rewards preserved size: 1 at `rho = 1`, linear down to 0 at `rho = 0` and
/// at the largest possible growth `r3 = sqrt(HW / a0)`.
pub fn size_consistency(a0: f64, ae: f64, height: f64, width: f64) -> Result<f64> {
    let hw = height * width;
    if !(a0 > 0.0) || a0 > hw {
        return Err(Error::invalid(format!(
            "original area {a0} must lie in (0, {hw}]"
        )));
    }
    check_area("edited area", ae)?;
    let rho = (ae / a0).sqrt();
    if rho <= 1.0 {
        return Ok(rho);
    }
    let r3 = (hw / a0).sqrt();
    if r3 <= 1.0 {
        return Ok(0.0);
    }
    Ok((1.0 - (rho - 1.0) / (r3 - 1.0)).max(0.0))
}

/// Center-of-mass displacement relative to the image diagonal.
pub fn position_consistency(
    com0: (f64, f64),
    com_e: (f64, f64),
    a0: f64,
    height: f64,
    width: f64,
) -> Result<f64> {
    if !(a0 > 0.0) {
        return Err(Error::invalid(format!("original area must be positive, got {a0}")));
    }
    let d = ((com_e.0 - com0.0).powi(2) + (com_e.1 - com0.1).powi(2)).sqrt();
    let scale = a0.sqrt();
    let relative = d / scale;
    let max_relative = (height * height + width * width).sqrt() / scale;
    Ok((1.0 - relative / max_relative).max(0.0))
}
