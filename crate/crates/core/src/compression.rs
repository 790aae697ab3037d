//! Edge compression of the AR stream and the CR / PSNR / MOS quality utilities.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::time::SimTime;
use crate::traffic::GeneratorSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionSpec {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Generator whose stream is compressed.
    pub target: String,
    pub ratio: f64,
    pub processing_ms_per_mp: f64,
    pub resolution: [u32; 2],
}

fn yes() -> bool {
    true
}

impl CompressionSpec {
    pub fn new(target: &str, ratio: f64) -> Self {
        CompressionSpec {
            enabled: true,
            target: target.into(),
            ratio,
            processing_ms_per_mp: 20.0,
            resolution: [1920, 1080],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio.is_finite() && self.ratio >= 1.0) {
            return Err(SimError::config(format!("compression ratio {} below 1", self.ratio)));
        }
        if !(self.processing_ms_per_mp.is_finite() && self.processing_ms_per_mp >= 0.0) {
            return Err(SimError::config(format!(
                "processing rate {} ms/MP is negative",
                self.processing_ms_per_mp
            )));
        }
        if self.resolution.contains(&0) {
            return Err(SimError::config("resolution must be positive"));
        }
        Ok(())
    }

    pub fn processing_delay(&self) -> SimTime {
        processing_delay(self.resolution, self.processing_ms_per_mp)
    }
}

pub fn compression_ratio(uncompressed: f64, compressed: f64) -> Result<f64> {
    if !(compressed > 0.0 && uncompressed > 0.0) {
        return Err(SimError::domain(format!(
            "compression ratio needs positive sizes, got {uncompressed} / {compressed}"
        )));
    }
    Ok(uncompressed / compressed)
}

/// `megapixels × ms_per_mp`, rounded to the nearest nanosecond.
pub fn processing_delay(resolution: [u32; 2], ms_per_mp: f64) -> SimTime {
    let pixels = f64::from(resolution[0]) * f64::from(resolution[1]);
    // pixels / 1e6 MP × ms_per_mp × 1e6 ns/ms
    SimTime::from_nanos((pixels * ms_per_mp).round() as u64)
}

/// Stretches the interarrival by the ratio (same frame size, lower rate) and adds
/// the processing delay to every frame's injection.
pub fn apply_compression(spec: &GeneratorSpec, comp: &CompressionSpec) -> Result<GeneratorSpec> {
    comp.validate()?;
    let mut out = spec.clone();
    let ia = (spec.interarrival.as_nanos() as f64 * comp.ratio).round();
    if ia > u64::MAX as f64 {
        return Err(SimError::config("compressed interarrival overflows"));
    }
    out.interarrival = SimTime::from_nanos(ia as u64);
    out.injection_delay = spec.injection_delay + comp.processing_delay();
    if let Some(p) = out.phase.filter(|&p| p >= out.interarrival) {
        out.phase = Some(SimTime::from_nanos(p.as_nanos() % out.interarrival.as_nanos()));
    }
    Ok(out)
}

/// `10·log10(max² / mse)`; identical images (`mse = 0`) give `+∞`.
pub fn psnr(max_pixel_value: f64, mse: f64) -> Result<f64> {
    if max_pixel_value.is_nan() || max_pixel_value <= 0.0 {
        return Err(SimError::domain(format!("max pixel value {max_pixel_value} must be positive")));
    }
    if mse.is_nan() || mse < 0.0 {
        return Err(SimError::domain(format!("mse {mse} is negative")));
    }
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_pixel_value * max_pixel_value / mse).log10())
}

/// Lower PSNR bounds (dB) of MOS 5, 4, 3 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosThresholds(pub [f64; 4]);

impl Default for MosThresholds {
    fn default() -> Self {
        MosThresholds([37.0, 31.0, 25.0, 20.0])
    }
}

impl MosThresholds {
    pub fn validate(&self) -> Result<()> {
        if self.0.windows(2).any(|w| w[0].partial_cmp(&w[1]).is_none_or(|o| o.is_lt())) {
            return Err(SimError::config(format!("MOS thresholds {:?} not descending", self.0)));
        }
        Ok(())
    }
}

pub fn mos_from_psnr(psnr_db: f64, thresholds: &MosThresholds) -> u8 {
    thresholds
        .0
        .iter()
        .position(|&t| psnr_db >= t)
        .map_or(1, |i| 5 - i as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityPoint {
    pub psnr_db: f64,
    pub mos: u8,
}

impl QualityPoint {
    pub fn new(psnr_db: f64, thresholds: &MosThresholds) -> Self {
        QualityPoint {
            psnr_db,
            mos: mos_from_psnr(psnr_db, thresholds),
        }
    }
}
