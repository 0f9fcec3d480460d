//! Pixel statistics of images on the 0–255 scale. Every metric is computed
//! per channel and averaged over channels.

use serde::Serialize;

use crate::error::{Error, Result};

/// Values below this or above `255 − SATURATION_MARGIN` count as saturated.
pub const SATURATION_MARGIN: f64 = 2.55;

/// An `H x W x C` image stored row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pixels: Vec<f64>,
    height: usize,
    width: usize,
    channels: usize,
}

impl ImageTensor {
    pub fn new(pixels: Vec<f64>, height: usize, width: usize, channels: usize) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Validation(format!(
                "expected 1 or 3 channels, got {channels}"
            )));
        }
        if height == 0 || width == 0 {
            return Err(Error::Validation(format!("empty image {height}x{width}")));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::Validation(format!(
                "{} values cannot fill a {height}x{width}x{channels} image",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !(0.0..=255.0).contains(v)) {
            return Err(Error::Validation(format!(
                "pixel value {} at index {i} is outside [0, 255]",
                pixels[i]
            )));
        }
        Ok(Self {
            pixels,
            height,
            width,
            channels,
        })
    }

    pub fn from_u8(bytes: &[u8], height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::new(
            bytes.iter().map(|&b| f64::from(b)).collect(),
            height,
            width,
            channels,
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.pixels[(i * self.width + j) * self.channels + c]
    }

    fn channel_mean(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.channels).map(f).sum::<f64>() / self.channels as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageMetrics {
    pub total_variation: f64,
    pub entropy_bits: f64,
    pub saturation_pct: f64,
}

/// Mean of `|x[i,j+1] − x[i,j]| + |x[i+1,j] − x[i,j]|` over pixels that have
/// both forward neighbours.
pub fn total_variation(img: &ImageTensor) -> Result<f64> {
    let (h, w) = (img.height, img.width);
    if h < 2 || w < 2 {
        return Err(Error::Validation(format!(
            "total variation needs at least a 2x2 image, got {h}x{w}"
        )));
    }
    let count = ((h - 1) * (w - 1)) as f64;
    Ok(img.channel_mean(|c| {
        let mut s = 0.0;
        for i in 0..h - 1 {
            for j in 0..w - 1 {
                let v = img.get(i, j, c);
                s += (img.get(i, j + 1, c) - v).abs() + (img.get(i + 1, j, c) - v).abs();
            }
        }
        s / count
    }))
}

/// Shannon entropy in bits of the 256-bin histogram of floored intensities.
pub fn entropy(img: &ImageTensor) -> f64 {
    let n = (img.height * img.width) as f64;
    img.channel_mean(|c| {
        let mut counts = [0u64; 256];
        for v in img.pixels.iter().skip(c).step_by(img.channels) {
            counts[(v.floor() as usize).min(255)] += 1;
        }
        counts
            .iter()
            .filter(|&&k| k > 0)
            .map(|&k| {
                let p = k as f64 / n;
                -p * p.log2()
            })
            .sum::<f64>()
            .max(0.0)
    })
}

/// Percentage of values in the bottom or top 1% of the intensity range.
pub fn saturation_pct(img: &ImageTensor) -> f64 {
    let n = (img.height * img.width) as f64;
    img.channel_mean(|c| {
        let saturated = img
            .pixels
            .iter()
            .skip(c)
            .step_by(img.channels)
            .filter(|v| !(SATURATION_MARGIN..=255.0 - SATURATION_MARGIN).contains(*v))
            .count();
        100.0 * saturated as f64 / n
    })
}

pub fn image_metrics(img: &ImageTensor) -> Result<ImageMetrics> {
    Ok(ImageMetrics {
        total_variation: total_variation(img)?,
        entropy_bits: entropy(img),
        saturation_pct: saturation_pct(img),
    })
}
