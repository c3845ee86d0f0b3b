//! Raster images and the edge-domain mapping applied before detection and
//! pose estimation.
//!
//! Images are 8-bit, row-major, with 1 (grayscale) or 3 (interleaved RGB)
//! channels. The mapping from a color image to its edge-domain counterpart is
//! [`canny`]; [`composite_rgb_edges`] keeps the color and paints the edges on
//! top.

mod canny;
mod gradient;
mod io;

use std::path::PathBuf;

use thiserror::Error;

pub use canny::{canny, canny_with, CannyParams, EdgeMap};
pub use gradient::{gaussian_blur, sobel_gradients, GradientField, GradientNorm};
pub use io::{load_png, save_png};

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(usize),
    #[error("buffer holds {actual} samples, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("image is {width}x{height}, operation needs at least 3x3")]
    TooSmall { width: usize, height: usize },
    #[error("invalid thresholds: low={low}, high={high} (need 0 <= low <= high)")]
    InvalidThresholds { low: f64, high: f64 },
    #[error("dimension mismatch: image is {image:?}, edge map is {edges:?}")]
    DimensionMismatch {
        image: (usize, usize),
        edges: (usize, usize),
    },
    #[error("expected a {expected}-channel image, got {actual} channels")]
    ChannelMismatch { expected: usize, actual: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: cannot decode PNG: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("{path}: cannot encode PNG: {message}")]
    Encode { path: PathBuf, message: String },
    #[error("{path}: unsupported PNG format ({detail}); need 8-bit gray or RGB")]
    UnsupportedFormat { path: PathBuf, detail: String },
}

/// An 8-bit raster with 1 or 3 interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage { width, height });
        }
        if channels != 1 && channels != 3 {
            return Err(ImagingError::UnsupportedChannels(channels));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(ImagingError::BufferSize {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image with every sample set to `value`.
    pub fn filled(
        width: usize,
        height: usize,
        channels: usize,
        value: u8,
    ) -> Result<Self, ImagingError> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
    }

    /// Builds a grayscale image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn_gray(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, ImagingError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Samples of the pixel at `(x, y)`.
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Replicates a grayscale image into three identical channels. Color
    /// images are returned as a copy.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }
}

/// BT.601 luma, `round(0.299 R + 0.587 G + 0.114 B)` with halves rounded up.
///
/// Evaluated in integer thousandths so the rounding is exact. Grayscale
/// input is returned unchanged.
pub fn to_grayscale(img: &Image) -> Image {
    if img.channels == 1 {
        return img.clone();
    }
    let data = img
        .data
        .chunks_exact(3)
        .map(|px| {
            let weighted = 299 * px[0] as u32 + 587 * px[1] as u32 + 114 * px[2] as u32;
            ((weighted + 500) / 1000).min(255) as u8
        })
        .collect();
    Image {
        width: img.width,
        height: img.height,
        channels: 1,
        data,
    }
}

/// Paints every edge pixel white on top of a color image.
pub fn composite_rgb_edges(img: &Image, edges: &EdgeMap) -> Result<Image, ImagingError> {
    if img.channels != 3 {
        return Err(ImagingError::ChannelMismatch {
            expected: 3,
            actual: img.channels,
        });
    }
    if (img.width, img.height) != (edges.width(), edges.height()) {
        return Err(ImagingError::DimensionMismatch {
            image: (img.width, img.height),
            edges: (edges.width(), edges.height()),
        });
    }
    let mut data = img.data.clone();
    for (px, &on) in data.chunks_exact_mut(3).zip(edges.mask()) {
        if on {
            px.fill(255);
        }
    }
    Ok(Image {
        width: img.width,
        height: img.height,
        channels: 3,
        data,
    })
}
