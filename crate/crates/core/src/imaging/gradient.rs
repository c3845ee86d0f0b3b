use super::{Image, ImagingError};

/// Norm used to turn `(gx, gy)` into an edge strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientNorm {
    /// `|gx| + |gy|`.
    L1,
    /// `round(sqrt(gx^2 + gy^2))`.
    #[default]
    L2,
}

impl GradientNorm {
    pub fn magnitude(self, gx: i16, gy: i16) -> u32 {
        let (gx, gy) = (gx as i32, gy as i32);
        match self {
            GradientNorm::L1 => gx.unsigned_abs() + gy.unsigned_abs(),
            // sqrt of an integer is never exactly k + 0.5, so round() is unambiguous
            GradientNorm::L2 => ((gx * gx + gy * gy) as f64).sqrt().round() as u32,
        }
    }
}

/// Per-pixel 3x3 Sobel derivatives of a grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradientField {
    width: usize,
    height: usize,
    norm: GradientNorm,
    gx: Vec<i16>,
    gy: Vec<i16>,
    magnitude: Vec<u32>,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn norm(&self) -> GradientNorm {
        self.norm
    }

    /// Horizontal derivative, positive where intensity grows to the right.
    pub fn gx(&self) -> &[i16] {
        &self.gx
    }

    /// Vertical derivative, positive where intensity grows downwards.
    pub fn gy(&self) -> &[i16] {
        &self.gy
    }

    pub fn magnitude(&self) -> &[u32] {
        &self.magnitude
    }
}

/// Sobel gradients with replicated borders.
///
/// Needs a 1-channel image of at least 3x3.
pub fn sobel_gradients(img: &Image, norm: GradientNorm) -> Result<GradientField, ImagingError> {
    if img.channels() != 1 {
        return Err(ImagingError::ChannelMismatch {
            expected: 1,
            actual: img.channels(),
        });
    }
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(ImagingError::TooSmall {
            width: w,
            height: h,
        });
    }
    let data = img.data();
    let at = |x: isize, y: isize| -> i32 {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        data[y * w + x] as i32
    };

    let n = w * h;
    let mut gx = Vec::with_capacity(n);
    let mut gy = Vec::with_capacity(n);
    let mut magnitude = Vec::with_capacity(n);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let dx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
            let dy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
            // |d| <= 4 * 255
            let (dx, dy) = (dx as i16, dy as i16);
            gx.push(dx);
            gy.push(dy);
            magnitude.push(norm.magnitude(dx, dy));
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        norm,
        gx,
        gy,
        magnitude,
    })
}

const BLUR_SIGMA: f64 = 1.4;
const BLUR_RADIUS: isize = 2;

/// 5x5 Gaussian smoothing (sigma 1.4) with replicated borders.
///
/// Not part of [`canny`](super::canny); callers opt in explicitly.
pub fn gaussian_blur(img: &Image) -> Image {
    let taps: Vec<f64> = (-BLUR_RADIUS..=BLUR_RADIUS)
        .map(|k| (-((k * k) as f64) / (2.0 * BLUR_SIGMA * BLUR_SIGMA)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    let taps: Vec<f64> = taps.iter().map(|t| t / sum).collect();

    let (w, h, c) = (img.width(), img.height(), img.channels());
    let src = img.data();
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut horizontal = vec![0.0f64; w * h * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (i, t) in taps.iter().enumerate() {
                    let sx = clamp(x as isize + i as isize - BLUR_RADIUS, w);
                    acc += t * src[(y * w + sx) * c + ch] as f64;
                }
                horizontal[(y * w + x) * c + ch] = acc;
            }
        }
    }

    let mut out = vec![0u8; w * h * c];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (i, t) in taps.iter().enumerate() {
                    let sy = clamp(y as isize + i as isize - BLUR_RADIUS, h);
                    acc += t * horizontal[(sy * w + x) * c + ch];
                }
                out[(y * w + x) * c + ch] = (acc + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Image::new(w, h, c, out).expect("blur preserves the buffer layout")
}
