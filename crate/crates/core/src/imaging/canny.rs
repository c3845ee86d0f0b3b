use super::gradient::{sobel_gradients, GradientField, GradientNorm};
use super::{to_grayscale, Image, ImagingError};

/// tan(22.5 deg); integer gradients never land exactly on a bin boundary.
const TAN_22_5: f64 = std::f64::consts::SQRT_2 - 1.0;
const TAN_67_5: f64 = std::f64::consts::SQRT_2 + 1.0;

/// Binary edge mask with the dimensions of its source image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage { width, height });
        }
        if mask.len() != width * height {
            return Err(ImagingError::BufferSize {
                expected: width * height,
                actual: mask.len(),
            });
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&on| on).count()
    }

    /// True when every edge pixel of `self` is also an edge pixel of `other`.
    pub fn is_subset_of(&self, other: &EdgeMap) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    /// Grayscale rendering: 255 on edges, 0 elsewhere.
    pub fn to_image(&self) -> Image {
        let data = self
            .mask
            .iter()
            .map(|&on| if on { 255 } else { 0 })
            .collect();
        Image::new(self.width, self.height, 1, data).expect("edge map dimensions are valid")
    }
}

/// Hysteresis thresholds and gradient norm for [`canny_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub low: f64,
    pub high: f64,
    pub norm: GradientNorm,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            low: 100.0,
            high: 200.0,
            norm: GradientNorm::L2,
        }
    }
}

impl CannyParams {
    pub fn new(low: f64, high: f64) -> Self {
        Self {
            low,
            high,
            ..Self::default()
        }
    }

    pub fn with_norm(mut self, norm: GradientNorm) -> Self {
        self.norm = norm;
        self
    }

    pub fn validate(&self) -> Result<(), ImagingError> {
        let ok = self.low.is_finite()
            && self.high.is_finite()
            && 0.0 <= self.low
            && self.low <= self.high;
        if ok {
            Ok(())
        } else {
            Err(ImagingError::InvalidThresholds {
                low: self.low,
                high: self.high,
            })
        }
    }
}

/// Canny edges with the default L2 norm.
pub fn canny(img: &Image, low: f64, high: f64) -> Result<EdgeMap, ImagingError> {
    canny_with(img, &CannyParams::new(low, high))
}

/// Sobel gradients, non-maximum suppression along the quantized gradient
/// direction, then 8-connected double-threshold hysteresis.
///
/// Thresholds compare against the raw gradient magnitude. No smoothing is
/// applied; see [`gaussian_blur`](super::gaussian_blur). Color input is
/// converted with [`to_grayscale`] first. The outermost pixel ring is never
/// an edge.
pub fn canny_with(img: &Image, params: &CannyParams) -> Result<EdgeMap, ImagingError> {
    params.validate()?;
    let gray = to_grayscale(img);
    let gradients = sobel_gradients(&gray, params.norm)?;
    let candidates = non_maximum_suppression(&gradients, params.low);
    Ok(hysteresis(&gradients, &candidates, params.high))
}

/// Unit step along the quantized gradient direction (image y axis points down).
fn direction_step(gx: i16, gy: i16) -> (isize, isize) {
    let (ax, ay) = ((gx as f64).abs(), (gy as f64).abs());
    if ay <= TAN_22_5 * ax {
        (1, 0)
    } else if ay > TAN_67_5 * ax {
        (0, 1)
    } else if (gx > 0) == (gy > 0) {
        (1, 1)
    } else {
        (-1, 1)
    }
}

/// Marks interior pixels that are directional maxima with magnitude above `low`.
///
/// A pixel survives when it is strictly larger than the neighbor behind it
/// and at least as large as the one ahead, so plateaus stay one pixel wide.
fn non_maximum_suppression(g: &GradientField, low: f64) -> Vec<bool> {
    let (w, h) = (g.width(), g.height());
    let mag = g.magnitude();
    let mut keep = vec![false; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = mag[i];
            if (m as f64) <= low {
                continue;
            }
            let (dx, dy) = direction_step(g.gx()[i], g.gy()[i]);
            let ahead = ((y as isize + dy) as usize) * w + (x as isize + dx) as usize;
            let behind = ((y as isize - dy) as usize) * w + (x as isize - dx) as usize;
            keep[i] = m > mag[behind] && m >= mag[ahead];
        }
    }
    keep
}

fn hysteresis(g: &GradientField, candidates: &[bool], high: f64) -> EdgeMap {
    let (w, h) = (g.width(), g.height());
    let mag = g.magnitude();
    let mut mask = vec![false; w * h];
    let mut stack = Vec::new();
    for i in 0..w * h {
        if candidates[i] && mag[i] as f64 > high && !mask[i] {
            mask[i] = true;
            stack.push(i);
            while let Some(j) = stack.pop() {
                let (x, y) = (j % w, j / w);
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                        let k = ny * w + nx;
                        if candidates[k] && !mask[k] {
                            mask[k] = true;
                            stack.push(k);
                        }
                    }
                }
            }
        }
    }
    EdgeMap {
        width: w,
        height: h,
        mask,
    }
}
