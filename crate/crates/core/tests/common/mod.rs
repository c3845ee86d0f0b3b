//! Straightforward reference implementations used as test oracles.
//!
//! They share no code with the library and favour obviousness over speed.

#![allow(dead_code)]

/// Canny on a grayscale buffer: explicit Sobel kernels with clamped reads,
/// atan2 direction bins, and hysteresis iterated to a fixpoint.
pub fn naive_canny(w: usize, h: usize, px: &[u8], low: f64, high: f64, l1: bool) -> Vec<bool> {
    const KX: [[i32; 3]; 3] = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
    const KY: [[i32; 3]; 3] = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]];
    let read = |x: i64, y: i64| {
        px[(y.clamp(0, h as i64 - 1) as usize) * w + x.clamp(0, w as i64 - 1) as usize] as i32
    };

    let mut gx = vec![0i32; w * h];
    let mut gy = vec![0i32; w * h];
    let mut mag = vec![0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut sx, mut sy) = (0, 0);
            for (j, (rx, ry)) in KX.iter().zip(KY.iter()).enumerate() {
                for i in 0..3 {
                    let v = read(x as i64 + i as i64 - 1, y as i64 + j as i64 - 1);
                    sx += rx[i] * v;
                    sy += ry[i] * v;
                }
            }
            let k = y * w + x;
            gx[k] = sx;
            gy[k] = sy;
            mag[k] = if l1 {
                (sx.abs() + sy.abs()) as f64
            } else {
                (((sx * sx + sy * sy) as f64).sqrt()).round()
            };
        }
    }

    let mut thin = vec![false; w * h];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w - 1 {
            let k = y * w + x;
            if mag[k] <= low {
                continue;
            }
            let mut deg = (gy[k] as f64).atan2(gx[k] as f64).to_degrees();
            if deg < 0.0 {
                deg += 180.0;
            }
            let (dx, dy): (i64, i64) = if !(22.5..157.5).contains(&deg) {
                (1, 0)
            } else if deg < 67.5 {
                (1, 1)
            } else if deg < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let at =
                |ox: i64, oy: i64| mag[((y as i64 + oy) as usize) * w + (x as i64 + ox) as usize];
            thin[k] = mag[k] > at(-dx, -dy) && mag[k] >= at(dx, dy);
        }
    }

    let mut edge: Vec<bool> = (0..w * h).map(|k| thin[k] && mag[k] > high).collect();
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                let k = y * w + x;
                if edge[k] || !thin[k] {
                    continue;
                }
                let touches = (y.saturating_sub(1)..=(y + 1).min(h - 1)).any(|ny| {
                    (x.saturating_sub(1)..=(x + 1).min(w - 1)).any(|nx| edge[ny * w + nx])
                });
                if touches {
                    edge[k] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return edge;
        }
    }
}

/// Box with integer corners so overlaps are exact.
#[derive(Debug, Clone, Copy)]
pub struct IntBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
    pub score: f64,
}

/// IoU as an exact fraction `(intersection, union)`.
pub fn int_iou(a: &IntBox, b: &IntBox) -> (i64, i64) {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0);
    let inter = iw * ih;
    (inter, a.w * a.h + b.w * b.h - inter)
}

/// `p/q >= r/s` for positive denominators.
fn frac_ge((p, q): (i64, i64), (r, s): (i64, i64)) -> bool {
    (p as i128) * (s as i128) >= (r as i128) * (q as i128)
}

/// Greedy score-ordered matching with exact rational IoU comparisons.
/// `iou_min` is given as a fraction. Returns `(prediction, ground_truth)` pairs
/// in visiting order.
pub fn exact_greedy(
    preds: &[IntBox],
    gts: &[IntBox],
    iou_min: (i64, i64),
    score_min: f64,
) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..preds.len())
        .filter(|&i| preds[i].score >= score_min)
        .collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .score
            .partial_cmp(&preds[a].score)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut taken = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for p in order {
        let mut best: Option<(usize, (i64, i64))> = None;
        for g in 0..gts.len() {
            if taken[g] {
                continue;
            }
            let f = int_iou(&preds[p], &gts[g]);
            if f.0 == 0 || !frac_ge(f, iou_min) {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, b)) => frac_ge(f, b) && !frac_ge(b, f),
            };
            if better {
                best = Some((g, f));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            pairs.push((p, g));
        }
    }
    pairs
}

/// Size of a maximum one-to-one matching, by enumerating every assignment
/// of predictions to ground truth (or to nothing).
pub fn max_matching(eligible: &[Vec<bool>], n_gt: usize) -> usize {
    fn go(p: usize, eligible: &[Vec<bool>], used: &mut Vec<bool>) -> usize {
        if p == eligible.len() {
            return 0;
        }
        let mut best = go(p + 1, eligible, used);
        for g in 0..used.len() {
            if eligible[p][g] && !used[g] {
                used[g] = true;
                best = best.max(1 + go(p + 1, eligible, used));
                used[g] = false;
            }
        }
        best
    }
    go(0, eligible, &mut vec![false; n_gt])
}
