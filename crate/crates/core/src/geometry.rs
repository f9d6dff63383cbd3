//! Axis-aligned rectangles in normalized frame coordinates.
//!
//! Every rectangle lives in the unit square: `left`/`width` are fractions of
//! the frame width, `top`/`height` fractions of the frame height. The frame
//! itself is [`Rect::FULL`].

use alloc::vec::Vec;

use crate::Error;

/// Slack allowed on the `left + width <= 1` style bounds, so that rectangles
/// converted from integer pixel boxes are not rejected over one ulp.
pub const FRAME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

impl Rect {
    /// The whole frame, `(0, 0, 1, 1)`.
    pub const FULL: Rect = Rect {
        left: 0.0,
        top: 0.0,
        width: 1.0,
        height: 1.0,
    };

    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Result<Self, Error> {
        let ok = [left, top, width, height].iter().all(|v| v.is_finite())
            && width > 0.0
            && height > 0.0
            && left >= 0.0
            && top >= 0.0
            && left + width <= 1.0 + FRAME_EPS
            && top + height <= 1.0 + FRAME_EPS;
        if ok {
            Ok(Rect {
                left,
                top,
                width,
                height,
            })
        } else {
            Err(Error::InvalidRect {
                left,
                top,
                width,
                height,
            })
        }
    }

    /// Converts a pixel box to normalized coordinates using the frame size.
    pub fn from_pixels(
        left: f64,
        top: f64,
        width: f64,
        height: f64,
        frame_width: u32,
        frame_height: u32,
    ) -> Result<Self, Error> {
        if frame_width == 0 || frame_height == 0 {
            return Err(Error::InvalidFrameSize);
        }
        let fw = f64::from(frame_width);
        let fh = f64::from(frame_height);
        Rect::new(left / fw, top / fh, width / fw, height / fh)
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn top(&self) -> f64 {
        self.top
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn centroid(&self) -> (f64, f64) {
        (self.left + 0.5 * self.width, self.top + 0.5 * self.height)
    }

    /// Cheap interval rejection used before any area arithmetic.
    #[inline]
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.left < other.right()
            && other.left < self.right()
            && self.top < other.bottom()
            && other.top < self.bottom()
    }
}

pub fn intersection_area(a: &Rect, b: &Rect) -> f64 {
    overlap(a.left, a.width, b.left, b.width) * overlap(a.top, a.height, b.top, b.height)
}

/// Overlap of two 1-d intervals; nested intervals return the inner length
/// as stored, so containment is exact.
fn overlap(a_start: f64, a_len: f64, b_start: f64, b_len: f64) -> f64 {
    let (a_end, b_end) = (a_start + a_len, b_start + b_len);
    if a_start >= b_start && a_end <= b_end {
        a_len
    } else if b_start >= a_start && b_end <= a_end {
        b_len
    } else {
        (a_end.min(b_end) - a_start.max(b_start)).max(0.0)
    }
}

pub fn iou(a: &Rect, b: &Rect) -> f64 {
    let inter = intersection_area(a, b);
    if inter <= 0.0 {
        return 0.0;
    }
    if a == b {
        return 1.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// `|area(a) - area(b)|`
pub fn area_distance(a: &Rect, b: &Rect) -> f64 {
    (a.area() - b.area()).abs()
}

/// `|w_a - w_b| + |h_a - h_b|`
pub fn shape_distance(a: &Rect, b: &Rect) -> f64 {
    (a.width - b.width).abs() + (a.height - b.height).abs()
}

/// Euclidean distance between the two centroids.
pub fn centroid_distance(a: &Rect, b: &Rect) -> f64 {
    let (ax, ay) = a.centroid();
    let (bx, by) = b.centroid();
    libm::hypot(ax - bx, ay - by)
}

pub fn iou_distance(a: &Rect, b: &Rect) -> f64 {
    1.0 - iou(a, b)
}

/// Exact area of the union of `rects`.
///
/// Coordinate compression over the x edges; inside each vertical strip the
/// covering y-intervals are sorted and merged.
pub fn union_area(rects: &[Rect]) -> f64 {
    if rects.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = rects.iter().flat_map(|r| [r.left, r.right()]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let mut spans: Vec<(f64, f64)> = Vec::with_capacity(rects.len());
    let mut total = 0.0;
    for strip in xs.windows(2) {
        let (x0, x1) = (strip[0], strip[1]);
        spans.clear();
        spans.extend(
            rects
                .iter()
                .filter(|r| r.left <= x0 && r.right() >= x1)
                .map(|r| (r.top, r.bottom())),
        );
        if spans.is_empty() {
            continue;
        }
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut covered = 0.0;
        let (mut lo, mut hi) = spans[0];
        for &(s, e) in &spans[1..] {
            if s > hi {
                covered += hi - lo;
                lo = s;
                hi = e;
            } else if e > hi {
                hi = e;
            }
        }
        covered += hi - lo;
        total += covered * (x1 - x0);
    }
    total
}

/// Largest fraction of `b` covered by any single region; 0 for no regions.
pub fn max_coverage(b: &Rect, regions: &[Rect]) -> f64 {
    let area = b.area();
    regions
        .iter()
        .map(|r| intersection_area(b, r) / area)
        .fold(0.0, f64::max)
        .min(1.0)
}

/// Noise model applied to query rectangles in robustness experiments.
///
/// Shift sigmas are in normalized units per axis; the area sigma is the
/// standard deviation of a scale factor centred on 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationConfig {
    pub sigma_shift_x: f64,
    pub sigma_shift_y: f64,
    pub sigma_area: f64,
    pub master_seed: u64,
}

impl PerturbationConfig {
    pub fn new(sigma_shift: f64, sigma_area: f64, master_seed: u64) -> Result<Self, Error> {
        Self::anisotropic(sigma_shift, sigma_shift, sigma_area, master_seed)
    }

    pub fn anisotropic(
        sigma_shift_x: f64,
        sigma_shift_y: f64,
        sigma_area: f64,
        master_seed: u64,
    ) -> Result<Self, Error> {
        for s in [sigma_shift_x, sigma_shift_y, sigma_area] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::InvalidSigma(s));
            }
        }
        Ok(PerturbationConfig {
            sigma_shift_x,
            sigma_shift_y,
            sigma_area,
            master_seed,
        })
    }

    /// Builds a config from a pixel shift sigma measured on a reference frame.
    pub fn from_pixels(
        sigma_shift_px: f64,
        sigma_area: f64,
        frame_width: u32,
        frame_height: u32,
        master_seed: u64,
    ) -> Result<Self, Error> {
        if frame_width == 0 || frame_height == 0 {
            return Err(Error::InvalidFrameSize);
        }
        Self::anisotropic(
            sigma_shift_px / f64::from(frame_width),
            sigma_shift_px / f64::from(frame_height),
            sigma_area,
            master_seed,
        )
    }

    pub fn is_identity(&self) -> bool {
        self.sigma_shift_x == 0.0 && self.sigma_shift_y == 0.0 && self.sigma_area == 0.0
    }
}

/// Smallest scale factor a draw can produce.
pub const MIN_SCALE: f64 = 0.05;

/// The four realized random quantities of one perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationDraws {
    pub scale_x: f64,
    pub scale_y: f64,
    pub shift_x: f64,
    pub shift_y: f64,
}

impl PerturbationDraws {
    /// Draws in fixed order: scale x, scale y, shift x, shift y.
    pub fn sample(cfg: &PerturbationConfig, query_key: &str) -> Self {
        let mut normals = crate::rng::NormalStream::for_key(cfg.master_seed, query_key);
        let za_x = normals.next_standard();
        let za_y = normals.next_standard();
        let zs_x = normals.next_standard();
        let zs_y = normals.next_standard();
        PerturbationDraws {
            scale_x: 1.0 + cfg.sigma_area * za_x,
            scale_y: 1.0 + cfg.sigma_area * za_y,
            shift_x: cfg.sigma_shift_x * zs_x,
            shift_y: cfg.sigma_shift_y * zs_y,
        }
    }

    /// Scales about the centroid, shifts, then translates back into the frame.
    pub fn apply(&self, r: &Rect) -> Rect {
        let (left, width) = perturb_axis(r.left, r.width, self.scale_x, self.shift_x);
        let (top, height) = perturb_axis(r.top, r.height, self.scale_y, self.shift_y);
        Rect {
            left,
            top,
            width,
            height,
        }
    }
}

fn perturb_axis(start: f64, len: f64, scale: f64, shift: f64) -> (f64, f64) {
    let new_len = (len * scale.max(MIN_SCALE)).min(1.0);
    // written as an offset so unit scale leaves `start` bit-identical
    let mut new_start = start + (len - new_len) / 2.0 + shift;
    if new_start < 0.0 {
        new_start = 0.0;
    } else if new_start + new_len > 1.0 + FRAME_EPS {
        new_start = 1.0 - new_len;
    }
    (new_start, new_len)
}

/// Perturbs `r` with draws from the substream keyed by `(cfg.master_seed, query_key)`.
pub fn perturb_rect(r: &Rect, cfg: &PerturbationConfig, query_key: &str) -> Rect {
    PerturbationDraws::sample(cfg, query_key).apply(r)
}
