//! Test-only oracles and synthetic data.
//!
//! Nothing here calls into the ranking or geometry code it is used to check:
//! rectangles are plain tuples, distances are recomputed from their formulas
//! and the ranking is a straight enumerate-and-sort.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use subsearch_core::{
    CandidateMode, DistanceKind, EmbeddingVector, Fusion, ImageRecord, IndexedCollection, Rect,
    RegionRecord, RegionSource,
};

/// `(left, top, width, height)`
pub type RawRect = (f64, f64, f64, f64);

pub fn to_rect(r: RawRect) -> Rect {
    Rect::new(r.0, r.1, r.2, r.3).expect("generated rect is valid")
}

pub fn random_rect(rng: &mut StdRng) -> RawRect {
    let w = rng.random_range(0.02..0.9);
    let h = rng.random_range(0.02..0.9);
    let l = rng.random_range(0.0..(1.0 - w));
    let t = rng.random_range(0.0..(1.0 - h));
    (l, t, w, h)
}

/// Rect whose edges sit on the `1/cells` lattice.
pub fn lattice_rect(rng: &mut StdRng, cells: u32) -> RawRect {
    let w = rng.random_range(1..=cells / 2);
    let h = rng.random_range(1..=cells / 2);
    let l = rng.random_range(0..=cells - w);
    let t = rng.random_range(0..=cells - h);
    let c = f64::from(cells);
    (
        f64::from(l) / c,
        f64::from(t) / c,
        f64::from(w) / c,
        f64::from(h) / c,
    )
}

// ---------------------------------------------------------------------------
// rasterization

pub const RASTER: usize = 1000;

fn covered_cells(start: f64, len: f64) -> (usize, usize) {
    // cells whose centre (i + 0.5) / RASTER lies inside [start, start + len)
    let n = RASTER as f64;
    let lo = (start * n - 0.5).ceil().max(0.0) as usize;
    let hi = ((start + len) * n - 0.5).ceil().clamp(0.0, n) as usize;
    (lo, hi.max(lo))
}

/// Area of the union by counting covered pixel centres on a 1000x1000 grid.
pub fn raster_union(rects: &[RawRect]) -> f64 {
    let mut count = 0usize;
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for row in 0..RASTER {
        spans.clear();
        for r in rects {
            let (y0, y1) = covered_cells(r.1, r.3);
            if row >= y0 && row < y1 {
                spans.push(covered_cells(r.0, r.2));
            }
        }
        spans.sort();
        let mut end = 0usize;
        for &(s, e) in &spans {
            let s = s.max(end);
            if e > s {
                count += e - s;
                end = e;
            }
        }
    }
    count as f64 / (RASTER * RASTER) as f64
}

pub fn raster_intersection(a: RawRect, b: RawRect) -> f64 {
    let (ax0, ax1) = covered_cells(a.0, a.2);
    let (ay0, ay1) = covered_cells(a.1, a.3);
    let (bx0, bx1) = covered_cells(b.0, b.2);
    let (by0, by1) = covered_cells(b.1, b.3);
    let w = ax1.min(bx1).saturating_sub(ax0.max(bx0));
    let h = ay1.min(by1).saturating_sub(ay0.max(by0));
    (w * h) as f64 / (RASTER * RASTER) as f64
}

pub fn raster_iou(a: RawRect, b: RawRect) -> f64 {
    let inter = raster_intersection(a, b);
    let union = raster_union(&[a, b]);
    if union == 0.0 {
        0.0
    } else {
        inter / union
    }
}

// ---------------------------------------------------------------------------
// brute-force ranking

#[derive(Debug, Clone)]
pub struct RawRegion {
    pub id: String,
    pub rect: RawRect,
    pub embedding: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct RawImage {
    pub id: String,
    pub frame_embedding: Vec<f32>,
    pub regions: Vec<RawRegion>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub dim: usize,
    pub images: Vec<RawImage>,
}

impl Instance {
    pub fn to_collection(&self) -> IndexedCollection {
        let mut matrix = Vec::new();
        let mut rows = 0;
        let mut images = Vec::new();
        for im in &self.images {
            matrix.extend_from_slice(&im.frame_embedding);
            let frame_row = rows;
            rows += 1;
            let mut regions = Vec::new();
            for r in &im.regions {
                matrix.extend_from_slice(&r.embedding);
                regions.push(RegionRecord {
                    region_id: r.id.clone(),
                    rect: to_rect(r.rect),
                    embedding_row: rows,
                    source: RegionSource::Detector,
                });
                rows += 1;
            }
            images.push(ImageRecord {
                image_id: im.id.clone(),
                frame_width_px: 1280,
                frame_height_px: 720,
                frame_embedding_row: frame_row,
                regions,
            });
        }
        IndexedCollection::new(self.dim, images, matrix).expect("valid instance")
    }
}

pub fn unit_vector(rng: &mut StdRng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.iter().map(|x| (x / n) as f32).collect();
        }
    }
}

pub fn normalized(v: &[f64]) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / n) as f32).collect()
}

/// Up to `max_images` images with up to `max_regions` random regions each.
/// Ids are shuffled so collection order differs from id order.
pub fn random_instance(
    rng: &mut StdRng,
    max_images: usize,
    max_regions: usize,
    dim: usize,
) -> Instance {
    let n = rng.random_range(1..=max_images);
    let mut ids: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        ids.swap(i, j);
    }
    let images = ids
        .into_iter()
        .map(|k| {
            let m = rng.random_range(0..=max_regions);
            let mut rids: Vec<usize> = (0..m).collect();
            for i in (1..m).rev() {
                let j = rng.random_range(0..=i);
                rids.swap(i, j);
            }
            RawImage {
                id: format!("img{k:03}"),
                frame_embedding: unit_vector(rng, dim),
                regions: rids
                    .into_iter()
                    .map(|r| RawRegion {
                        id: format!("r{r:02}"),
                        rect: random_rect(rng),
                        embedding: unit_vector(rng, dim),
                    })
                    .collect(),
            }
        })
        .collect();
    Instance { dim, images }
}

fn raw_inter(a: RawRect, b: RawRect) -> f64 {
    let w = (a.0 + a.2).min(b.0 + b.2) - a.0.max(b.0);
    let h = (a.1 + a.3).min(b.1 + b.3) - a.1.max(b.1);
    if w > 0.0 && h > 0.0 {
        w * h
    } else {
        0.0
    }
}

fn raw_iou(a: RawRect, b: RawRect) -> f64 {
    let i = raw_inter(a, b);
    i / (a.2 * a.3 + b.2 * b.3 - i)
}

pub fn raw_distance(kind: DistanceKind, a: RawRect, b: RawRect) -> f64 {
    match kind {
        DistanceKind::None => 0.0,
        DistanceKind::Area => (a.2 * a.3 - b.2 * b.3).abs(),
        DistanceKind::Shape => (a.2 - b.2).abs() + (a.3 - b.3).abs(),
        DistanceKind::Centroid => {
            let dx = (a.0 + a.2 / 2.0) - (b.0 + b.2 / 2.0);
            let dy = (a.1 + a.3 / 2.0) - (b.1 + b.3 / 2.0);
            (dx * dx + dy * dy).sqrt()
        }
        DistanceKind::Iou => 1.0 - raw_iou(a, b),
    }
}

fn zscores(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if xs.iter().all(|&x| x == xs[0]) || sd == 0.0 {
        vec![0.0; xs.len()]
    } else {
        xs.iter().map(|x| (x - mean) / sd).collect()
    }
}

fn raw_dot(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..a.len() {
        s += a[i] as f64 * b[i] as f64;
    }
    s
}

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub distance: DistanceKind,
    pub fusion: Fusion,
    pub alpha: f64,
    pub mode: CandidateMode,
}

/// Ordered `(image_id, Some(region_id) | None)` for every image.
pub fn oracle_rank(
    inst: &Instance,
    query: &[f32],
    b: RawRect,
    cfg: OracleConfig,
) -> Vec<(String, Option<String>)> {
    // enumerate candidates
    let mut cands: Vec<(usize, usize)> = Vec::new();
    for (i, im) in inst.images.iter().enumerate() {
        let overlapping: Vec<usize> = (0..im.regions.len())
            .filter(|&j| raw_inter(im.regions[j].rect, b) > 0.0)
            .collect();
        match cfg.mode {
            CandidateMode::AllOverlap => cands.extend(overlapping.iter().map(|&j| (i, j))),
            CandidateMode::BestIouPerImage => {
                let best = overlapping.iter().copied().min_by(|&x, &y| {
                    let (ix, iy) = (
                        raw_iou(im.regions[x].rect, b),
                        raw_iou(im.regions[y].rect, b),
                    );
                    iy.partial_cmp(&ix)
                        .unwrap()
                        .then_with(|| im.regions[x].id.cmp(&im.regions[y].id))
                });
                cands.extend(best.map(|j| (i, j)));
            }
        }
    }

    let mut combined = Vec::new();
    if !cands.is_empty() {
        let sem: Vec<f64> = cands
            .iter()
            .map(|&(i, j)| 1.0 - raw_dot(&inst.images[i].regions[j].embedding, query))
            .collect();
        let zs = zscores(&sem);
        if cfg.distance == DistanceKind::None {
            combined = zs;
        } else {
            let geo: Vec<f64> = cands
                .iter()
                .map(|&(i, j)| raw_distance(cfg.distance, inst.images[i].regions[j].rect, b))
                .collect();
            let zg = zscores(&geo);
            let a = cfg.alpha;
            combined = match cfg.fusion {
                Fusion::Linear => zs
                    .iter()
                    .zip(&zg)
                    .map(|(s, g)| (1.0 - a) * s + a * g)
                    .collect(),
                Fusion::GeometricMean => {
                    let ms = zs.iter().cloned().fold(f64::INFINITY, f64::min);
                    let mg = zg.iter().cloned().fold(f64::INFINITY, f64::min);
                    zs.iter()
                        .zip(&zg)
                        .map(|(s, g)| (s - ms + 1e-6).powf(1.0 - a) * (g - mg + 1e-6).powf(a))
                        .collect()
                }
            };
        }
    }

    // ties are judged on a 1e-9 grid
    let combined: Vec<f64> = combined.iter().map(|c| (c / 1e-9).round()).collect();

    // best candidate per image
    let mut per_image: Vec<Option<usize>> = vec![None; inst.images.len()];
    for (k, &(i, j)) in cands.iter().enumerate() {
        let better = match per_image[i] {
            None => true,
            Some(cur) => {
                let cur_id = &inst.images[i].regions[cands[cur].1].id;
                combined[k] < combined[cur]
                    || (combined[k] == combined[cur] && inst.images[i].regions[j].id < *cur_id)
            }
        };
        if better {
            per_image[i] = Some(k);
        }
    }

    let mut matched: Vec<(f64, &str, &str)> = Vec::new();
    let mut unmatched: Vec<&str> = Vec::new();
    for (i, im) in inst.images.iter().enumerate() {
        match per_image[i] {
            Some(k) => matched.push((combined[k], &im.id, &im.regions[cands[k].1].id)),
            None => unmatched.push(&im.id),
        }
    }
    matched.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(b.1)));
    unmatched.sort();
    matched
        .into_iter()
        .map(|(_, i, r)| (i.to_string(), Some(r.to_string())))
        .chain(unmatched.into_iter().map(|i| (i.to_string(), None)))
        .collect()
}

pub fn all_oracle_configs() -> Vec<OracleConfig> {
    let mut out = Vec::new();
    for distance in DistanceKind::ALL {
        for fusion in Fusion::ALL {
            for alpha in [0.0, 0.5, 1.0] {
                for mode in CandidateMode::ALL {
                    out.push(OracleConfig {
                        distance,
                        fusion,
                        alpha,
                        mode,
                    });
                }
            }
        }
    }
    out
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn embedding(v: Vec<f32>) -> EmbeddingVector {
    EmbeddingVector::new(v).unwrap()
}
