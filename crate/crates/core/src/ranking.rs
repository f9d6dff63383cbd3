//! Per-query ranking.
//!
//! Candidates are the regions overlapping the query rectangle. Their semantic
//! distance `1 - <f_region, f_query>` and, optionally, a rectangle distance to
//! the query rectangle are z-scored over the candidate set and fused. Each
//! image is represented by its best candidate; images without any candidate
//! are appended after all matched images, ordered by id.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::collection::{candidate_indices, CandidateMode, IndexedCollection, RegionRecord};
use crate::embeddings::dot;
use crate::geometry::{area_distance, centroid_distance, iou_distance, shape_distance, Rect};
use crate::Error;

/// Offset added to min-shifted z-scores before taking powers.
pub const GEOMETRIC_EPS: f64 = 1e-6;

/// Combined scores are ordered on a grid of this spacing; values closer than
/// that count as ties and fall through to the id tie-break.
pub const SCORE_RESOLUTION: f64 = 1e-9;

/// Sort key for a combined score.
pub fn score_key(combined: f64) -> f64 {
    libm::round(combined / SCORE_RESOLUTION)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DistanceKind {
    /// Semantic distance only.
    None,
    /// Absolute area difference.
    Area,
    /// Width plus height difference.
    Shape,
    /// Euclidean distance between centroids.
    Centroid,
    /// `1 - IoU`.
    #[default]
    Iou,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 5] = [
        DistanceKind::None,
        DistanceKind::Area,
        DistanceKind::Shape,
        DistanceKind::Centroid,
        DistanceKind::Iou,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::None => "none",
            DistanceKind::Area => "ad",
            DistanceKind::Shape => "sd",
            DistanceKind::Centroid => "cd",
            DistanceKind::Iou => "iou",
        }
    }

    pub fn distance(self, a: &Rect, b: &Rect) -> Option<f64> {
        match self {
            DistanceKind::None => None,
            DistanceKind::Area => Some(area_distance(a, b)),
            DistanceKind::Shape => Some(shape_distance(a, b)),
            DistanceKind::Centroid => Some(centroid_distance(a, b)),
            DistanceKind::Iou => Some(iou_distance(a, b)),
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DistanceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "distance kind",
                name: s.into(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Fusion {
    #[default]
    Linear,
    GeometricMean,
}

impl Fusion {
    pub const ALL: [Fusion; 2] = [Fusion::Linear, Fusion::GeometricMean];

    pub fn as_str(self) -> &'static str {
        match self {
            Fusion::Linear => "linear",
            Fusion::GeometricMean => "geometric_mean",
        }
    }
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fusion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Fusion::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "fusion",
                name: s.into(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingConfig {
    pub distance: DistanceKind,
    pub fusion: Fusion,
    alpha: f64,
    pub candidate_mode: CandidateMode,
}

impl RankingConfig {
    pub fn new(
        distance: DistanceKind,
        fusion: Fusion,
        alpha: f64,
        candidate_mode: CandidateMode,
    ) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(RankingConfig {
            distance,
            fusion,
            alpha,
            candidate_mode,
        })
    }

    /// Semantic-only ranking over all overlapping regions.
    pub fn semantic() -> Self {
        RankingConfig {
            distance: DistanceKind::None,
            ..Self::default()
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Stable short name, e.g. `iou-linear-0.5-all_overlap`.
    pub fn label(&self) -> alloc::string::String {
        alloc::format!(
            "{}-{}-{}-{}",
            self.distance,
            self.fusion,
            self.alpha,
            self.candidate_mode
        )
    }
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            distance: DistanceKind::Iou,
            fusion: Fusion::Linear,
            alpha: 0.5,
            candidate_mode: CandidateMode::AllOverlap,
        }
    }
}

/// Z-scores with the population standard deviation.
///
/// A constant list (including a singleton) maps to all zeros.
pub fn standardize(values: &[f64]) -> Result<Vec<f64>, Error> {
    if values.is_empty() {
        return Err(Error::EmptyInput("standardize"));
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Ok(alloc::vec![0.0; values.len()]);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = libm::sqrt(var);
    if sd == 0.0 {
        return Ok(alloc::vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

/// `(1 - alpha) * semantic + alpha * rect`
pub fn fuse_linear(semantic_z: f64, rect_z: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * semantic_z + alpha * rect_z
}

/// Weighted geometric mean of min-shifted z-scores.
///
/// `offsets` are the candidate-set minima of each standardized family, so
/// both bases are strictly positive.
pub fn fuse_geometric(semantic_z: f64, rect_z: f64, alpha: f64, offsets: (f64, f64)) -> f64 {
    let p = semantic_z - offsets.0 + GEOMETRIC_EPS;
    let q = rect_z - offsets.1 + GEOMETRIC_EPS;
    libm::pow(p, 1.0 - alpha) * libm::pow(q, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub combined: f64,
    /// Raw `1 - cos`.
    pub semantic: f64,
    /// Raw rectangle distance; absent for semantic-only ranking.
    pub geometric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry<'a> {
    pub image_id: &'a str,
    pub region: Option<&'a RegionRecord>,
    /// `None` for images with no candidate region.
    pub scores: Option<Scores>,
}

impl RankedEntry<'_> {
    pub fn is_matched(&self) -> bool {
        self.scores.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedList<'a> {
    entries: Vec<RankedEntry<'a>>,
}

impl<'a> RankedList<'a> {
    pub fn entries(&self) -> &[RankedEntry<'a>] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<RankedEntry<'a>> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based rank of `image_id`.
    pub fn rank_of(&self, image_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.image_id == image_id)
            .map(|p| p + 1)
    }

    pub fn top(&self, k: usize) -> &[RankedEntry<'a>] {
        &self.entries[..k.min(self.entries.len())]
    }

    pub fn matched_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_matched()).count()
    }
}

/// Ranks every image of `coll` for the query `(query, b)`.
pub fn rank_images<'a>(
    coll: &'a IndexedCollection,
    query: &[f32],
    b: &Rect,
    cfg: &RankingConfig,
) -> Result<RankedList<'a>, Error> {
    if coll.is_empty() {
        return Err(Error::EmptyCollection);
    }
    if query.len() != coll.dim() {
        return Err(Error::DimMismatch {
            expected: coll.dim(),
            found: query.len(),
        });
    }

    let images = coll.images();
    let candidates = candidate_indices(coll, b, cfg.candidate_mode);
    let mut best: Vec<Option<usize>> = alloc::vec![None; images.len()];
    let mut scores: Vec<Scores> = Vec::with_capacity(candidates.len());

    if !candidates.is_empty() {
        let regions: Vec<&RegionRecord> = candidates
            .iter()
            .map(|ix| &images[ix.image].regions[ix.region])
            .collect();
        let semantic: Vec<f64> = regions
            .iter()
            .map(|r| 1.0 - dot(coll.row(r.embedding_row), query))
            .collect();
        let semantic_z = standardize(&semantic)?;

        let combined: Vec<f64> = if cfg.distance == DistanceKind::None {
            semantic_z
        } else {
            let geometric: Vec<f64> = regions
                .iter()
                .map(|r| cfg.distance.distance(&r.rect, b).unwrap_or(0.0))
                .collect();
            let geometric_z = standardize(&geometric)?;
            let fused = fuse_all(&semantic_z, &geometric_z, cfg);
            scores.extend(
                semantic
                    .iter()
                    .zip(&geometric)
                    .zip(&fused)
                    .map(|((&s, &g), &c)| Scores {
                        combined: c,
                        semantic: s,
                        geometric: Some(g),
                    }),
            );
            fused
        };
        if scores.is_empty() {
            scores.extend(semantic.iter().zip(&combined).map(|(&s, &c)| Scores {
                combined: c,
                semantic: s,
                geometric: None,
            }));
        }

        for (k, ix) in candidates.iter().enumerate() {
            let slot = &mut best[ix.image];
            let replace = match *slot {
                None => true,
                Some(cur) => match score_key(scores[k].combined)
                    .total_cmp(&score_key(scores[cur].combined))
                {
                    Ordering::Less => true,
                    Ordering::Equal => regions[k].region_id < regions[cur].region_id,
                    Ordering::Greater => false,
                },
            };
            if replace {
                *slot = Some(k);
            }
        }
    }

    let mut matched: Vec<(usize, usize)> = best
        .iter()
        .enumerate()
        .filter_map(|(i, b)| b.map(|k| (i, k)))
        .collect();
    matched.sort_by(|&(ia, ka), &(ib, kb)| {
        score_key(scores[ka].combined)
            .total_cmp(&score_key(scores[kb].combined))
            .then_with(|| images[ia].image_id.cmp(&images[ib].image_id))
    });
    let mut unmatched: Vec<usize> = (0..images.len()).filter(|&i| best[i].is_none()).collect();
    unmatched.sort_by(|&a, &b| images[a].image_id.cmp(&images[b].image_id));

    let mut entries = Vec::with_capacity(images.len());
    entries.extend(matched.into_iter().map(|(i, k)| {
        let ix = candidates[k];
        RankedEntry {
            image_id: images[i].image_id.as_str(),
            region: Some(&images[ix.image].regions[ix.region]),
            scores: Some(scores[k]),
        }
    }));
    entries.extend(unmatched.into_iter().map(|i| RankedEntry {
        image_id: images[i].image_id.as_str(),
        region: None,
        scores: None,
    }));
    Ok(RankedList { entries })
}

fn fuse_all(semantic_z: &[f64], geometric_z: &[f64], cfg: &RankingConfig) -> Vec<f64> {
    match cfg.fusion {
        Fusion::Linear => semantic_z
            .iter()
            .zip(geometric_z)
            .map(|(&s, &g)| fuse_linear(s, g, cfg.alpha))
            .collect(),
        Fusion::GeometricMean => {
            let min_s = semantic_z.iter().copied().fold(f64::INFINITY, f64::min);
            let min_g = geometric_z.iter().copied().fold(f64::INFINITY, f64::min);
            semantic_z
                .iter()
                .zip(geometric_z)
                .map(|(&s, &g)| fuse_geometric(s, g, cfg.alpha, (min_s, min_g)))
                .collect()
        }
    }
}

/// Upper-bound ranking where each image is represented by one crop embedding
/// taken at the query's own rectangle.
///
/// `crops` is row-major with one row per entry of `image_ids`.
pub fn theoretical_rank<'a, S: AsRef<str>>(
    crops: &[f32],
    dim: usize,
    image_ids: &'a [S],
    query: &[f32],
) -> Result<RankedList<'a>, Error> {
    if query.len() != dim {
        return Err(Error::DimMismatch {
            expected: dim,
            found: query.len(),
        });
    }
    if dim == 0 || crops.len() != dim * image_ids.len() {
        return Err(Error::RowCountMismatch {
            expected: image_ids.len(),
            found: crops.len() / dim.max(1),
        });
    }
    let mut entries: Vec<RankedEntry<'a>> = crops
        .chunks_exact(dim)
        .zip(image_ids)
        .map(|(row, id)| {
            let d = 1.0 - dot(row, query);
            RankedEntry {
                image_id: id.as_ref(),
                region: None,
                scores: Some(Scores {
                    combined: d,
                    semantic: d,
                    geometric: None,
                }),
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        let (sa, sb) = (a.scores.unwrap().combined, b.scores.unwrap().combined);
        score_key(sa)
            .total_cmp(&score_key(sb))
            .then_with(|| a.image_id.cmp(b.image_id))
    });
    Ok(RankedList { entries })
}
