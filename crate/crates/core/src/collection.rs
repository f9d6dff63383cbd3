//! The searchable collection: images, their regions, and the shared
//! embedding matrix. Also the static grid layouts and candidate selection.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::embeddings::norm;
use crate::geometry::{intersection_area, iou, Rect};
use crate::Error;

/// Rows must have unit norm within this tolerance.
pub const ROW_NORM_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionSource {
    Detector,
    StaticGrid,
    WholeFrame,
    AnnotationCrop,
}

impl RegionSource {
    pub const ALL: [RegionSource; 4] = [
        RegionSource::Detector,
        RegionSource::StaticGrid,
        RegionSource::WholeFrame,
        RegionSource::AnnotationCrop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegionSource::Detector => "detector",
            RegionSource::StaticGrid => "static_grid",
            RegionSource::WholeFrame => "whole_frame",
            RegionSource::AnnotationCrop => "annotation_crop",
        }
    }
}

impl fmt::Display for RegionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegionSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RegionSource::ALL
            .into_iter()
            .find(|src| src.as_str() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "region source",
                name: s.into(),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionRecord {
    pub region_id: String,
    pub rect: Rect,
    pub embedding_row: usize,
    pub source: RegionSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: String,
    pub frame_width_px: u32,
    pub frame_height_px: u32,
    pub frame_embedding_row: usize,
    pub regions: Vec<RegionRecord>,
}

/// Immutable after construction; cloning shares the embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedCollection {
    dim: usize,
    images: Vec<ImageRecord>,
    matrix: Arc<[f32]>,
}

impl IndexedCollection {
    /// Validates and assembles a collection. `matrix` is row-major `rows × dim`.
    pub fn new(dim: usize, images: Vec<ImageRecord>, matrix: Vec<f32>) -> Result<Self, Error> {
        if dim == 0 {
            return Err(Error::EmptyInput("dim"));
        }
        if !matrix.len().is_multiple_of(dim) {
            return Err(Error::RowCountMismatch {
                expected: matrix.len() / dim,
                found: matrix.len(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEmbedding);
        }
        let rows = matrix.len() / dim;
        for (row, values) in matrix.chunks_exact(dim).enumerate() {
            if (norm(values) - 1.0).abs() > ROW_NORM_TOL {
                return Err(Error::UnnormalizedRow(row));
            }
        }

        let mut seen_images = BTreeSet::new();
        for image in &images {
            if !seen_images.insert(image.image_id.as_str()) {
                return Err(Error::DuplicateImage(image.image_id.clone()));
            }
            if image.frame_width_px == 0 || image.frame_height_px == 0 {
                return Err(Error::InvalidFrameSize);
            }
            check_row(image.frame_embedding_row, rows)?;
            let mut seen_regions = BTreeSet::new();
            for region in &image.regions {
                if !seen_regions.insert(region.region_id.as_str()) {
                    return Err(Error::DuplicateRegion {
                        image_id: image.image_id.clone(),
                        region_id: region.region_id.clone(),
                    });
                }
                check_row(region.embedding_row, rows)?;
            }
        }

        Ok(IndexedCollection {
            dim,
            images,
            matrix: matrix.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.matrix.len() / self.dim
    }

    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.matrix[row * self.dim..(row + 1) * self.dim]
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|im| im.image_id == image_id)
    }

    pub fn region_count(&self) -> usize {
        self.images.iter().map(|im| im.regions.len()).sum()
    }

    /// One full-frame region per image, backed by the frame embedding.
    pub fn whole_image_view(&self) -> IndexedCollection {
        let images = self
            .images
            .iter()
            .map(|im| ImageRecord {
                regions: alloc::vec![RegionRecord {
                    region_id: String::from("frame"),
                    rect: Rect::FULL,
                    embedding_row: im.frame_embedding_row,
                    source: RegionSource::WholeFrame,
                }],
                ..im.clone()
            })
            .collect();
        IndexedCollection {
            dim: self.dim,
            images,
            matrix: Arc::clone(&self.matrix),
        }
    }

    /// Keeps only regions whose source is listed; images stay even if empty.
    pub fn with_sources(&self, sources: &[RegionSource]) -> IndexedCollection {
        let images = self
            .images
            .iter()
            .map(|im| ImageRecord {
                regions: im
                    .regions
                    .iter()
                    .filter(|r| sources.contains(&r.source))
                    .cloned()
                    .collect(),
                ..im.clone()
            })
            .collect();
        IndexedCollection {
            dim: self.dim,
            images,
            matrix: Arc::clone(&self.matrix),
        }
    }
}

fn check_row(row: usize, rows: usize) -> Result<(), Error> {
    if row < rows {
        Ok(())
    } else {
        Err(Error::DanglingRow { row, rows })
    }
}

/// Four corner quadrants then the centred half-size cell: TL, TR, BL, BR, C.
pub fn static_grid_5() -> [Rect; 5] {
    let cell = |l: f64, t: f64| Rect::new(l, t, 0.5, 0.5).expect("grid cell inside frame");
    [
        cell(0.0, 0.0),
        cell(0.5, 0.0),
        cell(0.0, 0.5),
        cell(0.5, 0.5),
        cell(0.25, 0.25),
    ]
}

/// `rows × cols` equal tiles in row-major order.
pub fn uniform_grid(rows: usize, cols: usize) -> Result<Vec<Rect>, Error> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidGrid { rows, cols });
    }
    let (w, h) = (1.0 / cols as f64, 1.0 / rows as f64);
    let mut tiles = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            tiles.push(Rect::new(c as f64 * w, r as f64 * h, w, h)?);
        }
    }
    Ok(tiles)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CandidateMode {
    /// Every region overlapping the query rectangle.
    #[default]
    AllOverlap,
    /// Per image, only the overlapping region with the largest IoU.
    BestIouPerImage,
}

impl CandidateMode {
    pub const ALL: [CandidateMode; 2] = [CandidateMode::AllOverlap, CandidateMode::BestIouPerImage];

    pub fn as_str(self) -> &'static str {
        match self {
            CandidateMode::AllOverlap => "all_overlap",
            CandidateMode::BestIouPerImage => "best_iou_per_image",
        }
    }
}

impl fmt::Display for CandidateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CandidateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CandidateMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "candidate mode",
                name: s.into(),
            })
    }
}

/// Position of a region inside a collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RegionIndex {
    pub image: usize,
    pub region: usize,
}

/// Regions with positive intersection with `b`, in collection order.
pub fn candidate_indices(
    coll: &IndexedCollection,
    b: &Rect,
    mode: CandidateMode,
) -> Vec<RegionIndex> {
    let mut out = Vec::new();
    for (i, image) in coll.images.iter().enumerate() {
        let overlapping = image
            .regions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.rect.overlaps(b) && intersection_area(&r.rect, b) > 0.0);
        match mode {
            CandidateMode::AllOverlap => {
                out.extend(overlapping.map(|(j, _)| RegionIndex {
                    image: i,
                    region: j,
                }));
            }
            CandidateMode::BestIouPerImage => {
                let mut best: Option<(usize, f64)> = None;
                for (j, r) in overlapping {
                    let score = iou(&r.rect, b);
                    let better = match best {
                        None => true,
                        Some((k, s)) => {
                            score > s || (score == s && r.region_id < image.regions[k].region_id)
                        }
                    };
                    if better {
                        best = Some((j, score));
                    }
                }
                if let Some((j, _)) = best {
                    out.push(RegionIndex {
                        image: i,
                        region: j,
                    });
                }
            }
        }
    }
    out
}

/// Same selection as [`candidate_indices`], resolved to records.
pub fn candidate_regions<'a>(
    coll: &'a IndexedCollection,
    b: &Rect,
    mode: CandidateMode,
) -> Vec<(&'a str, &'a RegionRecord)> {
    candidate_indices(coll, b, mode)
        .into_iter()
        .map(|ix| {
            let image = &coll.images[ix.image];
            (image.image_id.as_str(), &image.regions[ix.region])
        })
        .collect()
}
