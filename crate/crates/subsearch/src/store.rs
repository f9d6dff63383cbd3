//! On-disk index: a JSON manifest next to a binary embedding matrix.
//!
//! Matrix layout: the 8 magic bytes `SUBEMB1\0`, `dim` and `rows` as u32
//! little-endian, then `rows * dim` little-endian f32 values, row-major.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subsearch_core::{ImageRecord, IndexedCollection, Rect, RegionRecord, RegionSource};

pub const MAGIC: &[u8; 8] = b"SUBEMB1\0";
/// Magic bytes shared by every format version; the seventh byte is the version.
const MAGIC_FAMILY: &[u8; 6] = b"SUBEMB";
pub const HEADER_LEN: usize = 16;
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MATRIX_FILE: &str = "embeddings.bin";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad magic: not an embedding matrix file")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(String),
    #[error("row-count mismatch: header declares {expected} rows, payload holds {found}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("non-finite value in embedding row {row}")]
    NonFinite { row: usize },
    #[error("dangling embedding row {row} (matrix has {rows} rows)")]
    DanglingRow { row: usize, rows: usize },
    #[error("manifest dim {manifest} does not match matrix dim {matrix}")]
    DimMismatch { manifest: usize, matrix: usize },
    #[error("matrix too large for the file header")]
    TooLarge,
    #[error("malformed manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("invalid rect in region {region_id:?} of image {image_id:?}: {source}")]
    Rect {
        image_id: String,
        region_id: String,
        #[source]
        source: subsearch_core::Error,
    },
    #[error("unknown region source {0:?}")]
    Source(String),
    #[error(transparent)]
    Collection(#[from] subsearch_core::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Row-major matrix as read from or written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub dim: usize,
    pub rows: usize,
    pub data: Vec<f32>,
}

pub fn encode_matrix(dim: usize, data: &[f32]) -> Result<Vec<u8>, StoreError> {
    if dim == 0 {
        return Err(subsearch_core::Error::EmptyInput("dim").into());
    }
    if !data.len().is_multiple_of(dim) {
        return Err(StoreError::RowCountMismatch {
            expected: data.len().div_ceil(dim),
            found: data.len() / dim,
        });
    }
    let rows = data.len() / dim;
    let dim32 = u32::try_from(dim).map_err(|_| StoreError::TooLarge)?;
    let rows32 = u32::try_from(rows).map_err(|_| StoreError::TooLarge)?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&dim32.to_le_bytes());
    out.extend_from_slice(&rows32.to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix, StoreError> {
    if bytes.len() < 8 || &bytes[..6] != MAGIC_FAMILY {
        return Err(StoreError::BadMagic);
    }
    if &bytes[..8] != MAGIC {
        let tag = String::from_utf8_lossy(&bytes[6..8])
            .trim_end_matches('\0')
            .to_string();
        return Err(StoreError::UnsupportedVersion(tag));
    }
    if bytes.len() < HEADER_LEN {
        return Err(StoreError::RowCountMismatch {
            expected: 0,
            found: 0,
        });
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let rows = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(subsearch_core::Error::EmptyInput("dim").into());
    }
    let payload = &bytes[HEADER_LEN..];
    let row_bytes = 4 * dim;
    if payload.len() != rows * row_bytes {
        return Err(StoreError::RowCountMismatch {
            expected: rows,
            found: payload.len() / row_bytes,
        });
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(StoreError::NonFinite { row: i / dim });
    }
    Ok(Matrix { dim, rows, data })
}

pub fn read_matrix(path: &Path) -> Result<Matrix, StoreError> {
    decode_matrix(&fs::read(path).map_err(io_err(path))?)
}

pub fn write_matrix(path: &Path, dim: usize, data: &[f32]) -> Result<(), StoreError> {
    let bytes = encode_matrix(dim, data)?;
    write_file(path, &bytes)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))?;
    f.sync_all().map_err(io_err(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectJson {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl RectJson {
    pub fn to_rect(self) -> Result<Rect, subsearch_core::Error> {
        Rect::new(self.left, self.top, self.width, self.height)
    }
}

impl From<Rect> for RectJson {
    fn from(r: Rect) -> Self {
        RectJson {
            left: r.left(),
            top: r.top(),
            width: r.width(),
            height: r.height(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub dim: usize,
    pub matrix_file: String,
    pub images: Vec<ManifestImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestImage {
    pub image_id: String,
    pub frame_width_px: u32,
    pub frame_height_px: u32,
    pub frame_embedding_row: usize,
    #[serde(default)]
    pub regions: Vec<ManifestRegion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRegion {
    pub region_id: String,
    pub rect: RectJson,
    pub embedding_row: usize,
    pub source: String,
}

impl Manifest {
    pub fn from_collection(coll: &IndexedCollection, matrix_file: &str) -> Self {
        let images = coll
            .images()
            .iter()
            .map(|img| ManifestImage {
                image_id: img.image_id.clone(),
                frame_width_px: img.frame_width_px,
                frame_height_px: img.frame_height_px,
                frame_embedding_row: img.frame_embedding_row,
                regions: img
                    .regions
                    .iter()
                    .map(|r| ManifestRegion {
                        region_id: r.region_id.clone(),
                        rect: r.rect.into(),
                        embedding_row: r.embedding_row,
                        source: r.source.as_str().to_string(),
                    })
                    .collect(),
            })
            .collect();
        Manifest {
            version: MANIFEST_VERSION,
            dim: coll.dim(),
            matrix_file: matrix_file.to_string(),
            images,
        }
    }

    pub fn parse(text: &str) -> Result<Self, StoreError> {
        // check the version before the schema so old files get a clear error
        let raw: serde_json::Value = serde_json::from_str(text)?;
        match raw.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MANIFEST_VERSION) => {}
            Some(v) => return Err(StoreError::UnsupportedVersion(v.to_string())),
            None => {
                return Err(StoreError::UnsupportedVersion(
                    raw.get("version")
                        .map_or("missing".into(), |v| v.to_string()),
                ))
            }
        }
        Ok(serde_json::from_value(raw)?)
    }

    /// Converts to core records, checking rows against a matrix of `rows` rows.
    pub fn records(&self, rows: usize) -> Result<Vec<ImageRecord>, StoreError> {
        let check = |row: usize| {
            if row >= rows {
                Err(StoreError::DanglingRow { row, rows })
            } else {
                Ok(row)
            }
        };
        self.images
            .iter()
            .map(|img| {
                let regions = img
                    .regions
                    .iter()
                    .map(|r| {
                        let rect = r.rect.to_rect().map_err(|source| StoreError::Rect {
                            image_id: img.image_id.clone(),
                            region_id: r.region_id.clone(),
                            source,
                        })?;
                        let source: RegionSource = r
                            .source
                            .parse()
                            .map_err(|_| StoreError::Source(r.source.clone()))?;
                        Ok(RegionRecord {
                            region_id: r.region_id.clone(),
                            rect,
                            embedding_row: check(r.embedding_row)?,
                            source,
                        })
                    })
                    .collect::<Result<Vec<_>, StoreError>>()?;
                Ok(ImageRecord {
                    image_id: img.image_id.clone(),
                    frame_width_px: img.frame_width_px,
                    frame_height_px: img.frame_height_px,
                    frame_embedding_row: check(img.frame_embedding_row)?,
                    regions,
                })
            })
            .collect()
    }
}

/// Writes `manifest.json` and `embeddings.bin` into `dir`, creating it.
pub fn save_index(dir: &Path, coll: &IndexedCollection) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_matrix(&dir.join(MATRIX_FILE), coll.dim(), coll.matrix())?;
    let manifest = Manifest::from_collection(coll, MATRIX_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_file(&dir.join(MANIFEST_FILE), text.as_bytes())
}

/// Loads an index directory, or a manifest path whose matrix file is
/// resolved relative to it.
pub fn load_index(path: &Path) -> Result<IndexedCollection, StoreError> {
    let manifest_path = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest = Manifest::parse(&text)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let matrix = read_matrix(&base.join(&manifest.matrix_file))?;
    assemble(&manifest, matrix)
}

/// Validates a manifest against a matrix and builds the collection.
pub fn assemble(manifest: &Manifest, matrix: Matrix) -> Result<IndexedCollection, StoreError> {
    if manifest.dim != matrix.dim {
        return Err(StoreError::DimMismatch {
            manifest: manifest.dim,
            matrix: matrix.dim,
        });
    }
    let images = manifest.records(matrix.rows)?;
    Ok(IndexedCollection::new(matrix.dim, images, matrix.data)?)
}
