//! Annotation files: JSON Lines, one annotated query per line.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subsearch_core::{Annotation, EmbeddingVector};

use crate::store::RectJson;

#[derive(Debug, thiserror::Error)]
pub enum AnnotationError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: subsearch_core::Error,
    },
    #[error("line {line}: duplicate query id {query_id:?}")]
    DuplicateQuery { line: usize, query_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationJson {
    pub query_id: String,
    pub target_image_id: String,
    pub rect: RectJson,
    #[serde(default)]
    pub text_short: String,
    #[serde(default)]
    pub text_long: String,
    #[serde(default)]
    pub skippable: bool,
    #[serde(default)]
    pub embedding_short: Option<Vec<f32>>,
    #[serde(default)]
    pub embedding_long: Option<Vec<f32>>,
}

impl AnnotationJson {
    pub fn into_annotation(self) -> Result<Annotation, subsearch_core::Error> {
        let embed = |v: Option<Vec<f32>>| v.map(EmbeddingVector::new).transpose();
        Ok(Annotation {
            rect: self.rect.to_rect()?,
            embedding_short: embed(self.embedding_short)?,
            embedding_long: embed(self.embedding_long)?,
            query_id: self.query_id,
            target_image_id: self.target_image_id,
            text_short: self.text_short,
            text_long: self.text_long,
            skippable: self.skippable,
        })
    }
}

impl From<&Annotation> for AnnotationJson {
    fn from(a: &Annotation) -> Self {
        let embed = |v: &Option<EmbeddingVector>| v.as_ref().map(|e| e.as_slice().to_vec());
        AnnotationJson {
            query_id: a.query_id.clone(),
            target_image_id: a.target_image_id.clone(),
            rect: a.rect.into(),
            text_short: a.text_short.clone(),
            text_long: a.text_long.clone(),
            skippable: a.skippable,
            embedding_short: embed(&a.embedding_short),
            embedding_long: embed(&a.embedding_long),
        }
    }
}

/// Parses JSON Lines; blank lines are skipped, line numbers are 1-based.
pub fn parse_annotations(text: &str) -> Result<Vec<Annotation>, AnnotationError> {
    let mut out: Vec<Annotation> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let json: AnnotationJson =
            serde_json::from_str(raw).map_err(|source| AnnotationError::Json { line, source })?;
        let ann = json
            .into_annotation()
            .map_err(|source| AnnotationError::Invalid { line, source })?;
        if !seen.insert(ann.query_id.clone()) {
            return Err(AnnotationError::DuplicateQuery {
                line,
                query_id: ann.query_id,
            });
        }
        out.push(ann);
    }
    Ok(out)
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>, AnnotationError> {
    let text = fs::read_to_string(path).map_err(|source| AnnotationError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_annotations(&text)
}

pub fn write_annotations(path: &Path, annotations: &[Annotation]) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for a in annotations {
        serde_json::to_writer(&mut w, &AnnotationJson::from(a))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}
