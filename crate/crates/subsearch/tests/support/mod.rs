//! Small deterministic collections and annotation sets for the std tests.

#![allow(dead_code)]

use std::path::Path;

use subsearch::annotations::write_annotations;
use subsearch::store::save_index;
use subsearch_core::{
    Annotation, EmbeddingVector, ImageRecord, IndexedCollection, Rect, RegionRecord, RegionSource,
};

pub const DIM: usize = 8;

/// Unit vector mostly along `axis`, tilted a little towards `axis + 1`.
pub fn tilted(axis: usize, tilt: f32) -> Vec<f32> {
    let mut v = [0.0f32; DIM];
    v[axis % DIM] = 1.0;
    v[(axis + 1) % DIM] = tilt;
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Five 640x480 frames, each with a frame row and two or three regions.
pub fn fixture() -> IndexedCollection {
    let layouts: [&[(f64, f64, f64, f64)]; 5] = [
        &[(0.0, 0.0, 0.5, 0.5), (0.5, 0.5, 0.5, 0.5)],
        &[
            (0.1, 0.1, 0.3, 0.3),
            (0.6, 0.0, 0.4, 0.6),
            (0.2, 0.5, 0.5, 0.4),
        ],
        &[(0.0, 0.0, 1.0, 0.5), (0.25, 0.25, 0.5, 0.5)],
        &[(0.7, 0.7, 0.3, 0.3), (0.0, 0.6, 0.3, 0.4)],
        &[
            (0.05, 0.05, 0.4, 0.4),
            (0.5, 0.1, 0.45, 0.3),
            (0.3, 0.55, 0.4, 0.4),
        ],
    ];
    let mut matrix = Vec::new();
    let mut images = Vec::new();
    for (i, rects) in layouts.iter().enumerate() {
        let frame_row = matrix.len() / DIM;
        matrix.extend(tilted(i, 0.5));
        let regions = rects
            .iter()
            .enumerate()
            .map(|(j, &(l, t, w, h))| {
                let row = matrix.len() / DIM;
                matrix.extend(tilted(i + j, 0.1 * (j as f32 + 1.0)));
                RegionRecord {
                    region_id: format!("r{j}"),
                    rect: Rect::new(l, t, w, h).unwrap(),
                    embedding_row: row,
                    source: if j == 0 {
                        RegionSource::StaticGrid
                    } else {
                        RegionSource::Detector
                    },
                }
            })
            .collect();
        images.push(ImageRecord {
            image_id: format!("img{i}"),
            frame_width_px: 640,
            frame_height_px: 480,
            frame_embedding_row: frame_row,
            regions,
        });
    }
    IndexedCollection::new(DIM, images, matrix).unwrap()
}

/// One query per image, aimed at its second region; odd ones skippable.
pub fn fixture_annotations(coll: &IndexedCollection) -> Vec<Annotation> {
    coll.images()
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let target = &img.regions[1];
            let v = coll.row(target.embedding_row).to_vec();
            Annotation {
                query_id: format!("q{i:02}"),
                target_image_id: img.image_id.clone(),
                rect: target.rect,
                text_short: format!("short {i}"),
                text_long: format!("long description {i}"),
                skippable: i % 2 == 1,
                embedding_short: Some(EmbeddingVector::new(tilted(i, 0.3)).unwrap()),
                embedding_long: Some(EmbeddingVector::new(v).unwrap()),
            }
        })
        .collect()
}

/// Writes the fixture index to `dir/idx` and annotations to `dir/a.jsonl`.
pub fn write_fixture(dir: &Path) -> IndexedCollection {
    let coll = fixture();
    save_index(&dir.join("idx"), &coll).unwrap();
    write_annotations(&dir.join("a.jsonl"), &fixture_annotations(&coll)).unwrap();
    coll
}
