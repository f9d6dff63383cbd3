//! Evaluation protocol: rank each annotated query's target frame, aggregate
//! recall and mean rank per annotation subset, sweep perturbation strengths,
//! and summarize how well a region set fits the annotations.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::collection::{IndexedCollection, RegionRecord};
use crate::embeddings::{l2_normalize, EmbeddingVector};
use crate::geometry::{intersection_area, iou, max_coverage, union_area, PerturbationConfig, Rect};
use crate::metrics::{mean_rank, recall_at_k, RECALL_CUTOFFS};
use crate::ranking::{rank_images, RankingConfig};
use crate::rng::fnv1a64;
use crate::Error;

/// One annotated query: a description of a target frame plus a box on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub query_id: String,
    pub target_image_id: String,
    pub rect: Rect,
    pub text_short: String,
    pub text_long: String,
    pub skippable: bool,
    pub embedding_short: Option<EmbeddingVector>,
    pub embedding_long: Option<EmbeddingVector>,
}

impl Annotation {
    pub fn embedding(&self, field: TextField) -> Option<&EmbeddingVector> {
        match field {
            TextField::Short => self.embedding_short.as_ref(),
            TextField::Long => self.embedding_long.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TextField {
    Short,
    #[default]
    Long,
}

impl TextField {
    pub fn as_str(self) -> &'static str {
        match self {
            TextField::Short => "short",
            TextField::Long => "long",
        }
    }
}

impl fmt::Display for TextField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TextField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "short" => Ok(TextField::Short),
            "long" => Ok(TextField::Long),
            _ => Err(Error::UnknownName {
                kind: "text field",
                name: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subset {
    Skippable,
    NonSkippable,
    All,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Skippable => "skippable",
            Subset::NonSkippable => "non_skippable",
            Subset::All => "all",
        }
    }

    fn admits(self, skippable: bool) -> bool {
        match self {
            Subset::Skippable => skippable,
            Subset::NonSkippable => !skippable,
            Subset::All => true,
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub query_id: String,
    /// 1-based rank of the target frame.
    pub rank: usize,
    /// Whether the target frame had a candidate region; unmatched frames sit
    /// in the id-ordered tail after all matched frames.
    pub matched: bool,
    pub skippable: bool,
    /// The rectangle actually queried (after any perturbation).
    pub query_rect: Rect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub subset: Subset,
    /// Sorted by `query_id`.
    pub per_query: Vec<QueryOutcome>,
    /// `(k, percent)` for each cutoff in [`RECALL_CUTOFFS`].
    pub recall_at: Vec<(usize, f64)>,
    pub mean_rank: f64,
    pub config_fingerprint: String,
}

impl EvalReport {
    fn from_outcomes(
        subset: Subset,
        per_query: Vec<QueryOutcome>,
        fingerprint: &str,
    ) -> Result<Self, Error> {
        let ranks: Vec<usize> = per_query.iter().map(|q| q.rank).collect();
        let recall_at = RECALL_CUTOFFS
            .iter()
            .map(|&k| recall_at_k(&ranks, k).map(|r| (k, r)))
            .collect::<Result<_, _>>()?;
        Ok(EvalReport {
            subset,
            mean_rank: mean_rank(&ranks)?,
            recall_at,
            per_query,
            config_fingerprint: fingerprint.into(),
        })
    }

    pub fn recall(&self, k: usize) -> Option<f64> {
        self.recall_at
            .iter()
            .find(|(c, _)| *c == k)
            .map(|(_, r)| *r)
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.per_query.iter().map(|q| q.rank).collect()
    }
}

/// Reports for the joint set and for each non-empty annotation subset.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReports {
    pub all: EvalReport,
    pub skippable: Option<EvalReport>,
    pub non_skippable: Option<EvalReport>,
}

impl EvalReports {
    pub fn iter(&self) -> impl Iterator<Item = &EvalReport> {
        self.skippable
            .iter()
            .chain(self.non_skippable.iter())
            .chain(core::iter::once(&self.all))
    }

    pub fn get(&self, subset: Subset) -> Option<&EvalReport> {
        match subset {
            Subset::All => Some(&self.all),
            Subset::Skippable => self.skippable.as_ref(),
            Subset::NonSkippable => self.non_skippable.as_ref(),
        }
    }
}

/// Hex digest identifying a configuration, for report provenance.
pub fn config_fingerprint(
    cfg: &RankingConfig,
    text_field: TextField,
    perturbation: Option<&PerturbationConfig>,
    extra: &str,
) -> String {
    let mut key = format!("cfg={};text={}", cfg.label(), text_field);
    if let Some(p) = perturbation {
        key.push_str(&format!(
            ";seed={};sx={:?};sy={:?};sa={:?}",
            p.master_seed, p.sigma_shift_x, p.sigma_shift_y, p.sigma_area
        ));
    }
    if !extra.is_empty() {
        key.push(';');
        key.push_str(extra);
    }
    format!("{:016x}", fnv1a64(key.as_bytes()))
}

/// Ranks one annotation's target frame.
pub fn evaluate_query(
    coll: &IndexedCollection,
    ann: &Annotation,
    cfg: &RankingConfig,
    text_field: TextField,
    perturbation: Option<&PerturbationConfig>,
) -> Result<QueryOutcome, Error> {
    let embedding = ann
        .embedding(text_field)
        .ok_or_else(|| Error::MissingEmbedding(ann.query_id.clone()))?;
    let query = l2_normalize(embedding)?;
    if coll.image(&ann.target_image_id).is_none() {
        return Err(Error::UnknownImage(ann.target_image_id.clone()));
    }
    let rect = match perturbation {
        Some(p) => crate::geometry::perturb_rect(&ann.rect, p, &ann.query_id),
        None => ann.rect,
    };
    let ranked = rank_images(coll, query.as_slice(), &rect, cfg)?;
    let position = ranked
        .entries()
        .iter()
        .position(|e| e.image_id == ann.target_image_id)
        .ok_or_else(|| Error::UnknownImage(ann.target_image_id.clone()))?;
    Ok(QueryOutcome {
        query_id: ann.query_id.clone(),
        rank: position + 1,
        matched: ranked.entries()[position].is_matched(),
        skippable: ann.skippable,
        query_rect: rect,
    })
}

/// Evaluates every annotation and aggregates per subset.
pub fn evaluate(
    coll: &IndexedCollection,
    annotations: &[Annotation],
    cfg: &RankingConfig,
    text_field: TextField,
    perturbation: Option<&PerturbationConfig>,
) -> Result<EvalReports, Error> {
    let fingerprint = config_fingerprint(cfg, text_field, perturbation, "");
    evaluate_with_fingerprint(
        coll,
        annotations,
        cfg,
        text_field,
        perturbation,
        &fingerprint,
    )
}

fn evaluate_with_fingerprint(
    coll: &IndexedCollection,
    annotations: &[Annotation],
    cfg: &RankingConfig,
    text_field: TextField,
    perturbation: Option<&PerturbationConfig>,
    fingerprint: &str,
) -> Result<EvalReports, Error> {
    if annotations.is_empty() {
        return Err(Error::EmptyInput("annotations"));
    }
    let mut outcomes = annotations
        .iter()
        .map(|ann| evaluate_query(coll, ann, cfg, text_field, perturbation))
        .collect::<Result<Vec<_>, _>>()?;
    outcomes.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    aggregate(outcomes, fingerprint)
}

/// Splits outcomes into subsets and computes their metrics.
pub fn aggregate(outcomes: Vec<QueryOutcome>, fingerprint: &str) -> Result<EvalReports, Error> {
    let subset = |s: Subset| -> Result<Option<EvalReport>, Error> {
        let picked: Vec<QueryOutcome> = outcomes
            .iter()
            .filter(|q| s.admits(q.skippable))
            .cloned()
            .collect();
        if picked.is_empty() {
            Ok(None)
        } else {
            EvalReport::from_outcomes(s, picked, fingerprint).map(Some)
        }
    };
    let skippable = subset(Subset::Skippable)?;
    let non_skippable = subset(Subset::NonSkippable)?;
    let all = EvalReport::from_outcomes(Subset::All, outcomes, fingerprint)?;
    Ok(EvalReports {
        all,
        skippable,
        non_skippable,
    })
}

/// Grid of perturbation strengths.
///
/// Shift sigmas are given in the caller's units (e.g. pixels) and divided by
/// `shift_scale` per axis to get normalized sigmas; `(1, 1)` means the grid is
/// already normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub sigma_shift: Vec<f64>,
    pub sigma_area: Vec<f64>,
    pub master_seed: u64,
    pub shift_scale: (f64, f64),
}

impl SweepSpec {
    pub fn perturbation(
        &self,
        sigma_shift: f64,
        sigma_area: f64,
    ) -> Result<PerturbationConfig, Error> {
        PerturbationConfig::anisotropic(
            sigma_shift / self.shift_scale.0,
            sigma_shift / self.shift_scale.1,
            sigma_area,
            self.master_seed,
        )
    }

    fn grid_key(&self) -> String {
        format!(
            "grid={:?}x{:?};scale={:?}",
            self.sigma_shift, self.sigma_area, self.shift_scale
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub config: RankingConfig,
    /// In the sweep's caller units (pixels).
    pub sigma_shift: f64,
    pub sigma_area: f64,
    pub reports: EvalReports,
}

/// Evaluates every configuration at every `(sigma_shift, sigma_area)` pair.
///
/// Perturbations depend only on the seed, the query id and the sigmas, so all
/// configurations in a cell query the same rectangles.
pub fn perturbation_sweep(
    coll: &IndexedCollection,
    annotations: &[Annotation],
    cfgs: &[RankingConfig],
    text_field: TextField,
    spec: &SweepSpec,
) -> Result<Vec<SweepCell>, Error> {
    if spec.sigma_shift.is_empty() || spec.sigma_area.is_empty() {
        return Err(Error::EmptyInput("sweep grid"));
    }
    if cfgs.is_empty() {
        return Err(Error::EmptyInput("ranking configs"));
    }
    if !(spec.shift_scale.0 > 0.0 && spec.shift_scale.1 > 0.0) {
        return Err(Error::InvalidFrameSize);
    }
    let grid_key = spec.grid_key();
    let mut cells = Vec::with_capacity(cfgs.len() * spec.sigma_shift.len() * spec.sigma_area.len());
    for cfg in cfgs {
        for &ss in &spec.sigma_shift {
            for &sa in &spec.sigma_area {
                let p = spec.perturbation(ss, sa)?;
                let fingerprint = config_fingerprint(cfg, text_field, Some(&p), &grid_key);
                let reports = evaluate_with_fingerprint(
                    coll,
                    annotations,
                    cfg,
                    text_field,
                    Some(&p),
                    &fingerprint,
                )?;
                cells.push(SweepCell {
                    config: *cfg,
                    sigma_shift: ss,
                    sigma_area: sa,
                    reports,
                });
            }
        }
    }
    Ok(cells)
}

/// How well a region set describes the annotated boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub annotations: usize,
    /// Mean over annotations of the best IoU between the box and any region
    /// of its target frame.
    pub mean_best_iou: f64,
    /// Mean number of regions per indexed frame.
    pub mean_regions_per_frame: f64,
    /// Mean over annotations of the largest share of the box covered by a
    /// single target-frame region.
    pub mean_max_coverage: f64,
    /// Mean over annotations of the frame fraction covered by the union of
    /// each frame's overlapping regions, averaged over frames with at least
    /// one overlapping region.
    pub mean_frame_coverage: f64,
    /// As `mean_frame_coverage`, keeping only the best-IoU region per frame.
    pub mean_frame_coverage_best_iou: f64,
}

pub fn diagnostics(
    coll: &IndexedCollection,
    annotations: &[Annotation],
) -> Result<Diagnostics, Error> {
    let mean_regions_per_frame = if coll.is_empty() {
        0.0
    } else {
        coll.region_count() as f64 / coll.len() as f64
    };
    let mut sums = [0.0f64; 4];
    let mut overlapping: Vec<Rect> = Vec::new();
    for ann in annotations {
        let target = coll
            .image(&ann.target_image_id)
            .ok_or_else(|| Error::UnknownImage(ann.target_image_id.clone()))?;
        let target_rects: Vec<Rect> = target.regions.iter().map(|r| r.rect).collect();
        sums[0] += target_rects
            .iter()
            .map(|r| iou(r, &ann.rect))
            .fold(0.0, f64::max);
        sums[1] += max_coverage(&ann.rect, &target_rects);

        let (mut frames, mut cover_all, mut cover_best) = (0usize, 0.0, 0.0);
        for image in coll.images() {
            overlapping.clear();
            overlapping.extend(
                image
                    .regions
                    .iter()
                    .map(|r: &RegionRecord| r.rect)
                    .filter(|r| intersection_area(r, &ann.rect) > 0.0),
            );
            if overlapping.is_empty() {
                continue;
            }
            frames += 1;
            cover_all += union_area(&overlapping);
            let best = overlapping
                .iter()
                .max_by(|a, b| iou(a, &ann.rect).total_cmp(&iou(b, &ann.rect)))
                .expect("non-empty");
            cover_best += best.area();
        }
        if frames > 0 {
            sums[2] += cover_all / frames as f64;
            sums[3] += cover_best / frames as f64;
        }
    }
    let n = annotations.len();
    let mean = |s: f64| if n == 0 { 0.0 } else { s / n as f64 };
    Ok(Diagnostics {
        annotations: n,
        mean_best_iou: mean(sums[0]),
        mean_regions_per_frame,
        mean_max_coverage: mean(sums[1]),
        mean_frame_coverage: mean(sums[2]),
        mean_frame_coverage_best_iou: mean(sums[3]),
    })
}
