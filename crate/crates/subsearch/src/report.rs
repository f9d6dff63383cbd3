//! Evaluation report JSON and sweep CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use subsearch_core::eval::{EvalReport, EvalReports, SweepCell, TextField};
use subsearch_core::RankingConfig;

use crate::store::RectJson;

pub const SWEEP_HEADER: &str =
    "config,distance,fusion,alpha,sigma_shift,sigma_area,subset,metric,value";

/// Rank policy for targets with no overlapping region, stated in reports.
pub const UNMATCHED_POLICY: &str = "appended_tail_by_image_id";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigJson {
    pub label: String,
    pub distance: String,
    pub fusion: String,
    pub alpha: f64,
    pub candidate_mode: String,
    pub text_field: String,
}

impl ConfigJson {
    pub fn new(cfg: &RankingConfig, text_field: TextField) -> Self {
        ConfigJson {
            label: cfg.label(),
            distance: cfg.distance.as_str().into(),
            fusion: cfg.fusion.as_str().into(),
            alpha: cfg.alpha(),
            candidate_mode: cfg.candidate_mode.as_str().into(),
            text_field: text_field.as_str().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryJson {
    pub query_id: String,
    pub rank: usize,
    pub matched: bool,
    pub skippable: bool,
    pub query_rect: RectJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReportJson {
    pub subset: String,
    pub queries: usize,
    /// Keyed `R@1`, `R@10`, ...; percentages.
    pub recall: BTreeMap<String, f64>,
    pub mean_rank: f64,
    /// Ordered by query id.
    pub ranks: Vec<usize>,
    pub unmatched_targets: usize,
    pub per_query: Vec<QueryJson>,
    pub config_fingerprint: String,
}

impl From<&EvalReport> for SubsetReportJson {
    fn from(r: &EvalReport) -> Self {
        SubsetReportJson {
            subset: r.subset.as_str().into(),
            queries: r.per_query.len(),
            recall: r
                .recall_at
                .iter()
                .map(|(k, v)| (format!("R@{k}"), *v))
                .collect(),
            mean_rank: r.mean_rank,
            ranks: r.ranks(),
            unmatched_targets: r.per_query.iter().filter(|q| !q.matched).count(),
            per_query: r
                .per_query
                .iter()
                .map(|q| QueryJson {
                    query_id: q.query_id.clone(),
                    rank: q.rank,
                    matched: q.matched,
                    skippable: q.skippable,
                    query_rect: q.query_rect.into(),
                })
                .collect(),
            config_fingerprint: r.config_fingerprint.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub config: ConfigJson,
    pub unmatched_rank_policy: String,
    pub subsets: Vec<SubsetReportJson>,
}

impl ReportJson {
    pub fn new(cfg: &RankingConfig, text_field: TextField, reports: &EvalReports) -> Self {
        ReportJson {
            config: ConfigJson::new(cfg, text_field),
            unmatched_rank_policy: UNMATCHED_POLICY.into(),
            subsets: reports.iter().map(SubsetReportJson::from).collect(),
        }
    }

    pub fn subset(&self, name: &str) -> Option<&SubsetReportJson> {
        self.subsets.iter().find(|s| s.subset == name)
    }
}

/// One CSV row per cell, subset and metric (`R@k` then `MNR`).
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::with_capacity(64 * cells.len() * 15);
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for cell in cells {
        let cfg = &cell.config;
        for report in cell.reports.iter() {
            let metrics = report
                .recall_at
                .iter()
                .map(|(k, v)| (format!("R@{k}"), *v))
                .chain(std::iter::once(("MNR".to_string(), report.mean_rank)));
            for (metric, value) in metrics {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.4},{:.4},{:.4},{},{},{:.4}",
                    cfg.label(),
                    cfg.distance,
                    cfg.fusion,
                    cfg.alpha(),
                    cell.sigma_shift,
                    cell.sigma_area,
                    report.subset,
                    metric,
                    value
                );
            }
        }
    }
    out
}
