mod support;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use subsearch::report::{ReportJson, SWEEP_HEADER};
use subsearch::search::SearchResponse;
use subsearch::store::load_index;

fn subsearch(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subsearch"))
        .current_dir(dir)
        .args(args)
        .env_remove("SUBSEARCH_INDEX")
        .env_remove("SUBSEARCH_EMBED_URL")
        .env_remove("SUBSEARCH_DISTANCE")
        .env_remove("SUBSEARCH_ALPHA")
        .env("RUST_LOG", "warn")
        .output()
        .expect("run subsearch")
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "status {:?}\nstderr: {}",
        o.status,
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_request(dir: &Path, body: serde_json::Value) {
    fs::write(dir.join("q.json"), body.to_string()).unwrap();
}

#[test]
fn build_index_normalizes_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = serde_json::json!({
        "version": 1, "dim": 3, "matrix_file": "raw.jsonl",
        "images": [
            {"image_id": "a", "frame_width_px": 100, "frame_height_px": 50, "frame_embedding_row": 0,
             "regions": [{"region_id": "r0", "rect": {"left": 0.0, "top": 0.0, "width": 0.5, "height": 1.0},
                          "embedding_row": 1, "source": "detector"}]},
            {"image_id": "b", "frame_width_px": 100, "frame_height_px": 50, "frame_embedding_row": 2,
             "regions": []}
        ]
    });
    fs::write(d.join("m.json"), manifest.to_string()).unwrap();
    fs::write(d.join("raw.jsonl"), "[3, 4, 0]\n[0, 0, 2]\n[1, 1, 1]\n").unwrap();

    let o = subsearch(d, &["build-index", "--manifest", "m.json", "--out", "idx"]);
    stdout(&o);
    let coll = load_index(&d.join("idx")).unwrap();
    assert_eq!(coll.len(), 2);
    assert_eq!(&coll.row(0)[..2], &[0.6, 0.8]);
    assert_eq!(coll.row(1), &[0.0, 0.0, 1.0]);

    // a zero vector cannot be normalized
    fs::write(d.join("raw.jsonl"), "[3, 4, 0]\n[0, 0, 0]\n[1, 1, 1]\n").unwrap();
    let o = subsearch(d, &["build-index", "--manifest", "m.json", "--out", "idx2"]);
    assert_eq!(o.status.code(), Some(2));

    // too few vectors for the manifest
    fs::write(d.join("raw.jsonl"), "[3, 4, 0]\n[0, 0, 2]\n").unwrap();
    let o = subsearch(d, &["build-index", "--manifest", "m.json", "--out", "idx3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dangling embedding row"));
}

#[test]
fn query_top_k_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let coll = support::write_fixture(d);
    let target = &coll.images()[3].regions[1];
    write_request(
        d,
        serde_json::json!({
            "embedding": coll.row(target.embedding_row),
            "rect": {"left": 0.0, "top": 0.0, "width": 1.0, "height": 1.0},
            "distance": "none",
            "top_k": 4,
        }),
    );
    let out = stdout(&subsearch(
        d,
        &["query", "--index", "idx", "--request", "q.json"],
    ));
    let resp: SearchResponse = serde_json::from_str(&out).unwrap();
    assert_eq!(resp.results.len(), 4);
    assert_eq!(resp.total_images, 5);
    assert_eq!(resp.results[0].image_id, "img3");
    assert_eq!(resp.results[0].region_id.as_deref(), Some("r1"));
    assert!(resp.results[0].geometric.is_none());

    // flag beats the request body; env supplies the index
    let o = Command::new(env!("CARGO_BIN_EXE_subsearch"))
        .current_dir(d)
        .args([
            "query",
            "--request",
            "q.json",
            "--top-k",
            "2",
            "--distance",
            "iou",
        ])
        .env("SUBSEARCH_INDEX", "idx")
        .env_remove("SUBSEARCH_DISTANCE")
        .output()
        .unwrap();
    let resp: SearchResponse = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(resp.results.len(), 2);
    assert!(resp.results[0].geometric.is_some());

    // env beats the default but loses to the flag
    let o = Command::new(env!("CARGO_BIN_EXE_subsearch"))
        .current_dir(d)
        .args([
            "query",
            "--index",
            "idx",
            "--request",
            "q.json",
            "--top-k",
            "1",
        ])
        .env("SUBSEARCH_TOP_K", "3")
        .output()
        .unwrap();
    let resp: SearchResponse = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(resp.results.len(), 1);
}

#[test]
fn text_query_without_embed_service_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    support::write_fixture(d);
    write_request(
        d,
        serde_json::json!({"text": "a dog", "rect": {"left": 0.0, "top": 0.0, "width": 0.5, "height": 0.5}}),
    );
    let o = subsearch(d, &["query", "--index", "idx", "--request", "q.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_report_has_every_subset_and_cutoff() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    support::write_fixture(d);
    let out = stdout(&subsearch(
        d,
        &[
            "eval",
            "--index",
            "idx",
            "--annotations",
            "a.jsonl",
            "--distance",
            "iou",
            "--fusion",
            "linear",
            "--alpha",
            "0.5",
        ],
    ));
    let report: ReportJson = serde_json::from_str(&out).unwrap();
    assert_eq!(report.config.label, "iou-linear-0.5-all_overlap");
    let names: Vec<&str> = report.subsets.iter().map(|s| s.subset.as_str()).collect();
    assert_eq!(names, ["skippable", "non_skippable", "all"]);
    for s in &report.subsets {
        let keys: Vec<&str> = s.recall.keys().map(String::as_str).collect();
        assert_eq!(keys, ["R@1", "R@10", "R@100", "R@1000"]);
        assert!(s.mean_rank >= 1.0);
        assert_eq!(s.ranks.len(), s.queries);
    }
    let all = report.subset("all").unwrap();
    assert_eq!(all.queries, 5);
    let ids: Vec<&str> = all.per_query.iter().map(|q| q.query_id.as_str()).collect();
    assert_eq!(ids, ["q00", "q01", "q02", "q03", "q04"]);
    // the long embedding equals the target region and its box is exact
    assert_eq!(all.recall["R@1"], 100.0);
}

#[test]
fn sweep_grid_cardinality_and_format() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    support::write_fixture(d);
    let args = [
        "sweep",
        "--index",
        "idx",
        "--annotations",
        "a.jsonl",
        "--distance",
        "iou,none",
        "--sigma-shift",
        "0,10,25,50",
        "--sigma-area",
        "0,0.1,0.25,0.5",
        "--seed",
        "42",
    ];
    let csv = stdout(&subsearch(d, &args));
    assert!(!csv.contains('\r'));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(SWEEP_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    // 2 configs x 16 cells x 3 subsets x 5 metrics
    assert_eq!(rows.len(), 2 * 16 * 3 * 5);
    for config in ["iou-linear-0.5-all_overlap", "none-linear-0.5-all_overlap"] {
        for subset in ["all", "skippable", "non_skippable"] {
            let cells: std::collections::BTreeSet<(&str, &str)> = rows
                .iter()
                .filter(|r| r[0] == config && r[6] == subset)
                .map(|r| (r[4], r[5]))
                .collect();
            assert_eq!(cells.len(), 16, "{config} {subset}");
        }
    }
    for r in &rows {
        assert_eq!(r.len(), 9);
        for v in [r[3], r[4], r[5], r[8]] {
            assert_eq!(v.split('.').nth(1).map(str::len), Some(4), "{v}");
        }
    }

    // same seed, same bytes
    let again = stdout(&subsearch(d, &args));
    assert_eq!(csv, again);
}

#[test]
fn usage_and_data_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    support::write_fixture(d);

    let o = subsearch(d, &["eval", "--index", "idx", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));

    let o = subsearch(d, &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));

    // missing --index with no env
    let o = subsearch(d, &["eval", "--annotations", "a.jsonl"]);
    assert_eq!(o.status.code(), Some(1));

    let o = subsearch(
        d,
        &[
            "eval",
            "--index",
            "idx",
            "--annotations",
            "a.jsonl",
            "--alpha",
            "2",
        ],
    );
    assert_eq!(o.status.code(), Some(1));

    let o = subsearch(
        d,
        &["eval", "--index", "nowhere", "--annotations", "a.jsonl"],
    );
    assert_eq!(o.status.code(), Some(2));

    fs::write(d.join("bad.jsonl"), "{\"query_id\": 1}\n").unwrap();
    let o = subsearch(d, &["eval", "--index", "idx", "--annotations", "bad.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));

    let o = subsearch(d, &["--help"]);
    assert_eq!(o.status.code(), Some(0));
}
