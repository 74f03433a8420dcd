use std::fs;
use std::path::Path;

use scribsim::cli::{run, EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL};
use scribsim::png_io::{read_distance_map, read_label_mask, write_binary_mask, write_gray8, write_label_mask};
use scribsim::synthetic::{generate_dataset, SyntheticSpec};
use scribsim::tensor_io::write_tensor;
use scribsim_core::{BinaryMask, LabelMask, Tensor};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("scribsim").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Run { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_dataset(dir: &Path) -> std::path::PathBuf {
    generate_dataset(dir, &SyntheticSpec { images: 3, width: 96, height: 72, seed: 1, ..Default::default() }).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let r = cli(&["frobnicate"]);
    assert_eq!(r.code, EXIT_CONFIG);
    assert!(!r.stderr.is_empty());
    assert_eq!(cli(&["simulate", "--out", "x"]).code, EXIT_CONFIG);
    assert_eq!(cli(&["--help"]).code, EXIT_OK);
}

#[test]
fn unreadable_manifest_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let r = cli(&["simulate", "--manifest", p(&tmp.path().join("none.json")), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(r.code, EXIT_CONFIG);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{ \"entries\": [ }").unwrap();
    let r = cli(&["simulate", "--manifest", p(&bad), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(r.code, EXIT_CONFIG);
    assert!(r.stderr.contains("line 1"), "{}", r.stderr);
}

#[test]
fn invalid_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_dataset(tmp.path());
    let config = tmp.path().join("config.json");
    fs::write(&config, r#"{ "stroke_width": 0 }"#).unwrap();
    let r = cli(&["simulate", "--manifest", p(&manifest), "--out", p(&tmp.path().join("o")), "--config", p(&config)]);
    assert_eq!(r.code, EXIT_CONFIG);
    fs::write(&config, r#"{ "no_such_field": 1 }"#).unwrap();
    let r = cli(&["simulate", "--manifest", p(&manifest), "--out", p(&tmp.path().join("o")), "--config", p(&config)]);
    assert_eq!(r.code, EXIT_CONFIG);
}

#[test]
fn simulate_reports_every_image() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_dataset(tmp.path());
    let out = tmp.path().join("out");
    let r = cli(&["simulate", "--manifest", p(&manifest), "--out", p(&out), "--seed", "3", "--jobs", "2"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let report: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(report["command"], "simulate");
    assert_eq!(report["seed"], 3);
    let images = report["images"].as_array().unwrap();
    let ids: Vec<&str> = images.iter().map(|i| i["image_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["img_0000", "img_0001", "img_0002"]);
    for id in ids {
        let label = read_label_mask(&out.join(format!("{id}.png"))).unwrap();
        assert_eq!(label.dims(), (96, 72));
        assert!(label.labeled_count() > 0);
    }
}

#[test]
fn missing_mask_marks_image_and_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_dataset(tmp.path());
    fs::remove_file(tmp.path().join("masks/img_0001_0.png")).unwrap();
    let out = tmp.path().join("out");
    let report_path = tmp.path().join("report.json");
    let r = cli(&["simulate", "--manifest", p(&manifest), "--out", p(&out), "--report", p(&report_path)]);
    assert_eq!(r.code, EXIT_PARTIAL);
    assert!(r.stdout.is_empty());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(report_path).unwrap()).unwrap();
    let statuses: Vec<&str> = report["images"].as_array().unwrap().iter().map(|i| i["status"].as_str().unwrap()).collect();
    assert_eq!(statuses, ["ok", "error", "ok"]);
    assert!(out.join("img_0000.png").is_file());
    assert!(!out.join("img_0001.png").exists());
}

#[test]
fn empty_manifest_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("manifest.json");
    fs::write(&manifest, r#"{ "entries": [] }"#).unwrap();
    let r = cli(&["simulate", "--manifest", p(&manifest), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(r.code, EXIT_OK);
    let report: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(report["images"].as_array().unwrap().len(), 0);
}

#[test]
fn distmap_round_trips_and_skips_empty_scribbles() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("scribbles");
    fs::create_dir(&input).unwrap();
    let mut labels = LabelMask::unlabeled(12, 8);
    labels.set(3, 4, 2);
    write_label_mask(&input.join("a.png"), &labels).unwrap();
    write_label_mask(&input.join("b.png"), &LabelMask::unlabeled(12, 8)).unwrap();
    let out = tmp.path().join("dist");
    let r = cli(&["distmap", "--input", p(&input), "--out", p(&out), "--lambda", "2", "--kind", "scribble"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let report: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    let statuses: Vec<&str> = report["images"].as_array().unwrap().iter().map(|i| i["status"].as_str().unwrap()).collect();
    assert_eq!(statuses, ["ok", "skipped"]);
    let (map, sidecar) = read_distance_map(&out.join("a.dist.png")).unwrap();
    assert_eq!(sidecar.lambda, 2.0);
    assert_eq!(map.raw()[4 * 12 + 3], 0);
    // One pixel right of the source: floor(sqrt(e^2)) = 2.
    assert_eq!(map.raw()[4 * 12 + 4], 2);
    assert!(!out.join("b.dist.png").exists());

    let r = cli(&["distmap", "--input", p(&tmp.path().join("nope")), "--out", p(&out), "--lambda", "2", "--kind", "pseudo"]);
    assert_eq!(r.code, EXIT_CONFIG);
}

#[test]
fn stats_csv_from_simulated_scribbles() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_dataset(tmp.path());
    let out = tmp.path().join("out");
    assert_eq!(cli(&["simulate", "--manifest", p(&manifest), "--out", p(&out)]).code, EXIT_OK);
    let r = cli(&["stats", "--manifest", p(&manifest), "--scribbles", p(&out), "--bins", "5"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[0], "mask_ratio_edges_pct,0,20,40,60,80,100");
    let total: u64 = lines[2..].iter().flat_map(|l| l.split(',').skip(1)).map(|c| c.parse::<u64>().unwrap()).sum();
    assert!(total > 0);

    fs::remove_file(out.join("img_0002.png")).unwrap();
    let r = cli(&["stats", "--manifest", p(&manifest), "--scribbles", p(&out)]);
    assert_eq!(r.code, EXIT_PARTIAL);
    assert!(r.stderr.contains("img_0002"));
}

#[test]
fn losscheck_reports_values_and_gradients() {
    let tmp = tempfile::tempdir().unwrap();
    let logits = Tensor::from_fn(&[3, 2, 2], |i| (i as f32 * 0.37).sin()).unwrap();
    write_tensor(&tmp.path().join("logits.bin"), &logits).unwrap();
    let labels = LabelMask::from_values(2, 2, vec![0, 2, 255, 1]).unwrap();
    write_label_mask(&tmp.path().join("scribble.png"), &labels).unwrap();
    let r = cli(&[
        "losscheck",
        "--logits",
        p(&tmp.path().join("logits.bin")),
        "--scribble",
        p(&tmp.path().join("scribble.png")),
        "--pseudo",
        p(&tmp.path().join("scribble.png")),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert!(v["partial_ce"]["value"].as_f64().unwrap() > 0.0);
    assert!(v["partial_ce"]["grad_check_max_rel_error"].as_f64().unwrap() < 1e-4);
    assert_eq!(v["smoothed_ce"]["epsilon"], 0.2);

    assert_eq!(cli(&["losscheck"]).code, EXIT_CONFIG);
}

#[test]
fn convert_builds_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let (sem, inst) = (tmp.path().join("sem"), tmp.path().join("inst"));
    fs::create_dir(&sem).unwrap();
    fs::create_dir(&inst).unwrap();
    write_gray8(&sem.join("x.png"), 4, 1, &[0, 3, 3, 7]).unwrap();
    write_gray8(&inst.join("x.png"), 4, 1, &[0, 1, 1, 0]).unwrap();
    let out = tmp.path().join("out");
    let r = cli(&["convert", "--semantic", p(&sem), "--instances", p(&inst), "--out", p(&out)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let classes: Vec<i64> = manifest["entries"][0]["instances"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["class_id"].as_i64().unwrap())
        .collect();
    assert_eq!(classes, [3, 7, 0]);
}

#[test]
fn demo_then_simulate() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let r = cli(&["demo", "--out", p(&data), "--images", "2", "--width", "64", "--height", "48"]);
    assert_eq!(r.code, EXIT_OK);
    let manifest = r.stdout.trim().to_string();
    let r = cli(&["simulate", "--manifest", &manifest, "--out", p(&tmp.path().join("o"))]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
}

#[test]
fn instance_mask_size_mismatch_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    write_binary_mask(&tmp.path().join("m.png"), &BinaryMask::full(5, 5)).unwrap();
    let manifest = tmp.path().join("manifest.json");
    fs::write(
        &manifest,
        r#"{ "entries": [ { "image_id": "a", "width": 6, "height": 5, "instances": [ { "class_id": 1, "mask_path": "m.png" } ] } ] }"#,
    )
    .unwrap();
    let r = cli(&["simulate", "--manifest", p(&manifest), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(r.code, EXIT_PARTIAL);
    assert!(r.stdout.contains("\"error\""));
}
