use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cplx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cplx"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn synth(dir: &Path) {
    let out = cplx(dir, &["synth", "--preset", "two_equal", "-o", "d.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(cplx(d, &["stats", "missing.csv"]).status.code(), Some(4));
    fs::write(d.join("bad.csv"), "id,label,e0\na,x,1\nb,y,NaN\n").unwrap();
    let out = cplx(d, &["stats", "bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    assert_eq!(cplx(d, &["synth", "--preset", "nope"]).status.code(), Some(2));
    // cosine distance is undefined at the origin
    fs::write(
        d.join("origin.csv"),
        "id,label,e0,e1\na,x,0,0\nb,x,1,2\nc,x,2,1\nd,y,-1,1\ne,y,-2,3\nf,y,-1,2\n",
    )
    .unwrap();
    let out = cplx(d, &["score", "origin.csv"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    // a rank-deficient class is still usable through the pseudo-inverse
    fs::write(
        d.join("flat.csv"),
        "id,label,e0,e1\na,x,1,1\nb,x,2,2\nc,x,3,3\nd,y,0,1\ne,y,1,0\nf,y,2,2\n",
    )
    .unwrap();
    let out = cplx(d, &["score", "flat.csv", "--shrinkage", "none", "--fallback", "pinv"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn split_scores_only_the_held_out_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let out = cplx(d, &["stats", "d.csv", "--split", "0.8", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("num_samples,200"), "{text}");
    assert!(text.contains("class_count:c0,100"));
}

#[test]
fn predictions_must_cover_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    fs::write(d.join("p.csv"), "id,predicted_label,confidence\nc0-0,c0,0.9\n").unwrap();
    let out = cplx(d, &["slices", "d.csv", "--predictions", "p.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("c0-1"));

    let mut all = String::from("id,predicted_label,confidence\n");
    for c in ["c0", "c1"] {
        for i in 0..500 {
            all.push_str(&format!("{c}-{i},c0,0.5\n"));
        }
    }
    fs::write(d.join("all.csv"), all).unwrap();
    let out = cplx(d, &["slices", "d.csv", "--predictions", "all.csv", "--no-pairs", "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn model_file_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    assert!(cplx(d, &["fit", "d.csv", "-o", "m.json"]).status.success());
    let with_model = cplx(d, &["score", "d.csv", "--model", "m.json"]).stdout;
    let on_the_fly = cplx(d, &["score", "d.csv"]).stdout;
    assert!(!with_model.is_empty());
    assert_eq!(with_model, on_the_fly);
}

#[test]
fn heatmap_grid_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = cplx(dir.path(), &["heatmap", "--preset", "two_equal", "--exact", "--resolution", "9"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,value"));
    assert_eq!(lines.count(), 81);
}

#[test]
fn binary_synth_round_trips_through_stats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = cplx(d, &["synth", "--preset", "three_two_overlaps", "--format", "binary", "-o", "d.bin"]);
    assert!(out.status.success());
    assert!(fs::read(d.join("d.bin")).unwrap().starts_with(b"CPLX1"));
    let out = cplx(d, &["stats", "d.bin", "--metric", "euclidean"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"num_samples\": 1500"));
}

#[test]
fn unsupported_format_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    assert_eq!(cplx(d, &["fit", "d.csv", "--format", "csv"]).status.code(), Some(2));
    assert_eq!(cplx(d, &["report", "d.csv", "--format", "csv"]).status.code(), Some(2));
}
