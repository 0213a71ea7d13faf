use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use svgvuln::corpus::synth_imbalanced;
use svgvuln::embed::ProviderSpec;
use svgvuln::nn::{checkpoint, TrainConfig};
use svgvuln::run::{self, RunManifest, MANIFEST_VERSION};
use svgvuln::AnalysisConfig;
use svgvuln_ffi::*;

fn fixture(name: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name);
    CString::new(std::fs::read_to_string(p).unwrap()).unwrap()
}

fn take(s: *mut std::ffi::c_char) -> String {
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { svgv_string_free(s) };
    out
}

#[test]
fn graph_counts_and_exports() {
    let src = fixture("print_record.c");
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { svgv_graph_build(src.as_ptr(), &mut g) }, SvgvStatus::Ok);
    let mut c = SvgvEdgeCounts::default();
    assert_eq!(unsafe { svgv_graph_edge_counts(g, &mut c) }, SvgvStatus::Ok);
    assert_eq!((c.nodes, c.sequential, c.data_flow, c.control_flow), (62, 61, 3, 3));
    assert_eq!(c.poacher_data_processing, 1);
    assert_eq!(c.total, 68);

    let mut s = ptr::null_mut();
    assert_eq!(unsafe { svgv_graph_to_json(g, &mut s) }, SvgvStatus::Ok);
    let json: serde_json::Value = serde_json::from_str(&take(s)).unwrap();
    assert!(json.is_object());
    assert_eq!(unsafe { svgv_graph_to_dot(g, &mut s) }, SvgvStatus::Ok);
    assert!(take(s).contains("->"));
    unsafe { svgv_graph_free(g) };
}

#[test]
fn errors_carry_status_and_message() {
    let empty = CString::new("   \n").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { svgv_graph_build(empty.as_ptr(), &mut g) }, SvgvStatus::Io);
    assert!(g.is_null());
    let msg = unsafe { CStr::from_ptr(svgv_last_error()) }.to_str().unwrap();
    assert!(!msg.is_empty());

    assert_eq!(unsafe { svgv_graph_build(ptr::null(), &mut g) }, SvgvStatus::InvalidArgument);

    let missing = CString::new("/nonexistent/model.ckpt").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { svgv_model_load(missing.as_ptr(), &mut m) }, SvgvStatus::Io);
    unsafe {
        svgv_graph_free(ptr::null_mut());
        svgv_model_free(ptr::null_mut());
        svgv_string_free(ptr::null_mut());
    }
}

#[test]
fn model_round_trip_through_abi() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_imbalanced(40, 1.0, 3).unwrap();
    let manifest = RunManifest {
        format_version: MANIFEST_VERSION,
        corpus: dir.path().join("c.jsonl"),
        analysis: AnalysisConfig::default(),
        provider: ProviderSpec::Hashed { dim: 8, seed: 3 },
        hidden: 8,
        classes: 8,
        train: TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        },
    };
    let art = run::train_run(&manifest, &corpus).unwrap();
    let path = dir.path().join("model.ckpt");
    checkpoint::save(&art.model, &path).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { svgv_model_load(cpath.as_ptr(), &mut m) }, SvgvStatus::Ok);
    let src = fixture("strcpy_unchecked.c");
    let mut p = SvgvPrediction::default();
    assert_eq!(unsafe { svgv_model_predict(m, src.as_ptr(), &mut p) }, SvgvStatus::Ok);
    let want = art.model.predict(src.to_str().unwrap()).unwrap();
    assert_eq!(p.vulnerable, want.vulnerable);
    assert_eq!(p.cited_edges, want.contributing_edges.len());
    assert!(p.cited_edges >= 1);

    let mut s = ptr::null_mut();
    assert_eq!(unsafe { svgv_model_predict_json(m, src.as_ptr(), &mut s) }, SvgvStatus::Ok);
    let json: serde_json::Value = serde_json::from_str(&take(s)).unwrap();
    assert_eq!(json["vulnerable"].as_f64().unwrap(), want.vulnerable);
    unsafe { svgv_model_free(m) };
}

#[test]
fn header_compiles_as_c() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/svgvuln.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["svgv_graph_build", "svgv_model_predict", "svgv_last_error", "SvgvStatus"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-x", "c"])
        .arg(&header)
        .output()
    else {
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
