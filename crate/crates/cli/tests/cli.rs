use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn phic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phic")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("phic-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn check_xlogx_is_f1() {
    let out = phic(&["check", "--phi", "xlogx", "--class", "F1", "--grid", "0.01:10:200"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["tool"], "phic");
    assert_eq!(v["command"], "check");
    assert_eq!(v["seed"], 0);
    assert_eq!(v["result"]["member"], true);
    assert_eq!(v["result"]["grid"]["n"], 200);
}

#[test]
fn degenerate_class_check_is_undecided() {
    let out = phic(&["check", "--phi", "power:2", "--class", "F1", "--grid", "0.1:2:10"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["member"], "undecided");
}

#[test]
fn sdpi_z_channel_square() {
    let out = phic(&["sdpi", "--phi", "power:2", "--source", "z", "--s", "0.5", "--d", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let eta = v["result"]["eta"].as_f64().unwrap();
    assert!((eta - 1.0 / 3.0).abs() < 1e-6, "{eta}");
    assert!(v["result"]["argmax"]["u"].is_number());
    assert!(v["result"]["fbox"].is_array());
    // 17 significant digits
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"eta\": 3.33333333"), "{text}");
}

#[test]
fn sdpi_pinned_and_joint_file() {
    let out = phic(&["sdpi", "--phi", "xlogx", "--joint", &data("dsbs_0.2.json"), "--x", "A", "--y", "B"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = phic(&["sdpi", "--phi", "xlogx", "--source", "z", "--s", "0.3", "--d", "0.4", "--pin-v0", "--fbox", "0.01:5"]);
    let v = json(&out);
    assert_eq!(v["result"]["argmax"]["v"].as_f64(), Some(0.01));
}

#[test]
fn box_check_pr() {
    let out = phic(&["box", "check", &data("pr.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["no_signaling"], true);
}

#[test]
fn malformed_input_names_the_field() {
    let bad = tmp("bad_box.json");
    std::fs::write(&bad, r#"{"x":2,"y":2,"a":2,"b":2,"p":[[[[0.5,"x"]]]]}"#).unwrap();
    let out = phic(&["box", "check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad_box.json") && err.contains("p[0][0][0][1]"), "{err}");
    let out = phic(&["box", "check", "/nonexistent/box.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(phic(&["check", "--phi", "xlogx"]).status.code(), Some(1));
    assert_eq!(phic(&["sdpi", "--phi", "nope", "--source", "z", "--s", "0.5", "--d", "0.5"]).status.code(), Some(1));
    assert_eq!(phic(&["--help"]).status.code(), Some(0));
}

#[test]
fn wired_box_round_trips() {
    let out_path = tmp("wired.json");
    let boxes = format!("{},{}", data("pr.json"), data("pr.json"));
    let out = phic(&["box", "wire", "--boxes", &boxes, "--strategy", &data("xor2.json"), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(written["meta"]["tool"], "phic");
    let out = phic(&["box", "check", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["no_signaling"], true);
}

#[test]
fn chains_and_monotone_pass() {
    let boxes = format!("{},{}", data("pr.json"), data("isotropic_0.9.json"));
    let out = phic(&["box", "chains", "--boxes", &boxes, "--strategy", &data("xor2.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["pass"], true);
    let out = phic(&["--seed", "4", "box", "monotone", "--phi", "power:2", "--boxes", &boxes, "--strategy", &data("xor2.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["seed"], 4);
    assert_eq!(v["result"]["pass"], true);
}

#[test]
fn theorem2_and_boundary_csv() {
    let out = phic(&["theorem2", "--phi", "xlogx", "--s-grid", "0.2:0.8:2", "--d-grid", "0.4:0.6:2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# phic"));
    assert!(lines[1].starts_with("s,d,phi,hypothesis_verified"));
    assert_eq!(lines.len(), 6);
    assert!(lines[2..].iter().all(|l| l.ends_with(",true")));

    let out = phic(&["ribbon", "--phi", "power:2", "--joint", &data("dsbs_0.2.json"), "--a", "A", "--b", "B", "--boundary", "--l2-grid", "0.4:0.6:2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(2).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    // (1 − λ₁)(1 − λ₂) = λ₁λ₂ρ² with ρ = 0.6
    let expect = 0.6 / (0.6 + 0.4 * 0.36);
    assert!(row[1] <= expect + 1e-9 && expect <= row[2] + 1e-9, "{row:?} vs {expect}");
}

#[test]
fn ribbon_point_query() {
    let out = phic(&["ribbon", "--phi", "xlogx", "--joint", &data("dsbs_0.2.json"), "--a", "A", "--b", "B", "--pt", "0.5,0.5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["result"]["verdict"]["status"], "no_violation_found");
    let out = phic(&["ribbon", "--phi", "xlogx", "--joint", &data("dsbs_0.2.json"), "--a", "A", "--b", "B", "--pt", "0.9,0.9"]);
    assert_eq!(json(&out)["result"]["verdict"]["status"], "certified_out");
}
