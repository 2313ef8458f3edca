use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn fa2lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fa2lab")).args(args).output().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn strip_clock(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_clock_s");
    v
}

#[test]
fn bp_on_all_infected_grid_fills_everything() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    fs::write(&g, "d=2 dims=3x2 boundary=healthy_frozen\niii\niii\n").unwrap();
    let o = fa2lab(&["bp", "--seed", "0", "--env", g.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["closure_size"], 6);
    assert_eq!(v["infected_initial"], 6);
    assert_eq!(v["tau0"], 0);
}

#[test]
fn missing_seed_is_a_config_error() {
    let o = fa2lab(&["bp", "--dims", "4x4"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_flag_is_a_config_error() {
    let o = fa2lab(&["bp", "--seed", "1", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn illegal_move_file_exits_two_with_index() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    let m = dir.path().join("m.csv");
    fs::write(&g, "d=2 dims=3x3 boundary=healthy_frozen\nihh\nhhh\nhhh\n").unwrap();
    fs::write(&m, "0,0,0,h\n1,1,1,i\n").unwrap();
    let o = fa2lab(&["verify-path", "--seed", "0", "--grid", g.to_str().unwrap(), "--moves", m.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("violation at move 0"));
    assert_eq!(json(&o)["first_violation"]["index"], 0);
}

#[test]
fn emitted_z2_moves_reverify() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    let g = dir.path().join("g.txt");
    let (ms, gs) = (m.to_str().unwrap(), g.to_str().unwrap());
    let o = fa2lab(&["z2-path", "--seed", "4", "--L", "4", "--l", "6", "--emit-moves", ms, "--emit-grid", gs]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["legal"], true);
    assert_eq!(v["origin_infected"], true);
    assert!(v["N"].as_u64().unwrap() <= 4 * 16 * 6);
    assert!(v["D"].as_u64().unwrap() <= 12);
    assert!(v["V"].as_u64().unwrap() <= 48);
    let o = fa2lab(&["verify-path", "--seed", "0", "--grid", gs, "--moves", ms]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["legal"], true);
}

#[test]
fn emitted_z3_moves_reverify() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    let g = dir.path().join("g.txt");
    let (ms, gs) = (m.to_str().unwrap(), g.to_str().unwrap());
    let o = fa2lab(&["z3-demo", "--seed", "1", "--L", "1", "--l", "1", "--route", "A", "--emit-moves", ms, "--emit-grid", gs]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["legal"], true);
    assert_eq!(v["origin_infected"], true);
    assert_eq!(v["routes"][0], "A");
    assert!(v["constants"]["hamming_per_L"].as_u64().is_some());
    let o = fa2lab(&["verify-path", "--seed", "0", "--grid", gs, "--moves", ms]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn unknown_route_is_a_config_error() {
    let o = fa2lab(&["z3-demo", "--seed", "1", "--route", "C"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_supplies_flags_and_cli_wins() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.txt");
    fs::write(&c, "# bp run\nmode=bp\nseed=5\ndims=5x5\nq=0.5\n").unwrap();
    let cs = c.to_str().unwrap();
    let a = json(&fa2lab(&["bp", "--config", cs]));
    assert_eq!(a["seed"], 5);
    let b = json(&fa2lab(&["bp", "--config", cs, "--seed", "6"]));
    assert_eq!(b["seed"], 6);
    let direct = json(&fa2lab(&["bp", "--seed", "5", "--dims", "5x5", "--q", "0.5"]));
    assert_eq!(strip_clock(a), strip_clock(direct));
}

#[test]
fn reruns_are_identical_up_to_clock() {
    let args = ["simulate", "--seed", "9", "--dims", "6x6", "--q", "0.4", "--replicas", "30", "--horizon", "200"];
    let a = strip_clock(json(&fa2lab(&args)));
    let b = strip_clock(json(&fa2lab(&args)));
    assert_eq!(a, b);
    assert_eq!(a["stats"]["replicas"], 30);
}

#[test]
fn exact_identity_holds_on_small_box() {
    let o = fa2lab(&["exact", "--seed", "2", "--dims", "3x3", "--boundary", "infected_frozen", "--q", "0.35", "--pi", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["identity_holds"], true);
}

#[test]
fn sweep_writes_one_row_per_cell_with_bound_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    let o = fa2lab(&[
        "sweep", "--seed", "3", "--dims", "8x8", "--replicas", "20", "--horizon", "1000", "--qs", "0.4,0.3", "--pis",
        "0,0.05", "--csv", p.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows = json(&o)["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 4);
    let csv = fs::read_to_string(&p).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let b = fa2lab::moves::eval_yoyoma_bound(4 * 16 * 10, 12, 48, 0.4, 0.0).unwrap();
    assert!((rows[0]["time_threshold_log10"].as_f64().unwrap() - b.time_threshold_log10).abs() < 1e-12);
    assert!((rows[0]["prob_bound"].as_f64().unwrap() - b.prob_bound).abs() < 1e-12);
}
