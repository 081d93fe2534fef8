use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn slotsel(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slotsel")).args(args).current_dir(dir).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn gen_solve_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("gen.toml"), "alpha = 0.5\nseed = 3\nn_slots = 40\nn_users = 400\nn_products = 5\n").unwrap();
    let out = slotsel(&["gen", "gen.toml", "-o", "inst.json"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha="));

    for algo in ["pdg", "rand", "random", "topk"] {
        let rec = format!("{algo}.json");
        let out = slotsel(&["solve", "inst.json", "-a", algo, "--seed", "5", "--no-timing", "-o", &rec], d);
        assert_eq!(code(&out), 0, "{algo}: {}", String::from_utf8_lossy(&out.stderr));
        let first = fs::read(d.join(&rec)).unwrap();
        let again = slotsel(&["solve", "inst.json", "-a", algo, "--seed", "5", "--no-timing"], d);
        assert_eq!(again.stdout, first, "{algo} output is not reproducible");
        assert_eq!(code(&slotsel(&["validate", "inst.json", "-r", &rec], d)), 0);
    }

    // bca needs a common-variant instance
    assert_ne!(code(&slotsel(&["solve", "inst.json", "-a", "bca"], d)), 0);

    let text = fs::read_to_string(d.join("pdg.json")).unwrap();
    let mut rec: serde_json::Value = serde_json::from_str(&text).unwrap();
    rec["total_cost"] = serde_json::json!(rec["total_cost"].as_f64().unwrap() + 1.0);
    fs::write(d.join("tampered.json"), rec.to_string()).unwrap();
    assert_eq!(code(&slotsel(&["validate", "inst.json", "-r", "tampered.json"], d)), 2);

    fs::write(d.join("broken.json"), "{\"format\": \"nope\"}").unwrap();
    assert_eq!(code(&slotsel(&["validate", "broken.json"], d)), 2);
}

#[test]
fn sweep_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("sweep.toml"),
        "alpha = [0.4, 0.8]\nseeds = [0, 1]\nn_products = [4]\nalgos = [\"pdg\", \"topk\"]\n[base]\nn_slots = 30\nn_users = 300\n",
    )
    .unwrap();
    let out = slotsel(&["sweep", "sweep.toml", "-o", "rows.csv", "--no-timing", "--threads", "2"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = fs::read_to_string(d.join("rows.csv")).unwrap();
    let header = rows.lines().next().unwrap();
    assert_eq!(header, slotsel::harness::SWEEP_COLUMNS.join(","));
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 2);
    assert!(d.join("rows.summary.csv").exists());

    let again = slotsel(&["sweep", "sweep.toml", "-o", "again.csv", "--no-timing", "--threads", "1"], d);
    assert_eq!(code(&again), 0);
    assert_eq!(fs::read(d.join("again.csv")).unwrap(), rows.as_bytes());
}

#[test]
fn infeasible_only_sweep_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("hard.toml"),
        "alpha = [3.0]\nn_products = [4]\nalgos = [\"topk\"]\n[base]\nn_slots = 20\nn_users = 200\n",
    )
    .unwrap();
    let out = slotsel(&["sweep", "hard.toml", "-o", "rows.csv", "--no-timing"], d);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "bogus = 1\n").unwrap();
    let out = slotsel(&["gen", "bad.toml"], d);
    assert_ne!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}
