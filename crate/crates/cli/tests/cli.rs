use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qmd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmd")).current_dir(dir).args(args).output().expect("spawn qmd")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_error(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().find(|l| l.starts_with("{\"error\"")).expect("structured error");
    serde_json::from_str(line).unwrap()
}

#[test]
fn gen_then_analyze_stays_within_bound() {
    let t = tempfile::tempdir().unwrap();
    let o = qmd(t.path(), &["gen", "--kind", "counterexample", "--k", "1", "--level", "6", "--out", "set.json"]);
    assert_eq!(code(&o), 0);
    let set = json(&t.path().join("set.json"));
    assert_eq!(set["dimension"], 1);
    assert_eq!(set["cells"].as_array().unwrap().len(), 32);
    assert_eq!(set["manifest"]["command"], "gen");

    let o = qmd(
        t.path(),
        &[
            "analyze",
            "--set",
            "set.json",
            "--epsilon",
            "0.1",
            "--family",
            "cubes",
            "--clip",
            "true",
            "--out",
            "report.json",
            "--csv",
            "r.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&t.path().join("report.json"));
    assert_eq!(r["withinBound"], true);
    for key in ["epsilon", "family", "perLevel", "total", "theoreticalBound", "slack", "badSample"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert_eq!(r["manifest"]["inputs"][0]["flag"], "set");
    let csv = fs::read_to_string(t.path().join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# manifest: "));
    assert_eq!(lines.next().unwrap(), "level,filtered_sum,unfiltered_sum");
    assert_eq!(lines.count(), 7);
}

#[test]
fn analyze_balls_reports_a_dense_scale() {
    let t = tempfile::tempdir().unwrap();
    qmd(t.path(), &["gen", "--kind", "bernoulli", "--dim", "2", "--level", "4", "--p", "0.6", "--out", "s.json"]);
    let o = qmd(
        t.path(),
        &["analyze", "--set", "s.json", "--epsilon", "1/4", "--family", "balls", "--A2", "2", "--out", "b.json"],
    );
    assert_eq!(code(&o), 0);
    let r = json(&t.path().join("b.json"));
    assert_eq!(r["family"]["kind"], "balls");
    assert_eq!(r["family"]["A2"], "2");
    assert!(r["denseScale"].is_object());
    let o = qmd(
        t.path(),
        &[
            "--precision",
            "f32",
            "analyze",
            "--set",
            "s.json",
            "--epsilon",
            "1/4",
            "--family",
            "balls",
            "--A2",
            "2",
            "--out",
            "b32.json",
        ],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(json(&t.path().join("b32.json"))["total"], r["total"]);
}

#[test]
fn gen_kinds_and_encodings() {
    let t = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["--kind", "full", "--dim", "2", "--level", "3", "--encoding", "hex-bitset"],
        &["--kind", "cantor", "--level", "6", "--depth", "2"],
        &["--kind", "stripes", "--dim", "2", "--level", "4", "--k", "1"],
        &["--kind", "ball-union", "--dim", "2", "--level", "4", "--balls", r#"[{"center":[0.5,0.5],"radius":0.25}]"#],
        &["--kind", "bernoulli", "--level", "8", "--p", "0.3"],
    ];
    for (i, c) in cases.iter().enumerate() {
        let out = format!("g{i}.json");
        let mut args = vec!["gen"];
        args.extend_from_slice(c);
        args.extend(["--out", &out]);
        let o = qmd(t.path(), &args);
        assert_eq!(code(&o), 0, "{c:?}: {}", String::from_utf8_lossy(&o.stderr));
        let v = json(&t.path().join(&out));
        let f: qmd_core::SetFile = serde_json::from_value(v).unwrap();
        assert!(!f.decode().unwrap().is_empty());
    }
    assert_eq!(json(&t.path().join("g0.json"))["bits"], "ffffffffffffffff");
}

#[test]
fn seed_changes_random_sets() {
    let t = tempfile::tempdir().unwrap();
    for (seed, out) in [("1", "a.json"), ("1", "b.json"), ("2", "c.json")] {
        qmd(t.path(), &["--seed", seed, "gen", "--kind", "bernoulli", "--level", "8", "--out", out]);
    }
    let cells = |f: &str| json(&t.path().join(f))["cells"].clone();
    assert_eq!(cells("a.json"), cells("b.json"));
    assert_ne!(cells("a.json"), cells("c.json"));
}

#[test]
fn nets_lists_levels() {
    let t = tempfile::tempdir().unwrap();
    let o = qmd(t.path(), &["nets", "--set-geometry", "2,3", "--A", "1", "--out", "nets.json"]);
    assert_eq!(code(&o), 0);
    let v = json(&t.path().join("nets.json"));
    let levels = v["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 4);
    // Diagonal corner cells of a 2-d grid are more than 1 apart.
    assert_eq!(levels[0].as_array().unwrap().len(), 2);
    assert_eq!(levels[3].as_array().unwrap().len(), 64);
    assert_eq!(v["audit"]["nested"], true);
}

#[test]
fn decompose_full_set_is_one_piece() {
    let t = tempfile::tempdir().unwrap();
    qmd(t.path(), &["gen", "--kind", "full", "--dim", "2", "--level", "4", "--out", "full.json"]);
    let o = qmd(
        t.path(),
        &[
            "decompose",
            "--set",
            "full.json",
            "--alpha",
            "0.05",
            "--delta",
            "0.4",
            "--mode",
            "empirical",
            "--pairs",
            "sample:300",
            "--out",
            "d.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = json(&t.path().join("d.json"));
    assert_eq!(d["pieces"].as_array().unwrap().len(), 1);
    assert_eq!(d["garbage"]["cells"].as_array().unwrap().len(), 0);
    for key in ["alpha", "delta", "P", "epsilon", "N", "M", "mode"] {
        assert!(d["params"].get(key).is_some(), "missing {key}");
    }
    assert_eq!(d["params"]["P"], 4);
    assert_eq!(d["params"]["epsilon"], "1/280");
    let c = &d["certificates"][0];
    for key in ["x", "y", "class", "steps", "length", "maxStep", "pass"] {
        assert!(c.get(key).is_some(), "missing {key}");
    }

    let o = qmd(
        t.path(),
        &[
            "verify",
            "--decomp",
            "d.json",
            "--set",
            "full.json",
            "--pairs",
            "sample:200",
            "--seed",
            "42",
            "--out",
            "v.json",
        ],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(json(&t.path().join("v.json"))["passed"], true);
}

#[test]
fn verify_catches_a_moved_cell() {
    let t = tempfile::tempdir().unwrap();
    qmd(t.path(), &["gen", "--kind", "stripes", "--level", "6", "--k", "2", "--out", "s.json"]);
    let o = qmd(t.path(), &["decompose", "--set", "s.json", "--alpha", "0.1", "--delta", "0.4", "--out", "d.json"]);
    assert_eq!(code(&o), 0);
    let set: qmd_core::SetFile = serde_json::from_value(json(&t.path().join("s.json"))).unwrap();
    let e = set.decode().unwrap();
    let outside = (0..64).find(|&i| !e.contains(i)).unwrap();

    let mut d: qmd_core::decompose::Decomposition = serde_json::from_value(json(&t.path().join("d.json"))).unwrap();
    let mut f = d.pieces[0].decode().unwrap();
    let moved = f.iter().next().unwrap();
    f.remove(moved);
    f.insert(outside);
    d.pieces[0] = qmd_core::SetFile::encode(&f, qmd_core::gridset::Encoding::CellList);
    fs::write(t.path().join("bad.json"), serde_json::to_string(&d).unwrap()).unwrap();

    let o = qmd(
        t.path(),
        &["verify", "--decomp", "bad.json", "--set", "s.json", "--pairs", "exhaustive", "--out", "v.json"],
    );
    assert_eq!(code(&o), 2);
    let v = json(&t.path().join("v.json"));
    assert_eq!(v["passed"], false);
    assert_eq!(v["piecesInSet"], false);
    assert_eq!(v["coversSet"], false);
    let w: Vec<u64> = serde_json::from_value(v["witnesses"].clone()).unwrap();
    assert!(w.contains(&(outside as u64)) && w.contains(&(moved as u64)), "{w:?}");
}

#[test]
fn counterexample_csv_and_json() {
    let t = tempfile::tempdir().unwrap();
    let o = qmd(t.path(), &["counterexample", "--k", "1", "--level", "8", "--out", "cex.csv"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(t.path().join("cex.csv")).unwrap();
    let mut lines = text.lines().skip(1);
    assert_eq!(lines.next().unwrap(), "r_cells,r,max_density,max_density_f64,argmax_x_cells");
    assert_eq!(lines.count(), 129);

    let o = qmd(t.path(), &["counterexample", "--k", "2", "--out", "cex.json"]);
    assert_eq!(code(&o), 0);
    let v = json(&t.path().join("cex.json"));
    assert_eq!(v["level"], 6);
    assert_eq!(v["withinBound"], true);
    assert_eq!(v["dyadicHalf"], true);
}

#[test]
fn report_writes_three_tables() {
    let t = tempfile::tempdir().unwrap();
    qmd(t.path(), &["gen", "--kind", "cantor", "--dim", "2", "--level", "4", "--depth", "2", "--out", "s.json"]);
    let o = qmd(t.path(), &["report", "--set", "s.json", "--epsilon", "1/4", "--out-dir", "rep"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["carleson_cubes.csv", "carleson_balls.csv"] {
        let text = fs::read_to_string(t.path().join("rep").join(f)).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "level,filtered_sum,unfiltered_sum");
    }
    let z = fs::read_to_string(t.path().join("rep/zset.csv")).unwrap();
    assert_eq!(z.lines().nth(1).unwrap(), "n,measure,bound,within_bound");
    assert_eq!(z.lines().count(), 2 + 11);
    assert!(z.lines().skip(2).all(|l| l.ends_with("true")));
}

#[test]
fn replay_reproduces_bytes() {
    let t = tempfile::tempdir().unwrap();
    qmd(t.path(), &["--seed", "5", "gen", "--kind", "bernoulli", "--dim", "2", "--level", "4", "--out", "s.json"]);
    let o = qmd(
        t.path(),
        &["--threads", "1", "decompose", "--set", "s.json", "--alpha", "0.1", "--delta", "0.4", "--out", "d1.json"],
    );
    assert_eq!(code(&o), 0);
    let o = qmd(t.path(), &["replay", "--from", "d1.json", "--out", "d2.json", "--threads", "4"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(t.path().join("d1.json")).unwrap(), fs::read(t.path().join("d2.json")).unwrap());

    qmd(t.path(), &["report", "--set", "s.json", "--out-dir", "r1"]);
    let o = qmd(t.path(), &["replay", "--from", "r1/zset.csv", "--out-dir", "r2"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(t.path().join("r1/zset.csv")).unwrap(), fs::read(t.path().join("r2/zset.csv")).unwrap());

    fs::write(t.path().join("s.json"), "{}").unwrap();
    let o = qmd(t.path(), &["replay", "--from", "d1.json", "--out", "d3.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn errors_are_structured() {
    let t = tempfile::tempdir().unwrap();
    let o = qmd(t.path(), &["analyze", "--set", "missing.json", "--epsilon", "0.1"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stderr_error(&o)["error"]["kind"], "io");

    qmd(t.path(), &["gen", "--kind", "full", "--level", "4", "--out", "s.json"]);
    let o = qmd(t.path(), &["analyze", "--set", "s.json", "--epsilon", "3/2"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stderr_error(&o)["error"]["kind"], "domain");

    let o = qmd(t.path(), &["gen", "--kind", "full", "--dim", "3", "--level", "7"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stderr_error(&o)["error"]["kind"], "invalid_geometry");

    let o = qmd(t.path(), &["decompose", "--set", "s.json", "--alpha", "0.1"]);
    assert_eq!(code(&o), 1);
    let e = stderr_error(&o);
    assert_eq!(e["error"]["kind"], "usage");
    assert!(e["error"]["message"].as_str().unwrap().contains("--delta"));

    let o = qmd(t.path(), &["--help"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn threads_from_environment() {
    let t = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qmd"))
        .current_dir(t.path())
        .env("QMD_THREADS", "2")
        .args(["counterexample", "--k", "1"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!v["manifest"]["args"].as_array().unwrap().iter().any(|a| a == "--threads"));
}
