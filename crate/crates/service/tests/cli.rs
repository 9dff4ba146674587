use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cct_core::ingest::read;
use cct_core::prune::{visible, ViewState};
use cct_core::{resolve_path, NodeId};
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn cct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cct")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn view_matches_golden_output() {
    let fixture = data("fixture30.folded");
    let o = cct(&["view", "--no-color", fixture.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let golden = std::fs::read_to_string(data("fixture30.view.txt")).unwrap();
    assert_eq!(stdout(&o), golden);
    let again = cct(&["view", "--no-color", fixture.to_str().unwrap()]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn view_small_trees() {
    let dir = tempfile::tempdir().unwrap();
    let one = write(dir.path(), "one.folded", "a 1\n");
    assert_eq!(stdout(&cct(&["view", "--no-color", &one])), "1.000 a\n");
    let two = write(dir.path(), "two.folded", "root;x 1\nroot;y 2\n");
    assert_eq!(
        stdout(&cct(&["view", "--no-color", &two])),
        "3.000 root\n├ 1.000 x\n└ 2.000 y\n"
    );
    let exclusive = cct(&["view", "--no-color", "--metric", "time", &two]);
    assert_eq!(stdout(&exclusive), "0.000 root\n├ 1.000 x\n└ 2.000 y\n");
}

#[test]
fn view_colors_unless_disabled() {
    let fixture = data("fixture30.folded");
    let o = cct(&["view", fixture.to_str().unwrap()]);
    let text = stdout(&o);
    assert!(text.contains("\x1b[38;5;"));
    let stripped: String = text
        .split("\x1b[")
        .enumerate()
        .fold(String::new(), |mut acc, (i, part)| {
            acc.push_str(if i == 0 {
                part
            } else {
                &part[part.find('m').unwrap() + 1..]
            });
            acc
        });
    assert_eq!(stripped, std::fs::read_to_string(data("fixture30.view.txt")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.folded", "a;b notanumber\n");
    let o = cct(&["view", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1"));

    let fixture = data("fixture30.folded");
    let o = cct(&["view", "--metric", "bogus", fixture.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());

    let o = cct(&["view", "/no/such/file.folded"]);
    assert_eq!(o.status.code(), Some(3));

    let o = cct(&["--json-errors", "query", "--check", "*/[\"time\" >"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(v["version"], 1);
    assert_eq!(v["error"]["kind"], "SyntaxError");
    assert!(v["error"]["position"].is_u64());

    let o = cct(&["query", "--check", "*/[\"time\" > 1]"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "ok\n");

    assert_eq!(cct(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cct(&["--help"]).status.code(), Some(0));
}

#[test]
fn speedup_of_a_file_with_itself_is_one() {
    let fixture = data("fixture30.folded");
    let f = fixture.to_str().unwrap();
    let o = cct(&["speedup", f, f, "--metric", "time"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gf = read(&stdout(&o), None).unwrap();
    let time = gf.column("time").unwrap();
    let ratio = gf.column("speedup").unwrap();
    assert_eq!(gf.len(), 30);
    for id in gf.node_ids() {
        if time[id.index()] > 0.0 {
            assert_eq!(ratio[id.index()], 1.0);
        }
    }
}

#[test]
fn speedup_warns_on_zero_denominators() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.folded", "m;x 2\nm;y 4\n");
    let b = write(dir.path(), "b.folded", "m;x 1\nm;y 0\n");
    let out = dir.path().join("s.json");
    let o = cct(&[
        "speedup",
        &a,
        &b,
        "--metric",
        "time",
        "-o",
        out.to_str().unwrap(),
        "--clamp",
        "50",
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("m/y"));
    let gf = read(&std::fs::read_to_string(&out).unwrap(), None).unwrap();
    let at = |p: &str| gf.metric(resolve_path(&gf, p).unwrap(), "speedup").unwrap();
    assert_eq!(at("m/x"), 2.0);
    assert_eq!(at("m/y"), 50.0);
}

#[test]
fn derive_variants() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.folded", "m;x 1\nm;y 3\n");
    let g = write(dir.path(), "g.folded", "m;x 3\nm;y 3\n");
    let o = cct(&["derive", &f, "--name", "pct", "--percent", "time"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gf = read(&stdout(&o), None).unwrap();
    assert_eq!(gf.metric(resolve_path(&gf, "m/y").unwrap(), "pct").unwrap(), 75.0);

    let o = cct(&[
        "derive",
        &f,
        "--name",
        "sum",
        "--op",
        "add",
        "--lhs",
        "time",
        "--rhs",
        "time (inc)",
    ]);
    let gf = read(&stdout(&o), None).unwrap();
    assert_eq!(gf.metric(resolve_path(&gf, "m").unwrap(), "sum").unwrap(), 4.0);

    let o = cct(&[
        "derive",
        &f,
        "--name",
        "var",
        "--imbalance-with",
        &g,
        "--metric",
        "time",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gf = read(&stdout(&o), None).unwrap();
    assert_eq!(gf.metric(resolve_path(&gf, "m/x").unwrap(), "var").unwrap(), 1.0);
    assert_eq!(gf.metric(resolve_path(&gf, "m/y").unwrap(), "var").unwrap(), 0.0);

    let o = cct(&["derive", &f, "--name", "time", "--percent", "time"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cct(&["derive", &f, "--name", "time", "--percent", "time", "--overwrite"]);
    assert!(o.status.success());
    let o = cct(&["derive", &f, "--name", "z"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn folded_output_round_trips() {
    let fixture = data("fixture30.folded");
    let o = cct(&[
        "query",
        "--apply",
        "*",
        fixture.to_str().unwrap(),
        "--out-format",
        "folded",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let original = read(&std::fs::read_to_string(&fixture).unwrap(), None).unwrap();
    let again = read(&stdout(&o), None).unwrap();
    assert_eq!(again.len(), original.len());
}

#[test]
fn export_on_a_fresh_view_selects_everything_shown() {
    let fixture = data("fixture30.folded");
    let f = fixture.to_str().unwrap();
    let q = stdout(&cct(&["query", "--export", f]));
    let o = cct(&["query", "--apply", q.trim(), f]);
    assert!(o.status.success(), "{}", stderr(&o));
    let applied = read(&stdout(&o), None).unwrap();
    let gf = read(&std::fs::read_to_string(&fixture).unwrap(), None).unwrap();
    let shown = visible(&gf, &ViewState::new(&gf).unwrap()).unwrap();
    assert_eq!(applied.len(), shown.len());
}

/// Load, prune by range, export, apply to a fresh load, view again.
#[test]
fn end_to_end_range_prune_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = data("fixture30.folded");
    let f = fixture.to_str().unwrap();
    let o = cct(&[
        "query",
        "--export",
        f,
        "--range",
        "2",
        "100",
        "--collapse",
        "main/solve/convergence",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let q = stdout(&o);
    let pruned = dir.path().join("pruned.json");
    let o = cct(&["query", "--apply", q.trim(), f, "-o", pruned.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));

    let gf = read(&std::fs::read_to_string(&fixture).unwrap(), None).unwrap();
    let mut vs = cct_core::prune::mass_prune(&gf, &ViewState::new(&gf).unwrap(), 2.0, 100.0).unwrap();
    vs = cct_core::prune::toggle_collapse(&gf, &vs, resolve_path(&gf, "main/solve/convergence").unwrap()).unwrap();
    let expected: Vec<NodeId> = visible(&gf, &vs).unwrap().into_iter().collect();
    let applied = read(&std::fs::read_to_string(&pruned).unwrap(), None).unwrap();
    let names = |g: &cct_core::GraphFrame, ids: Vec<NodeId>| -> Vec<Vec<String>> {
        ids.into_iter()
            .map(|id| g.name_path(id).unwrap().into_iter().map(String::from).collect())
            .collect()
    };
    let mut want = names(&gf, expected);
    let mut got = names(&applied, applied.preorder());
    want.sort();
    got.sort();
    assert_eq!(got, want);

    let view = stdout(&cct(&["view", "--no-color", pruned.to_str().unwrap()]));
    assert_eq!(view.lines().count(), want.len());
    assert!(view.contains("convergence"));
    assert!(!view.contains("MPI_Allreduce"));
}

#[test]
fn view_with_saved_view_state() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{"version":1,"primary":"time (inc)","secondary":"time","colorMap":"diverging","inverted":false,"collapsed":["main/solve"],"range":null}"#;
    let vs = write(dir.path(), "vs.json", doc);
    let fixture = data("fixture30.folded");
    let o = cct(&["view", "--no-color", "--viewstate", &vs, fixture.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("89.000 solve [+13]"), "{text}");
    assert!(!text.contains("sweep"));
    assert!(text.contains("0.000 write_silo [pruned 1]"), "{text}");
}
