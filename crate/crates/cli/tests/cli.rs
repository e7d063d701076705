use std::path::Path;
use std::process::{Command, Output};

use osc_cli::plot::fit_line;
use osc_cli::run::run;
use osc_cli::{Overrides, Scenario, Status, Value};

const BIN: &str = env!("CARGO_BIN_EXE_osclab");

fn osclab(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

/// Quick: a few tasks of different kinds at the default resolution (the
/// affine check needs it; 128 nodes leaves 7.5e-8 against 1e-7).
const SMALL: &str = r#"
schema_version = 1
name = "small"

[model]
a = 1
[model.grid]
ns = 256

[models.p1xp1]
a = 0

[sections.rotation]
amp = 0.5

[potentials.shift]
shift = 0.5
base = 0.1

[specs.custom-oo]
bundle = [0, 0]
flag = { summand = 1 }
weights = [2, 0]

[[tasks]]
name = "stability"
kind = "stability"
specs = ["euler", "product-oo", "custom-oo"]
acceptance = true

[[tasks]]
name = "affine"
kind = "convexity"
section = "rotation"
steps = 4
expect = "affine"

[[tasks]]
name = "duality"
kind = "log-norm-duality"
potential = "shift"
steps = 8
"#;

#[test]
fn empty_task_list_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "empty.toml", "schema_version = 1\n");
    let out = dir.path().join("out");
    let o = osclab(&[&f, "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary, "task,kind,acceptance,status,quantity,value\n");
}

#[test]
fn shipped_slope_scenario_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let o = osclab(&["hirzebruch-slope", "-q", "-o", dir.path().to_str().unwrap(), "--plot", "euler-slope"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.contains("euler-slope,slope-limit,true,pass,W1,4/3"), "{summary}");
    assert!(summary.contains("euler-slope,slope-limit,true,pass,improves_under_refinement,true"));
    let svg = std::fs::read_to_string(dir.path().join("euler-slope.svg")).unwrap();
    roxmltree::Document::parse(&svg).unwrap();
}

#[test]
fn malformed_config_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.toml", "schema_version = 1\n[model]\na = = 2\n");
    let o = osclab(&[&f]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.toml:3:5"), "{}", stderr(&o));
    // unknown keys and wrong types are parse errors too
    let f = write(dir.path(), "typo.toml", "schema_version = 1\n\n[tolerances]\nslop = 0.1\n");
    let o = osclab(&[&f]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("typo.toml:4:1") && stderr(&o).contains("slop"), "{}", stderr(&o));
    let f = write(dir.path(), "type.toml", "schema_version = \"one\"\n");
    let o = osclab(&[&f]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("type.toml:1:18"), "{}", stderr(&o));
    let f = write(dir.path(), "kind.toml", "schema_version = 1\n[[tasks]]\nname = \"x\"\nkind = \"nope\"\n");
    let o = osclab(&[&f]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("kind.toml:4:8"), "{}", stderr(&o));
}

#[test]
fn validation_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("schema_version = 2\n", "schema_version 2"),
        ("[model]\na = 1\n", "missing field `schema_version`"),
        ("schema_version = 1\n[tolerances]\nslope = -1.0\n", "tolerance slope"),
        (
            "schema_version = 1\n[[tasks]]\nname = \"c\"\nkind = \"convexity\"\nsection = \"nope\"\n",
            "undefined section",
        ),
        ("schema_version = 1\n[[tasks]]\nname = \"c\"\nkind = \"convexity\"\n", "requires `section`"),
        ("schema_version = 1\n[[tasks]]\nname = \"s\"\nkind = \"slope-limit\"\nspec = \"nope\"\n", "undefined spec"),
        (
            "schema_version = 1\n[[tasks]]\nname = \"s\"\nkind = \"stability\"\nsteps = 3\n",
            "`steps` does not apply",
        ),
        (
            "schema_version = 1\n[[tasks]]\nname = \"a\"\nkind = \"stability\"\n[[tasks]]\nname = \"a\"\nkind = \"stability\"\n",
            "duplicate",
        ),
        ("schema_version = 1\n[model.grid]\nns = 2\n", "invalid grid"),
        (
            "schema_version = 1\n[specs.bad]\nbundle = [0, 0, 0]\nflag = { summand = 0 }\nweights = [1, 0]\n",
            "rank",
        ),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let f = write(dir.path(), &format!("v{i}.toml"), text);
        let o = osclab(&[&f]);
        // a missing schema_version is a parse error, the rest are validation errors
        let expect = if needle.contains("missing field") { 2 } else { 3 };
        assert_eq!(code(&o), expect, "case {i}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "case {i}: {}", stderr(&o));
    }
}

#[test]
fn failed_tasks_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // the bell section is not an automorphism: N is strictly convex, not affine
    let text = r#"
schema_version = 1
[model]
a = 1
[model.grid]
ns = 64
nt = 64
[sections.bell]
amp = 0.6
width = 4.0
[[tasks]]
name = "not-affine"
kind = "convexity"
section = "bell"
steps = 4
expect = "affine"
acceptance = true
[[tasks]]
name = "misaligned"
kind = "slope-limit"
spec = "euler"
"#;
    let f = write(dir.path(), "fail.toml", text);
    let out = dir.path().join("out");
    let o = osclab(&[&f, "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("not-affine,convexity,true,fail,affine,false"), "{summary}");
    assert!(summary.contains("misaligned,slope-limit,false,error,error,"), "{summary}");
    // the errored task still gets a CSV with a header
    assert_eq!(std::fs::read_to_string(out.join("misaligned.csv")).unwrap(), "error\n");
}

#[test]
fn csv_rationals_and_floats_round_trip() {
    let scenario = Scenario::load(SMALL, "small", &Overrides::default()).unwrap();
    let report = run(&scenario);
    assert!(report.passed(), "{}", report.render());
    let stability = &report.tasks[0];
    let csv = stability.table.to_csv();
    assert!(csv.starts_with("spec,product,W0,W1,"));
    assert!(csv.contains("euler,false,0/1,4/3,-2/3,-2/1,4/1,0/1,4/3,0/1,1/2,true"), "{csv}");
    assert!(csv.contains("custom-oo,true,0/1,0/1,"), "{csv}");
    // every float cell parses back to the identical value
    for task in &report.tasks {
        let csv = task.table.to_csv();
        for (line, row) in csv.lines().skip(1).zip(&task.table.rows) {
            for (cell, value) in line.split(',').zip(row) {
                if let Value::Float(x) = value {
                    let back: f64 = cell.parse().unwrap();
                    assert_eq!(back.to_bits(), x.to_bits(), "{cell}");
                }
            }
        }
    }
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "small.toml", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = osclab(&[&f, "-q", "-o", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for n in names {
        assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn plots_are_valid_and_annotated() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "small.toml", SMALL);
    let o = osclab(&[&f, "-q", "-o", dir.path().to_str().unwrap(), "--plot"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    // stability has no series, the other two do
    assert!(!dir.path().join("stability.svg").exists());
    let svg = std::fs::read_to_string(dir.path().join("affine.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    // N is affine along an automorphism flow: the plotted fit matches a refit
    // of the reported values
    let scenario = Scenario::load(SMALL, "small", &Overrides::default()).unwrap();
    let report = run(&scenario);
    let series = report.tasks[1].series.as_ref().unwrap();
    let (slope, _) = fit_line(&series.points);
    let note = doc.descendants().filter_map(|n| n.text()).find(|t| t.starts_with("fitted slope = ")).unwrap();
    let shown: f64 = note.trim_start_matches("fitted slope = ").parse().unwrap();
    assert_eq!(shown, slope);
    let o = osclab(&[&f, "-q", "-o", dir.path().to_str().unwrap(), "--plot", "stability"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no series"), "{}", stderr(&o));
}

#[test]
fn constant_series_plot_flat() {
    let dir = tempfile::tempdir().unwrap();
    let o = osclab(&["hirzebruch-slope", "-q", "-o", dir.path().to_str().unwrap(), "--plot", "product-oo-slope"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("product-oo-slope.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let line = doc.descendants().find(|n| n.has_tag_name("polyline")).unwrap();
    let ys: Vec<&str> = line.attribute("points").unwrap().split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
    assert!(ys.windows(2).all(|w| w[0] == w[1]), "{ys:?}");
}

#[test]
fn listing_includes_shipped_and_custom() {
    let o = osclab(&["--list"]);
    assert_eq!(code(&o), 0);
    let names = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = names.lines().collect();
    assert!(names.contains(&"hirzebruch-slope") && names.contains(&"convexity-suite"));
    let empty = tempfile::tempdir().unwrap();
    let o = osclab(&["--list", "--scenario-dir", empty.path().to_str().unwrap()]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().collect::<Vec<_>>(), names);
    write(empty.path(), "mine.toml", "schema_version = 1\n");
    let o = osclab(&["--list", "--scenario-dir", empty.path().to_str().unwrap()]);
    assert!(String::from_utf8(o.stdout).unwrap().lines().any(|l| l == "mine"));
    let out = empty.path().join("out");
    let o = osclab(&["mine", "--scenario-dir", empty.path().to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&osclab(&["no-such-scenario"])), 3);
}

#[test]
fn overrides_apply_and_are_validated() {
    let mut o = Overrides::default();
    o.add_grid("nodes=32,order=6").unwrap();
    o.add_tolerances("slope=0.1").unwrap();
    let s = Scenario::load(SMALL, "small", &o).unwrap();
    assert_eq!((s.model.grid.ns, s.model.grid.nt, s.model.grid.order), (32, 32, 6));
    assert_eq!(s.models["p1xp1"].grid.ns, 32);
    assert_eq!(s.tolerances.slope, 0.1);
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "small.toml", SMALL);
    assert_eq!(code(&osclab(&[&f, "--tol", "nope=1"])), 3);
    assert_eq!(code(&osclab(&[&f, "--tol", "slope"])), 3);
    assert_eq!(code(&osclab(&[&f, "--grid", "ns=1.5"])), 3);
    // a tightened tolerance turns a pass into a task failure
    let out = dir.path().join("out");
    let o = osclab(&[&f, "-q", "-o", out.to_str().unwrap(), "--tol", "duality=1e-300"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn statuses_follow_checks() {
    let s = Scenario::load(SMALL, "small", &Overrides::default()).unwrap();
    let report = run(&s);
    assert!(report.tasks.iter().all(|t| t.status == Status::Pass));
    assert_eq!(report.tasks[0].value("consistent"), Some(&Value::Int(3)));
    assert_eq!(report.exit_code(), 0);
}
