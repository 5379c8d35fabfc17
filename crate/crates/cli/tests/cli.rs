use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use approx::assert_abs_diff_eq;

const BIN: &str = env!("CARGO_BIN_EXE_aif");

fn aif(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("AIF_THREADS", "2")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = aif(args);
    assert!(
        out.status.success(),
        "aif {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    aif(args).status.code().unwrap()
}

struct Workdir(tempfile::TempDir);

impl Workdir {
    fn new() -> Self {
        Self(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> String {
        self.0.path().join(name).to_string_lossy().into_owned()
    }

    fn write(&self, name: &str, text: &str) -> String {
        fs::write(self.0.path().join(name), text).unwrap();
        self.path(name)
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.0.path().join(name)).unwrap()
    }
}

const IDENTITY_2D: &str = "trees = 50\nseed = 3\n[distribution]\nkind = \"gaussian\"\ncov = { identity = 2 }\n";

/// A small 2D data set and a model fitted on it.
fn fitted(w: &Workdir) -> (String, String) {
    let data = w.path("data.csv");
    ok(&["generate", "--n", "400", "--seed", "1", "--out", &data]);
    let config = w.write("run.toml", IDENTITY_2D);
    let model = w.path("model.json");
    ok(&["fit", "--config", &config, "--data", &data, "--out", &model]);
    (data, model)
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn generate_is_seeded() {
    let w = Workdir::new();
    ok(&["generate", "--n", "50", "--d", "3", "--seed", "8", "--out", &w.path("a.csv")]);
    ok(&["generate", "--n", "50", "--d", "3", "--seed", "8", "--out", &w.path("b.csv")]);
    ok(&["generate", "--n", "50", "--d", "3", "--seed", "9", "--out", &w.path("c.csv")]);
    assert_eq!(w.read("a.csv"), w.read("b.csv"));
    assert_ne!(w.read("a.csv"), w.read("c.csv"));
    assert!(w.read("a.csv").starts_with("x1,x2,x3\n"));
    assert_eq!(w.read("a.csv").lines().count(), 51);
    assert_eq!(code(&["generate", "--n", "0", "--out", &w.path("z.csv")]), 2);
}

#[test]
fn fit_prints_summary_and_validates() {
    let w = Workdir::new();
    let data = w.path("data.csv");
    ok(&["generate", "--n", "400", "--out", &data]);
    let config = w.write("run.toml", IDENTITY_2D);
    let summary = ok(&["fit", "--config", &config, "--data", &data, "--out", &w.path("m.json")]);
    assert!(summary.contains("height_limit=7"), "{summary}");
    assert!(summary.contains("EIF-equivalent"), "{summary}");

    let small = w.path("small.csv");
    ok(&["generate", "--n", "20", "--out", &small]);
    assert_eq!(code(&["fit", "--config", &config, "--data", &small, "--out", &w.path("x.json")]), 2);

    let bad = w.write(
        "bad.toml",
        "[distribution]\nkind = \"gaussian\"\ncov = [[1.0, 2.0], [2.0, 1.0]]\n",
    );
    assert_eq!(code(&["fit", "--config", &bad, "--data", &data, "--out", &w.path("x.json")]), 2);
    assert_eq!(
        code(&["fit", "--config", &w.path("missing.toml"), "--data", &data, "--out", &w.path("x.json")]),
        4
    );
}

#[test]
fn scores_round_trip_through_the_model_file() {
    let w = Workdir::new();
    let (data, model) = fitted(&w);
    let first = ok(&["score", "--model", &model, "--data", &data]);
    ok(&["score", "--model", &model, "--data", &data, "--out", &w.path("s.csv")]);
    assert_eq!(first, w.read("s.csv"));
    let table = rows(&first);
    assert_eq!(table.len(), 400);
    for r in &table {
        let s: f64 = r[2].parse().unwrap();
        assert!(s > 0.0 && s < 1.0);
    }

    let empty = w.write("empty.csv", "x1,x2\n");
    assert_eq!(code(&["score", "--model", &model, "--data", &empty]), 2);
    // columns are matched by name, so extra ones are ignored and missing ones rejected
    let wide = w.path("wide.csv");
    ok(&["generate", "--n", "10", "--d", "3", "--out", &wide]);
    assert_eq!(rows(&ok(&["score", "--model", &model, "--data", &wide])).len(), 10);
    let narrow = w.path("narrow.csv");
    ok(&["generate", "--n", "10", "--d", "1", "--out", &narrow]);
    assert_eq!(code(&["score", "--model", &model, "--data", &narrow]), 2);
}

#[test]
fn model_header_is_checked() {
    let w = Workdir::new();
    let (data, model) = fitted(&w);
    let text = fs::read_to_string(&model).unwrap();
    assert!(text.contains("\"format\":\"aif-model\""));
    let newer = w.write("newer.json", &text.replacen("\"version\":1", "\"version\":99", 1));
    let out = aif(&["score", "--model", &newer, "--data", &data]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
}

#[test]
fn geometric_commands_need_two_dimensions() {
    let w = Workdir::new();
    let (_, model) = fitted(&w);
    let grid = ok(&["map", "--model", &model, "--resolution", "4,3"]);
    assert_eq!(rows(&grid).len(), 12);
    let rays = ok(&["rays", "--model", &model, "--thetas", "8", "--samples", "5"]);
    assert_eq!(rows(&rays).len(), 8);
    let segments = ok(&["partitions", "--model", &model, "--tree", "2"]);
    assert!(!rows(&segments).is_empty());
    assert_eq!(code(&["partitions", "--model", &model, "--tree", "50"]), 2);

    let data3 = w.path("d3.csv");
    ok(&["generate", "--n", "300", "--d", "3", "--out", &data3]);
    let config = w.write(
        "run3.toml",
        "trees = 20\n[distribution]\nkind = \"gaussian\"\ncov = { identity = 3 }\n",
    );
    let model3 = w.path("m3.json");
    ok(&["fit", "--config", &config, "--data", &data3, "--out", &model3]);
    for cmd in ["map", "rays", "partitions"] {
        assert_eq!(code(&[cmd, "--model", &model3]), 2, "{cmd}");
    }
}

#[test]
fn sensitivity_profiles_and_regions() {
    let w = Workdir::new();
    let identity = w.write("i.toml", "[distribution]\nkind = \"gaussian\"\ncov = { identity = 2 }\n");
    for r in rows(&ok(&["sensitivity", "--config", &identity, "--thetas", "12"])) {
        assert_eq!(r[1], "1");
    }

    let mixture = w.write(
        "d1.toml",
        "[distribution]\nkind = \"mixture\"\ncomponents = [\n  { weight = 0.5, cov = { diag = [2.0, 0.02] } },\n  { weight = 0.5, cov = { diag = [0.02, 2.0] } },\n]\n",
    );
    let profile = rows(&ok(&["sensitivity", "--config", &mixture, "--thetas", "720"]));
    let max = profile
        .iter()
        .map(|r| r[1].parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert_abs_diff_eq!(max, 1.0, epsilon = 2e-2);

    let scaled = w.write("s.toml", "[distribution]\nkind = \"gaussian\"\ncov = { diag = [9.0, 1.0] }\n");
    let cap = rows(&ok(&[
        "sensitivity", "--config", &scaled, "--region", "cap", "--axis", "1,0", "--half-angle", "0.01",
        "--samples", "2000",
    ]));
    assert_abs_diff_eq!(cap[0][0].parse::<f64>().unwrap(), 3.0, epsilon = 1e-3);

    let normalized = rows(&ok(&["sensitivity", "--config", &scaled, "--thetas", "4", "--normalize"]));
    assert_eq!(normalized[0][1], "1");
    let out = aif(&["sensitivity", "--config", &mixture, "--thetas", "36", "--normalize"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("scale"));

    assert_eq!(code(&["sensitivity", "--config", &scaled, "--region", "cap"]), 2);
}

#[test]
fn comparing_a_model_with_itself_finds_nothing() {
    let w = Workdir::new();
    let (data, model) = fitted(&w);
    let table = rows(&ok(&["compare", "--model-a", &model, "--model-b", &model, "--data", &data]));
    assert_eq!(table.len(), 2);
    for r in table {
        assert_eq!(r[1], r[2]);
        assert_eq!(r[5].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn blob_experiment_writes_every_table() {
    let w = Workdir::new();
    let dir = w.path("out");
    fs::create_dir(&dir).unwrap();
    ok(&["experiment", "blob-mixtures", "--out-dir", &dir]);
    for name in ["blob", "grid_d1", "rays_d1", "partitions_d1", "grid_d2", "rays_d2", "partitions_d2"] {
        assert!(Path::new(&dir).join(format!("{name}.csv")).is_file(), "{name}");
    }
    let rays = w.read("out/rays_d2.csv");
    assert!(rays.starts_with("theta,mean_score,sensitivity\n"));
    assert_eq!(rays.lines().count(), 37);
    assert_eq!(code(&["experiment", "no-such-thing", "--out-dir", &dir]), 2);
}

#[test]
fn diabetes_experiment_checks_its_input() {
    let w = Workdir::new();
    let dir = w.path("out");
    fs::create_dir(&dir).unwrap();
    let wrong = w.write("wrong.csv", "a,b\n1,2\n");
    assert_eq!(code(&["experiment", "diabetes-a3", "--data", &wrong, "--out-dir", &dir]), 2);
    assert_eq!(code(&["experiment", "diabetes-a3", "--out-dir", &dir]), 2);
}

fn diabetes_csv() -> Option<PathBuf> {
    let p = std::env::var_os("AIF_DIABETES_CSV")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/diabetes.csv"));
    p.is_file().then_some(p)
}

#[test]
fn diabetes_experiment_table() {
    let Some(data) = diabetes_csv() else {
        eprintln!("skipping: Diabetes data not found");
        return;
    };
    let w = Workdir::new();
    let dir = w.path("out");
    fs::create_dir(&dir).unwrap();
    ok(&["experiment", "diabetes-a4", "--data", data.to_str().unwrap(), "--out-dir", &dir]);
    let table = w.read("out/diabetes-a4.csv");
    assert!(table.starts_with("feature,mean_aif,mean_eif,t,df,p\n"));
    assert_eq!(rows(&table).len(), 8);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["fit"]), 2);
    assert_eq!(code(&["--threads", "x", "generate", "--n", "3"]), 2);
}
