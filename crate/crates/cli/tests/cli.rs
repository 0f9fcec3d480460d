use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;
use tempfile::TempDir;
use whitex_core::tensor_io::{read_embeddings, write_embeddings, TensorFormat};
use whitex_core::{DMatrix, EmbeddingMatrix};

fn whitex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_whitex"))
        .args(args)
        .output()
        .unwrap()
}

fn ok_summary(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(stdout.lines().count(), 1, "{stdout}");
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["status"], "ok");
    v
}

fn error_summary(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    fn embeddings(&self, name: &str, n: usize, d: usize, seed: u64) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mix = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                2.0
            } else {
                rng.random_range(-0.3..0.3)
            }
        });
        let z = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = EmbeddingMatrix::new(z * mix).unwrap();
        let path = self.path(name);
        write_embeddings(&x, &path, TensorFormat::from_path(&path).unwrap()).unwrap();
        self.s(name)
    }

    fn text(&self, name: &str, content: &str) -> String {
        std::fs::write(self.path(name), content).unwrap();
        self.s(name)
    }
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn fit_whiten_unwhiten_round_trip() {
    let f = Fixture::new();
    let x = f.embeddings("x.npy", 600, 12, 1);
    let fit = ok_summary(&whitex(&["fit", "--input", &x, "--output", &f.s("m.zip")]));
    assert_eq!(fit["command"], "fit");
    assert_eq!(fit["dim"], 12);
    assert_eq!(fit["dropped_features"], 0);

    ok_summary(&whitex(&[
        "whiten",
        "--model",
        &f.s("m.zip"),
        "--input",
        &x,
        "--output",
        &f.s("y.npy"),
    ]));
    ok_summary(&whitex(&[
        "unwhiten",
        "--model",
        &f.s("m.zip"),
        "--input",
        &f.s("y.npy"),
        "--output",
        &f.s("x2.csv"),
    ]));

    let a = read_embeddings(&f.path("x.npy"), TensorFormat::Npy).unwrap();
    let b = read_embeddings(&f.path("x2.csv"), TensorFormat::Csv).unwrap();
    let err = (a.as_matrix() - b.as_matrix()).amax();
    assert!(err < 1e-9, "{err}");

    // whitened fit set has identity covariance
    let diag = ok_summary(&whitex(&["diagscore", "--input", &f.s("y.npy")]));
    assert!(diag["diagonal_score"].as_f64().unwrap() > 0.999);
}

#[test]
fn loglik_table() {
    let f = Fixture::new();
    let x = f.embeddings("x.npy", 300, 8, 2);
    ok_summary(&whitex(&["fit", "--input", &x, "--output", &f.s("m.zip")]));
    let out = f.path("scores.csv");
    let s = ok_summary(&whitex(&[
        "loglik",
        "--model",
        &f.s("m.zip"),
        "--input",
        &x,
        "--output",
        &f.s("scores.csv"),
    ]));
    assert_eq!(s["n_samples"], 300);
    let rows = csv_rows(&out);
    assert_eq!(rows[0], ["index", "norm", "loglik"]);
    assert_eq!(rows.len(), 301);
    let norm: f64 = rows[5][1].parse().unwrap();
    let l: f64 = rows[5][2].parse().unwrap();
    let expected = -0.5 * (8.0 * (2.0 * std::f64::consts::PI).ln() + norm * norm);
    assert!((l - expected).abs() < 1e-12);

    let json = f.path("scores.json");
    ok_summary(&whitex(&[
        "loglik",
        "--model",
        &f.s("m.zip"),
        "--input",
        &x,
        "--output",
        &f.s("scores.json"),
    ]));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 300);
    assert_eq!(v[4]["norm"].as_f64().unwrap(), norm);
}

#[test]
fn slerp_circle_outputs() {
    let f = Fixture::new();
    let e = f.text("e.csv", "1,0,0\n0,2,0\n");
    let s = ok_summary(&whitex(&[
        "slerp-circle",
        "--input",
        &e,
        "--step-deg",
        "20",
        "--output",
        &f.s("path.npy"),
    ]));
    assert_eq!(s["n_points"], 18);
    assert!((s["theta_deg"].as_f64().unwrap() - 90.0).abs() < 1e-12);
    let points = read_embeddings(&f.path("path.npy"), TensorFormat::Npy).unwrap();
    assert_eq!((points.n_samples(), points.dim()), (18, 3));
    assert!((points.row_vec(9)[0] + 1.0).abs() < 1e-15);
    let degrees = csv_rows(&f.path("path.degrees.csv"));
    assert_eq!(degrees[0], ["index", "degree"]);
    assert_eq!(degrees[10], ["9", "180"]);
}

#[test]
fn slerp_and_opposite_and_normalize() {
    let f = Fixture::new();
    let e = f.text("e.csv", "1,0\n0,1\n");
    ok_summary(&whitex(&[
        "slerp",
        "--input",
        &e,
        "--t",
        "0,0.5,-1",
        "--output",
        &f.s("s.csv"),
    ]));
    let s = read_embeddings(&f.path("s.csv"), TensorFormat::Csv).unwrap();
    assert_eq!(s.n_samples(), 3);
    assert!((s.row_vec(1)[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    assert!((s.row_vec(2)[1] + 1.0).abs() < 1e-15);

    ok_summary(&whitex(&[
        "opposite",
        "--input",
        &e,
        "--output",
        &f.s("o.csv"),
    ]));
    let o = read_embeddings(&f.path("o.csv"), TensorFormat::Csv).unwrap();
    assert_eq!(o.row_vec(0), vec![-1.0, -0.0]);

    let v = f.text("v.csv", "3,4\n");
    ok_summary(&whitex(&[
        "normalize",
        "--input",
        &v,
        "--output",
        &f.s("n.csv"),
    ]));
    let n = read_embeddings(&f.path("n.csv"), TensorFormat::Csv).unwrap();
    assert!((n.row_norms()[0] - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn statistics_commands() {
    let f = Fixture::new();
    let x = f.embeddings("x.npy", 1000, 6, 3);
    ok_summary(&whitex(&["fit", "--input", &x, "--output", &f.s("m.zip")]));

    let nt = ok_summary(&whitex(&[
        "normtest",
        "--model",
        &f.s("m.zip"),
        "--input",
        &x,
        "--output",
        &f.s("nt.csv"),
    ]));
    assert_eq!(nt["n_groups"], 4);
    assert_eq!(
        csv_rows(&f.path("nt.csv"))[0],
        ["feature", "ad_stat", "dp_stat", "dp_pvalue"]
    );
    assert!(nt["pct_normal_ad"].as_f64().unwrap() >= 50.0);

    let chi = ok_summary(&whitex(&[
        "chisummary",
        "--model",
        &f.s("m.zip"),
        "--input",
        &x,
    ]));
    assert_eq!(chi["dim"], 6);
    assert!(chi["relative_deviation_mean"].as_f64().unwrap() < 0.05);

    let cs = ok_summary(&whitex(&[
        "cosinestats",
        "--input",
        &x,
        "--max-pairs",
        "1000",
        "--bins",
        "20",
        "--output",
        &f.s("c.json"),
    ]));
    assert_eq!(cs["n_pairs"], 1000);
    assert_eq!(cs["sampled"], true);
    let hist: Value =
        serde_json::from_str(&std::fs::read_to_string(f.path("c.json")).unwrap()).unwrap();
    assert_eq!(hist.as_array().unwrap().len(), 20);
    assert_eq!(hist[0]["bin_lo"], -1.0);

    let again = ok_summary(&whitex(&[
        "cosinestats",
        "--input",
        &x,
        "--max-pairs",
        "1000",
        "--bins",
        "20",
    ]));
    assert_eq!(again["mean"], cs["mean"]);
}

#[test]
fn score_commands() {
    let f = Fixture::new();
    let pos = f.text("pos.csv", "id,score\n0,3\n1,4\n2,2\n");
    let neg = f.text("neg.csv", "id,score\n0,1\n1,2\n");
    let r = ok_summary(&whitex(&[
        "auc",
        "--positives",
        &pos,
        "--negatives",
        &neg,
        "--column",
        "score",
    ]));
    assert!((r["auc"].as_f64().unwrap() - 5.5 / 6.0).abs() < 1e-15);

    let a = f.text("a.csv", "1\n2\n3\n");
    let b = f.text("b.csv", "1\n2\n4\n");
    let c = ok_summary(&whitex(&["corr", "--input", &a, "--other", &b]));
    assert!((c["pearson_r"].as_f64().unwrap() - 0.981_980_506_061_965_7).abs() < 1e-12);

    let h = ok_summary(&whitex(&[
        "hist",
        "--input",
        &a,
        "--bins",
        "2",
        "--output",
        &f.s("h.csv"),
    ]));
    assert_eq!(h["n_counted"], 3);
    let rows = csv_rows(&f.path("h.csv"));
    assert_eq!(rows[0], ["bin_lo", "bin_hi", "count"]);
    assert_eq!(rows[2], ["2", "3", "2"]);
}

#[test]
fn auc_on_embeddings_with_model() {
    let f = Fixture::new();
    let x = f.embeddings("x.npy", 500, 4, 4);
    ok_summary(&whitex(&["fit", "--input", &x, "--output", &f.s("m.zip")]));
    // far-away points have lower likelihood than the fit data
    let far = f.text("far.csv", "50,50,50,50\n-40,60,0,30\n");
    let r = ok_summary(&whitex(&[
        "auc",
        "--model",
        &f.s("m.zip"),
        "--positives",
        &x,
        "--negatives",
        &far,
    ]));
    assert_eq!(r["auc"], 1.0);
}

#[test]
fn image_metrics_command() {
    let f = Fixture::new();
    let dir = f.path("imgs");
    std::fs::create_dir(&dir).unwrap();
    for (name, value) in [("a.png", 0u8), ("b.png", 128u8)] {
        let file = std::fs::File::create(dir.join(name)).unwrap();
        let mut enc = png::Encoder::new(std::io::BufWriter::new(file), 4, 4);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.write_header()
            .unwrap()
            .write_image_data(&[value; 48])
            .unwrap();
    }
    let s = ok_summary(&whitex(&[
        "imgmetrics",
        "--input",
        &dir.display().to_string(),
        "--output",
        &f.s("m.csv"),
    ]));
    assert_eq!(s["n_images"], 2);
    assert_eq!(s["mean_saturation_pct"], 50.0);
    assert_eq!(s["mean_entropy_bits"], 0.0);
    let rows = csv_rows(&f.path("m.csv"));
    assert_eq!(
        rows[0],
        ["file", "total_variation", "entropy_bits", "saturation_pct"]
    );
    assert!(rows[1][0].ends_with("a.png"));
}

#[test]
fn errors_are_structured_and_leave_no_output() {
    let f = Fixture::new();
    let e = error_summary(&whitex(&[
        "fit",
        "--input",
        &f.s("missing.npy"),
        "--output",
        &f.s("m.zip"),
    ]));
    assert_eq!(e["status"], "error");
    assert_eq!(e["kind"], "io");
    assert_eq!(e["command"], "fit");
    assert!(!f.path("m.zip").exists());

    let e = error_summary(&whitex(&["whiten", "--input", &f.s("x.npy")]));
    assert_eq!(e["kind"], "validation");

    let bad = f.text("bad.csv", "1,2\n3,oops\n");
    let e = error_summary(&whitex(&["hist", "--input", &bad]));
    assert_eq!(e["kind"], "parse");

    let e = error_summary(&whitex(&["fit", "--input", &bad, "--tau", "1.5"]));
    assert_eq!(e["kind"], "validation");

    let collinear = f.text("c.csv", "1,2\n2,4\n");
    let e = error_summary(&whitex(&[
        "slerp-circle",
        "--input",
        &collinear,
        "--output",
        &f.s("p.npy"),
    ]));
    assert_eq!(e["kind"], "geometry");
    assert!(!f.path("p.npy").exists());
    assert!(!f.path("p.degrees.csv").exists());

    let leftovers: Vec<_> = std::fs::read_dir(f.dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".whitex-"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn thread_cap_is_validated() {
    let f = Fixture::new();
    let a = f.text("a.csv", "1\n2\n3\n");
    let out = Command::new(env!("CARGO_BIN_EXE_whitex"))
        .args(["hist", "--input", &a])
        .env("WHITEX_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(error_summary(&out)["kind"], "validation");

    let out = Command::new(env!("CARGO_BIN_EXE_whitex"))
        .args(["hist", "--input", &a])
        .env("WHITEX_THREADS", "2")
        .output()
        .unwrap();
    ok_summary(&out);
}

#[test]
fn fit_is_deterministic_across_thread_counts() {
    let f = Fixture::new();
    let x = f.embeddings("x.npy", 800, 10, 5);
    for (threads, out) in [("1", "a.zip"), ("4", "b.zip")] {
        let o = Command::new(env!("CARGO_BIN_EXE_whitex"))
            .args(["fit", "--seed", "3", "--input", &x, "--output", &f.s(out)])
            .env("WHITEX_THREADS", threads)
            .output()
            .unwrap();
        ok_summary(&o);
    }
    assert_eq!(
        std::fs::read(f.path("a.zip")).unwrap(),
        std::fs::read(f.path("b.zip")).unwrap()
    );
}
