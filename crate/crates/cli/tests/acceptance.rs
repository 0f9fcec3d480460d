//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use whitex_core::geometry::{full_circle_slerp, opposite_embedding, slerp};
use whitex_core::image_metrics::{entropy, saturation_pct, total_variation};
use whitex_core::likelihood::{chi_log_pdf, chi_mean_std, log_likelihood, norm_from_loglik};
use whitex_core::stats::{
    anderson_darling, auc, dagostino_pearson, diagonal_score, normality_battery, AD_THRESHOLD,
};
use whitex_core::tensor_io::{write_embeddings, TensorFormat};
use whitex_core::whitening::{
    compute_covariance, compute_mean_and_center, fit_whitening, unwhiten, whiten,
};
use whitex_core::{DMatrix, EmbeddingMatrix, FitOptions, ImageTensor};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gaussian_matrix(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

fn gaussian(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn max_abs_identity_error(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - target).abs());
        }
    }
    worst
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn correlated_data(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mixing = gaussian_matrix(d, d, &mut rng);
    let shift = DMatrix::from_fn(1, d, |_, j| j as f64 * 0.5 - 3.0);
    let z = gaussian_matrix(n, d, &mut rng);
    let mut x = z * mixing;
    for mut row in x.row_iter_mut() {
        row += &shift;
    }
    EmbeddingMatrix::new(x).unwrap()
}

fn whitening_correctness() -> Outcome {
    let x = correlated_data(4096, 64, 1);
    let start = Instant::now();
    let model = fit_whitening(
        &x,
        &FitOptions {
            created_utc: Some(String::new()),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let y = whiten(&model, &x).map_err(|e| e.to_string())?;
    let (_, centered) = compute_mean_and_center(&y).unwrap();
    let cov = compute_covariance(&centered).sigma;
    let err = max_abs_identity_error(&cov);
    let diag = diagonal_score(&cov).unwrap();
    check(
        err <= 1e-8 && diag >= 0.99 && elapsed < 5.0,
        format!("max|cov - I| = {err:.2e}, diagonal score = {diag:.6}, fit {elapsed:.2}s"),
    )
}

fn invertibility() -> Outcome {
    let model = fit_whitening(
        &correlated_data(4096, 64, 2),
        &FitOptions {
            created_utc: Some(String::new()),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = EmbeddingMatrix::new(gaussian_matrix(1000, 64, &mut rng) * 10.0).unwrap();
    let back = unwhiten(&model, &whiten(&model, &x).unwrap()).unwrap();
    let mut worst_ratio = 0.0f64;
    for i in 0..x.n_samples() {
        let (a, b) = (x.row_vec(i), back.row_vec(i));
        let scale = 1.0 + a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst_ratio = worst_ratio.max(max_diff(&a, &b) / scale);
    }
    check(
        worst_ratio <= 1e-6,
        format!("max err / (1 + max|x|) = {worst_ratio:.2e} over 1000 vectors"),
    )
}

fn likelihood_identities() -> Outcome {
    let mut worst_peak = 0.0f64;
    for d in [1usize, 768] {
        let expected = -(d as f64) / 2.0 * (2.0 * std::f64::consts::PI).ln();
        let got = log_likelihood(&vec![0.0; d]).unwrap().log_likelihood;
        worst_peak = worst_peak.max((got - expected).abs());
    }
    // random directions with norms in [0.5, 50]; ℓ cannot resolve much
    // smaller norms in double precision
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_inv = 0.0f64;
    for d in [1usize, 2, 16, 768] {
        for _ in 0..1000 {
            let dir = gaussian(d, &mut rng);
            let r: f64 = rng.random_range(0.5..50.0);
            let n0 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let y: Vec<f64> = dir.iter().map(|v| v * r / n0).collect();
            let s = log_likelihood(&y).unwrap();
            let back = norm_from_loglik(s.log_likelihood, d).unwrap();
            worst_inv = worst_inv.max((back - s.norm).abs());
        }
    }
    check(
        worst_peak <= 1e-12 && worst_inv <= 1e-12,
        format!("peak err = {worst_peak:.2e}, inversion err = {worst_inv:.2e}"),
    )
}

fn chi_model() -> Outcome {
    let mut worst_identity = 0.0f64;
    for d in 1..=2048usize {
        let (m, s) = chi_mean_std(d).unwrap();
        worst_identity = worst_identity.max(((m * m + s * s) - d as f64).abs() / d as f64);
    }
    let (mean768, _) = chi_mean_std(768).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 100_000;
    let mut total = 0.0;
    for _ in 0..draws {
        total += (0..768)
            .map(|_| rng.sample::<f64, _>(StandardNormal).powi(2))
            .sum::<f64>()
            .sqrt();
    }
    let empirical = total / draws as f64;
    let rel = (empirical - mean768).abs() / mean768;
    check(
        worst_identity <= 1e-9 && (mean768 - 27.70).abs() <= 0.01 && rel <= 0.005,
        format!(
            "identity rel err = {worst_identity:.2e}, mean(768) = {mean768:.4}, Monte Carlo mean = {empirical:.4} ({:.3}%)",
            100.0 * rel
        ),
    )
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn chi_density() -> Outcome {
    let mut worst_norm = 0.0f64;
    for d in [1usize, 2, 10] {
        // the density at s = 0 is its limit: √(2/π) for d = 1, zero otherwise
        let pdf = |s: f64| match (s == 0.0, d) {
            (true, 1) => (2.0 / std::f64::consts::PI).sqrt(),
            (true, _) => 0.0,
            (false, _) => chi_log_pdf(s, d).unwrap().exp(),
        };
        let total = simpson(pdf, 0.0, 40.0, 400_000);
        worst_norm = worst_norm.max((total - 1.0).abs());
    }
    let mut worst_rayleigh = 0.0f64;
    for k in 1..=1000 {
        let s = k as f64 * 0.01;
        worst_rayleigh =
            worst_rayleigh.max((chi_log_pdf(s, 2).unwrap() - (s.ln() - 0.5 * s * s)).abs());
    }
    check(
        worst_norm <= 1e-6 && worst_rayleigh <= 1e-12,
        format!("|∫p - 1| = {worst_norm:.2e}, Rayleigh err = {worst_rayleigh:.2e}"),
    )
}

fn normality_battery_criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let normal = EmbeddingMatrix::new(gaussian_matrix(5000, 768, &mut rng)).unwrap();
    let start = Instant::now();
    let report = normality_battery(&normal, 250).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();

    let uniform =
        EmbeddingMatrix::new(DMatrix::from_fn(5000, 64, |_, _| rng.random::<f64>())).unwrap();
    let uniform_report = normality_battery(&uniform, 250).unwrap();

    let mut worst_affine = 0.0f64;
    for _ in 0..50 {
        let x = gaussian(250, &mut rng);
        let (a, b) = (
            rng.random_range(0.01..100.0),
            rng.random_range(-1000.0..1000.0),
        );
        let t: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        worst_affine = worst_affine
            .max((anderson_darling(&x).unwrap() - anderson_darling(&t).unwrap()).abs())
            .max((dagostino_pearson(&x).unwrap().k2 - dagostino_pearson(&t).unwrap().k2).abs());
    }
    check(
        report.pct_normal_ad >= 90.0
            && report.pct_normal_dp >= 90.0
            && uniform_report.pct_normal_ad <= 20.0
            && worst_affine <= 1e-9
            && elapsed < 10.0,
        format!(
            "normal: AD {:.1}% DP {:.1}% pass; uniform AD {:.1}% pass (A² threshold {AD_THRESHOLD}); affine err {worst_affine:.1e}; 5000x768 in {elapsed:.2}s",
            report.pct_normal_ad, report.pct_normal_dp, uniform_report.pct_normal_ad
        ),
    )
}

fn brute_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut s = 0.0;
    for p in pos {
        for n in neg {
            s += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    s / (pos.len() * neg.len()) as f64
}

fn auc_criterion() -> Outcome {
    // every labelled multiset over a 4-letter alphabet with at most 6 scores
    let levels = [0.0, 1.0, 2.0, 3.0];
    let (mut cases, mut worst, mut worst_sym) = (0usize, 0.0f64, 0.0f64);
    for total in 2..=6usize {
        for np in 1..total {
            for code in 0..4usize.pow(total as u32) {
                let mut c = code;
                let values: Vec<f64> = (0..total)
                    .map(|_| {
                        let v = levels[c % 4];
                        c /= 4;
                        v
                    })
                    .collect();
                let (p, n) = values.split_at(np);
                let ab = auc(p, n).unwrap().auc;
                let ba = auc(n, p).unwrap().auc;
                worst = worst.max((ab - brute_auc(p, n)).abs());
                worst_sym = worst_sym.max((ab + ba - 1.0).abs());
                cases += 1;
            }
        }
    }
    let separated = auc(&[5.0, 6.0, 7.0], &[1.0, 2.0]).unwrap().auc;
    check(
        worst <= 1e-15 && worst_sym == 0.0 && separated == 1.0,
        format!("{cases} cases: max err vs brute force = {worst:.1e}, max |auc(A,B)+auc(B,A)-1| = {worst_sym:.1e}, separated = {separated}"),
    )
}

fn slerp_criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d = 768;
    let mut worst_end = 0.0f64;
    for _ in 0..100 {
        let (a, b) = (gaussian(d, &mut rng), gaussian(d, &mut rng));
        worst_end = worst_end
            .max(max_diff(&slerp(&a, &b, 0.0).unwrap(), &a))
            .max(max_diff(&slerp(&a, &b, 1.0).unwrap(), &b));
    }
    let e1 = gaussian(d, &mut rng);
    let opposite = opposite_embedding(&e1).unwrap();
    let mut points = Vec::new();
    let mut worst_opposite = 0.0f64;
    for _ in 0..100 {
        let path = full_circle_slerp(&e1, &gaussian(d, &mut rng), 10.0).unwrap();
        let p = path.point_at(180.0).unwrap().to_vec();
        worst_opposite = worst_opposite.max(max_diff(&p, &opposite));
        points.push(p);
    }
    let mut worst_invariance = 0.0f64;
    for p in &points[1..] {
        worst_invariance = worst_invariance.max(max_diff(p, &points[0]));
    }
    let mut worst_norm = 0.0f64;
    for _ in 0..100 {
        let r: f64 = rng.random_range(0.1..100.0);
        let unit = |v: Vec<f64>| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x * r / n).collect::<Vec<_>>()
        };
        let (a, b) = (unit(gaussian(d, &mut rng)), unit(gaussian(d, &mut rng)));
        for k in 0..=40 {
            let t = -2.0 + 0.1 * k as f64;
            let p = slerp(&a, &b, t).unwrap();
            let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            worst_norm = worst_norm.max((n - r).abs() / r);
        }
    }
    check(
        worst_end <= 1e-12 && worst_opposite <= 1e-10 && worst_invariance <= 1e-9 && worst_norm <= 1e-9,
        format!(
            "endpoints {worst_end:.1e}, 180° vs -E1 {worst_opposite:.1e}, destination spread {worst_invariance:.1e}, norm drift {worst_norm:.1e}"
        ),
    )
}

fn diagonal_score_criterion() -> Outcome {
    let identity = diagonal_score(&DMatrix::identity(16, 16)).unwrap();
    let ones = diagonal_score(&DMatrix::from_element(2, 2, 1.0)).unwrap();
    check(
        identity == 1.0 && ones == 0.5,
        format!("identity = {identity}, 2x2 ones = {ones}"),
    )
}

fn image_metrics_criterion() -> Outcome {
    let constant = |v: f64| ImageTensor::new(vec![v; 8 * 8 * 3], 8, 8, 3).unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for (v, expected_sat) in [
        (0.0, 100.0),
        (128.0, 0.0),
        (255.0, 100.0),
        (2.0, 100.0),
        (253.0, 100.0),
        (3.0, 0.0),
    ] {
        let img = constant(v);
        let (tv, h, s) = (
            total_variation(&img).unwrap(),
            entropy(&img),
            saturation_pct(&img),
        );
        ok &= tv == 0.0 && h == 0.0 && s == expected_sat;
        details.push(format!("{v}: sat {s}"));
    }
    let coverage = ImageTensor::new((0..256).map(f64::from).collect(), 16, 16, 1).unwrap();
    let bits = entropy(&coverage);
    ok &= bits == 8.0;
    check(
        ok,
        format!(
            "constant images TV 0 / entropy 0 ({}); full coverage entropy = {bits}",
            details.join(", ")
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.npy");
    write_embeddings(&correlated_data(1000, 32, 8), &input, TensorFormat::Npy).unwrap();
    let run = |out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_whitex"))
            .args(["fit", "--seed", "17", "--input"])
            .arg(&input)
            .arg("--output")
            .arg(out)
            .output()
            .unwrap();
        if status.status.success() {
            Ok(std::fs::read(out).unwrap())
        } else {
            Err(String::from_utf8_lossy(&status.stderr).into_owned())
        }
    };
    let a = run(&dir.path().join("a.zip"))?;
    let b = run(&dir.path().join("b.zip"))?;
    check(
        a == b,
        format!(
            "two fit runs: {} and {} bytes, identical = {}",
            a.len(),
            b.len(),
            a == b
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("whitening correctness", whitening_correctness),
        ("invertibility", invertibility),
        ("likelihood identities", likelihood_identities),
        ("chi model", chi_model),
        ("chi density", chi_density),
        ("normality battery", normality_battery_criterion),
        ("auc", auc_criterion),
        ("slerp", slerp_criterion),
        ("diagonal score", diagonal_score_criterion),
        ("image metrics", image_metrics_criterion),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
