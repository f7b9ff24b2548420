//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown.
//! The desk-scale experiment (criterion 6) trains 10 models and dominates
//! the runtime.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::thread;
use std::time::{Duration, Instant};

use semgan::config::{ExperimentConfig, Profile};
use semgan::experiment::cmd_compare;
use semgan::report::{read_eval_csv, EvalRow};
use semgan_core::codec::{collapse, one_hot_encode, quantize_rgb, spurious_pixel_rate, to_rgb, ClassProbVolume, LabelMap, Palette, RgbImage};
use semgan_core::gan::gradcheck::{check_discriminator, check_generator};
use semgan_core::gan::{build_models, encode_real_batch, generator_forward, sample_latent, Mode, ModelConfig, ModelState};
use semgan_core::metrics::swd::projection_direction;
use semgan_core::metrics::{frechet_distance, laplacian_pyramid, ms_ssim, reconstruct, sliced_wasserstein, DescriptorSet, FeatureStats};
use semgan_core::rng::{self, Domain, Rng, StreamRng};
use semgan_core::shapes::{generate_dataset, generate_item, ShapesConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_palette(r: &mut StreamRng, k: usize) -> Palette {
    let mut colors: Vec<[u8; 3]> = Vec::new();
    while colors.len() < k {
        let c = [r.random(), r.random(), r.random()];
        if !colors.contains(&c) {
            colors.push(c);
        }
    }
    Palette::from_colors(colors.into_iter().enumerate().map(|(i, c)| (format!("c{i}"), c))).unwrap()
}

fn random_map(r: &mut StreamRng, k: usize) -> LabelMap {
    let (w, h) = (r.random_range(1..24), r.random_range(1..24));
    LabelMap::new(w, h, (0..w * h).map(|_| r.random_range(0..k) as u8).collect()).unwrap()
}

/// 1. Codec round trips and tie-breaking.
fn codec_properties() -> Outcome {
    let mut failures = 0;
    for trial in 0..10_000u64 {
        let mut r = rng::stream(trial, Domain::Eval, 100);
        let k = r.random_range(1..=12);
        let palette = random_palette(&mut r, k);
        let m = random_map(&mut r, k);
        let ok_collapse = collapse(&one_hot_encode(&m, k).unwrap()) == m;
        let ok_quantize = quantize_rgb(&to_rgb(&m, &palette).unwrap(), &palette).unwrap() == m;
        // Ties among the top entries resolve to the lowest index.
        let (w, h) = (m.width(), m.height());
        let mut probs = Vec::with_capacity(w * h * k);
        let mut expected = Vec::with_capacity(w * h);
        for _ in 0..w * h {
            let top = r.random_range(0..k);
            let mut p: Vec<f64> = (0..k).map(|_| r.random_range(0.0..0.5)).collect();
            p[top] = 0.75;
            let tie = r.random_range(0..k);
            p[tie] = 0.75;
            let total: f64 = p.iter().sum();
            let p: Vec<f64> = p.iter().map(|v| v / total).collect();
            let max = p.iter().cloned().fold(f64::MIN, f64::max);
            expected.push(p.iter().position(|&v| v == max).unwrap() as u8);
            probs.extend(p);
        }
        let v = ClassProbVolume::new(w, h, k, probs).unwrap();
        let ok_ties = collapse(&v).labels() == expected.as_slice() && collapse(&v) == collapse(&v.clone());
        if !(ok_collapse && ok_quantize && ok_ties) {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("10000 randomized checks, {failures} failures"))
}

/// 2. Untrained semantic generators only ever emit palette colors.
fn validity_guarantee() -> Outcome {
    let (mut bad_labels, mut spurious_images) = (0, 0);
    for s in 0..100u64 {
        let mut r = rng::stream(s, Domain::Eval, 200);
        let k = r.random_range(2..=8);
        let palette = random_palette(&mut r, k);
        let cfg = ModelConfig {
            mode: Mode::Semantic,
            image_size: 16,
            classes: k,
            latent_dim: 16,
            kernel_size: 3,
            base_channels: 4,
            depth: 2,
        };
        let state: ModelState<f32> = build_models(&cfg, s).unwrap();
        let z = sample_latent(100, cfg.latent_dim, &mut rng::stream(s, Domain::Latent, 0));
        let out = generator_forward(&state, &z).unwrap();
        for b in 0..out.n {
            let probs: Vec<f64> = out.item(b).iter().map(|&v| v as f64).collect();
            let labels = collapse(&ClassProbVolume::new(16, 16, k, probs).unwrap());
            if labels.labels().iter().any(|&l| l as usize >= k) {
                bad_labels += 1;
            }
            if spurious_pixel_rate(&to_rgb(&labels, &palette).unwrap(), &palette, 0.0) != 0.0 {
                spurious_images += 1;
            }
        }
    }
    outcome(
        bad_labels == 0 && spurious_images == 0,
        format!("100 models x 100 latents: {bad_labels} invalid label maps, {spurious_images} images with spurious pixels"),
    )
}

/// 3. Default dataset size, square enumeration, labels, reproducibility.
fn dataset_fidelity() -> Outcome {
    let cfg = ShapesConfig::default();
    let a = generate_dataset(&cfg).unwrap();
    let b = generate_dataset(&cfg).unwrap();
    let mut positions: Vec<(usize, usize)> = a.items.iter().map(|(s, _)| s.square_pos).collect();
    positions.sort();
    positions.dedup();
    let mut used = [false; 256];
    for m in a.maps() {
        for &l in m.labels() {
            used[l as usize] = true;
        }
    }
    let labels = used.iter().filter(|&&u| u).count();
    let threads = 4;
    let chunk = a.items.len().div_ceil(threads);
    let parallel: Vec<_> = thread::scope(|sc| {
        let handles: Vec<_> = (0..threads)
            .map(|t| sc.spawn(move || (t * chunk..((t + 1) * chunk).min(2916)).map(|i| generate_item(&cfg, i).unwrap()).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    let pass = a.items.len() == 2916
        && positions.len() == 54 * 54
        && positions.iter().all(|&(x, y)| x < 54 && y < 54)
        && labels == 4
        && a == b
        && parallel == a.items;
    outcome(
        pass,
        format!(
            "{} items, {} distinct square positions, {} labels used, rerun identical: {}, 4-thread build identical: {}",
            a.items.len(),
            positions.len(),
            labels,
            a == b,
            parallel == a.items
        ),
    )
}

/// 4. Analytic vs central finite-difference gradients at 64-bit.
fn gradient_correctness() -> Outcome {
    let per_check = 60;
    let (mut worst, mut checked, mut skipped): (f64, usize, usize) = (0.0, 0, 0);
    for (mi, mode) in [Mode::Semantic, Mode::Rgb].into_iter().enumerate() {
        let cfg = ModelConfig {
            mode,
            image_size: 8,
            classes: 3,
            latent_dim: 6,
            kernel_size: 3,
            base_channels: 4,
            depth: 1,
        };
        let state: ModelState<f64> = build_models(&cfg, 40 + mi as u64).unwrap();
        let mut r = rng::stream(41, Domain::Eval, mi as u64);
        let maps: Vec<LabelMap> = (0..4)
            .map(|_| LabelMap::new(8, 8, (0..64).map(|_| r.random_range(0..3u8)).collect()).unwrap())
            .collect();
        let refs: Vec<&LabelMap> = maps.iter().collect();
        let palette = Palette::from_colors([("a", [0, 0, 0]), ("b", [255, 0, 0]), ("c", [0, 0, 255])]).unwrap();
        let real = encode_real_batch(&cfg, &refs, &palette).unwrap();
        let z = sample_latent(4, cfg.latent_dim, &mut rng::stream(42, Domain::Latent, mi as u64));
        for g in [
            check_discriminator(&state, &real, &z, per_check, 43).unwrap(),
            check_generator(&state, &real, &z, 0, per_check, 44).unwrap(),
        ] {
            worst = worst.max(g.worst);
            checked += g.checked;
            skipped += g.skipped;
        }
    }
    outcome(
        worst < 1e-3 && checked >= 200,
        format!("{checked} parameters, max relative error {worst:.2e} ({skipped} draws at activation kinks skipped)"),
    )
}

fn random_image(r: &mut StreamRng, side: usize) -> RgbImage {
    RgbImage::new(side, side, (0..side * side * 3).map(|_| r.random_range(0.0..1.0)).collect()).unwrap()
}

/// 5. Metric oracles.
fn metric_oracles() -> Outcome {
    let mut r = rng::stream(5, Domain::Eval, 500);
    // SWD against sort-and-average on random 5-point 3-D sets.
    let mut swd_err: f64 = 0.0;
    for trial in 0..200u64 {
        let n_proj = 1 + (trial % 4) as usize;
        let a: Vec<f64> = (0..15).map(|_| rng::normal(&mut r)).collect();
        let b: Vec<f64> = (0..15).map(|_| rng::normal(&mut r)).collect();
        let got = sliced_wasserstein(
            &DescriptorSet::new(16, 3, a.clone()).unwrap(),
            &DescriptorSet::new(16, 3, b.clone()).unwrap(),
            n_proj,
            trial,
        )
        .unwrap();
        let mut oracle = 0.0;
        for j in 0..n_proj {
            let v = projection_direction(trial, j, 3);
            let project = |s: &[f64]| {
                let mut p: Vec<f64> = s.chunks(3).map(|d| d[0] * v[0] + d[1] * v[1] + d[2] * v[2]).collect();
                p.sort_by(f64::total_cmp);
                p
            };
            let (pa, pb) = (project(&a), project(&b));
            oracle += pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>() / 5.0;
        }
        swd_err = swd_err.max((got - oracle / n_proj as f64).abs());
    }
    // Fréchet: 1-D case and diagonal closed form.
    let stats = |mean: Vec<f64>, var: &[f64]| {
        let d = mean.len();
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            cov[i * d + i] = var[i];
        }
        FeatureStats { dim: d, mean, cov }
    };
    let fd_1d = frechet_distance(&stats(vec![0.0], &[1.0]), &stats(vec![3.0], &[1.0])).unwrap();
    let mut fd_err: f64 = 0.0;
    for _ in 0..50 {
        let d = r.random_range(1..8);
        let (ma, mb): (Vec<f64>, Vec<f64>) = (0..d).map(|_| (rng::normal(&mut r), rng::normal(&mut r))).unzip();
        let va: Vec<f64> = (0..d).map(|_| r.random_range(0.0..4.0)).collect();
        let vb: Vec<f64> = (0..d).map(|_| r.random_range(0.0..4.0)).collect();
        let closed: f64 = (0..d).map(|i| (ma[i] - mb[i]).powi(2) + (va[i].sqrt() - vb[i].sqrt()).powi(2)).sum();
        let got = frechet_distance(&stats(ma, &va), &stats(mb, &vb)).unwrap();
        fd_err = fd_err.max((got - closed).abs());
    }
    // MS-SSIM identity and pyramid reconstruction.
    let mut ssim_err: f64 = 0.0;
    let mut pyr_err: f64 = 0.0;
    for side in [32, 64, 128] {
        let x = random_image(&mut r, side);
        ssim_err = ssim_err.max((ms_ssim(&x, &x).unwrap() - 1.0).abs());
        let rec = reconstruct(&laplacian_pyramid(&x, 16).unwrap()).unwrap();
        pyr_err = pyr_err.max(rec.iter().zip(x.pixels()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let pass = swd_err <= 1e-10 && (fd_1d - 9.0).abs() <= 1e-8 && fd_err <= 1e-8 && ssim_err <= 1e-6 && pyr_err <= 1e-6;
    outcome(
        pass,
        format!(
            "SWD vs sort oracle {swd_err:.1e}; FD 1-D {fd_1d}, diagonal {fd_err:.1e}; MS-SSIM(x,x) {ssim_err:.1e}; pyramid {pyr_err:.1e}"
        ),
    )
}

fn best(rows: &[EvalRow], f: impl Fn(&EvalRow) -> f64) -> f64 {
    rows.iter().map(f).fold(f64::INFINITY, f64::min)
}

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// 6. Desk-scale SemGAN vs GAN comparison over five seeds.
fn desk_experiment(root: &Path) -> Outcome {
    let mut wins = 0;
    let mut spurious_ok = true;
    let mut lines = Vec::new();
    for seed in SEEDS {
        let cfg = ExperimentConfig {
            seed,
            ..ExperimentConfig::for_profile(Profile::Desk)
        };
        let out = root.join(format!("seed_{seed}"));
        let t = Instant::now();
        let report = match cmd_compare(&cfg, &out, true) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        };
        let (sem, rgb) = (&report.runs[0].1, &report.runs[1].1);
        let (sb, rb) = (best(sem, |r| r.swd_avg), best(rgb, |r| r.swd_avg));
        let sem_spur = sem.iter().map(|r| r.spurious_rate).fold(0.0, f64::max);
        let rgb_spur = rgb.iter().map(|r| r.spurious_rate).fold(f64::INFINITY, f64::min);
        wins += usize::from(sb <= rb);
        spurious_ok &= sem_spur == 0.0 && rgb_spur > 0.0;
        let line = format!(
            "seed {seed}: best swd_avg semantic {sb:.2} vs rgb {rb:.2}; spurious semantic max {sem_spur} rgb min {rgb_spur:.4} ({:.0} s)",
            t.elapsed().as_secs_f64()
        );
        println!("    {line}");
        lines.push(line);
    }
    outcome(
        wins >= 4 && spurious_ok,
        format!("semantic best swd_avg <= rgb in {wins}/5 seeds; spurious rates as required in all seeds: {spurious_ok}"),
    )
}

/// 7. Tables-layout report from a completed comparison.
fn report_layout(run: &Path) -> Outcome {
    let md = fs::read_to_string(run.join("summary.md")).unwrap_or_default();
    let csv = fs::read_to_string(run.join("summary.csv")).unwrap_or_default();
    let header_ok = md.contains("| Model | FD (random-conv) | MS-SSIM | SWD 16 | SWD 32 | SWD avg |")
        && csv.starts_with("mode,frechet,ms_ssim,swd_16,swd_32,swd_avg,");
    let mut minima_ok = true;
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    for (mode, row) in ["semantic", "rgb"].iter().zip(&rows) {
        let evals = read_eval_csv(&run.join(mode).join("eval.csv")).unwrap_or_default();
        let expect = [
            best(&evals, |r| r.frechet),
            best(&evals, |r| r.ms_ssim),
            best(&evals, |r| r.swd[0].unwrap_or(f64::NAN)),
            best(&evals, |r| r.swd[1].unwrap_or(f64::NAN)),
            best(&evals, |r| r.swd_avg),
        ];
        minima_ok &= row[0] == *mode && !evals.is_empty();
        for (v, e) in row[1..6].iter().zip(expect) {
            minima_ok &= v.parse::<f64>().ok() == Some(e);
        }
    }
    outcome(
        header_ok && minima_ok && rows.len() == 2,
        format!("summary columns FD / MS-SSIM / SWD 16 / SWD 32 / avg: {header_ok}; values are per-column eval minima: {minima_ok}"),
    )
}

/// 8. Two identical `compare` invocations give byte-identical artifacts.
fn determinism(root: &Path) -> Outcome {
    let run = |name: &str| -> Result<PathBuf, String> {
        let out = root.join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_semgan"))
            .args(["compare", "--seed", "7", "--steps", "60", "--eval-every", "30", "--force", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(String::from_utf8_lossy(&o.stderr).into_owned());
        }
        Ok(out)
    };
    let (a, b) = match (run("det_a"), run("det_b")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("compare failed: {e}")),
    };
    let files = [
        "semantic/eval.csv",
        "rgb/eval.csv",
        "semantic/grid.png",
        "rgb/grid.png",
        "semantic/train_log.csv",
        "rgb/train_log.csv",
        "summary.csv",
        "swd_curves.csv",
    ];
    let differing: Vec<&str> = files
        .iter()
        .filter(|f| fs::read(a.join(f)).ok().is_none_or(|x| Some(x) != fs::read(b.join(f)).ok()))
        .copied()
        .collect();
    outcome(
        differing.is_empty(),
        format!("{} artifacts compared, differing: {differing:?}", files.len()),
    )
}

fn timed(budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let mut o = f();
    let dt = t.elapsed();
    if let Some(b) = budget {
        o.pass &= dt <= b;
        o.detail = format!("{} [{:.1} s, budget {} s]", o.detail, dt.as_secs_f64(), b.as_secs());
    } else {
        o.detail = format!("{} [{:.1} s]", o.detail, dt.as_secs_f64());
    }
    o
}

fn main() -> ExitCode {
    let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&root).expect("acceptance dir");
    let quick = std::env::args().any(|a| a == "--quick");
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!("criterion {n} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "codec properties", timed(Some(Duration::from_secs(10)), codec_properties));
    report(2, "validity guarantee", timed(Some(Duration::from_secs(60)), validity_guarantee));
    report(3, "dataset fidelity", timed(None, dataset_fidelity));
    report(4, "gradient correctness", timed(Some(Duration::from_secs(120)), gradient_correctness));
    report(5, "metric oracles", timed(Some(Duration::from_secs(30)), metric_oracles));
    if quick {
        println!("criteria 6-8 skipped (--quick)");
    } else {
        report(6, "desk-scale comparison", timed(Some(Duration::from_secs(45 * 60)), || desk_experiment(&root)));
        report(7, "tables layout", timed(None, || report_layout(&root.join(format!("seed_{}", SEEDS[0])))));
        report(8, "end-to-end determinism", timed(None, || determinism(&root)));
    }
    let failed: Vec<usize> = results.iter().filter(|(_, _, o)| !o.pass).map(|(n, _, _)| *n).collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!("; failed: {failed:?}") }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
