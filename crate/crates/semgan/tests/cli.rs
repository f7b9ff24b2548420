//! End-to-end runs of the `semgan` binary on small configurations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semgan::report::read_eval_csv;

const SMALL: &str = r#"{
  "image_size": 16,
  "latent_dim": 8,
  "kernel_size": 3,
  "batch_size": 8,
  "steps": 4,
  "eval_every": 2,
  "dataset": {"square_side": 12, "circle_radius": 3, "rect_width_range": [3, 6], "rect_height_range": [3, 6]},
  "metrics": {"patches_per_image": 8, "n_projections": 16, "ms_ssim_pairs": 20, "eval_batch": 8}
}"#;

fn semgan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semgan")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let o = semgan(args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn small_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.json");
    fs::write(&p, SMALL).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn pngs(dir: &Path) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"))
        .count()
}

#[test]
fn dataset_counts_and_refuses_overwrite() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("ds");
    ok(&["dataset", "--out", s(&out)]);
    assert_eq!(pngs(&out), 529);
    for f in ["palette.json", "manifest.json", "run.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let again = semgan(&["dataset", "--image-size", "32", "--out", s(&out)]);
    assert_eq!(again.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    fs::write(out.join("notes.txt"), "keep").unwrap();
    ok(&["dataset", "--image-size", "32", "--square-side", "10", "--out", s(&out), "--force"]);
    assert_eq!(pngs(&out), 22 * 22);
    assert!(out.join("notes.txt").exists());
}

#[test]
fn full_profile_dataset_has_2916_items() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("ds");
    ok(&["dataset", "--profile", "full", "--out", s(&out)]);
    assert_eq!(pngs(&out), 2916);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["item_count"], 2916);
    assert_eq!(manifest["image_size"], 64);
}

#[test]
fn train_checkpoints_and_is_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small_config(t.path());
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for out in [&a, &b] {
        ok(&["train", "--config", s(&cfg), "--steps", "10", "--eval-every", "5", "--seed", "3", "--out", s(out)]);
    }
    let mut ckpts: Vec<String> = fs::read_dir(a.join("checkpoints"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    ckpts.sort();
    assert_eq!(ckpts, ["step_000005.ckpt", "step_000010.ckpt"]);
    let log = fs::read_to_string(a.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 11);
    assert!(log.starts_with("step,d_loss,g_loss\n1,"));
    assert_eq!(log, fs::read_to_string(b.join("train_log.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("checkpoints/step_000010.ckpt")).unwrap(),
        fs::read(b.join("checkpoints/step_000010.ckpt")).unwrap()
    );
    // A run is reproducible from its run.json alone.
    let c = t.path().join("c");
    ok(&["train", "--config", s(&a.join("run.json")), "--out", s(&c)]);
    assert_eq!(log, fs::read_to_string(c.join("train_log.csv")).unwrap());
}

#[test]
fn eval_rows_and_spurious_rates() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small_config(t.path());
    for mode in ["semantic", "rgb"] {
        let run = t.path().join(mode);
        ok(&["train", "--config", s(&cfg), "--mode", mode, "--steps", "2", "--out", s(&run)]);
        let ckpt = run.join("checkpoints/step_000002.ckpt");
        let ev = t.path().join(format!("{mode}_eval"));
        ok(&["eval", "--config", s(&cfg), "--checkpoint", s(&ckpt), "--out", s(&ev)]);
        ok(&["eval", "--config", s(&cfg), "--checkpoint", s(&ckpt), "--out", s(&ev)]);
        let rows = read_eval_csv(&ev.join("eval.csv")).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], rows[1]);
        assert_eq!(rows[0].step, 2);
        assert!(rows[0].swd[0].is_some());
        assert_eq!(rows[0].swd[1], None);
        if mode == "semantic" {
            assert_eq!(rows[0].spurious_rate, 0.0);
        } else {
            assert!(rows[0].spurious_rate > 0.0);
        }
        let sidecar: serde_json::Value = serde_json::from_str(&fs::read_to_string(ev.join("eval.json")).unwrap()).unwrap();
        assert_eq!(sidecar["n_projections"], 16);
        assert_eq!(sidecar["feature_extractor"], "random-conv");
        ok(&["eval", "--config", s(&cfg), "--checkpoint", s(&ckpt), "--out", s(&ev), "--force"]);
        assert_eq!(read_eval_csv(&ev.join("eval.csv")).unwrap().len(), 1);
    }
}

#[test]
fn grid_tiles_and_validates() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small_config(t.path());
    let run = t.path().join("run");
    ok(&["train", "--config", s(&cfg), "--steps", "1", "--out", s(&run)]);
    let ckpt = run.join("checkpoints/step_000001.ckpt");
    let (g1, g2) = (t.path().join("g1"), t.path().join("g2"));
    ok(&["grid", "--checkpoint", s(&ckpt), "--seed", "5", "--out", s(&g1)]);
    ok(&["grid", "--checkpoint", s(&ckpt), "--seed", "5", "--out", s(&g2)]);
    let img = semgan::io::load_rgb_png(&g1.join("grid.png")).unwrap();
    assert_eq!((img.width(), img.height()), (4 * 16 + 3 * 2, 4 * 16 + 3 * 2));
    assert_eq!(fs::read(g1.join("grid.png")).unwrap(), fs::read(g2.join("grid.png")).unwrap());
    let bad = semgan(&["grid", "--checkpoint", s(&ckpt), "--n", "15", "--out", s(&t.path().join("g3"))]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn compare_writes_tables_from_eval_minima() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small_config(t.path());
    let out = t.path().join("cmp");
    ok(&["compare", "--config", s(&cfg), "--out", s(&out)]);
    let mut mins = Vec::new();
    for mode in ["semantic", "rgb"] {
        let rows = read_eval_csv(&out.join(mode).join("eval.csv")).unwrap();
        assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), [2, 4]);
        assert!(out.join(mode).join("grid.png").exists());
        let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join(mode).join("run.json")).unwrap()).unwrap();
        assert_eq!(run["config"]["mode"], mode);
        mins.push(rows.iter().map(|r| r.swd_avg).fold(f64::INFINITY, f64::min));
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "mode,frechet,ms_ssim,swd_16,swd_avg,max_spurious_rate,checkpoints");
    for (line, min) in lines[1..].iter().zip(&mins) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[4].parse::<f64>().unwrap(), *min);
    }
    let md = fs::read_to_string(out.join("summary.md")).unwrap();
    assert!(md.contains("| Model | FD (random-conv) | MS-SSIM | SWD 16 | SWD avg |"));
    assert_eq!(fs::read_to_string(out.join("swd_curves.csv")).unwrap().lines().count(), 5);
    let refused = semgan(&["compare", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(refused.status.code(), Some(2));
}

#[test]
fn errors_map_to_exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small_config(t.path());
    let run = t.path().join("run");
    ok(&["train", "--config", s(&cfg), "--steps", "1", "--out", s(&run)]);
    let ckpt = run.join("checkpoints/step_000001.ckpt");
    let mut bytes = fs::read(&ckpt).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    let broken = t.path().join("broken.ckpt");
    fs::write(&broken, bytes).unwrap();
    let o = semgan(&["eval", "--config", s(&cfg), "--checkpoint", s(&broken), "--out", s(&t.path().join("e"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.ckpt"));
    let o = semgan(&["train", "--image-size", "48", "--out", s(&t.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = semgan(&["train", "--bogus-flag", "--out", s(&t.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = semgan(&["train"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trains_on_a_label_png_directory() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small_config(t.path());
    let ds = t.path().join("ds");
    ok(&["dataset", "--config", s(&cfg), "--out", s(&ds)]);
    assert_eq!(pngs(&ds), 16);
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["train", "--config", s(&cfg), "--dataset", s(&ds), "--out", s(&a)]);
    ok(&["train", "--config", s(&cfg), "--out", s(&b)]);
    assert_eq!(
        fs::read_to_string(a.join("train_log.csv")).unwrap(),
        fs::read_to_string(b.join("train_log.csv")).unwrap()
    );
}
