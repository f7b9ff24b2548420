//! Library-level runs: protocol invariants, external features, divergence.

use semgan::checkpoint::ModeName;
use semgan::config::ExperimentConfig;
use semgan::experiment::{build_state, cmd_eval, cmd_train, load_dataset, EvalInputs};
use semgan::features::save_features;
use semgan::Error;
use semgan_core::metrics::{feature_stats, frechet_distance};
use semgan_core::rng::{self, Domain};

fn small() -> ExperimentConfig {
    serde_json::from_str(
        r#"{
          "image_size": 16, "latent_dim": 8, "kernel_size": 3, "batch_size": 8, "steps": 2, "eval_every": 2,
          "dataset": {"square_side": 12, "circle_radius": 3, "rect_width_range": [3, 6], "rect_height_range": [3, 6]},
          "metrics": {"patches_per_image": 8, "n_projections": 16, "ms_ssim_pairs": 20, "eval_batch": 8}
        }"#,
    )
    .unwrap()
}

#[test]
fn modes_share_trunk_initialization() {
    let cfg = small();
    let data = load_dataset(&cfg).unwrap();
    let (sem, _) = build_state(&cfg, &data).unwrap();
    let (rgb, _) = build_state(&ExperimentConfig { mode: ModeName::Rgb, ..cfg }, &data).unwrap();
    let mut differing = Vec::new();
    for (a, b) in [(&sem.generator, &rgb.generator), (&sem.discriminator, &rgb.discriminator)] {
        assert_eq!(a.params.len(), b.params.len());
        for (pa, pb) in a.params.iter().zip(&b.params) {
            assert_eq!(pa.name, pb.name);
            if pa.data != pb.data {
                assert_ne!(pa.shape, pb.shape, "{} differs with equal shapes", pa.name);
                differing.push(pa.name.clone());
            }
        }
    }
    // Generator head (weight, bias) and the discriminator's first conv.
    assert!(!differing.is_empty() && differing.len() <= 3, "{differing:?}");
}

#[test]
fn external_features_replace_the_extractor() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small();
    let run = t.path().join("run");
    cmd_train(&cfg, &run, false).unwrap();
    let data = load_dataset(&cfg).unwrap();
    let n = data.images.len();
    let dim = 3;
    let draw = |idx: u64| -> Vec<f32> {
        let mut r = rng::stream(idx, Domain::Eval, 0);
        (0..n * dim).map(|_| rng::normal(&mut r) as f32).collect()
    };
    let (real, fake) = (draw(1), draw(2));
    let (rp, fp) = (t.path().join("real.bin"), t.path().join("fake.bin"));
    save_features(&rp, dim, &real).unwrap();
    save_features(&fp, dim, &fake).unwrap();
    let inputs = EvalInputs {
        real_features: Some(rp.clone()),
        fake_features: Some(fp),
        samples_out: Some(t.path().join("samples")),
    };
    let out = t.path().join("eval");
    let report = cmd_eval(&cfg, &run.join("checkpoints/step_000002.ckpt"), &out, &inputs).unwrap();
    let widen = |v: &[f32]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
    let expected = frechet_distance(
        &feature_stats(&widen(&real), dim).unwrap(),
        &feature_stats(&widen(&fake), dim).unwrap(),
    )
    .unwrap();
    assert_eq!(report.frechet, expected);
    let sidecar = std::fs::read_to_string(out.join("eval.json")).unwrap();
    assert!(sidecar.contains("\"external\""));
    assert_eq!(std::fs::read_dir(t.path().join("samples")).unwrap().count(), n);

    let half = EvalInputs {
        real_features: Some(rp),
        ..Default::default()
    };
    let err = cmd_eval(&cfg, &run.join("checkpoints/step_000002.ckpt"), &out, &half).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn divergence_reports_step_and_last_finite_losses() {
    let t = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        lr: 1e30,
        steps: 20,
        eval_every: 20,
        ..small()
    };
    let err = cmd_train(&cfg, &t.path().join("run"), false).unwrap_err();
    match &err {
        Error::Diverged { step, d_loss, .. } => {
            assert!(*step >= 1);
            assert!(*step == 1 || d_loss.is_finite());
        }
        e => panic!("expected divergence, got {e}"),
    }
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("diverged at step"));
}
