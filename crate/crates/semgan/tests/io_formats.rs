//! File-format round trips and error reporting.

use std::fs;

use proptest::prelude::*;
use semgan::checkpoint;
use semgan::io::{load_label_png, load_palette, load_png_dataset, load_rgb_png, save_label_png, save_palette, save_rgb_png};
use semgan_core::codec::{LabelMap, Palette, RgbImage};
use semgan_core::gan::{build_models, Mode, ModelConfig, ModelState};

fn palette() -> Palette {
    Palette::from_colors([("bg", [0, 0, 0]), ("a", [255, 0, 0]), ("b", [0, 255, 0])]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn label_png_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        let labels: Vec<u8> = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 7) as u8).collect();
        let m = LabelMap::new(w, h, labels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        save_label_png(&p, &m).unwrap();
        prop_assert_eq!(load_label_png(&p).unwrap(), m);
    }

    #[test]
    fn rgb_png_round_trip_of_quantized_images(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
        let bytes: Vec<u8> = (0..w * h * 3).map(|i| (seed.rotate_left(i as u32 % 64) ^ i as u64) as u8).collect();
        let img = RgbImage::from_u8(w, h, &bytes).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.png");
        save_rgb_png(&p, &img).unwrap();
        prop_assert_eq!(load_rgb_png(&p).unwrap().to_u8(), bytes);
    }
}

#[test]
fn palette_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("palette.json");
    save_palette(&p, &palette()).unwrap();
    assert_eq!(load_palette(&p).unwrap(), palette());
    fs::write(&p, r#"[{"id": 0, "name": "x", "rgb": [0, 0, 0]}, {"id": 0, "name": "y", "rgb": [1, 1, 1]}]"#).unwrap();
    assert!(load_palette(&p).unwrap_err().to_string().contains("palette.json"));
}

#[test]
fn dataset_dir_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    save_label_png(&dir.path().join("a.png"), &LabelMap::filled(4, 4, 1)).unwrap();
    save_label_png(&dir.path().join("b.png"), &LabelMap::filled(4, 4, 7)).unwrap();
    let err = load_png_dataset(dir.path(), &palette()).unwrap_err();
    assert!(err.to_string().contains("b.png"), "{err}");
    save_label_png(&dir.path().join("b.png"), &LabelMap::filled(5, 4, 0)).unwrap();
    let err = load_png_dataset(dir.path(), &palette()).unwrap_err();
    assert!(err.to_string().contains("b.png"), "{err}");
    save_label_png(&dir.path().join("b.png"), &LabelMap::filled(4, 4, 2)).unwrap();
    assert_eq!(load_png_dataset(dir.path(), &palette()).unwrap().len(), 2);
    save_rgb_png(&dir.path().join("c.png"), &RgbImage::filled(4, 4, [0.0; 3])).unwrap();
    assert!(load_png_dataset(dir.path(), &palette()).unwrap_err().to_string().contains("c.png"));
}

#[test]
fn checkpoints_survive_files_and_reject_other_dtypes() {
    let cfg = ModelConfig {
        mode: Mode::Rgb,
        image_size: 8,
        classes: 3,
        latent_dim: 4,
        kernel_size: 3,
        base_channels: 2,
        depth: 1,
    };
    let s: ModelState<f32> = build_models(&cfg, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.ckpt");
    checkpoint::save(&p, &s).unwrap();
    let back: ModelState<f32> = checkpoint::load(&p).unwrap();
    assert_eq!(checkpoint::encode(&back), checkpoint::encode(&s));
    let err = checkpoint::load::<f64>(&p).unwrap_err();
    assert!(err.to_string().contains("m.ckpt"));
    assert_eq!(err.exit_code(), 3);
}
