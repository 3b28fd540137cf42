//! Generator determinism and the on-disk formats it produces.

use std::collections::BTreeMap;

use proptest::prelude::*;

use cartoseg::synth::{
    default_lexicon, ClassMixture, ColorModel, Corpus, GaussianComponent, GenerationConfig, Generator,
};
use cartoseg::{LabelMask, Logits, SemanticClass, NUM_CLASSES};

fn generator() -> Generator {
    let config = GenerationConfig { width: 256, height: 256, ..GenerationConfig::default() };
    Generator::new(Corpus::fixture(0, 4).unwrap(), config, ColorModel::default_palette(), default_lexicon()).unwrap()
}

#[test]
fn same_seed_same_sample() {
    let g = generator();
    for seed in [0, 7, 123_456] {
        let (a, b) = (g.generate(seed).unwrap(), g.generate(seed).unwrap());
        assert_eq!(a.image, b.image);
        assert_eq!(a.mask, b.mask);
        assert_eq!(a.jpeg, b.jpeg);
        assert_eq!(a.provenance, b.provenance);
    }
    let (a, b) = (g.generate(1).unwrap(), g.generate(2).unwrap());
    assert_ne!(a.provenance.image_sha256, b.provenance.image_sha256);
}

#[test]
fn saved_sample_reloads() {
    let g = generator();
    let s = g.generate(4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    s.save(dir.path(), "s4").unwrap();
    let mask = LabelMask::load_png(dir.path().join("s4_mask.png")).unwrap();
    assert_eq!(mask, s.mask);
    let img = image::open(dir.path().join(format!("s4.{}", s.image_extension()))).unwrap().to_rgb8();
    assert_eq!(img.dimensions(), (256, 256));
    let json = std::fs::read_to_string(dir.path().join("s4.json")).unwrap();
    let prov: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(prov["seed"], 4);
    assert_eq!(prov["mask_sha256"], s.provenance.mask_sha256.as_str());
}

#[test]
fn corpus_save_load() {
    let corpus = Corpus::fixture(3, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    corpus.save(dir.path()).unwrap();
    let zoom = cartoseg::geodata::ZoomLevel::new(14).unwrap();
    let back = Corpus::load(dir.path(), zoom).unwrap();
    assert_eq!(back.regions.len(), 2);
    for (a, b) in corpus.regions.iter().zip(&back.regions) {
        assert_eq!(a.features.features, b.features.features);
    }
}

fn component() -> impl Strategy<Value = GaussianComponent> {
    (0.05..1.0f64, prop::array::uniform3(0.0..255.0f64), prop::array::uniform3(1.0..40.0f64), -0.5..0.5f64).prop_map(
        |(weight, mean, sd, rho)| {
            let mut cov = [[0.0; 3]; 3];
            for i in 0..3 {
                cov[i][i] = sd[i] * sd[i];
            }
            cov[0][1] = rho * sd[0] * sd[1];
            cov[1][0] = cov[0][1];
            GaussianComponent { weight, mean, cov }
        },
    )
}

fn color_model() -> impl Strategy<Value = ColorModel> {
    prop::collection::vec(prop::collection::vec(component(), 1..4), NUM_CLASSES).prop_map(|mixtures| {
        let classes = SemanticClass::ALL
            .into_iter()
            .zip(mixtures)
            .map(|(c, mut components)| {
                let total: f64 = components.iter().map(|k| k.weight).sum();
                for k in &mut components {
                    k.weight /= total;
                }
                (c, ClassMixture { components })
            })
            .collect::<BTreeMap<_, _>>();
        ColorModel { classes }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn color_model_json_round_trip(m in color_model()) {
        let back = ColorModel::from_json(&m.to_json()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn mask_png_round_trip(w in 1u32..64, h in 1u32..64, seed in any::<u64>()) {
        let data = (0..w * h).map(|i| ((seed >> (i % 61)) as u8 ^ i as u8) % NUM_CLASSES as u8).collect();
        let mask = LabelMask::from_raw(w, h, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        mask.save_png(&path).unwrap();
        prop_assert_eq!(LabelMask::load_png(&path).unwrap(), mask);
    }

    #[test]
    fn lgt_round_trip(w in 1u32..16, h in 1u32..16, bits in prop::collection::vec(any::<u32>(), 16 * 16 * 6)) {
        let n = (w * h * 6) as usize;
        let l = Logits::new(w, h, 6, bits[..n].iter().map(|&b| f32::from_bits(b)).collect()).unwrap();
        let mut buf = Vec::new();
        l.write_lgt(&mut buf).unwrap();
        let back = Logits::read_lgt(&buf[..]).unwrap();
        let same = back.as_slice().iter().zip(l.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same && back.width() == w && back.height() == h);
    }

    #[test]
    fn out_of_range_mask_values_are_rejected(bad in 6u8..=255) {
        prop_assert!(LabelMask::from_raw(2, 1, vec![0, bad]).is_err());
    }
}

#[test]
fn bad_color_model_json() {
    assert!(ColorModel::from_json("{\"water\": {\"components\": []}}").is_err());
    assert!(ColorModel::from_json("[1, 2]").is_err());
}
