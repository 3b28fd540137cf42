//! Tiling and multiscale inference properties.

use image::RgbImage;
use proptest::prelude::*;

use cartoseg::backend::{ConstantBackend, OracleBackend};
use cartoseg::inference::{multiscale_infer, plan_tiles, run_tiled, InferError, InferOptions, Upsample};
use cartoseg::{LabelMask, SemanticClass, NUM_CLASSES};

/// Masks made of axis-aligned blocks, closer to real labels than noise.
fn blocky_mask() -> impl Strategy<Value = LabelMask> {
    (8u32..120, 8u32..120, 2u32..12, any::<u64>()).prop_map(|(w, h, block, seed)| {
        let data = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w / block, i / w / block);
                let v = seed ^ (x as u64).wrapping_mul(0x9E37_79B9) ^ (y as u64).wrapping_mul(0x85EB_CA6B);
                (v.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 61) as u8 % NUM_CLASSES as u8
            })
            .collect();
        LabelMask::from_raw(w, h, data).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_pixel_is_covered(w in 1u32..2000, h in 1u32..2000, patch in 8u32..600, frac in 0.0..0.9f64) {
        let overlap = (patch as f64 * frac) as u32;
        let grid = plan_tiles(w, h, patch, overlap).unwrap();
        prop_assert!(grid.coverage().iter().all(|&c| c >= 1));
        prop_assert_eq!(grid.padded, w < patch || h < patch);
        // Consecutive tiles never leave a gap and never overlap by less than asked.
        for axis in [&grid.xs, &grid.ys] {
            for pair in axis.windows(2) {
                prop_assert!(pair[1] > pair[0] && pair[1] - pair[0] <= patch - overlap);
            }
        }
    }

    #[test]
    fn oracle_is_exact_with_one_coarse_scale(
        mask in blocky_mask(),
        coarse in prop::sample::select(vec![1.0, 0.75, 0.5, 0.3, 0.25]),
        nearest in any::<bool>(),
    ) {
        // The full-resolution vote (10 on the true class) beats whatever the
        // coarse scale spreads elsewhere as long as the true class keeps a
        // positive share there.
        let (w, h) = mask.dims();
        let opts = InferOptions {
            scales: vec![1.0, coarse],
            patch: 48,
            overlap: 8,
            upsample: if nearest { Upsample::Nearest } else { Upsample::Bilinear },
        };
        let backend = OracleBackend::new(mask.clone());
        let pred = multiscale_infer(&RgbImage::new(w, h), &backend, &opts).unwrap();
        prop_assert!(pred.mask == mask);
    }

    #[test]
    fn constant_backend_survives_tiling(w in 1u32..200, h in 1u32..200, v in prop::array::uniform6(-5.0f32..5.0)) {
        let grid = plan_tiles(w, h, 40, 10).unwrap();
        let out = run_tiled(&RgbImage::new(w, h), &ConstantBackend { values: v }, &grid, 1.0).unwrap();
        // Averaging n copies in f32 may be off by a rounding step.
        for k in 0..NUM_CLASSES {
            prop_assert!(out.plane(k).iter().all(|&x| (x - v[k]).abs() <= 4.0 * f32::EPSILON * v[k].abs()));
        }
    }
}

#[test]
fn oracle_store_miss_is_reported_with_tile() {
    let mut tiles = std::collections::BTreeMap::new();
    tiles.insert((0, 0), LabelMask::filled(32, 32, SemanticClass::Water));
    let backend = OracleBackend::from_tiles(tiles);
    let opts = InferOptions { scales: vec![1.0], patch: 32, overlap: 0, ..InferOptions::default() };
    let err = multiscale_infer(&RgbImage::new(64, 32), &backend, &opts).unwrap_err();
    assert!(matches!(err, InferError::Tile { x: 32, y: 0, .. }), "{err}");
}

#[test]
fn invalid_options_are_rejected() {
    let img = RgbImage::new(10, 10);
    let b = ConstantBackend { values: [0.0; 6] };
    let bad = |o: InferOptions| multiscale_infer(&img, &b, &o).unwrap_err();
    assert!(matches!(bad(InferOptions { scales: vec![], ..InferOptions::default() }), InferError::EmptyScales));
    assert!(matches!(bad(InferOptions { scales: vec![0.0], ..InferOptions::default() }), InferError::InvalidScale(_)));
    assert!(matches!(
        bad(InferOptions { patch: 16, overlap: 16, ..InferOptions::default() }),
        InferError::InvalidTiling { .. }
    ));
    assert!(matches!(
        multiscale_infer(&RgbImage::new(0, 5), &b, &InferOptions::default()),
        Err(InferError::EmptyImage)
    ));
}

#[test]
fn ties_go_to_the_lowest_class() {
    let b = ConstantBackend { values: [0.0, 1.0, 1.0, 0.0, 1.0, 0.0] };
    let pred = multiscale_infer(&RgbImage::new(20, 20), &b, &InferOptions::default()).unwrap();
    assert!(pred.mask.as_raw().iter().all(|&c| c == SemanticClass::Boundary.id()));
}
