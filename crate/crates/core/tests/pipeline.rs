use edof_core::align::{align_grid, frame_corners, AlignParams};
use edof_core::fusion::{fuse_pipeline, preservation_degrees, BlockSource, FusionNet, FusionParams};
use edof_core::synth::{generate, CaptureOptions, GridOptions};
use edof_core::{ImageF, Sequential};
use proptest::prelude::*;

fn small_options() -> GridOptions {
    GridOptions {
        canvas: (160, 160),
        capture: CaptureOptions {
            max_shift: 6.0,
            ..CaptureOptions::default()
        },
        ..GridOptions::default()
    }
}

#[test]
fn aligned_views_share_a_canvas_that_holds_every_corner() {
    let g = generate(&small_options(), 21).unwrap();
    let aligned = align_grid(&g.grid, g.grid.center_index(), &AlignParams::default(), &Sequential).unwrap();
    assert_eq!(aligned.len(), 9);
    let (h, w) = aligned[0].image.size();
    for a in &aligned {
        assert_eq!(a.image.size(), (h, w));
        assert_eq!(a.offset, aligned[0].offset);
        for (x, y) in frame_corners(g.grid.view_size()) {
            let (u, v) = a.homography_total.apply(x, y).unwrap();
            assert!(u >= 0.0 && v >= 0.0 && u <= w as f64 && v <= h as f64, "({u}, {v}) outside {w}x{h}");
        }
    }
    let bench = &aligned[g.grid.center_index()];
    let (dx, dy) = bench.offset;
    assert!(bench.image.is_valid(dy, dx));
}

#[test]
fn untrained_network_fuses_a_whole_grid() {
    let g = generate(&small_options(), 22).unwrap();
    let aligned = align_grid(&g.grid, g.grid.center_index(), &AlignParams::default(), &Sequential).unwrap();
    let out = fuse_pipeline(&aligned, &FusionNet::new(0), &FusionParams::default(), &Sequential).unwrap();
    assert_eq!(out.image.size(), aligned[0].image.size());
    assert_eq!(out.blocks.len(), 9);
    assert!(out.image.data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
    let (dx, dy) = aligned[0].offset;
    let (vh, vw) = g.grid.view_size();
    assert!(out.image.crop(dy, dx, vh, vw).valid_fraction() > 0.99);
}

#[test]
fn a_single_usable_view_is_passed_through() {
    let g = generate(&small_options(), 23).unwrap();
    let mut aligned = align_grid(&g.grid, g.grid.center_index(), &AlignParams::default(), &Sequential).unwrap();
    for a in aligned.iter_mut().skip(1) {
        a.image.mask_mut().iter_mut().for_each(|m| *m = false);
    }
    let out = fuse_pipeline(&aligned, &FusionNet::new(0), &FusionParams::default(), &Sequential).unwrap();
    assert!(out.blocks.iter().all(|b| b.source == BlockSource::Fallback(0)));
    assert_eq!(out.image, aligned[0].image);
}

#[test]
fn mismatched_canvases_are_rejected() {
    let g = generate(&small_options(), 24).unwrap();
    let mut aligned = align_grid(&g.grid, g.grid.center_index(), &AlignParams::default(), &Sequential).unwrap();
    aligned[3].image = ImageF::new(10, 10, 1);
    assert!(fuse_pipeline(&aligned, &FusionNet::new(0), &FusionParams::default(), &Sequential).is_err());
}

proptest! {
    #[test]
    fn weights_ignore_a_common_shift(hi in 0.0f64..10.0, hj in 0.0f64..10.0, shift in -5.0f64..5.0, c in 0.05f64..5.0) {
        let a = preservation_degrees(hi, hj, c).unwrap();
        let b = preservation_degrees(hi + shift, hj + shift, c).unwrap();
        prop_assert!((a.first - b.first).abs() < 1e-12);
        prop_assert!((a.second - b.second).abs() < 1e-12);
    }

    #[test]
    fn larger_measure_gets_larger_weight(hi in 0.0f64..10.0, hj in 0.0f64..10.0, bump in 0.01f64..3.0, c in 0.05f64..5.0) {
        let w = preservation_degrees(hi, hj, c).unwrap();
        prop_assert_eq!(w.first > w.second, hi > hj);
        let up = preservation_degrees(hi + bump, hj, c).unwrap();
        prop_assert!(up.first > w.first || w.first == 1.0);
    }
}
