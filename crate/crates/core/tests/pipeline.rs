use otseg_core::coseg::CosegConfig;
use otseg_core::features::{Image, ScribbleSet};
use otseg_core::fixtures;
use otseg_core::io;
use otseg_core::models::{threshold_labels, SegConfig, Variant};
use otseg_core::pipeline::{build_codebook, cosegment_images, segment_image, FeatureConfig};
use otseg_core::Error;
use proptest::prelude::*;

#[test]
fn default_codebook_is_capped_by_distinct_colours() {
    let f = fixtures::two_colour(8);
    let cb = build_codebook(&[&f.image], &FeatureConfig::default()).unwrap();
    assert_eq!(cb.codebook.len(), 2);
    assert!(build_codebook(&[], &FeatureConfig::default()).is_err());
}

#[test]
fn scribble_checks() {
    let f = fixtures::two_region(8, 0.0, 1);
    let one = fixtures::dot_scribbles(8, 8, &[(1, 1, 1)], 1.0);
    let cfg = SegConfig::default();
    let feats = FeatureConfig::default();
    assert!(matches!(segment_image(&f.image, &one, None, &feats, &cfg, false, None), Err(Error::TooFewLabels(1))));

    let small = ScribbleSet::from_indexed(4, 4, &[1; 16]).unwrap();
    assert!(matches!(segment_image(&f.image, &small, None, &feats, &cfg, false, None), Err(Error::DimensionMismatch(_))));

    // Label 2 drawn, label 1 empty: still only one class.
    let gap = fixtures::dot_scribbles(8, 8, &[(1, 1, 2)], 1.0);
    assert!(matches!(segment_image(&f.image, &gap, None, &feats, &cfg, false, None), Err(Error::TooFewLabels(1))));
}

#[test]
fn label_count_selects_the_model() {
    let feats = FeatureConfig { bins: Some(8), ..Default::default() };
    let cfg = SegConfig { variant: Variant::L1, max_iter: 500, ..Default::default() };
    let f2 = fixtures::two_region(12, 0.0, 1);
    let two = segment_image(&f2.image, &fixtures::exact_scribbles(&f2), None, &feats, &cfg, false, None).unwrap();
    assert_eq!((two.priors.len(), two.result.maps.len()), (2, 1));

    let f3 = fixtures::three_region(12, 0.0, 1);
    let three = segment_image(&f3.image, &fixtures::exact_scribbles(&f3), None, &feats, &cfg, false, None).unwrap();
    assert_eq!((three.priors.len(), three.result.maps.len()), (3, 3));

    // A supplied codebook is used as is.
    let again = segment_image(&f2.image, &fixtures::exact_scribbles(&f2), Some(two.codebook.clone()), &feats, &cfg, false, None)
        .unwrap();
    assert_eq!(again.codebook, two.codebook);
    assert_eq!(again.result.maps, two.result.maps);
}

#[test]
fn cosegmentation_shares_one_codebook() {
    let (a, b) = fixtures::planted_pair(16, 1);
    let feats = FeatureConfig { bins: Some(8), ..Default::default() };
    let cs = cosegment_images(&[&a.image, &b.image], &feats, &CosegConfig { max_iter: 300, ..Default::default() }, false, None)
        .unwrap();
    assert_eq!(cs.assignments.len(), 2);
    assert!(cs.assignments.iter().all(|op| op.bins == cs.codebook.codebook.len()));
    assert_eq!(cs.result.maps.len(), 2);
}

#[test]
fn grey_and_alpha_images_decode_to_rgb() {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, 2, 1);
        enc.set_color(png::ColorType::GrayscaleAlpha);
        enc.set_depth(png::BitDepth::Eight);
        enc.write_header().unwrap().write_image_data(&[10, 255, 200, 0]).unwrap();
    }
    let im = io::decode_image(&out).unwrap();
    assert_eq!(im, Image::new(2, 1, 3, vec![10.0, 10.0, 10.0, 200.0, 200.0, 200.0]).unwrap());
}

proptest! {
    #[test]
    fn prob16_round_trip_and_threshold_agree(u in prop::collection::vec(0.0f64..=1.0, 12), t in 0.01f64..0.99) {
        let png = io::encode_prob16(4, 3, &u).unwrap();
        let (w, h, back) = io::decode_prob16(&png).unwrap();
        prop_assert_eq!((w, h), (4, 3));
        for (a, b) in u.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-15);
        }
        let client: Vec<u8> = back.iter().map(|&v| u8::from(v > t)).collect();
        prop_assert_eq!(io::quantized_labels(&[u.clone()], t), client);
        prop_assert_eq!(threshold_labels(&[back], t), io::quantized_labels(&[u], t));
    }

    #[test]
    fn raw_dump_is_exact(u in prop::collection::vec(-1e300f64..1e300, 6)) {
        let bytes = io::encode_raw(3, 2, &u).unwrap();
        prop_assert_eq!(bytes.len(), 16 + 48);
        prop_assert_eq!(io::decode_raw_map(&bytes).unwrap(), (3, 2, u));
    }
}
