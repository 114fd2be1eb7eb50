use otseg_core::coseg::{coseg_energy, coseg_multi, coseg_pair, CosegConfig, CosegInput, CosegVariant};
use otseg_core::features::AssignmentOperator;
use otseg_core::fixtures;
use otseg_core::models::Variant;
use otseg_core::ot::CostMatrix;
use otseg_core::pipeline::{assign, build_codebook, FeatureConfig};
use otseg_core::Error;

fn ops(n: usize, bins: usize, seed: u32) -> Vec<AssignmentOperator> {
    (0..n)
        .map(|k| {
            let b = (0..16).map(|x| (x * 7 + k as u32 * 3 + seed) % bins as u32).collect();
            AssignmentOperator::new(bins, 4, 4, b).unwrap()
        })
        .collect()
}

fn planted(size: usize, bins: usize) -> (Vec<AssignmentOperator>, Vec<Vec<u8>>) {
    let (a, b) = fixtures::planted_pair(size, 2);
    let cb = build_codebook(&[&a.image, &b.image], &FeatureConfig { bins: Some(bins), seed: 1, ..Default::default() }).unwrap();
    (vec![assign(&a.image, &cb).unwrap(), assign(&b.image, &cb).unwrap()], vec![a.truth, b.truth])
}

#[test]
fn model_and_input_checks() {
    let three = ops(3, 4, 0);
    let input = CosegInput { assignments: &three, cost: None };
    let pair = CosegConfig::default();
    assert!(matches!(coseg_multi(&input, &pair, false, None), Err(Error::InvalidParameter(_))));

    let seven = ops(7, 4, 0);
    let multi = CosegConfig { variant: CosegVariant::PairwiseMulti, ..Default::default() };
    assert!(matches!(coseg_multi(&CosegInput { assignments: &seven, cost: None }, &multi, false, None), Err(Error::TooLarge(_))));

    let bary = CosegConfig { variant: CosegVariant::BarycentricL1, dissimilarity: Variant::MkExact, ..Default::default() };
    let cost = CostMatrix::l1(4);
    let with_cost = CosegInput { assignments: &three, cost: Some(&cost) };
    assert!(matches!(coseg_multi(&with_cost, &bary, false, None), Err(Error::Unsupported(_))));

    let mut mixed = ops(2, 4, 0);
    mixed[1] = AssignmentOperator::new(5, 4, 4, vec![0; 16]).unwrap();
    assert!(matches!(coseg_pair(&CosegInput { assignments: &mixed, cost: None }, &pair, false, None), Err(Error::DimensionMismatch(_))));

    let short = CosegConfig { rho_per_image: Some(vec![1.0]), ..Default::default() };
    assert!(matches!(coseg_pair(&CosegInput { assignments: &three[..2], cost: None }, &short, false, None), Err(Error::InvalidParameter(_))));

    let one = ops(1, 4, 0);
    assert!(coseg_multi(&CosegInput { assignments: &one, cost: None }, &multi, false, None).is_err());
}

#[test]
fn transport_energy_is_infinite_for_unequal_areas() {
    let two = ops(2, 4, 1);
    let cost = CostMatrix::l1(4);
    let input = CosegInput { assignments: &two, cost: Some(&cost) };
    let cfg = CosegConfig { dissimilarity: Variant::MkExact, ..Default::default() };
    let e = coseg_energy(&input, &[vec![1.0; 16], vec![0.0; 16]], None, &cfg).unwrap();
    assert_eq!(e, f64::INFINITY);
    let e = coseg_energy(&input, &[vec![0.5; 16], vec![0.5; 16]], None, &cfg).unwrap();
    assert!(e.is_finite());
}

#[test]
fn pairwise_minimizer_beats_the_planted_masks() {
    let (ops, truth) = planted(24, 12);
    let input = CosegInput { assignments: &ops, cost: None };
    let cfg = CosegConfig { rho: 1.0, delta: 0.6, tol: 1e-8, max_iter: 100_000, ..Default::default() };
    let r = coseg_pair(&input, &cfg, true, None).unwrap();
    let truth_maps: Vec<Vec<f64>> = truth.iter().map(|t| t.iter().map(|&v| f64::from(v)).collect()).collect();
    let e_truth = coseg_energy(&input, &truth_maps, None, &cfg).unwrap();
    assert!(r.energy.unwrap() <= e_truth + 1e-6 * e_truth.abs().max(1.0));
    assert_eq!(r.masks.len(), 2);
    assert!(r.barycenter.is_none());
}

#[test]
fn identical_images_get_identical_maps() {
    let (mut ops, _) = planted(16, 8);
    ops[1] = ops[0].clone();
    ops.push(ops[0].clone());
    let input = CosegInput { assignments: &ops, cost: None };
    let cfg = CosegConfig { variant: CosegVariant::PairwiseMulti, delta: 0.6, tol: 1e-8, max_iter: 50_000, ..Default::default() };
    let r = coseg_multi(&input, &cfg, false, None).unwrap();
    for m in &r.maps[1..] {
        let d = m.iter().zip(&r.maps[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-4, "maps differ by {d}");
    }
}

#[test]
fn zero_balloon_selects_nothing() {
    let (ops, _) = planted(16, 8);
    let input = CosegInput { assignments: &ops, cost: None };
    for variant in [CosegVariant::Pairwise, CosegVariant::BarycentricL1] {
        let cfg = CosegConfig { variant, delta: 0.0, ..Default::default() };
        let r = coseg_multi(&input, &cfg, false, None).unwrap();
        assert!(r.masks.iter().flatten().all(|&v| v == 0), "{variant}");
    }
}

#[test]
fn barycenter_is_the_median_of_the_returned_histograms() {
    let scenes = fixtures::scaled_objects(24, 0.2, &[1.0, 1.5, 2.5], 3);
    let images: Vec<_> = scenes.iter().map(|f| &f.image).collect();
    let cb = build_codebook(&images, &FeatureConfig { bins: Some(10), seed: 2, ..Default::default() }).unwrap();
    let ops: Vec<_> = images.iter().map(|im| assign(im, &cb).unwrap()).collect();
    let input = CosegInput { assignments: &ops, cost: None };
    let cfg = CosegConfig { variant: CosegVariant::BarycentricL1, delta: 1.0, tol: 1e-9, max_iter: 200_000, ..Default::default() };
    let r = coseg_multi(&input, &cfg, true, None).unwrap();
    let b = r.barycenter.clone().unwrap();
    let hists: Vec<Vec<f64>> = ops.iter().zip(&r.maps).map(|(op, u)| op.apply(u)).collect();
    for (bin, &v) in b.iter().enumerate() {
        let mut vals: Vec<f64> = hists.iter().map(|h| h[bin]).collect();
        vals.sort_by(f64::total_cmp);
        assert!((v - vals[1]).abs() < 1e-3 * (1.0 + vals[1]), "bin {bin}: {v} vs median {}", vals[1]);
    }
    let e = coseg_energy(&input, &r.maps, Some(&b), &cfg).unwrap();
    assert!((e - r.energy.unwrap()).abs() < 1e-9 * e.abs().max(1.0));
    assert!(coseg_energy(&input, &r.maps, None, &cfg).is_err());
}
