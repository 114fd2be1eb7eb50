use otseg_core::features::{build_assignment, extract_features, kmeans, AssignmentOperator, FeatureKind};
use otseg_core::fixtures::{self, Fixture};
use otseg_core::models::{energy, segment_multi_phase, segment_two_phase, CostConfig, SegConfig, SegInput, Variant};
use otseg_core::ot::{CostMatrix, Histogram};
use otseg_core::Error;
use proptest::prelude::*;

struct Setup {
    fixture: Fixture,
    op: AssignmentOperator,
    priors: Vec<Histogram>,
    cost: CostMatrix,
}

fn setup(fixture: Fixture, bins: usize, regions: usize) -> Setup {
    let feats = extract_features(&fixture.image, FeatureKind::Rgb);
    let cb = kmeans(&feats, bins, 3, 100).unwrap();
    let op = build_assignment(&feats, &cb).unwrap();
    let priors = fixtures::truth_priors(&op, &fixture.truth, regions);
    let cost = CostConfig::default().build(&cb.centroids, &cb.centroids).unwrap();
    Setup { fixture, op, priors, cost }
}

impl Setup {
    fn input(&self) -> SegInput<'_> {
        SegInput { assignment: &self.op, priors: &self.priors, cost: Some(&self.cost) }
    }
}

fn tight(variant: Variant, rho: f64) -> SegConfig {
    SegConfig { variant, rho, tol: 1e-8, max_iter: 100_000, ..Default::default() }
}

#[test]
fn minimizer_beats_the_truth_indicator() {
    let s = setup(fixtures::two_region(12, 0.05, 2), 8, 2);
    let truth: Vec<f64> = s.fixture.truth.iter().map(|&l| f64::from(l)).collect();
    for variant in [Variant::L1, Variant::MkExact, Variant::SinkhornProx] {
        let cfg = tight(variant, 0.5);
        let r = segment_two_phase(&s.input(), &cfg, true, None).unwrap();
        let e = r.energy.unwrap();
        let e_truth = energy(&s.input(), &[truth.clone()], &cfg).unwrap();
        assert!(e <= e_truth + 1e-4 * e_truth.abs().max(1.0), "{variant}: {e} > {e_truth}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn minimizer_beats_random_relaxed_maps(seed in 0u64..1000, u in prop::collection::vec(0.0f64..=1.0, 64)) {
        let s = setup(fixtures::two_region(8, 0.05, seed), 6, 2);
        let cfg = tight(Variant::L1, 0.4);
        let r = segment_two_phase(&s.input(), &cfg, true, None).unwrap();
        let e = r.energy.unwrap();
        let other = energy(&s.input(), &[u], &cfg).unwrap();
        prop_assert!(e <= other + 1e-5 * other.abs().max(1.0), "{} > {}", e, other);
    }
}

#[test]
fn multi_phase_maps_lie_on_the_simplex() {
    let s = setup(fixtures::three_region(20, 0.02, 1), 12, 3);
    let r = segment_multi_phase(&s.input(), &SegConfig { max_iter: 3000, ..Default::default() }, false, None).unwrap();
    assert_eq!(r.maps.len(), 3);
    for x in 0..s.op.pixels() {
        let sum: f64 = r.maps.iter().map(|m| m[x]).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(r.maps.iter().all(|m| m[x] >= -1e-12));
    }
    assert!(r.labels.iter().all(|&l| l < 3));
}

#[test]
fn two_priors_through_the_multi_phase_model_agree_with_two_phase() {
    let s = setup(fixtures::two_region(16, 0.0, 6), 8, 2);
    let cfg = tight(Variant::L1, 0.5);
    let two = segment_two_phase(&s.input(), &cfg, false, None).unwrap();
    let multi = segment_multi_phase(&s.input(), &cfg, false, None).unwrap();
    assert_eq!(two.labels, multi.labels);
}

#[test]
fn monitor_sees_every_tenth_iteration_and_can_cancel() {
    let s = setup(fixtures::two_region(16, 0.0, 1), 8, 2);
    let cfg = SegConfig { tol: 0.0, max_iter: 100, ..Default::default() };
    let mut seen = vec![];
    let mut record = |it: usize, res: f64| {
        assert!(res.is_finite());
        seen.push(it);
        true
    };
    segment_two_phase(&s.input(), &cfg, false, Some(&mut record)).unwrap();
    assert_eq!(seen, (1..=10).map(|k| 10 * k).collect::<Vec<_>>());

    let mut stop = |it: usize, _| it < 30;
    let err = segment_two_phase(&s.input(), &cfg, false, Some(&mut stop)).unwrap_err();
    assert!(matches!(err, Error::Cancelled));
}

#[test]
fn invalid_configurations_are_rejected() {
    let s = setup(fixtures::two_region(8, 0.0, 1), 4, 2);
    for cfg in [
        SegConfig { rho: -1.0, ..Default::default() },
        SegConfig { threshold: 1.0, ..Default::default() },
        SegConfig { lambda: 0.0, ..Default::default() },
        SegConfig { max_iter: 0, ..Default::default() },
    ] {
        assert!(matches!(segment_two_phase(&s.input(), &cfg, false, None), Err(Error::InvalidParameter(_))));
    }
    let no_cost = SegInput { cost: None, ..s.input() };
    assert!(segment_two_phase(&no_cost, &SegConfig::default(), false, None).is_err());
}

#[test]
fn stronger_regularization_never_lengthens_the_boundary() {
    let s = setup(fixtures::two_region(24, 0.05, 8), 8, 2);
    let perimeter = |labels: &[u8]| {
        let w = 24;
        let mut p = 0;
        for y in 0..w {
            for x in 0..w {
                let v = labels[y * w + x];
                if x + 1 < w && labels[y * w + x + 1] != v {
                    p += 1;
                }
                if y + 1 < w && labels[(y + 1) * w + x] != v {
                    p += 1;
                }
            }
        }
        p
    };
    let lengths: Vec<usize> = [0.05, 0.5, 2.0]
        .iter()
        .map(|&rho| perimeter(&segment_two_phase(&s.input(), &tight(Variant::L1, rho), false, None).unwrap().labels))
        .collect();
    assert!(lengths.windows(2).all(|w| w[1] <= w[0]), "{lengths:?}");
}
