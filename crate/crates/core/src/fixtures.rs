//! Deterministic synthetic scenes with known partitions, used by the test
//! suites and the command-line demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{AssignmentOperator, Image, ScribbleSet};
use crate::ot::Histogram;

/// Image with its ground-truth label per pixel.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub image: Image,
    pub truth: Vec<u8>,
}

pub const GREENS: &[[f64; 3]] = &[[40.0, 120.0, 50.0], [60.0, 150.0, 70.0], [30.0, 90.0, 40.0], [80.0, 170.0, 60.0]];
pub const REDS: &[[f64; 3]] = &[[200.0, 50.0, 40.0], [230.0, 90.0, 60.0], [170.0, 30.0, 50.0], [220.0, 120.0, 100.0]];
pub const BLUES: &[[f64; 3]] = &[[40.0, 60.0, 200.0], [70.0, 100.0, 230.0], [30.0, 40.0, 150.0], [100.0, 140.0, 210.0]];
pub const GREYS: &[[f64; 3]] = &[[120.0, 120.0, 120.0], [150.0, 150.0, 150.0], [100.0, 100.0, 100.0], [180.0, 180.0, 180.0]];
pub const YELLOWS: &[[f64; 3]] = &[[220.0, 210.0, 60.0], [240.0, 230.0, 110.0], [190.0, 180.0, 40.0], [250.0, 200.0, 80.0]];

/// Renders a scene: each pixel takes a random colour of its region's
/// palette, plus uniform jitter of `±jitter` per channel, and with
/// probability `impulse` a uniformly random colour instead. Values are
/// rounded to integers in `0..=255`.
pub fn render<F>(width: usize, height: usize, label_of: F, palettes: &[&[[f64; 3]]], jitter: f64, impulse: f64, seed: u64) -> Fixture
where
    F: Fn(usize, usize) -> u8,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(width * height * 3);
    let mut truth = Vec::with_capacity(width * height);
    for i in 0..height {
        for j in 0..width {
            let l = label_of(i, j);
            truth.push(l);
            let colour: [f64; 3] = if rng.random::<f64>() < impulse {
                [rng.random_range(0.0..=255.0), rng.random_range(0.0..=255.0), rng.random_range(0.0..=255.0)]
            } else {
                let p = palettes[l as usize];
                let mut c = p[rng.random_range(0..p.len())];
                if jitter > 0.0 {
                    for v in &mut c {
                        *v += rng.random_range(-jitter..=jitter);
                    }
                }
                c
            };
            data.extend(colour.iter().map(|v| v.round().clamp(0.0, 255.0)));
        }
    }
    Fixture { image: Image::new(width, height, 3, data).expect("non-empty scene"), truth }
}

fn in_disk(i: usize, j: usize, ci: f64, cj: f64, r: f64) -> bool {
    let (di, dj) = (i as f64 + 0.5 - ci, j as f64 + 0.5 - cj);
    di * di + dj * dj <= r * r
}

/// A disk (label 1) on a background (label 0).
pub fn two_region(size: usize, impulse: f64, seed: u64) -> Fixture {
    let s = size as f64;
    render(size, size, |i, j| u8::from(in_disk(i, j, 0.5 * s, 0.45 * s, 0.3 * s)), &[GREENS, REDS], 6.0, impulse, seed)
}

/// Background (0), a disk (1) and a band along the bottom (2).
pub fn three_region(size: usize, impulse: f64, seed: u64) -> Fixture {
    let s = size as f64;
    render(
        size,
        size,
        |i, j| {
            if (i as f64) >= 0.75 * s {
                2
            } else if in_disk(i, j, 0.38 * s, 0.5 * s, 0.24 * s) {
                1
            } else {
                0
            }
        },
        &[GREENS, REDS, BLUES],
        6.0,
        impulse,
        seed,
    )
}

/// The same object (label 1) on two different backgrounds, placed at
/// different positions.
pub fn planted_pair(size: usize, seed: u64) -> (Fixture, Fixture) {
    let s = size as f64;
    let a = render(size, size, |i, j| u8::from(in_disk(i, j, 0.4 * s, 0.4 * s, 0.25 * s)), &[GREENS, REDS], 6.0, 0.0, seed);
    let b = render(size, size, |i, j| u8::from(in_disk(i, j, 0.6 * s, 0.55 * s, 0.25 * s)), &[BLUES, REDS], 6.0, 0.0, seed + 1);
    (a, b)
}

/// One centred disk covering `base_fraction · scale` of each image, on a
/// different background per image.
pub fn scaled_objects(size: usize, base_fraction: f64, scales: &[f64], seed: u64) -> Vec<Fixture> {
    let backgrounds = [GREENS, BLUES, GREYS, YELLOWS];
    let s = size as f64;
    let base = s * (base_fraction / std::f64::consts::PI).sqrt();
    scales
        .iter()
        .enumerate()
        .map(|(k, &scale)| {
            let r = base * scale.sqrt();
            render(
                size,
                size,
                |i, j| u8::from(in_disk(i, j, 0.5 * s, 0.5 * s, r)),
                &[backgrounds[k % backgrounds.len()], REDS],
                6.0,
                0.0,
                seed + k as u64,
            )
        })
        .collect()
}

/// Normalized histogram of every ground-truth region.
pub fn truth_priors(op: &AssignmentOperator, truth: &[u8], regions: usize) -> Vec<Histogram> {
    (0..regions)
        .map(|k| {
            let mask: Vec<f64> = truth.iter().map(|&l| f64::from(u8::from(l as usize == k))).collect();
            let h = op.apply(&mask);
            let m: f64 = h.iter().sum();
            Histogram::new(h.into_iter().map(|v| v / m).collect()).expect("nonnegative")
        })
        .collect()
}

/// Scribbles labelling every pixel with its truth (`label + 1`).
pub fn exact_scribbles(fixture: &Fixture) -> ScribbleSet {
    let idx: Vec<u8> = fixture.truth.iter().map(|&l| l + 1).collect();
    ScribbleSet::from_indexed(fixture.image.width, fixture.image.height, &idx).expect("labels fit")
}

/// Scribbles: a filled disk of radius `r` at each `(row, col, label)`.
pub fn dot_scribbles(width: usize, height: usize, dots: &[(usize, usize, u8)], r: f64) -> ScribbleSet {
    let mut idx = vec![0u8; width * height];
    for &(ci, cj, l) in dots {
        for i in 0..height {
            for j in 0..width {
                let (di, dj) = (i as f64 - ci as f64, j as f64 - cj as f64);
                if di * di + dj * dj <= r * r {
                    idx[i * width + j] = l;
                }
            }
        }
    }
    ScribbleSet::from_indexed(width, height, &idx).expect("labels fit")
}

/// Two colours split by a vertical line, without noise.
pub fn two_colour(size: usize) -> Fixture {
    render(size, size, |_, j| u8::from(j >= size / 2), &[&GREENS[..1], &REDS[..1]], 0.0, 0.0, 0)
}

/// The two-phase scenes used to compare solver variants, all 32×32.
pub fn catalog() -> Vec<(&'static str, Fixture)> {
    let (a, b) = planted_pair(32, 3);
    vec![
        ("two_colour", two_colour(32)),
        ("disk", two_region(32, 0.0, 1)),
        ("disk_noisy", two_region(32, 0.02, 7)),
        ("band", render(32, 32, |_, j| u8::from(j >= 19), &[GREYS, YELLOWS], 6.0, 0.0, 11)),
        ("twin_a", a),
        ("twin_b", b),
    ]
}
