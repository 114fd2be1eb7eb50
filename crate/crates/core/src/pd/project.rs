/// Clamp to `[0, 1]`.
pub fn project_box(u: &mut [f64]) {
    for v in u {
        *v = v.clamp(0.0, 1.0);
    }
}

pub fn project_nonneg(r: &mut [f64]) {
    for v in r {
        *v = v.max(0.0);
    }
}

/// Clamp to `[−1, 1]` entrywise.
pub fn project_linf_ball(h: &mut [f64]) {
    for v in h {
        *v = v.clamp(-1.0, 1.0);
    }
}

/// Radial clamp of each pixel's vector `(v1(x), v2(x))` to norm `rho`, for
/// a field laid out as `[v1; v2]`.
pub fn project_linf2_ball(v: &mut [f64], rho: f64) {
    let n = v.len() / 2;
    let (v1, v2) = v.split_at_mut(n);
    for (a, b) in v1.iter_mut().zip(v2.iter_mut()) {
        let sq = *a * *a + *b * *b;
        if sq > rho * rho {
            let norm = sq.sqrt();
            let s = if rho > 0.0 { rho / norm } else { 0.0 };
            *a *= s;
            *b *= s;
        }
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = mass}` by sort-based thresholding.
pub fn project_simplex(v: &mut [f64], mass: f64) {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, &x) in s.iter().enumerate() {
        acc += x;
        let t = (acc - mass) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    for x in v {
        *x = (*x - theta).max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_examples() {
        let mut v = vec![3.0, 4.0];
        project_linf2_ball(&mut v, 1.0);
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        let mut s = vec![2.0, 0.0];
        project_simplex(&mut s, 1.0);
        assert_eq!(s, vec![1.0, 0.0]);
        let mut s = vec![0.0, 0.0];
        project_simplex(&mut s, 1.0);
        assert_eq!(s, vec![0.5, 0.5]);
    }

    /// Bisection on the threshold, independent of the sort-based routine.
    fn simplex_oracle(v: &[f64]) -> Vec<f64> {
        let (mut lo, mut hi) = (v.iter().copied().fold(f64::INFINITY, f64::min) - 1.0, v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s: f64 = v.iter().map(|x| (x - mid).max(0.0)).sum();
            if s > 1.0 { lo = mid } else { hi = mid }
        }
        v.iter().map(|x| (x - 0.5 * (lo + hi)).max(0.0)).collect()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    proptest! {
        #[test]
        fn simplex_matches_bisection(v in proptest::collection::vec(-3.0f64..3.0, 1..8)) {
            let mut p = v.clone();
            project_simplex(&mut p, 1.0);
            let o = simplex_oracle(&v);
            prop_assert!(dist(&p, &o) < 1e-9);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn projections_idempotent_and_nonexpansive(
            x in proptest::collection::vec(-3.0f64..3.0, 6),
            y in proptest::collection::vec(-3.0f64..3.0, 6),
            rho in 0.1f64..2.0,
        ) {
            let ops: Vec<Box<dyn Fn(&mut [f64])>> = vec![
                Box::new(project_box),
                Box::new(project_nonneg),
                Box::new(project_linf_ball),
                Box::new(move |v: &mut [f64]| project_linf2_ball(v, rho)),
                Box::new(|v: &mut [f64]| project_simplex(v, 1.0)),
            ];
            for op in &ops {
                let (mut px, mut py) = (x.clone(), y.clone());
                op(&mut px);
                op(&mut py);
                let mut ppx = px.clone();
                op(&mut ppx);
                prop_assert!(dist(&px, &ppx) < 1e-12);
                prop_assert!(dist(&px, &py) <= dist(&x, &y) + 1e-12);
            }
        }
    }
}
