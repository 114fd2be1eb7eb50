/// Labels from relaxed maps. One map (or two complementary maps) gives
/// label 1 where the last map exceeds `t`; three or more maps give the
/// index of the largest value, ties to the lowest index.
pub fn threshold_labels(maps: &[Vec<f64>], t: f64) -> Vec<u8> {
    match maps {
        [] => Vec::new(),
        [u] | [_, u] => u.iter().map(|&v| u8::from(v > t)).collect(),
        _ => (0..maps[0].len())
            .map(|x| {
                let mut best = 0;
                for k in 1..maps.len() {
                    if maps[k][x] > maps[best][x] {
                        best = k;
                    }
                }
                best as u8
            })
            .collect(),
    }
}

/// Fraction of pixels where some map lies strictly inside `(0.05, 0.95)`.
pub fn near_binarity(maps: &[Vec<f64>]) -> f64 {
    let Some(n) = maps.first().map(Vec::len).filter(|&n| n > 0) else {
        return 0.0;
    };
    let count = (0..n).filter(|&x| maps.iter().any(|m| m[x] > 0.05 && m[x] < 0.95)).count();
    count as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_and_argmax() {
        assert_eq!(threshold_labels(&[vec![0.9, 0.2]], 0.5), vec![1, 0]);
        let eq = vec![vec![1.0 / 3.0; 4]; 3];
        assert_eq!(threshold_labels(&eq, 0.5), vec![0; 4]);
        let m = vec![vec![0.1, 0.5], vec![0.2, 0.1], vec![0.7, 0.4]];
        assert_eq!(threshold_labels(&m, 0.5), vec![2, 0]);
        // two complementary maps agree with the single-map form
        let u = vec![0.2, 0.5, 0.51];
        let comp: Vec<f64> = u.iter().map(|v| 1.0 - v).collect();
        assert_eq!(threshold_labels(&[comp, u.clone()], 0.5), threshold_labels(&[u], 0.5));
    }

    #[test]
    fn regions_are_nested_in_t() {
        let u: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64 / 100.0).collect();
        let lo = threshold_labels(&[u.clone()], 0.1);
        let hi = threshold_labels(&[u], 0.9);
        assert!(lo.iter().zip(&hi).all(|(a, b)| b <= a));
    }

    #[test]
    fn binarity_fraction() {
        assert_eq!(near_binarity(&[vec![0.0, 0.5, 1.0, 0.04]]), 0.25);
    }
}
