/// Upper bound on the operator norm of [`grad`] on any grid.
pub const GRAD_NORM_BOUND: f64 = 2.828_427_124_746_190_3;

/// Backward differences with zero values outside the grid:
/// `v1(i,j) = u(i,j) − u(i−1,j)` along rows and `v2(i,j) = u(i,j) − u(i,j−1)`
/// along columns. Output is `[v1; v2]`.
pub fn grad(u: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; 2 * u.len()];
    grad_into(u, width, height, &mut out);
    out
}

pub fn grad_into(u: &[f64], width: usize, height: usize, out: &mut [f64]) {
    let n = width * height;
    assert_eq!(u.len(), n);
    assert_eq!(out.len(), 2 * n);
    let (v1, v2) = out.split_at_mut(n);
    for i in 0..height {
        let row = i * width;
        for j in 0..width {
            let x = row + j;
            v1[x] = if i > 0 { u[x] - u[x - width] } else { u[x] };
            v2[x] = if j > 0 { u[x] - u[x - 1] } else { u[x] };
        }
    }
}

/// Negative adjoint of [`grad`].
pub fn div(v: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len() / 2];
    div_into(v, width, height, &mut out);
    out
}

pub fn div_into(v: &[f64], width: usize, height: usize, out: &mut [f64]) {
    let n = width * height;
    assert_eq!(v.len(), 2 * n);
    assert_eq!(out.len(), n);
    let (v1, v2) = v.split_at(n);
    for i in 0..height {
        let row = i * width;
        for j in 0..width {
            let x = row + j;
            let mut s = -v1[x] - v2[x];
            if i + 1 < height {
                s += v1[x + width];
            }
            if j + 1 < width {
                s += v2[x + 1];
            }
            out[x] = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_stencil() {
        // 1 row, 2 columns
        let g = grad(&[1.0, 1.0], 2, 1);
        assert_eq!(&g[2..], &[1.0, 0.0]);
        assert_eq!(&g[..2], &[1.0, 1.0]);
        assert!(grad(&[0.0; 6], 3, 2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn isotropic_tv_of_single_pixel() {
        let mut u = vec![0.0; 9];
        u[4] = 1.0;
        let g = grad(&u, 3, 3);
        let tv: f64 = (0..9).map(|x| g[x].hypot(g[9 + x])).sum();
        // centre sqrt(2), right and below neighbours 1 each
        assert!((tv - (2f64.sqrt() + 2.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn div_is_negative_adjoint(
            (w, h, u, v) in (1usize..7, 1usize..7).prop_flat_map(|(w, h)| (
                Just(w), Just(h),
                proptest::collection::vec(-1.0f64..1.0, w * h),
                proptest::collection::vec(-1.0f64..1.0, 2 * w * h),
            ))
        ) {
            let g = grad(&u, w, h);
            let d = div(&v, w, h);
            let lhs: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
            let rhs: f64 = -u.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
