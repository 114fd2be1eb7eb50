use crate::util::norm;

/// Power iteration on `KᵀK` from a fixed, non-symmetric start vector.
/// Returns the estimate of `‖K‖` (a lower bound up to convergence).
pub fn estimate_opnorm<F, G>(apply_k: F, apply_kt: G, primal_dim: usize, dual_dim: usize, iters: usize) -> f64
where
    F: Fn(&[f64], &mut [f64]),
    G: Fn(&[f64], &mut [f64]),
{
    if primal_dim == 0 {
        return 0.0;
    }
    let mut u: Vec<f64> = (0..primal_dim).map(|i| 1.0 + ((i * 2_654_435_761) % 1000) as f64 * 1e-3).collect();
    let mut ku = vec![0.0; dual_dim];
    let mut ktku = vec![0.0; primal_dim];
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let nu = norm(&u);
        if nu == 0.0 {
            return 0.0;
        }
        u.iter_mut().for_each(|v| *v /= nu);
        apply_k(&u, &mut ku);
        estimate = norm(&ku);
        apply_kt(&ku, &mut ktku);
        std::mem::swap(&mut u, &mut ktku);
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pd::{div_into, grad_into, GRAD_NORM_BOUND};

    #[test]
    fn identity_has_unit_norm() {
        let e = estimate_opnorm(|u, o| o.copy_from_slice(u), |p, o| o.copy_from_slice(p), 10, 10, 20);
        assert!((e - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gradient_norm_below_sqrt8() {
        for (w, h) in [(1, 1), (5, 3), (16, 16), (40, 7)] {
            let e = estimate_opnorm(
                |u, o| grad_into(u, w, h, o),
                |p, o| {
                    div_into(p, w, h, o);
                    o.iter_mut().for_each(|v| *v = -*v);
                },
                w * h,
                2 * w * h,
                500,
            );
            assert!(e <= GRAD_NORM_BOUND, "{w}x{h}: {e}");
        }
    }
}
