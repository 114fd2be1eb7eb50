use crate::{Error, Result};

const MAX_HALLEY: usize = 20;

fn halley_direct(z: f64, mut w: f64) -> f64 {
    for _ in 0..MAX_HALLEY {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// `W(e^log_z)`, the principal branch evaluated from the logarithm of its
/// argument so that arguments far outside the `f64` range stay usable.
pub fn lambert_w_exp(log_z: f64) -> f64 {
    if log_z == f64::NEG_INFINITY {
        return 0.0;
    }
    if log_z.is_nan() {
        return f64::NAN;
    }
    if log_z == f64::INFINITY {
        return f64::INFINITY;
    }
    if log_z <= 1.0 {
        let z = log_z.exp();
        if z < 1e-300 {
            // W(z) = z − z² + …; the correction is below resolution.
            return z;
        }
        return halley_direct(z, z.ln_1p());
    }
    // Solve w + ln w = log_z; the map is increasing and concave.
    let mut w = log_z - log_z.ln();
    if w <= 0.0 {
        w = 1.0;
    }
    for _ in 0..MAX_HALLEY {
        let f = w + w.ln() - log_z;
        let d1 = 1.0 + 1.0 / w;
        let d2 = -1.0 / (w * w);
        let step = 2.0 * f * d1 / (2.0 * d1 * d1 - f * d2);
        w -= step;
        if step.abs() <= 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// Principal branch of the Lambert W function for `z ≥ 0`.
pub fn lambert_w(z: f64) -> Result<f64> {
    if !(z >= 0.0) || z.is_infinite() {
        return Err(Error::Domain(format!("lambert_w expects a finite z ≥ 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z <= std::f64::consts::E {
        Ok(halley_direct(z, z.ln_1p()))
    } else {
        Ok(lambert_w_exp(z.ln()))
    }
}

/// Proximity operator of `τ·g` for one entry, where
/// `g(p) = p(c + (1/λ) ln(p/N))` on `p ≥ 0`:
/// `(τ/λ) W((λN/τ) exp(λ(r/τ − c) − 1))`.
pub fn prox_g_lambda_entry(r: f64, tau: f64, lambda: f64, n: f64, c: f64) -> f64 {
    let log_arg = (lambda * n / tau).ln() + lambda * (r / tau - c) - 1.0;
    tau / lambda * lambert_w_exp(log_arg)
}

/// Entrywise [`prox_g_lambda_entry`] with a shared step `τ`.
pub fn prox_g_lambda(r: &[f64], tau: f64, lambda: f64, n: f64, cost: &[f64]) -> Result<Vec<f64>> {
    if r.len() != cost.len() {
        return Err(Error::DimensionMismatch(format!("{} entries against {} costs", r.len(), cost.len())));
    }
    for (name, v) in [("tau", tau), ("lambda", lambda), ("N", n)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(r.iter().zip(cost).map(|(&r, &c)| prox_g_lambda_entry(r, tau, lambda, n, c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(lambert_w(0.0).unwrap(), 0.0);
        assert!((lambert_w(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        // Omega constant
        assert!((lambert_w(1.0).unwrap() - 0.567_143_290_409_783_8).abs() < 1e-15);
        assert!(lambert_w(-0.1).is_err());
        assert!(lambert_w(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn inverts_w_exp_w(z in 0.0f64..1e12) {
            let w = lambert_w(z).unwrap();
            prop_assert!((w * w.exp() - z).abs() <= 1e-12 * z.max(1.0));
        }

        #[test]
        fn log_form_satisfies_identity(l in -700.0f64..700.0) {
            let w = lambert_w_exp(l);
            prop_assert!(w >= 0.0);
            // w e^w = e^l  ⇔  ln w + w = l
            if w > 1e-300 {
                prop_assert!((w.ln() + w - l).abs() <= 1e-12 * l.abs().max(1.0));
            }
        }

        #[test]
        fn prox_is_first_order_optimal(
            r in -50.0f64..50.0, tau in 0.01f64..10.0, lambda in 0.1f64..100.0,
            n in 1.0f64..1e4, c in 0.0f64..1.0,
        ) {
            let p = prox_g_lambda_entry(r, tau, lambda, n, c);
            prop_assume!(p > 1e-200);
            // (p − r)/τ + c + (ln(p/N) + 1)/λ = 0
            let res = (p - r) / tau + c + ((p / n).ln() + 1.0) / lambda;
            prop_assert!(res.abs() <= 1e-9 * (1.0 + r.abs() / tau), "{res}");
        }
    }
}
