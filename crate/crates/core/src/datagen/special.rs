//! Normal CDF and gamma quantiles for the copula margins.

use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

/// Guaranteed absolute accuracy of [`gamma_quantile`] on the unit-rate scale;
/// the iteration itself stops on a much tighter relative criterion.
pub const QUANTILE_TOL: f64 = 1e-10;

/// `Φ(z)` for the standard normal.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Quantile of Gamma(shape, rate 1) at lower-tail probability `p`, where
/// `q = 1 - p` is passed separately so upper-tail targets keep full precision.
pub fn gamma_quantile(shape: f64, p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if q <= 0.0 {
        return f64::INFINITY;
    }
    let upper = p > 0.5;
    // residual in the tail with more precision; positive when x is too large
    let residual = |x: f64| {
        if upper {
            q - gamma_ur(shape, x)
        } else {
            gamma_lr(shape, x) - p
        }
    };
    let log_norm = ln_gamma(shape);
    let density = |x: f64| ((shape - 1.0) * x.ln() - x - log_norm).exp();

    let mut lo = 0.0;
    let mut hi = shape.max(1.0);
    while residual(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = residual(x);
        if r == 0.0 {
            return x;
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let f = density(x);
        let newton = if f > 0.0 { x - r / f } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        // relative stopping rule so tiny quantiles are resolved too
        let scale = next.max(f64::MIN_POSITIVE);
        if (next - x).abs() <= 1e-15 * scale || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}
