//! Closed-form time integrals of oscillating exponentials.
//!
//! Dimensionless forms take phases `x = omega * tau`; the scaled-time forms
//! multiply back the powers of `tau`. All are analytic at zero phase and use
//! series where the closed form cancels.

use crate::C64;

/// Below this `|beta|` the ordered integral switches to its series form.
pub const ORDERED_SERIES_THRESHOLD: f64 = 1e-3;

/// `sin(x) / x`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `(1 - cos x) / x^2`, written as `sinc(x/2)^2 / 2`.
#[inline]
pub fn one_minus_cos_over_sq(x: f64) -> f64 {
    let s = sinc(0.5 * x);
    0.5 * s * s
}

/// `(sin x - x) / x^2`.
#[inline]
pub fn sin_minus_x_over_sq(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        // -x/3! + x^3/5! - x^5/7! + x^7/9! - x^9/11!
        x * (-1.0 / 6.0
            + x2 * (1.0 / 120.0
                + x2 * (-1.0 / 5040.0 + x2 * (1.0 / 362_880.0 - x2 / 39_916_800.0))))
    } else {
        (x.sin() - x) / (x * x)
    }
}

/// `E(x) = int_0^1 exp(i x u) du`.
#[inline]
pub fn unit_exp_integral(x: f64) -> C64 {
    let h = 0.5 * x;
    let sh = sinc(h);
    // (1 - cos x)/x = 2 sin^2(x/2)/x = x/2 * sinc^2(x/2)
    C64::new(sinc(x), h * sh * sh)
}

/// `J(omega, tau) = int_0^tau exp(i omega s) ds` with `tau` in scaled units.
#[inline]
pub fn exp_integral(omega: f64, tau: f64) -> C64 {
    unit_exp_integral(omega * tau) * tau
}

/// `F_p(alpha) = int_0^1 u^p exp(i alpha u) du` for `p = 0..=p_max`.
pub fn moment_integrals(alpha: f64, p_max: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(p_max + 1);
    if alpha.abs() <= 8.0 {
        // sum_n (i alpha)^n / n! / (p + n + 1)
        for p in 0..=p_max {
            let mut term = C64::new(1.0, 0.0);
            let mut acc = C64::new(0.0, 0.0);
            for n in 0..80 {
                let contrib = term / (p + n + 1) as f64;
                acc += contrib;
                if n > 2 && contrib.norm() < 1e-18 * acc.norm().max(1e-300) {
                    break;
                }
                term *= C64::new(0.0, alpha / (n + 1) as f64);
            }
            out.push(acc);
        }
    } else {
        // F_p = (e^{i alpha} - p F_{p-1}) / (i alpha), stable for |alpha| > p
        let e = C64::from_polar(1.0, alpha);
        let inv = C64::new(0.0, -1.0 / alpha);
        out.push(unit_exp_integral(alpha));
        for p in 1..=p_max {
            let prev = out[p - 1];
            out.push((e - prev * p as f64) * inv);
        }
    }
    out
}

/// Ordered unit-square integral
/// `int_0^1 ds exp(i alpha s) int_0^s du exp(i beta u)`.
pub fn unit_ordered_integral(alpha: f64, beta: f64) -> C64 {
    if beta.abs() >= ORDERED_SERIES_THRESHOLD {
        (unit_exp_integral(alpha + beta) - unit_exp_integral(alpha)) / C64::new(0.0, beta)
    } else {
        // sum_k (i beta)^k / (k+1)! F_{k+1}(alpha); |beta| < 1e-3 converges in a few terms
        const TERMS: usize = 7;
        let f = moment_integrals(alpha, TERMS);
        let mut acc = C64::new(0.0, 0.0);
        let mut coeff = C64::new(1.0, 0.0);
        for k in 0..TERMS {
            coeff /= (k + 1) as f64;
            acc += coeff * f[k + 1];
            coeff *= C64::new(0.0, beta);
        }
        acc
    }
}

/// `I(a, b, tau) = int_0^tau ds exp(i a s) int_0^s du exp(i b u)`.
#[inline]
pub fn ordered_integral(a: f64, b: f64, tau: f64) -> C64 {
    unit_ordered_integral(a * tau, b * tau) * (tau * tau)
}
