// Scalar helpers routed through libm so results do not depend on the
// presence of std.

use num_complex::Complex64;

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub(crate) fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

/// `log(1 + e^x)` without overflow for large positive `x`.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + ln_1p(exp(-x))
    } else {
        ln_1p(exp(x))
    }
}

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// `e^z` for complex `z`.
#[inline]
pub(crate) fn cexp(z: Complex64) -> Complex64 {
    let m = exp(z.re);
    Complex64::new(m * cos(z.im), m * sin(z.im))
}

/// Principal logarithm.
#[inline]
pub(crate) fn cln(z: Complex64) -> Complex64 {
    Complex64::new(ln(hypot(z.re, z.im)), atan2(z.im, z.re))
}

/// Wraps an angle into `(-π, π]`.
#[inline]
pub(crate) fn wrap_angle(mut theta: f64) -> f64 {
    use core::f64::consts::PI;
    let two_pi = 2.0 * PI;
    if theta > PI || theta <= -PI {
        theta -= two_pi * libm::floor((theta + PI) / two_pi);
        if theta <= -PI {
            theta += two_pi;
        }
    }
    theta
}

/// Numerically stable `log Σ exp(x_i)`; `-inf` for an empty slice.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| exp(x - m)).sum();
    m + ln(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_stable_at_extremes() {
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert!((softplus(0.0) - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn logistic_saturates() {
        assert!(logistic(30.0) >= 1.0 - 1e-13);
        assert!(logistic(-30.0) <= 1e-13);
        assert_eq!(logistic(0.0), 0.5);
    }

    #[test]
    fn wrap_angle_range() {
        use core::f64::consts::PI;
        for k in -5..=5 {
            let t = wrap_angle(0.3 + 2.0 * PI * k as f64);
            assert!((t - 0.3).abs() < 1e-12, "{k}: {t}");
        }
        assert!((wrap_angle(PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
    }
}
