//! Small numeric helpers shared across modules.

/// Compensated (Neumaier) summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

pub fn norm2(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable `ln(1 + e^u)`.
pub fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// Numerically stable `1 / (1 + e^{-u})`.
pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Shortest decimal that parses back to the same `f64`. Switches to
/// exponent form outside `[1e-5, 1e16)` to keep fields short.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_float_round_trips() {
        for v in [0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 4e-300, -2.5e20, 123456.789, f64::MAX, f64::MIN_POSITIVE] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(1e-20), "1e-20");
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn softplus_is_stable_for_large_arguments() {
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn logistic_symmetry() {
        for u in [-30.0, -1.0, 0.0, 0.5, 40.0] {
            assert!((logistic(u) + logistic(-u) - 1.0).abs() < 1e-15);
        }
    }
}
