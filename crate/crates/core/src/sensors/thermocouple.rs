//! Type-B thermocouple transfer function.

use super::SensorError;

pub const THERMOCOUPLE_RANGE: (f64, f64) = (0.0, 1820.0);

/// Coefficients of `T^1 .. T^8`; the polynomial yields microvolts.
pub const THERMOCOUPLE_COEFFS: [f64; 8] = [
    -2.4674601620e-1,
    5.9102111169e-3,
    -1.4307123430e-6,
    2.1509149750e-9,
    -3.1757800720e-12,
    2.4010367459e-15,
    -9.0928148159e-19,
    1.3299505137e-22,
];

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Compensated Horner evaluation of `sum c[i] x^i`.
fn horner_comp(c: &[f64], x: f64) -> f64 {
    let n = c.len();
    let mut s = c[n - 1];
    let mut err = 0.0;
    for &ci in c[..n - 1].iter().rev() {
        let (p, pe) = two_prod(s, x);
        let (t, se) = two_sum(p, ci);
        s = t;
        err = err * x + (pe + se);
    }
    s + err
}

/// Thermocouple output in millivolts for a junction temperature in degrees Celsius.
pub fn thermocouple_transfer(t: f64) -> Result<f64, SensorError> {
    let (lo, hi) = THERMOCOUPLE_RANGE;
    if !(lo..=hi).contains(&t) {
        return Err(SensorError::OutOfRange { value: t, lower: lo, upper: hi });
    }
    let mut c = [0.0; 9];
    c[1..].copy_from_slice(&THERMOCOUPLE_COEFFS);
    Ok(horner_comp(&c, t) * 1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_zero() {
        assert_eq!(thermocouple_transfer(0.0).unwrap(), 0.0);
    }

    #[test]
    fn range_checked() {
        assert!(thermocouple_transfer(-1.0).is_err());
        assert!(thermocouple_transfer(1820.5).is_err());
        assert!(thermocouple_transfer(f64::NAN).is_err());
    }

    #[test]
    fn full_scale_magnitude() {
        let v = thermocouple_transfer(1820.0).unwrap();
        assert!((v - 13.82).abs() < 0.01, "{v}");
    }
}
