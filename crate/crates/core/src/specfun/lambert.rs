use std::f64::consts::E;

use crate::error::{Error, Result};

const BRANCH: f64 = -1.0 / E;

/// Principal branch W0(x) of the Lambert W function, x >= -1/e.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < BRANCH - 1e-15 {
        return Err(Error::domain("lambert_w0", format!("argument below -1/e: {x}")));
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if x <= BRANCH {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut w = if x < -0.25 {
        let p = (2.0 * (E * x + 1.0)).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        0.5 * (1.0 + x).ln() + 0.3 * x / (1.0 + x)
    } else {
        let l = x.ln();
        l - l.ln()
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-15);
        assert!((lambert_w0(1.0).unwrap() - 0.5671432904097838).abs() < 1e-15);
        assert_eq!(lambert_w0(BRANCH).unwrap(), -1.0);
    }

    #[test]
    fn inverse_relation() {
        for &x in &[-0.36, -0.2, 0.01, 0.7, 5.0, 1e3, 1e8, 1e200] {
            let w = lambert_w0(x).unwrap();
            assert!((w * w.exp() - x).abs() <= 1e-13 * x.abs().max(1.0), "x={x}");
        }
    }

    #[test]
    fn below_branch_rejected() {
        assert!(lambert_w0(-0.5).is_err());
        assert!(lambert_w0(f64::NAN).is_err());
    }
}
