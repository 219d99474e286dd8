use super::EULER_GAMMA;
use crate::error::{Error, Result};

// B_{2j} / (2j)!
const BERNOULLI_OVER_FACT: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
];

/// Riemann zeta ζ(s) for real s > 1 (Euler–Maclaurin with 12 direct terms).
pub fn riemann_zeta(s: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::domain("riemann_zeta", format!("needs s > 1, got {s}")));
    }
    if s > 60.0 {
        return Ok(1.0 + 2f64.powf(-s) + 3f64.powf(-s));
    }
    const N: f64 = 12.0;
    let mut sum: f64 = (1..N as usize).map(|k| (k as f64).powf(-s)).sum();
    sum += N.powf(1.0 - s) / (s - 1.0) + 0.5 * N.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2)
    let mut rising = s;
    let mut npow = N.powf(-s - 1.0);
    for (j, c) in BERNOULLI_OVER_FACT.iter().enumerate() {
        if j > 0 {
            let k = 2.0 * j as f64;
            rising *= (s + k - 1.0) * (s + k);
            npow /= N * N;
        }
        sum += c * rising * npow;
    }
    Ok(sum)
}

/// ψ^(m)(1): -γ for m = 0, (-1)^{m+1} m! ζ(m+1) otherwise.
pub fn polygamma_at_one(m: u32) -> f64 {
    if m == 0 {
        return -EULER_GAMMA;
    }
    let fact: f64 = (1..=m).map(f64::from).product();
    let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
    sign * fact * riemann_zeta(f64::from(m) + 1.0).expect("m + 1 > 1")
}

/// Complete exponential Bell polynomial B_n(x_1, ..., x_n) with n = `args.len()`.
///
/// Uses B_{k+1} = Σ_{i=0}^{k} C(k, i) B_{k-i} x_{i+1}.
pub fn bell_complete(args: &[f64]) -> f64 {
    let n = args.len();
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    for k in 0..n {
        let mut binom = 1.0;
        let mut acc = 0.0;
        for i in 0..=k {
            acc += binom * b[k - i] * args[i];
            binom *= (k - i) as f64 / (i + 1) as f64;
        }
        b[k + 1] = acc;
    }
    b[n]
}
