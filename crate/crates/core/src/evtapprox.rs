//! Selected-port channel statistics: shifted-Rayleigh block maxima, the
//! Gumbel limit across blocks, its moments and a Gamma power fit.

use std::f64::consts::{E, PI};

use crate::channel::BlockModel;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_to_infinity, QuadratureSpec};
use crate::specfun::{bell_complete, lambert_w0, ln_gamma, lower_incomplete_gamma_reg, polygamma_at_one};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GumbelParams {
    /// Location α_A.
    pub alpha: f64,
    /// Scale β_A.
    pub beta: f64,
    /// Mean of μ_a over blocks.
    pub mu_bar: f64,
}

impl GumbelParams {
    pub fn cdf(&self, x: f64) -> f64 {
        (-(-(x - self.alpha) / self.beta).exp()).exp()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.alpha) / self.beta;
        (-(z + (-z).exp())).exp() / self.beta
    }
}

/// Gamma distribution with shape θ_0 and rate ω_0, fitted to |h|^power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
    pub power: u32,
}

impl GammaParams {
    pub fn new(shape: f64, rate: f64, power: u32) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(Error::Model(format!("Gamma parameters must be positive, got ({shape}, {rate})")));
        }
        Ok(Self { shape, rate, power })
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        lower_incomplete_gamma_reg(self.shape, self.rate * x).expect("positive shape")
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        (self.shape * self.rate.ln() + (self.shape - 1.0) * x.ln() - self.rate * x - ln_gamma(self.shape)).exp()
    }
}

/// Rayleigh(1/√2) inverse CDF.
fn rayleigh_inv(q: f64) -> f64 {
    (-(1.0 - q).ln()).sqrt()
}

/// δ_a = √((1 − μ_a²)/2 · W((L_a − 2)²/(2π))).
pub fn block_shift_delta(mu_sq: f64, l_a: usize) -> f64 {
    let l = l_a.saturating_sub(2) as f64;
    let w = lambert_w0(l * l / (2.0 * PI)).expect("nonnegative argument");
    ((1.0 - mu_sq).max(0.0) / 2.0 * w).sqrt()
}

/// CDF of the largest envelope within one block. For μ² = 0 the exact
/// i.i.d. form [1 − e^{−r²}]^{L_a} is used.
pub fn single_block_cdf(r: f64, mu_sq: f64, l_a: usize) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if mu_sq == 0.0 {
        return (1.0 - (-r * r).exp()).powi(l_a as i32);
    }
    let delta = block_shift_delta(mu_sq, l_a);
    if r <= delta {
        return 0.0;
    }
    1.0 - (-(r - delta).powi(2) / mu_sq).exp()
}

/// Envelope model of the selected port: the Gumbel limit when A ≥ 2, the
/// single-block CDF itself when A = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeFit {
    Gumbel(GumbelParams),
    SingleBlock { mu_sq: f64, size: usize },
}

/// Gumbel normalisers α_A = μ̄ F⁻¹(1 − 1/A) + mean δ_a and
/// β_A = μ̄ [F⁻¹(1 − 1/(A e)) − F⁻¹(1 − 1/A)].
pub fn gumbel_fit(model: &BlockModel) -> EnvelopeFit {
    let blocks = model.blocks();
    if blocks.len() == 1 {
        return EnvelopeFit::SingleBlock { mu_sq: blocks[0].mu_sq, size: blocks[0].size };
    }
    let a = blocks.len() as f64;
    let mu_bar = blocks.iter().map(|b| b.mu_sq.sqrt()).sum::<f64>() / a;
    let delta_bar = blocks.iter().map(|b| block_shift_delta(b.mu_sq, b.size)).sum::<f64>() / a;
    let f_a = rayleigh_inv(1.0 - 1.0 / a);
    EnvelopeFit::Gumbel(GumbelParams {
        alpha: mu_bar * f_a + delta_bar,
        beta: mu_bar * (rayleigh_inv(1.0 - 1.0 / (a * E)) - f_a),
        mu_bar,
    })
}

/// E[X^n] for X ~ Gumbel(α, β), from the n-th derivative of Γ(1 − βt)e^{αt}.
pub fn gumbel_moment(n: u32, p: &GumbelParams) -> f64 {
    let psi: Vec<f64> = (0..n).map(polygamma_at_one).collect();
    let mut binom = 1.0;
    let mut sum = 0.0;
    for k in 0..=n {
        let gamma_deriv = (-p.beta).powi(k as i32) * bell_complete(&psi[..k as usize]);
        sum += binom * p.alpha.powi((n - k) as i32) * gamma_deriv;
        binom *= f64::from(n - k) / f64::from(k + 1);
    }
    sum
}

/// Moment-match a Gamma law to X^n given E[X^n] and E[X^{2n}].
pub fn gamma_from_moments(power: u32, m1: f64, m2: f64) -> Result<GammaParams> {
    let var = m2 - m1 * m1;
    if !(var > 0.0) || !(m1 > 0.0) {
        return Err(Error::Numeric(format!(
            "cannot fit Gamma: mean {m1:e}, variance {var:e}"
        )));
    }
    GammaParams::new(m1 * m1 / var, m1 / var, power)
}

/// Gamma fit of X^n with X ~ Gumbel(α, β): shape φ²/ϑ, rate φ/ϑ.
pub fn gamma_fit(power: u32, p: &GumbelParams) -> Result<GammaParams> {
    if power == 0 {
        return Err(Error::Model("Gamma fit power must be at least 1".into()));
    }
    gamma_from_moments(power, gumbel_moment(power, p), gumbel_moment(2 * power, p))
}

impl EnvelopeFit {
    pub fn is_fallback(&self) -> bool {
        matches!(self, EnvelopeFit::SingleBlock { .. })
    }

    pub fn cdf(&self, r: f64) -> f64 {
        match *self {
            EnvelopeFit::Gumbel(p) => p.cdf(r),
            EnvelopeFit::SingleBlock { mu_sq, size } => single_block_cdf(r, mu_sq, size),
        }
    }

    /// E[X^n]; by quadrature of n r^{n−1} (1 − F(r)) for the single-block case.
    pub fn moment(&self, n: u32) -> Result<f64> {
        match *self {
            EnvelopeFit::Gumbel(p) => Ok(gumbel_moment(n, &p)),
            EnvelopeFit::SingleBlock { mu_sq, size } => {
                if n == 0 {
                    return Ok(1.0);
                }
                let spec = QuadratureSpec { rel_tol: 1e-11, abs_tol: 1e-14, ..Default::default() };
                let nf = f64::from(n);
                integrate_to_infinity(
                    |r| nf * r.powi(n as i32 - 1) * (1.0 - single_block_cdf(r, mu_sq, size)),
                    0.0,
                    &spec,
                )
                .map(|q| q.value)
            }
        }
    }

    pub fn gamma_fit(&self, power: u32) -> Result<GammaParams> {
        if power == 0 {
            return Err(Error::Model("Gamma fit power must be at least 1".into()));
        }
        gamma_from_moments(power, self.moment(power)?, self.moment(2 * power)?)
    }
}

/// Inputs for the Meizler-condition check: μ̄ and the linear model
/// Σ_a δ_a = x A + y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeizlerModel {
    pub mu_bar: f64,
    pub x: f64,
    pub y: f64,
}

impl MeizlerModel {
    /// Least-squares line through (A, Σδ_a) over a geometry sweep; μ̄ is averaged.
    pub fn from_models(models: &[BlockModel]) -> Result<Self> {
        if models.len() < 2 {
            return Err(Error::Model("need at least two block models to fit the δ line".into()));
        }
        let pts: Vec<(f64, f64)> = models
            .iter()
            .map(|m| {
                let s: f64 = m.blocks().iter().map(|b| block_shift_delta(b.mu_sq, b.size)).sum();
                (m.count() as f64, s)
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx == 0.0 {
            return Err(Error::Model("geometry sweep has a single block count".into()));
        }
        let x = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
        let mu_bar = models
            .iter()
            .map(|m| m.blocks().iter().map(|b| b.mu_sq.sqrt()).sum::<f64>() / m.count() as f64)
            .sum::<f64>()
            / n;
        Ok(Self { mu_bar, x, y: my - x * mx })
    }

    fn alpha(&self, a: f64) -> f64 {
        self.mu_bar * a.ln().sqrt() + (self.x * a + self.y) / a
    }

    fn beta(&self, a: f64) -> f64 {
        self.mu_bar * ((a.ln() + 1.0).sqrt() - a.ln().sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeizlerRow {
    pub a: u64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeizlerReport {
    pub rows: Vec<MeizlerRow>,
    pub c1_growing: bool,
    pub c2_to_one: bool,
    pub c3_to_zero: bool,
}

/// Evaluate C1 = |log α_A| + |β_A|, the C2 ratio and C3 = Δ(A, A+1) over the
/// β gap, on an increasing list of block counts.
pub fn meizler_diagnostics(a_range: &[u64], model: &MeizlerModel) -> Result<MeizlerReport> {
    if a_range.is_empty() || a_range.windows(2).any(|w| w[1] <= w[0]) || a_range[0] < 2 {
        return Err(Error::Model("block counts must be increasing and at least 2".into()));
    }
    let gap = |a: f64| (a.ln() + 1.0).sqrt() - a.ln().sqrt();
    let rows: Vec<MeizlerRow> = a_range
        .iter()
        .map(|&a| {
            let af = a as f64;
            let delta_step = (model.x * (af + 1.0) + model.y) / (af + 1.0) - (model.x * af + model.y) / af;
            MeizlerRow {
                a,
                c1: model.alpha(af).ln().abs() + model.beta(af).abs(),
                c2: gap(af + 1.0) / gap(af),
                c3: delta_step / gap(af),
            }
        })
        .collect();
    let c1_growing = rows.windows(2).all(|w| w[1].c1 >= w[0].c1);
    let c2_to_one = rows.windows(2).all(|w| (w[1].c2 - 1.0).abs() <= (w[0].c2 - 1.0).abs());
    let c3_to_zero = rows.windows(2).all(|w| w[1].c3.abs() <= w[0].c3.abs());
    Ok(MeizlerReport { rows, c1_growing, c2_to_one, c3_to_zero })
}

/// One line of a fit comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub w1: f64,
    pub w2: f64,
    pub ports: usize,
    pub blocks: usize,
    pub envelope: EnvelopeFit,
    pub power_fit: GammaParams,
    pub ks_envelope: Option<f64>,
    pub ks_power: Option<f64>,
}

impl FitReport {
    pub const CSV_HEADER: &'static str = "W1,W2,L,A,fit,alpha,beta,shape,rate,ks_envelope,ks_power";

    pub fn csv_row(&self) -> String {
        let (kind, alpha, beta) = match self.envelope {
            EnvelopeFit::Gumbel(p) => ("gumbel", p.alpha.to_string(), p.beta.to_string()),
            EnvelopeFit::SingleBlock { .. } => ("single_block", String::new(), String::new()),
        };
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{kind},{alpha},{beta},{},{},{},{}",
            self.w1,
            self.w2,
            self.ports,
            self.blocks,
            self.power_fit.shape,
            self.power_fit.rate,
            opt(self.ks_envelope),
            opt(self.ks_power)
        )
    }
}
