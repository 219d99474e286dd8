//! Monte Carlo coverage: random deployments, Poisson activity, channel
//! draws and interference aggregation.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};
use rayon::prelude::*;

use crate::analytic::{CoverageMethod, CoverageResult};
use crate::channel::{block_sample, BlockModel, ExactSampler};
use crate::error::{Error, Result};
use crate::evtapprox::GammaParams;
use crate::network::{qos_threshold_lin, NetworkConfig, SensitivityTable, SpreadingFactor};

/// Uniform-over-annulus radius by inverse transform.
pub fn draw_annulus_radius<R: Rng + ?Sized>(rng: &mut R, r1: f64, r2: f64) -> f64 {
    let u: f64 = rng.random();
    (r1 * r1 + u * (r2 * r2 - r1 * r1)).sqrt()
}

/// Source of the desired device's selected-port power gain.
#[derive(Debug, Clone)]
pub enum SimChannel {
    /// Correlated ports from the spectral square root of Σ.
    Exact(Arc<ExactSampler>),
    /// Block-correlation model.
    Block(BlockModel),
    /// One antenna: exponential(1) power.
    SingleAntenna,
    /// Power drawn directly from a Gamma fit (isolates the distance mixture).
    GammaPower(GammaParams),
}

/// Fixed inputs of a coverage simulation for one SF.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub cfg: NetworkConfig,
    pub sf: SpreadingFactor,
    pub thresholds: SensitivityTable,
    pub channel: SimChannel,
    /// Draw co-SF interferers with mean N̄ − 1 instead of N̄.
    pub exclude_desired: bool,
}

impl SimSetup {
    pub fn new(cfg: &NetworkConfig, sf: SpreadingFactor, thresholds: &SensitivityTable, channel: SimChannel) -> Result<Self> {
        cfg.validate()?;
        if !cfg.sf_set.contains(&sf) {
            return Err(Error::Model(format!("SF{sf} is not in the configured SF set")));
        }
        Ok(Self { cfg: cfg.clone(), sf, thresholds: thresholds.clone(), channel, exclude_desired: false })
    }

    pub fn co_sf_mean(&self) -> f64 {
        let n = self.cfg.mean_active(self.sf);
        if self.exclude_desired { (n - 1.0).max(0.0) } else { n }
    }

    pub fn qos_floor(&self) -> f64 {
        qos_threshold_lin(self.sf) * self.cfg.noise_power_mw()
    }
}

/// One simulated snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Realization {
    pub r0: f64,
    pub s0: f64,
    pub i1: f64,
    pub i2_sum: f64,
    pub covered: bool,
    /// 1-based selected port.
    pub port_index: usize,
}

impl Realization {
    pub const CSV_HEADER: &'static str = "trial,r0,s0,i1,i2_sum,covered";

    pub fn csv_row(&self, trial: u64) -> String {
        format!("{trial},{},{:e},{:e},{:e},{}", self.r0, self.s0, self.i1, self.i2_sum, u8::from(self.covered))
    }
}

fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

/// One snapshot: desired link, strongest co-SF interferer, summed inter-SF
/// interference, and the coverage decision S0 ≥ max(I1, Ĩ2, Υ_n σ²).
pub fn simulate_realization<R: Rng + ?Sized>(setup: &SimSetup, rng: &mut R) -> Realization {
    let cfg = &setup.cfg;
    let beta = cfg.beta;
    let p = cfg.p_varsigma();
    let r0 = draw_annulus_radius(rng, cfg.r1, cfg.r2);
    let (port_index, gain) = match &setup.channel {
        SimChannel::Exact(s) => {
            let (i, g) = s.sample(rng).best();
            (i, g * g)
        }
        SimChannel::Block(m) => {
            let (i, g) = block_sample(m, rng).best();
            (i, g * g)
        }
        SimChannel::SingleAntenna => (1, rng.sample::<f64, _>(Exp1)),
        SimChannel::GammaPower(g) => {
            (1, Gamma::new(g.shape, 1.0 / g.rate).expect("valid fit").sample(rng))
        }
    };
    let s0 = p * gain / r0.powf(beta);

    let co = setup.thresholds.co_sf_lin(setup.sf) * p;
    let mut i1: f64 = 0.0;
    for _ in 0..poisson_count(rng, setup.co_sf_mean()) {
        let r = draw_annulus_radius(rng, cfg.r1, cfg.r2);
        let g: f64 = rng.sample(Exp1);
        i1 = i1.max(co * g / r.powf(beta));
    }

    let mut i2_sum = 0.0;
    for &m in cfg.sf_set.iter().filter(|&&m| m != setup.sf) {
        let w = setup.thresholds.lin(setup.sf, m) * p;
        for _ in 0..poisson_count(rng, cfg.mean_active(m)) {
            let r = draw_annulus_radius(rng, cfg.r1, cfg.r2);
            let g: f64 = rng.sample(Exp1);
            i2_sum += w * g / r.powf(beta);
        }
    }

    let covered = s0 >= i1.max(i2_sum).max(setup.qos_floor());
    Realization { r0, s0, i1, i2_sum, covered, port_index }
}

/// Random stream of one trial: the seed selects the key, the trial index the stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Monte Carlo coverage with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageEstimate {
    pub p_cov: f64,
    pub half_ci95: f64,
    pub trials: u64,
    pub seed: u64,
}

impl CoverageEstimate {
    pub fn from_count(covered: u64, trials: u64, seed: u64) -> Self {
        let p = covered as f64 / trials as f64;
        Self { p_cov: p, half_ci95: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(), trials, seed }
    }

    pub fn to_result(&self, sf: SpreadingFactor) -> CoverageResult {
        CoverageResult { sf, method: CoverageMethod::MonteCarlo, p_cov: self.p_cov, half_ci: Some(self.half_ci95) }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))
}

/// Estimate coverage over `trials` snapshots on `workers` threads (0 = all
/// cores). Identical for any worker count.
pub fn estimate_coverage(setup: &SimSetup, trials: u64, seed: u64, workers: usize) -> Result<CoverageEstimate> {
    if trials == 0 {
        return Err(Error::Model("need at least one trial".into()));
    }
    let covered = pool(workers)?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| u64::from(simulate_realization(setup, &mut trial_rng(seed, t)).covered))
            .sum::<u64>()
    });
    Ok(CoverageEstimate::from_count(covered, trials, seed))
}

/// All snapshots in trial order (for traces and distribution checks).
pub fn simulate_many(setup: &SimSetup, trials: u64, seed: u64, workers: usize) -> Result<Vec<Realization>> {
    pool(workers)?.install(|| {
        Ok((0..trials)
            .into_par_iter()
            .map(|t| simulate_realization(setup, &mut trial_rng(seed, t)))
            .collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{jakes_correlation, FasGeometry};
    use crate::stats::ks_distance;

    fn sf(m: u8) -> SpreadingFactor {
        SpreadingFactor::new(m).unwrap()
    }

    #[test]
    fn annulus_radius_law() {
        let mut rng = trial_rng(1, 0);
        let (r1, r2) = (300.0, 3000.0);
        let sq: Vec<f64> = (0..100_000).map(|_| draw_annulus_radius(&mut rng, r1, r2).powi(2)).collect();
        assert!(sq.iter().all(|&v| v >= r1 * r1 - 1e-6 && v <= r2 * r2 + 1e-6));
        let mean = sq.iter().sum::<f64>() / sq.len() as f64;
        assert!((mean / ((r1 * r1 + r2 * r2) / 2.0) - 1.0).abs() < 0.01);
        let ks = ks_distance(&sq, |v| ((v - r1 * r1) / (r2 * r2 - r1 * r1)).clamp(0.0, 1.0));
        assert!(ks <= 0.01);
    }

    #[test]
    fn deterministic_across_workers() {
        let cfg = NetworkConfig::default();
        let g = FasGeometry::with_density(1.0, 1.0, 12.0).unwrap();
        let ex = Arc::new(ExactSampler::new(&jakes_correlation(&g)).unwrap());
        let setup = SimSetup::new(&cfg, sf(9), &SensitivityTable::default(), SimChannel::Exact(ex)).unwrap();
        let a = estimate_coverage(&setup, 2000, 77, 1).unwrap();
        let b = estimate_coverage(&setup, 2000, 77, 4).unwrap();
        assert_eq!(a, b);
        let c = estimate_coverage(&setup, 2000, 78, 4).unwrap();
        assert_ne!(a.p_cov, c.p_cov);
    }

    #[test]
    fn certain_coverage_without_interference() {
        let cfg = NetworkConfig { sf_set: vec![sf(9)], p_t_dbm: 120.0, n_devices: 1, t_in: 1e12, ..Default::default() };
        let setup = SimSetup::new(&cfg, sf(9), &SensitivityTable::default(), SimChannel::SingleAntenna).unwrap();
        assert!(setup.co_sf_mean() < 1e-9);
        let est = estimate_coverage(&setup, 1000, 3, 0).unwrap();
        assert_eq!(est.p_cov, 1.0);
        assert_eq!(est.half_ci95, 0.0);
    }

    #[test]
    fn no_coverage_without_power() {
        let cfg = NetworkConfig { p_t_dbm: -200.0, ..Default::default() };
        let setup = SimSetup::new(&cfg, sf(9), &SensitivityTable::default(), SimChannel::SingleAntenna).unwrap();
        assert_eq!(estimate_coverage(&setup, 1000, 3, 0).unwrap().p_cov, 0.0);
    }

    #[test]
    fn realization_invariants() {
        let cfg = NetworkConfig { n_devices: 100_000, ..Default::default() };
        let setup = SimSetup::new(&cfg, sf(8), &SensitivityTable::default(), SimChannel::SingleAntenna).unwrap();
        for r in simulate_many(&setup, 500, 11, 2).unwrap() {
            assert!(r.s0 >= 0.0 && r.i1 >= 0.0 && r.i2_sum >= 0.0);
            assert_eq!(r.covered, r.s0 >= r.i1.max(r.i2_sum).max(setup.qos_floor()));
            assert_eq!(r.csv_row(0).split(',').count(), 6);
        }
    }

    #[test]
    fn excluding_desired_lowers_mean() {
        let cfg = NetworkConfig { n_devices: 100_000, ..Default::default() };
        let mut setup = SimSetup::new(&cfg, sf(7), &SensitivityTable::default(), SimChannel::SingleAntenna).unwrap();
        let full = setup.co_sf_mean();
        setup.exclude_desired = true;
        assert!((full - setup.co_sf_mean() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_missing_sf() {
        let cfg = NetworkConfig { sf_set: vec![sf(7)], ..Default::default() };
        assert!(SimSetup::new(&cfg, sf(9), &SensitivityTable::default(), SimChannel::SingleAntenna).is_err());
    }
}
