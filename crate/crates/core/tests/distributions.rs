//! Statistical checks of the samplers and of the analytic densities against
//! Monte Carlo draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fas_lora::analytic::{coverage_reference, pdf_s0, s0_support, CoverageInputs, PdfRoute};
use fas_lora::channel::{block_sample_many, jakes_correlation, BlockFit, CorrelationMatrix, ExactSampler, FasGeometry};
use fas_lora::evtapprox::{gumbel_fit, GammaParams};
use fas_lora::network::{NetworkConfig, SensitivityTable, SpreadingFactor};
use fas_lora::quadrature::{integrate, QuadratureSpec};
use fas_lora::sim::{simulate_many, SimChannel, SimSetup};
use fas_lora::stats::ks_distance;

const SAMPLES: usize = 100_000;

fn rayleigh_cdf(r: f64) -> f64 {
    1.0 - (-r * r).exp()
}

fn sf(m: u8) -> SpreadingFactor {
    SpreadingFactor::new(m).unwrap()
}

fn fas_gamma(w: f64) -> GammaParams {
    let sigma = jakes_correlation(&FasGeometry::with_density(w, w, 12.0).unwrap());
    gumbel_fit(&BlockFit::default().fit(&sigma).unwrap()).gamma_fit(2).unwrap()
}

#[test]
fn exact_marginals_are_rayleigh() {
    let sigma = jakes_correlation(&FasGeometry::with_density(1.0, 1.0, 6.0).unwrap());
    let sampler = ExactSampler::new(&sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = sampler.sample_many(SAMPLES, &mut rng);
    for port in [0, 7, sampler.ports() - 1] {
        let env: Vec<f64> = draws.iter().map(|v| v.gains[port].norm()).collect();
        let d = ks_distance(&env, rayleigh_cdf);
        assert!(d <= 0.02, "port {port}: KS {d}");
        let power = env.iter().map(|r| r * r).sum::<f64>() / env.len() as f64;
        assert!((power - 1.0).abs() < 0.02, "port {port}: E|h|^2 = {power}");
    }
}

#[test]
fn identity_sigma_gives_uncorrelated_ports() {
    let sigma = CorrelationMatrix::from_matrix(nalgebra::DMatrix::identity(4, 4)).unwrap();
    let sampler = ExactSampler::new(&sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let draws = sampler.sample_many(SAMPLES, &mut rng);
    let rho = draws.iter().map(|v| (v.gains[0] * v.gains[1].conj()).re).sum::<f64>() / SAMPLES as f64;
    assert!(rho.abs() < 0.02, "{rho}");
}

#[test]
fn block_marginals_and_structure() {
    let sigma = jakes_correlation(&FasGeometry::with_density(1.0, 1.0, 12.0).unwrap());
    let model = BlockFit::default().fit(&sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = block_sample_many(&model, SAMPLES, &mut rng);
    let env: Vec<f64> = draws.iter().map(|v| v.gains[0].norm()).collect();
    assert!(ks_distance(&env, rayleigh_cdf) <= 0.02);

    let target = model.implied_correlation();
    let first = model.blocks()[0].size;
    // within the first block, and across the first two blocks
    for (i, j) in [(0, 1), (0, first - 1), (0, first)] {
        let c = draws.iter().map(|v| (v.gains[i] * v.gains[j].conj()).re).sum::<f64>() / SAMPLES as f64;
        assert!((c - target[(i, j)]).abs() < 0.02, "({i},{j}) {c} vs {}", target[(i, j)]);
    }
}

fn s0_cdf(x: f64, inputs: &CoverageInputs, lower: f64, quad: &QuadratureSpec) -> f64 {
    if x <= lower {
        return 0.0;
    }
    let f = |u: f64| {
        let y = u.exp();
        y * pdf_s0(y, inputs, PdfRoute::Closed, quad).unwrap()
    };
    integrate(f, lower.ln(), x.ln(), quad).unwrap().value
}

fn s0_ks(samples: &mut [f64], inputs: &CoverageInputs, quad: &QuadratureSpec, points: usize) -> f64 {
    samples.sort_by(f64::total_cmp);
    let (lower, _) = s0_support(inputs, 1e-12);
    let n = samples.len();
    (1..points)
        .map(|k| {
            let i = k * n / points;
            let f = s0_cdf(samples[i], inputs, lower, quad);
            (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn s0_density_matches_monte_carlo() {
    let cfg = NetworkConfig { n_devices: 5000, ..Default::default() };
    let gamma = fas_gamma(1.0);
    let inputs = CoverageInputs::new(&cfg, sf(9), gamma, &SensitivityTable::default()).unwrap();
    let setup = SimSetup::new(&cfg, sf(9), &SensitivityTable::default(), SimChannel::GammaPower(gamma)).unwrap();
    let mut s0: Vec<f64> = simulate_many(&setup, SAMPLES as u64, 4, 0).unwrap().iter().map(|r| r.s0).collect();
    let d = s0_ks(&mut s0, &inputs, &QuadratureSpec::default(), 400);
    assert!(d <= 0.02, "KS {d}");
}

#[test]
fn thin_annulus_is_fixed_distance_gamma() {
    let cfg = NetworkConfig { r1: 1000.0, r2: 1000.01, ..Default::default() };
    let gamma = fas_gamma(1.0);
    let inputs = CoverageInputs::new(&cfg, sf(9), gamma, &SensitivityTable::default()).unwrap();
    let quad = QuadratureSpec::default();
    let scale = inputs.p_varsigma / cfg.r2.powf(cfg.beta);
    let (lower, _) = s0_support(&inputs, 1e-12);
    let worst = (1..100)
        .map(|k| {
            let x = scale * gamma.mean() * k as f64 / 25.0;
            (s0_cdf(x, &inputs, lower, &quad) - gamma.cdf(x / scale)).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst <= 1e-3, "{worst}");
}

#[test]
fn reference_coverage_trends() {
    let th = SensitivityTable::default();
    let quad = QuadratureSpec::default();
    let fas = fas_gamma(1.0);
    let single = GammaParams::new(1.0, 1.0, 2).unwrap();
    for m in 7..=12 {
        let mut prev_fas = 1.0;
        for n_devices in [1_000u64, 10_000, 100_000] {
            let cfg = NetworkConfig { n_devices, ..Default::default() };
            let p_fas = coverage_reference(&CoverageInputs::new(&cfg, sf(m), fas, &th).unwrap(), &quad).unwrap();
            let p_single = coverage_reference(&CoverageInputs::new(&cfg, sf(m), single, &th).unwrap(), &quad).unwrap();
            assert!(p_fas >= p_single, "SF{m} N={n_devices}: {p_fas} < {p_single}");
            assert!(p_fas <= prev_fas + 1e-9, "SF{m}: not nonincreasing in N");
            prev_fas = p_fas;

            let noisy = NetworkConfig { nf_db: cfg.nf_db + 10.0, ..cfg.clone() };
            let p_noisy = coverage_reference(&CoverageInputs::new(&noisy, sf(m), fas, &th).unwrap(), &quad).unwrap();
            assert!(p_noisy <= p_fas + 1e-9, "SF{m} N={n_devices}: noise raised coverage");
        }
    }
}
