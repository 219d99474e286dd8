//! Port correlation, exact and block-model channel sampling, and port selection.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::specfun::bessel_j0;

const HALF_SQRT: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Planar FAS with L1 × L2 ports over a W1 × W2 aperture (in wavelengths).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FasGeometry {
    pub w1: f64,
    pub w2: f64,
    pub l1: usize,
    pub l2: usize,
}

impl FasGeometry {
    pub fn new(w1: f64, w2: f64, l1: usize, l2: usize) -> Result<Self> {
        if !(w1 > 0.0 && w2 > 0.0 && w1.is_finite() && w2.is_finite()) {
            return Err(Error::Model(format!("apertures must be positive, got {w1} x {w2}")));
        }
        if l1 < 2 || l2 < 2 {
            return Err(Error::Model(format!("need at least 2 ports per side, got {l1} x {l2}")));
        }
        Ok(Self { w1, w2, l1, l2 })
    }

    /// Ports per side chosen as round(density · W), at least 2.
    pub fn with_density(w1: f64, w2: f64, ports_per_wavelength: f64) -> Result<Self> {
        let side = |w: f64| ((w * ports_per_wavelength).round() as usize).max(2);
        Self::new(w1, w2, side(w1), side(w2))
    }

    pub fn ports(&self) -> usize {
        self.l1 * self.l2
    }

    pub fn aperture(&self) -> f64 {
        self.w1 * self.w2
    }

    /// 1-based (l1, l2) for a 1-based row-major port index.
    pub fn port_coords(&self, l: usize) -> (usize, usize) {
        ((l - 1) / self.l2 + 1, (l - 1) % self.l2 + 1)
    }
}

/// Symmetric port correlation matrix Σ with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(DMatrix<f64>);

impl CorrelationMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Model("correlation matrix must be square and nonempty".into()));
        }
        let n = m.nrows();
        for i in 0..n {
            if (m[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::Model(format!("diagonal entry {i} is {}", m[(i, i)])));
            }
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Model(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues_desc(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }
}

/// Jakes correlation Σ_{l,l'} = J0(2π d_{l,l'}) with row-major 1-based ports.
pub fn jakes_correlation(geom: &FasGeometry) -> CorrelationMatrix {
    let n = geom.ports();
    let s1 = geom.w1 / (geom.l1 - 1) as f64;
    let s2 = geom.w2 / (geom.l2 - 1) as f64;
    let mut m = DMatrix::from_element(n, n, 1.0);
    for i in 0..n {
        let (a1, a2) = (i / geom.l2, i % geom.l2);
        for j in 0..i {
            let (b1, b2) = (j / geom.l2, j % geom.l2);
            let d1 = a1.abs_diff(b1) as f64 * s1;
            let d2 = a2.abs_diff(b2) as f64 * s2;
            let v = bessel_j0(2.0 * std::f64::consts::PI * d1.hypot(d2)).expect("finite distance");
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    CorrelationMatrix(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    Exact,
    Block,
}

/// Complex port gains for one realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub gains: Vec<Complex64>,
    pub mode: ChannelMode,
}

impl ChannelVector {
    pub fn envelopes(&self) -> Vec<f64> {
        self.gains.iter().map(|h| h.norm()).collect()
    }

    /// Best port (1-based) and its envelope.
    pub fn best(&self) -> (usize, f64) {
        select_port(&self.gains)
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(StandardNormal) * HALF_SQRT
}

/// Ground-truth sampler h = F g with F Fᵀ = Σ from the spectral square root.
#[derive(Debug, Clone)]
pub struct ExactSampler {
    factor: DMatrix<f64>,
}

/// Eigenvalues below this fraction of the largest are dropped from the factor.
const EIGEN_CUTOFF: f64 = 1e-12;
const NEGATIVE_EIGEN_TOL: f64 = -1e-8;
const BATCH: usize = 512;

impl ExactSampler {
    pub fn new(sigma: &CorrelationMatrix) -> Result<Self> {
        let eig = SymmetricEigen::new(sigma.matrix().clone());
        let lmax = eig.eigenvalues.max();
        let lmin = eig.eigenvalues.min();
        if lmin < NEGATIVE_EIGEN_TOL {
            return Err(Error::Model(format!(
                "correlation matrix is not positive semidefinite (min eigenvalue {lmin:e})"
            )));
        }
        let keep: Vec<usize> =
            (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > EIGEN_CUTOFF * lmax).collect();
        let n = sigma.dim();
        let mut factor = DMatrix::zeros(n, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            let s = eig.eigenvalues[i].max(0.0).sqrt();
            factor.set_column(c, &(eig.eigenvectors.column(i) * s));
        }
        Ok(Self { factor })
    }

    pub fn ports(&self) -> usize {
        self.factor.nrows()
    }

    /// Number of retained eigen-directions.
    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelVector {
        let k = self.rank();
        let gx = DMatrix::from_fn(k, 1, |_, _| normal(rng));
        let gy = DMatrix::from_fn(k, 1, |_, _| normal(rng));
        let re = &self.factor * gx;
        let im = &self.factor * gy;
        ChannelVector {
            gains: re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect(),
            mode: ChannelMode::Exact,
        }
    }

    /// `count` realisations, generated in batches with matrix products.
    pub fn sample_many<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<ChannelVector> {
        let mut out = Vec::with_capacity(count);
        self.batches(count, rng, |re, im| {
            for c in 0..re.ncols() {
                out.push(ChannelVector {
                    gains: re
                        .column(c)
                        .iter()
                        .zip(im.column(c).iter())
                        .map(|(&a, &b)| Complex64::new(a, b))
                        .collect(),
                    mode: ChannelMode::Exact,
                });
            }
        });
        out
    }

    /// Largest port envelope of each of `count` realisations.
    pub fn max_envelopes<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        self.batches(count, rng, |re, im| {
            for c in 0..re.ncols() {
                let best = re
                    .column(c)
                    .iter()
                    .zip(im.column(c).iter())
                    .map(|(a, b)| a * a + b * b)
                    .fold(0.0, f64::max);
                out.push(best.sqrt());
            }
        });
        out
    }

    fn batches<R, F>(&self, count: usize, rng: &mut R, mut sink: F)
    where
        R: Rng + ?Sized,
        F: FnMut(&DMatrix<f64>, &DMatrix<f64>),
    {
        let k = self.rank();
        let mut done = 0;
        while done < count {
            let b = BATCH.min(count - done);
            let gx = DMatrix::from_fn(k, b, |_, _| normal(rng));
            let gy = DMatrix::from_fn(k, b, |_, _| normal(rng));
            sink(&(&self.factor * gx), &(&self.factor * gy));
            done += b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub size: usize,
    pub mu_sq: f64,
}

/// Block-diagonal approximation of Σ: block a has L_a ports with constant
/// intra-block correlation μ_a².
#[derive(Debug, Clone, PartialEq)]
pub struct BlockModel {
    blocks: Vec<Block>,
}

impl BlockModel {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Model("block model needs at least one block".into()));
        }
        for (a, b) in blocks.iter().enumerate() {
            if b.size == 0 {
                return Err(Error::Model(format!("block {} is empty", a + 1)));
            }
            if !(0.0..1.0).contains(&b.mu_sq) {
                return Err(Error::Model(format!(
                    "block {} has mu^2 = {} outside [0, 1)",
                    a + 1,
                    b.mu_sq
                )));
            }
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn count(&self) -> usize {
        self.blocks.len()
    }

    pub fn ports(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    /// Blkdiag(A_1, ..., A_A).
    pub fn implied_correlation(&self) -> DMatrix<f64> {
        let n = self.ports();
        let mut m = DMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            for i in 0..b.size {
                for j in 0..b.size {
                    m[(off + i, off + j)] = if i == j { 1.0 } else { b.mu_sq };
                }
            }
            off += b.size;
        }
        m
    }

    /// Text record: A on the first line, then "L_a, mu_a^2" per block.
    pub fn to_record(&self) -> String {
        let mut s = format!("{}\n", self.blocks.len());
        for b in &self.blocks {
            s.push_str(&format!("{}, {:?}\n", b.size, b.mu_sq));
        }
        s
    }

    pub fn parse_record(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let count: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty block record".into()))?
            .parse()
            .map_err(|_| Error::Parse("first line of block record must be the block count".into()))?;
        let mut blocks = Vec::with_capacity(count);
        for line in lines {
            let (size, mu) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("expected 'L_a, mu^2', got {line:?}")))?;
            blocks.push(Block {
                size: size.trim().parse().map_err(|_| Error::Parse(format!("bad block size {size:?}")))?,
                mu_sq: mu.trim().parse().map_err(|_| Error::Parse(format!("bad mu^2 {mu:?}")))?,
            });
        }
        if blocks.len() != count {
            return Err(Error::Parse(format!(
                "record declares {count} blocks but lists {}",
                blocks.len()
            )));
        }
        Self::new(blocks)
    }
}

impl fmt::Display for BlockModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record())
    }
}

/// Block-model fitting rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockFit {
    /// One block per eigenvalue within `ratio` of the largest (at least two
    /// blocks), sizes proportional to those eigenvalues, common `mu_sq`.
    Dominant { ratio: f64, mu_sq: f64 },
    /// Leading eigenvalues up to the given share of the trace, with
    /// μ_a² = (λ_a − 1)/(L_a − 1).
    EnergyFraction(f64),
}

impl Default for BlockFit {
    fn default() -> Self {
        BlockFit::Dominant { ratio: 0.5, mu_sq: 0.76 }
    }
}

impl BlockFit {
    pub fn fit(&self, sigma: &CorrelationMatrix) -> Result<BlockModel> {
        match *self {
            BlockFit::Dominant { ratio, mu_sq } => fit_dominant(sigma, ratio, mu_sq),
            BlockFit::EnergyFraction(f) => fit_block_model(sigma, f),
        }
    }
}

fn checked_spectrum(sigma: &CorrelationMatrix) -> Result<Vec<f64>> {
    let n = sigma.dim();
    if n < 2 {
        return Err(Error::Model("block fitting needs at least 2 ports".into()));
    }
    let ev = sigma.eigenvalues_desc();
    let trace: f64 = ev.iter().sum();
    if (trace - n as f64).abs() > 1e-6 * n as f64 {
        return Err(Error::Model(format!("eigenvalue sum {trace} does not match L = {n}")));
    }
    Ok(ev)
}

/// Split `total` ports proportionally to `weights` by largest remainder,
/// with every share at least 2.
fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quota: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut sizes: Vec<usize> = quota.iter().map(|q| (q.floor() as usize).max(2)).collect();
    while sizes.iter().sum::<usize>() > total {
        let i = (0..sizes.len())
            .filter(|&i| sizes[i] > 2)
            .max_by(|&a, &b| (sizes[a] as f64 - quota[a]).total_cmp(&(sizes[b] as f64 - quota[b])))
            .expect("some block above the minimum size");
        sizes[i] -= 1;
    }
    while sizes.iter().sum::<usize>() < total {
        let i = (0..sizes.len())
            .max_by(|&a, &b| {
                (quota[a] - sizes[a] as f64)
                    .total_cmp(&(quota[b] - sizes[b] as f64))
                    .then(b.cmp(&a))
            })
            .expect("nonempty");
        sizes[i] += 1;
    }
    sizes
}

/// Eigen-energy heuristic: A = fewest leading eigenvalues holding
/// `energy_fraction` of the trace (capped at L/2), sizes by largest
/// remainder, μ_a² = clamp((λ_a − 1)/(L_a − 1), 0, 1 − 1e-9).
pub fn fit_block_model(sigma: &CorrelationMatrix, energy_fraction: f64) -> Result<BlockModel> {
    if !(energy_fraction > 0.0 && energy_fraction <= 1.0) {
        return Err(Error::Model(format!("energy fraction must be in (0, 1], got {energy_fraction}")));
    }
    let ev = checked_spectrum(sigma)?;
    let n = ev.len();
    let target = energy_fraction * n as f64 - 1e-12;
    let mut acc = 0.0;
    let mut count = n;
    for (i, l) in ev.iter().enumerate() {
        acc += l;
        if acc >= target {
            count = i + 1;
            break;
        }
    }
    let count = count.min(n / 2).max(1);
    let lead: Vec<f64> = ev[..count].iter().map(|l| l.max(0.0)).collect();
    let sizes = if count == 1 { vec![n] } else { apportion(&lead, n) };
    let blocks = lead
        .iter()
        .zip(&sizes)
        .map(|(&l, &size)| Block {
            size,
            mu_sq: if size > 1 { ((l - 1.0) / (size - 1) as f64).clamp(0.0, 1.0 - 1e-9) } else { 0.0 },
        })
        .collect();
    BlockModel::new(blocks)
}

/// Dominant-eigenvalue rule used by default (see [`BlockFit::Dominant`]).
pub fn fit_dominant(sigma: &CorrelationMatrix, ratio: f64, mu_sq: f64) -> Result<BlockModel> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Model(format!("eigenvalue ratio must be in (0, 1], got {ratio}")));
    }
    let ev = checked_spectrum(sigma)?;
    let n = ev.len();
    let count = ev.iter().filter(|&&l| l >= ratio * ev[0]).count().max(2).min(n / 2);
    let sizes = apportion(&ev[..count], n);
    BlockModel::new(sizes.into_iter().map(|size| Block { size, mu_sq }).collect())
}

/// One block-model realisation: within block a,
/// h = √(1−μ_a²)(x + jy) + μ_a(x_0 + jy_0) with one common pair per block.
pub fn block_sample<R: Rng + ?Sized>(model: &BlockModel, rng: &mut R) -> ChannelVector {
    let mut gains = Vec::with_capacity(model.ports());
    for b in model.blocks() {
        let mu = b.mu_sq.sqrt();
        let own = (1.0 - b.mu_sq).sqrt();
        let common = Complex64::new(normal(rng), normal(rng)) * mu;
        for _ in 0..b.size {
            gains.push(Complex64::new(normal(rng), normal(rng)) * own + common);
        }
    }
    ChannelVector { gains, mode: ChannelMode::Block }
}

pub fn block_sample_many<R: Rng + ?Sized>(model: &BlockModel, count: usize, rng: &mut R) -> Vec<ChannelVector> {
    (0..count).map(|_| block_sample(model, rng)).collect()
}

/// Index (1-based) and envelope of the strongest port; ties go to the lowest index.
///
/// Panics on an empty vector.
pub fn select_port(h: &[Complex64]) -> (usize, f64) {
    assert!(!h.is_empty(), "select_port needs at least one port");
    let mut best = 0;
    let mut best_sq = h[0].norm_sqr();
    for (i, g) in h.iter().enumerate().skip(1) {
        let p = g.norm_sqr();
        if p > best_sq {
            best = i;
            best_sq = p;
        }
    }
    (best + 1, best_sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corr(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>() / a.len() as f64
    }

    #[test]
    fn jakes_small_example() {
        let g = FasGeometry::new(0.5, 0.5, 2, 2).unwrap();
        let s = jakes_correlation(&g);
        assert!((s.matrix()[(0, 1)] + 0.3042421776).abs() < 1e-9);
        for i in 0..4 {
            assert_eq!(s.matrix()[(i, i)], 1.0);
        }
    }

    #[test]
    fn jakes_symmetric_and_psd() {
        let g = FasGeometry::new(1.3, 0.7, 9, 5).unwrap();
        let s = jakes_correlation(&g);
        assert_eq!(s.matrix(), &s.matrix().transpose());
        assert!(*s.eigenvalues_desc().last().unwrap() >= -1e-8);
        assert!(CorrelationMatrix::from_matrix(s.matrix().clone()).is_ok());
    }

    #[test]
    fn geometry_indexing() {
        let g = FasGeometry::new(1.0, 1.0, 3, 4).unwrap();
        assert_eq!(g.port_coords(1), (1, 1));
        assert_eq!(g.port_coords(4), (1, 4));
        assert_eq!(g.port_coords(5), (2, 1));
        assert_eq!(FasGeometry::with_density(2.5, 1.0, 12.0).unwrap().l1, 30);
        assert!(FasGeometry::new(1.0, 1.0, 1, 4).is_err());
    }

    #[test]
    fn exact_two_port_correlation() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.7, 0.7, 1.0]);
        let s = ExactSampler::new(&CorrelationMatrix::from_matrix(m).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = s.sample_many(100_000, &mut rng);
        let a: Vec<_> = v.iter().map(|c| c.gains[0]).collect();
        let b: Vec<_> = v.iter().map(|c| c.gains[1]).collect();
        assert!((corr(&a, &b).re - 0.7).abs() < 0.02);
        assert!((corr(&a, &a).re - 1.0).abs() < 0.02);
    }

    #[test]
    fn exact_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 1.5, 1.0]);
        let s = CorrelationMatrix::from_matrix(m).unwrap();
        assert!(ExactSampler::new(&s).is_err());
    }

    #[test]
    fn block_sample_correlations() {
        let model = BlockModel::new(vec![Block { size: 3, mu_sq: 0.8 }, Block { size: 2, mu_sq: 0.0 }]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = block_sample_many(&model, 100_000, &mut rng);
        let port = |i: usize| v.iter().map(|c| c.gains[i]).collect::<Vec<_>>();
        assert!((corr(&port(0), &port(2)).re - 0.8).abs() < 0.02);
        assert!(corr(&port(3), &port(4)).norm() < 0.02);
        assert!(corr(&port(1), &port(3)).norm() < 0.02);
        assert!((corr(&port(4), &port(4)).re - 1.0).abs() < 0.02);
    }

    #[test]
    fn heuristic_limits() {
        let eye = CorrelationMatrix::from_matrix(DMatrix::identity(8, 8)).unwrap();
        let m = fit_block_model(&eye, 0.95).unwrap();
        assert!(m.blocks().iter().all(|b| b.mu_sq == 0.0));
        assert_eq!(m.ports(), 8);
        let ones = CorrelationMatrix::from_matrix(DMatrix::from_element(6, 6, 1.0)).unwrap();
        let m = fit_block_model(&ones, 0.95).unwrap();
        assert_eq!(m.count(), 1);
        assert_eq!(m.blocks()[0].size, 6);
        assert!((m.blocks()[0].mu_sq - (1.0 - 1e-9)).abs() < 1e-15);
    }

    #[test]
    fn heuristic_fixture_12x12() {
        let g = FasGeometry::new(1.0, 1.0, 12, 12).unwrap();
        let s = jakes_correlation(&g);
        let m = fit_block_model(&s, 0.999).unwrap();
        let sizes: Vec<usize> = m.blocks().iter().map(|b| b.size).collect();
        assert_eq!(sizes, vec![25, 23, 23, 23, 19, 10, 10, 3, 2, 2, 2, 2]);
        assert_eq!(m.ports(), 144);
        // dominant eigenvalues holding 95% of the trace are reproduced
        let lam = s.eigenvalues_desc();
        let implied = CorrelationMatrix::from_matrix(m.implied_correlation()).unwrap().eigenvalues_desc();
        let mut energy = 0.0;
        for i in 0..m.count() {
            if energy >= 0.95 * 144.0 {
                break;
            }
            energy += lam[i];
            assert!((implied[i] / lam[i] - 1.0).abs() <= 0.10, "eigenvalue {i}: {} vs {}", implied[i], lam[i]);
        }
    }

    #[test]
    fn dominant_fit_shape() {
        let g = FasGeometry::with_density(1.0, 1.0, 12.0).unwrap();
        let m = fit_dominant(&jakes_correlation(&g), 0.5, 0.76).unwrap();
        assert!(m.count() >= 2);
        assert_eq!(m.ports(), 144);
        assert!(m.blocks().iter().all(|b| b.size >= 2 && b.mu_sq == 0.76));
    }

    #[test]
    fn record_round_trip() {
        let model = BlockModel::new(vec![Block { size: 5, mu_sq: 0.123456789 }, Block { size: 7, mu_sq: 0.0 }]).unwrap();
        assert_eq!(BlockModel::parse_record(&model.to_record()).unwrap(), model);
        assert!(BlockModel::parse_record("3\n2, 0.5\n").is_err());
        assert!(BlockModel::parse_record("1\n2, 1.0\n").is_err());
    }

    #[test]
    fn port_selection() {
        let h = [Complex64::new(0.2, 0.0), Complex64::new(0.0, 0.9), Complex64::new(0.5, 0.0)];
        let (i, g) = select_port(&h);
        assert_eq!(i, 2);
        assert!((g - 0.9).abs() < 1e-15);
        assert_eq!(select_port(&[Complex64::new(1.0, 0.0); 4]).0, 1);
    }
}
