//! Chirp spread spectrum decision values: co-SF signals land on distinct
//! bins after dechirping, inter-SF signals spread across the window.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::network::SpreadingFactor;

/// One CSS symbol, critically sampled (one sample per chip).
#[derive(Debug, Clone, PartialEq)]
pub struct CssSignal {
    pub sf: SpreadingFactor,
    pub symbol: usize,
    pub samples: Vec<Complex64>,
}

/// Bin magnitudes after dechirp and DFT.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionSpectrum {
    pub magnitudes: Vec<f64>,
}

impl DecisionSpectrum {
    pub fn argmax(&self) -> usize {
        self.magnitudes
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &m)| if m > best.1 { (i, m) } else { best })
            .0
    }

    pub fn peak(&self) -> f64 {
        self.magnitudes.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.magnitudes.iter().sum::<f64>() / self.magnitudes.len() as f64
    }

    pub fn peak_to_mean(&self) -> f64 {
        self.peak() / self.mean()
    }

    /// Bin indices sorted by decreasing magnitude.
    pub fn ranked_bins(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.magnitudes.len()).collect();
        idx.sort_by(|&a, &b| self.magnitudes[b].total_cmp(&self.magnitudes[a]).then(a.cmp(&b)));
        idx
    }
}

fn base_chirp(n: usize) -> impl Iterator<Item = Complex64> {
    let nf = n as f64;
    (0..n).map(move |k| {
        let kf = k as f64;
        Complex64::from_polar(1.0, std::f64::consts::PI * kf * kf / nf)
    })
}

/// Up-chirp cyclically shifted by `symbol`: exp(jπn²/N + j2π·symbol·n/N).
///
/// Panics if `symbol >= 2^sf`.
pub fn css_modulate(sf: SpreadingFactor, symbol: usize) -> CssSignal {
    let n = sf.chips();
    assert!(symbol < n, "symbol {symbol} out of range for SF{sf}");
    let step = 2.0 * std::f64::consts::PI * symbol as f64 / n as f64;
    let samples = base_chirp(n)
        .enumerate()
        .map(|(k, c)| c * Complex64::from_polar(1.0, step * k as f64))
        .collect();
    CssSignal { sf, symbol, samples }
}

/// Multiply by the conjugate base chirp and take |DFT|.
///
/// Panics if the length is not 2^sf.
pub fn dechirp_decision(signal: &[Complex64], sf: SpreadingFactor) -> DecisionSpectrum {
    let n = sf.chips();
    assert_eq!(signal.len(), n, "signal length must be 2^{sf}");
    let mut buf: Vec<Complex64> = signal.iter().zip(base_chirp(n)).map(|(s, c)| s * c.conj()).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    DecisionSpectrum { magnitudes: buf.iter().map(|v| v.norm()).collect() }
}

/// Tile (shorter) or truncate (longer) samples to fill a window of `len`.
pub fn fit_to_window(samples: &[Complex64], len: usize) -> Vec<Complex64> {
    samples.iter().cycle().take(len).copied().collect()
}

/// Decision spectra of a mixed-SF scenario: each component alone and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Demo {
    pub components: Vec<(String, DecisionSpectrum)>,
    pub combined: DecisionSpectrum,
}

/// Desired {25, 8}; co-SF {125, 8} and {165, 8}; inter-SF {125, 7} and {165, 9}.
pub fn fig1_demo() -> Fig1Demo {
    let sf = |m| SpreadingFactor::new(m).expect("valid SF");
    let window = sf(8);
    let n = window.chips();
    let parts = [("desired_25_sf8", 8, 25), ("co_sf_125_sf8", 8, 125), ("co_sf_165_sf8", 8, 165), ("inter_sf_125_sf7", 7, 125), ("inter_sf_165_sf9", 9, 165)];
    let mut total = vec![Complex64::new(0.0, 0.0); n];
    let mut components = Vec::new();
    for (label, m, symbol) in parts {
        let s = fit_to_window(&css_modulate(sf(m), symbol).samples, n);
        for (t, v) in total.iter_mut().zip(&s) {
            *t += v;
        }
        components.push((label.to_string(), dechirp_decision(&s, window)));
    }
    Fig1Demo { components, combined: dechirp_decision(&total, window) }
}

impl Fig1Demo {
    /// Long format: bin, component, magnitude.
    pub fn separated_csv(&self) -> String {
        let mut s = String::from("bin,component,magnitude\n");
        for (label, spec) in &self.components {
            for (b, m) in spec.magnitudes.iter().enumerate() {
                s.push_str(&format!("{b},{label},{m}\n"));
            }
        }
        s
    }

    pub fn combined_csv(&self) -> String {
        let mut s = String::from("bin,component,magnitude\n");
        for (b, m) in self.combined.magnitudes.iter().enumerate() {
            s.push_str(&format!("{b},combined,{m}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(m: u8) -> SpreadingFactor {
        SpreadingFactor::new(m).unwrap()
    }

    #[test]
    fn peaks_at_symbol() {
        for s in 0..128 {
            assert_eq!(dechirp_decision(&css_modulate(sf(7), s).samples, sf(7)).argmax(), s);
        }
        for m in 8..=12 {
            let n = 1usize << m;
            for s in [0, 1, n / 3, n / 2 + 7, n - 1] {
                assert_eq!(dechirp_decision(&css_modulate(sf(m), s).samples, sf(m)).argmax(), s);
            }
        }
    }

    #[test]
    fn coherent_peak_and_unit_power() {
        let sig = css_modulate(sf(8), 25);
        let spec = dechirp_decision(&sig.samples, sf(8));
        assert_eq!(spec.argmax(), 25);
        assert!((spec.peak() - 256.0).abs() < 1e-9);
        let power = sig.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / 256.0;
        assert!((power - 1.0).abs() < 1e-12);
    }

    #[test]
    fn co_sf_sum_is_additive() {
        let a = css_modulate(sf(8), 25).samples;
        let b = css_modulate(sf(8), 125).samples;
        let sum: Vec<_> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let spec = dechirp_decision(&sum, sf(8));
        assert!((spec.magnitudes[25] - 256.0).abs() < 1e-9);
        assert!((spec.magnitudes[125] - 256.0).abs() < 1e-9);
    }

    #[test]
    fn inter_sf_spreads() {
        let s7 = fit_to_window(&css_modulate(sf(7), 125).samples, 256);
        assert!(dechirp_decision(&s7, sf(8)).peak() <= 0.25 * 256.0);
        let co = dechirp_decision(&css_modulate(sf(8), 125).samples, sf(8));
        for m in [7, 9] {
            let s = fit_to_window(&css_modulate(sf(m), 165 % (1 << m)).samples, 256);
            let spec = dechirp_decision(&s, sf(8));
            assert!(co.peak_to_mean() >= 10.0 * spec.peak_to_mean(), "SF{m}");
        }
    }

    #[test]
    fn demo_structure() {
        let d = fig1_demo();
        assert_eq!(d.components[0].1.argmax(), 25);
        let mut top: Vec<usize> = d.combined.ranked_bins()[..3].to_vec();
        top.sort();
        assert_eq!(top, vec![25, 125, 165]);
        let co_min = d.components[1].1.peak().min(d.components[2].1.peak());
        for (_, spec) in &d.components[3..] {
            assert!(spec.peak() <= 0.5 * co_min);
        }
        assert_eq!(d.separated_csv().lines().count(), 1 + 5 * 256);
    }

    #[test]
    fn window_fitting() {
        let s = css_modulate(sf(7), 3).samples;
        let w = fit_to_window(&s, 256);
        assert_eq!(w.len(), 256);
        assert_eq!(w[128], s[0]);
        assert_eq!(fit_to_window(&css_modulate(sf(9), 3).samples, 256).len(), 256);
    }
}
