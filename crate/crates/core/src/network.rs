//! Deployment and PHY parameters: SF allocation, airtime, duty cycle, mean
//! active-device counts, pathloss, noise and rejection thresholds.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 3e8;

/// LoRa spreading factor, 7 through 12.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpreadingFactor(u8);

impl SpreadingFactor {
    pub const MIN: u8 = 7;
    pub const MAX: u8 = 12;

    pub fn new(m: u8) -> Result<Self> {
        if (Self::MIN..=Self::MAX).contains(&m) {
            Ok(Self(m))
        } else {
            Err(Error::Model(format!("spreading factor must be in 7..=12, got {m}")))
        }
    }

    pub fn all() -> Vec<Self> {
        (Self::MIN..=Self::MAX).map(Self).collect()
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based position within 7..=12.
    pub fn index(self) -> usize {
        usize::from(self.0 - Self::MIN)
    }

    /// Chips per symbol, 2^m.
    pub fn chips(self) -> usize {
        1 << self.0
    }
}

impl fmt::Display for SpreadingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Deployment and PHY parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Inner annulus radius (m).
    pub r1: f64,
    /// Outer annulus radius (m).
    pub r2: f64,
    /// Number of end devices.
    pub n_devices: u64,
    /// Mean packet inter-arrival time (s).
    pub t_in: f64,
    /// Bandwidth (Hz).
    pub bw: f64,
    /// Coding rate index, 1..=4 for 4/5..4/8.
    pub cr: u8,
    /// Payload length (bytes).
    pub l_pl: u32,
    /// Preamble symbols.
    pub n_pre: u32,
    /// Header length (bits).
    pub l_hd: u32,
    /// CRC length (bits).
    pub l_crc: u32,
    /// Carrier frequency (Hz).
    pub f_c: f64,
    /// Pathloss exponent.
    pub beta: f64,
    pub p_t_dbm: f64,
    pub nf_db: f64,
    pub sf_set: Vec<SpreadingFactor>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            r1: 300.0,
            r2: 3000.0,
            n_devices: 10_000,
            t_in: 400.0,
            bw: 125e3,
            cr: 1,
            l_pl: 20,
            n_pre: 8,
            l_hd: 20,
            l_crc: 16,
            f_c: 915e6,
            beta: 2.7,
            p_t_dbm: 10.0,
            nf_db: 6.0,
            sf_set: SpreadingFactor::all(),
        }
    }
}

/// Per-SF derived quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfProfile {
    pub m: SpreadingFactor,
    /// Allocation probability p^(m).
    pub p: f64,
    /// Duty cycle ρ^(m).
    pub rho: f64,
    pub airtime_bits: f64,
    pub bitrate: f64,
    /// Mean number of simultaneously active devices N̄^(m).
    pub mean_active: f64,
    /// Linear SNR threshold Υ_n^(m).
    pub qos_threshold_lin: f64,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Model(msg));
        if !(self.r1 > 0.0 && self.r2 > self.r1 && self.r2.is_finite()) {
            return bad(format!("need 0 < R1 < R2, got R1={} R2={}", self.r1, self.r2));
        }
        if self.n_devices < 1 {
            return bad("need at least one end device".into());
        }
        if !(self.t_in > 0.0) {
            return bad(format!("T_in must be positive, got {}", self.t_in));
        }
        if !(self.bw > 0.0) {
            return bad(format!("bandwidth must be positive, got {}", self.bw));
        }
        if !(1..=4).contains(&self.cr) {
            return bad(format!("CR must be in 1..=4, got {}", self.cr));
        }
        if !(self.f_c > 0.0) {
            return bad(format!("carrier frequency must be positive, got {}", self.f_c));
        }
        if !(self.beta >= 2.0) || !self.beta.is_finite() {
            return bad(format!("pathloss exponent must be >= 2, got {}", self.beta));
        }
        if !self.p_t_dbm.is_finite() || !self.nf_db.is_finite() {
            return bad("transmit power and noise figure must be finite".into());
        }
        if self.sf_set.is_empty() {
            return bad("SF set is empty".into());
        }
        let mut sorted = self.sf_set.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.sf_set.len() {
            return bad("SF set has duplicates".into());
        }
        Ok(())
    }

    /// p^(m) ∝ m / 2^m, normalised over the configured SF set. Zero for SFs
    /// outside the set.
    pub fn allocation_prob(&self, m: SpreadingFactor) -> f64 {
        if !self.sf_set.contains(&m) {
            return 0.0;
        }
        let w = |s: SpreadingFactor| f64::from(s.get()) / s.chips() as f64;
        w(m) / self.sf_set.iter().map(|&s| w(s)).sum::<f64>()
    }

    /// Packet length L_pac^(m) in bits.
    pub fn airtime_bits(&self, m: SpreadingFactor) -> f64 {
        let mf = f64::from(m.get());
        let num = 8.0 * f64::from(self.l_pl) - 4.0 * mf + 28.0 + f64::from(self.l_crc)
            - f64::from(self.l_hd);
        let payload_symbols = (num / (4.0 * mf)).ceil().max(0.0);
        mf * (f64::from(self.n_pre) + 4.25 + 8.0 + f64::from(4 + self.cr) * payload_symbols)
    }

    /// Bit rate G^(m) in bit/s.
    pub fn bitrate(&self, m: SpreadingFactor) -> f64 {
        f64::from(m.get()) * self.bw / m.chips() as f64 * 4.0 / f64::from(4 + self.cr)
    }

    pub fn airtime_seconds(&self, m: SpreadingFactor) -> f64 {
        self.airtime_bits(m) / self.bitrate(m)
    }

    /// ρ^(m) = L_pac / (T_in G).
    pub fn duty_cycle(&self, m: SpreadingFactor) -> f64 {
        self.airtime_bits(m) / (self.t_in * self.bitrate(m))
    }

    /// N̄^(m) = ρ^(m) p^(m) N.
    pub fn mean_active(&self, m: SpreadingFactor) -> f64 {
        self.duty_cycle(m) * self.allocation_prob(m) * self.n_devices as f64
    }

    /// K_0 = (4π f_c / c)^β.
    pub fn pathloss_constant(&self) -> f64 {
        (4.0 * std::f64::consts::PI * self.f_c / SPEED_OF_LIGHT).powf(self.beta)
    }

    /// K_0 r^β.
    pub fn pathloss(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::domain("pathloss", format!("distance must be positive, got {r}")));
        }
        Ok(self.pathloss_constant() * r.powf(self.beta))
    }

    /// Thermal noise power σ² in mW.
    pub fn noise_power_mw(&self) -> f64 {
        db_to_lin(-174.0 + self.nf_db + 10.0 * self.bw.log10())
    }

    pub fn tx_power_mw(&self) -> f64 {
        db_to_lin(self.p_t_dbm)
    }

    /// P_ς = P_t / K_0 in mW.
    pub fn p_varsigma(&self) -> f64 {
        self.tx_power_mw() / self.pathloss_constant()
    }

    pub fn profile(&self, m: SpreadingFactor) -> SfProfile {
        SfProfile {
            m,
            p: self.allocation_prob(m),
            rho: self.duty_cycle(m),
            airtime_bits: self.airtime_bits(m),
            bitrate: self.bitrate(m),
            mean_active: self.mean_active(m),
            qos_threshold_lin: qos_threshold_lin(m),
        }
    }

    pub fn profiles(&self) -> Vec<SfProfile> {
        self.sf_set.iter().map(|&m| self.profile(m)).collect()
    }
}

/// Υ_n^(m) = -7.5 - 2.5 (m - 7) dB, as a linear ratio.
pub fn qos_threshold_lin(m: SpreadingFactor) -> f64 {
    db_to_lin(qos_threshold_db(m))
}

pub fn qos_threshold_db(m: SpreadingFactor) -> f64 {
    -7.5 - 2.5 * f64::from(m.get() - 7)
}

// Rows: interferer SF 7..12. Columns: desired SF 7..12.
const REJECTION_DB: [[f64; 6]; 6] = [
    [1.0, -8.0, -9.0, -9.0, -9.0, -9.0],
    [-11.0, 1.0, -11.0, -12.0, -13.0, -13.0],
    [-15.0, -13.0, 1.0, -13.0, -14.0, -15.0],
    [-19.0, -18.0, -17.0, 1.0, -17.0, -18.0],
    [-22.0, -22.0, -21.0, -20.0, 1.0, -20.0],
    [-25.0, -25.0, -25.0, -24.0, -23.0, 1.0],
];

/// Co-SF and inter-SF rejection thresholds Υ^(m, m̃) (SX1272 figures by default).
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTable {
    /// dB values, `db[interferer][desired]`.
    db: [[f64; 6]; 6],
}

impl Default for SensitivityTable {
    fn default() -> Self {
        Self { db: REJECTION_DB }
    }
}

impl SensitivityTable {
    /// Build from dB entries indexed `[interferer][desired]`.
    pub fn from_db(db: [[f64; 6]; 6]) -> Result<Self> {
        for (i, row) in db.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Model(format!("non-finite threshold at row {i}, column {j}")));
                }
                if i == j && (v - 1.0).abs() > 1e-12 {
                    return Err(Error::Model(format!("diagonal entry {i} is {v} dB, expected 1 dB")));
                }
                if i != j && v >= 0.0 {
                    return Err(Error::Model(format!(
                        "off-diagonal entry ({i}, {j}) must be negative in dB, got {v}"
                    )));
                }
            }
        }
        Ok(Self { db })
    }

    /// Parse a 6×6 comma-separated table of dB values, one interferer SF per
    /// row. Blank lines and `#` comments are ignored.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut db = [[0.0; 6]; 6];
        let mut rows = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if rows == 6 {
                return Err(Error::Parse(format!("line {}: more than 6 rows", lineno + 1)));
            }
            let vals: Vec<&str> = line.split(',').map(str::trim).collect();
            if vals.len() != 6 {
                return Err(Error::Parse(format!(
                    "line {}: expected 6 values, found {}",
                    lineno + 1,
                    vals.len()
                )));
            }
            for (j, v) in vals.iter().enumerate() {
                db[rows][j] = v
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad number {v:?}", lineno + 1)))?;
            }
            rows += 1;
        }
        if rows != 6 {
            return Err(Error::Parse(format!("expected 6 rows, found {rows}")));
        }
        Self::from_db(db)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse_csv(&text)
    }

    pub fn to_csv(&self) -> String {
        self.db
            .iter()
            .map(|row| row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }

    pub fn db(&self, desired: SpreadingFactor, interferer: SpreadingFactor) -> f64 {
        self.db[interferer.index()][desired.index()]
    }

    pub fn lin(&self, desired: SpreadingFactor, interferer: SpreadingFactor) -> f64 {
        db_to_lin(self.db(desired, interferer))
    }

    /// Co-SF threshold Υ^(m).
    pub fn co_sf_lin(&self, m: SpreadingFactor) -> f64 {
        self.lin(m, m)
    }
}
