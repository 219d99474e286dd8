//! Experiment configuration: flat `key = value` text with `#` comments.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fas_lora::analytic::CoverageMethod;
use fas_lora::channel::{BlockFit, FasGeometry};
use fas_lora::network::{NetworkConfig, SpreadingFactor};

use crate::error::CliError;

/// Speed of light (m/s), for the header's wavelength line.
const LIGHT_SPEED: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    ChannelStats,
    Analyze,
    Simulate,
    Sweep,
    PhyDemo,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::ChannelStats, Mode::Analyze, Mode::Simulate, Mode::Sweep, Mode::PhyDemo];

    pub fn name(self) -> &'static str {
        match self {
            Mode::ChannelStats => "channel-stats",
            Mode::Analyze => "analyze",
            Mode::Simulate => "simulate",
            Mode::Sweep => "sweep",
            Mode::PhyDemo => "phy-demo",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    N,
    R2,
    W,
    SF,
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::N => "N",
            SweepVariable::R2 => "R2",
            SweepVariable::W => "W",
            SweepVariable::SF => "SF",
        })
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "N" => Ok(SweepVariable::N),
            "R2" => Ok(SweepVariable::R2),
            "W" => Ok(SweepVariable::W),
            "SF" => Ok(SweepVariable::SF),
            _ => Err(format!("expected one of N, R2, W, SF; got {s:?}")),
        }
    }
}

/// Receiver antenna mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Antenna {
    Single,
    /// Single antenna with the transmit power raised by this many dB.
    SingleBoost(f64),
    /// FAS with the configured geometry.
    Fas,
}

impl fmt::Display for Antenna {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Antenna::Single => f.write_str("single"),
            Antenna::SingleBoost(db) => write!(f, "single+{db}dB"),
            Antenna::Fas => f.write_str("fas"),
        }
    }
}

impl FromStr for Antenna {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single" => Ok(Antenna::Single),
            "fas" => Ok(Antenna::Fas),
            _ => s
                .strip_prefix("single+")
                .and_then(|r| r.strip_suffix("dB"))
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .map(Antenna::SingleBoost)
                .ok_or_else(|| format!("expected single, single+<x>dB or fas; got {s:?}")),
        }
    }
}

/// Port-gain source for FAS Monte Carlo runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FasChannel {
    Exact,
    Block,
}

fn method_name(m: CoverageMethod) -> String {
    m.to_string()
}

fn parse_method(s: &str) -> Result<CoverageMethod, String> {
    match s {
        "montecarlo" => Ok(CoverageMethod::MonteCarlo),
        "reference" => Ok(CoverageMethod::Reference),
        "closed" => Ok(CoverageMethod::Closed),
        _ => Err(format!("expected montecarlo, reference or closed; got {s:?}")),
    }
}

fn block_fit_text(fit: &BlockFit) -> String {
    match fit {
        BlockFit::Dominant { ratio, mu_sq } => format!("dominant:{ratio}:{mu_sq}"),
        BlockFit::EnergyFraction(f) => format!("energy:{f}"),
    }
}

fn parse_block_fit(s: &str) -> Result<BlockFit, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |v: &str| v.parse::<f64>().map_err(|_| format!("bad number {v:?}"));
    match parts.as_slice() {
        ["dominant"] => Ok(BlockFit::default()),
        ["dominant", r, m] => Ok(BlockFit::Dominant { ratio: num(r)?, mu_sq: num(m)? }),
        ["energy", f] => Ok(BlockFit::EnergyFraction(num(f)?)),
        _ => Err(format!("expected dominant[:ratio:mu_sq] or energy:<fraction>; got {s:?}")),
    }
}

/// Everything one run needs, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub cfg: NetworkConfig,
    pub geometry: FasGeometry,
    pub ports_per_wavelength: f64,
    /// Desired SFs evaluated at each point.
    pub sf: Vec<SpreadingFactor>,
    pub sweep: Option<(SweepVariable, Vec<f64>)>,
    pub trials: u64,
    pub seed: u64,
    /// Worker threads for Monte Carlo (0 = all cores).
    pub workers: usize,
    pub output: PathBuf,
    pub antennas: Vec<Antenna>,
    pub methods: Vec<CoverageMethod>,
    pub block_fit: BlockFit,
    pub fas_channel: FasChannel,
    /// Optional 6×6 rejection table (dB) replacing the built-in one.
    pub thresholds: Option<PathBuf>,
    /// Also write a gnuplot script next to each CSV.
    pub plot: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let ppw = 12.0;
        Self {
            mode: Mode::Analyze,
            cfg: NetworkConfig::default(),
            geometry: FasGeometry::with_density(1.0, 1.0, ppw).expect("valid default geometry"),
            ports_per_wavelength: ppw,
            sf: vec![SpreadingFactor::new(9).expect("valid SF")],
            sweep: None,
            trials: 10_000,
            seed: 1,
            workers: 0,
            output: PathBuf::from("fas-lora-out.csv"),
            antennas: vec![Antenna::Single, Antenna::SingleBoost(10.0), Antenna::Fas],
            methods: vec![CoverageMethod::MonteCarlo, CoverageMethod::Reference, CoverageMethod::Closed],
            block_fit: BlockFit::default(),
            fas_channel: FasChannel::Exact,
            thresholds: None,
            plot: false,
        }
    }
}

fn usage(key: &str, message: impl Into<String>) -> CliError {
    CliError::Usage { key: key.to_string(), message: message.into() }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| usage(key, format!("cannot parse {v:?}")))
}

/// Counts accept plain integers and exact float notation such as `1e4`.
fn count(key: &str, v: &str) -> Result<u64, CliError> {
    if let Ok(n) = v.parse::<u64>() {
        return Ok(n);
    }
    match v.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
        _ => Err(usage(key, format!("expected a nonnegative integer, got {v:?}"))),
    }
}

fn sf_list(key: &str, v: &str) -> Result<Vec<SpreadingFactor>, CliError> {
    list(v)
        .map(|s| {
            let m: u8 = num(key, s)?;
            SpreadingFactor::new(m).map_err(|_| usage(key, format!("SF must be in 7..=12, got {m}")))
        })
        .collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentSpec {
    /// Parse configuration text; unspecified keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut spec = Self::default();
        let (mut w1, mut w2) = (spec.geometry.w1, spec.geometry.w2);
        let mut sweep_var: Option<SweepVariable> = None;
        let mut sweep_values: Option<Vec<f64>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| usage(line, format!("line {}: expected `key = value`", lineno + 1)))?;
            let c = &mut spec.cfg;
            match key {
                "mode" => spec.mode = value.parse().map_err(|e: String| usage(key, e))?,
                "R1" => c.r1 = num(key, value)?,
                "R2" => c.r2 = num(key, value)?,
                "N" => c.n_devices = count(key, value)?,
                "T_in" => c.t_in = num(key, value)?,
                "BW" => c.bw = num(key, value)?,
                "CR" => c.cr = num(key, value)?,
                "L_pl" => c.l_pl = num(key, value)?,
                "N_pre" => c.n_pre = num(key, value)?,
                "L_hd" => c.l_hd = num(key, value)?,
                "L_crc" => c.l_crc = num(key, value)?,
                "f_c" => c.f_c = num(key, value)?,
                "beta" => c.beta = num(key, value)?,
                "P_t_dBm" => c.p_t_dbm = num(key, value)?,
                "NF_dB" => c.nf_db = num(key, value)?,
                "sf_set" => c.sf_set = sf_list(key, value)?,
                "W1" => w1 = num(key, value)?,
                "W2" => w2 = num(key, value)?,
                "ports_per_wavelength" => spec.ports_per_wavelength = num(key, value)?,
                "sf" => spec.sf = sf_list(key, value)?,
                "sweep" => {
                    sweep_var = if value == "none" {
                        None
                    } else {
                        Some(value.parse().map_err(|e: String| usage(key, e))?)
                    }
                }
                "sweep_values" => sweep_values = Some(list(value).map(|v| num(key, v)).collect::<Result<_, _>>()?),
                "trials" => spec.trials = count(key, value)?,
                "seed" => spec.seed = count(key, value)?,
                "workers" => spec.workers = count(key, value)? as usize,
                "output" => spec.output = PathBuf::from(value),
                "antennas" => {
                    spec.antennas = list(value).map(|a| a.parse().map_err(|e: String| usage(key, e))).collect::<Result<_, _>>()?
                }
                "methods" => {
                    spec.methods = list(value).map(|m| parse_method(m).map_err(|e| usage(key, e))).collect::<Result<_, _>>()?
                }
                "block_fit" => spec.block_fit = parse_block_fit(value).map_err(|e| usage(key, e))?,
                "fas_channel" => {
                    spec.fas_channel = match value {
                        "exact" => FasChannel::Exact,
                        "block" => FasChannel::Block,
                        _ => return Err(usage(key, format!("expected exact or block, got {value:?}"))),
                    }
                }
                "thresholds" => spec.thresholds = if value == "builtin" { None } else { Some(PathBuf::from(value)) },
                "plot" => spec.plot = num(key, value)?,
                _ => return Err(usage(key, "unknown key")),
            }
        }
        spec.sweep = match (sweep_var, sweep_values) {
            (Some(v), Some(vals)) => Some((v, vals)),
            (Some(v), None) => Some((v, Vec::new())),
            (None, Some(vals)) if !vals.is_empty() => return Err(usage("sweep_values", "given without `sweep`")),
            (None, _) => None,
        };
        if !(w1 > 0.0 && w2 > 0.0 && w1.is_finite() && w2.is_finite()) {
            return Err(usage(if w1 > 0.0 { "W2" } else { "W1" }, "aperture must be positive"));
        }
        if !(spec.ports_per_wavelength > 0.0 && spec.ports_per_wavelength.is_finite()) {
            return Err(usage("ports_per_wavelength", "must be positive"));
        }
        spec.geometry = FasGeometry::with_density(w1, w2, spec.ports_per_wavelength).map_err(|e| usage("W1", e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Check invariants, naming the offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        let c = &self.cfg;
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() { Ok(()) } else { Err(usage(key, format!("must be positive, got {v}"))) }
        };
        positive("R1", c.r1)?;
        positive("R2", c.r2)?;
        if c.r1 >= c.r2 {
            return Err(usage("R1", format!("need R1 < R2, got R1 = {} and R2 = {}", c.r1, c.r2)));
        }
        if c.n_devices < 1 {
            return Err(usage("N", "need at least one end device"));
        }
        positive("T_in", c.t_in)?;
        positive("BW", c.bw)?;
        if !(1..=4).contains(&c.cr) {
            return Err(usage("CR", format!("must be in 1..=4, got {}", c.cr)));
        }
        positive("f_c", c.f_c)?;
        if !(c.beta >= 2.0 && c.beta.is_finite()) {
            return Err(usage("beta", format!("must be at least 2, got {}", c.beta)));
        }
        if !c.p_t_dbm.is_finite() {
            return Err(usage("P_t_dBm", "must be finite"));
        }
        if !c.nf_db.is_finite() {
            return Err(usage("NF_dB", "must be finite"));
        }
        if c.sf_set.is_empty() {
            return Err(usage("sf_set", "must not be empty"));
        }
        let mut sorted = c.sf_set.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != c.sf_set.len() {
            return Err(usage("sf_set", "has duplicates"));
        }
        if self.sf.is_empty() {
            return Err(usage("sf", "must not be empty"));
        }
        if let Some(m) = self.sf.iter().find(|m| !c.sf_set.contains(m)) {
            return Err(usage("sf", format!("SF{m} is not in sf_set")));
        }
        if self.trials < 1 {
            return Err(usage("trials", "need at least one trial"));
        }
        if self.antennas.is_empty() {
            return Err(usage("antennas", "must not be empty"));
        }
        if self.methods.is_empty() {
            return Err(usage("methods", "must not be empty"));
        }
        match self.block_fit {
            BlockFit::Dominant { ratio, mu_sq } if !(ratio > 0.0 && ratio <= 1.0 && (0.0..1.0).contains(&mu_sq)) => {
                return Err(usage("block_fit", "dominant ratio must be in (0, 1] and mu_sq in [0, 1)"));
            }
            BlockFit::EnergyFraction(f) if !(f > 0.0 && f <= 1.0) => {
                return Err(usage("block_fit", "energy fraction must be in (0, 1]"));
            }
            _ => {}
        }
        if self.mode == Mode::Sweep && self.sweep.is_none() {
            return Err(usage("sweep", "mode sweep needs a sweep variable"));
        }
        if let Some((var, values)) = &self.sweep {
            if values.is_empty() {
                return Err(usage("sweep_values", "must not be empty"));
            }
            for &v in values {
                let ok = match var {
                    SweepVariable::N => v >= 1.0 && v.fract() == 0.0,
                    SweepVariable::R2 => v > c.r1 && v.is_finite(),
                    SweepVariable::W => v > 0.0 && v.is_finite(),
                    SweepVariable::SF => {
                        v.fract() == 0.0 && (7.0..=12.0).contains(&v) && c.sf_set.iter().any(|m| f64::from(m.get()) == v)
                    }
                };
                if !ok {
                    return Err(usage("sweep_values", format!("{v} is not a valid {var} value")));
                }
            }
        }
        Ok(())
    }

    /// Canonical `key = value` text; parsing it gives back the same spec.
    pub fn to_config_text(&self) -> String {
        let c = &self.cfg;
        let (sweep, values) = match &self.sweep {
            Some((v, vals)) => (v.to_string(), join(vals)),
            None => ("none".to_string(), String::new()),
        };
        let methods: Vec<String> = self.methods.iter().map(|&m| method_name(m)).collect();
        let entries: Vec<(&str, String)> = vec![
            ("mode", self.mode.to_string()),
            ("R1", c.r1.to_string()),
            ("R2", c.r2.to_string()),
            ("N", c.n_devices.to_string()),
            ("T_in", c.t_in.to_string()),
            ("BW", c.bw.to_string()),
            ("CR", c.cr.to_string()),
            ("L_pl", c.l_pl.to_string()),
            ("N_pre", c.n_pre.to_string()),
            ("L_hd", c.l_hd.to_string()),
            ("L_crc", c.l_crc.to_string()),
            ("f_c", c.f_c.to_string()),
            ("beta", c.beta.to_string()),
            ("P_t_dBm", c.p_t_dbm.to_string()),
            ("NF_dB", c.nf_db.to_string()),
            ("sf_set", join(&c.sf_set.iter().map(|m| m.get()).collect::<Vec<_>>())),
            ("W1", self.geometry.w1.to_string()),
            ("W2", self.geometry.w2.to_string()),
            ("ports_per_wavelength", self.ports_per_wavelength.to_string()),
            ("sf", join(&self.sf.iter().map(|m| m.get()).collect::<Vec<_>>())),
            ("sweep", sweep),
            ("sweep_values", values),
            ("trials", self.trials.to_string()),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
            ("output", self.output.display().to_string()),
            ("antennas", join(&self.antennas)),
            ("methods", methods.join(", ")),
            ("block_fit", block_fit_text(&self.block_fit)),
            ("fas_channel", match self.fas_channel {
                FasChannel::Exact => "exact".into(),
                FasChannel::Block => "block".into(),
            }),
            ("thresholds", self.thresholds.as_ref().map_or("builtin".into(), |p| p.display().to_string())),
            ("plot", self.plot.to_string()),
        ];
        entries.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Carrier wavelength in metres.
    pub fn wavelength(&self) -> f64 {
        LIGHT_SPEED / self.cfg.f_c
    }

    /// Output header: the resolved configuration as `# key = value` lines,
    /// then derived values as `# # ...` lines (comments on reload).
    pub fn header(&self) -> String {
        let mut h = format!("# # fas-lora {} {} output\n", env!("CARGO_PKG_VERSION"), self.mode);
        for line in self.to_config_text().lines() {
            h.push_str("# ");
            h.push_str(line);
            h.push('\n');
        }
        h.push_str(&format!("# # wavelength_m = {:.3}\n", self.wavelength()));
        h.push_str(&format!(
            "# # ports = {} x {} = {}\n",
            self.geometry.l1,
            self.geometry.l2,
            self.geometry.ports()
        ));
        h
    }

    /// Recover the spec embedded in an output file's leading `#` lines.
    pub fn from_header(text: &str) -> Result<Self, CliError> {
        let body: String = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| format!("{}\n", l[1..].strip_prefix(' ').unwrap_or(&l[1..])))
            .collect();
        Self::parse(&body)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
    ExperimentSpec::parse(&text)
}
