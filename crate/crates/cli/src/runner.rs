//! Experiment pipelines behind each mode.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use fas_lora::analytic::{coverage_closed, coverage_reference, CoverageInputs, CoverageMethod};
use fas_lora::channel::{jakes_correlation, BlockModel, ExactSampler, FasGeometry};
use fas_lora::evtapprox::{gumbel_fit, EnvelopeFit, FitReport, GammaParams};
use fas_lora::network::{NetworkConfig, SensitivityTable, SpreadingFactor};
use fas_lora::phy::fig1_demo;
use fas_lora::quadrature::QuadratureSpec;
use fas_lora::sim::{estimate_coverage, trial_rng, SimChannel, SimSetup};
use fas_lora::stats::ks_distance;

use crate::config::{Antenna, ExperimentSpec, FasChannel, Mode, SweepVariable};
use crate::error::CliError;

pub const COVERAGE_HEADER: &str = "sf,N,R2,W1,W2,antenna,method,p_cov,half_ci";
pub const CHANNEL_HEADER: &str = "W1,W2,quantity,x,empirical,gumbel_fit,gamma_fit";

/// Grid points per CDF curve in channel-stats output.
const CDF_POINTS: usize = 201;

/// Run the experiment and return the files written.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<PathBuf>, CliError> {
    spec.validate()?;
    match spec.mode {
        Mode::ChannelStats => channel_stats(spec),
        Mode::Analyze | Mode::Simulate | Mode::Sweep => coverage(spec),
        Mode::PhyDemo => phy_demo(spec),
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })
}

/// `dir/stem<suffix>.<ext>` next to the main output.
fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Debug, Clone)]
struct Point {
    cfg: NetworkConfig,
    geometry: FasGeometry,
    sf: SpreadingFactor,
}

fn points(spec: &ExperimentSpec) -> Result<Vec<Point>, CliError> {
    let base = |sf| Point { cfg: spec.cfg.clone(), geometry: spec.geometry, sf };
    let Some((var, values)) = spec.sweep.as_ref().filter(|_| spec.mode == Mode::Sweep) else {
        return Ok(spec.sf.iter().map(|&m| base(m)).collect());
    };
    let mut values = values.clone();
    values.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for v in values {
        if *var == SweepVariable::SF {
            out.push(base(SpreadingFactor::new(v as u8)?));
            continue;
        }
        for &m in &spec.sf {
            let mut p = base(m);
            match var {
                SweepVariable::N => p.cfg.n_devices = v as u64,
                SweepVariable::R2 => p.cfg.r2 = v,
                SweepVariable::W => p.geometry = FasGeometry::with_density(v, v, spec.ports_per_wavelength)?,
                SweepVariable::SF => unreachable!(),
            }
            out.push(p);
        }
    }
    Ok(out)
}

/// Fitted channel of one FAS geometry.
struct FasChannelFit {
    model: BlockModel,
    power: GammaParams,
    exact: Option<Arc<ExactSampler>>,
}

fn fit_geometry(spec: &ExperimentSpec, geometry: &FasGeometry, need_exact: bool) -> Result<FasChannelFit, CliError> {
    let sigma = jakes_correlation(geometry);
    let model = spec.block_fit.fit(&sigma)?;
    let power = gumbel_fit(&model).gamma_fit(2)?;
    let exact = if need_exact { Some(Arc::new(ExactSampler::new(&sigma)?)) } else { None };
    Ok(FasChannelFit { model, power, exact })
}

fn geometry_key(g: &FasGeometry) -> (u64, u64) {
    (g.w1.to_bits(), g.w2.to_bits())
}

fn thresholds(spec: &ExperimentSpec) -> Result<SensitivityTable, CliError> {
    match &spec.thresholds {
        Some(p) => SensitivityTable::load(p).map_err(|e| CliError::Usage { key: "thresholds".into(), message: e.to_string() }),
        None => Ok(SensitivityTable::default()),
    }
}

fn antenna_label(a: Antenna, g: &FasGeometry) -> String {
    match a {
        Antenna::Fas => format!("fas_{}x{}", g.w1, g.w2),
        other => other.to_string(),
    }
}

fn methods(spec: &ExperimentSpec) -> Vec<CoverageMethod> {
    match spec.mode {
        Mode::Simulate => vec![CoverageMethod::MonteCarlo],
        Mode::Analyze => {
            let m: Vec<_> = spec.methods.iter().copied().filter(|&m| m != CoverageMethod::MonteCarlo).collect();
            if m.is_empty() { vec![CoverageMethod::Reference, CoverageMethod::Closed] } else { m }
        }
        _ => spec.methods.clone(),
    }
}

fn coverage_rows(
    spec: &ExperimentSpec,
    point: &Point,
    fits: &HashMap<(u64, u64), FasChannelFit>,
    table: &SensitivityTable,
    methods: &[CoverageMethod],
) -> Result<Vec<String>, CliError> {
    let quad = QuadratureSpec::default();
    let fas = &fits[&geometry_key(&point.geometry)];
    let mut rows = Vec::new();
    for &antenna in &spec.antennas {
        let mut cfg = point.cfg.clone();
        let (power, channel) = match antenna {
            Antenna::Single => (GammaParams::new(1.0, 1.0, 2)?, SimChannel::SingleAntenna),
            Antenna::SingleBoost(db) => {
                cfg.p_t_dbm += db;
                (GammaParams::new(1.0, 1.0, 2)?, SimChannel::SingleAntenna)
            }
            Antenna::Fas => {
                let channel = match (&fas.exact, spec.fas_channel) {
                    (Some(s), FasChannel::Exact) => SimChannel::Exact(s.clone()),
                    _ => SimChannel::Block(fas.model.clone()),
                };
                (fas.power, channel)
            }
        };
        for &method in methods {
            let (p, half) = match method {
                CoverageMethod::Reference => {
                    (coverage_reference(&CoverageInputs::new(&cfg, point.sf, power, table)?, &quad)?, None)
                }
                CoverageMethod::Closed => {
                    (coverage_closed(&CoverageInputs::new(&cfg, point.sf, power, table)?, &quad)?.p_cov, None)
                }
                CoverageMethod::MonteCarlo => {
                    let setup = SimSetup::new(&cfg, point.sf, table, channel.clone())?;
                    let est = estimate_coverage(&setup, spec.trials, spec.seed, spec.workers)?;
                    (est.p_cov, Some(est.half_ci95))
                }
            };
            rows.push(format!(
                "{},{},{},{},{},{},{method},{p},{}",
                point.sf,
                cfg.n_devices,
                cfg.r2,
                point.geometry.w1,
                point.geometry.w2,
                antenna_label(antenna, &point.geometry),
                half.map(|h| h.to_string()).unwrap_or_default()
            ));
        }
    }
    Ok(rows)
}

fn coverage(spec: &ExperimentSpec) -> Result<Vec<PathBuf>, CliError> {
    let table = thresholds(spec)?;
    let points = points(spec)?;
    let methods = methods(spec);
    let need_exact = spec.fas_channel == FasChannel::Exact
        && methods.contains(&CoverageMethod::MonteCarlo)
        && spec.antennas.contains(&Antenna::Fas);
    let mut geometries: Vec<FasGeometry> = Vec::new();
    for p in &points {
        if !geometries.iter().any(|g| geometry_key(g) == geometry_key(&p.geometry)) {
            geometries.push(p.geometry);
        }
    }
    let fits: HashMap<_, _> = geometries
        .par_iter()
        .map(|g| Ok((geometry_key(g), fit_geometry(spec, g, need_exact)?)))
        .collect::<Result<_, CliError>>()?;
    let rows: Vec<Vec<String>> = points
        .par_iter()
        .map(|p| coverage_rows(spec, p, &fits, &table, &methods))
        .collect::<Result<_, _>>()?;

    let mut text = spec.header();
    text.push_str(COVERAGE_HEADER);
    text.push('\n');
    for r in rows.iter().flatten() {
        text.push_str(r);
        text.push('\n');
    }
    write(&spec.output, &text)?;
    let mut written = vec![spec.output.clone()];
    if spec.plot {
        let script = sibling(&spec.output, "", "gp");
        write(&script, &coverage_plot(spec, &rows.concat()))?;
        written.push(script);
    }
    Ok(written)
}

fn coverage_plot(spec: &ExperimentSpec, rows: &[String]) -> String {
    let (column, label) = match spec.sweep.as_ref().filter(|_| spec.mode == Mode::Sweep).map(|s| s.0) {
        Some(SweepVariable::SF) => (1, "SF"),
        Some(SweepVariable::R2) => (3, "R2 (m)"),
        Some(SweepVariable::W) => (4, "W (wavelengths)"),
        _ => (2, "N"),
    };
    let mut series: Vec<(String, String)> = Vec::new();
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        let key = (f[5].to_string(), f[6].to_string());
        if !series.contains(&key) {
            series.push(key);
        }
    }
    let data = file_name(&spec.output);
    let plots: Vec<String> = series
        .iter()
        .map(|(a, m)| {
            format!(
                "'{data}' using {column}:(strcol(6) eq \"{a}\" && strcol(7) eq \"{m}\" ? $8 : 1/0) with linespoints title \"{a} {m}\""
            )
        })
        .collect();
    let logscale = if column == 2 { "set logscale x\n" } else { "" };
    format!(
        "set datafile separator ','\nset datafile commentschars '#'\nset key outside\n{logscale}set xlabel '{label}'\nset ylabel 'coverage probability'\nset yrange [0:1]\nplot {}\n",
        plots.join(", \\\n     ")
    )
}

/// Empirical CDF of sorted samples at x.
fn ecdf(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}

fn channel_stats(spec: &ExperimentSpec) -> Result<Vec<PathBuf>, CliError> {
    let geometries: Vec<FasGeometry> = match &spec.sweep {
        Some((SweepVariable::W, values)) => {
            let mut v = values.clone();
            v.sort_by(f64::total_cmp);
            v.iter().map(|&w| FasGeometry::with_density(w, w, spec.ports_per_wavelength)).collect::<Result<_, _>>()?
        }
        _ => vec![spec.geometry],
    };
    let results: Vec<(String, String)> = geometries
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let sigma = jakes_correlation(g);
            let model = spec.block_fit.fit(&sigma)?;
            let fit = gumbel_fit(&model);
            let power = fit.gamma_fit(2)?;
            let sampler = ExactSampler::new(&sigma)?;
            let mut env = sampler.max_envelopes(spec.trials as usize, &mut trial_rng(spec.seed, i as u64));
            env.sort_by(f64::total_cmp);
            let pw: Vec<f64> = env.iter().map(|r| r * r).collect();
            let report = FitReport {
                w1: g.w1,
                w2: g.w2,
                ports: g.ports(),
                blocks: model.count(),
                envelope: fit,
                power_fit: power,
                ks_envelope: Some(ks_distance(&env, |x| fit.cdf(x))),
                ks_power: Some(ks_distance(&pw, |x| power.cdf(x))),
            };
            Ok((cdf_rows(g, &fit, &power, &env, &pw), report.csv_row()))
        })
        .collect::<Result<_, CliError>>()?;

    let mut text = spec.header();
    text.push_str(CHANNEL_HEADER);
    text.push('\n');
    let mut summary = spec.header();
    summary.push_str(FitReport::CSV_HEADER);
    summary.push('\n');
    for (rows, report) in &results {
        text.push_str(rows);
        summary.push_str(report);
        summary.push('\n');
    }
    let fit_path = sibling(&spec.output, "_fit", "csv");
    write(&spec.output, &text)?;
    write(&fit_path, &summary)?;
    let mut written = vec![spec.output.clone(), fit_path];
    if spec.plot {
        let script = sibling(&spec.output, "", "gp");
        let data = file_name(&spec.output);
        let curve = |q: &str, col: usize, title: &str| {
            format!("'{data}' using 4:(strcol(3) eq \"{q}\" ? ${col} : 1/0) with lines title \"{q} {title}\"")
        };
        write(
            &script,
            &format!(
                "set datafile separator ','\nset datafile commentschars '#'\nset key bottom right\nset ylabel 'CDF'\nplot {}, \\\n     {}, \\\n     {}\n",
                curve("envelope", 5, "empirical (exact)"),
                curve("envelope", 6, "Gumbel fit"),
                curve("envelope", 7, "Gamma fit")
            ),
        )?;
        written.push(script);
    }
    Ok(written)
}

fn cdf_rows(g: &FasGeometry, fit: &EnvelopeFit, power: &GammaParams, env: &[f64], pw: &[f64]) -> String {
    let mut s = String::new();
    let top = env.last().copied().unwrap_or(1.0) * 1.05;
    for k in 0..CDF_POINTS {
        let x = top * k as f64 / (CDF_POINTS - 1) as f64;
        s.push_str(&format!("{},{},envelope,{x},{},{},{}\n", g.w1, g.w2, ecdf(env, x), fit.cdf(x), power.cdf(x * x)));
    }
    let top = pw.last().copied().unwrap_or(1.0) * 1.05;
    for k in 0..CDF_POINTS {
        let x = top * k as f64 / (CDF_POINTS - 1) as f64;
        s.push_str(&format!("{},{},power,{x},{},{},{}\n", g.w1, g.w2, ecdf(pw, x), fit.cdf(x.sqrt()), power.cdf(x)));
    }
    s
}

fn phy_demo(spec: &ExperimentSpec) -> Result<Vec<PathBuf>, CliError> {
    let demo = fig1_demo();
    let combined = sibling(&spec.output, "_combined", "csv");
    let header = spec.header();
    write(&spec.output, &format!("{header}{}", demo.separated_csv()))?;
    write(&combined, &format!("{header}{}", demo.combined_csv()))?;
    let mut written = vec![spec.output.clone(), combined.clone()];
    if spec.plot {
        let script = sibling(&spec.output, "", "gp");
        let plots: Vec<String> = demo
            .components
            .iter()
            .map(|(label, _)| {
                format!(
                    "'{}' using 1:(strcol(2) eq \"{label}\" ? $3 : 1/0) with impulses title \"{label}\"",
                    file_name(&spec.output)
                )
            })
            .collect();
        write(
            &script,
            &format!(
                "set datafile separator ','\nset datafile commentschars '#'\nset xlabel 'bin'\nset ylabel 'decision value'\nset multiplot layout 2,1\nplot {}\nplot '{}' using 1:3 with impulses title \"combined\"\nunset multiplot\n",
                plots.join(", \\\n     "),
                file_name(&combined)
            ),
        )?;
        written.push(script);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("out/run.csv"), "_fit", "csv"), PathBuf::from("out/run_fit.csv"));
        assert_eq!(sibling(Path::new("run.csv"), "", "gp"), PathBuf::from("run.gp"));
    }

    #[test]
    fn ecdf_counts_ties() {
        let s = [1.0, 2.0, 2.0, 3.0];
        assert_eq!(ecdf(&s, 0.5), 0.0);
        assert_eq!(ecdf(&s, 2.0), 0.75);
        assert_eq!(ecdf(&s, 9.0), 1.0);
    }

    #[test]
    fn sweep_points_sorted() {
        let spec = ExperimentSpec::parse("mode = sweep\nsweep = N\nsweep_values = 1e5, 1e3, 1e4\nsf = 8, 9").unwrap();
        let p = points(&spec).unwrap();
        let got: Vec<(u64, u8)> = p.iter().map(|p| (p.cfg.n_devices, p.sf.get())).collect();
        assert_eq!(got, vec![(1000, 8), (1000, 9), (10000, 8), (10000, 9), (100000, 8), (100000, 9)]);
    }

    #[test]
    fn sf_sweep_ignores_sf_list() {
        let spec = ExperimentSpec::parse("mode = sweep\nsweep = SF\nsweep_values = 12, 7").unwrap();
        let sfs: Vec<u8> = points(&spec).unwrap().iter().map(|p| p.sf.get()).collect();
        assert_eq!(sfs, vec![7, 12]);
    }

    #[test]
    fn analyze_drops_monte_carlo() {
        let spec = ExperimentSpec::default();
        assert_eq!(methods(&spec), vec![CoverageMethod::Reference, CoverageMethod::Closed]);
    }
}
