//! Scenario orchestration: fit, propagate, compare with the polaron oracle
//! and write the results with a checksummed manifest.

mod config;
mod sweep;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{linspace, FitSettings, GridSettings, HierarchySettings, QuenchSettings, ScenarioConfig, ScenarioId};
pub use sweep::{convergence_sweep, SweepAxis, SweepReport};

use crate::bath::{BathOptions, FieldTable, SpectralDensityModel};
use crate::error::{Error, Result};
use crate::fitting::{prony_fit, sample_correlation, split_ri, ExponentialFit};
use crate::hierarchy::{propagate, steady_state_detect, write_csv, HeomGenerator, SystemModel, Trajectory};
use crate::io::{density_grid, DensityGrid, FieldSource, GridPoint};
use crate::mat2::Mat2;
use crate::ode::{OdeOptions, OdeStats};
use crate::polaron::solve_omega_r;

/// Data file written by a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HierarchySummary {
    pub modes: usize,
    pub ados: usize,
    pub cutoff: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QubitSummary {
    pub stats: OdeStats,
    pub failure: Option<String>,
    pub final_sigma_z: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolaronSummary {
    pub omega_r: f64,
    pub sigma_z: f64,
    pub residual: f64,
    pub localization_length: Option<f64>,
}

/// Everything needed to audit a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultManifest {
    pub config: ScenarioConfig,
    /// Quench time actually used (configured or detected).
    pub t_q: Option<f64>,
    pub fit: Option<ExponentialFit<f64>>,
    pub hierarchy: Option<HierarchySummary>,
    pub qubit: Option<QubitSummary>,
    pub polaron: Option<PolaronSummary>,
    pub grid: Vec<GridPoint<f64>>,
    pub convergence: Vec<SweepReport>,
    pub files: Vec<FileEntry>,
    /// Set when the pipeline aborted; `files` lists what was written.
    pub error: Option<String>,
}

impl ResultManifest {
    fn new(config: ScenarioConfig) -> Self {
        ResultManifest {
            config,
            t_q: None,
            fit: None,
            hierarchy: None,
            qubit: None,
            polaron: None,
            grid: Vec::new(),
            convergence: Vec::new(),
            files: Vec::new(),
            error: None,
        }
    }

    /// Re-hashes every listed file; returns the names that are missing or
    /// whose checksum differs.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| fs::read(dir.join(&f.name)).map_or(true, |b| hex::encode(Sha256::digest(&b)) != f.sha256))
            .map(|f| f.name.clone())
            .collect()
    }
}

pub const MANIFEST: &str = "manifest.json";
pub const QUBIT_CSV: &str = "qubit.csv";
pub const DENSITY_CSV: &str = "density.csv";
pub const POLARON_CSV: &str = "polaron.csv";

/// Collects output files; all writes go through here.
struct Writer {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Writer {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.files.push(FileEntry { name: name.into(), bytes: bytes.len() as u64, sha256: hex::encode(Sha256::digest(bytes)) });
        Ok(())
    }
}

pub(crate) fn ode_options(h: &HierarchySettings) -> OdeOptions<f64> {
    OdeOptions { abs_tol: h.abs_tol, rel_tol: h.rel_tol, ..Default::default() }
}

pub(crate) fn series_times(g: &GridSettings) -> Vec<f64> {
    let n = (g.horizon / g.series_step + 1e-9).floor() as usize;
    let mut ts: Vec<f64> = (0..=n).map(|k| k as f64 * g.series_step).collect();
    if g.horizon - ts[n] > 1e-9 * g.horizon {
        ts.push(g.horizon);
    }
    ts
}

/// Fit of `C(t)` at zero temperature with the configured window and order.
pub fn fit_kernel(model: &SpectralDensityModel<f64>, fit: &FitSettings) -> Result<ExponentialFit<f64>> {
    let samples = sample_correlation(model, f64::INFINITY, fit.t_fit, fit.samples, &BathOptions::default())?;
    prony_fit(&samples, fit.order)
}

/// `Ω±` source for the grid: closed forms for the Ohmic and cavity models,
/// an FFT table otherwise.
pub fn field_source(model: &SpectralDensityModel<f64>, grid: &GridSettings) -> Result<FieldSource<f64>> {
    let opts = BathOptions::default();
    match model {
        SpectralDensityModel::OhmicExp { .. } | SpectralDensityModel::CavityArray { .. } => {
            Ok(FieldSource::Model { model: model.clone(), opts })
        }
        _ => {
            let c = model.speed().expect("linear dispersion");
            let x_max = grid.xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let t_max = grid.ts.iter().fold(0.0f64, |m, &t| m.max(t));
            Ok(FieldSource::Table(FieldTable::build(model, t_max + x_max / c, &opts)?))
        }
    }
}

/// Base generator for `cfg`, quenched at `t_q` when given.
pub fn build_generator(cfg: &ScenarioConfig, fit: &ExponentialFit<f64>, t_q: Option<f64>) -> Result<HeomGenerator<f64>> {
    let mut system = SystemModel::qubit(cfg.omega_s);
    if let (Some(t), Some(q)) = (t_q, &cfg.quench) {
        system = system.with_quench(t, q.factor);
    }
    HeomGenerator::new(system, split_ri(fit), cfg.hierarchy.cutoff, cfg.hierarchy.max_size)
}

/// Quench time from the configuration, or the first steady time of a
/// quench-free pre-run.
pub fn resolve_quench_time(cfg: &ScenarioConfig, unquenched: &Trajectory<f64>) -> Result<Option<f64>> {
    let Some(q) = &cfg.quench else { return Ok(None) };
    if let Some(t) = q.t_q {
        return Ok(Some(t));
    }
    let sz = unquenched.expectation(&Mat2::sigma_z());
    let window = ((q.detect_window / cfg.grid.series_step).round() as usize).max(2);
    match steady_state_detect(&unquenched.times, &sz, q.detect_tol, window) {
        Some(t) if t < cfg.grid.horizon => Ok(Some(t)),
        _ => Err(Error::Domain {
            what: "quench",
            detail: format!("no steady state within the horizon at tolerance {}; set t_q explicitly", q.detect_tol),
        }),
    }
}

/// Runs the full pipeline for `cfg` and writes into `cfg.output_dir`.
/// Per-point grid failures are recorded in the manifest; pipeline failures
/// write a manifest with `error` set and are returned.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ResultManifest> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut w = Writer { dir, files: Vec::new() };
    let mut manifest = ResultManifest::new(cfg.clone());
    let outcome = pipeline(cfg, &mut manifest, &mut w);
    if let Err(e) = &outcome {
        manifest.error = Some(e.to_string());
    }
    manifest.files = w.files.clone();
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(format!("manifest: {e}")))?;
    let path = w.dir.join(MANIFEST);
    fs::write(&path, json).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    outcome.map(|_| manifest)
}

fn units(cfg: &ScenarioConfig) -> (&'static str, &'static str, &'static str) {
    if cfg.scenario == ScenarioId::CavityArray {
        ("frequencies in Omega, times in 1/Omega", "site index m", "occupation n_m")
    } else {
        ("frequencies in omega_s, times in 1/omega_s", "x in c/omega_s", "density n/dx in omega_s/c")
    }
}

fn pipeline(cfg: &ScenarioConfig, m: &mut ResultManifest, w: &mut Writer) -> Result<()> {
    let (unit, x_unit, n_unit) = units(cfg);
    let meta = |extra: &str| vec![("scenario", cfg.scenario.to_string()), ("units", unit.to_string()), ("columns", extra.to_string())];

    let fit = fit_kernel(&cfg.model, &cfg.fit)?;
    m.fit = Some(fit.clone());
    let opts = ode_options(&cfg.hierarchy);
    let times = series_times(&cfg.grid);
    let rho0 = Mat2::excited();

    let mut gen = build_generator(cfg, &fit, None)?;
    let mut series = propagate(&gen, &rho0, &times, &opts);
    m.t_q = resolve_quench_time(cfg, &series)?;
    if m.t_q.is_some() {
        gen = build_generator(cfg, &fit, m.t_q)?;
        series = propagate(&gen, &rho0, &times, &opts);
    }
    m.hierarchy = Some(HierarchySummary { modes: gen.coefficients.modes.len(), ados: gen.len(), cutoff: cfg.hierarchy.cutoff });
    let sz = series.expectation(&Mat2::sigma_z());
    m.qubit = Some(QubitSummary {
        stats: series.stats,
        failure: series.failure.as_ref().map(|e| e.to_string()),
        final_sigma_z: sz.last().copied().unwrap_or(f64::NAN),
    });
    let rows = series.times.iter().zip(&series.states).zip(&sz).map(|((&t, r), &z)| {
        let coh = r.0[1];
        vec![t, z, r.0[0].re, coh.re, coh.im]
    });
    let mut buf = Vec::new();
    write_csv(&mut buf, &meta("t, <sigma_z>, rho_ee, Re rho_eg, Im rho_eg"), &["t", "sigma_z", "rho_ee", "re_rho_eg", "im_rho_eg"], rows)?;
    w.put(QUBIT_CSV, &buf)?;
    if let Some(e) = series.failure {
        return Err(e);
    }

    let source = field_source(&cfg.model, &cfg.grid)?;
    let grid = density_grid(&gen, &source, cfg.grid.dx, &cfg.grid.xs, &cfg.grid.ts, &rho0, &opts, cfg.parallel)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &meta(&format!("t, {x_unit}, {n_unit}, imaginary residue")), &["t", "x", "density", "imag_residue"], density_rows(&grid))?;
    w.put(DENSITY_CSV, &buf)?;
    m.grid = grid.points;

    let pol = solve_omega_r(&cfg.model, cfg.omega_s, &BathOptions::default())?;
    m.polaron = Some(PolaronSummary {
        omega_r: pol.omega_r,
        sigma_z: pol.sigma_z(),
        residual: pol.residual,
        localization_length: pol.localization_length().ok(),
    });
    let rows: Vec<Vec<f64>> = cfg.grid.xs.iter().map(|&x| vec![x, pol.gs_profile(x).unwrap_or(f64::NAN)]).collect();
    let mut buf = Vec::new();
    let meta_p = vec![
        ("scenario", cfg.scenario.to_string()),
        ("units", unit.to_string()),
        ("columns", format!("{x_unit}, ground-state {n_unit}")),
        ("omega_r", format!("{:e}", pol.omega_r)),
    ];
    write_csv(&mut buf, &meta_p, &["x", "profile"], rows)?;
    w.put(POLARON_CSV, &buf)?;

    if cfg.scenario != ScenarioId::CavityArray && m.grid.iter().any(|p| p.error.is_some()) {
        log::warn!("{} of {} grid points failed", m.grid.iter().filter(|p| p.error.is_some()).count(), m.grid.len());
    }
    Ok(())
}

fn density_rows(grid: &DensityGrid<f64>) -> Vec<Vec<f64>> {
    grid.points
        .iter()
        .map(|p| {
            let (n, im) = p.result.map_or((f64::NAN, f64::NAN), |r| (r.density, r.imag_residue));
            vec![p.t_out, p.x_out, n, im]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(id: ScenarioId, dir: &Path) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::defaults(id);
        cfg.output_dir = dir.to_path_buf();
        cfg.model = SpectralDensityModel::ohmic(0.05, 2.0, 1.0);
        cfg.fit = FitSettings { t_fit: 12.0, samples: 241, order: 3 };
        cfg.hierarchy.cutoff = 2;
        cfg.grid = GridSettings { horizon: 6.0, series_step: 0.5, dx: 0.1, xs: vec![-2.0, 0.0, 2.0], ts: vec![3.0, 6.0] };
        cfg
    }

    #[test]
    fn series_times_cover_horizon() {
        let g = GridSettings { horizon: 1.1, series_step: 0.5, dx: 1.0, xs: vec![], ts: vec![] };
        assert_eq!(series_times(&g), vec![0.0, 0.5, 1.0, 1.1]);
    }

    #[test]
    fn run_writes_listed_files_and_is_deterministic() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ma = run_scenario(&small(ScenarioId::OhmicEmission, a.path())).unwrap();
        let mb = run_scenario(&small(ScenarioId::OhmicEmission, b.path())).unwrap();
        let names: Vec<&str> = ma.files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, [QUBIT_CSV, DENSITY_CSV, POLARON_CSV]);
        assert!(ma.verify(a.path()).is_empty());
        assert_eq!(ma.files, mb.files);
        let strip = |p: &Path| fs::read_to_string(p.join(MANIFEST)).unwrap().replace(&p.display().to_string(), "");
        assert_eq!(strip(a.path()), strip(b.path()));
        // corrupting a file is detected
        fs::write(a.path().join(DENSITY_CSV), "x").unwrap();
        assert_eq!(ma.verify(a.path()), [DENSITY_CSV]);
    }

    #[test]
    fn qubit_series_matches_standalone_propagation() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(ScenarioId::OhmicEmission, dir.path());
        run_scenario(&cfg).unwrap();
        let fit = fit_kernel(&cfg.model, &cfg.fit).unwrap();
        let gen = build_generator(&cfg, &fit, None).unwrap();
        let tr = propagate(&gen, &Mat2::excited(), &series_times(&cfg.grid), &ode_options(&cfg.hierarchy));
        let text = fs::read_to_string(dir.path().join(QUBIT_CSV)).unwrap();
        let col: Vec<f64> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(col, tr.expectation(&Mat2::sigma_z()));
    }

    #[test]
    fn quench_time_is_detected_when_absent() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(ScenarioId::OhmicQuench, dir.path());
        cfg.model = SpectralDensityModel::ohmic(0.39, 2.0, 1.0);
        cfg.grid.ts = vec![6.0];
        cfg.grid.xs = vec![0.0];
        cfg.quench = Some(QuenchSettings { t_q: None, factor: 5.0, detect_tol: 0.05, detect_window: 1.0 });
        let m = run_scenario(&cfg).unwrap();
        let t_q = m.t_q.unwrap();
        assert!(t_q > 0.0 && t_q < 6.0, "{t_q}");
        // an impossible tolerance aborts with a manifest left behind
        cfg.quench.as_mut().unwrap().detect_tol = 1e-12;
        assert!(run_scenario(&cfg).is_err());
        let text = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        let back: ResultManifest = serde_json::from_str(&text).unwrap();
        assert!(back.error.unwrap().contains("steady state"));
        assert_eq!(back.files.len(), 0);
    }
}
