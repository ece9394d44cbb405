use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ioheom::bath::BathOptions;
use ioheom::fitting::reconstruct_sd;
use ioheom::hierarchy::write_csv;
use ioheom::polaron::solve_omega_r;
use ioheom::runner::{self, convergence_sweep, ScenarioConfig, ScenarioId, SweepAxis};
use ioheom::SpectralDensity;

/// io-HEOM simulator for a qubit coupled to a one-dimensional waveguide.
#[derive(Parser)]
#[command(name = "ioheom", version)]
struct Cli {
    /// Scenario config (TOML). Without it the scenario defaults are used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for density grids (overrides the config).
    #[arg(long, global = true)]
    parallel: Option<usize>,
    /// ohmic_emission, ohmic_quench, lorentzian or cavity_array (overrides the config).
    #[arg(long, global = true)]
    scenario: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prony fit of the bath correlation function; writes fit.json.
    FitBath,
    /// Full scenario: qubit series, density grid, polaron profile, manifest.
    Run,
    /// Polaron frequency and ground-state profile on the config grid.
    Polaron,
    /// Spectral density reconstructed from the fit next to the exact one.
    ReconstructSd {
        /// Frequency points between the lower and upper limits.
        #[arg(long, default_value_t = 401)]
        points: usize,
        #[arg(long)]
        omega_min: Option<f64>,
        #[arg(long)]
        omega_max: Option<f64>,
    },
    /// Convergence sweep along one axis; writes sweep.json.
    Sweep {
        /// n_c, k or tol.
        #[arg(long)]
        axis: String,
        /// Comma-separated settings, e.g. 2,3,4.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

fn load(cli: &Cli) -> Result<ScenarioConfig> {
    let id = cli.scenario.as_deref().map(ScenarioId::parse).transpose()?;
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::read(p, id)?,
        None => ScenarioConfig::from_toml("", id)?,
    };
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(n) = cli.parallel {
        cfg.parallel = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_file(cfg: &ScenarioConfig, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    Ok(cfg.output_dir.join(name))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn band(model: &SpectralDensity) -> (f64, f64) {
    match *model {
        // J is singular at the band edges
        SpectralDensity::CavityArray { gc, omega, .. } => (omega - 1.999 * gc, omega + 1.999 * gc),
        _ => (0.0, model.omega_max(&BathOptions::default()).min(20.0)),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = load(&cli)?;
    match &cli.command {
        Command::FitBath => {
            let fit = runner::fit_kernel(&cfg.model, &cfg.fit)?;
            println!(
                "order {} (requested {}), max residual {:.3e}, relative L2 {:.3e}",
                fit.effective_order, fit.requested_order, fit.residual.max_abs, fit.residual.rel_l2
            );
            write(&out_file(&cfg, "fit.json")?, fit.to_json().as_bytes())?;
        }
        Command::Run => {
            let m = runner::run_scenario(&cfg)?;
            let failed = m.grid.iter().filter(|p| p.error.is_some()).count();
            if let Some(q) = &m.qubit {
                println!("final <sigma_z> = {:.6}", q.final_sigma_z);
            }
            if let Some(p) = &m.polaron {
                println!("polaron omega_r = {:.6}, <sigma_z>_GS = {:.6}", p.omega_r, p.sigma_z);
            }
            if let Some(t) = m.t_q {
                println!("quench at t = {t}");
            }
            println!("{} grid points, {} failed; outputs in {}", m.grid.len(), failed, cfg.output_dir.display());
        }
        Command::Polaron => {
            let pol = solve_omega_r(&cfg.model, cfg.omega_s, &BathOptions::default())?;
            println!("omega_r = {:.10}, <sigma_z>_GS = {:.10}", pol.omega_r, pol.sigma_z());
            if let Ok(xi) = pol.localization_length() {
                println!("localization length = {xi:.6}");
            }
            let rows: Vec<Vec<f64>> = cfg.grid.xs.iter().map(|&x| vec![x, pol.gs_profile(x).unwrap_or(f64::NAN)]).collect();
            let mut buf = Vec::new();
            write_csv(&mut buf, &[("scenario", cfg.scenario.to_string()), ("omega_r", format!("{:e}", pol.omega_r))], &["x", "profile"], rows)?;
            write(&out_file(&cfg, runner::POLARON_CSV)?, &buf)?;
        }
        Command::ReconstructSd { points, omega_min, omega_max } => {
            if *points < 2 {
                bail!("--points must be at least 2");
            }
            let (lo, hi) = band(&cfg.model);
            let omegas = runner::linspace(omega_min.unwrap_or(lo), omega_max.unwrap_or(hi), *points);
            let fit = runner::fit_kernel(&cfg.model, &cfg.fit)?;
            let rec = reconstruct_sd(&fit, &omegas)?;
            let rows = omegas.iter().zip(rec).map(|(&w, r)| vec![w, cfg.model.eval_j(w).unwrap_or(f64::NAN), r]);
            let mut buf = Vec::new();
            write_csv(&mut buf, &[("scenario", cfg.scenario.to_string()), ("order", fit.effective_order.to_string())], &["omega", "j", "j_rec"], rows)?;
            write(&out_file(&cfg, "spectral_density.csv")?, &buf)?;
        }
        Command::Sweep { axis, values } => {
            let report = convergence_sweep(&cfg, SweepAxis::parse(axis)?, values)?;
            let mut out = std::io::stdout().lock();
            for (i, s) in report.settings.iter().enumerate() {
                write!(out, "{s}: final <sigma_z> = {:.6}", report.sigma_z[i])?;
                if i > 0 {
                    write!(out, ", drift sigma_z {:.3e}, density {:.3e}", report.sigma_z_drift[i - 1], report.density_drift[i - 1])?;
                }
                writeln!(out)?;
            }
            drop(out);
            write(&out_file(&cfg, "sweep.json")?, serde_json::to_string_pretty(&report)?.as_bytes())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn global_flags_apply_to_subcommands() {
        let cli = Cli::try_parse_from(["ioheom", "sweep", "--axis", "n_c", "--values", "2,3", "--scenario", "cavity_array", "--parallel", "2"]).unwrap();
        let cfg = load(&cli).unwrap();
        assert_eq!(cfg.scenario, ScenarioId::CavityArray);
        assert_eq!(cfg.parallel, 2);
        assert!(matches!(cli.command, Command::Sweep { ref values, .. } if values == &[2.0, 3.0]));
    }

    #[test]
    fn bad_scenario_is_an_error() {
        let cli = Cli::try_parse_from(["ioheom", "run", "--scenario", "ohmic"]).unwrap();
        assert!(load(&cli).is_err());
    }
}
