use serde::{Deserialize, Serialize};

use super::{build_generator, field_source, fit_kernel, ode_options, resolve_quench_time, series_times, ScenarioConfig};
use crate::error::{Error, Result};
use crate::hierarchy::propagate;
use crate::io::density_grid;
use crate::mat2::Mat2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Hierarchy cutoff `N_c`.
    Cutoff,
    /// Prony order `K`.
    Order,
    /// Integrator relative tolerance (absolute tolerance follows at 1e-2 of it).
    Tolerance,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "n_c" | "nc" | "cutoff" => Ok(SweepAxis::Cutoff),
            "k" | "order" => Ok(SweepAxis::Order),
            "tol" | "tolerance" => Ok(SweepAxis::Tolerance),
            _ => Err(Error::Parse(format!("unknown sweep axis '{s}' (expected n_c, k or tol)"))),
        }
    }
}

/// Drift of the observables between consecutive settings of one axis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub settings: Vec<f64>,
    /// Positions and output time of the reduced density grid.
    pub xs: Vec<f64>,
    pub t_out: f64,
    /// Final `⟨σ_z⟩` per setting.
    pub sigma_z: Vec<f64>,
    /// `max_t |Δ⟨σ_z⟩|` between settings `i` and `i + 1`.
    pub sigma_z_drift: Vec<f64>,
    /// `max_x |Δn|` between settings `i` and `i + 1`.
    pub density_drift: Vec<f64>,
}

impl SweepReport {
    /// Largest drift between the last two settings.
    pub fn final_drift(&self) -> f64 {
        let last = |v: &[f64]| v.last().copied().unwrap_or(0.0);
        last(&self.sigma_z_drift).max(last(&self.density_drift))
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Re-runs the qubit series and a reduced density grid (the grid position
/// closest to the origin and the one closest to a quarter of the grid
/// extent, at the last output time) for each setting along `axis`.
pub fn convergence_sweep(cfg: &ScenarioConfig, axis: SweepAxis, settings: &[f64]) -> Result<SweepReport> {
    cfg.validate()?;
    if settings.is_empty() {
        return Err(Error::domain("convergence sweep", "no settings given"));
    }
    let extent = cfg.grid.xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let nearest = |target: f64| cfg.grid.xs.iter().copied().min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()));
    let mut xs: Vec<f64> = [nearest(0.0), nearest(extent / 4.0)].into_iter().flatten().collect();
    xs.dedup();
    let t_out = cfg.grid.ts.iter().copied().fold(0.0, f64::max);
    let times = series_times(&cfg.grid);
    let rho0 = Mat2::excited();

    let t_q = if cfg.quench.is_some() {
        let fit = fit_kernel(&cfg.model, &cfg.fit)?;
        let pre = propagate(&build_generator(cfg, &fit, None)?, &rho0, &times, &ode_options(&cfg.hierarchy));
        resolve_quench_time(cfg, &pre)?
    } else {
        None
    };

    let mut series = Vec::new();
    let mut densities = Vec::new();
    for &s in settings {
        let mut c = cfg.clone();
        match axis {
            SweepAxis::Cutoff => c.hierarchy.cutoff = s as usize,
            SweepAxis::Order => c.fit.order = s as usize,
            SweepAxis::Tolerance => {
                c.hierarchy.rel_tol = s;
                c.hierarchy.abs_tol = 1e-2 * s;
            }
        }
        c.validate()?;
        let fit = fit_kernel(&c.model, &c.fit)?;
        let gen = build_generator(&c, &fit, t_q)?;
        let opts = ode_options(&c.hierarchy);
        let tr = propagate(&gen, &rho0, &times, &opts);
        if let Some(e) = tr.failure {
            return Err(e);
        }
        series.push(tr.expectation(&Mat2::sigma_z()));
        let source = field_source(&c.model, &c.grid)?;
        let grid = density_grid(&gen, &source, c.grid.dx, &xs, &[t_out], &rho0, &opts, c.parallel)?;
        if let Some(p) = grid.points.iter().find(|p| p.error.is_some()) {
            return Err(Error::domain("convergence sweep", format!("setting {s}, x = {}: {}", p.x_out, p.error.as_deref().unwrap_or(""))));
        }
        densities.push(grid.row(0));
    }
    Ok(SweepReport {
        axis,
        settings: settings.to_vec(),
        xs,
        t_out,
        sigma_z: series.iter().map(|s| s.last().copied().unwrap_or(f64::NAN)).collect(),
        sigma_z_drift: series.windows(2).map(|w| max_abs_diff(&w[0], &w[1])).collect(),
        density_drift: densities.windows(2).map(|w| max_abs_diff(&w[0], &w[1])).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::SpectralDensityModel;
    use crate::runner::{FitSettings, GridSettings, ScenarioId};

    fn weak(lambda: f64) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::defaults(ScenarioId::OhmicEmission);
        cfg.model = SpectralDensityModel::ohmic(lambda, 2.0, 1.0);
        cfg.fit = FitSettings { t_fit: 20.0, samples: 401, order: 3 };
        cfg.grid = GridSettings { horizon: 10.0, series_step: 0.5, dx: 0.1, xs: vec![0.0, 1.0, 4.0], ts: vec![10.0] };
        cfg
    }

    #[test]
    fn zero_coupling_has_no_drift() {
        let r = convergence_sweep(&weak(1e-14), SweepAxis::Cutoff, &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.final_drift() < 1e-12, "{r:?}");
    }

    #[test]
    fn cutoff_drift_decreases_at_weak_coupling() {
        let r = convergence_sweep(&weak(0.05), SweepAxis::Cutoff, &[2.0, 3.0, 4.0]).unwrap();
        assert!(r.sigma_z_drift[1] < r.sigma_z_drift[0], "{r:?}");
        assert!(r.density_drift[1] < r.density_drift[0], "{r:?}");
        assert_eq!(r.xs, [0.0, 1.0]);
    }

    #[test]
    fn axis_names() {
        assert_eq!(SweepAxis::parse("n_c").unwrap(), SweepAxis::Cutoff);
        assert_eq!(SweepAxis::parse("k").unwrap(), SweepAxis::Order);
        assert!(SweepAxis::parse("beta").is_err());
    }
}
