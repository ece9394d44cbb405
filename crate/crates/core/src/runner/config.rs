//! Scenario configuration: a small TOML grammar with per-scenario defaults.
//!
//! Every key is optional. Missing keys take the defaults of the selected
//! scenario; the resolved configuration can be echoed back as TOML and
//! parses to the same value.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bath::SpectralDensityModel;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    #[default]
    OhmicEmission,
    OhmicQuench,
    Lorentzian,
    CavityArray,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] =
        [ScenarioId::OhmicEmission, ScenarioId::OhmicQuench, ScenarioId::Lorentzian, ScenarioId::CavityArray];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioId::OhmicEmission => "ohmic_emission",
            ScenarioId::OhmicQuench => "ohmic_quench",
            ScenarioId::Lorentzian => "lorentzian",
            ScenarioId::CavityArray => "cavity_array",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown scenario '{s}' (expected one of ohmic_emission, ohmic_quench, lorentzian, cavity_array)")))
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Prony fit of `C(t)` on `[0, t_fit]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettings {
    pub t_fit: f64,
    pub samples: usize,
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchySettings {
    pub cutoff: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Largest number of ADOs accepted.
    pub max_size: usize,
}

/// Output grid. For the cavity array `xs` holds site indices and `dx = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    /// End of the qubit series.
    pub horizon: f64,
    /// Spacing of the qubit series.
    pub series_step: f64,
    pub dx: f64,
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchSettings {
    /// Quench time; chosen by steady-state detection on a pre-run when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_q: Option<f64>,
    /// Post-quench multiple of `ω_s`.
    pub factor: f64,
    /// Relative spread accepted by the steady-state detector.
    pub detect_tol: f64,
    /// Detector window in time units.
    pub detect_window: f64,
}

/// Fully resolved scenario configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    pub omega_s: f64,
    pub parallel: usize,
    pub output_dir: PathBuf,
    pub model: SpectralDensityModel<f64>,
    pub fit: FitSettings,
    pub hierarchy: HierarchySettings,
    pub grid: GridSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quench: Option<QuenchSettings>,
}

// what the user may write; everything optional

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<ScenarioId>,
    omega_s: Option<f64>,
    parallel: Option<usize>,
    output_dir: Option<PathBuf>,
    model: Option<SpectralDensityModel<f64>>,
    fit: Option<RawFit>,
    hierarchy: Option<RawHierarchy>,
    grid: Option<RawGrid>,
    quench: Option<RawQuench>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFit {
    t_fit: Option<f64>,
    samples: Option<usize>,
    order: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHierarchy {
    cutoff: Option<usize>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
    max_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    horizon: Option<f64>,
    series_step: Option<f64>,
    dx: Option<f64>,
    xs: Option<Vec<f64>>,
    ts: Option<Vec<f64>>,
    /// `[first, last, count]`, an alternative to `xs`.
    x_range: Option<(f64, f64, usize)>,
    t_range: Option<(f64, f64, usize)>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuench {
    t_q: Option<f64>,
    factor: Option<f64>,
    detect_tol: Option<f64>,
    detect_window: Option<f64>,
}

/// `count` evenly spaced points from `first` to `last` inclusive.
pub fn linspace(first: f64, last: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![first],
        _ => (0..count).map(|k| first + (last - first) * k as f64 / (count - 1) as f64).collect(),
    }
}

impl ScenarioConfig {
    /// Defaults for `id`, in units of `ω_s` (of `Ω` for the cavity array).
    pub fn defaults(id: ScenarioId) -> Self {
        let hierarchy = |cutoff| HierarchySettings { cutoff, abs_tol: 1e-8, rel_tol: 1e-6, max_size: 2_000_000 };
        let output_dir = PathBuf::from("out").join(id.as_str());
        match id {
            ScenarioId::OhmicEmission | ScenarioId::OhmicQuench => {
                let horizon: f64 = if id == ScenarioId::OhmicQuench { 60.0 } else { 40.0 };
                ScenarioConfig {
                    scenario: id,
                    omega_s: 1.0,
                    parallel: 1,
                    output_dir,
                    model: SpectralDensityModel::ohmic(0.39, 2.0, 1.0),
                    fit: FitSettings { t_fit: horizon.max(50.0), samples: 1201, order: 6 },
                    hierarchy: hierarchy(3),
                    grid: GridSettings {
                        horizon,
                        series_step: 0.25,
                        dx: 0.05,
                        xs: linspace(-20.0, 20.0, 81),
                        ts: linspace(horizon / 12.0, horizon, 12),
                    },
                    quench: (id == ScenarioId::OhmicQuench).then_some(QuenchSettings {
                        t_q: None,
                        factor: 20.0,
                        detect_tol: 1e-2,
                        detect_window: 5.0,
                    }),
                }
            }
            ScenarioId::Lorentzian => ScenarioConfig {
                scenario: id,
                omega_s: 1.0,
                parallel: 1,
                output_dir,
                model: SpectralDensityModel::underdamped(0.4, 0.1, 1.0, 1.0),
                fit: FitSettings { t_fit: 60.0, samples: 1201, order: 6 },
                hierarchy: hierarchy(4),
                grid: GridSettings {
                    horizon: 40.0,
                    series_step: 0.25,
                    dx: 0.05,
                    xs: linspace(-20.0, 20.0, 81),
                    ts: linspace(40.0 / 12.0, 40.0, 12),
                },
                quench: None,
            },
            ScenarioId::CavityArray => ScenarioConfig {
                scenario: id,
                omega_s: 1.0,
                parallel: 1,
                output_dir,
                model: SpectralDensityModel::cavity_array(0.2, 0.4, 1.0),
                fit: FitSettings { t_fit: 150.0, samples: 601, order: 7 },
                hierarchy: hierarchy(3),
                grid: GridSettings {
                    horizon: 150.0,
                    series_step: 0.5,
                    dx: 1.0,
                    xs: linspace(-20.0, 20.0, 41),
                    ts: linspace(12.5, 150.0, 12),
                },
                quench: None,
            },
        }
    }

    /// Parses and validates TOML text. `scenario_override` replaces the
    /// `scenario` key before defaults are applied.
    pub fn from_toml(text: &str, scenario_override: Option<ScenarioId>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        let cfg = resolve(raw, scenario_override).map_err(|e| locate(text, e))?;
        cfg.validate().map_err(|e| locate(text, e))?;
        Ok(cfg)
    }

    pub fn read(path: &Path, scenario_override: Option<ScenarioId>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, scenario_override).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Parse(format!("invalid value for '{key}': {msg}")));
        let positive = |key: &str, v: f64| if v > 0.0 && v.is_finite() { Ok(()) } else { bad(key, format!("must be positive, got {v}")) };
        positive("omega_s", self.omega_s)?;
        if self.parallel == 0 {
            return bad("parallel", "must be at least 1".into());
        }
        self.model.validate().or_else(|e| bad("model", e.to_string()))?;
        let cavity = matches!(self.model, SpectralDensityModel::CavityArray { .. });
        if cavity != (self.scenario == ScenarioId::CavityArray) {
            return bad("model", format!("scenario {} needs {}", self.scenario, if cavity { "a linear-dispersion model" } else { "the cavity-array model" }));
        }

        let f = &self.fit;
        positive("t_fit", f.t_fit)?;
        if f.order == 0 {
            return bad("order", "must be at least 1".into());
        }
        if f.samples < 2 * f.order + 1 {
            return bad("samples", format!("need at least 2 order + 1 = {} samples, got {}", 2 * f.order + 1, f.samples));
        }

        let h = &self.hierarchy;
        if h.cutoff == 0 {
            return bad("cutoff", "must be at least 1".into());
        }
        positive("abs_tol", h.abs_tol)?;
        positive("rel_tol", h.rel_tol)?;

        let g = &self.grid;
        positive("horizon", g.horizon)?;
        positive("series_step", g.series_step)?;
        positive("dx", g.dx)?;
        if cavity && g.dx != 1.0 {
            return bad("dx", "the cavity array uses dx = 1 (one site)".into());
        }
        if g.horizon > f.t_fit {
            return bad("horizon", format!("simulation horizon {} exceeds the fit window t_fit = {}", g.horizon, f.t_fit));
        }
        if let Some(x) = g.xs.iter().find(|x| !x.is_finite() || (cavity && x.fract() != 0.0)) {
            return bad("xs", format!("{x} is not a valid {}", if cavity { "site index" } else { "position" }));
        }
        if let Some(t) = g.ts.iter().find(|&&t| !(t >= 0.0 && t <= g.horizon)) {
            return bad("ts", format!("output time {t} outside [0, horizon = {}]", g.horizon));
        }

        match (&self.quench, self.scenario) {
            (Some(_), id) if id != ScenarioId::OhmicQuench => bad("quench", format!("a quench block is only allowed for ohmic_quench, not {id}")),
            (None, ScenarioId::OhmicQuench) => bad("quench", "ohmic_quench needs a quench block".into()),
            (Some(q), _) => {
                positive("factor", q.factor)?;
                positive("detect_tol", q.detect_tol)?;
                positive("detect_window", q.detect_window)?;
                match q.t_q {
                    Some(t) if !(t > 0.0 && t < g.horizon) => bad("t_q", format!("quench time {t} outside (0, horizon = {})", g.horizon)),
                    _ => Ok(()),
                }
            }
            (None, _) => Ok(()),
        }
    }
}

fn resolve(raw: RawConfig, scenario_override: Option<ScenarioId>) -> Result<ScenarioConfig> {
    let id = scenario_override.or(raw.scenario).unwrap_or_default();
    let mut cfg = ScenarioConfig::defaults(id);
    if let Some(v) = raw.omega_s {
        cfg.omega_s = v;
    }
    if let Some(v) = raw.parallel {
        cfg.parallel = v;
    }
    if let Some(v) = raw.output_dir {
        cfg.output_dir = v;
    }
    if let Some(v) = raw.model {
        cfg.model = v;
    }
    if let Some(f) = raw.fit {
        let d = &mut cfg.fit;
        d.t_fit = f.t_fit.unwrap_or(d.t_fit);
        d.samples = f.samples.unwrap_or(d.samples);
        d.order = f.order.unwrap_or(d.order);
    }
    if let Some(h) = raw.hierarchy {
        let d = &mut cfg.hierarchy;
        d.cutoff = h.cutoff.unwrap_or(d.cutoff);
        d.abs_tol = h.abs_tol.unwrap_or(d.abs_tol);
        d.rel_tol = h.rel_tol.unwrap_or(d.rel_tol);
        d.max_size = h.max_size.unwrap_or(d.max_size);
    }
    if let Some(g) = raw.grid {
        if g.xs.is_some() && g.x_range.is_some() {
            return Err(Error::Parse("invalid value for 'x_range': give either xs or x_range".into()));
        }
        if g.ts.is_some() && g.t_range.is_some() {
            return Err(Error::Parse("invalid value for 't_range': give either ts or t_range".into()));
        }
        let d = &mut cfg.grid;
        d.horizon = g.horizon.unwrap_or(d.horizon);
        d.series_step = g.series_step.unwrap_or(d.series_step);
        d.dx = g.dx.unwrap_or(d.dx);
        if let Some(xs) = g.xs.or(g.x_range.map(|(a, b, n)| linspace(a, b, n))) {
            d.xs = xs;
        }
        if let Some(ts) = g.ts.or(g.t_range.map(|(a, b, n)| linspace(a, b, n))) {
            d.ts = ts;
        } else if g.horizon.is_some() {
            // default slices follow the horizon
            d.ts = linspace(d.horizon / 12.0, d.horizon, 12);
        }
    }
    if let Some(q) = raw.quench {
        let Some(d) = cfg.quench.as_mut() else {
            return Err(Error::Parse(format!("invalid value for 'quench': a quench block is only allowed for ohmic_quench, not {id}")));
        };
        d.t_q = q.t_q.or(d.t_q);
        d.factor = q.factor.unwrap_or(d.factor);
        d.detect_tol = q.detect_tol.unwrap_or(d.detect_tol);
        d.detect_window = q.detect_window.unwrap_or(d.detect_window);
    }
    Ok(cfg)
}

/// Appends the line of the offending key to a validation message.
fn locate(text: &str, e: Error) -> Error {
    let Error::Parse(msg) = e else { return e };
    let key = msg.split('\'').nth(1).unwrap_or("");
    let line = text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('=')) || l == format!("[{key}]")
    });
    match line {
        Some(n) if !key.is_empty() => Error::Parse(format!("config line {}: {msg}", n + 1)),
        _ => Error::Parse(format!("config: {msg}")),
    }
}
