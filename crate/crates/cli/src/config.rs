//! Job files and their static checks.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use matscat::io::{BoundaryJson, ComplexValue, PartialDataJson, PotentialJson, PresetJson, ScatteringJson};
use matscat::{BoundaryCondition, MatrixPotential, Preset};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Mode {
    Forward,
    Darboux,
    Inverse,
    GraphRecover,
    Roundtrip,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Forward => "forward",
            Mode::Darboux => "darboux",
            Mode::Inverse => "inverse",
            Mode::GraphRecover => "graph-recover",
            Mode::Roundtrip => "roundtrip",
        }
    }

    fn needs_operator(self) -> bool {
        matches!(self, Mode::Forward | Mode::Darboux | Mode::Roundtrip)
    }

    fn needs_input(self) -> bool {
        matches!(self, Mode::Inverse | Mode::GraphRecover)
    }
}

/// A potential given as a file, inline samples, or an analytic preset.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PotentialSource {
    File { file: PathBuf },
    Samples(PotentialJson),
    Preset(PresetJson),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Sampling range of presets and support used by the inverse solvers.
    pub x_max: Option<f64>,
    /// Potential sampling step.
    pub h: Option<f64>,
    pub k_max: Option<f64>,
    /// Even number of k nodes; overrides `dk`.
    pub k_count: Option<usize>,
    pub dk: Option<f64>,
    pub t_max: Option<f64>,
    /// Upper end of the bound-state scan.
    pub kappa_max: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub rtol: f64,
    pub atol: f64,
    pub tail_bound: f64,
    /// Spread of the recovered boundary unitary across k nodes above which a
    /// consistency warning is raised.
    pub u_spread: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, tail_bound: 1e-3, u_spread: 1e-2 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoveryOptions {
    /// Order of the zero of the dispersion function at `k = 0`.
    pub virtual_order: u32,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DarbouxOptions {
    #[serde(rename = "U0")]
    pub u0: Option<Vec<Vec<ComplexValue>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub mode: Option<Mode>,
    pub potential: Option<PotentialSource>,
    pub boundary: Option<BoundaryJson>,
    /// Scattering JSON for `inverse`, partial ray data for `graph-recover`.
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub recovery: RecoveryOptions,
    #[serde(default)]
    pub darboux: DarbouxOptions,
    pub parallel: Option<usize>,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_H: f64 = 0.01;
pub const DEFAULT_DK: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn diag(field: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic { field: field.into(), message: message.into() }
}

/// A parsed job together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct Job {
    pub config: JobConfig,
    pub base: PathBuf,
}

impl Job {
    /// Read and parse; schema errors carry the line and column.
    pub fn load(path: &Path) -> Result<Job, Vec<Diagnostic>> {
        let text = std::fs::read_to_string(path).map_err(|e| vec![diag("config", format!("cannot read {}: {e}", path.display()))])?;
        let config: JobConfig = serde_json::from_str(&text).map_err(|e| vec![diag("config", format!("{} (line {}, column {})", strip_position(&e), e.line(), e.column()))])?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Job { config, base })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Static checks: schema-level consistency, grids, mode-required inputs.
    pub fn validate(&self, mode: Option<Mode>) -> Vec<Diagnostic> {
        let cfg = &self.config;
        let mut out = Vec::new();
        let Some(mode) = mode.or(cfg.mode) else {
            out.push(diag("mode", "missing; set it in the file or pass --mode"));
            return out;
        };
        let g = &cfg.grid;
        for (name, v) in [("grid.x_max", g.x_max), ("grid.h", g.h), ("grid.k_max", g.k_max), ("grid.dk", g.dk), ("grid.t_max", g.t_max), ("grid.kappa_max", g.kappa_max)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    out.push(diag(name, format!("must be positive, got {v}")));
                }
            }
        }
        if let Some(count) = g.k_count {
            if count < 2 || count % 2 != 0 {
                out.push(diag("grid.k_count", format!("must be even and at least 2, got {count}")));
            }
        }
        if let (Some(t), Some(x)) = (g.t_max, g.x_max) {
            if t < x {
                out.push(diag("grid.t_max, grid.x_max", format!("grid.t_max = {t} is smaller than grid.x_max = {x}")));
            }
        }
        if let (Some(k), Some(dk)) = (g.k_max, g.dk) {
            if dk > k {
                out.push(diag("grid.dk", format!("exceeds grid.k_max = {k}")));
            }
        }
        let tol = &cfg.tolerances;
        for (name, v) in [("tolerances.rtol", tol.rtol), ("tolerances.atol", tol.atol), ("tolerances.tail_bound", tol.tail_bound), ("tolerances.u_spread", tol.u_spread)] {
            if !(v > 0.0) {
                out.push(diag(name, format!("must be positive, got {v}")));
            }
        }
        if cfg.parallel == Some(0) {
            out.push(diag("parallel", "must be at least 1"));
        }
        if mode.needs_operator() {
            self.check_operator(mode, &mut out);
        }
        if mode.needs_input() {
            if g.x_max.is_none() {
                out.push(diag("grid.x_max", format!("required in {} mode (recovery range)", mode.name())));
            }
            match &cfg.input {
                None => out.push(diag("input", format!("required in {} mode", mode.name()))),
                Some(p) => self.check_input(mode, &self.resolve(p), &mut out),
            }
        }
        out
    }

    fn check_operator(&self, mode: Mode, out: &mut Vec<Diagnostic>) {
        let cfg = &self.config;
        let bc = match &cfg.boundary {
            None => {
                out.push(diag("boundary", format!("required in {} mode", mode.name())));
                None
            }
            Some(b) => match b.to_bc() {
                Ok(bc) => Some(bc),
                Err(e) => {
                    out.push(diag("boundary", e.to_string()));
                    None
                }
            },
        };
        let n = match &cfg.potential {
            None => {
                out.push(diag("potential", format!("required in {} mode", mode.name())));
                None
            }
            Some(PotentialSource::Preset(p)) => {
                if cfg.grid.x_max.is_none() && !matches!(p, PresetJson::ConstantWell { .. }) {
                    out.push(diag("grid.x_max", "required to sample a preset"));
                }
                match p.to_preset() {
                    Ok(p) => Some(p.n()),
                    Err(e) => {
                        out.push(diag("potential", e.to_string()));
                        None
                    }
                }
            }
            Some(PotentialSource::Samples(s)) => Some(s.n),
            Some(PotentialSource::File { file }) => {
                let path = self.resolve(file);
                match read_json::<PotentialJson>(&path) {
                    Ok(p) => Some(p.n),
                    Err(m) => {
                        out.push(diag("potential.file", m));
                        None
                    }
                }
            }
        };
        if let (Some(bc), Some(n)) = (&bc, n) {
            if bc.n != n {
                out.push(diag("boundary", format!("has n = {} but the potential has n = {n}", bc.n)));
            }
        }
        if matches!(mode, Mode::Forward | Mode::Roundtrip) && cfg.grid.k_max.is_none() {
            out.push(diag("grid.k_max", format!("required in {} mode", mode.name())));
        }
        if mode == Mode::Roundtrip && cfg.grid.x_max.is_none() {
            out.push(diag("grid.x_max", "required in roundtrip mode (recovery range)"));
        }
        if let Some(u0) = &cfg.darboux.u0 {
            if let Err(e) = matscat::io::matrix_from_values(u0) {
                out.push(diag("darboux.U0", e.to_string()));
            }
        }
    }

    fn check_input(&self, mode: Mode, path: &Path, out: &mut Vec<Diagnostic>) {
        let value = match read_json::<serde_json::Value>(path) {
            Ok(v) => v,
            Err(m) => {
                out.push(diag("input", m));
                return;
            }
        };
        match mode {
            Mode::GraphRecover => {
                if !value.get("rays").is_some_and(|r| r.is_array()) {
                    out.push(diag("input.rays", "missing rays array"));
                    return;
                }
                if let Err(e) = serde_json::from_value::<PartialDataJson>(value).map_err(|e| e.to_string()).and_then(|p| p.to_data().map_err(|e| e.to_string())) {
                    out.push(diag("input", e));
                }
            }
            _ => {
                if let Err(e) = serde_json::from_value::<ScatteringJson>(value).map_err(|e| e.to_string()).and_then(|s| s.to_data().map(|_| ()).map_err(|e| e.to_string())) {
                    out.push(diag("input", e));
                }
            }
        }
    }

    /// Potential samples on the configured grid.
    pub fn potential(&self) -> Result<(MatrixPotential, Option<Preset>), String> {
        let h = self.config.grid.h.unwrap_or(DEFAULT_H);
        match self.config.potential.as_ref().ok_or("potential: missing")? {
            PotentialSource::File { file } => {
                let p = read_json::<PotentialJson>(&self.resolve(file))?;
                Ok((p.to_potential().map_err(|e| e.to_string())?, None))
            }
            PotentialSource::Samples(s) => Ok((s.to_potential().map_err(|e| e.to_string())?, None)),
            PotentialSource::Preset(p) => {
                let preset = p.to_preset().map_err(|e| e.to_string())?;
                let end = match &preset {
                    Preset::ConstantWell { width, .. } => *width,
                    _ => self.config.grid.x_max.ok_or("grid.x_max: required to sample a preset")?,
                };
                let count = ((end / h).round() as usize).max(4) + 1;
                Ok((preset.sample(end, count).map_err(|e| e.to_string())?, Some(preset)))
            }
        }
    }

    pub fn boundary(&self) -> Result<BoundaryCondition, String> {
        self.config.boundary.as_ref().ok_or("boundary: missing")?.to_bc().map_err(|e| e.to_string())
    }
}

fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {} (line {}, column {})", path.display(), strip_position(&e), e.line(), e.column()))
}
