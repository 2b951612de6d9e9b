//! Flat `key = value` sweep configuration.
//!
//! Frequencies and rates are written in Hz and converted to rad/s when
//! parameters are built; `x_b` and `gap_ratio` are dimensionless.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::SystemParameters;
use crate::open::FormulaMode;

use super::preset::{preset, DEFAULT_HIERARCHY_FACTOR, PRESET_NAMES};

/// Parameter names accepted as overrides and axes, in table order.
pub const PARAMETER_KEYS: [&str; 11] = [
    "omega_k",
    "omega_m",
    "omega_nv",
    "lambda",
    "g0",
    "omega_p",
    "kappa_a",
    "kappa_b",
    "kappa_sigma",
    "drive",
    "x_b",
];

/// Axis that places λ at Δ = gap_ratio · κ_b² instead of sweeping a parameter.
pub const GAP_RATIO_AXIS: &str = "gap_ratio";

const POSITIVE_KEYS: [&str; 6] = [
    "omega_k",
    "omega_m",
    "omega_nv",
    "kappa_a",
    "kappa_b",
    "kappa_sigma",
];

fn is_frequency(key: &str) -> bool {
    key != "x_b"
}

/// Value in rad/s for a key given in Hz.
fn to_internal(key: &str, value: f64) -> f64 {
    if is_frequency(key) {
        TAU * value
    } else {
        value
    }
}

fn field_mut<'a>(p: &'a mut SystemParameters, key: &str) -> Option<&'a mut f64> {
    Some(match key {
        "omega_k" => &mut p.omega_k,
        "omega_m" => &mut p.omega_m,
        "omega_nv" => &mut p.omega_nv,
        "lambda" => &mut p.lambda,
        "g0" => &mut p.g0,
        "omega_p" => &mut p.omega_p,
        "kappa_a" => &mut p.kappa_a,
        "kappa_b" => &mut p.kappa_b,
        "kappa_sigma" => &mut p.kappa_sigma,
        "drive" => &mut p.drive,
        "x_b" => &mut p.x_b,
        _ => return None,
    })
}

/// Sets `key` (given in Hz, or dimensionless for `x_b`) on `p`.
pub fn set_parameter(p: &mut SystemParameters, key: &str, value: f64) -> Result<()> {
    let slot = field_mut(p, key).ok_or_else(|| Error::config(key, "unknown parameter"))?;
    *slot = to_internal(key, value);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    Xi,
    QfiClosed,
    QfiGaussian,
    QfiNearCritical,
    Tau,
    Delta,
    PrecisionCrb,
    PrecisionIntensity,
    ChiCoherent,
    ChiAnharmonic,
}

impl Quantity {
    pub const ALL: [Quantity; 10] = [
        Quantity::Xi,
        Quantity::QfiClosed,
        Quantity::QfiGaussian,
        Quantity::QfiNearCritical,
        Quantity::Tau,
        Quantity::Delta,
        Quantity::PrecisionCrb,
        Quantity::PrecisionIntensity,
        Quantity::ChiCoherent,
        Quantity::ChiAnharmonic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Xi => "xi",
            Quantity::QfiClosed => "qfi_closed",
            Quantity::QfiGaussian => "qfi_gaussian",
            Quantity::QfiNearCritical => "qfi_near_critical",
            Quantity::Tau => "tau",
            Quantity::Delta => "delta",
            Quantity::PrecisionCrb => "precision_crb",
            Quantity::PrecisionIntensity => "precision_intensity",
            Quantity::ChiCoherent => "chi_coherent",
            Quantity::ChiAnharmonic => "chi_anharmonic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.name() == s)
    }

    /// Whether the value depends on the effective mechanical frequency, the
    /// only quantity that differs between formula modes at fixed λ.
    pub fn mode_sensitive(self) -> bool {
        !matches!(self, Quantity::Xi | Quantity::QfiClosed)
    }

    /// Whether the value is a function of Δ alone once the gap ratio is held
    /// fixed, so it does not move between modes on a gap-ratio axis.
    pub fn fixed_by_gap(self) -> bool {
        matches!(
            self,
            Quantity::Delta | Quantity::Tau | Quantity::ChiAnharmonic
        )
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisScale {
    Linear,
    Log,
}

/// `param:lo:hi:n[:log]`
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub param: String,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub scale: AxisScale,
}

impl Axis {
    pub fn parse(spec: &str) -> Result<Self> {
        let err = |msg: String| Error::config("axis", msg);
        let parts: Vec<&str> = spec.trim().split(':').collect();
        if !(4..=5).contains(&parts.len()) {
            return Err(err(format!("expected param:lo:hi:n[:log], got `{spec}`")));
        }
        let param = parts[0].trim();
        if param != GAP_RATIO_AXIS && !PARAMETER_KEYS.contains(&param) {
            return Err(err(format!("unknown axis parameter `{param}`")));
        }
        let number = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("`{s}` is not a finite number")))
        };
        let (lo, hi) = (number(parts[1])?, number(parts[2])?);
        let points: usize = parts[3]
            .trim()
            .parse()
            .map_err(|_| err(format!("`{}` is not a point count", parts[3])))?;
        let scale = match parts.get(4).map(|s| s.trim()) {
            None | Some("linear") => AxisScale::Linear,
            Some("log") => AxisScale::Log,
            Some(other) => return Err(err(format!("unknown scale `{other}`"))),
        };
        let axis = Axis {
            param: param.to_string(),
            lo,
            hi,
            points,
            scale,
        };
        axis.check()?;
        Ok(axis)
    }

    fn check(&self) -> Result<()> {
        let err = |msg: String| Error::config("axis", msg);
        if self.points < 2 {
            return Err(err(format!(
                "point count {} must be at least 2",
                self.points
            )));
        }
        if self.lo == self.hi {
            return Err(err(format!("empty range: both endpoints are {}", self.lo)));
        }
        let positive = POSITIVE_KEYS.contains(&self.param.as_str());
        if (positive || self.scale == AxisScale::Log) && !(self.lo > 0.0 && self.hi > 0.0) {
            return Err(err(format!(
                "`{}` range [{}, {}] must be strictly positive",
                self.param, self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// Grid values in configuration units.
    pub fn values(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    return self.hi;
                }
                let t = i as f64 / last;
                match self.scale {
                    AxisScale::Linear => self.lo + t * (self.hi - self.lo),
                    AxisScale::Log => (self.lo.ln() + t * (self.hi.ln() - self.lo.ln())).exp(),
                }
            })
            .collect()
    }

    pub fn is_gap_ratio(&self) -> bool {
        self.param == GAP_RATIO_AXIS
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{:e}:{:e}:{}",
            self.param, self.lo, self.hi, self.points
        )?;
        if self.scale == AxisScale::Log {
            f.write_str(":log")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub preset: Option<String>,
    /// Parameter overrides in configuration units.
    pub overrides: BTreeMap<String, f64>,
    pub axis: Option<Axis>,
    pub outputs: Vec<Quantity>,
    pub mode: FormulaMode,
    /// Eigenstate index n for `qfi_closed`.
    pub excitation: u32,
    /// Order j of the coherent-drive noise in `chi_coherent`.
    pub coherent_order: u32,
    /// Strength ζ of the anharmonic noise in `chi_anharmonic`.
    pub zeta: f64,
    pub hierarchy_factor: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            preset: None,
            overrides: BTreeMap::new(),
            axis: None,
            outputs: Quantity::ALL.to_vec(),
            mode: FormulaMode::Corrected,
            excitation: 1,
            coherent_order: 2,
            zeta: 1.0,
            hierarchy_factor: DEFAULT_HIERARCHY_FACTOR,
        }
    }
}

fn parse_number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

impl SweepConfig {
    /// Parses configuration text; errors carry the offending line number.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SweepConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at_line = |e: Error| match e {
                Error::Config { field, message, .. } => Error::Config {
                    line: Some(idx + 1),
                    field,
                    message,
                },
                other => other,
            };
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: Some(idx + 1),
                field: None,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(at_line)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value` setting (also used for `--set`).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "preset" => {
                if !PRESET_NAMES.contains(&value) {
                    return Err(Error::config(key, format!("unknown preset `{value}`")));
                }
                self.preset = Some(value.to_string());
            }
            "mode" => {
                self.mode = FormulaMode::parse(value)
                    .ok_or_else(|| Error::config(key, format!("unknown mode `{value}`")))?;
            }
            "axis" => self.axis = Some(Axis::parse(value)?),
            "outputs" => {
                let mut outputs = Vec::new();
                for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let q = Quantity::parse(name)
                        .ok_or_else(|| Error::config(key, format!("unknown quantity `{name}`")))?;
                    if !outputs.contains(&q) {
                        outputs.push(q);
                    }
                }
                if outputs.is_empty() {
                    return Err(Error::config(key, "no quantities requested"));
                }
                self.outputs = outputs;
            }
            "excitation" => self.excitation = parse_number(key, value)?,
            "coherent_order" => {
                let j: u32 = parse_number(key, value)?;
                if j == 0 {
                    return Err(Error::config(key, "order must be at least 1"));
                }
                self.coherent_order = j;
            }
            "zeta" => self.zeta = parse_number(key, value)?,
            "hierarchy_factor" => self.hierarchy_factor = parse_number(key, value)?,
            k if PARAMETER_KEYS.contains(&k) => {
                let v: f64 = parse_number(key, value)?;
                if !v.is_finite() {
                    return Err(Error::config(key, "value must be finite"));
                }
                self.overrides.insert(k.to_string(), v);
            }
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Applies `key=value` as given on the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(pair, "expected key=value"))?;
        self.set(k.trim(), v.trim())
    }

    /// Parameters before the axis is applied.
    pub fn base_parameters(&self) -> Result<SystemParameters> {
        let mut p = match &self.preset {
            Some(name) => preset(name)
                .ok_or_else(|| Error::config("preset", format!("unknown preset `{name}`")))?,
            None => {
                let missing: Vec<&str> = PARAMETER_KEYS
                    .iter()
                    .copied()
                    .filter(|k| !self.overrides.contains_key(*k))
                    .collect();
                if !missing.is_empty() {
                    return Err(Error::config(
                        missing[0],
                        format!("no preset given and parameters {missing:?} are unset"),
                    ));
                }
                SystemParameters {
                    omega_k: 0.0,
                    omega_m: 0.0,
                    omega_nv: 0.0,
                    lambda: 0.0,
                    g0: 0.0,
                    omega_p: 0.0,
                    kappa_a: 0.0,
                    kappa_b: 0.0,
                    kappa_sigma: 0.0,
                    drive: 0.0,
                    x_b: 0.0,
                }
            }
        };
        for (k, &v) in &self.overrides {
            set_parameter(&mut p, k, v)?;
        }
        Ok(p)
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta.is_finite()) {
            return Err(Error::config("zeta", "must be finite"));
        }
        if !(self.hierarchy_factor > 0.0) {
            return Err(Error::config("hierarchy_factor", "must be positive"));
        }
        if self.preset.is_none() && self.overrides.is_empty() {
            return Ok(());
        }
        let base = self.base_parameters()?;
        base.validate()
            .map_err(|e| Error::config("parameters", e.to_string()))?;
        if let Some(axis) = &self.axis {
            if axis.param == "omega_p" && axis.lo.max(axis.hi) * TAU >= base.omega_m {
                return Err(Error::config(
                    "axis",
                    "omega_p range must stay below omega_m",
                ));
            }
            if axis.param == "omega_m" && axis.lo.min(axis.hi) * TAU <= base.omega_p {
                return Err(Error::config(
                    "axis",
                    "omega_m range must stay above omega_p",
                ));
            }
        }
        Ok(())
    }

    pub fn require_axis(&self) -> Result<&Axis> {
        self.axis
            .as_ref()
            .ok_or_else(|| Error::config("axis", "no sweep axis given"))
    }

    /// The effective configuration as text that [`SweepConfig::parse`] reads back.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.preset {
            out.push_str(&format!("preset = {p}\n"));
        }
        out.push_str(&format!("mode = {}\n", self.mode.as_str()));
        if let Some(axis) = &self.axis {
            out.push_str(&format!("axis = {axis}\n"));
        }
        let names: Vec<&str> = self.outputs.iter().map(|q| q.name()).collect();
        out.push_str(&format!("outputs = {}\n", names.join(",")));
        out.push_str(&format!("excitation = {}\n", self.excitation));
        out.push_str(&format!("coherent_order = {}\n", self.coherent_order));
        out.push_str(&format!("zeta = {:e}\n", self.zeta));
        out.push_str(&format!("hierarchy_factor = {:e}\n", self.hierarchy_factor));
        for (k, v) in &self.overrides {
            out.push_str(&format!("{k} = {v:e}\n"));
        }
        out
    }
}
