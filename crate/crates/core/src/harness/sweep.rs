//! Grid sweeps producing plot-ready CSV.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::closed::{eigenstate_qfi, EigenstateSpec};
use crate::error::{Error, Result};
use crate::gaussian::{gaussian_qfi, near_critical_qfi, precision_bound};
use crate::measurement::{
    error_propagation, noise_susceptibility, steady_anharmonic_susceptibility, MeasurementOp,
};
use crate::model::{
    phase_point, squeezed_frame, Phase, SystemParameters, DEFAULT_CRITICAL_TOLERANCE,
};
use crate::numdiff::StepPolicy;
use crate::open::{FormulaMode, MechanicalFamily};

use super::config::{set_parameter, Quantity, SweepConfig};
use super::preset::validate_hierarchy;

/// One table entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Value(f64),
    /// Expected divergence or undefined region (critical point, unstable
    /// drift, below threshold).
    Sentinel(f64, &'static str),
    /// The computation itself failed.
    Failed(&'static str),
}

impl Cell {
    pub fn value(&self) -> f64 {
        match *self {
            Cell::Value(v) | Cell::Sentinel(v, _) => v,
            Cell::Failed(_) => f64::NAN,
        }
    }

    pub fn reason(&self) -> Option<&'static str> {
        match *self {
            Cell::Value(_) => None,
            Cell::Sentinel(_, r) | Cell::Failed(r) => Some(r),
        }
    }
}

/// Short reason code for an error.
pub fn reason_code(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Phase(_) => "phase",
        Error::Stability(_) => "unstable",
        Error::Truncation { .. } => "truncation",
        Error::Step(_) => "step",
        Error::Order { .. } => "order",
        Error::Arity(_) => "arity",
        Error::Convergence(_) => "convergence",
        Error::Config { .. } => "config",
    }
}

fn cell(r: Result<f64>) -> Cell {
    match r {
        Ok(v) => Cell::Value(v),
        Err(e) => Cell::Failed(reason_code(&e)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Axis value in configuration units.
    pub axis_value: f64,
    /// λ actually used, rad/s.
    pub lambda: f64,
    pub cells: Vec<Cell>,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.cells.iter().any(|c| matches!(c, Cell::Failed(_)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub metadata: Vec<(String, String)>,
    pub axis: String,
    pub lambda_column: bool,
    pub outputs: Vec<Quantity>,
    pub rows: Vec<SweepRow>,
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:e}")
    }
}

impl SweepTable {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut cols = vec![self.axis.clone()];
        if self.lambda_column {
            cols.push("lambda".into());
        }
        cols.extend(self.outputs.iter().map(|q| q.name().to_string()));
        cols.push("reason".into());
        cols
    }

    /// Column of values by name (axis, `lambda` or an output).
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        if name == self.axis {
            return Some(self.rows.iter().map(|r| r.axis_value).collect());
        }
        if name == "lambda" && self.lambda_column {
            return Some(self.rows.iter().map(|r| r.lambda).collect());
        }
        let idx = self.outputs.iter().position(|q| q.name() == name)?;
        Some(self.rows.iter().map(|r| r.cells[idx].value()).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.column_names().join(","));
        out.push('\n');
        for row in &self.rows {
            let mut fields = vec![format_value(row.axis_value)];
            if self.lambda_column {
                fields.push(format_value(row.lambda));
            }
            fields.extend(row.cells.iter().map(|c| format_value(c.value())));
            let reasons: Vec<String> = self
                .outputs
                .iter()
                .zip(&row.cells)
                .filter_map(|(q, c)| c.reason().map(|r| format!("{}={r}", q.name())))
                .collect();
            fields.push(reasons.join(";"));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Initial finite-difference step in λ: small against λ0 and small enough
/// that the gap changes by no more than 1% of itself.
pub fn default_step(family: &MechanicalFamily) -> f64 {
    let mut h = 1e-3 * family.lambda0.abs();
    let slope = family.gap_slope().abs();
    if slope > 0.0 && family.gap0 > 0.0 {
        h = h.min(1e-2 * family.gap0 / slope);
    }
    if h > 0.0 {
        h
    } else {
        1e-6
    }
}

struct PointContext<'a> {
    cfg: &'a SweepConfig,
    mode: FormulaMode,
}

impl PointContext<'_> {
    fn closed_cells(&self, p: &SystemParameters, out: &mut [Option<Cell>]) {
        let frame = match squeezed_frame(p) {
            Ok(f) => f,
            Err(e) => {
                let c = Cell::Failed(reason_code(&e));
                out[0] = Some(c);
                out[1] = Some(c);
                return;
            }
        };
        let pp = phase_point(p, &frame);
        out[0] = Some(match pp.phase {
            Phase::Normal => Cell::Value(pp.xi),
            Phase::Critical => Cell::Sentinel(f64::INFINITY, "critical"),
            Phase::Superradiant => Cell::Sentinel(f64::INFINITY, "superradiant"),
        });
        out[1] = Some(match pp.phase {
            Phase::Superradiant => Cell::Sentinel(f64::NAN, "superradiant"),
            Phase::Critical => Cell::Sentinel(f64::INFINITY, "critical"),
            Phase::Normal => cell(
                EigenstateSpec::new(p, frame, self.cfg.excitation)
                    .and_then(|s| eigenstate_qfi(&s, p)),
            ),
        });
    }

    fn evaluate(&self, p: &SystemParameters, gap_ratio: Option<f64>) -> (f64, Vec<Cell>) {
        let outputs = &self.cfg.outputs;
        let family = match gap_ratio {
            Some(g) => MechanicalFamily::at_gap(p, self.mode, g),
            None => MechanicalFamily::new(p, self.mode),
        };
        let family = match family {
            Ok(f) => f,
            Err(e) => {
                let c = Cell::Failed(reason_code(&e));
                return (p.lambda, vec![c; outputs.len()]);
            }
        };
        let p = family.apply_to(p);
        let dm = family.drift();

        let mut closed = [None, None];
        if outputs.iter().any(|q| !q.mode_sensitive()) {
            self.closed_cells(&p, &mut closed);
        }

        let step = default_step(&family);
        let state_fn = |d: f64| family.state_at(d);
        let unstable = Cell::Sentinel(f64::NAN, "unstable");
        let mut qfi = None;
        let mut gaussian = || -> Cell {
            *qfi.get_or_insert_with(|| {
                if !dm.stable {
                    return unstable;
                }
                cell(gaussian_qfi(state_fn, step).map(|q| q.value))
            })
        };

        let cells = outputs
            .iter()
            .map(|q| match q {
                Quantity::Xi => closed[0].unwrap(),
                Quantity::QfiClosed => closed[1].unwrap(),
                Quantity::Tau if dm.stable => Cell::Value(dm.tau),
                Quantity::Tau => Cell::Sentinel(f64::INFINITY, "unstable"),
                Quantity::Delta => Cell::Value(dm.gap),
                _ if !dm.stable => unstable,
                Quantity::QfiGaussian => gaussian(),
                Quantity::PrecisionCrb => match gaussian() {
                    Cell::Value(f) => cell(precision_bound(f)),
                    other => other,
                },
                Quantity::QfiNearCritical => {
                    if dm.omega_eff > 0.0 {
                        cell(
                            near_critical_qfi(&p, &family.frame, &dm, family.means.mean_xa)
                                .map(|n| n.gap_form),
                        )
                    } else {
                        Cell::Sentinel(f64::NAN, "below_threshold")
                    }
                }
                Quantity::PrecisionIntensity => {
                    match error_propagation(&MeasurementOp::Intensity, state_fn, step) {
                        Ok(ep) if ep.null_sensitivity => {
                            Cell::Sentinel(f64::INFINITY, "null_slope")
                        }
                        Ok(ep) => Cell::Value(ep.precision),
                        Err(e) => Cell::Failed(reason_code(&e)),
                    }
                }
                Quantity::ChiCoherent => cell(
                    noise_susceptibility(
                        &MeasurementOp::Intensity,
                        &MeasurementOp::CoherentDrive(self.cfg.coherent_order),
                        state_fn,
                        step,
                    )
                    .map(|s| s.value),
                ),
                Quantity::ChiAnharmonic => {
                    cell(steady_anharmonic_susceptibility(self.cfg.zeta, &dm))
                }
            })
            .collect();
        (p.lambda, cells)
    }
}

fn metadata(cfg: &SweepConfig, base: &SystemParameters) -> Vec<(String, String)> {
    let warnings = validate_hierarchy(base, cfg.hierarchy_factor);
    let step = StepPolicy::new(1.0);
    let mut meta = vec![
        ("generator".into(), format!("tripartite {}", env!("CARGO_PKG_VERSION"))),
        ("mode".into(), cfg.mode.as_str().into()),
        ("preset".into(), cfg.preset.clone().unwrap_or_else(|| "none".into())),
        (
            "tolerances".into(),
            format!(
                "critical_band={DEFAULT_CRITICAL_TOLERANCE:e} step_early_exit={:e} step_fail_above={:e} \
                 null_slope={:e} epsilon_spread={}",
                step.early_exit,
                step.fail_above,
                crate::measurement::NULL_SLOPE_TOLERANCE,
                crate::measurement::CONVERGENCE_SPREAD
            ),
        ),
        ("units".into(), "axis and overrides in Hz (x_b, gap_ratio dimensionless); lambda, tau, delta in rad/s units".into()),
        ("hierarchy".into(), if warnings.is_empty() { "ok".into() } else { warnings.join("; ") }),
    ];
    for line in cfg.to_text().lines() {
        meta.push(("config".into(), line.to_string()));
    }
    meta
}

/// Runs the sweep described by `cfg` on `jobs` worker threads. Rows come
/// back in grid order.
pub fn run_sweep(cfg: &SweepConfig, jobs: usize) -> Result<SweepTable> {
    cfg.validate()?;
    let axis = cfg.require_axis()?;
    let base = cfg.base_parameters()?;
    let ctx = PointContext {
        cfg,
        mode: cfg.mode,
    };
    let points = axis.values();

    let evaluate = |&x: &f64| -> SweepRow {
        let (lambda, cells) = if axis.is_gap_ratio() {
            ctx.evaluate(&base, Some(x))
        } else {
            let mut p = base;
            match set_parameter(&mut p, &axis.param, x) {
                Ok(()) => ctx.evaluate(&p, None),
                Err(e) => (
                    p.lambda,
                    vec![Cell::Failed(reason_code(&e)); cfg.outputs.len()],
                ),
            }
        };
        SweepRow {
            axis_value: x,
            lambda,
            cells,
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    let rows = pool.install(|| points.par_iter().map(evaluate).collect());

    Ok(SweepTable {
        metadata: metadata(cfg, &base),
        axis: axis.param.clone(),
        lambda_column: axis.is_gap_ratio(),
        outputs: cfg.outputs.clone(),
        rows,
    })
}

/// Columns that changed between the two formula modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDiff {
    pub changed: BTreeSet<String>,
    /// Columns the formula variant is documented to affect.
    pub documented: BTreeSet<String>,
}

impl ModeDiff {
    /// Changed columns outside the documented set.
    pub fn unexpected(&self) -> BTreeSet<String> {
        self.changed.difference(&self.documented).cloned().collect()
    }

    /// Documented columns that happened not to change on this grid.
    pub fn unchanged_documented(&self) -> BTreeSet<String> {
        self.documented.difference(&self.changed).cloned().collect()
    }

    pub fn report(&self) -> String {
        let list = |s: &BTreeSet<String>| {
            if s.is_empty() {
                "(none)".to_string()
            } else {
                s.iter().cloned().collect::<Vec<_>>().join(", ")
            }
        };
        format!(
            "changed: {}\ndocumented: {}\nunexpected: {}\nunchanged documented: {}\n",
            list(&self.changed),
            list(&self.documented),
            list(&self.unexpected()),
            list(&self.unchanged_documented())
        )
    }
}

/// Columns the strict/corrected switch is expected to change. With a
/// `gap_ratio` axis λ is solved per mode while Δ stays put, so only the
/// columns that depend on more than Δ move, λ among them.
pub fn documented_mode_columns(cfg: &SweepConfig) -> Result<BTreeSet<String>> {
    let axis = cfg.require_axis()?;
    let mut cols: BTreeSet<String> = cfg
        .outputs
        .iter()
        .filter(|q| {
            if axis.is_gap_ratio() {
                !q.fixed_by_gap()
            } else {
                q.mode_sensitive()
            }
        })
        .map(|q| q.name().to_string())
        .collect();
    if axis.is_gap_ratio() {
        cols.insert("lambda".into());
    }
    Ok(cols)
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn same_cell(a: &Cell, b: &Cell) -> bool {
    a.value().to_bits() == b.value().to_bits() && a.reason() == b.reason()
}

/// Runs the sweep in both modes and compares column by column.
pub fn mode_diff(cfg: &SweepConfig, jobs: usize) -> Result<ModeDiff> {
    let mut corrected = cfg.clone();
    corrected.mode = FormulaMode::Corrected;
    let mut strict = cfg.clone();
    strict.mode = FormulaMode::StrictPaper;
    let a = run_sweep(&corrected, jobs)?;
    let b = run_sweep(&strict, jobs)?;
    let mut changed = BTreeSet::new();
    for name in a.column_names() {
        if name == "reason" {
            continue;
        }
        let differs = match a.outputs.iter().position(|q| q.name() == name) {
            Some(idx) => a
                .rows
                .iter()
                .zip(&b.rows)
                .any(|(x, y)| !same_cell(&x.cells[idx], &y.cells[idx])),
            None => match (a.column(&name), b.column(&name)) {
                (Some(x), Some(y)) => !same_bits(&x, &y),
                _ => false,
            },
        };
        if differs {
            changed.insert(name);
        }
    }
    Ok(ModeDiff {
        changed,
        documented: documented_mode_columns(cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(axis: &str, outputs: &str) -> SweepConfig {
        SweepConfig::parse(&format!(
            "preset = feasibility\naxis = {axis}\noutputs = {outputs}\n"
        ))
        .unwrap()
    }

    #[test]
    fn rows_in_grid_order() {
        let cfg = config("lambda:100:450:8", "tau,delta");
        let t = run_sweep(&cfg, 4).unwrap();
        let axis: Vec<f64> = t.rows.iter().map(|r| r.axis_value).collect();
        assert_eq!(axis, cfg.axis.as_ref().unwrap().values());
        // Δ decreases monotonically as λ grows towards threshold.
        let delta = t.column("delta").unwrap();
        assert!(delta.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn unstable_rows_are_sentinels() {
        let cfg = config("lambda:400:600:3", "tau,qfi_gaussian");
        let t = run_sweep(&cfg, 1).unwrap();
        let last = t.rows.last().unwrap();
        assert_eq!(last.cells[0], Cell::Sentinel(f64::INFINITY, "unstable"));
        assert!(!last.failed());
        let csv = t.to_csv();
        assert!(csv.contains("tau=unstable;qfi_gaussian=unstable"));
    }

    #[test]
    fn superradiant_rows() {
        // Λ_c ≈ 2π·1.58 GHz; a large g0 crosses it.
        let mut cfg = config("g0:1e6:2e9:3", "xi,qfi_closed");
        cfg.set("lambda", "1").unwrap();
        let t = run_sweep(&cfg, 2).unwrap();
        assert!(matches!(t.rows[0].cells[0], Cell::Value(_)));
        assert_eq!(t.rows[2].cells[0].reason(), Some("superradiant"));
        assert_eq!(t.rows[2].cells[1].reason(), Some("superradiant"));
    }

    #[test]
    fn csv_literals() {
        assert_eq!(format_value(f64::INFINITY), "inf");
        assert_eq!(format_value(f64::NAN), "nan");
        assert_eq!(format_value(-f64::INFINITY), "-inf");
        assert_eq!(format_value(1.5e3).parse::<f64>().unwrap(), 1.5e3);
    }

    #[test]
    fn missing_axis_is_config_error() {
        let cfg = SweepConfig::parse("preset = feasibility\n").unwrap();
        assert!(matches!(run_sweep(&cfg, 1), Err(Error::Config { .. })));
    }

    #[test]
    fn gap_ratio_axis_reaches_requested_gap() {
        let cfg = config("gap_ratio:1:1e-3:4:log", "delta");
        let t = run_sweep(&cfg, 2).unwrap();
        let kb = std::f64::consts::TAU;
        for (r, d) in t.rows.iter().zip(t.column("delta").unwrap()) {
            assert!((d / (r.axis_value * kb * kb) - 1.0).abs() < 1e-12);
        }
    }
}
