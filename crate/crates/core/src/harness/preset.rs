//! Named parameter presets and the time-scale hierarchy check.

use std::f64::consts::TAU;

use crate::model::SystemParameters;

/// Minimum ratio accepted for each "≫" link unless the caller asks otherwise.
pub const DEFAULT_HIERARCHY_FACTOR: f64 = 10.0;

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 1] = ["feasibility"];

/// Experimentally motivated operating point, given in ordinary frequencies
/// (Hz) and converted to rad/s by [`FeasibilityPreset::parameters`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityPreset {
    pub kappa_a_hz: f64,
    pub kappa_b_hz: f64,
    pub kappa_sigma_hz: f64,
    pub omega_m_hz: f64,
    pub omega_nv_hz: f64,
    pub omega_k_hz: f64,
    /// λ below the dissipative threshold, which sits near 473 Hz here.
    pub lambda_hz: f64,
    pub g0_hz: f64,
    pub omega_p_hz: f64,
    /// Coherent drive, large enough for ⟨X_a⟩ ≈ 10⁴.
    pub drive_hz: f64,
    pub x_b: f64,
}

impl Default for FeasibilityPreset {
    fn default() -> Self {
        FeasibilityPreset {
            kappa_a_hz: 10e6,
            kappa_b_hz: 1.0,
            kappa_sigma_hz: 1e3,
            omega_m_hz: 10e3,
            omega_nv_hz: 10e9,
            omega_k_hz: 1e9,
            lambda_hz: 400.0,
            g0_hz: 1e6,
            omega_p_hz: 4e3,
            drive_hz: 1e13,
            x_b: 1.0,
        }
    }
}

impl FeasibilityPreset {
    pub fn parameters(&self) -> SystemParameters {
        SystemParameters {
            omega_k: TAU * self.omega_k_hz,
            omega_m: TAU * self.omega_m_hz,
            omega_nv: TAU * self.omega_nv_hz,
            lambda: TAU * self.lambda_hz,
            g0: TAU * self.g0_hz,
            omega_p: TAU * self.omega_p_hz,
            kappa_a: TAU * self.kappa_a_hz,
            kappa_b: TAU * self.kappa_b_hz,
            kappa_sigma: TAU * self.kappa_sigma_hz,
            drive: TAU * self.drive_hz,
            x_b: self.x_b,
        }
    }
}

/// Parameters of a named preset.
pub fn preset(name: &str) -> Option<SystemParameters> {
    match name {
        "feasibility" => Some(FeasibilityPreset::default().parameters()),
        _ => None,
    }
}

/// One warning per violated "≫" link: ω_NV ≫ ω_K ≫ ω_m and
/// κ_σ, κ_a ≫ κ_b. A link passes when the ratio is at least `factor`.
pub fn validate_hierarchy(p: &SystemParameters, factor: f64) -> Vec<String> {
    let links = [
        ("omega_nv", p.omega_nv, "omega_k", p.omega_k),
        ("omega_k", p.omega_k, "omega_m", p.omega_m),
        ("kappa_sigma", p.kappa_sigma, "kappa_b", p.kappa_b),
        ("kappa_a", p.kappa_a, "kappa_b", p.kappa_b),
    ];
    links
        .iter()
        .filter(|(_, big, _, small)| !(big / small >= factor))
        .map(|(bn, big, sn, small)| {
            format!(
                "{bn}/{sn} = {:.3e} is below the required factor {factor}",
                big / small
            )
        })
        .collect()
}
