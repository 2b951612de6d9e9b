//! Closed-system estimation: QFI of the squeezed magnon eigenstate,
//! adiabatic preparation time, and the time-rescaled QFI.
//!
//! λ enters the eigenstate only through Λ = λ e^r x_b + g0; g0 is held
//! fixed when differentiating, so the QFI carries an x_b² prefactor.

use crate::error::{Error, Result};
use crate::model::{
    phase_point, Phase, PhasePoint, SqueezedFrame, SystemParameters, DEFAULT_CRITICAL_TOLERANCE,
};

/// Default adiabaticity parameter γ of the preparation sweep.
pub const DEFAULT_ADIABATICITY: f64 = 1e-2;

/// The n-th eigenstate S(ξ)|n⟩|↓⟩|x_b⟩ of the decoupled Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenstateSpec {
    pub n: u32,
    pub phase_point: PhasePoint,
    pub frame: SqueezedFrame,
}

impl EigenstateSpec {
    /// Fails with `PhaseError` in the superradiant phase. A point inside the
    /// critical band is accepted; QFI evaluations then return `+inf`.
    pub fn new(p: &SystemParameters, frame: SqueezedFrame, n: u32) -> Result<Self> {
        let pp = phase_point(p, &frame);
        if pp.phase == Phase::Superradiant {
            return Err(Error::Phase(format!(
                "no eigenstate beyond the critical positions (4Λ²/(ω_NV ω_K) = {})",
                pp.criticality
            )));
        }
        Ok(EigenstateSpec {
            n,
            phase_point: pp,
            frame,
        })
    }

    pub fn is_critical(&self) -> bool {
        self.phase_point.phase == Phase::Critical
    }
}

/// QFI of S(ξ)|n⟩ with respect to λ:
/// Λ² e^{2r} x_b² (n² + n + 1) / (2 (Λ_c² − Λ²)²).
pub fn eigenstate_qfi(spec: &EigenstateSpec, p: &SystemParameters) -> Result<f64> {
    if spec.is_critical() {
        return Ok(f64::INFINITY);
    }
    let coupling = spec.phase_point.coupling;
    let gap = p.critical_coupling_sq() - coupling * coupling;
    if !(gap > 0.0) {
        return Err(Error::Phase("eigenstate QFI requires Λ² < Λ_c²".into()));
    }
    let n = f64::from(spec.n);
    let enhancement_sq = (2.0 * spec.frame.r).exp();
    Ok(
        coupling * coupling * enhancement_sq * p.x_b * p.x_b * (n * n + n + 1.0)
            / (2.0 * gap * gap),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticSchedule {
    /// Adiabaticity parameter γ ∈ (0, 1).
    pub gamma_ad: f64,
    /// Sweep time T.
    pub sweep_time: f64,
}

impl AdiabaticSchedule {
    pub fn new(gamma_ad: f64, sweep_time: f64) -> Result<Self> {
        check_gamma(gamma_ad)?;
        if !(sweep_time > 0.0) {
            return Err(Error::domain(format!(
                "sweep time must be positive, got {sweep_time}"
            )));
        }
        Ok(AdiabaticSchedule {
            gamma_ad,
            sweep_time,
        })
    }
}

fn check_gamma(gamma_ad: f64) -> Result<()> {
    if gamma_ad > 0.0 && gamma_ad < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "adiabaticity γ must lie in (0, 1), got {gamma_ad}"
        )))
    }
}

/// Time of an adiabatic ramp of Λ from 0 to `coupling_final`:
/// T ≈ [2 γ ω_K sqrt(1 − Λ²/Λ_c²)]⁻¹.
///
/// Returns `+inf` inside the critical band and `PhaseError` beyond it.
pub fn adiabatic_time(p: &SystemParameters, coupling_final: f64, gamma_ad: f64) -> Result<f64> {
    check_gamma(gamma_ad)?;
    let ratio = coupling_final * coupling_final / p.critical_coupling_sq();
    if (1.0 - ratio).abs() < DEFAULT_CRITICAL_TOLERANCE {
        return Ok(f64::INFINITY);
    }
    if ratio > 1.0 {
        return Err(Error::Phase(format!(
            "no adiabatic path to Λ²/Λ_c² = {ratio} (beyond criticality)"
        )));
    }
    Ok(1.0 / (2.0 * gamma_ad * p.omega_k * (1.0 - ratio).sqrt()))
}

/// Coupling reached after a sweep of duration T, inverting `adiabatic_time`.
pub fn coupling_for_time(p: &SystemParameters, schedule: &AdiabaticSchedule) -> Result<f64> {
    let x = 2.0 * schedule.gamma_ad * p.omega_k * schedule.sweep_time;
    let ratio = 1.0 - 1.0 / (x * x);
    if ratio < 0.0 {
        return Err(Error::domain(format!(
            "sweep time {} is shorter than 1/(2γω_K); no coupling reachable",
            schedule.sweep_time
        )));
    }
    Ok((ratio * p.critical_coupling_sq()).sqrt())
}

/// How Λ is chosen when expressing the QFI in terms of the sweep time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScaling {
    /// Λ taken from the parameters, independent of T.
    FixedCoupling,
    /// Λ is the value the sweep of length T reaches.
    CouplingFromTime,
}

/// Large-n QFI in terms of the preparation time:
/// 8 (γ ω_K T)⁴ Λ² e^{2r} x_b² n² / Λ_c⁴.
pub fn qfi_vs_time(
    p: &SystemParameters,
    frame: &SqueezedFrame,
    schedule: &AdiabaticSchedule,
    n: u32,
    mode: TimeScaling,
) -> Result<f64> {
    let coupling = match mode {
        TimeScaling::FixedCoupling => frame.lambda_e * p.x_b + p.g0,
        TimeScaling::CouplingFromTime => coupling_for_time(p, schedule)?,
    };
    let lc_sq = p.critical_coupling_sq();
    let gwt = schedule.gamma_ad * p.omega_k * schedule.sweep_time;
    let n = f64::from(n);
    Ok(
        8.0 * gwt.powi(4) * coupling * coupling * (2.0 * frame.r).exp() * p.x_b * p.x_b * n * n
            / (lc_sq * lc_sq),
    )
}
