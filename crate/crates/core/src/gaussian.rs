//! Single-mode Gaussian states and their quantum Fisher information.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::model::{SqueezedFrame, SystemParameters};
use crate::numdiff::{refine, StepPolicy};
use crate::open::DriftModel;

/// Purity above which 2P′²/(1 − P⁴) is replaced by its P → 1 limit.
pub const PURE_STATE_GUARD: f64 = 1e-9;

/// Δ/κ_b² above which the near-critical closed forms are flagged.
pub const NEAR_CRITICAL_WARNING: f64 = 1e-2;

/// Quadrature means (q, p) and covariance, vacuum = I/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

impl GaussianState {
    pub fn new(mean: Vector2<f64>, cov: Matrix2<f64>) -> Self {
        GaussianState { mean, cov }
    }

    pub fn vacuum() -> Self {
        Self::new(Vector2::zeros(), Matrix2::identity() * 0.5)
    }

    pub fn purity(&self) -> f64 {
        0.5 / self.cov.determinant().sqrt()
    }

    /// Checks symmetry, positivity and the uncertainty relation det ≥ 1/4.
    pub fn validate(&self) -> Result<()> {
        let c = &self.cov;
        let scale = c.abs().max().max(1.0);
        if (c[(0, 1)] - c[(1, 0)]).abs() > 1e-12 * scale {
            return Err(Error::domain("covariance is not symmetric"));
        }
        if !(c[(0, 0)] > 0.0 && c[(1, 1)] > 0.0) {
            return Err(Error::domain("covariance is not positive definite"));
        }
        let det = c.determinant();
        if det < 0.25 * (1.0 - 1e-9) {
            return Err(Error::domain(format!(
                "det C = {det} violates the uncertainty bound 1/4"
            )));
        }
        Ok(())
    }

    /// Applies a phase-space rotation by `angle` to mean and covariance.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let r = Matrix2::new(c, -s, s, c);
        Self::new(r * self.mean, r * self.cov * r.transpose())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianQfi {
    pub value: f64,
    /// Finite-difference step actually used.
    pub step: f64,
    /// Whether the pure-state limit replaced the purity term.
    pub pure_guard: bool,
}

fn qfi_terms(
    state: &GaussianState,
    dcov: &Matrix2<f64>,
    dpurity: f64,
    dmean: &Vector2<f64>,
) -> Result<(f64, bool)> {
    let inv = state
        .cov
        .try_inverse()
        .ok_or_else(|| Error::domain("singular covariance"))?;
    let p = state.purity();
    let m = inv * dcov;
    let first = (m * m).trace() / (2.0 * (1.0 + p * p));
    let (second, guarded) = if p > 1.0 - PURE_STATE_GUARD {
        let gap = 1.0 - p;
        let term = if dpurity == 0.0 || gap <= 0.0 {
            0.0
        } else {
            dpurity * dpurity / (2.0 * gap)
        };
        (term, true)
    } else {
        (2.0 * dpurity * dpurity / (1.0 - p.powi(4)), false)
    };
    let third = (dmean.transpose() * inv * dmean)[(0, 0)];
    Ok((first + second + third, guarded))
}

/// QFI of a one-parameter Gaussian family,
/// F = Tr[(C⁻¹C′)²]/(2(1 + P²)) + 2P′²/(1 − P⁴) + ⟨X⟩′ᵀ C⁻¹ ⟨X⟩′.
///
/// `state_fn(δ)` returns the state at parameter λ0 + δ. Derivatives are
/// central differences refined over a ladder of steps starting at `step`.
/// `state_fn` must be safe to call repeatedly; it is evaluated several
/// times per step.
pub fn gaussian_qfi<F>(state_fn: F, step: f64) -> Result<GaussianQfi>
where
    F: Fn(f64) -> Result<GaussianState>,
{
    let center = state_fn(0.0)?;
    let mut guard_used = false;
    let refined = refine(StepPolicy::new(step), |h| {
        let plus = state_fn(h)?;
        let minus = state_fn(-h)?;
        let dcov = (plus.cov - minus.cov) / (2.0 * h);
        let dpurity = (plus.purity() - minus.purity()) / (2.0 * h);
        let dmean = (plus.mean - minus.mean) / (2.0 * h);
        let (f, guarded) = qfi_terms(&center, &dcov, dpurity, &dmean)?;
        guard_used |= guarded;
        Ok(f)
    })?;
    Ok(GaussianQfi {
        value: refined.value.max(0.0),
        step: refined.step,
        pure_guard: guard_used,
    })
}

/// Both reference near-critical forms of the mechanical QFI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearCriticalQfi {
    /// 16 ω_m² λ² e^{4r} ⟨X_a⟩⁴ / (ω_NV² Δ²).
    pub gap_form: f64,
    /// 16 ω_m λ² τ² e^{4r} ⟨X_a⟩⁴ / (ω_eff ω_NV²).
    pub tau_form: f64,
    /// Δ/κ_b² exceeds [`NEAR_CRITICAL_WARNING`].
    pub far_from_critical: bool,
}

impl NearCriticalQfi {
    /// τ-form over Δ-form. Since Δ = (κ_b − √(ω_m ω_eff))(κ_b + √(ω_m ω_eff)),
    /// this equals (κ_b + √(ω_m ω_eff))²/(ω_m ω_eff), which tends to 4.
    pub fn form_ratio(&self) -> f64 {
        self.tau_form / self.gap_form
    }
}

pub fn near_critical_qfi(
    p: &SystemParameters,
    frame: &SqueezedFrame,
    dm: &DriftModel,
    mean_xa: f64,
) -> Result<NearCriticalQfi> {
    if !dm.stable {
        return Err(Error::Stability(format!(
            "Δ = {:e} is not positive",
            dm.gap
        )));
    }
    if !(dm.omega_eff > 0.0) {
        return Err(Error::domain(format!(
            "ω_eff = {:e} ≤ 0: the τ-form is undefined below threshold",
            dm.omega_eff
        )));
    }
    let common = 16.0 * p.lambda * p.lambda * (4.0 * frame.r).exp() * mean_xa.powi(4)
        / (p.omega_nv * p.omega_nv);
    Ok(NearCriticalQfi {
        gap_form: common * p.omega_m * p.omega_m / (dm.gap * dm.gap),
        tau_form: common * p.omega_m * dm.tau * dm.tau / dm.omega_eff,
        far_from_critical: dm.gap / (dm.kappa_b * dm.kappa_b) > NEAR_CRITICAL_WARNING,
    })
}

/// Cramér-Rao bound δλ ≥ 1/√F.
pub fn precision_bound(qfi: f64) -> Result<f64> {
    if qfi > 0.0 {
        Ok(1.0 / qfi.sqrt())
    } else {
        Err(Error::domain(format!("QFI must be positive, got {qfi}")))
    }
}

/// Closed-form near-critical bound
/// √ω_eff ω_NV / (4 √ω_m λ τ e^{2r} ⟨X_a⟩²).
pub fn near_critical_precision(
    p: &SystemParameters,
    frame: &SqueezedFrame,
    dm: &DriftModel,
    mean_xa: f64,
) -> f64 {
    dm.omega_eff.sqrt() * p.omega_nv
        / (4.0 * p.omega_m.sqrt() * p.lambda * dm.tau * (2.0 * frame.r).exp() * mean_xa * mean_xa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::open::{FormulaMode, MechanicalFamily};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> SystemParameters {
        SystemParameters {
            omega_k: 2.0,
            omega_m: 1.0,
            omega_nv: 10.0,
            lambda: 0.3,
            g0: 0.0,
            omega_p: 0.2,
            kappa_a: 1.0,
            kappa_b: 0.3,
            kappa_sigma: 1.0,
            drive: 3.0,
            x_b: 1.0,
        }
    }

    fn thermal(n: f64) -> GaussianState {
        GaussianState::new(Vector2::zeros(), Matrix2::identity() * (n + 0.5))
    }

    #[test]
    fn constant_family_has_no_information() {
        let st = thermal(2.0);
        let f = gaussian_qfi(|_| Ok(st), 1e-3).unwrap();
        assert_eq!(f.value, 0.0);
    }

    #[test]
    fn displaced_vacuum_third_term() {
        let s = 0.7f64;
        let lambda0 = 1.3;
        let f = gaussian_qfi(
            |d| {
                Ok(GaussianState::new(
                    Vector2::new(2.0 * s.sqrt() * (lambda0 + d), 0.0),
                    Matrix2::identity() * 0.5,
                ))
            },
            1e-4,
        )
        .unwrap();
        assert!((f.value - 8.0 * s).abs() < 1e-9);
        assert!(f.pure_guard);
    }

    #[test]
    fn thermal_occupation_qfi() {
        // F = 1/(n(n + 1)) for a thermal state with respect to its occupation.
        for n0 in [0.1, 1.0, 7.5] {
            let f = gaussian_qfi(|d| Ok(thermal(n0 + d)), 1e-4).unwrap();
            assert!((f.value * n0 * (n0 + 1.0) - 1.0).abs() < 1e-8, "n = {n0}");
        }
    }

    #[test]
    fn squeezed_vacuum_qfi() {
        // Pure squeezing: F_r = 2 for C = diag(e^{2r}, e^{-2r})/2.
        let r0 = 0.4;
        let f = gaussian_qfi(
            |d| {
                let r = r0 + d;
                Ok(GaussianState::new(
                    Vector2::zeros(),
                    Matrix2::new((2.0 * r).exp(), 0.0, 0.0, (-2.0 * r).exp()) * 0.5,
                ))
            },
            1e-4,
        )
        .unwrap();
        assert!((f.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn rotation_invariance() {
        let p = params();
        let fam = MechanicalFamily::at_gap(&p, FormulaMode::Corrected, 0.3).unwrap();
        let base = gaussian_qfi(|d| fam.state_at(d), 1e-6 * fam.lambda())
            .unwrap()
            .value;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let rotated =
                gaussian_qfi(|d| Ok(fam.state_at(d)?.rotated(angle)), 1e-6 * fam.lambda())
                    .unwrap()
                    .value;
            assert!((rotated / base - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn vacuum_purity_and_validation() {
        let v = GaussianState::vacuum();
        assert_eq!(v.purity(), 1.0);
        assert!(v.validate().is_ok());
        let bad = GaussianState::new(Vector2::zeros(), Matrix2::identity() * 0.4);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn near_critical_forms() {
        let p = params();
        let mut prev_ratio = f64::INFINITY;
        for k in 2..9 {
            let fam = MechanicalFamily::at_gap(&p, FormulaMode::Corrected, 10f64.powi(-k)).unwrap();
            let q = fam.apply_to(&p);
            let nc = near_critical_qfi(&q, &fam.frame, &fam.drift(), fam.means.mean_xa).unwrap();
            assert!(!nc.far_from_critical);
            let ratio = nc.form_ratio();
            assert!(ratio < prev_ratio && ratio > 4.0);
            prev_ratio = ratio;
            let bound = precision_bound(nc.tau_form).unwrap();
            let closed = near_critical_precision(&q, &fam.frame, &fam.drift(), fam.means.mean_xa);
            assert!((bound / closed - 1.0).abs() < 1e-12);
        }
        assert!((prev_ratio - 4.0).abs() < 1e-6);
    }

    #[test]
    fn near_critical_scales_with_coupling_and_time() {
        let p = params();
        let fam = MechanicalFamily::at_gap(&p, FormulaMode::Corrected, 1e-3).unwrap();
        let q = fam.apply_to(&p);
        let dm = fam.drift();
        let base = near_critical_qfi(&q, &fam.frame, &dm, fam.means.mean_xa).unwrap();
        let mut small = q;
        small.lambda *= 0.5;
        let half = near_critical_qfi(&small, &fam.frame, &dm, fam.means.mean_xa).unwrap();
        assert!((base.gap_form / half.gap_form - 4.0).abs() < 1e-12);
        let mut slow = dm.clone();
        slow.tau *= 2.0;
        let twice = near_critical_qfi(&q, &fam.frame, &slow, fam.means.mean_xa).unwrap();
        assert!((twice.tau_form / base.tau_form - 4.0).abs() < 1e-12);
    }

    #[test]
    fn near_critical_rejects_below_threshold() {
        let dm = DriftModel::from_frequencies(0.3, 1.0, -0.5);
        let p = params();
        let frame = crate::model::squeezed_frame(&p).unwrap();
        assert!(matches!(
            near_critical_qfi(&p, &frame, &dm, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bound_cases() {
        assert_eq!(precision_bound(1.0).unwrap(), 1.0);
        assert_eq!(precision_bound(4.0).unwrap(), 0.5);
        assert!(precision_bound(0.0).is_err());
        assert!(precision_bound(-1.0).is_err());
    }
}
