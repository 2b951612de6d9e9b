//! Driven-dissipative dynamics of the mechanical mode.
//!
//! After adiabatic elimination of the magnon and spin, the mechanical
//! fluctuations (δX_b, δP_b) obey a linear Langevin equation with drift
//! V = [[−κ_b, ω_m], [ω_eff, −κ_b]] and zero-temperature input noise.
//! Covariances use the vacuum = I/2 convention for q = (b + b†)/√2,
//! p = i(b† − b)/√2.
//!
//! Symbol mapping for the decay rates and frequencies that appear under
//! several names in the literature: κ_m ≡ κ_2 ≡ κ_b, ω_2 ≡ ω_m,
//! X_2 ≡ X_b, ω_Z ≡ ω_z ≡ ω_NV.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::harness::preset::{validate_hierarchy, DEFAULT_HIERARCHY_FACTOR};
use crate::model::{squeezed_frame, SqueezedFrame, SystemParameters};

/// Rescales the unit-vacuum closed-form covariance to vacuum = I/2.
/// Fixed by the λ = 0 limit, where the unit-vacuum form reduces to the identity.
pub const VACUUM_RESCALE: f64 = 0.5;

/// Which variant of the effective mechanical frequency to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormulaMode {
    /// ω_eff = 2λ² e^{2r} ⟨X_a⟩²/ω_NV − ω_m, consistent with λ_e = λ e^r on
    /// both elimination steps.
    Corrected,
    /// ω_eff = 2λ² ⟨X_a⟩²/ω_NV − ω_m, the reference form.
    StrictPaper,
}

impl FormulaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FormulaMode::Corrected => "corrected",
            FormulaMode::StrictPaper => "strict_paper",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "corrected" => Some(FormulaMode::Corrected),
            "strict_paper" => Some(FormulaMode::StrictPaper),
            _ => None,
        }
    }
}

/// Steady first moments of (X_a, P_a, X_b, P_b, σ_x, σ_y, σ_z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyMeans {
    pub mean_xa: f64,
    pub mean_pa: f64,
    pub mean_xb: f64,
    pub mean_pb: f64,
    pub mean_sigma_x: f64,
    pub mean_sigma_y: f64,
    pub mean_sigma_z: f64,
}

/// First moments plus the 2×2 mechanical covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub means: SteadyMeans,
    pub cov: Matrix2<f64>,
}

impl SteadyState {
    pub fn mechanical(&self) -> GaussianState {
        GaussianState::new(
            Vector2::new(self.means.mean_xb, self.means.mean_pb),
            self.cov,
        )
    }
}

pub fn steady_means(p: &SystemParameters) -> SteadyMeans {
    let denom = p.kappa_a * p.kappa_a + p.omega_k * p.omega_k;
    SteadyMeans {
        mean_xa: p.drive * p.omega_k / denom,
        mean_pa: p.drive * p.kappa_a / denom,
        mean_xb: 0.0,
        mean_pb: 0.0,
        mean_sigma_x: 0.0,
        mean_sigma_y: 0.0,
        mean_sigma_z: -0.5,
    }
}

/// Coefficient c in ω_eff = c λ² − ω_m.
pub fn frequency_coefficient(
    p: &SystemParameters,
    frame: &SqueezedFrame,
    means: &SteadyMeans,
    mode: FormulaMode,
) -> f64 {
    let enhancement_sq = match mode {
        FormulaMode::Corrected => (2.0 * frame.r).exp(),
        FormulaMode::StrictPaper => 1.0,
    };
    2.0 * enhancement_sq * means.mean_xa * means.mean_xa / p.omega_nv
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftModel {
    pub v: Matrix2<f64>,
    pub kappa_b: f64,
    pub omega_m: f64,
    pub omega_eff: f64,
    /// Δ = κ_b² − ω_eff ω_m.
    pub gap: f64,
    /// E_± = −κ_b ± sqrt(ω_m ω_eff); complex below threshold.
    pub eigenvalues: [Complex64; 2],
    /// Relaxation time −1/max Re E; `+inf` when not stable.
    pub tau: f64,
    pub stable: bool,
    /// Violated time-scale hierarchy links.
    pub warnings: Vec<String>,
}

impl DriftModel {
    pub fn from_frequencies(kappa_b: f64, omega_m: f64, omega_eff: f64) -> Self {
        Self::from_parts(
            kappa_b,
            omega_m,
            omega_eff,
            kappa_b * kappa_b - omega_eff * omega_m,
        )
    }

    /// Builds the drift model from a gap computed elsewhere. Near the
    /// critical point κ_b² − ω_eff ω_m cancels catastrophically, so callers
    /// that know Δ more accurately pass it in directly.
    pub fn from_parts(kappa_b: f64, omega_m: f64, omega_eff: f64, gap: f64) -> Self {
        let v = Matrix2::new(-kappa_b, omega_m, omega_eff, -kappa_b);
        let stable = kappa_b > 0.0 && gap > 0.0;
        let product = omega_m * omega_eff;
        let (eigenvalues, slowest) = if product >= 0.0 {
            let root = product.sqrt();
            // −κ + root = −Δ/(κ + root), free of cancellation.
            let upper = -gap / (kappa_b + root);
            (
                [
                    Complex64::new(upper, 0.0),
                    Complex64::new(-kappa_b - root, 0.0),
                ],
                upper,
            )
        } else {
            let root = (-product).sqrt();
            (
                [
                    Complex64::new(-kappa_b, root),
                    Complex64::new(-kappa_b, -root),
                ],
                -kappa_b,
            )
        };
        let tau = if stable {
            -1.0 / slowest
        } else {
            f64::INFINITY
        };
        DriftModel {
            v,
            kappa_b,
            omega_m,
            omega_eff,
            gap,
            eigenvalues,
            tau,
            stable,
            warnings: Vec::new(),
        }
    }

    pub fn require_stable(&self) -> Result<()> {
        if self.stable {
            Ok(())
        } else {
            Err(Error::Stability(format!(
                "Δ = κ_b² − ω_eff ω_m = {:e} is not positive",
                self.gap
            )))
        }
    }

    /// Input-noise diffusion for vacuum baths, 2κ_b · (I/2).
    pub fn diffusion(&self) -> Matrix2<f64> {
        Matrix2::identity() * self.kappa_b
    }
}

pub fn drift_model(
    p: &SystemParameters,
    frame: &SqueezedFrame,
    means: &SteadyMeans,
    mode: FormulaMode,
) -> DriftModel {
    let c = frequency_coefficient(p, frame, means, mode);
    let mut dm =
        DriftModel::from_frequencies(p.kappa_b, p.omega_m, c * p.lambda * p.lambda - p.omega_m);
    dm.warnings = validate_hierarchy(p, DEFAULT_HIERARCHY_FACTOR);
    dm
}

/// Closed-form steady covariance in the vacuum = I convention:
/// C11 = (2κ² − ωω_m + ω_m²)/(2Δ), C22 = (2κ² − ωω_m + ω²)/(2Δ),
/// C12 = κ(ω + ω_m)/(2Δ).
pub fn unit_vacuum_covariance(dm: &DriftModel) -> Result<Matrix2<f64>> {
    dm.require_stable()?;
    let k2 = dm.kappa_b * dm.kappa_b;
    // 2κ² − ω ω_m = κ² + Δ; splitting off Δ/(2Δ) keeps λ = 0 exact.
    let c11 = 0.5 + (k2 + dm.omega_m * dm.omega_m) / (2.0 * dm.gap);
    let c22 = 0.5 + (k2 + dm.omega_eff * dm.omega_eff) / (2.0 * dm.gap);
    let c12 = dm.kappa_b * (dm.omega_eff + dm.omega_m) / (2.0 * dm.gap);
    Ok(Matrix2::new(c11, c12, c12, c22))
}

/// Steady mechanical covariance in the vacuum = I/2 convention.
pub fn steady_covariance(dm: &DriftModel) -> Result<Matrix2<f64>> {
    Ok(unit_vacuum_covariance(dm)? * VACUUM_RESCALE)
}

/// Solves V C + C Vᵀ + D = 0 for symmetric C by vectorising the three
/// independent entries. Independent of the closed form above.
pub fn lyapunov_oracle(v: &Matrix2<f64>, diffusion: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let (tr, det) = (v.trace(), v.determinant());
    if !(tr < 0.0 && det > 0.0) {
        return Err(Error::Stability(format!(
            "drift has an eigenvalue with non-negative real part (tr = {tr:e}, det = {det:e})"
        )));
    }
    let (a, b, c, d) = (v[(0, 0)], v[(0, 1)], v[(1, 0)], v[(1, 1)]);
    // Unknowns (x, z, y) = (C11, C12, C22).
    let m = Matrix3::new(
        2.0 * a,
        2.0 * b,
        0.0, //
        c,
        a + d,
        b, //
        0.0,
        2.0 * c,
        2.0 * d,
    );
    let rhs = -Vector3::new(diffusion[(0, 0)], diffusion[(0, 1)], diffusion[(1, 1)]);
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Stability("singular Lyapunov system".into()))?;
    let cov = Matrix2::new(sol[0], sol[1], sol[1], sol[2]);

    let residual = v * cov + cov * v.transpose() + diffusion;
    let scale = v.abs().max() * cov.abs().max() + diffusion.abs().max();
    if residual.abs().max() > 1e-12 * scale {
        return Err(Error::Stability(format!(
            "Lyapunov residual {:e} too large",
            residual.abs().max()
        )));
    }
    Ok(cov)
}

pub fn steady_state(p: &SystemParameters, mode: FormulaMode) -> Result<(DriftModel, SteadyState)> {
    let frame = squeezed_frame(p)?;
    let means = steady_means(p);
    let dm = drift_model(p, &frame, &means, mode);
    let cov = steady_covariance(&dm)?;
    Ok((dm, SteadyState { means, cov }))
}

/// The mechanical steady state as a function of a displacement δ of λ away
/// from an operating point λ0.
///
/// Keeping δ separate from λ0 lets finite differences resolve steps far
/// below the f64 spacing of λ0, and the gap is carried as
/// Δ(δ) = Δ0 − ω_m c δ(2λ0 + δ) so it never re-forms by cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalFamily {
    pub lambda0: f64,
    pub kappa_b: f64,
    pub omega_m: f64,
    /// c in ω_eff = c λ² − ω_m.
    pub coefficient: f64,
    pub omega_eff0: f64,
    pub gap0: f64,
    pub frame: SqueezedFrame,
    pub means: SteadyMeans,
    pub mode: FormulaMode,
}

impl MechanicalFamily {
    pub fn new(p: &SystemParameters, mode: FormulaMode) -> Result<Self> {
        p.validate()?;
        let frame = squeezed_frame(p)?;
        let means = steady_means(p);
        let c = frequency_coefficient(p, &frame, &means, mode);
        let omega_eff0 = c * p.lambda * p.lambda - p.omega_m;
        Ok(MechanicalFamily {
            lambda0: p.lambda,
            kappa_b: p.kappa_b,
            omega_m: p.omega_m,
            coefficient: c,
            omega_eff0,
            gap0: p.kappa_b * p.kappa_b - omega_eff0 * p.omega_m,
            frame,
            means,
            mode,
        })
    }

    /// Places the operating point at Δ = `gap_ratio` · κ_b², solving for λ > 0.
    pub fn at_gap(p: &SystemParameters, mode: FormulaMode, gap_ratio: f64) -> Result<Self> {
        let mut fam = Self::new(p, mode)?;
        if !(fam.coefficient > 0.0) {
            return Err(Error::domain("a gap ladder needs a nonzero coherent drive"));
        }
        let k2 = p.kappa_b * p.kappa_b;
        let gap0 = gap_ratio * k2;
        let omega_eff0 = (k2 - gap0) / p.omega_m;
        let lambda_sq = (omega_eff0 + p.omega_m) / fam.coefficient;
        if !(lambda_sq > 0.0) {
            return Err(Error::domain(format!(
                "gap ratio {gap_ratio} is not reachable for any real λ"
            )));
        }
        fam.lambda0 = lambda_sq.sqrt();
        fam.frame.lambda_e = fam.lambda0 * fam.frame.r.exp();
        fam.omega_eff0 = omega_eff0;
        fam.gap0 = gap0;
        Ok(fam)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda0
    }

    /// Parameters with λ replaced by the operating point.
    pub fn apply_to(&self, p: &SystemParameters) -> SystemParameters {
        SystemParameters {
            lambda: self.lambda0,
            ..*p
        }
    }

    fn shift(&self, delta: f64) -> f64 {
        self.coefficient * delta * (2.0 * self.lambda0 + delta)
    }

    pub fn drift_at(&self, delta: f64) -> DriftModel {
        let s = self.shift(delta);
        DriftModel::from_parts(
            self.kappa_b,
            self.omega_m,
            self.omega_eff0 + s,
            self.gap0 - self.omega_m * s,
        )
    }

    pub fn drift(&self) -> DriftModel {
        self.drift_at(0.0)
    }

    /// ∂Δ/∂λ at the operating point.
    pub fn gap_slope(&self) -> f64 {
        -2.0 * self.omega_m * self.coefficient * self.lambda0
    }

    pub fn state_at(&self, delta: f64) -> Result<GaussianState> {
        let cov = steady_covariance(&self.drift_at(delta))?;
        Ok(GaussianState::new(Vector2::zeros(), cov))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
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

    #[test]
    fn undriven_means() {
        let mut p = params();
        p.drive = 0.0;
        let m = steady_means(&p);
        assert_eq!(
            (m.mean_xa, m.mean_pa, m.mean_xb, m.mean_pb),
            (0.0, 0.0, 0.0, 0.0)
        );
        assert_eq!(
            (m.mean_sigma_x, m.mean_sigma_y, m.mean_sigma_z),
            (0.0, 0.0, -0.5)
        );
    }

    #[test]
    fn resonant_damping_means() {
        let mut p = params();
        p.kappa_a = p.omega_k;
        let m = steady_means(&p);
        assert!((m.mean_xa - p.drive / (2.0 * p.omega_k)).abs() < 1e-15);
        assert!((m.mean_pa - p.drive / (2.0 * p.omega_k)).abs() < 1e-15);
    }

    #[test]
    fn mean_amplitude_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut p = params();
            p.drive = rng.gen_range(0.1..10.0);
            p.kappa_a = rng.gen_range(0.1..10.0);
            p.omega_k = rng.gen_range(0.1..10.0);
            let m = steady_means(&p);
            let lhs = m.mean_xa.powi(2) + m.mean_pa.powi(2);
            let rhs = p.drive.powi(2) / (p.kappa_a.powi(2) + p.omega_k.powi(2));
            assert!((lhs / rhs - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn decoupled_drift() {
        let mut p = params();
        p.lambda = 0.0;
        let (dm, st) = steady_state(&p, FormulaMode::Corrected).unwrap();
        assert_eq!(dm.omega_eff, -p.omega_m);
        assert!(dm.stable);
        assert!((dm.gap - (p.kappa_b.powi(2) + p.omega_m.powi(2))).abs() < 1e-15);
        assert_eq!(dm.eigenvalues[0], Complex64::new(-p.kappa_b, p.omega_m));
        assert_eq!(dm.tau, 1.0 / p.kappa_b);
        assert_eq!(st.cov, Matrix2::new(0.5, 0.0, 0.0, 0.5));
    }

    #[test]
    fn unit_vacuum_form_is_identity_without_coupling() {
        let dm = DriftModel::from_frequencies(0.7, 2.3, -2.3);
        let c = unit_vacuum_covariance(&dm).unwrap();
        assert_eq!(c, Matrix2::identity());
    }

    #[test]
    fn zero_effective_frequency() {
        let dm = DriftModel::from_frequencies(0.4, 1.0, 0.0);
        assert!((dm.tau - 1.0 / 0.4).abs() < 1e-15);
    }

    #[test]
    fn tau_diverges_at_threshold() {
        let p = params();
        let mut last = 0.0;
        for k in 0..10 {
            let fam = MechanicalFamily::at_gap(&p, FormulaMode::Corrected, 10f64.powi(-k)).unwrap();
            let dm = fam.drift();
            assert!(dm.stable);
            assert!(dm.tau > last);
            last = dm.tau;
        }
        assert!(last > 1e8);
        let dm = DriftModel::from_frequencies(1.0, 1.0, 1.0);
        assert!(!dm.stable);
        assert_eq!(dm.tau, f64::INFINITY);
    }

    #[test]
    fn eigenvalues_and_tau_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let k = rng.gen_range(0.1..2.0);
            let wm = rng.gen_range(0.1..3.0);
            let w = rng.gen_range(-3.0..0.999 * k * k / wm);
            let dm = DriftModel::from_frequencies(k, wm, w);
            assert!(dm.stable);
            let tr = dm.v.trace();
            let det = dm.v.determinant();
            let disc = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
            for e in dm.eigenvalues {
                let a = Complex64::new(tr / 2.0, 0.0) + disc;
                let b = Complex64::new(tr / 2.0, 0.0) - disc;
                let d = (e - a).norm().min((e - b).norm());
                assert!(d < 1e-12 * (1.0 + det.abs().sqrt()), "{e} vs {a}, {b}");
            }
            if w > 0.0 {
                assert!((dm.tau * (k - (wm * w).sqrt()) - 1.0).abs() < 1e-9);
            } else {
                assert_eq!(dm.tau, 1.0 / k);
            }
        }
    }

    #[test]
    fn hierarchy_warnings_attached() {
        let p = params();
        let frame = squeezed_frame(&p).unwrap();
        let dm = drift_model(&p, &frame, &steady_means(&p), FormulaMode::Corrected);
        assert!(!dm.warnings.is_empty());
    }

    #[test]
    fn isotropic_damping_reaches_vacuum() {
        let k = 0.8;
        let v = Matrix2::identity() * -k;
        let d = Matrix2::identity() * k;
        let c = lyapunov_oracle(&v, &d).unwrap();
        assert!((c - Matrix2::identity() * 0.5).abs().max() < 1e-15);
        let dm = DriftModel::from_frequencies(0.3, 1.7, -1.7);
        let c = lyapunov_oracle(&dm.v, &dm.diffusion()).unwrap();
        assert!((c - Matrix2::identity() * 0.5).abs().max() < 1e-15);
    }

    #[test]
    fn oracle_rejects_unstable_drift() {
        let dm = DriftModel::from_frequencies(0.1, 1.0, 1.0);
        assert!(matches!(
            lyapunov_oracle(&dm.v, &dm.diffusion()),
            Err(Error::Stability(_))
        ));
        assert!(matches!(steady_covariance(&dm), Err(Error::Stability(_))));
    }

    #[test]
    fn covariance_matches_oracle_and_uncertainty() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let k = rng.gen_range(0.05..2.0);
            let wm = rng.gen_range(0.2..3.0);
            let w = rng.gen_range(-3.0..0.9 * k * k / wm);
            let dm = DriftModel::from_frequencies(k, wm, w);
            let closed = steady_covariance(&dm).unwrap();
            let oracle = lyapunov_oracle(&dm.v, &dm.diffusion()).unwrap();
            assert!((closed - oracle).abs().max() < 1e-10);
            assert!(closed.determinant() >= 0.25 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn covariance_diverges_as_inverse_gap() {
        let p = params();
        let mut prev: Option<(f64, Matrix2<f64>)> = None;
        for k in 2..8 {
            let fam = MechanicalFamily::at_gap(&p, FormulaMode::Corrected, 10f64.powi(-k)).unwrap();
            let c = steady_covariance(&fam.drift()).unwrap();
            if let Some((g, c_prev)) = prev {
                let ratio = g / fam.gap0;
                for idx in [(0, 0), (0, 1), (1, 1)] {
                    let growth = c[idx] / c_prev[idx];
                    assert!(
                        (growth / ratio - 1.0).abs() < 0.05,
                        "{idx:?}: {growth} vs {ratio}"
                    );
                }
            }
            prev = Some((fam.gap0, c));
        }
    }

    #[test]
    fn cross_correlation_vanishes_without_damping() {
        let mut last = f64::INFINITY;
        for k in 1..8 {
            let kappa = 10f64.powi(-k);
            let dm = DriftModel::from_frequencies(kappa, 1.0, -0.5);
            let c12 = steady_covariance(&dm).unwrap()[(0, 1)].abs();
            assert!(c12 < last);
            last = c12;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn family_matches_direct_evaluation() {
        let p = params();
        let fam = MechanicalFamily::new(&p, FormulaMode::Corrected).unwrap();
        let (dm, st) = steady_state(&p, FormulaMode::Corrected).unwrap();
        assert_eq!(fam.drift().omega_eff, dm.omega_eff);
        assert!((fam.state_at(0.0).unwrap().cov - st.cov).abs().max() < 1e-14);
        let h = 1e-3;
        let mut q = p;
        q.lambda += h;
        let (dm_h, _) = steady_state(&q, FormulaMode::Corrected).unwrap();
        assert!((fam.drift_at(h).gap - dm_h.gap).abs() < 1e-12);
    }

    #[test]
    fn strict_mode_drops_enhancement() {
        let p = params();
        let frame = squeezed_frame(&p).unwrap();
        let m = steady_means(&p);
        let c = frequency_coefficient(&p, &frame, &m, FormulaMode::Corrected);
        let s = frequency_coefficient(&p, &frame, &m, FormulaMode::StrictPaper);
        assert!((c / s - (2.0 * frame.r).exp()).abs() < 1e-14);
        assert_eq!(
            FormulaMode::parse("strict_paper"),
            Some(FormulaMode::StrictPaper)
        );
        assert_eq!(FormulaMode::parse("bogus"), None);
    }
}
