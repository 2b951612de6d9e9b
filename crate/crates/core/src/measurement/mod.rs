//! Measurement-specific precision on the mechanical steady state:
//! error propagation, intensity and homodyne detection, and the
//! measurement-noise susceptibility.
//!
//! All families are passed as `state_fn(δ)`, the state at λ0 + δ.

pub mod moments;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::numdiff::{refine, Refined, StepPolicy};
use crate::open::DriftModel;

pub use moments::{ModeMoments, MomentEngine, NormalPoly, DEFAULT_MAX_ORDER};

/// |∂⟨O⟩/∂λ| below this is treated as carrying no information.
pub const NULL_SLOPE_TOLERANCE: f64 = 1e-12;

/// Noise admixtures used to extrapolate ε → 0, before scaling.
pub const EPSILON_LADDER: [f64; 3] = [1e-3, 1e-4, 1e-5];

/// Relative spread between consecutive extrapolants that triggers
/// `ConvergenceError`.
pub const CONVERGENCE_SPREAD: f64 = 0.05;

/// Absolute scale below which susceptibilities are compared absolutely.
pub const SUSCEPTIBILITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementOp {
    /// b†b
    Intensity,
    /// e^{iθ} b + e^{−iθ} b†
    Quadrature(f64),
    /// b†ʲ + bʲ
    CoherentDrive(u32),
    /// ζ (b†b)²
    Anharmonic(f64),
    /// (1 − ε) base + ε noise
    Mixture {
        base: Box<MeasurementOp>,
        noise: Box<MeasurementOp>,
        epsilon: f64,
    },
}

impl MeasurementOp {
    pub fn mixture(base: MeasurementOp, noise: MeasurementOp, epsilon: f64) -> Self {
        MeasurementOp::Mixture {
            base: Box::new(base),
            noise: Box::new(noise),
            epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasurementOp::CoherentDrive(0) => {
                Err(Error::domain("coherent drive order j must be ≥ 1"))
            }
            MeasurementOp::Mixture {
                base,
                noise,
                epsilon,
            } => {
                if !(0.0..1.0).contains(epsilon) {
                    return Err(Error::domain(format!(
                        "mixture weight ε = {epsilon} outside [0, 1)"
                    )));
                }
                base.validate()?;
                noise.validate()
            }
            _ => Ok(()),
        }
    }

    pub fn to_poly(&self) -> NormalPoly {
        let one = Complex64::new(1.0, 0.0);
        match self {
            MeasurementOp::Intensity => NormalPoly::number(),
            MeasurementOp::Quadrature(theta) => {
                let phase = Complex64::from_polar(1.0, *theta);
                NormalPoly::monomial(0, 1, phase).add(&NormalPoly::monomial(1, 0, phase.conj()))
            }
            MeasurementOp::CoherentDrive(j) => {
                NormalPoly::monomial(*j, 0, one).add(&NormalPoly::monomial(0, *j, one))
            }
            MeasurementOp::Anharmonic(zeta) => {
                let n = NormalPoly::number();
                n.mul(&n).scale(Complex64::new(*zeta, 0.0))
            }
            MeasurementOp::Mixture {
                base,
                noise,
                epsilon,
            } => {
                // P + ε(N − P): identical operands cancel exactly.
                let p = base.to_poly();
                p.add(&noise.to_poly().sub(&p).scale(Complex64::new(*epsilon, 0.0)))
            }
        }
    }
}

/// Text form: `intensity`, `quadrature:<θ>`, `drive:<j>`, `anharmonic:<ζ>`.
impl std::str::FromStr for MeasurementOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.trim().split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let number = |what: &str| -> Result<f64> {
            let text = arg.ok_or_else(|| Error::domain(format!("`{kind}` needs {what}")))?;
            text.parse()
                .map_err(|_| Error::domain(format!("cannot read {what} from `{text}`")))
        };
        let op = match kind {
            "intensity" if arg.is_none() => MeasurementOp::Intensity,
            "quadrature" => MeasurementOp::Quadrature(number("an angle")?),
            "anharmonic" => MeasurementOp::Anharmonic(number("a strength")?),
            "drive" => {
                let text = arg.ok_or_else(|| Error::domain("`drive` needs an order"))?;
                let j = text
                    .parse()
                    .map_err(|_| Error::domain(format!("cannot read an order from `{text}`")))?;
                MeasurementOp::CoherentDrive(j)
            }
            _ => return Err(Error::domain(format!("unknown measurement `{s}`"))),
        };
        op.validate()?;
        Ok(op)
    }
}

fn expect_poly(poly: &NormalPoly, st: &GaussianState) -> Result<f64> {
    Ok(MomentEngine::new(*st).expect(poly)?.re)
}

/// ⟨O⟩ in a Gaussian state, exact up to the engine's order limit.
pub fn expectation(op: &MeasurementOp, st: &GaussianState) -> Result<f64> {
    op.validate()?;
    expect_poly(&op.to_poly(), st)
}

/// (⟨O⟩, ⟨O²⟩ − ⟨O⟩²)
pub fn mean_and_variance(op: &MeasurementOp, st: &GaussianState) -> Result<(f64, f64)> {
    op.validate()?;
    let poly = op.to_poly();
    let engine = MomentEngine::new(*st);
    let mean = engine.expect(&poly)?.re;
    let second = engine.expect(&poly.mul(&poly))?.re;
    Ok((mean, second - mean * mean))
}

/// Symmetrised covariance Re⟨AB⟩ − ⟨A⟩⟨B⟩ of two Hermitian operators.
pub fn covariance(a: &MeasurementOp, b: &MeasurementOp, st: &GaussianState) -> Result<f64> {
    let (pa, pb) = (a.to_poly(), b.to_poly());
    let engine = MomentEngine::new(*st);
    let ab = engine.expect(&pa.mul(&pb))?.re;
    Ok(ab - engine.expect(&pa)?.re * engine.expect(&pb)?.re)
}

fn refined_slope<F>(poly: &NormalPoly, state_fn: &F, step: f64) -> Result<Refined>
where
    F: Fn(f64) -> Result<GaussianState>,
{
    refine(StepPolicy::new(step), |h| {
        let plus = expect_poly(poly, &state_fn(h)?)?;
        let minus = expect_poly(poly, &state_fn(-h)?)?;
        Ok((plus - minus) / (2.0 * h))
    })
}

fn slope<F>(poly: &NormalPoly, state_fn: &F, step: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<GaussianState>,
{
    Ok(refined_slope(poly, state_fn, step)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPropagation {
    /// δλ = ΔO/|∂⟨O⟩/∂λ|, `+inf` when the slope vanishes.
    pub precision: f64,
    pub mean: f64,
    pub variance: f64,
    pub slope: f64,
    pub null_sensitivity: bool,
}

/// Precision of estimating λ from the sample mean of O.
pub fn error_propagation<F>(op: &MeasurementOp, state_fn: F, step: f64) -> Result<ErrorPropagation>
where
    F: Fn(f64) -> Result<GaussianState>,
{
    op.validate()?;
    let poly = op.to_poly();
    let center = state_fn(0.0)?;
    let engine = MomentEngine::new(center);
    let mean = engine.expect(&poly)?.re;
    let variance = engine.expect(&poly.mul(&poly))?.re - mean * mean;
    let slope = slope(&poly, &state_fn, step)?;
    let null_sensitivity = slope.abs() < NULL_SLOPE_TOLERANCE;
    let precision = if null_sensitivity {
        f64::INFINITY
    } else {
        variance.max(0.0).sqrt() / slope.abs()
    };
    Ok(ErrorPropagation {
        precision,
        mean,
        variance,
        slope,
        null_sensitivity,
    })
}

/// Intensity precision in the reference closed form,
/// sqrt((C11 + C22)² − 1)/|∂(C11 + C22)/∂λ|, evaluated with the vacuum = I/2
/// covariance so that the vacuum has zero spread. This equals the precision
/// of a thermal state with the same ⟨b†b⟩; it is reported alongside the exact
/// value rather than assumed equal to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityClosedForm {
    pub closed_form: f64,
    pub exact: f64,
}

impl IntensityClosedForm {
    pub fn discrepancy(&self) -> f64 {
        self.closed_form / self.exact
    }
}

pub fn intensity_precision_closed_form<F>(state_fn: F, step: f64) -> Result<IntensityClosedForm>
where
    F: Fn(f64) -> Result<GaussianState>,
{
    let trace = |st: &GaussianState| st.cov[(0, 0)] + st.cov[(1, 1)];
    let center = trace(&state_fn(0.0)?);
    let refined = refine(StepPolicy::new(step), |h| {
        Ok((trace(&state_fn(h)?) - trace(&state_fn(-h)?)) / (2.0 * h))
    })?;
    let closed_form = if refined.value == 0.0 {
        f64::INFINITY
    } else {
        (center * center - 1.0).max(0.0).sqrt() / refined.value.abs()
    };
    let exact = error_propagation(&MeasurementOp::Intensity, &state_fn, step)?.precision;
    Ok(IntensityClosedForm { closed_form, exact })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Susceptibility {
    /// Extrapolated χ.
    pub value: f64,
    /// (ε, (1/ε)[1 − δ²λ_P/δ²λ_ε]) for each rung.
    pub ladder: Vec<(f64, f64)>,
    /// |difference| between the first- and second-order extrapolants.
    pub spread: f64,
    /// Absolute uncertainty left by cancellation between Cov(P, N)/Var P and
    /// ∂⟨N⟩/∂⟨P⟩, from rounding and the finite-difference slopes.
    pub resolution: f64,
    /// First-order expansion 2[Cov(P, N)/Var P − ∂⟨N⟩/∂⟨P⟩] for comparison.
    pub linearized: f64,
    /// Cov(P, N) at the operating point; nonzero means the noise variance
    /// does not simply add to the perfect-measurement variance.
    pub cross_covariance: f64,
}

impl Susceptibility {
    /// Absolute tolerance implied by the extrapolation.
    pub fn tolerance(&self) -> f64 {
        self.spread.max(self.resolution).max(SUSCEPTIBILITY_FLOOR)
    }
}

/// χ[P, N, λ] = lim_{ε→0} (1/ε)[1 − δ²λ|_P / δ²λ|_{(1−ε)P + εN}].
///
/// The mixture is P + εN′ with N′ = N − P. Its variance is expanded
/// bilinearly, Var P + 2ε Cov(P, N′) + ε² Var N′, with every term computed
/// exactly, and its slope is ∂⟨P⟩ + ε ∂⟨N′⟩. This keeps 1 − δ²λ_P/δ²λ_ε
/// free of cancellation even when N fluctuates far more than P. The limit
/// is then extrapolated from the ladder [`EPSILON_LADDER`], scaled so that
/// the O(ε) corrections stay small against Var P; the limit does not
/// depend on the scaling.
pub fn noise_susceptibility<F>(
    perfect: &MeasurementOp,
    noise: &MeasurementOp,
    state_fn: F,
    step: f64,
) -> Result<Susceptibility>
where
    F: Fn(f64) -> Result<GaussianState>,
{
    perfect.validate()?;
    noise.validate()?;
    let center = state_fn(0.0)?;
    let engine = MomentEngine::new(center);
    let pp = perfect.to_poly();
    let shift = noise.to_poly().sub(&pp);
    let covariance = |a: &NormalPoly, b: &NormalPoly| -> Result<f64> {
        Ok(engine.expect(&a.mul(b))?.re - engine.expect(a)?.re * engine.expect(b)?.re)
    };

    let var_p = covariance(&pp, &pp)?;
    let slope_p = refined_slope(&pp, &state_fn, step)?;
    let d_p = slope_p.value;
    if !(var_p > 0.0 && d_p != 0.0 && (var_p / (d_p * d_p)).is_finite()) {
        return Err(Error::domain(format!(
            "perfect measurement has no finite precision (Var = {var_p:e}, slope = {d_p:e})"
        )));
    }
    let cross = covariance(&pp, &shift)?;
    let var_shift = covariance(&shift, &shift)?;
    let (d_shift, shift_error) = if shift.is_zero() {
        (0.0, 0.0)
    } else {
        let refined = refined_slope(&shift, &state_fn, step)?;
        (refined.value, refined.disagreement)
    };
    let r = d_shift / d_p;
    let first = 2.0 * (cross - var_p * r);
    let rounding = 64.0 * f64::EPSILON;
    let slope_error = slope_p.disagreement + shift_error;
    let resolution =
        2.0 * (cross.abs() * rounding + (var_p * r).abs() * (rounding + slope_error)) / var_p;
    let second = var_shift - var_p * r * r;
    let linearized = first / var_p;

    // Keep every ε-correction in numerator and denominator a small fraction
    // of the ε = 0 terms.
    let mut scale: f64 = 1.0;
    for size in [second.abs(), 2.0 * cross.abs(), (var_p * var_shift).sqrt()] {
        if size > 0.0 {
            scale = scale.min(var_p / size);
        }
    }
    if d_shift != 0.0 {
        scale = scale.min((d_p / d_shift).abs());
    }

    let ladder: Vec<(f64, f64)> = EPSILON_LADDER
        .iter()
        .map(|e| {
            let eps = e * scale;
            let var_mixed = var_p + 2.0 * eps * cross + eps * eps * var_shift;
            (eps, (first + eps * second) / var_mixed)
        })
        .collect();
    // g(ε) = χ + aε + bε² + …; consecutive rungs differ by a factor 10.
    let r1 = (10.0 * ladder[1].1 - ladder[0].1) / 9.0;
    let r2 = (10.0 * ladder[2].1 - ladder[1].1) / 9.0;
    let value = (100.0 * r2 - r1) / 99.0;
    let spread = (value - r2).abs();
    let reference = value.abs().max(SUSCEPTIBILITY_FLOOR);
    if spread / reference > CONVERGENCE_SPREAD {
        return Err(Error::Convergence(format!(
            "extrapolants {r2:e} and {value:e} differ by more than {CONVERGENCE_SPREAD}"
        )));
    }
    Ok(Susceptibility {
        value,
        ladder,
        spread,
        resolution,
        linearized,
        cross_covariance: cross + var_p,
    })
}

/// Exact χ[b†b, ζ(b†b)²] for a zero-mean Gaussian family.
///
/// With T = (C11 + C22)/2 = ⟨b†b⟩ + 1/2 and D = det C, Isserlis gives
/// χ = 2ζ[T(1/2 − 2D)/(2T² − D − 1/4) + D′/T′]. The O(⟨b†b⟩) pieces of the
/// general expression cancel identically, which is what makes this form
/// usable where ⟨b†b⟩ is large; [`noise_susceptibility`] is its generic
/// counterpart.
pub fn intensity_anharmonic_susceptibility<F>(zeta: f64, state_fn: F, step: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<GaussianState>,
{
    let center = state_fn(0.0)?;
    if center.mean != nalgebra::Vector2::zeros() {
        return Err(Error::domain(
            "the anharmonic closed form assumes a zero-mean state",
        ));
    }
    let half_trace = |st: &GaussianState| 0.5 * (st.cov[(0, 0)] + st.cov[(1, 1)]);
    let t = half_trace(&center);
    let d = center.cov.determinant();
    let var_n = 2.0 * t * t - d - 0.25;
    if !(var_n > 0.0) {
        return Err(Error::domain("b†b has no fluctuations in this state"));
    }
    let dt = refine(StepPolicy::new(step), |h| {
        Ok((half_trace(&state_fn(h)?) - half_trace(&state_fn(-h)?)) / (2.0 * h))
    })?
    .value;
    if dt == 0.0 {
        return Err(Error::domain("∂⟨b†b⟩/∂λ vanishes"));
    }
    let dd = refine(StepPolicy::new(step), |h| {
        Ok((state_fn(h)?.cov.determinant() - state_fn(-h)?.cov.determinant()) / (2.0 * h))
    })?
    .value;
    Ok(2.0 * zeta * (t * (0.5 - 2.0 * d) / var_n + dd / dt))
}

/// [`intensity_anharmonic_susceptibility`] evaluated on the steady state of
/// a drift model, for any parameter that enters only through ω_eff:
/// χ = 2ζΔω_m²/(Δ² − 2Δκ_b² + 4Δω_m² + (κ_b² + ω_m²)²).
/// It vanishes linearly as Δ → 0⁺.
pub fn steady_anharmonic_susceptibility(zeta: f64, dm: &DriftModel) -> Result<f64> {
    dm.require_stable()?;
    let (k2, w2, g) = (dm.kappa_b * dm.kappa_b, dm.omega_m * dm.omega_m, dm.gap);
    let denom = g * g - 2.0 * g * k2 + 4.0 * g * w2 + (k2 + w2) * (k2 + w2);
    Ok(2.0 * zeta * g * w2 / denom)
}

/// Closed form for anharmonic noise ζ(b†b)² on an intensity measurement,
/// χ = ζ(2 + 8⟨n⟩ − (2⟨n⟩³ + 2⟨n⟩²)/(∂⟨n⟩/∂λ)), the reference closed form.
pub fn anharmonic_susceptibility_closed_form(
    zeta: f64,
    st: &GaussianState,
    dn_dlambda: f64,
) -> Result<f64> {
    if dn_dlambda == 0.0 {
        return Err(Error::domain("∂⟨b†b⟩/∂λ vanishes"));
    }
    let n = expectation(&MeasurementOp::Intensity, st)?;
    Ok(zeta * (2.0 + 8.0 * n - (2.0 * n.powi(3) + 2.0 * n * n) / dn_dlambda))
}

/// A linear mode operator u b + v b†.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOp {
    pub b: Complex64,
    pub bdag: Complex64,
}

impl LinearOp {
    pub fn new(b: Complex64, bdag: Complex64) -> Self {
        LinearOp { b, bdag }
    }

    /// e^{iθ} b + e^{−iθ} b†
    pub fn quadrature(theta: f64) -> Self {
        let phase = Complex64::from_polar(1.0, theta);
        LinearOp::new(phase, phase.conj())
    }

    pub fn to_poly(&self) -> NormalPoly {
        NormalPoly::monomial(0, 1, self.b).add(&NormalPoly::monomial(1, 0, self.bdag))
    }
}

fn ordered_product(ops: &[LinearOp]) -> NormalPoly {
    ops.iter()
        .fold(NormalPoly::identity(), |acc, op| acc.mul(&op.to_poly()))
}

/// Exact ⟨A B C …⟩ for linear operators, preserving operator order.
pub fn exact_moment(ops: &[LinearOp], st: &GaussianState) -> Result<Complex64> {
    MomentEngine::with_max_order(*st, ops.len().max(DEFAULT_MAX_ORDER))
        .expect(&ordered_product(ops))
}

/// Third- and fourth-order moments from first and second moments,
/// ⟨ABC⟩ ≈ ⟨AB⟩⟨C⟩ + ⟨A⟩⟨BC⟩ + ⟨AC⟩⟨B⟩ − 2⟨A⟩⟨B⟩⟨C⟩ and
/// ⟨ABCD⟩ ≈ ⟨AB⟩⟨CD⟩ + ⟨AD⟩⟨BC⟩ + ⟨AC⟩⟨BD⟩ − 2⟨A⟩⟨B⟩⟨C⟩⟨D⟩.
pub fn decoupled_moment(ops: &[LinearOp], st: &GaussianState) -> Result<Complex64> {
    let m1 = |i: usize| exact_moment(&ops[i..=i], st);
    let m2 = |i: usize, j: usize| exact_moment(&[ops[i], ops[j]], st);
    match ops.len() {
        3 => Ok(m2(0, 1)? * m1(2)? + m1(0)? * m2(1, 2)? + m2(0, 2)? * m1(1)?
            - m1(0)? * m1(1)? * m1(2)? * 2.0),
        4 => Ok(
            m2(0, 1)? * m2(2, 3)? + m2(0, 3)? * m2(1, 2)? + m2(0, 2)? * m2(1, 3)?
                - m1(0)? * m1(1)? * m1(2)? * m1(3)? * 2.0,
        ),
        k => Err(Error::Arity(k)),
    }
}

/// |exact − decoupled| relative to max(1, |exact|).
pub fn decoupling_residual(ops: &[LinearOp], st: &GaussianState) -> Result<f64> {
    let approx = decoupled_moment(ops, st)?;
    let exact = exact_moment(ops, st)?;
    Ok((exact - approx).norm() / exact.norm().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_operator_text() {
        assert_eq!(
            "intensity".parse::<MeasurementOp>().unwrap(),
            MeasurementOp::Intensity
        );
        assert_eq!(
            "quadrature:0.5".parse::<MeasurementOp>().unwrap(),
            MeasurementOp::Quadrature(0.5)
        );
        assert_eq!(
            "drive:3".parse::<MeasurementOp>().unwrap(),
            MeasurementOp::CoherentDrive(3)
        );
        assert_eq!(
            " anharmonic : 2 ".parse::<MeasurementOp>().unwrap(),
            MeasurementOp::Anharmonic(2.0)
        );
        for bad in ["drive:0", "drive", "quadrature:x", "intensity:1", "parity"] {
            assert!(bad.parse::<MeasurementOp>().is_err(), "{bad}");
        }
    }
    use nalgebra::{Matrix2, Vector2};

    fn zero_mean(c11: f64, c12: f64, c22: f64) -> GaussianState {
        GaussianState::new(Vector2::zeros(), Matrix2::new(c11, c12, c12, c22))
    }

    /// A λ-dependent zero-mean family whose spread grows with λ.
    fn family(lambda0: f64) -> impl Fn(f64) -> Result<GaussianState> {
        move |d: f64| {
            let l = lambda0 + d;
            Ok(zero_mean(0.5 + l * l, 0.3 * l, 0.5 + 0.2 * l * l))
        }
    }

    #[test]
    fn vacuum_intensity_zero() {
        assert_eq!(
            expectation(&MeasurementOp::Intensity, &GaussianState::vacuum()).unwrap(),
            0.0
        );
    }

    #[test]
    fn zero_mean_quadrature_is_zero() {
        let st = zero_mean(2.0, 0.7, 1.1);
        for k in 0..16 {
            let theta = k as f64 * std::f64::consts::TAU / 16.0;
            assert_eq!(
                expectation(&MeasurementOp::Quadrature(theta), &st).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn zero_mean_number_formula() {
        let st = zero_mean(2.0, 0.7, 1.1);
        let n = expectation(&MeasurementOp::Intensity, &st).unwrap();
        assert!((n - ((2.0 + 1.1) / 2.0 - 0.5)).abs() < 1e-15);
        let (_, var) = mean_and_variance(&MeasurementOp::Intensity, &st).unwrap();
        let expected = (2.0f64.powi(2) + 1.1f64.powi(2) + 2.0 * 0.7f64.powi(2)) / 2.0 - 0.25;
        assert!((var - expected).abs() < 1e-13);
    }

    #[test]
    fn quadrature_has_null_sensitivity() {
        let ep = error_propagation(&MeasurementOp::Quadrature(0.4), family(1.0), 1e-4).unwrap();
        assert!(ep.null_sensitivity);
        assert_eq!(ep.precision, f64::INFINITY);
    }

    #[test]
    fn intensity_precision_finite() {
        let ep = error_propagation(&MeasurementOp::Intensity, family(1.0), 1e-4).unwrap();
        assert!(!ep.null_sensitivity);
        // ⟨n⟩ = 0.6 λ², slope 1.2 at λ = 1.
        assert!((ep.slope - 1.2).abs() < 1e-9);
        assert!((ep.precision - ep.variance.sqrt() / 1.2).abs() < 1e-9);
    }

    #[test]
    fn closed_form_flat_family_is_infinite() {
        let st = zero_mean(1.5, 0.2, 0.8);
        let r = intensity_precision_closed_form(|_| Ok(st), 1e-3).unwrap();
        assert_eq!(r.closed_form, f64::INFINITY);
    }

    #[test]
    fn closed_form_is_thermal_precision() {
        // Isotropic family: the reference variance is exact for thermal states.
        let fam = |d: f64| Ok(zero_mean(1.0 + d, 0.0, 1.0 + d));
        let r = intensity_precision_closed_form(fam, 1e-4).unwrap();
        assert!((r.discrepancy() - 1.0).abs() < 1e-8);
        // An anisotropic one differs.
        let r = intensity_precision_closed_form(family(1.0), 1e-4).unwrap();
        assert!((r.discrepancy() - 1.0).abs() > 1e-3);
    }

    #[test]
    fn identical_noise_gives_zero() {
        let s = noise_susceptibility(
            &MeasurementOp::Intensity,
            &MeasurementOp::Intensity,
            family(1.0),
            1e-4,
        )
        .unwrap();
        assert_eq!(s.value, 0.0);
        assert!(s.ladder.iter().all(|&(_, g)| g == 0.0));
    }

    #[test]
    fn odd_coherent_noise_gives_zero() {
        for j in [1, 3] {
            let s = noise_susceptibility(
                &MeasurementOp::Intensity,
                &MeasurementOp::CoherentDrive(j),
                family(1.0),
                1e-4,
            )
            .unwrap();
            assert!(s.value.abs() < 1e-9, "j = {j}: {}", s.value);
            assert_eq!(s.cross_covariance, 0.0);
        }
    }

    #[test]
    fn ladder_matches_linearization() {
        let s = noise_susceptibility(
            &MeasurementOp::Intensity,
            &MeasurementOp::Anharmonic(0.1),
            family(1.0),
            1e-4,
        )
        .unwrap();
        assert!((s.value - s.linearized).abs() < 1e-5 * s.linearized.abs().max(1.0));
        let s2 = noise_susceptibility(
            &MeasurementOp::Intensity,
            &MeasurementOp::CoherentDrive(2),
            family(1.0),
            1e-4,
        )
        .unwrap();
        assert!((s2.value - s2.linearized).abs() < 1e-5 * s2.linearized.abs().max(1.0));
    }

    #[test]
    fn stable_anharmonic_form_matches_ladder() {
        for lambda0 in [0.5, 1.0, 2.0] {
            let s = noise_susceptibility(
                &MeasurementOp::Intensity,
                &MeasurementOp::Anharmonic(0.1),
                family(lambda0),
                1e-4,
            )
            .unwrap();
            let stable = intensity_anharmonic_susceptibility(0.1, family(lambda0), 1e-4).unwrap();
            assert!(
                (s.value - stable).abs() < 1e-6 * stable.abs().max(1.0),
                "{} vs {stable}",
                s.value
            );
        }
    }

    #[test]
    fn steady_anharmonic_form_matches_numerics() {
        use crate::open::MechanicalFamily;
        let p = crate::model::SystemParameters {
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
        };
        for ratio in [3.0, 1.0, 0.1, 1e-2] {
            let fam =
                MechanicalFamily::at_gap(&p, crate::open::FormulaMode::Corrected, ratio).unwrap();
            let closed = steady_anharmonic_susceptibility(0.7, &fam.drift()).unwrap();
            let step = 1e-4 * fam.lambda();
            let numeric =
                intensity_anharmonic_susceptibility(0.7, |d| fam.state_at(d), step).unwrap();
            assert!(
                (numeric - closed).abs() < 1e-6 * closed.abs(),
                "{numeric} vs {closed}"
            );
        }
    }

    #[test]
    fn anharmonic_closed_form_cases() {
        let st = zero_mean(1.3, 0.1, 0.9);
        assert_eq!(
            anharmonic_susceptibility_closed_form(0.0, &st, 2.0).unwrap(),
            0.0
        );
        let vac = GaussianState::vacuum();
        for d in [0.5, -3.0, 1e4] {
            assert!(
                (anharmonic_susceptibility_closed_form(0.3, &vac, d).unwrap() - 0.6).abs() < 1e-15
            );
        }
        assert!(anharmonic_susceptibility_closed_form(0.3, &vac, 0.0).is_err());
    }

    #[test]
    fn decoupling_relations() {
        let st = zero_mean(1.4, 0.3, 0.8);
        let ops = [
            LinearOp::quadrature(0.1),
            LinearOp::quadrature(1.2),
            LinearOp::new(Complex64::new(0.5, 0.2), Complex64::new(-0.3, 0.1)),
            LinearOp::quadrature(2.5),
        ];
        assert_eq!(
            decoupled_moment(&ops[..3], &st).unwrap(),
            Complex64::new(0.0, 0.0)
        );
        let exact = exact_moment(&ops, &st).unwrap();
        let approx = decoupled_moment(&ops, &st).unwrap();
        assert!((exact - approx).norm() < 1e-13 * exact.norm().max(1.0));
        assert!(matches!(
            decoupled_moment(&ops[..2], &st),
            Err(Error::Arity(2))
        ));

        // With means the relations are still Isserlis, written in raw moments.
        let displaced = GaussianState::new(Vector2::new(0.8, -0.4), st.cov);
        let residual = decoupling_residual(&ops, &displaced).unwrap();
        assert!(residual < 1e-13, "{residual}");
        assert!(decoupling_residual(&ops[1..], &displaced).unwrap() < 1e-13);
    }

    #[test]
    fn mixture_validation() {
        let bad = MeasurementOp::mixture(MeasurementOp::Intensity, MeasurementOp::Intensity, 1.0);
        assert!(expectation(&bad, &GaussianState::vacuum()).is_err());
        assert!(expectation(&MeasurementOp::CoherentDrive(0), &GaussianState::vacuum()).is_err());
    }
}
