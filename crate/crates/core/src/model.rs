//! Physical parameters of the spin-magnon-mechanical hybrid, the squeezed
//! mechanical frame, and normal/superradiant phase classification.
//!
//! Every angular frequency and rate is stored in rad/s. Conversion from
//! ordinary frequencies happens at the CLI boundary.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default half-width of the critical band, measured on `|1 - 4Λ²/(ω_NV ω_K)|`.
pub const DEFAULT_CRITICAL_TOLERANCE: f64 = 1e-10;

/// One instance of the hybrid system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParameters {
    /// Kittel magnon frequency.
    pub omega_k: f64,
    /// Mechanical (center-of-mass) frequency.
    pub omega_m: f64,
    /// NV spin splitting.
    pub omega_nv: f64,
    /// Tripartite coupling, the estimation target.
    pub lambda: f64,
    /// Pairwise spin-magnon coupling, treated as independent of `lambda`.
    pub g0: f64,
    /// Parametric (two-phonon) drive strength.
    pub omega_p: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub kappa_sigma: f64,
    /// Coherent magnon drive strength.
    pub drive: f64,
    /// Dimensionless mechanical displacement set-point entering Λ.
    pub x_b: f64,
}

impl SystemParameters {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_k", self.omega_k),
            ("omega_m", self.omega_m),
            ("omega_nv", self.omega_nv),
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
            ("kappa_sigma", self.kappa_sigma),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        let finite = [
            ("lambda", self.lambda),
            ("g0", self.g0),
            ("omega_p", self.omega_p),
            ("drive", self.drive),
            ("x_b", self.x_b),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite, got {v}")));
            }
        }
        if self.omega_p >= self.omega_m {
            return Err(Error::domain(format!(
                "parametric drive {} must stay below the mechanical frequency {}",
                self.omega_p, self.omega_m
            )));
        }
        Ok(())
    }

    /// Squared critical coupling Λ_c² = ω_NV ω_K / 4.
    pub fn critical_coupling_sq(&self) -> f64 {
        0.25 * self.omega_nv * self.omega_k
    }

    /// ω_K/ω_NV, the small parameter behind the dispersive decoupling.
    /// Reported as a diagnostic only.
    pub fn dispersive_ratio(&self) -> f64 {
        self.omega_k / self.omega_nv
    }
}

/// Micromagnet / trap geometry from which λ follows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryParameters {
    pub g_e: f64,
    pub mu_b: f64,
    pub mu_0: f64,
    pub gamma_gyro: f64,
    pub m_s: f64,
    /// Micromagnet radius.
    pub radius: f64,
    /// Equilibrium NV-magnet distance.
    pub r0: f64,
    pub m_eff: f64,
    pub omega_m: f64,
}

impl GeometryParameters {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("g_e", self.g_e),
            ("mu_b", self.mu_b),
            ("mu_0", self.mu_0),
            ("gamma_gyro", self.gamma_gyro.abs()),
            ("m_s", self.m_s),
            ("radius", self.radius),
            ("r0", self.r0),
            ("m_eff", self.m_eff),
            ("omega_m", self.omega_m),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.r0 <= self.radius {
            return Err(Error::domain(format!(
                "NV center must sit outside the magnet: r0 = {} <= R = {}",
                self.r0, self.radius
            )));
        }
        Ok(())
    }

    /// Mechanical zero-point amplitude sqrt(1/(2 M ω_m)) in natural units.
    pub fn zero_point_fluctuation(&self) -> f64 {
        zero_point_fluctuation(self.m_eff, self.omega_m)
    }
}

pub fn zero_point_fluctuation(m_eff: f64, omega_m: f64) -> f64 {
    (1.0 / (2.0 * m_eff * omega_m)).sqrt()
}

/// Mechanical squeezed frame reached by exp[r(b² − b†²)].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedFrame {
    pub r: f64,
    /// λ e^r.
    pub lambda_e: f64,
    /// (ω_m − Ω_p)/cosh 2r.
    pub delta_m: f64,
}

impl SqueezedFrame {
    pub fn enhancement(&self) -> f64 {
        self.r.exp()
    }
}

/// Squeezing parameter from tanh 2r = Ω_p/(ω_m − Ω_p).
pub fn squeezed_frame(p: &SystemParameters) -> Result<SqueezedFrame> {
    let detuned = p.omega_m - p.omega_p;
    if !(detuned > 0.0) {
        return Err(Error::domain(format!(
            "ω_m − Ω_p = {detuned} must be positive"
        )));
    }
    let t = p.omega_p / detuned;
    if !(t.abs() < 1.0) {
        return Err(Error::domain(format!(
            "tanh 2r = Ω_p/(ω_m − Ω_p) = {t} lies outside (-1, 1); squeezing undefined"
        )));
    }
    let r = 0.5 * t.atanh();
    Ok(SqueezedFrame {
        r,
        lambda_e: p.lambda * r.exp(),
        delta_m: detuned / (2.0 * r).cosh(),
    })
}

/// Tripartite coupling from the micromagnet geometry.
pub fn lambda_from_geometry(g: &GeometryParameters) -> Result<f64> {
    g.validate()?;
    let prefactor = 3.0 * g.g_e * g.mu_0 * g.mu_b / (8.0 * PI * g.r0.powi(4));
    let root = (4.0 * PI * g.gamma_gyro.abs() * g.m_s * g.radius.powi(3)
        / (3.0 * g.m_eff * g.omega_m))
        .sqrt();
    Ok(prefactor * root)
}

/// Pairwise coupling g0 = λ r0 / (3 z_zpf) left over at first order in z.
pub fn pairwise_g0(lambda: f64, r0: f64, z_zpf: f64) -> Result<f64> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::domain(format!("r0 must be positive, got {r0}")));
    }
    if !(z_zpf > 0.0 && z_zpf.is_finite()) {
        return Err(Error::domain(format!(
            "z_zpf must be positive, got {z_zpf}"
        )));
    }
    Ok(lambda * r0 / (3.0 * z_zpf))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Normal,
    Superradiant,
    Critical,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Normal => "normal",
            Phase::Superradiant => "superradiant",
            Phase::Critical => "critical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    /// Effective coupling λ_e x_b + g0.
    pub coupling: f64,
    /// 4Λ²/(ω_NV ω_K); the transition sits at 1.
    pub criticality: f64,
    /// Magnon squeezing of the eigenstate, `+inf` at or beyond the boundary.
    pub xi: f64,
    pub x_minus: f64,
    pub x_plus: f64,
    pub phase: Phase,
}

pub fn phase_point(p: &SystemParameters, frame: &SqueezedFrame) -> PhasePoint {
    phase_point_with_tolerance(p, frame, DEFAULT_CRITICAL_TOLERANCE)
}

/// Critical positions solve Λ(x)² = Λ_c², i.e. x_± = (±Λ_c − g0)/λ_e.
pub fn phase_point_with_tolerance(
    p: &SystemParameters,
    frame: &SqueezedFrame,
    tolerance: f64,
) -> PhasePoint {
    let coupling = frame.lambda_e * p.x_b + p.g0;
    let lc_sq = p.critical_coupling_sq();
    let criticality = coupling * coupling / lc_sq;
    let phase = classify(criticality, tolerance);
    let xi = match phase {
        Phase::Normal => -0.25 * (-criticality).ln_1p(),
        _ => f64::INFINITY,
    };

    let lc = lc_sq.sqrt();
    let (x_minus, x_plus) = if frame.lambda_e != 0.0 {
        let a = (-lc - p.g0) / frame.lambda_e;
        let b = (lc - p.g0) / frame.lambda_e;
        (a.min(b), a.max(b))
    } else if p.g0 * p.g0 < lc_sq {
        // Λ does not depend on x_b: normal everywhere.
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        (f64::NAN, f64::NAN)
    };

    PhasePoint {
        coupling,
        criticality,
        xi,
        x_minus,
        x_plus,
        phase,
    }
}

fn classify(criticality: f64, tolerance: f64) -> Phase {
    if (1.0 - criticality).abs() < tolerance {
        Phase::Critical
    } else if criticality < 1.0 {
        Phase::Normal
    } else {
        Phase::Superradiant
    }
}
