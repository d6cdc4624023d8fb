//! Closed-form rates, sideband weights, ratios and regime predicates.
//!
//! Every rate in this module is an angular frequency in rad/s. Linewidths
//! (`gamma_*`) are full widths at half maximum of the corresponding power
//! spectra, so the amplitude of a quadrature relaxes at half that rate.
//!
//! Sign convention: a positive `delta_pump` gives a positive parametric rate
//! `gamma_par`, and the four-term effective damping is evaluated exactly as
//! written, with the cooling tone at `delta_pump` and `delta_pump - 2 omega_m`
//! and the modulation tone at `delta_pump + 2 omega_m` and `delta_pump`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("effective damping {gamma_eff:.6e} rad/s is not positive (anti-damping regime)")]
    AntiDamping { gamma_eff: f64 },
    #[error("parametric gain s = {s} is unstable (stationary drive requires s < 1)")]
    Unstable { s: f64 },
}

fn invalid(name: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Mechanical mode parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    /// Resonance frequency (rad/s).
    pub omega_m: f64,
    /// Intrinsic linewidth (rad/s), `omega_m / Q`.
    pub gamma_m: f64,
    /// Effective mass (kg), only used for the zero-point spread.
    pub mass: Option<f64>,
    /// Bath temperature (K).
    pub temperature: Option<f64>,
    /// Mean phonon occupancy of the cooled mode.
    pub n_bar: f64,
}

impl OscillatorParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.omega_m.is_finite() && self.omega_m > 0.0) {
            return Err(invalid("omega_m", "must be finite and > 0"));
        }
        if !(self.gamma_m.is_finite() && self.gamma_m >= 0.0) {
            return Err(invalid("gamma_m", "must be finite and >= 0"));
        }
        if !(self.n_bar.is_finite() && self.n_bar >= 0.0) {
            return Err(invalid("n_bar", "must be finite and >= 0"));
        }
        if let Some(m) = self.mass {
            if !(m.is_finite() && m > 0.0) {
                return Err(invalid("mass", "must be finite and > 0"));
            }
        }
        if let Some(t) = self.temperature {
            if !(t.is_finite() && t > 0.0) {
                return Err(invalid("temperature", "must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// Ground-state position spread `sqrt(hbar / (2 m omega_m))`, when a mass is known.
    pub fn x_zpf(&self) -> Option<f64> {
        self.mass.map(|m| (HBAR / (2.0 * m * self.omega_m)).sqrt())
    }

    /// Bath occupancy at the configured temperature.
    pub fn n_bar_th(&self) -> Option<f64> {
        self.temperature.map(|t| bose_occupancy(t, self.omega_m))
    }
}

/// Cavity and two-tone pump configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityPumpParams {
    /// Cavity linewidth (rad/s).
    pub kappa: f64,
    /// Total optomechanical coupling of the pump beam (rad/s).
    pub g: f64,
    /// Fraction of the pump power in the cooling tone.
    pub epsilon_c: f64,
    /// Mean detuning of the pump tones from the cavity resonance (rad/s).
    pub delta_pump: f64,
    /// Heterodyne local-oscillator offset (rad/s).
    pub delta_lo: f64,
    /// Offset of the modulation tone from `2 omega_m` in reference segments (rad/s).
    pub omega_par_offset: f64,
}

impl CavityPumpParams {
    pub fn validate(&self, o: &OscillatorParams) -> Result<(), ModelError> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(invalid("kappa", "must be finite and > 0"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_c) {
            return Err(invalid("epsilon_c", "must lie in [0, 1]"));
        }
        if !self.g.is_finite() || !self.delta_pump.is_finite() {
            return Err(invalid("g/delta_pump", "must be finite"));
        }
        if !(self.delta_lo.is_finite() && self.delta_lo > 0.0) {
            return Err(invalid("delta_lo", "must be finite and > 0"));
        }
        if self.delta_lo >= 0.1 * o.omega_m {
            return Err(invalid("delta_lo", "must be much smaller than omega_m"));
        }
        Ok(())
    }
}

/// Lorentzian denominator `1 / (x^2 + kappa^2/4)`.
fn cavity_response(detuning: f64, kappa: f64) -> f64 {
    1.0 / (detuning * detuning + 0.25 * kappa * kappa)
}

/// Parametric rate `4 g^2 sqrt(eps (1 - eps)) delta / (delta^2 + kappa^2/4)`.
pub fn gamma_par(p: &CavityPumpParams, _o: &OscillatorParams) -> f64 {
    let eps = p.epsilon_c;
    let mix = (eps * (1.0 - eps)).max(0.0).sqrt();
    4.0 * p.g * p.g * mix * p.delta_pump * cavity_response(p.delta_pump, p.kappa)
}

/// Effective linewidth together with the anti-damping flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDamping {
    pub rate: f64,
    pub anti_damped: bool,
}

impl EffectiveDamping {
    pub fn positive(self) -> Result<f64, ModelError> {
        if self.anti_damped {
            Err(ModelError::AntiDamping {
                gamma_eff: self.rate,
            })
        } else {
            Ok(self.rate)
        }
    }
}

/// Intrinsic linewidth plus the four-term optomechanical damping of both tones.
pub fn gamma_eff(p: &CavityPumpParams, o: &OscillatorParams) -> EffectiveDamping {
    let eps = p.epsilon_c;
    let d = p.delta_pump;
    let w2 = 2.0 * o.omega_m;
    let k = p.kappa;
    let cooling = eps * (cavity_response(d, k) - cavity_response(d - w2, k));
    let modulation = (1.0 - eps) * (cavity_response(d + w2, k) - cavity_response(d, k));
    let rate = o.gamma_m + p.g * p.g * k * (cooling + modulation);
    EffectiveDamping {
        rate,
        anti_damped: !(rate > 0.0),
    }
}

/// Parametric gain `s = gamma_par / gamma_eff`.
pub fn squeeze_param(p: &CavityPumpParams, o: &OscillatorParams) -> Result<f64, ModelError> {
    let eff = gamma_eff(p, o).positive()?;
    Ok(gamma_par(p, o) / eff)
}

/// Numerators of the narrow (width `gamma_minus`) and broad (width
/// `gamma_plus`) Lorentzians in the Stokes and anti-Stokes sidebands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandWeights {
    pub stokes_narrow: f64,
    pub stokes_broad: f64,
    pub antistokes_narrow: f64,
    pub antistokes_broad: f64,
}

impl SidebandWeights {
    /// True when the broad anti-Stokes weight is negative, i.e. `s > 2 n_bar`.
    pub fn quantum_squeezed(&self) -> bool {
        self.antistokes_broad < 0.0
    }

    pub fn all_nonnegative(&self) -> bool {
        self.stokes_narrow >= 0.0
            && self.stokes_broad >= 0.0
            && self.antistokes_narrow >= 0.0
            && self.antistokes_broad >= 0.0
    }
}

pub fn sideband_weights(n_bar: f64, s: f64) -> SidebandWeights {
    SidebandWeights {
        stokes_narrow: 1.0 + n_bar - 0.5 * s,
        stokes_broad: 1.0 + n_bar + 0.5 * s,
        antistokes_narrow: n_bar + 0.5 * s,
        antistokes_broad: n_bar - 0.5 * s,
    }
}

/// Stokes/anti-Stokes area ratios: plain, broad component and narrow component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub plain: f64,
    pub plus: f64,
    pub minus: f64,
    /// Set exactly when the broad anti-Stokes area vanishes (`s = 2 n_bar`).
    pub at_threshold: bool,
}

pub fn ratios(n_bar: f64, s: f64) -> Ratios {
    let plain = (n_bar + 1.0) / n_bar;
    let plus_den = n_bar - 0.5 * s;
    let at_threshold = plus_den == 0.0;
    let plus = if at_threshold {
        f64::INFINITY
    } else {
        (n_bar + 1.0 + 0.5 * s) / plus_den
    };
    let minus = (n_bar + 1.0 - 0.5 * s) / (n_bar + 0.5 * s);
    Ratios {
        plain,
        plus,
        minus,
        at_threshold,
    }
}

/// Quadrature variances in quanta. `x` is the over-damped quadrature
/// (linewidth `gamma_plus`), `y` the under-damped one (`gamma_minus`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureVariances {
    pub x: f64,
    pub y: f64,
}

pub fn quadrature_variances(n_bar: f64, s: f64) -> Result<QuadratureVariances, ModelError> {
    if !(s < 1.0) {
        return Err(ModelError::Unstable { s });
    }
    let thermal = (2.0 * n_bar + 1.0) / 4.0;
    Ok(QuadratureVariances {
        x: thermal / (1.0 + s),
        y: thermal / (1.0 - s),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sideband {
    Stokes,
    AntiStokes,
}

/// Two-Lorentzian sideband spectrum evaluated at offsets `omega` (rad/s)
/// from the sideband center.
///
/// Normalized so that `(1/2pi) * integral(S dOmega)` is the sideband power in
/// quanta; the Stokes minus anti-Stokes integral is exactly one quantum.
pub fn analytic_sideband_psd(
    n_bar: f64,
    s: f64,
    gamma_eff: f64,
    side: Sideband,
    omega: &[f64],
) -> Result<Vec<f64>, ModelError> {
    if !(s < 1.0) {
        return Err(ModelError::Unstable { s });
    }
    if !(gamma_eff > 0.0) {
        return Err(ModelError::AntiDamping { gamma_eff });
    }
    let w = sideband_weights(n_bar, s);
    let (narrow, broad) = match side {
        Sideband::Stokes => (w.stokes_narrow, w.stokes_broad),
        Sideband::AntiStokes => (w.antistokes_narrow, w.antistokes_broad),
    };
    let hm = 0.25 * (gamma_eff * (1.0 - s)).powi(2);
    let hp = 0.25 * (gamma_eff * (1.0 + s)).powi(2);
    Ok(omega
        .iter()
        .map(|&om| {
            let o2 = om * om;
            0.5 * gamma_eff * (narrow / (o2 + hm) + broad / (o2 + hp))
        })
        .collect())
}

/// Regime predicates for a given occupancy and gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    /// Stationary parametric drive is stable (`s < 1`).
    pub stable: bool,
    /// Squeezed quadrature below the ground-state variance (`s > 2 n_bar`).
    pub quantum_squeezed: bool,
    /// A stable quantum-squeezed state exists for this occupancy (`n_bar < 0.5`).
    pub quantum_reachable: bool,
}

pub fn thresholds(n_bar: f64, s: f64) -> Regime {
    Regime {
        stable: s < 1.0,
        quantum_squeezed: s > 2.0 * n_bar,
        quantum_reachable: n_bar < 0.5,
    }
}

/// Bose-Einstein occupancy `1 / (exp(hbar omega / kB T) - 1)`.
pub fn bose_occupancy(temperature: f64, omega_m: f64) -> f64 {
    let x = HBAR * omega_m / (K_B * temperature);
    1.0 / x.exp_m1()
}

/// One consistent snapshot of every derived rate used by synthesis and
/// analysis of a single operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub n_bar: f64,
    pub gamma_eff: f64,
    pub gamma_par: f64,
    pub s: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub weights: SidebandWeights,
    pub ratios: Ratios,
}

impl DerivedRates {
    /// Rates from the physical pump configuration.
    pub fn from_params(o: &OscillatorParams, p: &CavityPumpParams) -> Result<Self, ModelError> {
        o.validate()?;
        p.validate(o)?;
        let eff = gamma_eff(p, o).positive()?;
        Ok(Self::build(o.n_bar, eff, gamma_par(p, o)))
    }

    /// Rates for a prescribed gain at a given effective linewidth.
    pub fn from_squeeze(n_bar: f64, gamma_eff: f64, s: f64) -> Result<Self, ModelError> {
        if !(gamma_eff > 0.0) {
            return Err(ModelError::AntiDamping { gamma_eff });
        }
        if !(n_bar.is_finite() && n_bar >= 0.0) {
            return Err(invalid("n_bar", "must be finite and >= 0"));
        }
        Ok(Self::build(n_bar, gamma_eff, s * gamma_eff))
    }

    fn build(n_bar: f64, gamma_eff: f64, gamma_par: f64) -> Self {
        let s = gamma_par / gamma_eff;
        Self {
            n_bar,
            gamma_eff,
            gamma_par,
            s,
            gamma_plus: gamma_eff * (1.0 + s),
            gamma_minus: gamma_eff * (1.0 - s),
            weights: sideband_weights(n_bar, s),
            ratios: ratios(n_bar, s),
        }
    }

    /// Same damping without coherent parametric action (detuned modulation tone).
    pub fn detuned(&self) -> Self {
        Self::build(self.n_bar, self.gamma_eff, 0.0)
    }

    pub fn regime(&self) -> Regime {
        thresholds(self.n_bar, self.s)
    }

    pub fn variances(&self) -> Result<QuadratureVariances, ModelError> {
        quadrature_variances(self.n_bar, self.s)
    }

    /// Rejects gains that have no stationary state.
    pub fn require_stable(&self) -> Result<(), ModelError> {
        if !(self.s < 1.0) || !(self.gamma_minus > 0.0) {
            return Err(ModelError::Unstable { s: self.s });
        }
        Ok(())
    }
}

/// Cooling-tone fraction that produces a target gain, found by bisection on
/// the branch connected to `epsilon_c = 1` (where `s = 0`).
pub fn epsilon_for_squeeze(
    o: &OscillatorParams,
    p: &CavityPumpParams,
    s_target: f64,
) -> Result<f64, ModelError> {
    if !(0.0..1.0).contains(&s_target) {
        return Err(ModelError::Unstable { s: s_target });
    }
    if s_target == 0.0 {
        return Ok(1.0);
    }
    let gain_at = |eps: f64| -> Option<f64> {
        let q = CavityPumpParams { epsilon_c: eps, ..*p };
        squeeze_param(&q, o).ok().map(|s| s.abs())
    };
    // walk down from eps = 1 until the target is bracketed
    let mut hi = 1.0;
    let mut lo = None;
    let mut eps = 1.0;
    for _ in 0..10_000 {
        eps -= 1e-4;
        if eps <= 0.0 {
            break;
        }
        match gain_at(eps) {
            Some(s) if s >= s_target => {
                lo = Some(eps);
                break;
            }
            Some(_) => hi = eps,
            None => break,
        }
    }
    let mut lo = lo.ok_or_else(|| {
        invalid(
            "epsilon_c",
            format!("no cooling fraction reaches s = {s_target} with positive damping"),
        )
    })?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        match gain_at(mid) {
            Some(s) if s >= s_target => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}
