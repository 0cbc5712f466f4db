//! Arm and two-photon phases, the QBER law and the analysis bases.
//!
//! Absolute interferometric phases are of order 10⁵–10⁶ rad and are never
//! reported directly. A pair of analyzers is described relative to a
//! calibration wavelength plus a free offset φ₀ that stands for the
//! sub-wavelength piezo setting; only the reduced phase is observable.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::dispersion::{dispersion_sample, refractive_index, SellmeierModel};
use crate::error::{Error, Result};
use crate::source::conjugate_wavelength;

/// Reduces a phase to (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi - TAU * (phi / TAU).round();
    if r <= -PI {
        r + TAU
    } else if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Reduces an offset to [−π, π).
pub fn wrap_offset(phi: f64) -> f64 {
    let r = wrap_phase(phi);
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// 2π·ΔL·n(λ)/λ, unwrapped. ΔL in m, λ in nm.
pub fn arm_phase(fiber: &SellmeierModel, wavelength_nm: f64, delta_l_m: f64) -> Result<f64> {
    let n = refractive_index(fiber, wavelength_nm)?;
    Ok(TAU * delta_l_m * 1e9 * n / wavelength_nm)
}

/// The two analyzers of a Franson arrangement.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferometerPair {
    /// Bob's arm-length difference ΔL_B in m.
    pub delta_l_b: f64,
    /// ΔL_A − ΔL_B in m.
    pub detuning: f64,
    /// Global offset φ₀ in [−π, π).
    pub phase_offset: f64,
    pub fiber: SellmeierModel,
    /// Wavelength (Alice side, nm) at which the relative phase is referenced.
    pub calibration_wavelength_nm: Option<f64>,
}

impl InterferometerPair {
    pub fn new(delta_l_b: f64, detuning: f64, fiber: SellmeierModel) -> Result<Self> {
        let pair = Self {
            delta_l_b,
            detuning,
            phase_offset: 0.0,
            fiber,
            calibration_wavelength_nm: None,
        };
        pair.validate()?;
        Ok(pair)
    }

    /// Identical analyzers, ΔL_A = ΔL_B.
    pub fn balanced(delta_l: f64, fiber: SellmeierModel) -> Result<Self> {
        Self::new(delta_l, 0.0, fiber)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_l_b.is_finite() && self.delta_l_b > 0.0) {
            return Err(Error::invalid("delta_l_b", format!("must be > 0, got {}", self.delta_l_b)));
        }
        if !(self.delta_l_a().is_finite() && self.delta_l_a() > 0.0) {
            return Err(Error::invalid(
                "detuning",
                format!("ΔL_A = ΔL_B + δ must be > 0, got {}", self.delta_l_a()),
            ));
        }
        if !(-PI..PI).contains(&self.phase_offset) {
            return Err(Error::invalid(
                "phase_offset",
                format!("must lie in [−π, π), got {}", self.phase_offset),
            ));
        }
        Ok(())
    }

    pub fn delta_l_a(&self) -> f64 {
        self.delta_l_b + self.detuning
    }

    pub fn with_phase_offset(mut self, phi0: f64) -> Self {
        self.phase_offset = wrap_offset(phi0);
        self
    }

    pub fn with_reference(mut self, wavelength_nm: f64) -> Self {
        self.calibration_wavelength_nm = Some(wavelength_nm);
        self
    }

    /// Adjusts φ₀ so that the two-photon phase vanishes at `wavelength_nm`,
    /// taking that wavelength as the phase reference.
    pub fn calibrated_at(&self, pump_nm: f64, wavelength_nm: f64) -> Result<Self> {
        let referenced = self.clone().with_reference(wavelength_nm);
        let residual = two_photon_phase(&referenced, pump_nm, wavelength_nm)?;
        let phi0 = referenced.phase_offset - residual;
        Ok(referenced.with_phase_offset(phi0))
    }

    /// Unwrapped φ_A(λ_A) + φ_B(λ_B) with λ_B the energy-conserving partner.
    pub fn absolute_phase(&self, pump_nm: f64, alice_nm: f64) -> Result<f64> {
        let bob_nm = conjugate_wavelength(pump_nm, alice_nm)?;
        Ok(arm_phase(&self.fiber, alice_nm, self.delta_l_a())?
            + arm_phase(&self.fiber, bob_nm, self.delta_l_b)?)
    }

    /// Analyzers for the X basis: both arms lengthened by λ_p/(2·n₀).
    pub fn for_basis(&self, basis: AnalysisBasis, pump_nm: f64) -> Result<Self> {
        match basis {
            AnalysisBasis::Z => Ok(self.clone()),
            AnalysisBasis::X => {
                let inc = second_basis_increment(&self.fiber, pump_nm)?;
                Ok(Self {
                    delta_l_b: self.delta_l_b + inc,
                    ..self.clone()
                })
            }
        }
    }

    /// Precomputes the reference phase for repeated evaluation.
    pub fn curve(&self, pump_nm: f64) -> Result<PhaseCurve<'_>> {
        let reference = match self.calibration_wavelength_nm {
            Some(wl) => self.absolute_phase(pump_nm, wl)?,
            None => 0.0,
        };
        Ok(PhaseCurve {
            interf: self,
            pump_nm,
            reference,
        })
    }
}

/// A pair of analyzers bound to a pump wavelength with its reference phase cached.
#[derive(Debug, Clone, Copy)]
pub struct PhaseCurve<'a> {
    interf: &'a InterferometerPair,
    pump_nm: f64,
    reference: f64,
}

impl PhaseCurve<'_> {
    /// Phase relative to the reference, without φ₀ and without reduction.
    /// Continuous in λ_A, which makes it the right input for corridor searches.
    pub fn relative(&self, alice_nm: f64) -> Result<f64> {
        Ok(self.interf.absolute_phase(self.pump_nm, alice_nm)? - self.reference)
    }

    /// Observable two-photon phase in (−π, π].
    pub fn phase(&self, alice_nm: f64) -> Result<f64> {
        Ok(wrap_phase(self.relative(alice_nm)? + self.interf.phase_offset))
    }
}

/// Two-photon phase φ_A + φ_B + φ₀ (minus the calibration reference when
/// set), reduced to (−π, π].
pub fn two_photon_phase(interf: &InterferometerPair, pump_nm: f64, alice_nm: f64) -> Result<f64> {
    interf.curve(pump_nm)?.phase(alice_nm)
}

/// Wavelength-dependent part of the balanced-analyzer phase from the
/// second-order Taylor index about 2λ_p:
/// n''·π·(λ_A − 2λ_p)²/(λ_A − λ_p)·ΔL. The constant term is dropped.
pub fn balanced_phase_approx(
    fiber: &SellmeierModel,
    pump_nm: f64,
    alice_nm: f64,
    delta_l_m: f64,
) -> Result<f64> {
    if !(alice_nm > pump_nm) {
        return Err(Error::Domain(format!(
            "λ_A = {alice_nm} nm must exceed the pump wavelength {pump_nm} nm"
        )));
    }
    let d2n = dispersion_sample(fiber, 2.0 * pump_nm)?.d2n_dlambda2;
    let shape_um = ((alice_nm - 2.0 * pump_nm).powi(2) / (alice_nm - pump_nm)) * 1e-3;
    Ok(d2n * PI * shape_um * delta_l_m * 1e6)
}

/// QBER = sin²(φ/2).
pub fn qber_from_phase(phi: f64) -> f64 {
    let s = (0.5 * phi).sin();
    s * s
}

/// Principal-branch inverse of the QBER law: sign·2·arcsin(√q).
pub fn phase_from_qber(qber: f64, sign: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&qber) {
        return Err(Error::Domain(format!("QBER must lie in [0, 1], got {qber}")));
    }
    let sign = if sign < 0.0 { -1.0 } else { 1.0 };
    Ok(sign * 2.0 * qber.sqrt().asin())
}

/// Probabilities of the correlated and anti-correlated coincidence ports,
/// (1 + cos φ)/2 and (1 − cos φ)/2.
pub fn coincidence_probabilities(phi: f64) -> (f64, f64) {
    let p2 = qber_from_phase(phi);
    (1.0 - p2, p2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AnalysisBasis {
    /// φ_A + φ_B = 0
    Z,
    /// φ′_A + φ′_B = π
    X,
}

impl AnalysisBasis {
    pub fn target_sum(self) -> f64 {
        match self {
            AnalysisBasis::Z => 0.0,
            AnalysisBasis::X => PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondBasis {
    /// Arm-length increment λ_p/(2·n₀) in m.
    pub increment_m: f64,
    /// max over the band of |φ′ − φ − π| in rad.
    pub max_added_error: f64,
}

fn second_basis_increment(fiber: &SellmeierModel, pump_nm: f64) -> Result<f64> {
    let n0 = refractive_index(fiber, 2.0 * pump_nm)?;
    Ok(pump_nm / (2.0 * n0) * 1e-9)
}

/// Second-basis analyzers and the dispersion-induced deviation of their
/// phase step from π over an Alice-side band.
pub fn second_basis(interf: &InterferometerPair, pump_nm: f64, band_nm: (f64, f64)) -> Result<SecondBasis> {
    let increment = second_basis_increment(&interf.fiber, pump_nm)?;
    let (lo, hi) = band_nm;
    const SAMPLES: usize = 2000;
    let mut worst = 0.0_f64;
    for k in 0..=SAMPLES {
        let alice = lo + (hi - lo) * k as f64 / SAMPLES as f64;
        let bob = conjugate_wavelength(pump_nm, alice)?;
        // φ is linear in ΔL, so φ′ − φ is the phase of the increment alone.
        let added = arm_phase(&interf.fiber, alice, increment)? + arm_phase(&interf.fiber, bob, increment)?;
        worst = worst.max((added - PI).abs());
    }
    Ok(SecondBasis {
        increment_m: increment,
        max_added_error: worst,
    })
}
