//! Material dispersion from multi-term Sellmeier equations.
//!
//! n²(λ) = 1 + Σᵢ Bᵢ·λ²/(λ² − Cᵢ), with λ in µm and Cᵢ in µm². All public
//! wavelengths are in nm; the conversion to µm happens here and nowhere else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

/// One resonance term `B·λ²/(λ² − C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellmeierTerm {
    /// Oscillator strength B (dimensionless).
    pub strength: f64,
    /// Squared resonance wavelength C in µm².
    pub resonance_um2: f64,
}

impl SellmeierTerm {
    pub const fn new(strength: f64, resonance_um2: f64) -> Self {
        Self {
            strength,
            resonance_um2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellmeierModel {
    name: String,
    terms: Vec<SellmeierTerm>,
    /// Inclusive validity interval in nm.
    validity_nm: (f64, f64),
}

impl SellmeierModel {
    /// Builds a model, rejecting non-finite coefficients, an empty or
    /// non-positive validity interval, and resonances inside that interval.
    pub fn new(
        name: impl Into<String>,
        terms: Vec<SellmeierTerm>,
        validity_nm: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = validity_nm;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
            return Err(Error::invalid(
                "validity_range",
                format!("expected 0 < min < max, got [{lo}, {hi}] nm"),
            ));
        }
        for (i, t) in terms.iter().enumerate() {
            if !t.strength.is_finite() || !t.resonance_um2.is_finite() {
                return Err(Error::invalid(
                    "terms",
                    format!("term {i} has non-finite coefficients"),
                ));
            }
            if t.resonance_um2 > 0.0 {
                let pole_nm = t.resonance_um2.sqrt() * 1e3;
                if pole_nm >= lo && pole_nm <= hi {
                    return Err(Error::invalid(
                        "terms",
                        format!("term {i} has a resonance at {pole_nm:.3} nm inside the validity range"),
                    ));
                }
            }
        }
        let model = Self {
            name: name.into(),
            terms,
            validity_nm,
        };
        // A pole-free interval keeps n² continuous, so checking the
        // endpoints and a coarse interior grid catches n² ≤ 0 regions.
        for k in 0..=64 {
            let wl = lo + (hi - lo) * k as f64 / 64.0;
            if model.index_squared_minus_one(wl) <= -1.0 {
                return Err(Error::invalid(
                    "terms",
                    format!("n² is not positive at {wl:.3} nm"),
                ));
            }
        }
        Ok(model)
    }

    /// Bulk synthetic fused silica at room temperature (Malitson, 1965),
    /// valid 210–3710 nm.
    pub fn fused_silica() -> Self {
        Self {
            name: "fused_silica".to_owned(),
            terms: vec![
                SellmeierTerm::new(0.696_166_3, 0.068_404_3 * 0.068_404_3),
                SellmeierTerm::new(0.407_942_6, 0.116_241_4 * 0.116_241_4),
                SellmeierTerm::new(0.897_479_4, 9.896_161 * 9.896_161),
            ],
            validity_nm: (210.0, 3710.0),
        }
    }

    /// Zero-term model: n = 1 everywhere.
    pub fn vacuum() -> Self {
        Self {
            name: "vacuum".to_owned(),
            terms: Vec::new(),
            validity_nm: (1.0, 1.0e6),
        }
    }

    /// Names accepted by [`SellmeierModel::builtin`].
    pub const BUILTIN_NAMES: [&'static str; 2] = ["fused_silica", "vacuum"];

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "fused_silica" | "silica" => Some(Self::fused_silica()),
            "vacuum" => Some(Self::vacuum()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn terms(&self) -> &[SellmeierTerm] {
        &self.terms
    }

    pub fn validity_nm(&self) -> (f64, f64) {
        self.validity_nm
    }

    pub fn check_range(&self, wavelength_nm: f64) -> Result<()> {
        let (lo, hi) = self.validity_nm;
        if wavelength_nm >= lo && wavelength_nm <= hi {
            Ok(())
        } else {
            Err(Error::WavelengthOutOfRange {
                model: self.name.clone(),
                wavelength_nm,
                min_nm: lo,
                max_nm: hi,
            })
        }
    }

    fn index_squared_minus_one(&self, wavelength_nm: f64) -> f64 {
        let l2 = sq(wavelength_nm * 1e-3);
        self.terms
            .iter()
            .map(|t| t.strength * l2 / (l2 - t.resonance_um2))
            .sum()
    }

    /// Sellmeier sum S and its first two derivatives with respect to λ in µm.
    fn sum_and_derivatives(&self, wavelength_nm: f64) -> (f64, f64, f64) {
        let l = wavelength_nm * 1e-3;
        let l2 = l * l;
        self.terms.iter().fold((0.0, 0.0, 0.0), |(s, s1, s2), t| {
            let (b, c) = (t.strength, t.resonance_um2);
            let den = l2 - c;
            (
                s + b * l2 / den,
                s1 - 2.0 * b * c * l / (den * den),
                s2 + 2.0 * b * c * (3.0 * l2 + c) / (den * den * den),
            )
        })
    }
}

/// Refractive index at a wavelength given in nm.
pub fn refractive_index(model: &SellmeierModel, wavelength_nm: f64) -> Result<f64> {
    model.check_range(wavelength_nm)?;
    Ok((1.0 + model.index_squared_minus_one(wavelength_nm)).sqrt())
}

/// Index, analytic derivatives and group quantities at one wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionPoint {
    pub wavelength_nm: f64,
    pub n: f64,
    /// dn/dλ in µm⁻¹.
    pub dn_dlambda: f64,
    /// d²n/dλ² in µm⁻².
    pub d2n_dlambda2: f64,
    /// n − λ·dn/dλ.
    pub group_index: f64,
    /// c / group_index in m/s.
    pub group_velocity: f64,
}

impl DispersionPoint {
    /// Second-order Taylor approximation of n about this point.
    pub fn taylor_index(&self, wavelength_nm: f64) -> f64 {
        let dl = (wavelength_nm - self.wavelength_nm) * 1e-3;
        self.n + self.dn_dlambda * dl + 0.5 * self.d2n_dlambda2 * dl * dl
    }
}

pub fn dispersion_sample(model: &SellmeierModel, wavelength_nm: f64) -> Result<DispersionPoint> {
    model.check_range(wavelength_nm)?;
    let (s, s1, s2) = model.sum_and_derivatives(wavelength_nm);
    // n² = 1 + S  ⇒  2n·n' = S'  and  2n'² + 2n·n'' = S''.
    let n = (1.0 + s).sqrt();
    let dn = s1 / (2.0 * n);
    let d2n = (0.5 * s2 - dn * dn) / n;
    let group_index = n - wavelength_nm * 1e-3 * dn;
    Ok(DispersionPoint {
        wavelength_nm,
        n,
        dn_dlambda: dn,
        d2n_dlambda2: d2n,
        group_index,
        group_velocity: SPEED_OF_LIGHT / group_index,
    })
}

#[inline]
fn sq(x: f64) -> f64 {
    x * x
}
