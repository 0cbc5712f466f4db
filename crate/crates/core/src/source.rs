//! SPDC photon-pair source: energy-conservation pairing, emission spectrum
//! and pair sampling.
//!
//! The emission spectrum is described as a density over the wavelength of
//! either photon, peaked at the degenerate wavelength 2λ_p. Photons above
//! 2λ_p go to Alice, photons below to Bob.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Root of sin(x)/x = 1/√2, i.e. the half-maximum point of sinc².
pub(crate) const SINC2_HALF_MAX_ARG: f64 = 1.391_557_378_251_510_3;

/// Si(2π); ∫ sinc² over the main lobe |x| ≤ π equals 2·Si(2π).
pub(crate) const SI_TWO_PI: f64 = 1.418_151_576_132_628_4;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralShape {
    /// Main lobe of a quasi-phase-matching sinc², truncated at its first nulls.
    Sinc2,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub pump_wavelength_nm: f64,
    pub shape: SpectralShape,
    pub fwhm_nm: f64,
    /// Usable Alice-side (long wavelength) band. `None` falls back to the
    /// FWHM interval of the Alice marginal.
    pub usable_band_nm: Option<(f64, f64)>,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            pump_wavelength_nm: 770.0,
            shape: SpectralShape::Sinc2,
            fwhm_nm: 55.0,
            usable_band_nm: Some((1541.0, 1579.0)),
        }
    }
}

impl SourceSpec {
    pub fn degenerate_wavelength_nm(&self) -> f64 {
        2.0 * self.pump_wavelength_nm
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.pump_wavelength_nm;
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::invalid("pump_wavelength", format!("must be positive, got {p}")));
        }
        if !(self.fwhm_nm.is_finite() && self.fwhm_nm >= 0.0) {
            return Err(Error::invalid("fwhm", format!("must be ≥ 0, got {}", self.fwhm_nm)));
        }
        if let Some((lo, hi)) = self.usable_band_nm {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid("usable_band", format!("malformed interval [{lo}, {hi}]")));
            }
            if lo <= p {
                return Err(Error::invalid(
                    "usable_band",
                    format!("must lie above the pump wavelength {p} nm, got [{lo}, {hi}]"),
                ));
            }
        }
        Ok(())
    }

    /// Half-width of the support around the degenerate wavelength, in nm.
    /// Infinite for the Gaussian shape.
    pub fn support_half_width_nm(&self) -> f64 {
        match self.shape {
            SpectralShape::Sinc2 => std::f64::consts::PI / self.sinc2_scale(),
            SpectralShape::Gaussian => f64::INFINITY,
        }
    }

    fn sinc2_scale(&self) -> f64 {
        2.0 * SINC2_HALF_MAX_ARG / self.fwhm_nm
    }

    fn gaussian_sigma(&self) -> f64 {
        self.fwhm_nm / FWHM_PER_SIGMA
    }
}

/// Energy-conserving partner wavelength: λ_B = 1 / (1/λ_p − 1/λ_A).
pub fn conjugate_wavelength(pump_nm: f64, wavelength_nm: f64) -> Result<f64> {
    if !(wavelength_nm > pump_nm) || !(pump_nm > 0.0) {
        return Err(Error::Domain(format!(
            "no physical conjugate for λ = {wavelength_nm} nm with pump {pump_nm} nm (need λ > λ_p > 0)"
        )));
    }
    Ok(1.0 / (1.0 / pump_nm - 1.0 / wavelength_nm))
}

/// An energy-conserving photon pair; `alice_nm` is the long-wavelength photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhotonPair {
    pub alice_nm: f64,
    pub bob_nm: f64,
}

/// Normalized emission density (per nm) at a photon wavelength.
pub fn spectral_density(spec: &SourceSpec, wavelength_nm: f64) -> f64 {
    let u = wavelength_nm - spec.degenerate_wavelength_nm();
    if spec.fwhm_nm == 0.0 {
        return if u == 0.0 { f64::INFINITY } else { 0.0 };
    }
    match spec.shape {
        SpectralShape::Sinc2 => {
            let a = spec.sinc2_scale();
            let x = a * u;
            if x.abs() > std::f64::consts::PI {
                return 0.0;
            }
            let s = if x == 0.0 { 1.0 } else { x.sin() / x };
            s * s * a / (2.0 * SI_TWO_PI)
        }
        SpectralShape::Gaussian => {
            let sigma = spec.gaussian_sigma();
            (-0.5 * (u / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        }
    }
}

/// Density of the Alice (long-wavelength) photon, for λ ≥ 2λ_p.
///
/// Either photon of the pair may be the one emitted at λ; the partner's
/// contribution enters through the Jacobian |dλ_B/dλ_A| = (λ_B/λ_A)².
pub fn alice_marginal_density(spec: &SourceSpec, wavelength_nm: f64) -> f64 {
    if wavelength_nm < spec.degenerate_wavelength_nm() {
        return 0.0;
    }
    let Ok(partner) = conjugate_wavelength(spec.pump_wavelength_nm, wavelength_nm) else {
        return 0.0;
    };
    spectral_density(spec, wavelength_nm)
        + spectral_density(spec, partner) * (partner / wavelength_nm).powi(2)
}

/// Alice-side analysis band: the configured usable band, or else the FWHM
/// interval of the Alice marginal, which starts at its peak 2λ_p.
pub fn emission_band(spec: &SourceSpec) -> (f64, f64) {
    if let Some(band) = spec.usable_band_nm {
        return band;
    }
    let center = spec.degenerate_wavelength_nm();
    if spec.fwhm_nm == 0.0 {
        return (center, center);
    }
    let half = 0.5 * alice_marginal_density(spec, center);
    // The marginal decreases monotonically above 2λ_p; bisect on [2λ_p, 2λ_p + fwhm].
    let (mut lo, mut hi) = (center, center + spec.fwhm_nm);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if alice_marginal_density(spec, mid) > half {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * center {
            break;
        }
    }
    (center, 0.5 * (lo + hi))
}

/// Draws the wavelength of one emitted photon from the full spectrum.
pub fn sample_emission_wavelength<R: Rng + ?Sized>(spec: &SourceSpec, rng: &mut R) -> f64 {
    let center = spec.degenerate_wavelength_nm();
    if spec.fwhm_nm == 0.0 {
        return center;
    }
    match spec.shape {
        SpectralShape::Sinc2 => {
            // Rejection from a uniform proposal over the main lobe; acceptance Si(2π)/π ≈ 0.45.
            let a = spec.sinc2_scale();
            loop {
                let x: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                let s = if x == 0.0 { 1.0 } else { x.sin() / x };
                if rng.random::<f64>() < s * s {
                    return center + x / a;
                }
            }
        }
        SpectralShape::Gaussian => {
            let normal = Normal::new(center, spec.gaussian_sigma())
                .expect("sigma is positive for fwhm > 0");
            normal.sample(rng)
        }
    }
}

/// Draws a photon pair. The emitted photon is assigned to Alice when it lies
/// above 2λ_p; otherwise its energy-conserving partner goes to Alice.
pub fn sample_pair<R: Rng + ?Sized>(spec: &SourceSpec, rng: &mut R) -> PhotonPair {
    let pump = spec.pump_wavelength_nm;
    let center = spec.degenerate_wavelength_nm();
    loop {
        let wl = sample_emission_wavelength(spec, rng);
        // Gaussian tails can reach λ ≤ λ_p where no partner exists.
        let Ok(partner) = conjugate_wavelength(pump, wl) else {
            continue;
        };
        let (alice, bob) = if wl >= center { (wl, partner) } else { (partner, wl) };
        return PhotonPair {
            alice_nm: alice,
            bob_nm: bob,
        };
    }
}

/// Samples pairs whose Alice photon falls inside a wavelength window.
#[derive(Debug, Clone)]
pub struct WindowedPairSampler {
    pump_nm: f64,
    spec: SourceSpec,
    window: (f64, f64),
    bound: f64,
}

impl WindowedPairSampler {
    /// The window is clipped to λ ≥ 2λ_p. Fails when the spectrum has no
    /// weight inside it.
    pub fn new(spec: &SourceSpec, window_nm: (f64, f64)) -> Result<Self> {
        let lo = window_nm.0.max(spec.degenerate_wavelength_nm());
        let hi = window_nm.1;
        if !(hi > lo) {
            return Err(Error::Domain(format!(
                "empty Alice sampling window [{}, {}] nm",
                window_nm.0, window_nm.1
            )));
        }
        const PROBES: usize = 64;
        let bound = (0..=PROBES)
            .map(|k| alice_marginal_density(spec, lo + (hi - lo) * k as f64 / PROBES as f64))
            .fold(0.0_f64, f64::max);
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(Error::Domain(format!(
                "source emits nothing inside [{lo}, {hi}] nm"
            )));
        }
        Ok(Self {
            pump_nm: spec.pump_wavelength_nm,
            spec: spec.clone(),
            window: (lo, hi),
            bound,
        })
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhotonPair {
        let (lo, hi) = self.window;
        loop {
            let wl = rng.random_range(lo..hi);
            // The marginal is monotone on λ ≥ 2λ_p, so the probe maximum bounds it.
            if rng.random::<f64>() * self.bound <= alice_marginal_density(&self.spec, wl) {
                let bob = conjugate_wavelength(self.pump_nm, wl).expect("window lies above the pump");
                return PhotonPair {
                    alice_nm: wl,
                    bob_nm: bob,
                };
            }
        }
    }
}
