//! ITU DWDM channelization and channel-pair assessment.
//!
//! Grid arithmetic is done in frequency: channel k sits at
//! anchor + k·spacing. Wavelengths are derived from the vacuum light speed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{qber_from_phase, InterferometerPair};
use crate::{nm_to_thz, thz_to_nm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub anchor_thz: f64,
    pub spacing_ghz: f64,
    /// Flat-top passband width; at most the spacing.
    pub passband_ghz: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::itu(100.0)
    }
}

impl GridSpec {
    /// ITU grid anchored at 193.1 THz with passband equal to the spacing.
    pub fn itu(spacing_ghz: f64) -> Self {
        Self {
            anchor_thz: 193.1,
            spacing_ghz,
            passband_ghz: spacing_ghz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.anchor_thz.is_finite() && self.anchor_thz > 0.0) {
            return Err(Error::invalid("anchor_THz", format!("must be > 0, got {}", self.anchor_thz)));
        }
        if !(self.spacing_ghz.is_finite() && self.spacing_ghz > 0.0) {
            return Err(Error::invalid("spacing_GHz", format!("must be > 0, got {}", self.spacing_ghz)));
        }
        if !(self.passband_ghz > 0.0 && self.passband_ghz <= self.spacing_ghz) {
            return Err(Error::invalid(
                "passband_GHz",
                format!("must lie in (0, spacing], got {}", self.passband_ghz),
            ));
        }
        Ok(())
    }

    fn spacing_thz(&self) -> f64 {
        self.spacing_ghz / 1000.0
    }

    pub fn center_frequency_thz(&self, index: i64) -> f64 {
        self.anchor_thz + index as f64 * self.spacing_thz()
    }

    pub fn nearest_index(&self, frequency_thz: f64) -> i64 {
        ((frequency_thz - self.anchor_thz) / self.spacing_thz()).round() as i64
    }

    pub fn channel(&self, index: i64) -> Channel {
        let nu = self.center_frequency_thz(index);
        let half = 0.5 * self.passband_ghz * 1e-3;
        Channel {
            index,
            center_frequency_thz: nu,
            center_wavelength_nm: thz_to_nm(nu),
            passband_nm: (thz_to_nm(nu + half), thz_to_nm(nu - half)),
        }
    }

    pub fn nearest_channel(&self, frequency_thz: f64) -> Channel {
        self.channel(self.nearest_index(frequency_thz))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Channel {
    /// Offset from the anchor in units of the spacing.
    pub index: i64,
    pub center_frequency_thz: f64,
    pub center_wavelength_nm: f64,
    /// Passband edges (short, long) in nm.
    pub passband_nm: (f64, f64),
}

/// All channels whose center wavelength lies in `band_nm`, ordered by index.
pub fn channels_in_band(grid: &GridSpec, band_nm: (f64, f64)) -> Vec<Channel> {
    let (lo, hi) = band_nm;
    if !(hi >= lo) || lo <= 0.0 {
        return Vec::new();
    }
    let nu_lo = nm_to_thz(hi);
    let nu_hi = nm_to_thz(lo);
    let first = ((nu_lo - grid.anchor_thz) / grid.spacing_thz()).floor() as i64 - 1;
    let last = ((nu_hi - grid.anchor_thz) / grid.spacing_thz()).ceil() as i64 + 1;
    (first..=last)
        .map(|k| grid.channel(k))
        .filter(|c| c.center_wavelength_nm >= lo && c.center_wavelength_nm <= hi)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EdgeRule {
    /// Evaluate the phase at the Alice channel center only.
    #[default]
    Center,
    /// Evaluate at the center and both passband edges.
    Edges,
}

/// Outcome of assessing one pair against a phase threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairAssessment {
    /// Two-photon phase at the Alice channel center, in (−π, π].
    pub center_phase: f64,
    /// Largest |φ| over the evaluation points.
    pub worst_phase: f64,
    pub worst_qber: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelPair {
    /// Long-wavelength (lower frequency) channel.
    pub alice: Channel,
    pub bob: Channel,
    /// |ν_A + ν_B − ν_p| in GHz after snapping Bob to the grid.
    pub frequency_sum_error_ghz: f64,
    /// Set when the snap error exceeds half the passband.
    pub misaligned: bool,
    pub assessment: Option<PairAssessment>,
}

impl ChannelPair {
    /// Alice wavelengths at which the phase is evaluated under `rule`.
    pub fn evaluation_points(&self, rule: EdgeRule) -> Vec<f64> {
        match rule {
            EdgeRule::Center => vec![self.alice.center_wavelength_nm],
            EdgeRule::Edges => vec![
                self.alice.passband_nm.0,
                self.alice.center_wavelength_nm,
                self.alice.passband_nm.1,
            ],
        }
    }

    pub fn passes(&self) -> bool {
        self.assessment.is_some_and(|a| a.passes)
    }
}

/// Pairs every Alice channel in `alice_band_nm` with the grid channel
/// nearest to ν_p − ν_A. Alice channels whose partner would sit at a lower
/// frequency are mirror images of an existing pair and are skipped.
pub fn pair_channels(grid: &GridSpec, pump_nm: f64, alice_band_nm: (f64, f64)) -> Vec<ChannelPair> {
    let nu_p = nm_to_thz(pump_nm);
    channels_in_band(grid, alice_band_nm)
        .into_iter()
        .filter_map(|alice| {
            let bob = grid.nearest_channel(nu_p - alice.center_frequency_thz);
            if bob.index < alice.index {
                return None;
            }
            let err = (alice.center_frequency_thz + bob.center_frequency_thz - nu_p).abs() * 1e3;
            Some(ChannelPair {
                alice,
                bob,
                frequency_sum_error_ghz: err,
                misaligned: err > 0.5 * grid.passband_ghz,
                assessment: None,
            })
        })
        .collect()
}

/// Annotates each pair with its worst-case phase and counts those with
/// worst |φ| ≤ `threshold_phase`.
pub fn count_passing_pairs(
    pairs: &[ChannelPair],
    interf: &InterferometerPair,
    pump_nm: f64,
    threshold_phase: f64,
    rule: EdgeRule,
) -> Result<(usize, Vec<ChannelPair>)> {
    let curve = interf.curve(pump_nm)?;
    let annotated = pairs
        .iter()
        .map(|pair| {
            let center_phase = curve.phase(pair.alice.center_wavelength_nm)?;
            let mut worst = center_phase.abs();
            for wl in pair.evaluation_points(rule) {
                worst = worst.max(curve.phase(wl)?.abs());
            }
            let mut out = pair.clone();
            out.assessment = Some(PairAssessment {
                center_phase,
                worst_phase: worst,
                worst_qber: qber_from_phase(worst),
                passes: worst <= threshold_phase,
            });
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let count = annotated.iter().filter(|p| p.passes()).count();
    Ok((count, annotated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::SellmeierModel;
    use crate::source::conjugate_wavelength;

    #[test]
    fn empty_band_gives_no_channels() {
        assert!(channels_in_band(&GridSpec::default(), (1550.0, 1540.0)).is_empty());
        assert!(channels_in_band(&GridSpec::default(), (1550.2, 1550.3)).is_empty());
    }

    #[test]
    fn sixteen_channels_between_1540_and_1553() {
        let ch = channels_in_band(&GridSpec::default(), (1540.0, 1553.0));
        assert_eq!(ch.len(), 16);
        assert!(ch.windows(2).all(|w| w[0].index + 1 == w[1].index));
        assert_eq!(ch[0].index, 0);
        let dense = channels_in_band(&GridSpec::itu(12.5), (1540.0, 1553.0));
        // 8× up to band-edge rounding (one extra 12.5 GHz slot at each end).
        assert!((dense.len() as i64 - 8 * 16).abs() <= 7, "{}", dense.len());
    }

    #[test]
    fn center_frequency_is_anchor_plus_index_times_spacing() {
        let g = GridSpec::itu(12.5);
        for k in [-300, -1, 0, 7, 250] {
            let c = g.channel(k);
            assert_eq!(c.center_frequency_thz, g.anchor_thz + k as f64 * (12.5 / 1000.0));
            assert_eq!(g.nearest_index(c.center_frequency_thz), k);
            assert!(c.passband_nm.0 < c.center_wavelength_nm && c.center_wavelength_nm < c.passband_nm.1);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::default().validate().is_ok());
        let g = GridSpec { passband_ghz: 150.0, ..GridSpec::default() };
        assert!(g.validate().is_err());
        let g = GridSpec { spacing_ghz: 0.0, ..GridSpec::default() };
        assert!(g.validate().is_err());
    }

    #[test]
    fn degenerate_channel_pairs_with_itself_when_on_grid() {
        // Pump placed so that ν_p/2 is exactly the 194.7 THz channel.
        let g = GridSpec::default();
        let pump = thz_to_nm(2.0 * 194.7);
        let pairs = pair_channels(&g, pump, (2.0 * pump - 0.01, 1560.0));
        let first = pairs.last().unwrap();
        assert_eq!(first.alice.index, first.bob.index);
        assert!(first.frequency_sum_error_ghz < 1e-6);
    }

    #[test]
    fn pairs_conserve_frequency_within_a_spacing() {
        let g = GridSpec::default();
        let nu_p = nm_to_thz(770.0);
        let pairs = pair_channels(&g, 770.0, (1540.0, 1579.0));
        assert!(!pairs.is_empty());
        for p in &pairs {
            assert!(p.alice.center_frequency_thz <= p.bob.center_frequency_thz);
            let sum = p.alice.center_frequency_thz + p.bob.center_frequency_thz;
            assert!((sum - nu_p).abs() * 1e3 <= 0.5 * g.spacing_ghz + 1e-9);
            assert!(!p.misaligned);
        }
        let near_1553 = pairs
            .iter()
            .min_by(|a, b| {
                (a.alice.center_wavelength_nm - 1553.0)
                    .abs()
                    .total_cmp(&(b.alice.center_wavelength_nm - 1553.0).abs())
            })
            .unwrap();
        assert!((near_1553.bob.center_wavelength_nm - 1527.0).abs() < 1.0);
        let exact = conjugate_wavelength(770.0, near_1553.alice.center_wavelength_nm).unwrap();
        assert!((near_1553.bob.center_wavelength_nm - exact).abs() < 0.8);
    }

    #[test]
    fn zero_threshold_passes_nothing_generic() {
        let interf = InterferometerPair::new(0.067, -3e-6, SellmeierModel::fused_silica())
            .unwrap()
            .with_phase_offset(0.3);
        let pairs = pair_channels(&GridSpec::default(), 770.0, (1541.0, 1579.0));
        let (n, annotated) = count_passing_pairs(&pairs, &interf, 770.0, 0.0, EdgeRule::Center).unwrap();
        assert_eq!(n, 0);
        assert_eq!(annotated.len(), pairs.len());
        for p in &annotated {
            let a = p.assessment.unwrap();
            assert_eq!(a.passes, a.worst_qber <= qber_from_phase(0.0));
        }
    }

    #[test]
    fn out_of_range_channels_propagate_errors() {
        let narrow = SellmeierModel::new("narrow", vec![], (1500.0, 1550.0)).unwrap();
        let interf = InterferometerPair::new(0.067, 0.0, narrow).unwrap();
        let pairs = pair_channels(&GridSpec::default(), 770.0, (1541.0, 1579.0));
        assert!(count_passing_pairs(&pairs, &interf, 770.0, 0.14, EdgeRule::Center).is_err());
    }
}
