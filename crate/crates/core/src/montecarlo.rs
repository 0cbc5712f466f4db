//! Event-level coincidence counting.
//!
//! Each generated pair is detected by Alice and Bob with their detector
//! efficiencies. A detected coincidence lands in the interfering s–s/l–l
//! time bin with probability 1/2 (the four path combinations are
//! equiprobable), and inside that bin the ports split as (1 ± cos φ)/2.
//! Dark clicks produce phase-independent coincidences split evenly between
//! the ports, subject to the same time-bin selection.
//!
//! Runs are sharded: shard `i` draws from the ChaCha stream `i` of the
//! master seed, so results depend on the seed and the shard count only.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{ChannelPair, GridSpec};
use crate::nm_to_thz;
use crate::phase::{qber_from_phase, InterferometerPair};
use crate::source::{conjugate_wavelength, sample_pair, SourceSpec, WindowedPairSampler};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub dark_count_probability: f64,
}

impl DetectorModel {
    pub fn new(efficiency: f64, dark_count_probability: f64) -> Result<Self> {
        let d = Self {
            efficiency,
            dark_count_probability,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_count_probability: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::invalid("efficiency", format!("must lie in [0, 1], got {}", self.efficiency)));
        }
        if !(0.0..=1.0).contains(&self.dark_count_probability) {
            return Err(Error::invalid(
                "dark_count_prob",
                format!("must lie in [0, 1], got {}", self.dark_count_probability),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: SourceSpec,
    pub interf: InterferometerPair,
    /// Restricts sampling to pairs inside both passbands of this channel pair.
    pub channel_filter: Option<ChannelPair>,
    pub pairs_generated: u64,
    pub alice_detector: DetectorModel,
    pub bob_detector: DetectorModel,
    pub seed: u64,
    pub shards: usize,
    /// Uses this phase for every pair instead of the interferometer model.
    pub forced_phase: Option<f64>,
    /// Grid for the per-channel breakdown of unfiltered runs.
    pub breakdown_grid: Option<GridSpec>,
}

impl ExperimentConfig {
    pub fn new(source: SourceSpec, interf: InterferometerPair, pairs_generated: u64, seed: u64) -> Self {
        Self {
            source,
            interf,
            channel_filter: None,
            pairs_generated,
            alice_detector: DetectorModel::ideal(),
            bob_detector: DetectorModel::ideal(),
            seed,
            shards: 1,
            forced_phase: None,
            breakdown_grid: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.interf.validate()?;
        self.alice_detector.validate()?;
        self.bob_detector.validate()?;
        if self.pairs_generated == 0 {
            return Err(Error::invalid("pairs", "must be > 0"));
        }
        if self.shards == 0 {
            return Err(Error::invalid("shards", "must be ≥ 1"));
        }
        if let Some(g) = &self.breakdown_grid {
            g.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ChannelTally {
    pub alice_index: i64,
    pub post_selected: u64,
    pub counts_port1: u64,
    pub counts_port2: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TallyResult {
    pub pairs_generated: u64,
    /// Photon-photon coincidences before time-bin selection.
    pub detected_coincidences: u64,
    /// Coincidences involving at least one dark click, before selection.
    pub accidental_coincidences: u64,
    pub post_selected: u64,
    pub counts_port1: u64,
    pub counts_port2: u64,
    pub qber_estimate: Option<f64>,
    pub qber_sigma: Option<f64>,
    /// Per Alice channel, ordered by index. Empty for filtered runs.
    pub per_channel: Vec<ChannelTally>,
}

impl TallyResult {
    /// Adds another run's counts and refreshes the estimates.
    pub fn merge(&mut self, other: &TallyResult) {
        self.pairs_generated += other.pairs_generated;
        self.detected_coincidences += other.detected_coincidences;
        self.accidental_coincidences += other.accidental_coincidences;
        self.post_selected += other.post_selected;
        self.counts_port1 += other.counts_port1;
        self.counts_port2 += other.counts_port2;
        let mut by_index: BTreeMap<i64, ChannelTally> = self.per_channel.iter().map(|c| (c.alice_index, *c)).collect();
        for c in &other.per_channel {
            let e = by_index.entry(c.alice_index).or_insert(ChannelTally {
                alice_index: c.alice_index,
                ..ChannelTally::default()
            });
            e.post_selected += c.post_selected;
            e.counts_port1 += c.counts_port1;
            e.counts_port2 += c.counts_port2;
        }
        self.per_channel = by_index.into_values().collect();
        self.refresh_estimates();
    }

    fn refresh_estimates(&mut self) {
        match estimate_qber(self) {
            Ok((q, s)) => {
                self.qber_estimate = Some(q);
                self.qber_sigma = Some(s);
            }
            Err(_) => {
                self.qber_estimate = None;
                self.qber_sigma = None;
            }
        }
    }
}

/// QBER n₂/(n₁ + n₂) with its binomial standard error. When either port is
/// empty the error is replaced by the bound 1/(n₁ + n₂ + 2).
pub fn estimate_qber(tally: &TallyResult) -> Result<(f64, f64)> {
    qber_with_sigma(tally.counts_port1, tally.counts_port2)
}

pub(crate) fn qber_with_sigma(n1: u64, n2: u64) -> Result<(f64, f64)> {
    let n = n1 + n2;
    if n == 0 {
        return Err(Error::InsufficientStatistics("no post-selected coincidences".into()));
    }
    let nf = n as f64;
    let q = n2 as f64 / nf;
    let sigma = if n1 == 0 || n2 == 0 {
        1.0 / (nf + 2.0)
    } else {
        (q * (1.0 - q) / nf).sqrt()
    };
    Ok((q, sigma))
}

enum PairSource {
    Full,
    Windowed(WindowedPairSampler),
}

struct Shard<'a> {
    config: &'a ExperimentConfig,
    sampler: &'a PairSource,
    curve: crate::phase::PhaseCurve<'a>,
}

impl Shard<'_> {
    fn run(&self, pairs: u64, rng: &mut ChaCha8Rng) -> Result<TallyResult> {
        let cfg = self.config;
        let (eta_a, dark_a) = (cfg.alice_detector.efficiency, cfg.alice_detector.dark_count_probability);
        let (eta_b, dark_b) = (cfg.bob_detector.efficiency, cfg.bob_detector.dark_count_probability);
        let need_wavelength = cfg.forced_phase.is_none() || cfg.breakdown_grid.is_some();
        let mut t = TallyResult {
            pairs_generated: pairs,
            ..TallyResult::default()
        };
        let mut channels: BTreeMap<i64, ChannelTally> = BTreeMap::new();

        for _ in 0..pairs {
            let a_photon = rng.random::<f64>() < eta_a;
            let b_photon = rng.random::<f64>() < eta_b;
            let a_dark = dark_a > 0.0 && rng.random::<f64>() < dark_a;
            let b_dark = dark_b > 0.0 && rng.random::<f64>() < dark_b;

            if a_photon && b_photon {
                t.detected_coincidences += 1;
                if rng.random::<f64>() >= 0.5 {
                    continue;
                }
                let alice_nm = if need_wavelength {
                    Some(match self.sampler {
                        PairSource::Full => sample_pair(&cfg.source, rng).alice_nm,
                        PairSource::Windowed(s) => s.sample(rng).alice_nm,
                    })
                } else {
                    None
                };
                let phi = match (cfg.forced_phase, alice_nm) {
                    (Some(phi), _) => phi,
                    (None, Some(wl)) => self.curve.phase(wl)?,
                    (None, None) => unreachable!("wavelength sampled whenever the phase is modelled"),
                };
                let port2 = rng.random::<f64>() < qber_from_phase(phi);
                t.post_selected += 1;
                if port2 {
                    t.counts_port2 += 1;
                } else {
                    t.counts_port1 += 1;
                }
                if let (Some(grid), Some(wl)) = (&cfg.breakdown_grid, alice_nm) {
                    let idx = grid.nearest_index(nm_to_thz(wl));
                    let c = channels.entry(idx).or_insert(ChannelTally {
                        alice_index: idx,
                        ..ChannelTally::default()
                    });
                    c.post_selected += 1;
                    if port2 {
                        c.counts_port2 += 1;
                    } else {
                        c.counts_port1 += 1;
                    }
                }
            } else if (a_photon || a_dark) && (b_photon || b_dark) {
                t.accidental_coincidences += 1;
                if rng.random::<f64>() >= 0.5 {
                    continue;
                }
                t.post_selected += 1;
                if rng.random::<bool>() {
                    t.counts_port2 += 1;
                } else {
                    t.counts_port1 += 1;
                }
            }
        }
        t.per_channel = channels.into_values().collect();
        Ok(t)
    }
}

fn build_sampler(config: &ExperimentConfig) -> Result<PairSource> {
    let Some(pair) = &config.channel_filter else {
        return Ok(PairSource::Full);
    };
    let pump = config.source.pump_wavelength_nm;
    // λ_B ∈ [b_lo, b_hi]  ⇔  λ_A ∈ [conj(b_hi), conj(b_lo)].
    let (b_lo, b_hi) = pair.bob.passband_nm;
    let a_from_bob = (conjugate_wavelength(pump, b_hi)?, conjugate_wavelength(pump, b_lo)?);
    let (a_lo, a_hi) = pair.alice.passband_nm;
    let window = (a_lo.max(a_from_bob.0), a_hi.min(a_from_bob.1));
    Ok(PairSource::Windowed(WindowedPairSampler::new(&config.source, window)?))
}

/// Runs the coincidence simulation; deterministic in (seed, shards).
pub fn simulate(config: &ExperimentConfig) -> Result<TallyResult> {
    config.validate()?;
    let sampler = build_sampler(config)?;
    let curve = config.interf.curve(config.source.pump_wavelength_nm)?;
    let shard = Shard {
        config,
        sampler: &sampler,
        curve,
    };
    let k = config.shards as u64;
    let base = config.pairs_generated / k;
    let extra = config.pairs_generated % k;
    let parts = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i);
            shard.run(base + u64::from(i < extra), &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = TallyResult::default();
    for p in &parts {
        total.merge(p);
    }
    if config.channel_filter.is_some() {
        total.per_channel.clear();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::SellmeierModel;
    use crate::grid::pair_channels;

    fn interf() -> InterferometerPair {
        InterferometerPair::balanced(0.067, SellmeierModel::fused_silica())
            .unwrap()
            .calibrated_at(770.0, 1540.0)
            .unwrap()
    }

    #[test]
    fn zero_phase_ideal_detectors_never_err() {
        let mut cfg = ExperimentConfig::new(SourceSpec::default(), interf(), 20_000, 3);
        cfg.forced_phase = Some(0.0);
        let t = simulate(&cfg).unwrap();
        assert_eq!(t.counts_port2, 0);
        assert_eq!(t.qber_estimate, Some(0.0));
        assert_eq!(t.detected_coincidences, 20_000);
        assert_eq!(t.counts_port1 + t.counts_port2, t.post_selected);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let mut cfg = ExperimentConfig::new(SourceSpec::default(), interf(), 50_000, 11);
        cfg.alice_detector = DetectorModel::new(0.2, 1e-3).unwrap();
        cfg.bob_detector = DetectorModel::new(0.25, 1e-3).unwrap();
        cfg.breakdown_grid = Some(GridSpec::default());
        cfg.shards = 3;
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
    }

    #[test]
    fn estimate_qber_examples() {
        let t = TallyResult { counts_port1: 1000, ..TallyResult::default() };
        let (q, s) = estimate_qber(&t).unwrap();
        assert_eq!(q, 0.0);
        assert!((s - 1e-3).abs() < 1e-5);
        let t = TallyResult { counts_port1: 400, counts_port2: 400, ..TallyResult::default() };
        let (q, s) = estimate_qber(&t).unwrap();
        assert_eq!(q, 0.5);
        assert_eq!(s, (0.25_f64 / 800.0).sqrt());
        assert!(matches!(estimate_qber(&TallyResult::default()), Err(Error::InsufficientStatistics(_))));
    }

    #[test]
    fn filtered_runs_stay_inside_the_pair() {
        let pairs = pair_channels(&GridSpec::default(), 770.0, (1541.0, 1579.0));
        let pair = pairs.iter().find(|p| (p.alice.center_wavelength_nm - 1553.0).abs() < 0.5).unwrap();
        let mut cfg = ExperimentConfig::new(SourceSpec::default(), interf(), 200_000, 5);
        cfg.channel_filter = Some(pair.clone());
        let t = simulate(&cfg).unwrap();
        assert!(t.per_channel.is_empty());
        let phi = crate::phase::two_photon_phase(&cfg.interf, 770.0, pair.alice.center_wavelength_nm).unwrap();
        let (q, s) = estimate_qber(&t).unwrap();
        assert!((q - qber_from_phase(phi)).abs() < 4.0 * s, "{q} vs {}", qber_from_phase(phi));
    }

    #[test]
    fn unfiltered_runs_break_down_by_channel() {
        let mut cfg = ExperimentConfig::new(SourceSpec::default(), interf(), 100_000, 9);
        cfg.breakdown_grid = Some(GridSpec::default());
        let t = simulate(&cfg).unwrap();
        assert!(t.per_channel.len() > 20);
        assert!(t.per_channel.windows(2).all(|w| w[0].alice_index < w[1].alice_index));
        let sum: u64 = t.per_channel.iter().map(|c| c.post_selected).sum();
        assert_eq!(sum, t.post_selected);
    }

    #[test]
    fn dark_counts_add_symmetric_noise() {
        let mut cfg = ExperimentConfig::new(SourceSpec::default(), interf(), 200_000, 21);
        cfg.forced_phase = Some(0.0);
        cfg.alice_detector = DetectorModel::new(0.0, 0.5).unwrap();
        cfg.bob_detector = DetectorModel::new(0.0, 0.5).unwrap();
        let t = simulate(&cfg).unwrap();
        assert_eq!(t.detected_coincidences, 0);
        let (q, s) = estimate_qber(&t).unwrap();
        assert!((q - 0.5).abs() < 4.0 * s);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = ExperimentConfig::new(SourceSpec::default(), interf(), 0, 1);
        assert!(simulate(&cfg).is_err());
        assert!(DetectorModel::new(1.2, 0.0).is_err());
        assert!(DetectorModel::new(0.5, -0.1).is_err());
    }
}
