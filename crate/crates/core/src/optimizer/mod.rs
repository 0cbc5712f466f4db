//! Detuning and phase-offset optimization for maximum channel-pair count.
//!
//! Detuning the analyzers tilts the two-photon phase curve and moves its
//! vertex across the band; the offset φ₀ slides the curve vertically. The
//! scan evaluates every detuning on a grid and, in `Auto` mode, places the
//! ±threshold corridor where it captures the most channel pairs.

mod fit;

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::dispersion::{dispersion_sample, SellmeierModel};
use crate::error::{Error, Result};
use crate::grid::{count_passing_pairs, pair_channels, ChannelPair, EdgeRule, GridSpec};
use crate::phase::{wrap_offset, InterferometerPair};
use crate::source::{conjugate_wavelength, emission_band, SourceSpec};

pub use fit::{fit_phase_model, PhaseFit};

/// Detuning δ = ΔL_A − ΔL_B that equalizes the group delays of both
/// analyzers at λ*_A and λ*_B: ΔL_B·(n_g(λ*_B)/n_g(λ*_A) − 1), in m.
pub fn closed_form_detuning(
    fiber: &SellmeierModel,
    alice_center_nm: f64,
    bob_center_nm: f64,
    delta_l_b: f64,
) -> Result<f64> {
    let ng_a = dispersion_sample(fiber, alice_center_nm)?.group_index;
    let ng_b = dispersion_sample(fiber, bob_center_nm)?.group_index;
    Ok(delta_l_b * (ng_b / ng_a - 1.0))
}

/// Minimax centering: −(max φ + min φ)/2 over the profile.
pub fn optimize_offset(phases: &[f64]) -> Result<f64> {
    let (lo, hi) = phases
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    if phases.is_empty() || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain("offset optimization needs a non-empty finite profile".into()));
    }
    Ok(-0.5 * (hi + lo))
}

/// Offset that places the ±`threshold` corridor over the largest number of
/// pairs. Each entry is the (min, max) relative phase of one pair over its
/// evaluation points. The phase is 2π-periodic, so acceptable offsets are
/// arcs on the circle. Returns `(φ₀, count)` with φ₀ in [−π, π), or `None`
/// when no pair fits the corridor.
pub fn corridor_offset(spans: &[(f64, f64)], threshold: f64) -> Option<(f64, usize)> {
    let mut always = 0usize;
    let mut events: Vec<(f64, i32)> = Vec::with_capacity(4 * spans.len());
    for &(lo, hi) in spans {
        let start = -threshold - lo;
        let len = 2.0 * threshold - (hi - lo);
        if len < 0.0 {
            continue;
        }
        if len >= TAU {
            always += 1;
            continue;
        }
        let a = wrap_offset(start);
        let b = a + len;
        if b < PI {
            events.push((a, 1));
            events.push((b, -1));
        } else {
            events.push((a, 1));
            events.push((PI, -1));
            events.push((-PI, 1));
            events.push((b - TAU, -1));
        }
    }
    if events.is_empty() {
        return (always > 0).then_some((0.0, always));
    }
    // Closed arcs: openings sort before closings at the same position.
    events.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));

    let mut depth = 0i32;
    // (count, width, start, end)
    let mut best: Option<(i32, f64, f64, f64)> = None;
    for (i, &(pos, delta)) in events.iter().enumerate() {
        depth += delta;
        if delta > 0 {
            // Region of constant depth runs until the next event.
            let end = events.get(i + 1).map_or(PI, |e| e.0);
            if events.get(i + 1).is_some_and(|e| e.1 > 0) {
                continue;
            }
            let width = end - pos;
            let better = match best {
                None => true,
                Some((c, w, s, e)) => {
                    depth > c
                        || (depth == c && width > w + 1e-15)
                        || (depth == c
                            && (width - w).abs() <= 1e-15
                            && (0.5 * (pos + end)).abs() < (0.5 * (s + e)).abs())
                }
            };
            if better {
                best = Some((depth, width, pos, end));
            }
        }
    }
    let (count, _, start, end) = best?;
    Some((wrap_offset(0.5 * (start + end)), count as usize + always))
}

/// δ scan grid in m. The scan visits min, min + step, … up to max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaSearch {
    pub min_m: f64,
    pub max_m: f64,
    pub step_m: f64,
}

impl Default for DeltaSearch {
    fn default() -> Self {
        Self {
            min_m: -50e-6,
            max_m: 50e-6,
            step_m: 0.5e-6,
        }
    }
}

impl DeltaSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_m.is_finite() && self.step_m > 0.0) {
            return Err(Error::invalid("delta_step", format!("must be > 0, got {}", self.step_m)));
        }
        if !(self.min_m.is_finite() && self.max_m.is_finite() && self.min_m <= self.max_m) {
            return Err(Error::invalid(
                "delta_range",
                format!("need min ≤ max, got [{}, {}]", self.min_m, self.max_m),
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.max_m - self.min_m) / self.step_m + 1e-9).floor() as usize;
        (0..=n).map(|i| self.min_m + i as f64 * self.step_m).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum OffsetMode {
    Fixed(f64),
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizationMethod {
    ClosedForm,
    Scan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    pub source: SourceSpec,
    pub grid: GridSpec,
    pub fiber: SellmeierModel,
    pub delta_l_b: f64,
    pub threshold_phase: f64,
    pub delta_search: DeltaSearch,
    pub offset_mode: OffsetMode,
    pub edge_rule: EdgeRule,
    /// Phase reference for `Fixed` offsets; defaults to 2λ_p.
    pub reference_nm: Option<f64>,
}

impl OptimizationProblem {
    /// Defaults: 6.7 cm analyzers, 0.14 rad threshold, 100 GHz grid.
    pub fn new(source: SourceSpec, fiber: SellmeierModel) -> Self {
        Self {
            source,
            grid: GridSpec::default(),
            fiber,
            delta_l_b: 0.067,
            threshold_phase: 0.14,
            delta_search: DeltaSearch::default(),
            offset_mode: OffsetMode::Auto,
            edge_rule: EdgeRule::Center,
            reference_nm: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.grid.validate()?;
        self.delta_search.validate()?;
        if !(self.threshold_phase.is_finite() && self.threshold_phase >= 0.0) {
            return Err(Error::invalid(
                "threshold_phase",
                format!("must be ≥ 0, got {}", self.threshold_phase),
            ));
        }
        if !(self.delta_l_b.is_finite() && self.delta_l_b > 0.0) {
            return Err(Error::invalid("delta_l_b", format!("must be > 0, got {}", self.delta_l_b)));
        }
        Ok(())
    }

    pub fn pump_nm(&self) -> f64 {
        self.source.pump_wavelength_nm
    }

    /// Channel pairs over the source's Alice band.
    pub fn channel_pairs(&self) -> Result<Vec<ChannelPair>> {
        let pairs = pair_channels(&self.grid, self.pump_nm(), emission_band(&self.source));
        if pairs.is_empty() {
            return Err(Error::EmptyChannelSet);
        }
        Ok(pairs)
    }

    fn reference_nm(&self) -> f64 {
        self.reference_nm.unwrap_or(self.source.degenerate_wavelength_nm())
    }

    /// Analyzers at detuning δ with φ₀ = 0 relative to the reference wavelength.
    pub fn interferometers(&self, detuning: f64) -> Result<InterferometerPair> {
        InterferometerPair::new(self.delta_l_b, detuning, self.fiber.clone())?
            .calibrated_at(self.pump_nm(), self.reference_nm())
    }

    /// Channel-count-weighted centers of the Alice and Bob bands.
    pub fn band_centers(&self) -> Result<(f64, f64)> {
        let pairs = self.channel_pairs()?;
        let n = pairs.len() as f64;
        let a = pairs.iter().map(|p| p.alice.center_wavelength_nm).sum::<f64>() / n;
        let b = pairs.iter().map(|p| p.bob.center_wavelength_nm).sum::<f64>() / n;
        Ok((a, b))
    }
}

/// Pair count and offset at one detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct DetuningEvaluation {
    pub detuning: f64,
    pub phase_offset: f64,
    pub pair_count: usize,
    pub interferometers: InterferometerPair,
    pub pairs: Vec<ChannelPair>,
}

/// Evaluates one detuning over the given pairs, choosing φ₀ per `mode`.
pub fn evaluate_detuning(
    base: &InterferometerPair,
    pump_nm: f64,
    pairs: &[ChannelPair],
    threshold: f64,
    rule: EdgeRule,
    mode: OffsetMode,
) -> Result<DetuningEvaluation> {
    let interf = match mode {
        OffsetMode::Fixed(phi0) => base.clone().with_phase_offset(phi0),
        OffsetMode::Auto => {
            let curve = base.curve(pump_nm)?;
            let spans = pairs
                .iter()
                .map(|p| {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for wl in p.evaluation_points(rule) {
                        let r = curve.relative(wl)?;
                        lo = lo.min(r);
                        hi = hi.max(r);
                    }
                    Ok((lo, hi))
                })
                .collect::<Result<Vec<_>>>()?;
            let phi0 = match corridor_offset(&spans, threshold) {
                Some((phi0, _)) => phi0,
                // Nothing fits; centre the whole band instead.
                None => optimize_offset(&spans.iter().flat_map(|s| [s.0, s.1]).collect::<Vec<_>>())?,
            };
            base.clone().with_phase_offset(phi0)
        }
    };
    let (pair_count, annotated) = count_passing_pairs(pairs, &interf, pump_nm, threshold, rule)?;
    Ok(DetuningEvaluation {
        detuning: interf.detuning,
        phase_offset: interf.phase_offset,
        pair_count,
        interferometers: interf,
        pairs: annotated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub alice_index: i64,
    pub bob_index: i64,
    pub alice_nm: f64,
    pub bob_nm: f64,
    /// Phase at the Alice channel center.
    pub phase: f64,
    pub qber: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best_delta_m: f64,
    pub best_phase_offset: f64,
    pub pair_count: usize,
    /// Alice channel centers spanned by the passing pairs.
    pub passing_band_nm: Option<(f64, f64)>,
    pub profile: Vec<ProfilePoint>,
    pub method: OptimizationMethod,
}

impl OptimizationResult {
    fn from_evaluation(eval: &DetuningEvaluation, pump_nm: f64, method: OptimizationMethod) -> Result<Self> {
        let profile = eval
            .pairs
            .iter()
            .map(|p| {
                let a = p.assessment.expect("annotated by count_passing_pairs");
                let alice_nm = p.alice.center_wavelength_nm;
                Ok(ProfilePoint {
                    alice_index: p.alice.index,
                    bob_index: p.bob.index,
                    alice_nm,
                    bob_nm: conjugate_wavelength(pump_nm, alice_nm)?,
                    phase: a.center_phase,
                    qber: crate::phase::qber_from_phase(a.center_phase),
                    passes: a.passes,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let passing = profile.iter().filter(|p| p.passes).map(|p| p.alice_nm);
        let passing_band_nm = passing.fold(None, |acc: Option<(f64, f64)>, wl| match acc {
            None => Some((wl, wl)),
            Some((lo, hi)) => Some((lo.min(wl), hi.max(wl))),
        });
        Ok(Self {
            best_delta_m: eval.detuning,
            best_phase_offset: eval.phase_offset,
            pair_count: eval.pair_count,
            passing_band_nm,
            profile,
            method,
        })
    }
}

/// Exhaustive δ scan. Ties in pair count go to the smaller |δ|, then to the
/// more negative δ, so the result does not depend on evaluation order.
pub fn scan_optimize(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    problem.validate()?;
    let pairs = problem.channel_pairs()?;
    let pump = problem.pump_nm();
    let deltas = problem.delta_search.values();
    let counts = deltas
        .par_iter()
        .map(|&d| {
            let base = problem.interferometers(d)?;
            let e = evaluate_detuning(&base, pump, &pairs, problem.threshold_phase, problem.edge_rule, problem.offset_mode)?;
            Ok((d, e.pair_count))
        })
        .collect::<Result<Vec<_>>>()?;
    let (best_delta, _) = counts
        .iter()
        .copied()
        .reduce(|best, cand| {
            let better = cand.1 > best.1
                || (cand.1 == best.1 && cand.0.abs() < best.0.abs())
                || (cand.1 == best.1 && cand.0.abs() == best.0.abs() && cand.0 < best.0);
            if better {
                cand
            } else {
                best
            }
        })
        .expect("delta grid is never empty");
    let base = problem.interferometers(best_delta)?;
    let eval = evaluate_detuning(&base, pump, &pairs, problem.threshold_phase, problem.edge_rule, problem.offset_mode)?;
    OptimizationResult::from_evaluation(&eval, pump, OptimizationMethod::Scan)
}

/// Group-delay-matched detuning at the band centers, with φ₀ per the
/// problem's offset mode.
pub fn closed_form_optimize(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    problem.validate()?;
    let pairs = problem.channel_pairs()?;
    let (a, b) = problem.band_centers()?;
    let delta = closed_form_detuning(&problem.fiber, a, b, problem.delta_l_b)?;
    let base = problem.interferometers(delta)?;
    let eval = evaluate_detuning(
        &base,
        problem.pump_nm(),
        &pairs,
        problem.threshold_phase,
        problem.edge_rule,
        problem.offset_mode,
    )?;
    OptimizationResult::from_evaluation(&eval, problem.pump_nm(), OptimizationMethod::ClosedForm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn silica() -> SellmeierModel {
        SellmeierModel::fused_silica()
    }

    #[test]
    fn closed_form_examples() {
        let f = silica();
        assert_eq!(closed_form_detuning(&f, 1550.0, 1550.0, 0.067).unwrap(), 0.0);
        let d = closed_form_detuning(&f, 1560.0, 1520.5, 0.067).unwrap();
        assert!((d * 1e6 + 12.0).abs() < 3.0, "{}", d * 1e6);
        // Sign follows the group-index ordering.
        let ng_a = dispersion_sample(&f, 1560.0).unwrap().group_index;
        let ng_b = dispersion_sample(&f, 1520.5).unwrap().group_index;
        assert!(ng_a > ng_b && d < 0.0);
        assert!(closed_form_detuning(&f, 5000.0, 1520.5, 0.067).is_err());
    }

    #[test]
    fn closed_form_swap_relation() {
        let f = silica();
        let l = 0.067;
        for (a, b) in [(1560.0, 1520.5), (1600.0, 1490.0), (1545.0, 1535.0)] {
            let ab = closed_form_detuning(&f, a, b, l).unwrap() / l;
            let ba = closed_form_detuning(&f, b, a, l).unwrap() / l;
            assert!(((1.0 + ab) * (1.0 + ba) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn offset_examples() {
        assert_eq!(optimize_offset(&[-0.2, 0.0, 0.2]).unwrap(), 0.0);
        assert_eq!(optimize_offset(&[0.7, 0.7]).unwrap(), -0.7);
        // Vertex-calibrated quadratic reaching −0.28 at the band edge.
        let quad: Vec<f64> = (0..=20).map(|i| -0.28 * (i as f64 / 20.0).powi(2)).collect();
        let phi0 = optimize_offset(&quad).unwrap();
        assert_relative_eq!(phi0, 0.14, epsilon = 1e-15);
        let worst = quad.iter().map(|p| (p + phi0).abs()).fold(0.0, f64::max);
        assert_relative_eq!(worst, 0.14, epsilon = 1e-15);
        assert!(optimize_offset(&[]).is_err());
    }

    #[test]
    fn corridor_picks_the_densest_window() {
        // Five pairs clustered near 0.1, two outliers.
        let spans: Vec<(f64, f64)> = [0.05, 0.08, 0.1, 0.12, 0.15, 1.0, -1.5].iter().map(|&p| (p, p)).collect();
        let (phi0, count) = corridor_offset(&spans, 0.06).unwrap();
        assert_eq!(count, 5);
        assert_relative_eq!(phi0, -0.1, epsilon = 1e-12);
        assert!(corridor_offset(&[(0.0, 1.0)], 0.1).is_none());
    }

    #[test]
    fn corridor_handles_wraparound() {
        let spans = [(PI - 0.05, PI - 0.05), (-PI + 0.05, -PI + 0.05), (0.0, 0.0)];
        let (phi0, count) = corridor_offset(&spans, 0.1).unwrap();
        assert_eq!(count, 2);
        assert!((wrap_offset(PI - 0.05 + phi0)).abs() <= 0.1 + 1e-12);
        assert!(crate::phase::wrap_phase(-PI + 0.05 + phi0).abs() <= 0.1 + 1e-12);
    }

    #[test]
    fn delta_grid_values() {
        let s = DeltaSearch::default();
        let v = s.values();
        assert_eq!(v.len(), 201);
        assert_eq!(v[0], -50e-6);
        assert!((v[200] - 50e-6).abs() < 1e-18);
        assert!(v.iter().any(|d| d.abs() < 1e-18));
        let bad = DeltaSearch { step_m: 0.0, ..s };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_channel_set_is_an_error() {
        let source = SourceSpec { usable_band_nm: Some((1550.2, 1550.3)), ..SourceSpec::default() };
        let problem = OptimizationProblem::new(source, silica());
        assert_eq!(scan_optimize(&problem).unwrap_err(), Error::EmptyChannelSet);
    }
}
