//! The five commands, each producing a payload plus summary lines.

use franson_dwdm::optimizer::{closed_form_optimize, evaluate_detuning, DetuningEvaluation};
use franson_dwdm::{
    conjugate_wavelength, dispersion_sample, emission_band, nm_to_thz, scan_optimize, simulate,
    ExperimentConfig, OffsetMode, Result, SellmeierModel,
};
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::output::{Cell, Table};
use crate::svg::PhasePlot;

pub enum Payload {
    Table(Table),
    /// Fixed-structure JSON; `table` is what CSV output falls back to.
    Document { json: Value, table: Table },
}

pub struct Report {
    pub payload: Payload,
    pub summary: Vec<String>,
    pub svg: Option<String>,
}

/// Analyzers at the configured detuning, with φ₀ fixed or chosen per pair set.
fn configured(r: &Resolved) -> Result<DetuningEvaluation> {
    let p = &r.problem;
    let pairs = p.channel_pairs()?;
    let base = p.interferometers(r.detuning_m)?;
    evaluate_detuning(&base, p.pump_nm(), &pairs, p.threshold_phase, p.edge_rule, r.offset)
}

fn offset_summary(r: &Resolved, eval: &DetuningEvaluation) -> String {
    let mode = match r.offset {
        OffsetMode::Auto => "auto",
        OffsetMode::Fixed(_) => "fixed",
    };
    format!("phase_offset_rad={} ({mode})", crate::output::fmt_num(eval.phase_offset))
}

pub fn sweep(r: &Resolved, want_svg: bool) -> Result<Report> {
    let eval = configured(r)?;
    let p = &r.problem;
    let pump = p.pump_nm();
    let curve = eval.interferometers.curve(pump)?;
    let (lo, hi) = emission_band(&p.source);
    let steps = ((hi - lo) / r.sweep_step_nm + 1e-9).floor() as usize;
    let mut table = Table::new(&[
        "lambda_A_nm",
        "lambda_B_nm",
        "phi_rad",
        "qber",
        "channel_index_A",
        "channel_index_B",
        "pass",
    ]);
    let mut points = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let a = lo + k as f64 * r.sweep_step_nm;
        let b = conjugate_wavelength(pump, a)?;
        let phi = curve.phase(a)?;
        points.push((a, phi));
        table.push(vec![
            a.into(),
            b.into(),
            phi.into(),
            franson_dwdm::qber_from_phase(phi).into(),
            p.grid.nearest_index(nm_to_thz(a)).into(),
            p.grid.nearest_index(nm_to_thz(b)).into(),
            (phi.abs() <= p.threshold_phase).into(),
        ]);
    }
    let svg = want_svg.then(|| {
        PhasePlot {
            title: "Two-photon phase across the source band",
            curve: &points,
            threshold: p.threshold_phase,
            markers: &[],
        }
        .render()
    });
    Ok(Report {
        payload: Payload::Table(table),
        summary: vec![
            format!("rows={}", steps + 1),
            offset_summary(r, &eval),
        ],
        svg,
    })
}

pub fn plan(r: &Resolved, want_svg: bool) -> Result<Report> {
    let eval = configured(r)?;
    let p = &r.problem;
    let mut table = Table::new(&[
        "alice_index",
        "bob_index",
        "alice_center_nm",
        "bob_center_nm",
        "alice_center_THz",
        "bob_center_THz",
        "frequency_sum_error_GHz",
        "misaligned",
        "center_phase_rad",
        "worst_phase_rad",
        "worst_qber",
        "pass",
    ]);
    let mut markers = Vec::new();
    for pair in &eval.pairs {
        let a = pair.assessment.expect("pairs are annotated");
        markers.push((pair.alice.center_wavelength_nm, a.center_phase, a.passes));
        table.push(vec![
            pair.alice.index.into(),
            pair.bob.index.into(),
            pair.alice.center_wavelength_nm.into(),
            pair.bob.center_wavelength_nm.into(),
            pair.alice.center_frequency_thz.into(),
            pair.bob.center_frequency_thz.into(),
            pair.frequency_sum_error_ghz.into(),
            pair.misaligned.into(),
            a.center_phase.into(),
            a.worst_phase.into(),
            a.worst_qber.into(),
            a.passes.into(),
        ]);
    }
    let svg = if want_svg {
        let curve = eval.interferometers.curve(p.pump_nm())?;
        let (lo, hi) = emission_band(&p.source);
        let points = (0..=400)
            .map(|k| {
                let wl = lo + (hi - lo) * k as f64 / 400.0;
                Ok((wl, curve.phase(wl)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Some(
            PhasePlot {
                title: "Channel-pair plan",
                curve: &points,
                threshold: p.threshold_phase,
                markers: &markers,
            }
            .render(),
        )
    } else {
        None
    };
    Ok(Report {
        payload: Payload::Table(table),
        summary: vec![
            format!("passing_pairs={}", eval.pair_count),
            format!("total_pairs={}", eval.pairs.len()),
            offset_summary(r, &eval),
        ],
        svg,
    })
}

fn band_value(band: Option<(f64, f64)>) -> Value {
    band.map_or(Value::Null, |(lo, hi)| json!([lo, hi]))
}

pub fn optimize(r: &Resolved) -> Result<Report> {
    let scan = scan_optimize(&r.problem)?;
    let cf = closed_form_optimize(&r.problem)?;
    let mut table = Table::new(&["alice_index", "bob_index", "alice_nm", "bob_nm", "phase_rad", "qber", "pass"]);
    let mut profile = Vec::new();
    for p in &scan.profile {
        table.push(vec![
            p.alice_index.into(),
            p.bob_index.into(),
            p.alice_nm.into(),
            p.bob_nm.into(),
            p.phase.into(),
            p.qber.into(),
            p.passes.into(),
        ]);
        profile.push(json!({
            "alice_index": p.alice_index,
            "bob_index": p.bob_index,
            "alice_nm": p.alice_nm,
            "bob_nm": p.bob_nm,
            "phase_rad": p.phase,
            "qber": p.qber,
            "pass": p.passes,
        }));
    }
    let json = json!({
        "method": "scan",
        "best_delta_um": scan.best_delta_m * 1e6,
        "best_phase_offset_rad": scan.best_phase_offset,
        "pair_count": scan.pair_count,
        "passing_band_nm": band_value(scan.passing_band_nm),
        "closed_form": {
            "delta_um": cf.best_delta_m * 1e6,
            "phase_offset_rad": cf.best_phase_offset,
            "pair_count": cf.pair_count,
            "passing_band_nm": band_value(cf.passing_band_nm),
        },
        "profile": profile,
    });
    let fmt = crate::output::fmt_num;
    Ok(Report {
        payload: Payload::Document { json, table },
        summary: vec![
            format!("best_delta_um={}", fmt(scan.best_delta_m * 1e6)),
            format!("best_phase_offset_rad={}", fmt(scan.best_phase_offset)),
            format!("pair_count={}", scan.pair_count),
            format!("closed_form_delta_um={}", fmt(cf.best_delta_m * 1e6)),
            format!("closed_form_pair_count={}", cf.pair_count),
        ],
        svg: None,
    })
}

/// One filtered run per channel pair; pair `k` in plan order uses seed + k.
pub fn simulate_channels(r: &Resolved, seed: u64) -> Result<Report> {
    let eval = configured(r)?;
    let p = &r.problem;
    let s = &r.simulation;
    let mut table = Table::new(&[
        "alice_index",
        "bob_index",
        "alice_center_nm",
        "bob_center_nm",
        "model_phase_rad",
        "model_qber",
        "pairs_generated",
        "detected_coincidences",
        "accidental_coincidences",
        "post_selected",
        "counts_port1",
        "counts_port2",
        "qber",
        "sigma",
    ]);
    let mut events = 0u64;
    for (k, pair) in eval.pairs.iter().enumerate() {
        let mut cfg = ExperimentConfig::new(p.source.clone(), eval.interferometers.clone(), s.pairs, seed.wrapping_add(k as u64));
        cfg.channel_filter = Some(pair.clone());
        cfg.alice_detector = s.alice;
        cfg.bob_detector = s.bob;
        cfg.shards = s.shards;
        let t = simulate(&cfg)?;
        events += t.post_selected;
        let a = pair.assessment.expect("pairs are annotated");
        table.push(vec![
            pair.alice.index.into(),
            pair.bob.index.into(),
            pair.alice.center_wavelength_nm.into(),
            pair.bob.center_wavelength_nm.into(),
            a.center_phase.into(),
            franson_dwdm::qber_from_phase(a.center_phase).into(),
            t.pairs_generated.into(),
            t.detected_coincidences.into(),
            t.accidental_coincidences.into(),
            t.post_selected.into(),
            t.counts_port1.into(),
            t.counts_port2.into(),
            Cell::from(t.qber_estimate),
            Cell::from(t.qber_sigma),
        ]);
    }
    Ok(Report {
        payload: Payload::Table(table),
        summary: vec![
            format!("channel_pairs={}", eval.pairs.len()),
            format!("post_selected_total={events}"),
            format!("seed={seed}"),
        ],
        svg: None,
    })
}

pub fn dispersion(fiber: &SellmeierModel, range_nm: (f64, f64), step_nm: f64) -> Result<Report> {
    let (lo, hi) = range_nm;
    let steps = ((hi - lo) / step_nm + 1e-9).floor() as usize;
    let mut table = Table::new(&[
        "wavelength_nm",
        "n",
        "dn_dlambda_per_um",
        "d2n_dlambda2_per_um2",
        "group_index",
        "group_velocity_m_per_s",
    ]);
    for k in 0..=steps {
        let d = dispersion_sample(fiber, lo + k as f64 * step_nm)?;
        table.push(vec![
            d.wavelength_nm.into(),
            d.n.into(),
            d.dn_dlambda.into(),
            d.d2n_dlambda2.into(),
            d.group_index.into(),
            d.group_velocity.into(),
        ]);
    }
    Ok(Report {
        payload: Payload::Table(table),
        summary: vec![format!("model={}", fiber.name()), format!("rows={}", steps + 1)],
        svg: None,
    })
}
