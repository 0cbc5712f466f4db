//! Least-squares fit of measured phases to the balanced-analyzer model
//! φ(λ_A) = k·(λ_A − λ_v)²/(λ_A − λ_p) + c.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseFit {
    /// Coefficient k of the (λ_A − λ_v)²/(λ_A − λ_p) factor, in rad/nm.
    pub curvature: f64,
    pub vertex_nm: f64,
    pub offset: f64,
    pub residual_rms: f64,
}

fn shape(wl: f64, vertex: f64, pump: f64) -> f64 {
    (wl - vertex).powi(2) / (wl - pump)
}

/// Linear least squares for (k, c) at a fixed vertex; returns (k, c, rss).
fn solve_linear(data: &[(f64, f64)], vertex: f64, pump: f64) -> Option<(f64, f64, f64)> {
    let n = data.len();
    let a = DMatrix::from_fn(n, 2, |i, j| if j == 0 { shape(data[i].0, vertex, pump) } else { 1.0 });
    let y = DVector::from_iterator(n, data.iter().map(|d| d.1));
    let sol = a.clone().svd(true, true).solve(&y, 1e-14).ok()?;
    let rss = (a * &sol - y).norm_squared();
    Some((sol[0], sol[1], rss))
}

pub fn fit_phase_model(data: &[(f64, f64)], pump_nm: f64) -> Result<PhaseFit> {
    if data.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", data.len())));
    }
    if let Some(&(wl, _)) = data.iter().find(|d| !(d.0 > pump_nm) || !d.1.is_finite()) {
        return Err(Error::Domain(format!(
            "fit data point at {wl} nm is not finite or not above the pump {pump_nm} nm"
        )));
    }
    let mut wls: Vec<f64> = data.iter().map(|d| d.0).collect();
    wls.sort_by(f64::total_cmp);
    wls.dedup();
    if wls.len() < 3 {
        return Err(Error::Fit("degenerate design: fewer than 3 distinct wavelengths".into()));
    }

    let n = data.len() as f64;
    let mean = data.iter().map(|d| d.1).sum::<f64>() / n;
    let spread = data.iter().map(|d| (d.1 - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-14 * mean.abs().max(1.0) {
        return Ok(PhaseFit {
            curvature: 0.0,
            vertex_nm: 2.0 * pump_nm,
            offset: mean,
            residual_rms: (data.iter().map(|d| (d.1 - mean).powi(2)).sum::<f64>() / n).sqrt(),
        });
    }

    // Variable projection over the vertex gives a starting point; a damped
    // Gauss-Newton pass then refines all three parameters together.
    let (wmin, wmax) = (wls[0], wls[wls.len() - 1]);
    let span = wmax - wmin;
    let lo = (wmin - span).max(pump_nm + 1e-6 * pump_nm);
    let hi = wmax + span;
    const GRID: usize = 800;
    let mut start = None::<(f64, f64, f64, f64)>;
    for i in 0..=GRID {
        let v = lo + (hi - lo) * i as f64 / GRID as f64;
        if let Some((k, c, rss)) = solve_linear(data, v, pump_nm) {
            if start.is_none_or(|s| rss < s.3) {
                start = Some((k, v, c, rss));
            }
        }
    }
    let (k0, v0, c0, _) = start.ok_or_else(|| Error::Fit("no admissible vertex".into()))?;
    let mut p = Vector3::new(k0, v0, c0);

    let residuals = |p: &Vector3<f64>| -> DVector<f64> {
        DVector::from_iterator(
            data.len(),
            data.iter().map(|&(wl, phi)| p[0] * shape(wl, p[1], pump_nm) + p[2] - phi),
        )
    };
    let jacobian = |p: &Vector3<f64>| -> DMatrix<f64> {
        DMatrix::from_fn(data.len(), 3, |i, j| {
            let wl = data[i].0;
            match j {
                0 => shape(wl, p[1], pump_nm),
                1 => -2.0 * p[0] * (wl - p[1]) / (wl - pump_nm),
                _ => 1.0,
            }
        })
    };

    let mut r = residuals(&p);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let j = jacobian(&p);
        let jtj: Matrix3<f64> = (j.transpose() * &j).fixed_view::<3, 3>(0, 0).into_owned();
        let g: Vector3<f64> = (j.transpose() * &r).fixed_rows::<3>(0).into_owned();
        if jtj.determinant().abs() <= f64::EPSILON * jtj.norm().powi(3) {
            return Err(Error::Fit("degenerate design: model parameters are not identifiable".into()));
        }
        let mut damped = jtj;
        for d in 0..3 {
            damped[(d, d)] *= 1.0 + lambda;
        }
        let Some(step) = damped.lu().solve(&(-g)) else {
            return Err(Error::Fit("singular normal equations".into()));
        };
        let trial = p + step;
        let r_trial = residuals(&trial);
        let trial_cost = r_trial.norm_squared();
        if trial_cost <= cost {
            let converged = step.iter().zip(trial.iter()).all(|(s, x)| s.abs() <= 1e-15 * x.abs().max(1.0));
            p = trial;
            r = r_trial;
            let done = converged || cost - trial_cost <= 1e-30;
            cost = trial_cost;
            lambda = (lambda * 0.3).max(1e-12);
            if done {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    Ok(PhaseFit {
        curvature: p[0],
        vertex_nm: p[1],
        offset: p[2],
        residual_rms: (cost / n).sqrt(),
    })
}
