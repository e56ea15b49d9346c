//! Effective support radius `r(t)` of `α_{s,t}A` around `x0`.

use rayon::prelude::*;
use serde::Serialize;

use super::engine::{largest_feasible_k, Dynamics, EngineKind};
use super::fit::{exponential_fit, linear_fit, records, FitResult};
use crate::algebra::LatticeOperator;
use crate::error::{invalid, Result};
use crate::localization::Localizable;
use crate::propagator::PropagatorPlan;
use crate::zero_chain::ZeroChain;

#[derive(Clone, Debug)]
pub struct RadiusSpec {
    pub s: f64,
    pub times: Vec<f64>,
    pub x0: usize,
    pub delta: f64,
    pub tolerance: f64,
    pub engine: EngineKind,
    /// Times over which `r/(t − s)` must increase; `None` takes the later half
    /// of the span before `r` reaches the lattice boundary.
    pub trend_window: Option<(f64, f64)>,
}

/// Minimum number of front points for a trend verdict.
pub const MIN_TREND_POINTS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusRow {
    pub t: f64,
    pub r: f64,
    /// `r` is the largest realized radius, so the true radius may lie beyond the lattice.
    pub at_boundary: bool,
    /// `‖(1 − E_{B_r(x0)})α_{s,t}A‖` at the reported `r`.
    pub tail: f64,
    /// Radius at `δ/10` from the same evolved operator.
    pub r_fine: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RadiusResult {
    pub rows: Vec<RadiusRow>,
    /// Record points of `r(t)` before the boundary: the first time and each
    /// time `r` exceeds all earlier values.
    pub front: Vec<(f64, f64)>,
    /// `r ≈ v t + b` on the front.
    pub linear: Option<FitResult>,
    /// `ln(1 + r) ≈ a t + b` on the front, residual in `r` units.
    pub exponential: Option<FitResult>,
    pub trend_window: (f64, f64),
    /// `(t, r/(t − s))` on front points inside the trend window.
    pub speed_ratios: Vec<(f64, f64)>,
    /// `speed_ratios` has at least [`MIN_TREND_POINTS`] entries and strictly increases.
    pub superlinear: bool,
    /// `δ ≥ 1`: every radius qualifies and `r ≡ 0`.
    pub degenerate: bool,
    /// `r_fine ≥ r` at every time.
    pub monotone_in_delta: bool,
    pub k: f64,
    pub engine: EngineKind,
}

impl RadiusResult {
    pub fn linear_preferred(&self) -> Option<bool> {
        match (&self.linear, &self.exponential) {
            (Some(l), Some(e)) => Some(l.residual <= e.residual),
            _ => None,
        }
    }
}

pub fn support_radius_scan(chain: &ZeroChain, a: &LatticeOperator, spec: &RadiusSpec) -> Result<RadiusResult> {
    if !(spec.delta > 0.0) {
        return invalid(format!("δ must be positive, got {}", spec.delta));
    }
    let graph = chain.context().graph();
    graph.check_site(spec.x0)?;
    let (k, engine) = largest_feasible_k(spec.engine, chain, spec.x0, &[a])?;
    let trunc = chain.truncate(k, spec.x0)?;
    let dynamics = Dynamics::new(&trunc, engine)?;
    let a_obs = dynamics.observable(a)?;
    let cut = spec.delta * a_obs.norm();
    let r_max = graph.realized_distances_from(spec.x0).last().copied().unwrap_or(0.0);

    let rows: Vec<RadiusRow> = spec
        .times
        .par_iter()
        .map(|&t| {
            let plan = PropagatorPlan::new(&trunc, spec.s, t, spec.tolerance)?;
            let profile = dynamics.evolve(&plan, &a_obs)?.tail_profile(graph, spec.x0)?;
            let radius_at = |cut: f64| profile.iter().find(|&&(_, tail)| tail <= cut).map_or(r_max, |&(r, _)| r);
            let r = radius_at(cut);
            let tail = profile.iter().find(|&&(q, _)| q == r).map_or(0.0, |&(_, v)| v);
            Ok(RadiusRow { t, r, at_boundary: r >= r_max, tail, r_fine: radius_at(cut / 10.0) })
        })
        .collect::<Result<_>>()?;

    let points: Vec<(f64, f64)> =
        rows.iter().filter(|r| !r.at_boundary && r.t >= spec.s).map(|r| (r.t, r.r)).collect();
    let front = records(&points);
    let trend_window = spec.trend_window.unwrap_or_else(|| {
        let end = points.iter().map(|p| p.0).fold(spec.s, f64::max);
        (spec.s + (end - spec.s) / 2.0, end)
    });
    let speed_ratios: Vec<(f64, f64)> = front
        .iter()
        .filter(|&&(t, _)| t > spec.s && t >= trend_window.0 && t <= trend_window.1)
        .map(|&(t, r)| (t, r / (t - spec.s)))
        .collect();
    let superlinear =
        speed_ratios.len() >= MIN_TREND_POINTS && speed_ratios.windows(2).all(|w| w[1].1 > w[0].1);
    Ok(RadiusResult {
        linear: linear_fit(&front).ok(),
        exponential: exponential_fit(&front).ok(),
        front,
        trend_window,
        speed_ratios,
        superlinear,
        degenerate: spec.delta >= 1.0,
        monotone_in_delta: rows.iter().all(|r| r.r_fine >= r.r),
        rows,
        k,
        engine,
    })
}
