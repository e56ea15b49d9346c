//! Growth of the localized norm `‖α_{s,t}A‖_{ν,x0}` in time.

use rayon::prelude::*;
use serde::Serialize;

use super::engine::{largest_feasible_k, Dynamics, EngineKind};
use super::fit::{linear_fit, rms, FitResult};
use super::check_nu;
use crate::algebra::LatticeOperator;
use crate::error::{invalid, Result};
use crate::localization::{localized_norm, DecayFunction};
use crate::propagator::PropagatorPlan;
use crate::zero_chain::ZeroChain;

#[derive(Clone, Debug)]
pub struct GrowthSpec {
    pub s: f64,
    pub times: Vec<f64>,
    pub x0: usize,
    pub nu: f64,
    pub mu: f64,
    /// Abscissa scale of the fit: `ln N` is fitted against `C_Φ |t − s|`.
    pub c_phi: f64,
    pub tolerance: f64,
    pub engine: EngineKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthRow {
    pub t: f64,
    pub value: f64,
    /// `value / ‖A‖_{ν,x0}`.
    pub ratio: f64,
}

/// Smallest upward shift of the least-squares line that bounds every point.
#[derive(Clone, Debug, Serialize)]
pub struct Envelope {
    pub slope: f64,
    pub intercept: f64,
    /// `max_t (e^{envelope(t)} − N(t)) / N(t)`.
    pub max_relative_gap: f64,
    /// RMS of `(e^{fit(t)} − N(t)) / N(t)` for the unshifted fit.
    pub relative_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthResult {
    pub rows: Vec<GrowthRow>,
    /// `‖A‖_{ν,x0}` evaluated directly.
    pub anchor: f64,
    /// `|N(s) − ‖A‖_{ν,x0}|`, when `s` is on the grid.
    pub anchor_error: Option<f64>,
    pub fit: Option<FitResult>,
    pub envelope: Option<Envelope>,
    pub k: f64,
    pub engine: EngineKind,
}

pub fn nu_norm_growth_scan(chain: &ZeroChain, a: &LatticeOperator, spec: &GrowthSpec) -> Result<GrowthResult> {
    check_nu(spec.nu, spec.mu)?;
    if !(spec.c_phi >= 0.0) {
        return invalid(format!("C_Φ must be ≥ 0, got {}", spec.c_phi));
    }
    let graph = chain.context().graph();
    let f = DecayFunction::power_law(spec.nu);
    let anchor = localized_norm(a, &f, graph, spec.x0)?;
    let (k, engine) = largest_feasible_k(spec.engine, chain, spec.x0, &[a])?;
    let trunc = chain.truncate(k, spec.x0)?;
    let dynamics = Dynamics::new(&trunc, engine)?;
    let a_obs = dynamics.observable(a)?;

    let rows: Vec<GrowthRow> = spec
        .times
        .par_iter()
        .map(|&t| {
            let plan = PropagatorPlan::new(&trunc, spec.s, t, spec.tolerance)?;
            let value = dynamics.evolve(&plan, &a_obs)?.localized_norm(&f, graph, spec.x0)?;
            Ok(GrowthRow { t, value, ratio: value / anchor })
        })
        .collect::<Result<_>>()?;

    let anchor_error = rows.iter().find(|r| r.t == spec.s).map(|r| (r.value - anchor).abs());
    let x_of = |t: f64| spec.c_phi * (t - spec.s).abs();
    let points: Vec<(f64, f64)> = rows.iter().filter(|r| r.value > 0.0).map(|r| (x_of(r.t), r.value.ln())).collect();
    let fit = linear_fit(&points).ok();
    let envelope = fit.as_ref().map(|fit| {
        let shift = points.iter().map(|&(x, y)| y - fit.predict(x)).fold(0.0, f64::max);
        let max_relative_gap =
            points.iter().map(|&(x, y)| (fit.predict(x) + shift - y).exp() - 1.0).fold(0.0, f64::max);
        let relative_residual = rms(points.iter().map(|&(x, y)| (fit.predict(x) - y).exp() - 1.0));
        Envelope { slope: fit.slope, intercept: fit.intercept + shift, max_relative_gap, relative_residual }
    });
    Ok(GrowthResult { rows, anchor, anchor_error, fit, envelope, k, engine })
}
