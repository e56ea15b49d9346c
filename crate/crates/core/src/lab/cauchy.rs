//! Convergence of truncated dynamics in the truncation parameter `k`.

use rayon::prelude::*;
use serde::Serialize;

use super::engine::{resolve_engine, Dynamics, EngineKind};
use super::fit::{linear_fit, FitResult};
use crate::algebra::LatticeOperator;
use crate::error::{invalid, Error, Result};
use crate::localization::{localized_norm, DecayFunction};
use crate::propagator::PropagatorPlan;
use crate::zero_chain::ZeroChain;

#[derive(Clone, Debug)]
pub struct CauchySpec {
    pub s: f64,
    pub t: f64,
    pub x0: usize,
    pub k_list: Vec<f64>,
    /// Reference truncation; `None` uses `2·diameter`, which reproduces the chain.
    pub l_ref: Option<f64>,
    pub nu: f64,
    /// Short-time window; `|t − s|` must not exceed it.
    pub tau: f64,
    pub tolerance: f64,
    pub engine: EngineKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CauchyRow {
    pub k: f64,
    /// `‖α^l_{s,t}A − α^k_{s,t}A‖`.
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CauchyResult {
    pub rows: Vec<CauchyRow>,
    /// `ln(diff) ≈ slope·ln(1 + k) + b` over the nonzero differences.
    pub fit: Option<FitResult>,
    /// `k` values whose difference is exactly zero.
    pub zero_ks: Vec<f64>,
    pub monotone: bool,
    pub l_ref: f64,
    /// `‖A‖_{ν,x0}` with `F = power_law(ν)`.
    pub a_nu_norm: f64,
    pub engine: EngineKind,
}

pub fn cauchy_scan(chain: &ZeroChain, a: &LatticeOperator, spec: &CauchySpec) -> Result<CauchyResult> {
    let graph = chain.context().graph();
    graph.check_site(spec.x0)?;
    if !(spec.tau > 0.0) {
        return invalid(format!("τ must be positive, got {}", spec.tau));
    }
    let span = (spec.t - spec.s).abs();
    if span > spec.tau * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "|t − s| = {span} exceeds the short-time window τ = {}",
            spec.tau
        )));
    }
    if spec.k_list.is_empty() || spec.k_list.iter().any(|&k| !(k >= 0.0)) {
        return invalid("k_list must be nonempty with k ≥ 0");
    }
    let l_ref = spec.l_ref.unwrap_or(2.0 * graph.diameter());
    let k_max = spec.k_list.iter().cloned().fold(0.0, f64::max);
    if l_ref < k_max {
        return invalid(format!("l_ref = {l_ref} is below max(k_list) = {k_max}"));
    }
    if !(spec.nu > 0.0) {
        return invalid(format!("ν must be positive, got {}", spec.nu));
    }
    let a_nu_norm = localized_norm(a, &DecayFunction::power_law(spec.nu), graph, spec.x0)?;

    let reference = chain.truncate(l_ref, spec.x0)?;
    let engine = resolve_engine(spec.engine, &reference, &[a])?;
    let evolve_at = |k: f64| -> Result<super::Obs> {
        let trunc = chain.truncate(k, spec.x0)?;
        let dynamics = Dynamics::new(&trunc, engine)?;
        let plan = PropagatorPlan::new(&trunc, spec.s, spec.t, spec.tolerance)?;
        dynamics.evolve(&plan, &dynamics.observable(a)?)
    };
    let target = evolve_at(l_ref)?;
    let values: Vec<f64> = spec
        .k_list
        .par_iter()
        .map(|&k| {
            if k == l_ref {
                return Ok(0.0);
            }
            evolve_at(k)?.distance(&target)
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| spec.k_list[i].total_cmp(&spec.k_list[j]));
    // differences are only resolved up to the integrator tolerance
    let slack = spec.tolerance * a.op_norm();
    let monotone = order.windows(2).all(|w| values[w[1]] <= values[w[0]] + slack);
    let rows: Vec<CauchyRow> = spec.k_list.iter().zip(&values).map(|(&k, &value)| CauchyRow { k, value }).collect();
    let zero_ks = rows.iter().filter(|r| r.value == 0.0).map(|r| r.k).collect();
    let points: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.value > 0.0).map(|r| ((1.0 + r.k).ln(), r.value.ln())).collect();
    Ok(CauchyResult {
        fit: linear_fit(&points).ok(),
        rows,
        zero_ks,
        monotone,
        l_ref,
        a_nu_norm,
        engine,
    })
}

impl CauchyResult {
    pub fn slope(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.slope)
    }
}
