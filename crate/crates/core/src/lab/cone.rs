//! Commutator light-cone scans `‖[α_{s,t}A, B_y]‖` over time and distance.

use rayon::prelude::*;
use serde::Serialize;

use super::engine::{resolve_engine, Dynamics, EngineKind, Obs};
use super::fit::{exponential_fit, linear_fit, records, FitResult};
use super::{shells, DEFAULT_DELTA};
use crate::algebra::{intersection, LatticeOperator};
use crate::error::{invalid, Result};
use crate::linalg::CMat;
use crate::localization::Localizable;
use crate::propagator::PropagatorPlan;
use crate::zero_chain::ZeroChain;

#[derive(Clone, Debug)]
pub struct ConeSpec {
    pub s: f64,
    pub times: Vec<f64>,
    /// Truncation parameter; `None` runs the chain as given.
    pub k: Option<f64>,
    pub x0: usize,
    /// Probe distances from `supp(A)`; `None` probes every site outside it.
    pub distances: Option<Vec<f64>>,
    pub delta: f64,
    pub tolerance: f64,
    pub engine: EngineKind,
}

impl ConeSpec {
    pub fn new(times: Vec<f64>, x0: usize) -> Self {
        ConeSpec {
            s: 0.0,
            times,
            k: None,
            x0,
            distances: None,
            delta: DEFAULT_DELTA,
            tolerance: 1e-8,
            engine: EngineKind::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeEntry {
    pub t: f64,
    pub r: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdRadius {
    pub t: f64,
    /// Largest scanned distance whose entry reaches `δ‖A‖‖B‖`, or 0.
    pub r: f64,
    /// The entry at the largest scanned distance is above threshold.
    pub saturated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeScanResult {
    pub entries: Vec<ConeEntry>,
    pub distances: Vec<f64>,
    pub radii: Vec<ThresholdRadius>,
    /// Record points of `r*(t)` on unsaturated times: the first time and every
    /// time `r*` exceeds all earlier values.
    pub front: Vec<(f64, f64)>,
    /// `r* ≈ v t + b` on the front.
    pub linear: Option<FitResult>,
    /// `ln(1 + r*) ≈ a t + b` on the front, residual in radius units.
    pub exponential: Option<FitResult>,
    pub engine: EngineKind,
    pub k: Option<f64>,
    pub threshold: f64,
}

impl ConeScanResult {
    pub fn velocity(&self) -> Option<f64> {
        self.linear.as_ref().map(|f| f.slope)
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().map(|e| e.value).fold(0.0, f64::max)
    }
}

pub fn cone_scan(chain: &ZeroChain, a: &LatticeOperator, probe: &CMat, spec: &ConeSpec) -> Result<ConeScanResult> {
    if !(spec.delta > 0.0) {
        return invalid(format!("threshold must be positive, got {}", spec.delta));
    }
    let ctx = chain.context();
    let graph = ctx.graph();
    graph.check_site(spec.x0)?;
    if probe.nrows() != ctx.local_dim() || probe.ncols() != ctx.local_dim() {
        return invalid(format!("probe must be a {0}×{0} single-site matrix", ctx.local_dim()));
    }
    let chain = match spec.k {
        Some(k) => chain.truncate(k, spec.x0)?,
        None => chain.clone(),
    };
    let supp = a.support();
    if supp.is_empty() {
        return invalid("observable must have nonempty support");
    }
    let all = shells(graph, supp);
    let distances: Vec<f64> = match &spec.distances {
        None => all.iter().map(|(r, _)| *r).filter(|&r| r > 0.0).collect(),
        Some(ds) => {
            if let Some(&d) = ds.iter().find(|&&d| !(d > 0.0)) {
                return invalid(format!("probe at distance {d} overlaps the observable"));
            }
            ds.clone()
        }
    };
    let mut probes: Vec<(f64, Vec<LatticeOperator>)> = Vec::new();
    for &d in &distances {
        let sites = all
            .iter()
            .find(|(r, _)| (r - d).abs() < 1e-12)
            .map(|(_, ys)| ys.clone())
            .unwrap_or_default();
        let ops = sites
            .iter()
            .map(|&y| {
                debug_assert!(intersection(&[y], supp).is_empty());
                LatticeOperator::local(ctx, y, probe.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        probes.push((d, ops));
    }
    if ctx.is_fermion() {
        for (_, ops) in &probes {
            if ops.iter().any(|b| !b.is_even(1e-12)) {
                return invalid("probes must be even on the fermion backend");
            }
        }
    }

    let mut ops = vec![a];
    ops.extend(probes.iter().flat_map(|(_, bs)| bs.iter()));
    let engine = resolve_engine(spec.engine, &chain, &ops)?;
    let dynamics = Dynamics::new(&chain, engine)?;
    let a_obs = dynamics.observable(a)?;
    let probe_obs: Vec<(f64, Vec<Obs>)> = probes
        .iter()
        .map(|(d, ops)| Ok((*d, ops.iter().map(|b| dynamics.observable(b)).collect::<Result<Vec<_>>>()?)))
        .collect::<Result<_>>()?;
    let norm_a = a_obs.norm();
    let norm_b = crate::linalg::spectral_norm(probe);
    let threshold = spec.delta * norm_a * norm_b;

    let rows: Vec<Vec<ConeEntry>> = spec
        .times
        .par_iter()
        .map(|&t| {
            let plan = PropagatorPlan::new(&chain, spec.s, t, spec.tolerance)?;
            let evolved = dynamics.evolve(&plan, &a_obs)?;
            probe_obs
                .iter()
                .map(|(d, bs)| {
                    let mut value: f64 = 0.0;
                    for b in bs {
                        value = value.max(evolved.commutator_norm(b)?);
                    }
                    Ok(ConeEntry { t, r: *d, value })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let radii: Vec<ThresholdRadius> = rows
        .iter()
        .zip(&spec.times)
        .map(|(row, &t)| threshold_radius(t, row, threshold))
        .collect();
    let points: Vec<(f64, f64)> = radii.iter().filter(|r| !r.saturated).map(|r| (r.t, r.r)).collect();
    let front = records(&points);
    Ok(ConeScanResult {
        entries: rows.into_iter().flatten().collect(),
        distances,
        radii,
        linear: linear_fit(&front).ok(),
        exponential: exponential_fit(&front).ok(),
        front,
        engine,
        k: spec.k,
        threshold,
    })
}

/// Largest distance with an entry at or above threshold; ties go to the smaller radius.
fn threshold_radius(t: f64, row: &[ConeEntry], threshold: f64) -> ThresholdRadius {
    let mut r = 0.0;
    let mut far = (f64::NEG_INFINITY, false);
    for e in row {
        let above = e.value > 0.0 && e.value >= threshold;
        if above && e.r > r {
            r = e.r;
        }
        if e.r > far.0 {
            far = (e.r, above);
        }
    }
    ThresholdRadius { t, r, saturated: far.1 }
}
