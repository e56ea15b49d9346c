//! Finite-size measurements of light cones, truncation convergence and norm growth.

pub mod cauchy;
pub mod cone;
pub mod config;
pub mod engine;
pub mod fit;
pub mod growth;
pub mod radius;
pub mod suites;

use crate::error::{invalid, Error, Result};
use crate::lattice::MetricGraph;
use crate::localization::DecayFunction;

pub use engine::{Dynamics, EngineKind, Obs};
pub use fit::FitResult;

/// Default relative threshold for cone and support radii.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// Short-time window `1/(4 c_LR C_Φ)`.
pub fn tau_of(c_lr: f64, c_phi: f64) -> Result<f64> {
    if !(c_lr > 0.0 && c_phi > 0.0) || !c_lr.is_finite() || !c_phi.is_finite() {
        return invalid(format!("τ needs positive c_LR and C_Φ, got {c_lr} and {c_phi}"));
    }
    Ok(1.0 / (4.0 * c_lr * c_phi))
}

/// `μ = min(ν_F − (2D+2), ν_G − (D+2))`.
pub fn mu_of(f: &DecayFunction, g: &DecayFunction, dimension: usize) -> Result<f64> {
    let nu_f = f.nu().ok_or_else(|| Error::Precondition("F has no declared decay exponent".into()))?;
    let nu_g = g.nu().ok_or_else(|| Error::Precondition("G has no declared decay exponent".into()))?;
    let d = dimension as f64;
    Ok((nu_f - (2.0 * d + 2.0)).min(nu_g - (d + 2.0)))
}

/// Requires `0 < ν < μ`.
pub fn check_nu(nu: f64, mu: f64) -> Result<()> {
    if nu > 0.0 && nu < mu {
        Ok(())
    } else {
        Err(Error::Precondition(format!("ν = {nu} lies outside (0, μ) with μ = {mu}")))
    }
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Sites at distance exactly `r` from the set `xs`, grouped by distance.
pub(crate) fn shells(graph: &MetricGraph, xs: &[usize]) -> Vec<(f64, Vec<usize>)> {
    let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
    for y in 0..graph.len() {
        let d = graph.set_dist(xs, &[y]);
        match out.iter_mut().find(|(r, _)| (*r - d).abs() < 1e-12) {
            Some((_, ys)) => ys.push(y),
            None => out.push((d, vec![y])),
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}
