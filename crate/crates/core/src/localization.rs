//! Decay functions and weighted localization norms.

use serde::{Deserialize, Serialize};

use crate::algebra::LatticeOperator;
use crate::error::{invalid, Error, Result};
use crate::lattice::MetricGraph;

/// Ceiling factor for "bounded" in [`nu_lower_bound`], relative to `F(0)`.
pub const NU_CEILING_FACTOR: f64 = 1e6;
/// Largest admissible log-log slope over the last decade of radii.
pub const NU_TREND_SLOPE: f64 = 0.05;
const NU_SAMPLES: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Infinite {
    Infinite,
}

/// A declared decay exponent: a number, or the word `"infinite"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeclaredNu {
    Finite(f64),
    Infinite(Infinite),
}

impl DeclaredNu {
    pub fn value(self) -> f64 {
        match self {
            DeclaredNu::Finite(v) => v,
            DeclaredNu::Infinite(_) => f64::INFINITY,
        }
    }
}

/// Positive bounded function of the radius.
///
/// Serialized as e.g. `{"rule": "power_law", "nu": 8}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecayFunction {
    /// `(1+r)^{−ν}`
    PowerLaw { nu: f64 },
    /// `e^{−br}`
    Exponential { b: f64 },
    Constant,
    /// Piecewise-linear through `(r, F(r))` points, constant beyond the ends.
    Tabulated {
        points: Vec<(f64, f64)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        declared_nu: Option<DeclaredNu>,
    },
}

impl DecayFunction {
    pub fn power_law(nu: f64) -> Self {
        DecayFunction::PowerLaw { nu }
    }

    pub fn exponential(b: f64) -> Self {
        DecayFunction::Exponential { b }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DecayFunction::PowerLaw { nu } if !(nu.is_finite() && *nu >= 0.0) => {
                invalid(format!("power_law needs a finite ν ≥ 0, got {nu}"))
            }
            DecayFunction::Exponential { b } if !(b.is_finite() && *b > 0.0) => {
                invalid(format!("exponential needs a finite b > 0, got {b}"))
            }
            DecayFunction::Tabulated { points, .. } => {
                if points.is_empty() {
                    return invalid("tabulated decay function has no points");
                }
                if points.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return invalid("tabulated radii must be strictly increasing");
                }
                if points.iter().any(|&(r, v)| !(r.is_finite() && v.is_finite() && v > 0.0)) {
                    return invalid("tabulated values must be finite and positive");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            DecayFunction::PowerLaw { nu } => (1.0 + r).powf(-nu),
            DecayFunction::Exponential { b } => (-b * r).exp(),
            DecayFunction::Constant => 1.0,
            DecayFunction::Tabulated { points, .. } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if r <= first.0 {
                    return first.1;
                }
                if r >= last.0 {
                    return last.1;
                }
                let i = points.partition_point(|p| p.0 <= r);
                let (r0, v0) = points[i - 1];
                let (r1, v1) = points[i];
                v0 + (v1 - v0) * (r - r0) / (r1 - r0)
            }
        }
    }

    /// `ln F(r)`, accurate where `F(r)` itself underflows.
    pub fn ln_value(&self, r: f64) -> f64 {
        match self {
            DecayFunction::PowerLaw { nu } => -nu * (1.0 + r).ln(),
            DecayFunction::Exponential { b } => -b * r,
            _ => self.value(r).ln(),
        }
    }

    /// Declared decay exponent `ν_F`, if known.
    pub fn nu(&self) -> Option<f64> {
        match self {
            DecayFunction::PowerLaw { nu } => Some(*nu),
            DecayFunction::Exponential { .. } => Some(f64::INFINITY),
            DecayFunction::Constant => Some(0.0),
            DecayFunction::Tabulated { declared_nu, .. } => declared_nu.map(DeclaredNu::value),
        }
    }
}

pub fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "nu", rename_all = "snake_case")]
pub enum NuEstimate {
    Value(f64),
    /// Every grid value passed; `ν_F` is at least the grid maximum.
    AtLeast(f64),
    /// No grid value passed.
    None,
}

/// Largest grid `ν` for which `F(r)(1+r)^ν` stays bounded on `[0, r_max]`
/// without a growth trend over the last decade of radii.
pub fn nu_lower_bound(f: &DecayFunction, nu_grid: &[f64], r_max: f64) -> Result<NuEstimate> {
    if nu_grid.is_empty() {
        return invalid("ν grid is empty");
    }
    if nu_grid.windows(2).any(|w| w[0] > w[1]) {
        return invalid("ν grid must be sorted ascending");
    }
    if !(r_max > 10.0) {
        return invalid(format!("r_max must exceed 10, got {r_max}"));
    }
    f.validate()?;
    let ln_ceiling = (NU_CEILING_FACTOR * f.value(0.0)).ln();
    // geometric radii on [0, r_max]
    let radii: Vec<f64> = (0..=NU_SAMPLES)
        .map(|j| (1.0 + r_max).powf(j as f64 / NU_SAMPLES as f64) - 1.0)
        .collect();
    let passes = |nu: f64| {
        let ln_g: Vec<f64> = radii.iter().map(|&r| f.ln_value(r) + nu * (1.0 + r).ln()).collect();
        if ln_g.iter().any(|&v| v > ln_ceiling) {
            return false;
        }
        let tail: Vec<(f64, f64)> = radii
            .iter()
            .zip(&ln_g)
            .filter(|(&r, _)| r >= r_max / 10.0)
            .map(|(&r, &v)| (r.ln(), v))
            .collect();
        crate::lab::fit::least_squares(&tail).0 <= NU_TREND_SLOPE
    };
    let mut best = None;
    for &nu in nu_grid {
        if passes(nu) {
            best = Some(nu);
        }
    }
    Ok(match best {
        Some(nu) if nu == nu_grid[nu_grid.len() - 1] => NuEstimate::AtLeast(nu),
        Some(nu) => NuEstimate::Value(nu),
        None => NuEstimate::None,
    })
}

/// Anything with an operator norm and conditional-expectation tails on a graph.
pub trait Localizable {
    fn norm(&self) -> f64;
    /// `‖(1 − E_M) A‖`.
    fn tail_norm(&self, region: &[usize]) -> Result<f64>;
    /// Sites outside of which the operator acts trivially.
    fn support_sites(&self) -> Vec<usize>;
}

impl Localizable for LatticeOperator {
    fn norm(&self) -> f64 {
        self.op_norm()
    }

    fn tail_norm(&self, region: &[usize]) -> Result<f64> {
        Ok(self.residual_outside(region)?.op_norm())
    }

    fn support_sites(&self) -> Vec<usize> {
        self.support().to_vec()
    }
}

/// Tail norms `‖(1 − E_{B_r(x)})A‖` at every realized radius around `x`.
pub fn tail_profile<A: Localizable + ?Sized>(op: &A, graph: &MetricGraph, x: usize) -> Result<Vec<(f64, f64)>> {
    graph.check_site(x)?;
    let support = op.support_sites();
    let radii = graph.realized_distances_from(x);
    let mut out = Vec::with_capacity(radii.len());
    let mut last: Option<(usize, f64)> = None;
    for r in radii {
        let ball = graph.ball(x, r)?;
        let inside = support.iter().filter(|s| ball.binary_search(s).is_ok()).count();
        // the tail only depends on B_r(x) ∩ supp(A)
        let tail = match last {
            Some((n, t)) if n == inside => t,
            _ if inside == support.len() => 0.0,
            _ => op.tail_norm(&ball)?,
        };
        last = Some((inside, tail));
        out.push((r, tail));
    }
    Ok(out)
}

/// `‖A‖_{F,x} = ‖A‖ + sup_r ‖(1 − E_{B_r(x)})A‖ / F(r)`, exact for monotone `F`.
pub fn localized_norm<A: Localizable + ?Sized>(
    op: &A,
    f: &DecayFunction,
    graph: &MetricGraph,
    x: usize,
) -> Result<f64> {
    let profile = tail_profile(op, graph, x)?;
    Ok(op.norm() + sup_from_profile(&profile, f))
}

/// Max of `tail(r_j)/F(r_j)` and the left limits `tail(r_j)/F(r_{j+1})`.
pub fn sup_from_profile(profile: &[(f64, f64)], f: &DecayFunction) -> f64 {
    let mut sup: f64 = 0.0;
    for (j, &(r, tail)) in profile.iter().enumerate() {
        if tail == 0.0 {
            continue;
        }
        sup = sup.max(tail / f.value(r));
        if let Some(&(next, _)) = profile.get(j + 1) {
            sup = sup.max(tail / f.value(next));
        }
    }
    sup
}

#[derive(Clone, Debug, Serialize)]
pub struct SupCheck {
    pub sup: f64,
    pub argmax_k: f64,
    pub argmax_m: f64,
    /// The supremum is still rising at the end of the `k` range.
    pub growth_trend: bool,
}

/// `sup_{0≤k≤k_max} sup_{m≥k/2} (1+m)^ν F((3m/4 − (k+1)/4)_+)` on a grid of
/// spacing `1/density` in both variables.
pub fn lemma_a2_sup_check(f: &DecayFunction, nu: f64, k_max: f64, density: f64) -> Result<SupCheck> {
    f.validate()?;
    let nu_f = f.nu().ok_or_else(|| Error::Precondition("decay function has no declared ν_F".into()))?;
    if !(0.0..nu_f).contains(&nu) {
        return Err(Error::Precondition(format!("need 0 ≤ ν < ν_F = {nu_f}, got ν = {nu}")));
    }
    if !(k_max >= 0.0 && density > 0.0) {
        return invalid("k_max must be ≥ 0 and density > 0");
    }
    let step = 1.0 / density;
    let n_k = (k_max / step).floor() as usize;
    let m_span = 2.0 * k_max + 50.0;
    let n_m = (m_span / step).ceil() as usize;
    let term = |k: f64, m: f64| nu * (1.0 + m).ln() + f.ln_value(positive_part(0.75 * m - (k + 1.0) / 4.0));
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut best_half = f64::NEG_INFINITY;
    for i in 0..=n_k {
        let k = i as f64 * step;
        for j in 0..=n_m {
            let m = k / 2.0 + j as f64 * step;
            let v = term(k, m);
            if v > best.0 {
                best = (v, k, m);
            }
            if k <= k_max / 2.0 {
                best_half = best_half.max(v);
            }
        }
    }
    let growth_trend = best.1 >= 0.9 * k_max && k_max > 0.0 && best.0 > best_half + 1e-3;
    Ok(SupCheck { sup: best.0.exp(), argmax_k: best.1, argmax_m: best.2, growth_trend })
}
