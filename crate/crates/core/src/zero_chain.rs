//! Time-dependent zero-chains `x ↦ Φ_x(t)`, their truncations and Liouvillians.
//!
//! Each term is a sum of pieces `c(t)·O` with a static operator `O` and a
//! closed-form coefficient function `c`, so continuity in `t` holds by
//! construction.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{intersection, union, AlgebraContext, Backend, LatticeOperator};
use crate::error::{invalid, Error, Result};
use crate::localization::{localized_norm, DecayFunction};

/// Default density of the time grid used for suprema over `t`.
pub const SAMPLES_PER_UNIT_TIME: f64 = 64.0;
/// Tolerance for self-adjointness and evenness of terms.
pub const TERM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientFn {
    Constant { value: f64 },
    /// `amplitude·cos(omega·t + phase)`
    Cos { amplitude: f64, omega: f64, #[serde(default)] phase: f64 },
    /// `amplitude·sin(omega·t + phase)`
    Sin { amplitude: f64, omega: f64, #[serde(default)] phase: f64 },
}

impl CoefficientFn {
    pub fn one() -> Self {
        CoefficientFn::Constant { value: 1.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            CoefficientFn::Constant { value } => value,
            CoefficientFn::Cos { amplitude, omega, phase } => amplitude * (omega * t + phase).cos(),
            CoefficientFn::Sin { amplitude, omega, phase } => amplitude * (omega * t + phase).sin(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            CoefficientFn::Constant { .. } => true,
            CoefficientFn::Cos { amplitude, omega, .. } | CoefficientFn::Sin { amplitude, omega, .. } => {
                amplitude == 0.0 || omega == 0.0
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match *self {
            CoefficientFn::Constant { value } => CoefficientFn::Constant { value: value * s },
            CoefficientFn::Cos { amplitude, omega, phase } => CoefficientFn::Cos { amplitude: amplitude * s, omega, phase },
            CoefficientFn::Sin { amplitude, omega, phase } => CoefficientFn::Sin { amplitude: amplitude * s, omega, phase },
        }
    }
}

#[derive(Clone, Debug)]
pub struct Piece {
    pub op: LatticeOperator,
    pub coeff: CoefficientFn,
}

#[derive(Clone, Debug)]
pub struct ZeroChain {
    ctx: Arc<AlgebraContext>,
    terms: BTreeMap<usize, Vec<Piece>>,
    interval: (f64, f64),
}

impl ZeroChain {
    pub fn new(ctx: &Arc<AlgebraContext>, interval: (f64, f64)) -> Result<Self> {
        if !(interval.0.is_finite() && interval.1.is_finite() && interval.0 <= interval.1) {
            return invalid(format!("invalid time interval {interval:?}"));
        }
        Ok(ZeroChain { ctx: Arc::clone(ctx), terms: BTreeMap::new(), interval })
    }

    /// Adds `coeff(t)·op` to `Φ_x`; `op` must be self-adjoint and even.
    pub fn add_piece(&mut self, x: usize, op: LatticeOperator, coeff: CoefficientFn) -> Result<()> {
        self.ctx.graph().check_site(x)?;
        if !Arc::ptr_eq(op.context(), &self.ctx) {
            return invalid("term belongs to a different algebra context");
        }
        if !op.is_hermitian(TERM_TOL) {
            return invalid(format!("term at site {x} is not self-adjoint"));
        }
        if !op.is_even(TERM_TOL) {
            return invalid(format!("term at site {x} is not even"));
        }
        self.terms.entry(x).or_default().push(Piece { op, coeff });
        Ok(())
    }

    pub fn context(&self) -> &Arc<AlgebraContext> {
        &self.ctx
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let (a, b) = self.interval;
        if t < a - 1e-12 || t > b + 1e-12 {
            return invalid(format!("time {t} outside the interval [{a}, {b}]"));
        }
        Ok(())
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.keys().copied()
    }

    pub fn pieces(&self, x: usize) -> &[Piece] {
        self.terms.get(&x).map_or(&[], Vec::as_slice)
    }

    pub fn all_pieces(&self) -> impl Iterator<Item = (usize, &Piece)> + '_ {
        self.terms.iter().flat_map(|(&x, ps)| ps.iter().map(move |p| (x, p)))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_static(&self) -> bool {
        self.all_pieces().all(|(_, p)| p.coeff.is_constant())
    }

    /// Union of the supports of all terms.
    pub fn region(&self) -> Vec<usize> {
        self.all_pieces().fold(Vec::new(), |acc, (_, p)| union(&acc, p.op.support()))
    }

    /// `Φ_x(t)`.
    pub fn term_at(&self, x: usize, t: f64) -> Result<LatticeOperator> {
        let mut total = LatticeOperator::zero(&self.ctx);
        for p in self.pieces(x) {
            total = total.add(&p.op.scale_re(p.coeff.eval(t)))?;
        }
        Ok(total)
    }

    /// `H(t) = Σ_x Φ_x(t)` on the union of the term supports.
    pub fn hamiltonian(&self, t: f64) -> Result<LatticeOperator> {
        let region = self.region();
        let mut total = LatticeOperator::zero_on(&self.ctx, &region)?;
        for (_, p) in self.all_pieces() {
            total = total.add(&p.op.scale_re(p.coeff.eval(t)))?;
        }
        Ok(total)
    }

    /// Uniform grid with [`SAMPLES_PER_UNIT_TIME`] points per unit time plus
    /// both endpoints; a single point for static chains.
    pub fn sample_times(&self, density: f64) -> Vec<f64> {
        let (a, b) = self.interval;
        if self.is_static() || a == b {
            return vec![a];
        }
        let n = ((b - a) * density).ceil().max(1.0) as usize;
        (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
    }

    /// `max_{t, x} ‖Φ_x(t)‖_{G,x}` over the samples.
    pub fn uniform_norm(&self, g: &DecayFunction, t_samples: &[f64]) -> Result<f64> {
        Ok(self.localized_norms(g, t_samples)?.into_iter().map(|(_, v)| v).fold(0.0, f64::max))
    }

    /// Per-site `max_t ‖Φ_x(t)‖_{G,x}`.
    fn localized_norms(&self, g: &DecayFunction, t_samples: &[f64]) -> Result<Vec<(usize, f64)>> {
        if t_samples.is_empty() {
            return invalid("no time samples");
        }
        g.validate()?;
        for &t in t_samples {
            self.check_time(t)?;
        }
        let times: &[f64] = if self.is_static() { &t_samples[..1] } else { t_samples };
        let graph = self.ctx.graph();
        let sites: Vec<usize> = self.sites().collect();
        sites
            .par_iter()
            .map(|&x| {
                let mut best: f64 = 0.0;
                for &t in times {
                    let term = self.term_at(x, t)?;
                    best = best.max(localized_norm(&term, g, graph, x)?);
                }
                Ok((x, best))
            })
            .collect()
    }

    /// Growth coefficient `C_Φ = max_{t,x} ‖Φ_x(t)‖_{G,x} / (1 + d(x, x0))`.
    pub fn growth_coefficient(&self, g: &DecayFunction, x0: usize, t_samples: &[f64]) -> Result<GrowthProfile> {
        self.ctx.graph().check_site(x0)?;
        let graph = self.ctx.graph();
        let c_phi = self
            .localized_norms(g, t_samples)?
            .into_iter()
            .map(|(x, v)| v / (1.0 + graph.dist(x, x0)))
            .fold(0.0, f64::max);
        Ok(GrowthProfile { c_phi, x0, g: g.clone(), degenerate: c_phi == 0.0 })
    }

    /// `Φ^k_x = E_{B_{k/2}(x)} Φ_x` for `x ∈ B_{k/2}(x0)`, zero elsewhere.
    pub fn truncate(&self, k: f64, x0: usize) -> Result<ZeroChain> {
        if !(k >= 0.0) {
            return invalid(format!("truncation parameter must be ≥ 0, got {k}"));
        }
        let graph = self.ctx.graph();
        let inner = graph.ball(x0, k / 2.0)?;
        let mut out = ZeroChain::new(&self.ctx, self.interval)?;
        for (&x, pieces) in &self.terms {
            if inner.binary_search(&x).is_err() {
                continue;
            }
            let ball = graph.ball(x, k / 2.0)?;
            for p in pieces {
                let op = p.op.conditional_expectation(&ball)?;
                if op.block().iter().all(|z| z.norm() == 0.0) {
                    continue;
                }
                out.terms.entry(x).or_default().push(Piece { op, coeff: p.coeff.clone() });
            }
        }
        Ok(out)
    }

    /// `L_{Φ(t)} A = Σ_x [Φ_x(t), A]`.
    pub fn liouvillian_apply(&self, t: f64, a: &LatticeOperator) -> Result<LatticeOperator> {
        self.check_time(t)?;
        let sites: Vec<usize> = self.sites().collect();
        // terms are even, so only overlapping supports contribute
        let parts: Vec<Option<LatticeOperator>> = sites
            .par_iter()
            .map(|&x| {
                let term = self.term_at(x, t)?;
                if intersection(term.support(), a.support()).is_empty() {
                    return Ok(None);
                }
                term.commutator(a).map(Some)
            })
            .collect::<Result<_>>()?;
        let mut total = LatticeOperator::zero_on(&self.ctx, a.support())?;
        for p in parts.into_iter().flatten() {
            total = total.add(&p)?;
        }
        Ok(total)
    }

    /// `max_t ‖L_{Φ(t)}A − L_{Φ^k(t)}A‖` over the samples.
    pub fn liouvillian_truncation_gap(&self, k: f64, x0: usize, a: &LatticeOperator, t_samples: &[f64]) -> Result<f64> {
        if t_samples.is_empty() {
            return invalid("no time samples");
        }
        let trunc = self.truncate(k, x0)?;
        let mut gap: f64 = 0.0;
        for &t in t_samples {
            let full = self.liouvillian_apply(t, a)?;
            let cut = trunc.liouvillian_apply(t, a)?;
            gap = gap.max(full.distance(&cut)?);
        }
        Ok(gap)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthProfile {
    pub c_phi: f64,
    pub x0: usize,
    pub g: DecayFunction,
    /// `C_Φ = 0`, so `τ` is undefined.
    pub degenerate: bool,
}

fn require_qubits(ctx: &Arc<AlgebraContext>) -> Result<()> {
    if ctx.backend() != (Backend::Spin { local_dim: 2 }) {
        return Err(Error::UnsupportedBackend("Ising models need a spin-½ context".into()));
    }
    Ok(())
}

/// Neighbours at distance 1 with a larger index: each bond sits on its least site.
fn forward_bonds(ctx: &AlgebraContext, x: usize) -> Vec<usize> {
    let g = ctx.graph();
    (x + 1..g.len()).filter(|&y| (g.dist(x, y) - 1.0).abs() < 1e-12).collect()
}

/// `Φ_x = J Σ_y σ^z_x σ^z_y + h σ^x_x`, bonds on their least site.
pub fn uniform_tfim(ctx: &Arc<AlgebraContext>, j: f64, h: f64, interval: (f64, f64)) -> Result<ZeroChain> {
    tfim(ctx, j, CoefficientFn::Constant { value: h }, interval)
}

/// `Φ_x = J Σ_y σ^z_x σ^z_y + h cos(ωt) σ^x_x`.
pub fn time_modulated_tfim(
    ctx: &Arc<AlgebraContext>,
    j: f64,
    h: f64,
    omega: f64,
    interval: (f64, f64),
) -> Result<ZeroChain> {
    tfim(ctx, j, CoefficientFn::Cos { amplitude: h, omega, phase: 0.0 }, interval)
}

fn tfim(ctx: &Arc<AlgebraContext>, j: f64, field: CoefficientFn, interval: (f64, f64)) -> Result<ZeroChain> {
    require_qubits(ctx)?;
    let mut chain = ZeroChain::new(ctx, interval)?;
    for x in 0..ctx.graph().len() {
        if j != 0.0 {
            for y in forward_bonds(ctx, x) {
                let zz = LatticeOperator::pauli(ctx, &[(x, 'Z'), (y, 'Z')])?;
                chain.add_piece(x, zz, CoefficientFn::Constant { value: j })?;
            }
        }
        if field.eval(0.0) != 0.0 || !field.is_constant() {
            chain.add_piece(x, LatticeOperator::pauli(ctx, &[(x, 'X')])?, field.clone())?;
        }
    }
    Ok(chain)
}

/// `Φ_x(t) = (1 + slope·d(x, x0))·base_x(t)`.
pub fn linear_growth(base: &ZeroChain, x0: usize, slope: f64) -> Result<ZeroChain> {
    if !(slope >= 0.0) {
        return invalid(format!("growth slope must be ≥ 0, got {slope}"));
    }
    let graph = base.ctx.graph();
    graph.check_site(x0)?;
    let mut out = base.clone();
    for (&x, pieces) in out.terms.iter_mut() {
        let s = 1.0 + slope * graph.dist(x, x0);
        for p in pieces.iter_mut() {
            p.coeff = p.coeff.scaled(s);
        }
    }
    Ok(out)
}

pub fn zero(ctx: &Arc<AlgebraContext>, interval: (f64, f64)) -> Result<ZeroChain> {
    ZeroChain::new(ctx, interval)
}
