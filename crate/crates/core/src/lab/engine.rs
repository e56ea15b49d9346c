//! Dense or free-fermion dynamics behind one interface.

use serde::{Deserialize, Serialize};

use crate::algebra::LatticeOperator;
use crate::error::{Error, Result};
use crate::lattice::MetricGraph;
use crate::localization::{localized_norm, tail_profile, DecayFunction, Localizable};
use crate::propagator::{Propagator, PropagatorPlan};
use crate::quadratic::{MajoranaForm, QuadraticPropagator};
use crate::zero_chain::ZeroChain;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    /// Dense when the chain region fits the cap, otherwise free-fermion.
    #[default]
    Auto,
    Dense,
    Quadratic,
}

/// An observable in the representation of the chosen engine.
#[derive(Clone, Debug)]
pub enum Obs {
    Dense(LatticeOperator),
    Quadratic(MajoranaForm),
}

impl Obs {
    pub fn distance(&self, other: &Obs) -> Result<f64> {
        match (self, other) {
            (Obs::Dense(a), Obs::Dense(b)) => a.distance(b),
            (Obs::Quadratic(a), Obs::Quadratic(b)) => Ok(a.sub(b).op_norm()),
            _ => Err(Error::InvalidArgument("observables come from different engines".into())),
        }
    }

    pub fn localized_norm(&self, f: &DecayFunction, graph: &MetricGraph, x: usize) -> Result<f64> {
        match self {
            Obs::Dense(a) => localized_norm(a, f, graph, x),
            Obs::Quadratic(a) => localized_norm(a, f, graph, x),
        }
    }

    pub fn tail_profile(&self, graph: &MetricGraph, x: usize) -> Result<Vec<(f64, f64)>> {
        match self {
            Obs::Dense(a) => tail_profile(a, graph, x),
            Obs::Quadratic(a) => tail_profile(a, graph, x),
        }
    }

    /// `‖[self, other]‖`.
    pub fn commutator_norm(&self, other: &Obs) -> Result<f64> {
        match (self, other) {
            (Obs::Dense(a), Obs::Dense(b)) => Ok(a.commutator(b)?.op_norm()),
            (Obs::Quadratic(a), Obs::Quadratic(b)) => {
                let c = MajoranaForm { n_sites: a.n_sites, k: a.commutator_matrix(b), constant: 0.0 };
                Ok(c.op_norm())
            }
            _ => Err(Error::InvalidArgument("observables come from different engines".into())),
        }
    }

    pub fn dense(&self) -> Option<&LatticeOperator> {
        match self {
            Obs::Dense(a) => Some(a),
            Obs::Quadratic(_) => None,
        }
    }
}

impl Localizable for Obs {
    fn norm(&self) -> f64 {
        match self {
            Obs::Dense(a) => a.op_norm(),
            Obs::Quadratic(a) => a.op_norm(),
        }
    }

    fn tail_norm(&self, region: &[usize]) -> Result<f64> {
        match self {
            Obs::Dense(a) => a.tail_norm(region),
            Obs::Quadratic(a) => a.tail_norm(region),
        }
    }

    fn support_sites(&self) -> Vec<usize> {
        match self {
            Obs::Dense(a) => a.support_sites(),
            Obs::Quadratic(a) => a.support_sites(),
        }
    }
}

pub enum Dynamics {
    Dense(Propagator),
    Quadratic(QuadraticPropagator),
}

impl Dynamics {
    pub fn new(chain: &ZeroChain, kind: EngineKind) -> Result<Self> {
        match kind {
            EngineKind::Dense => Ok(Dynamics::Dense(Propagator::new(chain)?)),
            EngineKind::Quadratic => Ok(Dynamics::Quadratic(QuadraticPropagator::new(chain)?)),
            EngineKind::Auto => Err(Error::InvalidArgument("resolve the engine before building dynamics".into())),
        }
    }

    pub fn kind(&self) -> EngineKind {
        match self {
            Dynamics::Dense(_) => EngineKind::Dense,
            Dynamics::Quadratic(_) => EngineKind::Quadratic,
        }
    }

    pub fn observable(&self, a: &LatticeOperator) -> Result<Obs> {
        match self {
            Dynamics::Dense(_) => Ok(Obs::Dense(a.clone())),
            Dynamics::Quadratic(_) => Ok(Obs::Quadratic(MajoranaForm::from_operator(a)?)),
        }
    }

    pub fn evolve(&self, plan: &PropagatorPlan, a: &Obs) -> Result<Obs> {
        match (self, a) {
            (Dynamics::Dense(p), Obs::Dense(op)) => Ok(Obs::Dense(p.evolve(plan, op)?)),
            (Dynamics::Quadratic(p), Obs::Quadratic(form)) => Ok(Obs::Quadratic(p.evolve(plan, form)?)),
            _ => Err(Error::InvalidArgument("observable does not match the engine".into())),
        }
    }

    pub fn chain(&self) -> &ZeroChain {
        match self {
            Dynamics::Dense(p) => p.chain(),
            Dynamics::Quadratic(p) => p.chain(),
        }
    }
}

/// Picks the engine for dynamics of `chain` on observables `ops`.
pub fn resolve_engine(kind: EngineKind, chain: &ZeroChain, ops: &[&LatticeOperator]) -> Result<EngineKind> {
    let quadratic_ok = || {
        ops.iter().all(|a| MajoranaForm::from_operator(a).is_ok())
            && chain.all_pieces().all(|(_, p)| MajoranaForm::from_operator(&p.op).is_ok())
    };
    let ctx = chain.context();
    let mut dense_region = chain.region();
    for a in ops {
        dense_region = crate::algebra::union(&dense_region, a.support());
    }
    match kind {
        EngineKind::Dense => {
            ctx.block_dim(dense_region.len())?;
            Ok(EngineKind::Dense)
        }
        EngineKind::Quadratic => {
            if quadratic_ok() {
                Ok(EngineKind::Quadratic)
            } else {
                Err(Error::UnsupportedBackend("chain or observable is not a free-fermion bilinear".into()))
            }
        }
        EngineKind::Auto => {
            if ctx.fits(dense_region.len()) {
                Ok(EngineKind::Dense)
            } else if quadratic_ok() {
                Ok(EngineKind::Quadratic)
            } else {
                Err(Error::ResourceLimit(format!(
                    "a region of {} sites exceeds the dense cap {} and the model is not free-fermionic",
                    dense_region.len(),
                    ctx.dense_cap()
                )))
            }
        }
    }
}

/// Largest `k = 2r`, `r` a realized radius around `x0`, for which some engine
/// can run the truncated chain. A covering `k` reproduces the chain.
pub fn largest_feasible_k(kind: EngineKind, chain: &ZeroChain, x0: usize, ops: &[&LatticeOperator]) -> Result<(f64, EngineKind)> {
    let graph = chain.context().graph();
    graph.check_site(x0)?;
    let mut radii = graph.realized_distances_from(x0);
    radii.reverse();
    let mut last_err = None;
    for r in radii {
        let k = 2.0 * r;
        match resolve_engine(kind, &chain.truncate(k, x0)?, ops) {
            Ok(engine) => return Ok((k, engine)),
            Err(e @ (Error::ResourceLimit(_) | Error::UnsupportedBackend(_))) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::ResourceLimit("no truncation fits the dense cap".into())))
}
