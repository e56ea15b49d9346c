//! Heisenberg dynamics generated by a (truncated) zero-chain.
//!
//! Conventions: `i ∂_t U(t,s) = H(t) U(t,s)`, `U(s,s) = 1`, and
//! `α_{s,t}(A) = U(t,s)* A U(t,s)`, so that `α_{s,t} ∘ α_{t,u} = α_{s,u}` and
//! `∂_t α_{s,t}(A) = α_{s,t}(i L_{Φ(t)} A)`.

use std::sync::{Arc, OnceLock};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::algebra::{intersection, is_subset, union, AlgebraContext, LatticeOperator};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMat};
use crate::zero_chain::{CoefficientFn, ZeroChain};

/// Default upper bound on a single Magnus step.
pub const DEFAULT_MAX_STEP: f64 = 0.05;
const MAX_HALVINGS: usize = 14;
/// Substeps of `α_{t, t±h}` inside [`Propagator::generator_residual`].
pub const RESIDUAL_SUBSTEPS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    ExactStatic,
    Magnus2,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropagatorPlan {
    pub s: f64,
    pub t: f64,
    pub integrator: Integrator,
    /// Initial (Magnus) step size.
    pub step: f64,
    /// Certified error of the returned unitary, estimated from `U_h` and
    /// `U_{h/2}`; `None` runs the fixed step as is.
    pub tolerance: Option<f64>,
}

impl PropagatorPlan {
    /// Exact exponentiation for static chains, certified Magnus steps otherwise.
    pub fn new(chain: &ZeroChain, s: f64, t: f64, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return invalid(format!("integrator tolerance must be positive, got {tolerance}"));
        }
        let integrator = if chain.is_static() { Integrator::ExactStatic } else { Integrator::Magnus2 };
        let span = (t - s).abs();
        let step = if span > 0.0 { span.min(DEFAULT_MAX_STEP) } else { DEFAULT_MAX_STEP };
        let plan = PropagatorPlan { s, t, integrator, step, tolerance: Some(tolerance) };
        plan.validate(chain)?;
        Ok(plan)
    }

    /// Uncertified Magnus integration with `n` equal steps.
    pub fn fixed_steps(chain: &ZeroChain, s: f64, t: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("need at least one step");
        }
        let span = (t - s).abs();
        let plan = PropagatorPlan {
            s,
            t,
            integrator: Integrator::Magnus2,
            step: if span > 0.0 { span / n as f64 } else { DEFAULT_MAX_STEP },
            tolerance: None,
        };
        plan.validate(chain)?;
        Ok(plan)
    }

    pub(crate) fn validate(&self, chain: &ZeroChain) -> Result<()> {
        chain.check_time(self.s)?;
        chain.check_time(self.t)?;
        if !(self.step > 0.0) {
            return invalid(format!("step size must be positive, got {}", self.step));
        }
        let span = (self.t - self.s).abs();
        if span > 0.0 && self.step > span * (1.0 + 1e-12) {
            return invalid(format!("step {} exceeds the time span {span}", self.step));
        }
        if self.integrator == Integrator::ExactStatic && !chain.is_static() {
            return invalid("exact_static needs constant coefficient functions");
        }
        Ok(())
    }
}

/// Precomputed dense data for one zero-chain on its simulation region.
pub struct Propagator {
    chain: ZeroChain,
    region: Vec<usize>,
    /// `H(t) = Σ c_i(t) M_i` on the region.
    parts: Vec<(CoefficientFn, CMat)>,
    eig: OnceLock<std::result::Result<(Array1<f64>, CMat), Error>>,
}

impl Propagator {
    pub fn new(chain: &ZeroChain) -> Result<Self> {
        let region = chain.region();
        let ctx = chain.context();
        let dim = ctx.block_dim(region.len())?;
        let mut parts: Vec<(CoefficientFn, CMat)> = Vec::new();
        for (_, p) in chain.all_pieces() {
            let block = p.op.embed(&region)?.into_block();
            // group pieces that share a coefficient function
            let key = if p.coeff.is_constant() { CoefficientFn::Constant { value: p.coeff.eval(0.0) } } else { p.coeff.clone() };
            match key {
                CoefficientFn::Constant { value } => add_part(&mut parts, CoefficientFn::one(), block.mapv(|z| z * value)),
                other => add_part(&mut parts, other, block),
            }
        }
        debug_assert!(parts.iter().all(|(_, m)| m.nrows() == dim));
        Ok(Propagator { chain: chain.clone(), region, parts, eig: OnceLock::new() })
    }

    pub fn chain(&self) -> &ZeroChain {
        &self.chain
    }

    pub fn region(&self) -> &[usize] {
        &self.region
    }

    fn context(&self) -> &Arc<AlgebraContext> {
        self.chain.context()
    }

    fn hamiltonian_block(&self, t: f64) -> CMat {
        let dim = self.context().local_dim().pow(self.region.len() as u32);
        let mut h = CMat::zeros((dim, dim));
        for (c, m) in &self.parts {
            h.scaled_add(crate::linalg::C64::new(c.eval(t), 0.0), m);
        }
        h
    }

    fn static_eigh(&self) -> Result<&(Array1<f64>, CMat)> {
        self.eig
            .get_or_init(|| linalg::hermitian_eigh(&self.hamiltonian_block(self.chain.interval().0)))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// `U(t, s)` on the simulation region.
    pub fn unitary(&self, plan: &PropagatorPlan) -> Result<CMat> {
        plan.validate(&self.chain)?;
        let dim = self.context().local_dim().pow(self.region.len() as u32);
        if plan.s == plan.t || self.parts.is_empty() {
            return Ok(linalg::identity(dim));
        }
        match plan.integrator {
            Integrator::ExactStatic => {
                let (vals, vecs) = self.static_eigh()?;
                Ok(linalg::spectral_unitary(vals, vecs, plan.t - plan.s))
            }
            Integrator::Magnus2 => {
                let span = (plan.t - plan.s).abs();
                let mut n = (span / plan.step).round().max(1.0) as usize;
                let mut coarse = self.magnus(plan.s, plan.t, n)?;
                let Some(tol) = plan.tolerance else { return Ok(coarse) };
                for _ in 0..MAX_HALVINGS {
                    n *= 2;
                    let fine = self.magnus(plan.s, plan.t, n)?;
                    // second order: ‖U_{h/2} − U‖ ≈ ‖U_h − U_{h/2}‖/3
                    let err = linalg::spectral_norm(&(&coarse - &fine)) / 3.0;
                    if err <= tol {
                        return Ok(fine);
                    }
                    coarse = fine;
                }
                Err(Error::Numerical(format!("Magnus integration did not reach tolerance {tol:e}")))
            }
        }
    }

    fn magnus(&self, s: f64, t: f64, n: usize) -> Result<CMat> {
        let h = (t - s) / n as f64;
        let dim = self.context().local_dim().pow(self.region.len() as u32);
        let mut u = linalg::identity(dim);
        for i in 0..n {
            let mid = s + (i as f64 + 0.5) * h;
            let step = linalg::unitary_step(&self.hamiltonian_block(mid), h)?;
            u = step.dot(&u);
        }
        Ok(u)
    }

    /// `α_{s,t}(A)`.
    pub fn evolve(&self, plan: &PropagatorPlan, a: &LatticeOperator) -> Result<LatticeOperator> {
        if !Arc::ptr_eq(a.context(), self.context()) {
            return invalid("operator and chain belong to different contexts");
        }
        if self.parts.is_empty() || intersection(a.support(), &self.region).is_empty() {
            plan.validate(&self.chain)?;
            return Ok(a.clone());
        }
        let u = self.unitary(plan)?;
        self.conjugate(&u, a)
    }

    /// `α_{s,t}(A)` for several operators sharing one unitary.
    pub fn evolve_many(&self, plan: &PropagatorPlan, ops: &[LatticeOperator]) -> Result<Vec<LatticeOperator>> {
        let touches = ops.iter().any(|a| !intersection(a.support(), &self.region).is_empty());
        if self.parts.is_empty() || !touches {
            plan.validate(&self.chain)?;
            return Ok(ops.to_vec());
        }
        let u = self.unitary(plan)?;
        ops.iter().map(|a| self.conjugate(&u, a)).collect()
    }

    /// `U* A U` with `U` acting on the region and trivially elsewhere.
    pub fn conjugate(&self, u: &CMat, a: &LatticeOperator) -> Result<LatticeOperator> {
        let ctx = self.context();
        if intersection(a.support(), &self.region).is_empty() {
            return Ok(a.clone());
        }
        if is_subset(a.support(), &self.region) {
            let block = a.embed(&self.region)?.into_block();
            let out = linalg::adjoint(u).dot(&block).dot(u);
            return LatticeOperator::new(ctx, &self.region, out);
        }
        let w = union(a.support(), &self.region);
        let big_u = LatticeOperator::new(ctx, &self.region, u.clone())?.embed(&w)?.into_block();
        let block = a.embed(&w)?.into_block();
        LatticeOperator::new(ctx, &w, linalg::adjoint(&big_u).dot(&block).dot(&big_u))
    }

    /// `α_{s,t}(α_{t,u}(A))`.
    pub fn compose(&self, first: &PropagatorPlan, second: &PropagatorPlan, a: &LatticeOperator) -> Result<LatticeOperator> {
        if (first.t - second.s).abs() > 1e-12 {
            return invalid(format!(
                "plans do not share the intermediate time: {} vs {}",
                first.t, second.s
            ));
        }
        let inner = self.evolve(second, a)?;
        self.evolve(first, &inner)
    }

    /// `‖(α_{s,t+h}A − α_{s,t−h}A)/(2h) − α_{s,t}(i L_{Φ(t)} A)‖`.
    ///
    /// Both sides are evaluated after `α_{s,t}` is peeled off by the cocycle
    /// law and isometry, which leaves the short-time maps `α_{t,t±h}`.
    pub fn generator_residual(&self, t: f64, a: &LatticeOperator, h: f64) -> Result<f64> {
        if h == 0.0 || !h.is_finite() {
            return invalid("finite-difference step must be nonzero");
        }
        let h = h.abs();
        self.chain.check_time(t - h)?;
        self.chain.check_time(t + h)?;
        let short = |to: f64| -> Result<PropagatorPlan> {
            if self.chain.is_static() {
                PropagatorPlan::new(&self.chain, t, to, 1.0)
            } else {
                PropagatorPlan::fixed_steps(&self.chain, t, to, RESIDUAL_SUBSTEPS)
            }
        };
        let fwd = self.evolve(&short(t + h)?, a)?;
        let bwd = self.evolve(&short(t - h)?, a)?;
        let diff = fwd.sub(&bwd)?.scale_re(0.5 / h);
        let gen = self.chain.liouvillian_apply(t, a)?.scale(crate::linalg::I);
        Ok(diff.sub(&gen)?.op_norm())
    }
}

fn add_part(parts: &mut Vec<(CoefficientFn, CMat)>, c: CoefficientFn, m: CMat) {
    if let Some((_, acc)) = parts.iter_mut().find(|(k, _)| *k == c) {
        *acc += &m;
    } else {
        parts.push((c, m));
    }
}

/// One-shot `α_{s,t}(A)`.
pub fn evolve(chain: &ZeroChain, plan: &PropagatorPlan, a: &LatticeOperator) -> Result<LatticeOperator> {
    Propagator::new(chain)?.evolve(plan, a)
}
