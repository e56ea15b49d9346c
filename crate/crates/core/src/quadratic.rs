//! Exact free-fermion engine for spin-½ chains with Majorana-bilinear terms.
//!
//! Uses the Jordan-Wigner map with `σ^x` strings,
//! `γ_{2j} = X^{⊗j} Z_j`, `γ_{2j+1} = X^{⊗j} Y_j`, under which
//! `σ^x_j = iγ_{2j}γ_{2j+1}` and `σ^z_jσ^z_{j+1} = iγ_{2j+1}γ_{2j+2}`.
//! Operators are `c + Q(K)` with `Q(K) = (i/4) Σ K_ab γ_a γ_b`, `K` real
//! antisymmetric. The string of `γ_aγ_b` covers every site between the two
//! modes, so `E_M` keeps `K_ab` exactly when that interval lies in `M`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use ndarray::{Array1, Array2};
use ndarray_linalg::SVD;

use crate::algebra::basis::PauliString;
use crate::algebra::{AlgebraContext, Backend, LatticeOperator};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMat, C64, I};
use crate::localization::Localizable;
use crate::propagator::{Integrator, PropagatorPlan};
use crate::zero_chain::{CoefficientFn, ZeroChain};

/// Imaginary parts of `K` above this are rejected as non-Hermitian input.
const REAL_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 14;

/// `γ_aγ_b = i^k · P` for every `a < b` on an `n`-site chain.
pub struct BilinearTable {
    n_sites: usize,
    by_string: HashMap<PauliString, (usize, usize, u8)>,
    strings: Vec<Vec<(PauliString, u8)>>,
}

fn majorana_string(a: usize, n: usize) -> PauliString {
    let j = a / 2;
    let mut ops = vec![0u8; n];
    for op in ops.iter_mut().take(j) {
        *op = 1;
    }
    ops[j] = if a % 2 == 0 { 3 } else { 2 };
    PauliString(ops)
}

impl BilinearTable {
    pub fn new(n_sites: usize) -> Self {
        let m = 2 * n_sites;
        let singles: Vec<PauliString> = (0..m).map(|a| majorana_string(a, n_sites)).collect();
        let mut by_string = HashMap::with_capacity(m * (m - 1) / 2);
        let mut strings = vec![Vec::new(); m];
        for a in 0..m {
            for b in 0..m {
                if b <= a {
                    strings[a].push((PauliString(Vec::new()), 0));
                    continue;
                }
                let (k, p) = singles[a].mul(&singles[b]);
                by_string.insert(p.clone(), (a, b, k));
                strings[a].push((p, k));
            }
        }
        BilinearTable { n_sites, by_string, strings }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }
}

fn table_for(n: usize) -> Arc<BilinearTable> {
    static CACHE: OnceLock<std::sync::Mutex<HashMap<usize, Arc<BilinearTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("bilinear table cache");
    Arc::clone(guard.entry(n).or_insert_with(|| Arc::new(BilinearTable::new(n))))
}

fn site_of(mode: usize) -> usize {
    mode / 2
}

/// `c + (i/4) Σ K_ab γ_a γ_b` on an `n`-site chain.
#[derive(Clone, Debug, PartialEq)]
pub struct MajoranaForm {
    pub n_sites: usize,
    pub k: Array2<f64>,
    pub constant: f64,
}

impl MajoranaForm {
    pub fn zero(n_sites: usize) -> Self {
        MajoranaForm { n_sites, k: Array2::zeros((2 * n_sites, 2 * n_sites)), constant: 0.0 }
    }

    /// Converts a Hermitian operator built from bilinears and the identity.
    pub fn from_operator(op: &LatticeOperator) -> Result<Self> {
        let ctx = op.context();
        check_chain(ctx)?;
        let n = ctx.graph().len();
        let table = table_for(n);
        let mut form = Self::zero(n);
        for (digits, c) in op.basis_terms() {
            if c.norm() < 1e-14 {
                continue;
            }
            let mut ops = vec![0u8; n];
            for (pos, &p) in digits.iter().enumerate() {
                ops[op.support()[pos]] = p as u8;
            }
            let p = PauliString(ops);
            if p.is_identity() {
                if c.im.abs() > REAL_TOL {
                    return invalid("identity coefficient is not real");
                }
                form.constant += c.re;
                continue;
            }
            let &(a, b, k) = table
                .by_string
                .get(&p)
                .ok_or_else(|| Error::UnsupportedBackend(format!("{p:?} is not a Majorana bilinear")))?;
            // c·P = c·conj(i^k)·γ_aγ_b = (i/2) K_ab γ_aγ_b
            let v = C64::new(0.0, -2.0) * crate::algebra::basis::phase_of(k).conj() * c;
            if v.im.abs() > REAL_TOL {
                return invalid("operator is not Hermitian");
            }
            form.k[[a, b]] += v.re;
            form.k[[b, a]] -= v.re;
        }
        Ok(form)
    }

    /// Dense operator on the whole chain.
    pub fn to_operator(&self, ctx: &Arc<AlgebraContext>) -> Result<LatticeOperator> {
        check_chain(ctx)?;
        let n = self.n_sites;
        if ctx.graph().len() != n {
            return invalid("context size does not match the form");
        }
        let sites: Vec<usize> = (0..n).collect();
        let dim = ctx.block_dim(n)?;
        let table = table_for(n);
        let mut block = linalg::identity(dim).mapv(|z| z * self.constant);
        for a in 0..2 * n {
            for b in a + 1..2 * n {
                let v = self.k[[a, b]];
                if v == 0.0 {
                    continue;
                }
                let (p, k) = &table.strings[a][b];
                let c = I * 0.5 * v * crate::algebra::basis::phase_of(*k);
                block.scaled_add(c, &p.to_matrix());
            }
        }
        LatticeOperator::new(ctx, &sites, block)
    }

    pub fn sub(&self, other: &MajoranaForm) -> MajoranaForm {
        MajoranaForm { n_sites: self.n_sites, k: &self.k - &other.k, constant: self.constant - other.constant }
    }

    pub fn scale(&self, s: f64) -> MajoranaForm {
        MajoranaForm { n_sites: self.n_sites, k: &self.k * s, constant: self.constant * s }
    }

    /// `[self, other] = i Q([K_self, K_other])`, returned as `Q(·)` of the real matrix.
    pub fn commutator_matrix(&self, other: &MajoranaForm) -> Array2<f64> {
        self.k.dot(&other.k) - other.k.dot(&self.k)
    }

    /// `E_M`: keeps `K_ab` when every site between the two modes lies in `M`.
    pub fn conditional_expectation(&self, region: &[usize]) -> MajoranaForm {
        let mut out = self.clone();
        let m = 2 * self.n_sites;
        for a in 0..m {
            for b in a + 1..m {
                if !interval_inside(site_of(a), site_of(b), region) {
                    out.k[[a, b]] = 0.0;
                    out.k[[b, a]] = 0.0;
                }
            }
        }
        out
    }

    /// Operator norm `|c| + ‖K‖_1/4`, with `‖·‖_1` the nuclear norm.
    pub fn op_norm(&self) -> f64 {
        self.constant.abs() + nuclear_norm(&self.k) / 4.0
    }
}

fn interval_inside(lo: usize, hi: usize, region: &[usize]) -> bool {
    let start = region.partition_point(|&s| s < lo);
    let end = region.partition_point(|&s| s <= hi);
    end - start == hi - lo + 1
}

fn nuclear_norm(k: &Array2<f64>) -> f64 {
    if k.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    match k.svd(false, false) {
        Ok((_, s, _)) => s.sum(),
        Err(_) => f64::NAN,
    }
}

impl Localizable for MajoranaForm {
    fn norm(&self) -> f64 {
        self.op_norm()
    }

    fn tail_norm(&self, region: &[usize]) -> Result<f64> {
        let kept = self.conditional_expectation(region);
        Ok(nuclear_norm(&(&self.k - &kept.k)) / 4.0)
    }

    fn support_sites(&self) -> Vec<usize> {
        let m = 2 * self.n_sites;
        let (mut lo, mut hi) = (usize::MAX, 0);
        for a in 0..m {
            for b in a + 1..m {
                if self.k[[a, b]] != 0.0 {
                    lo = lo.min(site_of(a));
                    hi = hi.max(site_of(b));
                }
            }
        }
        if lo == usize::MAX {
            Vec::new()
        } else {
            (lo..=hi).collect()
        }
    }
}

fn check_chain(ctx: &AlgebraContext) -> Result<()> {
    if ctx.backend() != (Backend::Spin { local_dim: 2 }) || !ctx.graph().is_path_chain() {
        return Err(Error::UnsupportedBackend("the quadratic engine needs a spin-½ chain".into()));
    }
    Ok(())
}

/// Free-fermion Heisenberg dynamics of a zero-chain with bilinear terms.
pub struct QuadraticPropagator {
    chain: ZeroChain,
    n_sites: usize,
    parts: Vec<(CoefficientFn, Array2<f64>)>,
    eig: OnceLock<std::result::Result<(Array1<f64>, CMat), Error>>,
}

impl QuadraticPropagator {
    pub fn new(chain: &ZeroChain) -> Result<Self> {
        let ctx = chain.context();
        check_chain(ctx)?;
        let n = ctx.graph().len();
        let mut parts: Vec<(CoefficientFn, Array2<f64>)> = Vec::new();
        for (_, p) in chain.all_pieces() {
            let form = MajoranaForm::from_operator(&p.op)?;
            let (key, k) = if p.coeff.is_constant() {
                (CoefficientFn::one(), form.k * p.coeff.eval(0.0))
            } else {
                (p.coeff.clone(), form.k)
            };
            if let Some((_, acc)) = parts.iter_mut().find(|(c, _)| *c == key) {
                *acc += &k;
            } else {
                parts.push((key, k));
            }
        }
        Ok(QuadraticPropagator { chain: chain.clone(), n_sites: n, parts, eig: OnceLock::new() })
    }

    pub fn chain(&self) -> &ZeroChain {
        &self.chain
    }

    fn generator(&self, t: f64) -> Array2<f64> {
        let m = 2 * self.n_sites;
        let mut k = Array2::zeros((m, m));
        for (c, part) in &self.parts {
            k.scaled_add(c.eval(t), part);
        }
        k
    }

    /// `e^{−h K}` through the Hermitian matrix `iK`.
    fn rotation_step(k: &Array2<f64>, h: f64) -> Result<Array2<f64>> {
        let herm = k.mapv(|v| C64::new(0.0, v));
        let (vals, vecs) = linalg::hermitian_eigh(&herm)?;
        Ok(Self::rotation_from(&vals, &vecs, h))
    }

    fn rotation_from(vals: &Array1<f64>, vecs: &CMat, h: f64) -> Array2<f64> {
        // −hK = ih(iK), and spectral_unitary(dt) gives exp(−i·dt·(iK))
        linalg::spectral_unitary(vals, vecs, -h).mapv(|z| z.re)
    }

    /// `R(s,t)` with `α_{s,t}(γ(v)) = γ(R v)`.
    pub fn rotation(&self, plan: &PropagatorPlan) -> Result<Array2<f64>> {
        plan.validate(&self.chain)?;
        let m = 2 * self.n_sites;
        if plan.s == plan.t || self.parts.is_empty() {
            return Ok(Array2::eye(m));
        }
        match plan.integrator {
            Integrator::ExactStatic => {
                let (vals, vecs) = self
                    .eig
                    .get_or_init(|| {
                        let herm = self.generator(self.chain.interval().0).mapv(|v| C64::new(0.0, v));
                        linalg::hermitian_eigh(&herm)
                    })
                    .as_ref()
                    .map_err(Clone::clone)?;
                Ok(Self::rotation_from(vals, vecs, plan.t - plan.s))
            }
            Integrator::Magnus2 => {
                let span = (plan.t - plan.s).abs();
                let mut n = (span / plan.step).round().max(1.0) as usize;
                let mut coarse = self.magnus(plan.s, plan.t, n)?;
                let Some(tol) = plan.tolerance else { return Ok(coarse) };
                for _ in 0..MAX_HALVINGS {
                    n *= 2;
                    let fine = self.magnus(plan.s, plan.t, n)?;
                    let err = (&coarse - &fine).iter().fold(0.0_f64, |a, v| a.max(v.abs())) * m as f64 / 3.0;
                    if err <= tol {
                        return Ok(fine);
                    }
                    coarse = fine;
                }
                Err(Error::Numerical(format!("Magnus integration did not reach tolerance {tol:e}")))
            }
        }
    }

    fn magnus(&self, s: f64, t: f64, n: usize) -> Result<Array2<f64>> {
        let h = (t - s) / n as f64;
        let mut r = Array2::eye(2 * self.n_sites);
        for i in 0..n {
            let mid = s + (i as f64 + 0.5) * h;
            r = r.dot(&Self::rotation_step(&self.generator(mid), h)?);
        }
        Ok(r)
    }

    /// `α_{s,t}(c + Q(K)) = c + Q(R K Rᵀ)`.
    pub fn evolve(&self, plan: &PropagatorPlan, a: &MajoranaForm) -> Result<MajoranaForm> {
        if a.n_sites != self.n_sites {
            return invalid("form and chain sizes differ");
        }
        let r = self.rotation(plan)?;
        Ok(Self::apply(&r, a))
    }

    pub fn apply(r: &Array2<f64>, a: &MajoranaForm) -> MajoranaForm {
        MajoranaForm { n_sites: a.n_sites, k: r.dot(&a.k).dot(&r.t()), constant: a.constant }
    }
}
