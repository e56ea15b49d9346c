//! Finite-lattice quasi-local algebra: spins on any metric graph, fermions on
//! chains via Jordan-Wigner.
//!
//! A [`LatticeOperator`] is a dense block on an explicit support. Spin blocks
//! use the tensor order of ascending site index (first site most
//! significant). Fermion blocks use the local Jordan-Wigner representation of
//! their support; moving between supports goes through Majorana monomials.

pub mod basis;
pub mod expansion;
pub mod fermion;

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::MetricGraph;
use crate::linalg::{self, CMat, C64, ONE, ZERO};
use basis::{LocalBasis, PauliString};

pub const DEFAULT_DENSE_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Backend {
    Spin { local_dim: usize },
    Fermion { flavors: usize },
}

pub struct AlgebraContext {
    graph: MetricGraph,
    backend: Backend,
    dense_cap: usize,
    basis: LocalBasis,
}

impl fmt::Debug for AlgebraContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlgebraContext")
            .field("sites", &self.graph.len())
            .field("backend", &self.backend)
            .field("dense_cap", &self.dense_cap)
            .finish()
    }
}

impl AlgebraContext {
    pub fn new(graph: MetricGraph, backend: Backend, dense_cap: usize) -> Result<Arc<Self>> {
        let basis = match backend {
            Backend::Spin { local_dim } => {
                if local_dim < 2 {
                    return invalid(format!("spin local dimension must be at least 2, got {local_dim}"));
                }
                LocalBasis::new(local_dim)
            }
            Backend::Fermion { flavors } => {
                if flavors == 0 {
                    return invalid("fermion backend needs at least one flavor");
                }
                if !graph.is_path_chain() {
                    return invalid("fermion backend requires a chain with the path metric");
                }
                LocalBasis::pauli()
            }
        };
        if dense_cap < 1 {
            return invalid("dense cap must be positive");
        }
        Ok(Arc::new(AlgebraContext { graph, backend, dense_cap, basis }))
    }

    pub fn spin(graph: MetricGraph, local_dim: usize) -> Result<Arc<Self>> {
        Self::new(graph, Backend::Spin { local_dim }, DEFAULT_DENSE_CAP)
    }

    pub fn fermion(graph: MetricGraph, flavors: usize) -> Result<Arc<Self>> {
        Self::new(graph, Backend::Fermion { flavors }, DEFAULT_DENSE_CAP)
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn dense_cap(&self) -> usize {
        self.dense_cap
    }

    pub fn is_fermion(&self) -> bool {
        matches!(self.backend, Backend::Fermion { .. })
    }

    pub fn local_dim(&self) -> usize {
        match self.backend {
            Backend::Spin { local_dim } => local_dim,
            Backend::Fermion { flavors } => 1 << flavors,
        }
    }

    pub fn flavors(&self) -> usize {
        match self.backend {
            Backend::Spin { .. } => 0,
            Backend::Fermion { flavors } => flavors,
        }
    }

    pub(crate) fn basis(&self) -> &LocalBasis {
        &self.basis
    }

    /// Dense dimension of a block on `n_sites` sites, checked against the cap.
    pub fn block_dim(&self, n_sites: usize) -> Result<usize> {
        let d = self.local_dim();
        let mut dim: usize = 1;
        for _ in 0..n_sites {
            dim = dim.checked_mul(d).filter(|&v| v <= self.dense_cap).ok_or_else(|| {
                Error::ResourceLimit(format!(
                    "a block on {n_sites} sites of dimension {d} exceeds the dense cap {}",
                    self.dense_cap
                ))
            })?;
        }
        Ok(dim)
    }

    pub fn fits(&self, n_sites: usize) -> bool {
        self.block_dim(n_sites).is_ok()
    }

    pub(crate) fn check_region(&self, region: &[usize]) -> Result<()> {
        for &s in region {
            self.graph.check_site(s)?;
        }
        Ok(())
    }
}

/// Sorted, deduplicated copy of a site list.
pub fn normalize_sites(sites: &[usize]) -> Vec<usize> {
    let mut v = sites.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.binary_search(x).is_ok()).collect()
}

pub fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

/// `table[a][k]`: index in the superset basis of sub-index `a`, rest-index `k`.
fn subset_table(d: usize, superset: &[usize], subset: &[usize]) -> Vec<Vec<usize>> {
    let m = superset.len();
    let in_sub: Vec<bool> = superset.iter().map(|s| subset.binary_search(s).is_ok()).collect();
    let n_sub = in_sub.iter().filter(|&&b| b).count();
    let dim_sub = d.pow(n_sub as u32);
    let dim_rest = d.pow((m - n_sub) as u32);
    let mut table = vec![vec![0usize; dim_rest]; dim_sub];
    let total = d.pow(m as u32);
    for idx in 0..total {
        let ds = basis::digits(idx, d, m);
        let (mut a, mut k) = (0usize, 0usize);
        for (q, &x) in ds.iter().enumerate() {
            if in_sub[q] {
                a = a * d + x;
            } else {
                k = k * d + x;
            }
        }
        table[a][k] = idx;
    }
    table
}

/// `(B at tensor position pos) · X` for a block on `m` sites of dimension `d`.
fn factor_left(b: &CMat, pos: usize, m: usize, d: usize, x: &CMat) -> CMat {
    let inner = d.pow((m - pos - 1) as u32);
    let outer = d.pow(pos as u32);
    let mut out = CMat::zeros(x.raw_dim());
    for o in 0..outer {
        for c in 0..inner {
            let row = |a: usize| o * d * inner + a * inner + c;
            for a in 0..d {
                let mut dst = out.row_mut(row(a));
                for bb in 0..d {
                    let w = b[[a, bb]];
                    if w != ZERO {
                        dst.scaled_add(w, &x.row(row(bb)));
                    }
                }
            }
        }
    }
    out
}

/// `X · (B at tensor position pos)`.
fn factor_right(x: &CMat, b: &CMat, pos: usize, m: usize, d: usize) -> CMat {
    let inner = d.pow((m - pos - 1) as u32);
    let outer = d.pow(pos as u32);
    let mut out = CMat::zeros(x.raw_dim());
    for o in 0..outer {
        for c in 0..inner {
            let col = |a: usize| o * d * inner + a * inner + c;
            for bb in 0..d {
                let mut dst = out.column_mut(col(bb));
                for a in 0..d {
                    let w = b[[a, bb]];
                    if w != ZERO {
                        dst.scaled_add(w, &x.column(col(a)));
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone)]
pub struct LatticeOperator {
    ctx: Arc<AlgebraContext>,
    support: Vec<usize>,
    block: CMat,
}

impl fmt::Debug for LatticeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeOperator")
            .field("support", &self.support)
            .field("dim", &self.block.nrows())
            .finish()
    }
}

impl LatticeOperator {
    pub fn new(ctx: &Arc<AlgebraContext>, support: &[usize], block: CMat) -> Result<Self> {
        let sorted = normalize_sites(support);
        if sorted.len() != support.len() || sorted.as_slice() != support {
            return invalid("support must be strictly ascending site indices");
        }
        ctx.check_region(support)?;
        let dim = ctx.block_dim(support.len())?;
        if block.dim() != (dim, dim) {
            return invalid(format!(
                "block is {:?} but support of {} sites needs {dim}×{dim}",
                block.dim(),
                support.len()
            ));
        }
        Ok(LatticeOperator { ctx: Arc::clone(ctx), support: sorted, block })
    }

    pub fn scalar(ctx: &Arc<AlgebraContext>, c: C64) -> Self {
        LatticeOperator { ctx: Arc::clone(ctx), support: Vec::new(), block: ndarray::array![[c]] }
    }

    pub fn identity(ctx: &Arc<AlgebraContext>) -> Self {
        Self::scalar(ctx, ONE)
    }

    pub fn zero(ctx: &Arc<AlgebraContext>) -> Self {
        Self::scalar(ctx, ZERO)
    }

    pub fn zero_on(ctx: &Arc<AlgebraContext>, support: &[usize]) -> Result<Self> {
        let dim = ctx.block_dim(support.len())?;
        Self::new(ctx, support, Array2::zeros((dim, dim)))
    }

    /// Single-site operator from a local matrix.
    pub fn local(ctx: &Arc<AlgebraContext>, site: usize, mat: CMat) -> Result<Self> {
        Self::new(ctx, &[site], mat)
    }

    /// Product of Paulis on distinct sites of a spin-½ context, e.g. `[(0,'Z'),(1,'Z')]`.
    pub fn pauli(ctx: &Arc<AlgebraContext>, ops: &[(usize, char)]) -> Result<Self> {
        if ctx.backend() != (Backend::Spin { local_dim: 2 }) {
            return Err(Error::UnsupportedBackend("Pauli strings need a spin-½ context".into()));
        }
        let mut pairs: Vec<(usize, u8)> = Vec::with_capacity(ops.len());
        for &(s, c) in ops {
            let p = match c.to_ascii_uppercase() {
                'I' => 0,
                'X' => 1,
                'Y' => 2,
                'Z' => 3,
                other => return invalid(format!("unknown Pauli label {other:?}")),
            };
            pairs.push((s, p));
        }
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return invalid("repeated site in Pauli string");
        }
        let support: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let block = PauliString(pairs.iter().map(|p| p.1).collect()).to_matrix();
        Self::new(ctx, &support, block)
    }

    /// Complex Gaussian-like random block (uniform entries in the unit square).
    pub fn random<R: Rng>(ctx: &Arc<AlgebraContext>, support: &[usize], rng: &mut R) -> Result<Self> {
        let dim = ctx.block_dim(support.len())?;
        let block = Array2::from_shape_fn((dim, dim), |_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        Self::new(ctx, &normalize_sites(support), block)
    }

    pub fn random_hermitian<R: Rng>(ctx: &Arc<AlgebraContext>, support: &[usize], rng: &mut R) -> Result<Self> {
        let a = Self::random(ctx, support, rng)?;
        let h = &a.block + &linalg::adjoint(&a.block);
        Self::new(ctx, &a.support, h)
    }

    pub fn context(&self) -> &Arc<AlgebraContext> {
        &self.ctx
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn block(&self) -> &CMat {
        &self.block
    }

    pub fn into_block(self) -> CMat {
        self.block
    }

    pub fn dim(&self) -> usize {
        self.block.nrows()
    }

    pub fn same_context(&self, other: &LatticeOperator) -> Result<()> {
        if Arc::ptr_eq(&self.ctx, &other.ctx) {
            Ok(())
        } else {
            invalid("operators belong to different algebra contexts")
        }
    }

    pub fn map_block(&self, f: impl FnOnce(&CMat) -> CMat) -> Self {
        LatticeOperator { ctx: Arc::clone(&self.ctx), support: self.support.clone(), block: f(&self.block) }
    }

    pub fn adjoint(&self) -> Self {
        self.map_block(linalg::adjoint)
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map_block(|b| b.mapv(|z| z * c))
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.map_block(|b| b.mapv(|z| z * c))
    }

    /// The same abstract operator represented on a larger support.
    pub fn embed(&self, support: &[usize]) -> Result<Self> {
        let target = normalize_sites(support);
        if target == self.support {
            return Ok(self.clone());
        }
        if !is_subset(&self.support, &target) {
            return invalid(format!(
                "support {:?} is not contained in {:?}",
                self.support, target
            ));
        }
        self.ctx.check_region(&target)?;
        let dim = self.ctx.block_dim(target.len())?;
        if self.ctx.is_fermion() {
            let terms = self.majorana_terms();
            let n = self.ctx.flavors();
            let relabeled: Vec<(Vec<usize>, C64)> = terms
                .into_iter()
                .map(|(mono, c)| (relabel_modes(&mono, &self.support, &target, n), c))
                .collect();
            let block = fermion::from_majorana(&relabeled, n * target.len());
            return Self::new(&self.ctx, &target, block);
        }
        let d = self.ctx.local_dim();
        let table = subset_table(d, &target, &self.support);
        let mut block = Array2::zeros((dim, dim));
        for (a, row_a) in table.iter().enumerate() {
            for (b, row_b) in table.iter().enumerate() {
                let v = self.block[[a, b]];
                if v == ZERO {
                    continue;
                }
                for (&i, &j) in row_a.iter().zip(row_b) {
                    block[[i, j]] = v;
                }
            }
        }
        Ok(LatticeOperator { ctx: Arc::clone(&self.ctx), support: target, block })
    }

    fn binary(&self, other: &LatticeOperator) -> Result<(Vec<usize>, CMat, CMat)> {
        self.same_context(other)?;
        let u = union(&self.support, &other.support);
        let a = self.embed(&u)?.block;
        let b = other.embed(&u)?.block;
        Ok((u, a, b))
    }

    pub fn add(&self, other: &LatticeOperator) -> Result<Self> {
        let (u, a, b) = self.binary(other)?;
        Self::new(&self.ctx, &u, a + b)
    }

    pub fn sub(&self, other: &LatticeOperator) -> Result<Self> {
        let (u, a, b) = self.binary(other)?;
        Self::new(&self.ctx, &u, a - b)
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &LatticeOperator) -> Result<Self> {
        let (u, a, b) = self.binary(other)?;
        Self::new(&self.ctx, &u, a.dot(&b))
    }

    /// `[self, other] = self·other − other·self` on the union support.
    pub fn commutator(&self, other: &LatticeOperator) -> Result<Self> {
        self.same_context(other)?;
        if !self.ctx.is_fermion() && intersection(&self.support, &other.support).is_empty() {
            return Self::zero_on(&self.ctx, &union(&self.support, &other.support));
        }
        if !self.ctx.is_fermion() && other.support.len() == 1 {
            if let Ok(pos) = self.support.binary_search(&other.support[0]) {
                let d = self.ctx.local_dim();
                let left = factor_left(&other.block, pos, self.support.len(), d, &self.block);
                let right = factor_right(&self.block, &other.block, pos, self.support.len(), d);
                return Self::new(&self.ctx, &self.support, right - left);
            }
        }
        let (u, a, b) = self.binary(other)?;
        let ab = a.dot(&b);
        let ba = b.dot(&a);
        Self::new(&self.ctx, &u, ab - ba)
    }

    pub fn anticommutator(&self, other: &LatticeOperator) -> Result<Self> {
        let (u, a, b) = self.binary(other)?;
        let ab = a.dot(&b);
        let ba = b.dot(&a);
        Self::new(&self.ctx, &u, ab + ba)
    }

    /// Spectral norm of the block.
    pub fn op_norm(&self) -> f64 {
        linalg::spectral_norm(&self.block)
    }

    /// `‖self − other‖`.
    pub fn distance(&self, other: &LatticeOperator) -> Result<f64> {
        Ok(self.sub(other)?.op_norm())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::is_hermitian(&self.block, tol)
    }

    /// Normalized trace `ω^tr(A) = tr(block)/dim`.
    pub fn tracial_state(&self) -> C64 {
        linalg::trace(&self.block) / self.dim() as f64
    }

    /// Conditional expectation `E_M` with respect to the tracial state; the
    /// result is supported on `support ∩ M`.
    pub fn conditional_expectation(&self, region: &[usize]) -> Result<Self> {
        let region = normalize_sites(region);
        self.ctx.check_region(&region)?;
        let keep = intersection(&self.support, &region);
        if keep.len() == self.support.len() {
            return Ok(self.clone());
        }
        if self.ctx.is_fermion() {
            let n = self.ctx.flavors();
            let kept: Vec<(Vec<usize>, C64)> = self
                .majorana_terms()
                .into_iter()
                .filter(|(mono, _)| {
                    mono.iter().all(|&g| region.binary_search(&self.support[g / 2 / n]).is_ok())
                })
                .map(|(mono, c)| (relabel_modes(&mono, &self.support, &keep, n), c))
                .collect();
            let block = fermion::from_majorana(&kept, n * keep.len());
            return Self::new(&self.ctx, &keep, block);
        }
        let d = self.ctx.local_dim();
        let table = subset_table(d, &self.support, &keep);
        let rest = table.first().map_or(1, |r| r.len());
        let norm = 1.0 / rest as f64;
        let dim = table.len();
        let block = Array2::from_shape_fn((dim, dim), |(a, b)| {
            let mut acc = ZERO;
            for (&i, &j) in table[a].iter().zip(&table[b]) {
                acc += self.block[[i, j]];
            }
            acc * norm
        });
        Self::new(&self.ctx, &keep, block)
    }

    /// `(1 − E_M)(A)` represented on the operator's own support.
    pub fn residual_outside(&self, region: &[usize]) -> Result<Self> {
        let e = self.conditional_expectation(region)?;
        if e.support.len() == self.support.len() {
            return Self::zero_on(&self.ctx, &self.support);
        }
        self.sub(&e)
    }

    /// Gauge automorphism `g_φ(A) = e^{iφN} A e^{−iφN}`; the identity on spins.
    pub fn grading(&self, phi: f64) -> Self {
        if !self.ctx.is_fermion() {
            return self.clone();
        }
        let counts: Vec<u32> = (0..self.dim()).map(|r| (r as u64).count_ones()).collect();
        let mut block = self.block.clone();
        for ((r, c), v) in block.indexed_iter_mut() {
            let dn = counts[r] as f64 - counts[c] as f64;
            *v *= C64::from_polar(1.0, phi * dn);
        }
        self.map_block(|_| block)
    }

    /// `‖g_π(A) − A‖ ≤ tol`.
    pub fn is_even(&self, tol: f64) -> bool {
        if !self.ctx.is_fermion() {
            return true;
        }
        let diff = &self.grading(std::f64::consts::PI).block - &self.block;
        linalg::spectral_norm(&diff) <= tol
    }

    /// Majorana monomials (local mode labels) and coefficients; fermions only.
    pub fn majorana_terms(&self) -> Vec<(Vec<usize>, C64)> {
        fermion::majorana_expansion(&self.block, self.ctx.flavors() * self.support.len())
    }

    /// Nonzero coefficients in the per-site orthonormal string basis; spins only.
    pub fn basis_terms(&self) -> Vec<(Vec<usize>, C64)> {
        let basis = self.ctx.basis();
        let m = self.support.len();
        let coeffs = basis::expand(&self.block, basis, m);
        let d2 = basis.d * basis.d;
        coeffs
            .into_iter()
            .enumerate()
            .filter(|(_, c)| c.norm() != 0.0)
            .map(|(idx, c)| (basis::digits(idx, d2, m), c))
            .collect()
    }
}

/// Maps local Majorana labels on `from` to local labels on `to ⊇ from`.
fn relabel_modes(mono: &[usize], from: &[usize], to: &[usize], flavors: usize) -> Vec<usize> {
    mono.iter()
        .map(|&g| {
            let mode = g / 2;
            let (pos, flavor) = (mode / flavors, mode % flavors);
            let site = from[pos];
            let new_pos = to.binary_search(&site).expect("target support contains the source");
            (new_pos * flavors + flavor) * 2 + g % 2
        })
        .collect()
}

/// Jordan-Wigner creation and annihilation operators `(a*_{x,i}, a_{x,i})`,
/// flavors counted from 0.
pub fn car_generators(
    ctx: &Arc<AlgebraContext>,
    site: usize,
    flavor: usize,
) -> Result<(LatticeOperator, LatticeOperator)> {
    let n = match ctx.backend() {
        Backend::Fermion { flavors } => flavors,
        Backend::Spin { .. } => {
            return Err(Error::UnsupportedBackend("CAR generators need the fermion backend".into()))
        }
    };
    ctx.graph().check_site(site)?;
    if flavor >= n {
        return invalid(format!("flavor {flavor} out of range (n = {n})"));
    }
    let a = fermion::annihilation(flavor, n);
    let ann = LatticeOperator::new(ctx, &[site], a)?;
    Ok((ann.adjoint(), ann))
}

/// Number operator `n_x = Σ_i a*_{x,i} a_{x,i}`.
pub fn number_operator(ctx: &Arc<AlgebraContext>, site: usize) -> Result<LatticeOperator> {
    let mut total = LatticeOperator::zero_on(ctx, &[site])?;
    for i in 0..ctx.flavors() {
        let (cr, an) = car_generators(ctx, site, i)?;
        total = total.add(&cr.mul(&an)?)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests;
