//! JSON form of an operator: support, per-site basis labels and coefficients.
//!
//! Spin labels are `I, X, Y, Z` for spin-½ and `W<a>.<b>` (Weyl `X^a Z^b`)
//! otherwise. Fermion labels name the local Majorana factors of a site,
//! e.g. `"g0g1"`, with `"1"` for the identity.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{fermion, AlgebraContext, Backend, LatticeOperator};
use crate::error::{invalid, Result};
use crate::linalg::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionTerm {
    pub labels: Vec<String>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorExpansion {
    pub backend: Backend,
    pub support: Vec<usize>,
    pub terms: Vec<ExpansionTerm>,
}

impl OperatorExpansion {
    pub fn of(op: &LatticeOperator) -> Self {
        let ctx = op.context();
        let m = op.support().len();
        let terms = if ctx.is_fermion() {
            let n = ctx.flavors();
            op.majorana_terms()
                .into_iter()
                .map(|(mono, c)| {
                    let mut labels = vec![String::new(); m];
                    for g in mono {
                        let local = g % (2 * n);
                        labels[g / (2 * n)].push_str(&format!("g{local}"));
                    }
                    for l in labels.iter_mut().filter(|l| l.is_empty()) {
                        l.push('1');
                    }
                    ExpansionTerm { labels, re: c.re, im: c.im }
                })
                .collect()
        } else {
            let basis = ctx.basis();
            op.basis_terms()
                .into_iter()
                .map(|(ds, c)| ExpansionTerm {
                    labels: ds.iter().map(|&p| basis.labels[p].clone()).collect(),
                    re: c.re,
                    im: c.im,
                })
                .collect()
        };
        OperatorExpansion { backend: ctx.backend(), support: op.support().to_vec(), terms }
    }

    pub fn to_operator(&self, ctx: &Arc<AlgebraContext>) -> Result<LatticeOperator> {
        if self.backend != ctx.backend() {
            return invalid(format!("expansion backend {:?} does not match context {:?}", self.backend, ctx.backend()));
        }
        let m = self.support.len();
        for t in &self.terms {
            if t.labels.len() != m {
                return invalid(format!("term has {} labels for {m} support sites", t.labels.len()));
            }
        }
        if ctx.is_fermion() {
            let n = ctx.flavors();
            let mut terms = Vec::with_capacity(self.terms.len());
            for t in &self.terms {
                let mut mono = Vec::new();
                for (pos, label) in t.labels.iter().enumerate() {
                    if label == "1" {
                        continue;
                    }
                    for part in label.split('g').skip(1) {
                        let local: usize = part
                            .parse()
                            .map_err(|_| crate::Error::InvalidArgument(format!("bad Majorana label {label:?}")))?;
                        if local >= 2 * n {
                            return invalid(format!("Majorana index {local} out of range in {label:?}"));
                        }
                        mono.push(pos * 2 * n + local);
                    }
                }
                if mono.windows(2).any(|w| w[0] >= w[1]) {
                    return invalid("Majorana labels must be strictly increasing");
                }
                terms.push((mono, C64::new(t.re, t.im)));
            }
            let block = fermion::from_majorana(&terms, n * m);
            return LatticeOperator::new(ctx, &self.support, block);
        }
        let basis = ctx.basis();
        let d2 = basis.d * basis.d;
        let mut coeffs = vec![C64::new(0.0, 0.0); d2.pow(m as u32)];
        for t in &self.terms {
            let mut idx = 0usize;
            for label in &t.labels {
                let p = basis
                    .label_index(label)
                    .ok_or_else(|| crate::Error::InvalidArgument(format!("unknown basis label {label:?}")))?;
                idx = idx * d2 + p;
            }
            coeffs[idx] += C64::new(t.re, t.im);
        }
        ctx.block_dim(m)?;
        let block = super::basis::reconstruct(&coeffs, basis, m);
        LatticeOperator::new(ctx, &self.support, block)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("expansion serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| crate::Error::InvalidArgument(format!("operator JSON: {e}")))
    }
}
