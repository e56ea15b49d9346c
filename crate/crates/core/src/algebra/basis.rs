//! Orthonormal operator bases and fast coefficient transforms.
//!
//! A block on `m` sites of local dimension `d` is expanded in tensor products
//! of a per-site basis of `d²` unitaries, orthonormal under `tr(S*T)/d`. For
//! `d = 2` the basis is `I, X, Y, Z`; otherwise Weyl operators `X^a Z^b`.

use ndarray::Array2;

use crate::linalg::{kron, CMat, C64, I, ONE, ZERO};

#[derive(Clone, Debug)]
pub struct LocalBasis {
    pub d: usize,
    pub mats: Vec<CMat>,
    pub labels: Vec<String>,
}

impl LocalBasis {
    pub fn new(d: usize) -> Self {
        if d == 2 {
            return Self::pauli();
        }
        let omega = |k: usize| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (k % d) as f64 / d as f64);
        let mut mats = Vec::with_capacity(d * d);
        let mut labels = Vec::with_capacity(d * d);
        for a in 0..d {
            for b in 0..d {
                // (X^a Z^b)|j⟩ = ω^{bj} |j+a⟩
                let mut m = Array2::zeros((d, d));
                for j in 0..d {
                    m[[(j + a) % d, j]] = omega(b * j);
                }
                mats.push(m);
                labels.push(format!("W{a}.{b}"));
            }
        }
        LocalBasis { d, mats, labels }
    }

    pub fn pauli() -> Self {
        let mats = (0..4u8).map(pauli_matrix).collect();
        let labels = ["I", "X", "Y", "Z"].iter().map(|s| s.to_string()).collect();
        LocalBasis { d: 2, mats, labels }
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

pub fn pauli_matrix(p: u8) -> CMat {
    match p {
        0 => ndarray::array![[ONE, ZERO], [ZERO, ONE]],
        1 => ndarray::array![[ZERO, ONE], [ONE, ZERO]],
        2 => ndarray::array![[ZERO, -I], [I, ZERO]],
        3 => ndarray::array![[ONE, ZERO], [ZERO, -ONE]],
        _ => panic!("pauli index out of range: {p}"),
    }
}

/// `Σ_q x_q (d²)^{m−1−q}` for every base-`d` index `x` on `m` sites.
fn spread_table(d: usize, m: usize) -> Vec<usize> {
    let dim = d.pow(m as u32);
    let d2 = d * d;
    (0..dim)
        .map(|x| {
            let mut rem = x;
            let mut out = 0;
            let mut w = 1;
            for _ in 0..m {
                out += (rem % d) * w;
                rem /= d;
                w *= d2;
            }
            out
        })
        .collect()
}

/// Applies a `d²×d²` matrix to every site digit of a length-`(d²)^m` vector.
fn apply_per_site(v: &mut [C64], t: &[C64], d2: usize, m: usize) {
    let mut buf = vec![ZERO; d2];
    for q in 0..m {
        let stride = d2.pow((m - 1 - q) as u32);
        let block = stride * d2;
        for base in (0..v.len()).step_by(block) {
            for off in 0..stride {
                for (p, b) in buf.iter_mut().enumerate() {
                    let mut acc = ZERO;
                    for s in 0..d2 {
                        acc += t[p * d2 + s] * v[base + off + s * stride];
                    }
                    *b = acc;
                }
                for (p, b) in buf.iter().enumerate() {
                    v[base + off + p * stride] = *b;
                }
            }
        }
    }
}

/// Coefficients `c_s = tr(s* A)/d^m` for every basis string `s`, indexed by
/// base-`d²` digits with site 0 most significant.
pub fn expand(block: &CMat, basis: &LocalBasis, m: usize) -> Vec<C64> {
    let d = basis.d;
    let d2 = d * d;
    let dim = d.pow(m as u32);
    assert_eq!(block.nrows(), dim, "block dimension does not match {m} sites of dimension {d}");
    let spread = spread_table(d, m);
    let mut v = vec![ZERO; d2.pow(m as u32)];
    for r in 0..dim {
        for c in 0..dim {
            v[d * spread[r] + spread[c]] = block[[r, c]];
        }
    }
    // forward map on one site: c_p = (1/d) Σ_{rc} conj(B_p[r,c]) A[r,c]
    let mut t = vec![ZERO; d2 * d2];
    for (p, bm) in basis.mats.iter().enumerate() {
        for r in 0..d {
            for c in 0..d {
                t[p * d2 + r * d + c] = bm[[r, c]].conj() / d as f64;
            }
        }
    }
    apply_per_site(&mut v, &t, d2, m);
    v
}

/// Inverse of [`expand`].
pub fn reconstruct(coeffs: &[C64], basis: &LocalBasis, m: usize) -> CMat {
    let d = basis.d;
    let d2 = d * d;
    let dim = d.pow(m as u32);
    assert_eq!(coeffs.len(), d2.pow(m as u32));
    let mut v = coeffs.to_vec();
    let mut t = vec![ZERO; d2 * d2];
    for (p, bm) in basis.mats.iter().enumerate() {
        for r in 0..d {
            for c in 0..d {
                t[(r * d + c) * d2 + p] = bm[[r, c]];
            }
        }
    }
    apply_per_site(&mut v, &t, d2, m);
    let spread = spread_table(d, m);
    Array2::from_shape_fn((dim, dim), |(r, c)| v[d * spread[r] + spread[c]])
}

/// Splits a flat coefficient index into per-site basis indices.
pub fn digits(mut index: usize, base: usize, m: usize) -> Vec<usize> {
    let mut out = vec![0; m];
    for q in (0..m).rev() {
        out[q] = index % base;
        index /= base;
    }
    out
}

pub fn undigits(ds: &[usize], base: usize) -> usize {
    ds.iter().fold(0, |acc, &x| acc * base + x)
}

/// A Pauli string on qubits, `0=I, 1=X, 2=Y, 3=Z`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString(pub Vec<u8>);

/// Product of two single-qubit Paulis as `(i^k, σ)`.
fn pauli_product(a: u8, b: u8) -> (u8, u8) {
    match (a, b) {
        (0, x) | (x, 0) => (0, x),
        (x, y) if x == y => (0, 0),
        (1, 2) => (1, 3),
        (2, 1) => (3, 3),
        (2, 3) => (1, 1),
        (3, 2) => (3, 1),
        (3, 1) => (1, 2),
        (1, 3) => (3, 2),
        _ => unreachable!(),
    }
}

pub fn phase_of(k: u8) -> C64 {
    match k % 4 {
        0 => ONE,
        1 => I,
        2 => -ONE,
        _ => -I,
    }
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == 0)
    }

    /// `self · other = i^k · result`.
    pub fn mul(&self, other: &PauliString) -> (u8, PauliString) {
        assert_eq!(self.len(), other.len());
        let mut k = 0u8;
        let ops = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| {
                let (ph, c) = pauli_product(a, b);
                k = (k + ph) % 4;
                c
            })
            .collect();
        (k, PauliString(ops))
    }

    pub fn to_matrix(&self) -> CMat {
        self.0
            .iter()
            .fold(ndarray::array![[ONE]], |acc, &p| kron(&acc, &pauli_matrix(p)))
    }

    /// Flat index into the coefficient vector of [`expand`] with the Pauli basis.
    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &p| acc * 4 + p as usize)
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        PauliString(digits(index, 4, n).into_iter().map(|x| x as u8).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use rand::{Rng, SeedableRng};

    fn random_block(dim: usize, seed: u64) -> CMat {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((dim, dim), |_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    #[test]
    fn pauli_expansion_matches_trace_formula() {
        let basis = LocalBasis::pauli();
        let a = random_block(8, 3);
        let coeffs = expand(&a, &basis, 3);
        for idx in [0usize, 5, 17, 63] {
            let p = PauliString::from_index(idx, 3).to_matrix();
            let direct = crate::linalg::trace(&crate::linalg::adjoint(&p).dot(&a)) / 8.0;
            assert!((direct - coeffs[idx]).norm() < 1e-14);
        }
        let back = reconstruct(&coeffs, &basis, 3);
        assert!(max_abs(&(&back - &a)) < 1e-13);
    }

    #[test]
    fn weyl_basis_is_orthonormal_and_complete() {
        let basis = LocalBasis::new(3);
        for (i, a) in basis.mats.iter().enumerate() {
            for (j, b) in basis.mats.iter().enumerate() {
                let ip = crate::linalg::trace(&crate::linalg::adjoint(a).dot(b)) / 3.0;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - C64::new(want, 0.0)).norm() < 1e-14);
            }
        }
        let a = random_block(9, 11);
        let back = reconstruct(&expand(&a, &basis, 2), &basis, 2);
        assert!(max_abs(&(&back - &a)) < 1e-13);
    }

    #[test]
    fn pauli_products() {
        let x = PauliString(vec![1]);
        let y = PauliString(vec![2]);
        let (k, z) = x.mul(&y);
        assert_eq!((k, &z), (1, &PauliString(vec![3])));
        let lhs = x.to_matrix().dot(&y.to_matrix());
        assert!(max_abs(&(&lhs - &z.to_matrix().mapv(|v| v * phase_of(k)))) < 1e-15);
    }
}
