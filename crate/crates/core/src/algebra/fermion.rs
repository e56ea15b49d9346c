//! Jordan-Wigner representation of lattice fermions.
//!
//! On a support `M` with `n` flavors per site, mode `q = pos·n + flavor`
//! lives on qubit `q`, with `|1⟩` occupied and
//! `γ_{2q} = Z^{⊗q} X_q`, `γ_{2q+1} = Z^{⊗q} Y_q`,
//! `a_q = (γ_{2q} + iγ_{2q+1})/2`.
//! Normal-ordered Majorana monomials form an orthonormal basis under the
//! tracial inner product; embeddings and conditional expectations act on them
//! by relabelling and filtering.

use super::basis::{expand, phase_of, reconstruct, LocalBasis, PauliString};
use crate::linalg::{CMat, C64, I, ONE};

/// Sorts a Majorana word, tracking the anticommutation sign, and cancels pairs.
pub fn normal_order(word: &mut Vec<usize>) -> f64 {
    let mut sign = 1.0;
    let n = word.len();
    for i in 0..n {
        for j in 0..n - 1 - i {
            if word[j] > word[j + 1] {
                word.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && word[j] == word[i] {
            j += 1;
        }
        if (j - i) % 2 == 1 {
            out.push(word[i]);
        }
        i = j;
    }
    *word = out;
    sign
}

/// Writes a Pauli string as `phase · γ_S` with `S` normal ordered.
pub fn pauli_to_majorana(p: &PauliString) -> (C64, Vec<usize>) {
    let mut phase = ONE;
    let mut word = Vec::new();
    for (q, &op) in p.0.iter().enumerate() {
        match op {
            0 => {}
            3 => {
                // Z_q = −i γ_{2q} γ_{2q+1}
                phase *= -I;
                word.extend([2 * q, 2 * q + 1]);
            }
            1 | 2 => {
                // X_q = (Π_{p<q} Z_p) γ_{2q},  Y_q = (Π_{p<q} Z_p) γ_{2q+1}
                phase *= phase_of(((3 * q) % 4) as u8);
                word.extend(0..2 * q);
                word.push(2 * q + usize::from(op == 2));
            }
            _ => unreachable!(),
        }
    }
    let sign = normal_order(&mut word);
    (phase * sign, word)
}

/// Pauli string of a normal-ordered monomial: `γ_S = phase · P`.
pub fn majorana_to_pauli(indices: &[usize], n_qubits: usize) -> (C64, PauliString) {
    let mut k = 0u8;
    let mut acc = PauliString::identity(n_qubits);
    for &g in indices {
        let q = g / 2;
        let mut ops = vec![0u8; n_qubits];
        for op in ops.iter_mut().take(q) {
            *op = 3;
        }
        ops[q] = if g % 2 == 0 { 1 } else { 2 };
        let (ph, next) = acc.mul(&PauliString(ops));
        k = (k + ph) % 4;
        acc = next;
    }
    (phase_of(k), acc)
}

/// Majorana coefficients of a block on `n_qubits` modes.
pub fn majorana_expansion(block: &CMat, n_qubits: usize) -> Vec<(Vec<usize>, C64)> {
    let coeffs = expand(block, &LocalBasis::pauli(), n_qubits);
    let mut out = Vec::new();
    for (idx, c) in coeffs.into_iter().enumerate() {
        if c.norm() == 0.0 {
            continue;
        }
        let p = PauliString::from_index(idx, n_qubits);
        let (phase, mono) = pauli_to_majorana(&p);
        // c·P = c·phase·γ_S
        out.push((mono, c * phase));
    }
    out
}

/// Rebuilds a block on `n_qubits` modes from Majorana coefficients.
pub fn from_majorana(terms: &[(Vec<usize>, C64)], n_qubits: usize) -> CMat {
    let mut coeffs = vec![C64::new(0.0, 0.0); 4usize.pow(n_qubits as u32)];
    for (mono, c) in terms {
        let (phase, p) = majorana_to_pauli(mono, n_qubits);
        coeffs[p.index()] += c * phase;
    }
    reconstruct(&coeffs, &LocalBasis::pauli(), n_qubits)
}

/// Annihilation operator on qubit `q` of `n_qubits`.
pub fn annihilation(q: usize, n_qubits: usize) -> CMat {
    let g0 = majorana_matrix(2 * q, n_qubits);
    let g1 = majorana_matrix(2 * q + 1, n_qubits);
    (&g0 + &g1.mapv(|z| z * I)).mapv(|z| z * 0.5)
}

pub fn majorana_matrix(g: usize, n_qubits: usize) -> CMat {
    let (phase, p) = majorana_to_pauli(&[g], n_qubits);
    p.to_matrix().mapv(|z| z * phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{adjoint, max_abs};

    #[test]
    fn pauli_majorana_roundtrip() {
        let n = 3;
        for idx in 0..64 {
            let p = PauliString::from_index(idx, n);
            let (phase, mono) = pauli_to_majorana(&p);
            let (back_phase, back) = majorana_to_pauli(&mono, n);
            assert_eq!(back, p);
            // P = phase·γ_S and γ_S = back_phase·P
            assert!((phase * back_phase - ONE).norm() < 1e-15, "{idx}");
        }
    }

    #[test]
    fn majoranas_anticommute() {
        let n = 2;
        for a in 0..4 {
            for b in 0..4 {
                let ga = majorana_matrix(a, n);
                let gb = majorana_matrix(b, n);
                let anti = ga.dot(&gb) + gb.dot(&ga);
                let want = if a == b { crate::linalg::identity(4).mapv(|z| z * 2.0) } else { CMat::zeros((4, 4)) };
                assert!(max_abs(&(&anti - &want)) < 1e-15);
            }
        }
    }

    #[test]
    fn annihilation_lowers_occupation() {
        let a = annihilation(0, 1);
        // |0⟩⟨1|
        assert!((a[[0, 1]] - ONE).norm() < 1e-15);
        assert!(a[[1, 0]].norm() < 1e-15);
        let n = adjoint(&a).dot(&a);
        assert!((n[[1, 1]] - ONE).norm() < 1e-15);
    }

    #[test]
    fn expansion_roundtrip() {
        let n = 3;
        let a = annihilation(1, n);
        let terms = majorana_expansion(&a, n);
        assert_eq!(terms.len(), 2);
        let back = from_majorana(&terms, n);
        assert!(max_abs(&(&back - &a)) < 1e-14);
    }
}
