use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::expansion::OperatorExpansion;
use super::*;
use crate::lattice::make_chain;
use crate::linalg::{kron, max_abs, CMat};

fn spin_chain(n: usize) -> Arc<AlgebraContext> {
    AlgebraContext::spin(make_chain(n).unwrap(), 2).unwrap()
}

fn fermion_chain(n: usize, flavors: usize) -> Arc<AlgebraContext> {
    AlgebraContext::fermion(make_chain(n).unwrap(), flavors).unwrap()
}

fn close(a: &LatticeOperator, b: &LatticeOperator, tol: f64) -> bool {
    a.distance(b).unwrap() <= tol
}

/// Global JW annihilator on `n` qubits built from Kronecker products.
fn jw_annihilator(q: usize, n: usize) -> CMat {
    let z = basis::pauli_matrix(3);
    let lower = ndarray::array![[ZERO, ONE], [ZERO, ZERO]];
    let id = basis::pauli_matrix(0);
    (0..n).fold(ndarray::array![[ONE]], |acc, p| {
        let f = match p.cmp(&q) {
            std::cmp::Ordering::Less => &z,
            std::cmp::Ordering::Equal => &lower,
            std::cmp::Ordering::Greater => &id,
        };
        kron(&acc, f)
    })
}

#[test]
fn pauli_norm_and_commutator() {
    let ctx = spin_chain(4);
    let x = LatticeOperator::pauli(&ctx, &[(1, 'X')]).unwrap();
    let z = LatticeOperator::pauli(&ctx, &[(1, 'Z')]).unwrap();
    assert!((x.add(&z).unwrap().op_norm() - 2f64.sqrt()).abs() < 1e-12);
    // [X, Z] = −2iY
    let y = LatticeOperator::pauli(&ctx, &[(1, 'Y')]).unwrap();
    let want = y.scale(C64::new(0.0, -2.0));
    assert!(close(&x.commutator(&z).unwrap(), &want, 1e-12));
    let far = LatticeOperator::pauli(&ctx, &[(3, 'Z')]).unwrap();
    assert!(x.commutator(&far).unwrap().op_norm() < 1e-15);
}

#[test]
fn conditional_expectation_drops_nonlocal_strings() {
    let ctx = spin_chain(3);
    let xx = LatticeOperator::pauli(&ctx, &[(0, 'X'), (1, 'X')]).unwrap();
    let e = xx.conditional_expectation(&[0]).unwrap();
    assert!(e.op_norm() < 1e-15);
    let zi = LatticeOperator::pauli(&ctx, &[(0, 'Z')]).unwrap().embed(&[0, 1]).unwrap();
    let e = zi.conditional_expectation(&[0]).unwrap();
    assert_eq!(e.support(), &[0]);
    assert!((e.op_norm() - 1.0).abs() < 1e-15);
}

#[test]
fn conditional_expectation_axioms_spin() {
    let ctx = AlgebraContext::spin(make_chain(4).unwrap(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = LatticeOperator::random(&ctx, &[0, 1, 2], &mut rng).unwrap();
    let b = LatticeOperator::random(&ctx, &[1], &mut rng).unwrap();
    let c = LatticeOperator::random(&ctx, &[0, 1], &mut rng).unwrap();
    let m = [0usize, 1];
    let e = a.conditional_expectation(&m).unwrap();
    // module property E(BAC) = B E(A) C for B, C ∈ A_M
    let lhs = b.mul(&a).unwrap().mul(&c).unwrap().conditional_expectation(&m).unwrap();
    let rhs = b.mul(&e).unwrap().mul(&c).unwrap();
    assert!(close(&lhs, &rhs, 1e-12));
    // ω(E(A)B) = ω(AB)
    let w1 = e.mul(&c).unwrap().tracial_state();
    let w2 = a.mul(&c).unwrap().tracial_state();
    assert!((w1 - w2).norm() < 1e-12);
    // E_{M1} E_{M2} = E_{M1∩M2}, contraction, idempotence, unital
    let e01 = a.conditional_expectation(&[0, 1, 3]).unwrap().conditional_expectation(&[1, 2]).unwrap();
    assert!(close(&e01, &a.conditional_expectation(&[1]).unwrap(), 1e-12));
    assert!(e.op_norm() <= a.op_norm() + 1e-12);
    assert!(close(&e.conditional_expectation(&m).unwrap(), &e, 1e-14));
    let one = LatticeOperator::identity(&ctx).embed(&[0, 2]).unwrap();
    assert!(close(&one.conditional_expectation(&[0]).unwrap(), &LatticeOperator::identity(&ctx), 1e-14));
}

#[test]
fn partial_trace_matches_basis_projection() {
    let ctx = spin_chain(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = LatticeOperator::random(&ctx, &[0, 1, 2], &mut rng).unwrap();
    let e = a.conditional_expectation(&[0, 2]).unwrap().embed(&[0, 1, 2]).unwrap();
    // keep only Pauli strings that act trivially on site 1
    let coeffs = basis::expand(a.block(), ctx.basis(), 3);
    let projected: Vec<C64> = coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| if basis::digits(i, 4, 3)[1] == 0 { c } else { ZERO })
        .collect();
    let block = basis::reconstruct(&projected, ctx.basis(), 3);
    assert!(max_abs(&(e.block() - &block)) < 1e-13);
}

#[test]
fn car_relations_on_three_sites() {
    let ctx = fermion_chain(3, 1);
    let sites = [0usize, 1, 2];
    let ops: Vec<(LatticeOperator, LatticeOperator)> =
        sites.iter().map(|&x| car_generators(&ctx, x, 0).unwrap()).collect();
    for (i, (ci, ai)) in ops.iter().enumerate() {
        // independent oracle: global JW matrices
        let want = jw_annihilator(i, 3);
        assert!(max_abs(&(ai.embed(&sites).unwrap().block() - &want)) < 1e-14);
        for (j, (cj, aj)) in ops.iter().enumerate() {
            let aa = ai.anticommutator(aj).unwrap().embed(&sites).unwrap();
            assert!(aa.op_norm() < 1e-14, "{{a{i}, a{j}}}");
            let ac = ai.anticommutator(cj).unwrap().embed(&sites).unwrap();
            let delta = if i == j { 1.0 } else { 0.0 };
            let id = LatticeOperator::identity(&ctx).scale_re(delta).embed(&sites).unwrap();
            assert!(close(&ac, &id, 1e-14), "{{a{i}, a*{j}}}");
        }
        assert!(!ci.is_even(1e-12));
    }
}

#[test]
fn even_operators_commute_with_disjoint_ones() {
    let ctx = fermion_chain(3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let n0 = number_operator(&ctx, 0).unwrap();
    assert!(n0.is_even(1e-12));
    let (c2, a2) = car_generators(&ctx, 2, 0).unwrap();
    assert!(n0.commutator(&a2).unwrap().op_norm() < 1e-14);
    assert!(n0.commutator(&c2).unwrap().op_norm() < 1e-14);
    // odd operators on disjoint sites anticommute instead
    let (_, a0) = car_generators(&ctx, 0, 0).unwrap();
    assert!(a0.commutator(&a2).unwrap().op_norm() > 1.0 - 1e-12);
    // random even operator (parity-projected) against a random operator elsewhere
    let r = LatticeOperator::random(&ctx, &[0, 1], &mut rng).unwrap();
    let even = r.add(&r.grading(std::f64::consts::PI)).unwrap().scale_re(0.5);
    assert!(even.is_even(1e-12));
    let other = LatticeOperator::random(&ctx, &[2], &mut rng).unwrap();
    assert!(even.commutator(&other).unwrap().op_norm() < 1e-12);
}

#[test]
fn fermion_conditional_expectation_keeps_local_monomials() {
    let ctx = fermion_chain(3, 2);
    let (c0, a0) = car_generators(&ctx, 0, 1).unwrap();
    let (c2, a2) = car_generators(&ctx, 2, 0).unwrap();
    let hop = c0.mul(&a2).unwrap().add(&c2.mul(&a0).unwrap()).unwrap();
    assert!(hop.conditional_expectation(&[0, 1]).unwrap().op_norm() < 1e-14);
    let n0 = number_operator(&ctx, 0).unwrap();
    let mixed = n0.add(&hop).unwrap();
    let e = mixed.conditional_expectation(&[0]).unwrap();
    assert!(close(&e, &n0, 1e-13));
    assert!(e.is_even(1e-12));
    // parity is preserved by E_M
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let r = LatticeOperator::random(&ctx, &[0, 1], &mut rng).unwrap();
    let g = |op: &LatticeOperator| op.grading(0.7);
    let lhs = g(&r.conditional_expectation(&[1]).unwrap());
    let rhs = g(&r).conditional_expectation(&[1]).unwrap();
    assert!(close(&lhs, &rhs, 1e-12));
}

#[test]
fn embedding_preserves_products_and_norms() {
    for ctx in [spin_chain(4), fermion_chain(4, 1)] {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let a = LatticeOperator::random(&ctx, &[1, 2], &mut rng).unwrap();
        let b = LatticeOperator::random(&ctx, &[1, 2], &mut rng).unwrap();
        let big = [0usize, 1, 2, 3];
        let ab = a.mul(&b).unwrap().embed(&big).unwrap();
        let ab2 = a.embed(&big).unwrap().mul(&b.embed(&big).unwrap()).unwrap();
        assert!(close(&ab, &ab2, 1e-12));
        assert!((a.embed(&big).unwrap().op_norm() - a.op_norm()).abs() < 1e-12);
        let mid = a.embed(&[1, 2, 3]).unwrap().embed(&big).unwrap();
        assert!(close(&mid, &a.embed(&big).unwrap(), 1e-13));
    }
}

#[test]
fn tracial_state_is_cyclic() {
    let ctx = fermion_chain(3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let a = LatticeOperator::random(&ctx, &[0, 2], &mut rng).unwrap();
    let b = LatticeOperator::random(&ctx, &[1, 2], &mut rng).unwrap();
    let ab = a.mul(&b).unwrap().tracial_state();
    let ba = b.mul(&a).unwrap().tracial_state();
    assert!((ab - ba).norm() < 1e-13);
    assert!((LatticeOperator::identity(&ctx).tracial_state() - ONE).norm() < 1e-15);
}

#[test]
fn expansion_json_roundtrip() {
    for ctx in [spin_chain(3), AlgebraContext::spin(make_chain(3).unwrap(), 3).unwrap(), fermion_chain(3, 2)] {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = LatticeOperator::random(&ctx, &[0, 2], &mut rng).unwrap();
        let json = OperatorExpansion::of(&a).to_json();
        let back = OperatorExpansion::from_json(&json).unwrap().to_operator(&ctx).unwrap();
        assert_eq!(back.support(), a.support());
        assert!(close(&back, &a, 1e-12));
    }
}

#[test]
fn resource_limit_is_reported() {
    let ctx = AlgebraContext::new(make_chain(20).unwrap(), Backend::Spin { local_dim: 2 }, 64).unwrap();
    let err = LatticeOperator::zero_on(&ctx, &[0, 1, 2, 3, 4, 5, 6]).unwrap_err();
    assert!(matches!(err, crate::Error::ResourceLimit(_)));
}

#[test]
fn fermions_need_a_path_chain() {
    let grid = crate::lattice::make_grid(3, 2).unwrap();
    assert!(AlgebraContext::fermion(grid, 1).is_err());
}

#[test]
fn single_site_commutator_matches_products() {
    let ctx = AlgebraContext::spin(make_chain(4).unwrap(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = LatticeOperator::random(&ctx, &[0, 1, 3], &mut rng).unwrap();
    for y in [0, 1, 3] {
        let b = LatticeOperator::random(&ctx, &[y], &mut rng).unwrap();
        let want = a.mul(&b).unwrap().sub(&b.mul(&a).unwrap()).unwrap();
        assert!(close(&a.commutator(&b).unwrap(), &want, 1e-12), "site {y}");
    }
}
