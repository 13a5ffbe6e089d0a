//! Property tests for the library's structural invariants: projector axioms, block
//! decomposition identities, evolution group law, homological equation
//! residuals and gauge freedom, norm inequalities, classification
//! monotonicity, and the operator-norm lower-bound oracle.

mod common;

use kamrange::commutant::{bicommutant_basis, classify, commutant_basis};
use kamrange::homological::solve_homological;
use kamrange::kato::perturbed_spectral;
use kamrange::matrix::{commutator, max_abs, operator_norm, CMatrix};
use kamrange::spectral::{
    block_diagonal_part, evolve, off_diagonal_part, spectral_decompose_default, unitarity_defect,
    Evolution,
};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(cfg())]

    /// Projector completeness, idempotence, orthogonality; reconstruction;
    /// [A] + {A} = A; [[A]] = [A]; ||[A]|| <= ||A||; ||{A}|| <= 2||A||.
    #[test]
    fn block_decomposition_invariants(seed in 0u64..1_000_000, dim in 4usize..11) {
        let inst = common::random_instance(seed, dim, 0.8, false);
        let s = spectral_decompose_default(&inst.h).unwrap();
        let n = s.source_dim();

        let mut sum = CMatrix::zeros(n, n);
        for c in s.clusters() {
            let p = &c.projector;
            prop_assert!(max_abs(&(p * p - p)) < 1e-10);
            prop_assert!(kamrange::matrix::hermiticity_defect(p) < 1e-10);
            sum += p;
        }
        prop_assert!(max_abs(&(sum - CMatrix::identity(n, n))) < 1e-10);
        let recon = s.reconstruct();
        prop_assert!(operator_norm(&(recon - inst.h.matrix())) < 1e-10 * (1.0 + inst.h.operator_norm()));

        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
        let a = common::random_hermitian(&mut rng, n);
        let bd = block_diagonal_part(&a, &s).unwrap();
        let off = off_diagonal_part(&a, &s).unwrap();
        prop_assert!(max_abs(&(&bd + &off - &a)) < 1e-13);
        let bdbd = block_diagonal_part(&bd, &s).unwrap();
        prop_assert!(max_abs(&(&bdbd - &bd)) < 1e-12, "idempotence");
        prop_assert!(operator_norm(&bd) <= operator_norm(&a) + 1e-10);
        prop_assert!(operator_norm(&off) <= 2.0 * operator_norm(&a) + 1e-10);
        // projector-arithmetic oracle agrees with the basis-rotation route
        let oracle = common::block_diag_projector_oracle(&a, &s);
        common::assert_close(&bd, &oracle, 1e-11, "projector oracle");
    }

    /// evolve is a unitary one-parameter group.
    #[test]
    fn evolution_group_law(seed in 0u64..1_000_000, t1 in -20.0f64..20.0, t2 in -20.0f64..20.0) {
        let inst = common::random_instance(seed, 6, 0.5, false);
        let h = &inst.h;
        let u1 = evolve(h, t1).unwrap();
        let u2 = evolve(h, t2).unwrap();
        let u12 = evolve(h, t1 + t2).unwrap();
        prop_assert!(operator_norm(&(u1.clone() * &u2 - u12)) < 1e-10);
        prop_assert!(unitarity_defect(&u1) < 1e-10);
        // e^{-itH} e^{+itH} = I
        let inv = evolve(h, -t1).unwrap();
        let n = h.dim();
        prop_assert!(operator_norm(&(u1 * inv - CMatrix::identity(n, n))) < 1e-10);
    }

    /// Homological equation: residual, norm bound, gauge freedom,
    /// self-adjointness, and the relative bound on ||H X psi||.
    #[test]
    fn homological_invariants(seed in 0u64..1_000_000, dim in 4usize..13) {
        let inst = common::random_instance(seed, dim, 0.6, true);
        let s = spectral_decompose_default(&inst.h).unwrap();
        let n = s.source_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(99));
        let b = common::random_hermitian(&mut rng, n);
        let sol = solve_homological(&s, &b).unwrap();

        let b_norm = operator_norm(&b);
        prop_assert!(sol.residual <= 1e-9 * (1.0 + b_norm));
        prop_assert!(sol.norm_x <= sol.bound_x + 1e-10, "homological norm bound");
        prop_assert!(max_abs(&block_diagonal_part(&sol.x, &s).unwrap()) < 1e-10, "[X] = 0");
        prop_assert!(kamrange::matrix::hermiticity_defect(&sol.x) < 1e-10, "X = X^dag");

        // gauge freedom: B and B + [A] give the same X
        let a = common::random_hermitian(&mut rng, n);
        let gauge = block_diagonal_part(&a, &s).unwrap();
        let sol2 = solve_homological(&s, &(&b + gauge)).unwrap();
        common::assert_close(&sol.x, &sol2.x, 1e-10, "gauge freedom");

        // ||H X psi|| <= (2 ||psi|| + pi/(sqrt3 eta) ||H psi||) ||B||
        let h = inst.h.matrix();
        let psi = common::random_unit_vector(&mut rng, n);
        let hx_psi = (h * &sol.x * &psi).norm();
        let rhs = (2.0 * psi.norm()
            + std::f64::consts::PI / (3.0f64.sqrt() * s.gap()) * (h * &psi).norm())
            * b_norm;
        prop_assert!(hx_psi <= rhs * (1.0 + 1e-9), "relative bound {hx_psi} <= {rhs}");
    }

    /// Commutant/bicommutant dimensions match the nullspace oracles, and the
    /// classification verdicts are monotone.
    #[test]
    fn commutant_invariants(seed in 0u64..1_000_000) {
        let inst = common::random_instance(seed, 6, 0.7, true);
        let s = spectral_decompose_default(&inst.h).unwrap();
        let cb = commutant_basis(&s);
        let expected: usize = s.clusters().iter().map(|c| c.rank * c.rank).sum();
        prop_assert_eq!(cb.len(), expected);
        prop_assert_eq!(common::commutant_dimension_oracle(&s), expected);
        prop_assert_eq!(common::bicommutant_dimension_oracle(&s), s.num_clusters());

        // every commutant element commutes with H
        let h = inst.h.matrix();
        for b in &cb {
            prop_assert!(operator_norm(&commutator(b, h)) < 1e-8);
        }

        // completely robust => robust for the refinement of a random V
        let refinement = perturbed_spectral(&inst.h, &inst.v, 1e-3, 1e-7)
            .map(|ps| ps.p0_refinement);
        if let Ok(refinement) = refinement {
            for p in bicommutant_basis(&s) {
                let c = classify(&p, &s, Some(&refinement), None).unwrap();
                prop_assert!(c.is_completely_robust);
                prop_assert_eq!(c.is_robust, Some(true), "monotonicity");
                prop_assert!(c.is_symmetry);
            }
        }
    }

    /// Operator norm against the random-vector lower-bound oracle.
    #[test]
    fn operator_norm_oracle(seed in 0u64..1_000_000, dim in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(dim, dim, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let norm = operator_norm(&a);
        // sampled lower bound never exceeds the norm (up to 1e-6 relative)
        let mut best = 0.0f64;
        let mut best_vec = common::random_unit_vector(&mut rng, dim);
        for _ in 0..1000 {
            let psi = common::random_unit_vector(&mut rng, dim);
            let val = (&a * &psi).norm();
            if val > best {
                best = val;
                best_vec = psi;
            }
        }
        prop_assert!(best <= norm * (1.0 + 1e-6), "lower bound from above");
        // power-iterating the best sample makes the bound tight
        let gram = a.adjoint() * &a;
        let mut v = best_vec;
        for _ in 0..200 {
            let w = &gram * &v;
            let nw = w.norm();
            if nw == 0.0 { break; }
            v = w / C64::new(nw, 0.0);
        }
        let tight = (&a * &v).norm();
        prop_assert!(tight <= norm * (1.0 + 1e-9));
        prop_assert!(norm - tight <= 1e-6 * norm.max(1e-12), "tight within 1e-6 relative");
    }

    /// evolve(H, s) evolve(H, t) = evolve(H, s + t) also through the cached
    /// Evolution, and the block parts of H itself are trivial.
    #[test]
    fn spectral_self_consistency(seed in 0u64..1_000_000) {
        let inst = common::random_instance(seed, 8, 1.0, false);
        let s = spectral_decompose_default(&inst.h).unwrap();
        let h = inst.h.matrix();
        common::assert_close(&block_diagonal_part(h, &s).unwrap(), h, 1e-10, "[H] = H");
        prop_assert!(max_abs(&off_diagonal_part(h, &s).unwrap()) < 1e-10);
        let ev = Evolution::new(&inst.h).unwrap();
        let psi = common::random_unit_vector(&mut ChaCha8Rng::seed_from_u64(seed), 8);
        let direct = ev.at(0.7) * &psi;
        let applied = ev.apply(0.7, &psi);
        prop_assert!((direct - applied).norm() < 1e-12);
    }
}
