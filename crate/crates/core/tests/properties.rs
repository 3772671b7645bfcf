mod common;

use common::{arb_chain, rel_err, seeded};
use fpv_core::chain::StateDistribution;
use fpv_core::confidence::{fpt_bounds, min_ordered_confidence, survival_at_mean};
use fpv_core::nalgebra::{DMatrix, DVector};
use fpv_core::spectral::{self, UNIT_LAMBDA_TOL};
use fpv_core::{analysis, mdp, passage, sim, ChainModel, MdpModel, Policy, ValueMatrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn permuted(chain: &ChainModel, perm: &[usize]) -> ChainModel {
    // new state k is old state perm[k]
    let n = chain.len();
    let t = DMatrix::from_fn(n, n, |i, j| chain.transitions()[(perm[i], perm[j])]);
    let names = perm.iter().map(|&k| chain.state_names()[k].clone()).collect();
    let halt = perm.iter().position(|&k| k == chain.halt()).unwrap();
    ChainModel::new(names, t, halt, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn stepping_conserves_probability(chain in arb_chain(12), steps in 1usize..20) {
        let mut p = StateDistribution::uniform_transient(chain.len(), chain.halt()).unwrap();
        for _ in 0..steps {
            p = chain.step_distribution(&p).unwrap();
            let total: f64 = p.as_slice().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(p.as_slice().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn canonicalize_is_idempotent(chain in arb_chain(12)) {
        let once = chain.canonicalize();
        let twice = once.model().canonicalize();
        prop_assert_eq!(twice.model().halt(), 0);
        prop_assert!(twice.permutation().iter().enumerate().all(|(i, &p)| i == p));
        prop_assert_eq!(once.t_hat(), twice.t_hat());
        prop_assert_eq!(once.escape_row(), twice.escape_row());
    }

    #[test]
    fn transient_eigenvalues_lie_in_unit_disc(chain in arb_chain(16)) {
        let moduli = spectral::eigenvalue_moduli(chain.canonicalize().t_hat()).unwrap();
        prop_assert!(moduli.iter().all(|&m| m <= 1.0 + 1e-12));
    }

    #[test]
    fn phi_is_a_fixed_point_and_escape_matches(chain in arb_chain(16)) {
        let canon = chain.canonicalize();
        let s = spectral::analyze(&canon).unwrap();
        let z = DVector::from_column_slice(&s.phi.as_slice()[1..]);
        let resid = (canon.t_hat() * &z - &z * s.lambda2).amax();
        prop_assert!(resid <= 1e-8, "residual {}", resid);
        prop_assert!((s.escape_prob - (1.0 - s.lambda2)).abs() <= 1e-10);
        prop_assert!(s.escape_prob > UNIT_LAMBDA_TOL);
    }

    #[test]
    fn relabelling_does_not_change_results(chain in arb_chain(12), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..chain.len()).collect();
        perm.shuffle(&mut seeded(seed));
        let other = permuted(&chain, &perm);
        let a = analysis::analyze(&chain).unwrap();
        let b = analysis::analyze(&other).unwrap();
        prop_assert!((a.lambda2() - b.lambda2()).abs() <= 1e-12);
        let (ma, mb) = (a.mfpt_vector().unwrap(), b.mfpt_vector().unwrap());
        for (k, &old) in perm.iter().enumerate() {
            prop_assert!((ma[old] - mb[k]).abs() <= 1e-9 * ma[old].max(1.0));
        }
    }

    #[test]
    fn system_mfpt_is_phi_average_of_state_mfpts(chain in arb_chain(20), seed in any::<u64>()) {
        let a = analysis::analyze(&chain).unwrap();
        let m = a.mfpt_vector().unwrap();
        let phi = a.phi();
        let mphi: f64 = m.iter().zip(&phi).map(|(x, p)| x * p).sum();
        prop_assert!((a.mfpt() - mphi).abs() <= 1e-6 * a.mfpt());

        let trans: Vec<f64> = chain.transient_states().map(|i| m[i]).collect();
        let lo = trans.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = trans.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let slack = 1e-12 * a.mfpt();
        prop_assert!(lo - slack <= a.mfpt() && a.mfpt() <= hi + slack);

        // any start distribution on transient states gives a mean in [lo, hi]
        let mut rng = seeded(seed);
        let w: Vec<f64> = trans.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = w.iter().sum();
        let mean: f64 = trans.iter().zip(&w).map(|(x, wi)| x * wi / s).sum();
        prop_assert!(lo - slack <= mean && mean <= hi + slack);
    }

    #[test]
    fn mfpv_is_linear_in_values(chain in arb_chain(10), seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let n = chain.len();
        let mut rng = seeded(seed);
        let v1 = DMatrix::from_fn(n, n, |_, _| rng.random_range(-5.0..5.0));
        let v2 = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..100.0));
        let canon = chain.canonicalize();
        let m1 = passage::mfpv_vector_with(&canon, &v1).unwrap();
        let m2 = passage::mfpv_vector_with(&canon, &v2).unwrap();
        let mix = passage::mfpv_vector_with(&canon, &(&v1 * a + &v2 * b)).unwrap();
        let expected = m1 * a + m2 * b;
        let scale = expected.amax().max(1.0);
        prop_assert!((mix - expected).amax() <= 1e-9 * scale);
    }

    #[test]
    fn unit_values_give_mfpt(chain in arb_chain(20)) {
        let n = chain.len();
        let ones = chain.with_values(ValueMatrix::steps(n)).unwrap();
        let canon = ones.canonicalize();
        let v = passage::mfpv_vector(&canon).unwrap();
        let m = passage::mfpt_vector(&canon).unwrap();
        prop_assert!((v - m).amax() <= 1e-10);
    }

    #[test]
    fn lfpt_inverts_survival(lambda2 in 0.0f64..0.99999, pr in 0.001f64..0.999) {
        let b = fpt_bounds(lambda2, pr).unwrap();
        if lambda2 > 0.0 {
            prop_assert!((lambda2.powf(b.lfpt) - pr).abs() <= 1e-12);
            prop_assert!((lambda2.powf(b.ufpt - 1.0) - (1.0 - pr)).abs() <= 1e-12);
        }
        let analytic = pr > min_ordered_confidence(lambda2);
        // skip the measure-zero neighbourhood of the threshold
        if (pr - min_ordered_confidence(lambda2)).abs() > 1e-9 {
            prop_assert_eq!(b.is_ordered(), analytic);
        }
        prop_assert!(survival_at_mean(lambda2) <= (-1.0f64).exp() + 1e-15);
    }

    #[test]
    fn near_one_approximations(gap in 1e-5f64..1e-3, tail in 1e-4f64..1e-2) {
        let lambda2 = 1.0 - gap;
        let pr = 1.0 - tail;
        let m = 1.0 / gap;
        let b = fpt_bounds(lambda2, pr).unwrap();
        prop_assert!(rel_err(b.lfpt, tail * m) < 0.01);
        prop_assert!(rel_err(b.ufpt, -tail.ln() * m) < 0.01);
    }

    #[test]
    fn reduced_mdp_rows_are_distributions(
        ns in 2usize..6, na in 1usize..4, ng in 1usize..4, seed in any::<u64>()
    ) {
        let mut rng = seeded(seed);
        let successor: Vec<Vec<Vec<usize>>> = (0..ns)
            .map(|x| {
                (0..ng)
                    .map(|_| (0..na).map(|_| if x == 0 { 0 } else { rng.random_range(0..ns) }).collect())
                    .collect()
            })
            .collect();
        let w: Vec<f64> = (0..ng).map(|_| rng.random::<f64>() + 0.01).collect();
        let s: f64 = w.iter().sum();
        let names = |p: &str, k: usize| (0..k).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let model = MdpModel::new(
            names("x", ns), names("a", na), names("g", ng), 0, successor,
            w.iter().map(|x| x / s).collect(), None,
        ).unwrap();
        let mut policy = Policy::new(ns, ng);
        for x in 1..ns {
            for g in 0..ng {
                policy.set(x, g, rng.random_range(0..na));
            }
        }
        let chain = mdp::reduce(&model, &policy).unwrap();
        let t = chain.transitions();
        for i in 0..ns {
            let row = t.row(i);
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().filter(|&&p| p > 0.0).count() <= ng);
        }
    }

    #[test]
    fn simulation_is_reproducible(chain in arb_chain(8), seed in any::<u64>()) {
        let start = StateDistribution::uniform_transient(chain.len(), chain.halt()).unwrap();
        let a = sim::simulate(&chain, &start, 300, seed, None);
        let b = sim::simulate(&chain, &start, 300, seed, None);
        prop_assert_eq!(a, b);
    }
}
