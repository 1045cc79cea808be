use blockprior::model::{derive_seed, expand_weights, sample_gaussian_operator, sample_instance};
use blockprior::{BlockStructure, Error, MeasurementEnsemble, PriorPartition};
use proptest::prelude::*;

#[test]
fn indicator_expansion() {
    let p = PriorPartition::new(4, vec![vec![0, 2], vec![1, 3]], vec![0.5, 0.5]).unwrap();
    assert_eq!(expand_weights(&p, &[2.0, 5.0]).unwrap(), vec![2.0, 5.0, 2.0, 5.0]);
    let single = PriorPartition::single(7, 0.0).unwrap();
    assert_eq!(expand_weights(&single, &[1.0]).unwrap(), vec![1.0; 7]);
    assert!(matches!(expand_weights(&p, &[1.0]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn three_set_expansion_multiplicities() {
    let p = PriorPartition::contiguous(&[50, 20, 58], &[27, 18, 5]).unwrap();
    let omega = [0.46317, 0.100671, 1.0];
    let w = expand_weights(&p, &omega).unwrap();
    for (value, count) in omega.iter().zip([50, 20, 58]) {
        assert_eq!(w.iter().filter(|&&v| v == *value).count(), count);
    }
}

#[test]
fn three_set_sparsity() {
    let s = BlockStructure::new(1280, 128).unwrap();
    let p = PriorPartition::contiguous(&[50, 20, 58], &[27, 18, 5]).unwrap();
    assert_eq!(p.active_counts().unwrap(), vec![27, 18, 5]);
    let inst = sample_instance(&s, &p, 11).unwrap();
    assert_eq!(inst.sparsity(), 50);
}

#[test]
fn overlapping_or_partial_sets_are_rejected() {
    assert!(matches!(
        PriorPartition::new(4, vec![vec![0, 1], vec![1, 2, 3]], vec![0.5, 0.5]),
        Err(Error::NotAPartition(_))
    ));
    assert!(matches!(
        PriorPartition::new(4, vec![vec![0, 1], vec![2]], vec![0.5, 0.5]),
        Err(Error::NotAPartition(_))
    ));
}

#[test]
fn non_integral_counts_are_rejected() {
    let s = BlockStructure::new(30, 10).unwrap();
    let p = PriorPartition::new(10, vec![(0..3).collect(), (3..10).collect()], vec![0.5, 0.0]).unwrap();
    assert!(matches!(sample_instance(&s, &p, 0), Err(Error::NonIntegralCount { set: 0, .. })));
}

#[test]
fn operator_shape_and_determinism() {
    let a = sample_gaussian_operator(7, 13, 99).unwrap();
    assert_eq!(a.shape(), (7, 13));
    assert_eq!(a, sample_gaussian_operator(7, 13, 99).unwrap());
    assert_ne!(a, sample_gaussian_operator(7, 13, 100).unwrap());
    assert!(sample_gaussian_operator(0, 5, 0).is_err());
    assert!(sample_gaussian_operator(6, 5, 0).is_err());
}

#[test]
fn operator_entry_moments() {
    // standard errors of the sample mean and variance of N(0,1) draws
    let a = sample_gaussian_operator(200, 500, 3).unwrap();
    let count = a.len() as f64;
    let mean = a.sum() / count;
    let var = a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    assert!(mean.abs() <= 3.0 / count.sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() <= 3.0 * (2.0 / (count - 1.0)).sqrt(), "var {var}");
}

#[test]
fn observations_match_signal() {
    let s = BlockStructure::new(40, 10).unwrap();
    let p = PriorPartition::single(10, 0.3).unwrap();
    let inst = sample_instance(&s, &p, 5).unwrap();
    let ens = MeasurementEnsemble::measure(&inst.x, 12, 6).unwrap();
    assert!((&ens.a * &inst.x - &ens.y).norm() <= 1e-12 * ens.y.norm());
}

#[test]
fn derived_seeds_are_position_keyed() {
    let a = derive_seed(1, &[2, 3]);
    assert_eq!(a, derive_seed(1, &[2, 3]));
    assert_ne!(a, derive_seed(1, &[3, 2]));
    assert_ne!(a, derive_seed(2, &[2, 3]));
}

fn partition_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    prop::collection::vec((1usize..12, 0usize..=100), 1..5).prop_map(|sets| {
        let sizes: Vec<usize> = sets.iter().map(|s| s.0).collect();
        let active = sets.iter().map(|&(size, pct)| size * pct / 100).collect();
        (sizes, active)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn realized_accuracies_are_exact((sizes, active) in partition_strategy(), k in 1usize..5, seed in any::<u64>()) {
        let p = PriorPartition::contiguous(&sizes, &active).unwrap();
        let s = BlockStructure::from_blocks(p.q(), k).unwrap();
        let inst = sample_instance(&s, &p, seed).unwrap();
        for (i, set) in p.sets().iter().enumerate() {
            let hits = set.iter().filter(|b| inst.support.contains(b)).count();
            prop_assert_eq!(hits, active[i]);
        }
        for b in 0..p.q() {
            let norm = inst.x.rows(b * k, k).norm();
            prop_assert_eq!(norm > 0.0, inst.support.contains(&b));
        }
        prop_assert_eq!(inst, sample_instance(&s, &p, seed).unwrap());
    }

    #[test]
    fn every_block_has_one_owner((sizes, active) in partition_strategy()) {
        let p = PriorPartition::contiguous(&sizes, &active).unwrap();
        let mut seen = vec![0; p.q()];
        for set in p.sets() {
            for &b in set {
                seen[b] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let rho_sum: f64 = p.rho().iter().sum();
        prop_assert!((rho_sum - 1.0).abs() < 1e-12);
    }
}
