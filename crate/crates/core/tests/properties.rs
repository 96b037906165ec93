mod common;

use common::*;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scmkit::estimands::{iv_tsls_columns, odds_ratio};
use scmkit::examples::{build_example, ExampleSpec, Model};
use scmkit::exogenous::diagonal_position;
use scmkit::graph::check_backdoor;
use scmkit::model_io::{parse_model, to_canonical_json};
use scmkit::scm::{intervene, joint_distribution, joint_distribution_exact};
use std::collections::BTreeSet;

fn model(seed: u64, n: usize) -> scmkit::scm::Scm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dag = random_dag(n, 0.4, &mut rng);
    random_model(&dag, &[2, 3], &[], &[], &mut rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn joint_is_a_distribution(seed in any::<u64>(), n in 1usize..6) {
        let j = joint_distribution(&model(seed, n)).unwrap();
        prop_assert!(j.probs().iter().all(|p| *p >= 0.0));
        prop_assert!((j.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_and_float_joints_agree(seed in any::<u64>(), n in 1usize..5) {
        let scm = model(seed, n);
        let f = joint_distribution(&scm).unwrap();
        let e = joint_distribution_exact(&scm).unwrap();
        for (a, b) in f.probs().iter().zip(e.probs()) {
            prop_assert!((a - b.to_f64().unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn intervention_pins_target_and_spares_non_descendants(seed in any::<u64>(), n in 2usize..6, k in 0usize..6) {
        let scm = model(seed, n);
        let target = scm.names()[k % n].clone();
        let value = state_labels(&scm, &target)[0].clone();
        let m = intervene(&scm, &[(target.clone(), value.clone())].into_iter().collect()).unwrap();
        let jm = joint_distribution(&m).unwrap();
        prop_assert!((jm.marginal_by_name(&[target.as_str()]).unwrap().to_map()[&value] - 1.0).abs() < 1e-12);
        let desc = scm.dag().descendants(&target).unwrap();
        let j = joint_distribution(&scm).unwrap();
        for other in scm.names().iter().filter(|o| **o != target && !desc.contains(*o)) {
            let a = j.marginal_by_name(&[other.as_str()]).unwrap().to_map();
            let b = jm.marginal_by_name(&[other.as_str()]).unwrap().to_map();
            prop_assert!(tv(&a, &b) < 1e-12);
        }
    }

    #[test]
    fn canonical_json_round_trips(seed in any::<u64>(), n in 1usize..6) {
        let scm = model(seed, n);
        let text = to_canonical_json(&scm);
        let back = parse_model(&text).unwrap().scm.unwrap();
        prop_assert_eq!(to_canonical_json(&back), text);
    }

    #[test]
    fn treatment_parents_block_every_backdoor_path(seed in any::<u64>(), n in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = random_dag(n, 0.4, &mut rng);
        let (t, r) = (dag.name(0).to_string(), dag.name(n - 1).to_string());
        let pa = dag.parent_names(&r).unwrap();
        // prefer a parent of the response as treatment
        let t = pa.first().cloned().unwrap_or(t);
        let z: Vec<String> = dag.parent_names(&t).unwrap().into_iter().filter(|p| *p != r).collect();
        prop_assert!(check_backdoor(&dag, &t, &r, &z).unwrap().valid);
    }

    #[test]
    fn tsls_ratio_identity(xs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 4..40)) {
        let i: Vec<f64> = xs.iter().map(|x| x.0).collect();
        let t: Vec<f64> = xs.iter().map(|x| x.0 + 0.5 * x.1).collect();
        let r: Vec<f64> = xs.iter().map(|x| x.2).collect();
        if let Ok(res) = iv_tsls_columns(&i, &t, &r) {
            prop_assert!((res.ratio - res.beta).abs() <= 1e-10 * res.beta.abs().max(1.0));
        }
    }

    #[test]
    fn odds_ratio_forms_agree(p in 0.01f64..0.99, q in 0.01f64..0.99, pi0 in 0.01f64..0.99, pi1 in 0.01f64..0.99) {
        let spec = ExampleSpec::new("case_control_pop").param("p", p).param("q", q).param("pi0", pi0).param("pi1", pi1);
        let Model::Discrete(scm) = build_example(&spec).unwrap() else { unreachable!() };
        let rep = odds_ratio(&joint_distribution(&scm).unwrap(), "R", "T", &["X"]).unwrap();
        for s in &rep.strata {
            prop_assert!((s.e_conditional - s.e_exposure).abs() <= 1e-12 * s.e_exposure.max(1.0));
        }
    }
}

#[test]
fn diagonal_positions_enumerate_the_plane() {
    let mut seen = BTreeSet::new();
    for d in 1..=40u64 {
        for col in 1..=d {
            seen.insert(diagonal_position(d + 1 - col, col));
        }
    }
    let total = 40 * 41 / 2;
    assert_eq!(seen.len(), total);
    assert_eq!(seen.iter().next_back().copied(), Some(total as u64));
}
