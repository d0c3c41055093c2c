mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::*;
use xsurv::failure_sim::{exact_reliability, mc_reliability, single_failure_scan};
use xsurv::optimizer::milp::{build_milp, solution_from_base, solution_from_tree, Formulation};
use xsurv::optimizer::{
    build_weights, solve_base_mapping, solve_max_prct_tree, Budget, WeightKind,
};
use xsurv::survivability::{
    critical_links, extract_base_tree_set, mapping_probability, treeset_probability,
};
use xsurv::{
    enumerate_paths, parse_instance, surviving_logical_subgraph, write_instance, Link, PathPolicy,
};

fn all_paths(inst: &xsurv::CrossLayerInstance) -> PathPolicy {
    PathPolicy::AllPaths {
        max_hops: inst.physical().nodes().len() - 1,
    }
}

fn weight_kind() -> impl Strategy<Value = WeightKind> {
    prop_oneof![Just(WeightKind::Uniform), Just(WeightKind::Random)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instance_text_round_trips(seed in any::<u64>()) {
        let inst = random_instance(seed, SCAN);
        let m = random_mapping(&inst, seed);
        let text = write_instance(&inst, Some(&m));
        let (back, routes) = parse_instance(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(routes.as_ref(), Some(&m));
        prop_assert_eq!(write_instance(&back, routes.as_ref()), text);
    }

    #[test]
    fn all_paths_match_oracle(seed in any::<u64>(), cap in 1usize..8) {
        let inst = random_instance(seed, SCAN);
        for u in inst.logical().links() {
            let want = oracle_paths(&inst, *u, cap);
            match enumerate_paths(&inst, *u, PathPolicy::AllPaths { max_hops: cap }) {
                Ok(set) => prop_assert_eq!(set.paths, want),
                Err(_) => prop_assert!(want.is_empty()),
            }
        }
    }

    #[test]
    fn k_shortest_is_prefix_of_all_paths(seed in any::<u64>(), k in 1usize..12) {
        let inst = random_instance(seed, SCAN);
        for u in inst.logical().links() {
            let all = oracle_paths(&inst, *u, inst.physical().nodes().len() - 1);
            let ksp = enumerate_paths(&inst, *u, PathPolicy::KShortest { k }).unwrap();
            prop_assert_eq!(&ksp.paths[..], &all[..k.min(all.len())]);
        }
    }

    #[test]
    fn critical_links_agree_with_scans(seed in any::<u64>()) {
        let inst = random_instance(seed, SCAN);
        let m = random_mapping(&inst, seed);
        let crit = critical_links(&inst, &m);
        prop_assert_eq!(&crit, &oracle_critical(&inst, &routes_of(&m)));
        let scan = single_failure_scan(&inst, &m).unwrap();
        let down: BTreeSet<Link> = scan.iter().filter(|(_, s)| !**s).map(|(l, _)| *l).collect();
        prop_assert_eq!(&crit, &down);
        prop_assert!((mapping_probability(&inst, &m) - survival(&inst, &crit)).abs() < 1e-12);
    }

    #[test]
    fn failures_only_remove_logical_links(seed in any::<u64>(), picks in prop::collection::vec(any::<prop::sample::Index>(), 0..6)) {
        let inst = random_instance(seed, SCAN);
        let m = random_mapping(&inst, seed);
        let links = inst.physical().links();
        let mut failed = BTreeSet::new();
        let (mut prev, mut prev_conn) = surviving_logical_subgraph(&inst, &m, &failed);
        for p in picks {
            failed.insert(*p.get(links));
            let (now, conn) = surviving_logical_subgraph(&inst, &m, &failed);
            prop_assert!(now.is_subset(&prev));
            prop_assert!(!conn || prev_conn);
            prev = now;
            prev_conn = conn;
        }
    }

    #[test]
    fn base_tree_set_certifies_the_mapping(seed in any::<u64>()) {
        let inst = random_instance(seed, SCAN);
        let m = random_mapping(&inst, seed);
        let base = extract_base_tree_set(&inst, &m);
        prop_assert!(base.trees.len() <= inst.physical().num_links());
        prop_assert_eq!(&base.unprotected, &critical_links(&inst, &m));
        let p = treeset_probability(&inst, &base.tree_set());
        prop_assert!((p - mapping_probability(&inst, &m)).abs() < 1e-9);
        for (e, t) in &base.protected_by {
            let tree = &base.trees[*t];
            prop_assert!(tree.branches().all(|(_, path)| path.links().all(|l| l != *e)));
        }
    }

    #[test]
    fn reliability_is_bounded_by_mapping_probability(seed in any::<u64>()) {
        let inst = random_instance(seed, SMALL);
        let m = random_mapping(&inst, seed);
        let exact = exact_reliability(&inst, &m).unwrap().value;
        prop_assert!((exact - oracle_reliability(&inst, &m)).abs() < 1e-9);
        prop_assert!(exact <= mapping_probability(&inst, &m) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn base_solver_matches_exhaustive_search(seed in any::<u64>(), kind in weight_kind()) {
        let inst = random_instance(seed, SMALL);
        prop_assume!(routing_count(&inst) <= 20_000);
        let w = build_weights(&inst, kind).unwrap();
        let r = solve_base_mapping(&inst, all_paths(&inst), &w, Budget::unlimited()).unwrap();
        prop_assert!((r.objective - exhaustive_base(&inst, &w)).abs() < 1e-9);
        prop_assert_eq!(&r.unprotected, &oracle_critical(&inst, &routes_of(&r.mapping)));
        prop_assert!((r.phi - survival(&inst, &r.unprotected)).abs() < 1e-12);
        prop_assert!((r.base_set.probability(&inst) - r.phi).abs() < 1e-9);
    }

    #[test]
    fn maxtree_solver_matches_exhaustive_search(seed in any::<u64>(), kind in weight_kind()) {
        let inst = random_instance(seed, SMALL);
        prop_assume!(routing_count(&inst) <= 20_000);
        let w = build_weights(&inst, kind).unwrap();
        let r = solve_max_prct_tree(&inst, all_paths(&inst), &w, Budget::unlimited()).unwrap();
        prop_assert!((r.objective - exhaustive_maxtree(&inst, &w)).abs() < 1e-9);
    }

    #[test]
    fn single_tree_never_beats_the_tree_set(seed in any::<u64>()) {
        let inst = random_instance(seed, SMALL);
        let w = build_weights(&inst, WeightKind::Random).unwrap();
        let policy = all_paths(&inst);
        let base = solve_base_mapping(&inst, policy, &w, Budget::unlimited()).unwrap();
        let tree = solve_max_prct_tree(&inst, policy, &w, Budget::unlimited()).unwrap();
        prop_assert!(tree.phi <= base.phi + 1e-12);
    }

    #[test]
    fn uniform_failure_phi_is_a_power(seed in any::<u64>(), rho in 0.0f64..0.5) {
        let inst = random_instance(seed, SMALL).with_uniform_failure(rho).unwrap();
        let w = build_weights(&inst, WeightKind::Uniform).unwrap();
        let r = solve_base_mapping(&inst, all_paths(&inst), &w, Budget::unlimited()).unwrap();
        let k = r.unprotected.len();
        prop_assert_eq!(r.objective, k as f64);
        prop_assert!((r.phi - (1.0 - rho).powi(k as i32)).abs() < 1e-12);
    }

    #[test]
    fn scaling_costs_keeps_the_optimum(seed in any::<u64>(), factor in 0.01f64..100.0) {
        let inst = random_instance(seed, SMALL);
        let w = build_weights(&inst, WeightKind::Random).unwrap();
        let policy = all_paths(&inst);
        let a = solve_base_mapping(&inst, policy, &w, Budget::unlimited()).unwrap();
        let b = solve_base_mapping(&inst, policy, &w.scaled(factor), Budget::unlimited()).unwrap();
        prop_assert!((a.phi - b.phi).abs() < 1e-9);
        prop_assert!((a.objective * factor - b.objective).abs() < 1e-6 * (1.0 + b.objective));
    }

    #[test]
    fn more_candidates_never_hurt(seed in any::<u64>()) {
        let inst = random_instance(seed, SMALL);
        let w = build_weights(&inst, WeightKind::Random).unwrap();
        let mut last = f64::INFINITY;
        for policy in [
            PathPolicy::KShortest { k: 1 },
            PathPolicy::KShortest { k: 2 },
            PathPolicy::KShortest { k: 4 },
            all_paths(&inst),
        ] {
            let r = solve_base_mapping(&inst, policy, &w, Budget::unlimited()).unwrap();
            prop_assert!(r.objective <= last + 1e-9);
            last = r.objective;
        }
    }

    #[test]
    fn exported_models_accept_solver_results(seed in any::<u64>(), kind in weight_kind()) {
        let inst = random_instance(seed, SMALL);
        let w = build_weights(&inst, kind).unwrap();
        let policy = all_paths(&inst);
        let base = solve_base_mapping(&inst, policy, &w, Budget::unlimited()).unwrap();
        let model = build_milp(&inst, Formulation::BaseSet, &w);
        let obj = model.check_solution(&solution_from_base(&inst, &base), 1e-9);
        prop_assert!(obj.is_ok(), "{:?}", obj);
        prop_assert!((obj.unwrap() - base.objective).abs() < 1e-9);
        let tree = solve_max_prct_tree(&inst, policy, &w, Budget::unlimited()).unwrap();
        let model = build_milp(&inst, Formulation::MaxTree, &w);
        let obj = model.check_solution(&solution_from_tree(&inst, &tree), 1e-9);
        prop_assert!(obj.is_ok(), "{:?}", obj);
        prop_assert!((obj.unwrap() - tree.objective).abs() < 1e-9);
    }

    #[test]
    fn monte_carlo_tracks_exact_reliability(seed in any::<u64>()) {
        let inst = random_instance(seed, SMALL);
        let m = random_mapping(&inst, seed);
        let exact = exact_reliability(&inst, &m).unwrap().value;
        let mc = mc_reliability(&inst, &m, 20_000, seed).unwrap();
        // Five standard errors, floored for estimates that hit 0 or 1.
        prop_assert!((mc.value - exact).abs() <= 5.0 * mc.stderr.max(2e-3));
    }
}
