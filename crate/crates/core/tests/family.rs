use codesign_core::data::Dataset;
use codesign_core::family::*;
use codesign_core::graph::{belief_to_cost, CausalGraph, Edge};
use codesign_core::multiplicity::{fdcr_adjust, IntersectionMethod};
use codesign_core::scm::fit_scm;
use codesign_core::toy::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec(reps: usize) -> EquivalenceSpec {
    EquivalenceSpec { delta_rho: 0.05, bootstrap_reps: reps }
}

fn mediator_data(n: usize) -> Dataset {
    let order = vec!["T".to_string(), "M".to_string(), "O".to_string()];
    let parents = vec![vec![], vec![(0, 0.8)], vec![(0, 0.5), (1, -0.7)]];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cols = simulate_linear_scm(&order, &parents, &[1.0, 0.0, 2.0], &[1.0, 1.0, 1.0], n, &mut rng);
    Dataset::new(order.into_iter().zip(cols).collect()).unwrap()
}

#[test]
fn mediator_family_has_fifteen_records() {
    let data = mediator_data(500);
    let g = CausalGraph::from_parts(
        ["T", "M", "O"],
        [Edge::new("T", "M", 3), Edge::new("T", "O", 2), Edge::new("M", "O", 1)],
        0,
    )
    .unwrap();
    let fit = fit_scm(&g, &data).unwrap();
    let fam = build_family(&g, &fit, &data, &spec(40), 0.05, 1, 1).unwrap();
    assert_eq!(fam.count(HypothesisKind::Coefficient), 5);
    assert_eq!(fam.count(HypothesisKind::ResidualNormality), 2);
    assert_eq!(fam.count(HypothesisKind::CovEquivalence), 6);
    assert_eq!(fam.count(HypothesisKind::ModelFit), 1);
    assert_eq!(fam.count(HypothesisKind::Intersection), 1);
    assert_eq!(fam.records.len(), 15);
    let ids: std::collections::BTreeSet<_> = fam.records.iter().map(|r| &r.id).collect();
    assert_eq!(ids.len(), 15);
}

#[test]
fn single_node_family() {
    let data = Dataset::new(vec![("X".into(), (0..50).map(|i| (i as f64).sin()).collect())]).unwrap();
    let g = CausalGraph::with_nodes(["X"]).unwrap();
    let fit = fit_scm(&g, &data).unwrap();
    let fam = build_family(&g, &fit, &data, &spec(20), 0.05, 1, 1).unwrap();
    let kinds: Vec<_> = fam.records.iter().map(|r| r.kind).collect();
    assert_eq!(kinds, vec![HypothesisKind::CovEquivalence, HypothesisKind::ModelFit, HypothesisKind::Intersection]);
}

#[test]
fn first_iteration_costs_follow_beliefs() {
    let data = generate_toy_dataset(2000, 8).unwrap();
    let g = toy_first_iteration_graph();
    let fit = fit_scm(&g, &data).unwrap();
    let fam = build_family(&g, &fit, &data, &spec(30), 0.05, 1, 1).unwrap();
    assert_eq!(fam.count(HypothesisKind::Coefficient), 14);
    for e in g.edges() {
        let r = fam.record(&coefficient_id(&e.child, &e.parent)).unwrap();
        assert_eq!(r.cost, belief_to_cost(e.belief as i64).unwrap());
    }
    assert!((fam.record("coef:Sea_Temperature<-Winter_Ind").unwrap().cost - 0.33332222).abs() < 1e-6);
    assert!((fam.record("coef:Energy_Yield<-Sea_Temperature").unwrap().cost - 0.99990001).abs() < 1e-6);
    for r in &fam.records {
        if r.kind != HypothesisKind::Coefficient || r.id.ends_with("(intercept)") {
            assert_eq!(r.cost, 1.0, "{}", r.id);
        }
    }
    let p = g.node_count();
    let slopes = g.edge_count();
    let endo = fit.equations.len();
    assert_eq!(fam.records.len(), slopes + endo + endo + p * (p + 1) / 2 + 2);
}

#[test]
fn wider_margin_never_raises_equivalence_p() {
    let data = generate_toy_dataset(1500, 2).unwrap();
    let g = toy_first_iteration_graph();
    let fit = fit_scm(&g, &data).unwrap();
    let mut last: Option<HypothesisFamily> = None;
    for delta in [0.01, 0.03, 0.05, 0.1, 0.3] {
        let fam = build_family(&g, &fit, &data, &EquivalenceSpec { delta_rho: delta, bootstrap_reps: 60 }, 0.05, 9, 1).unwrap();
        if let Some(prev) = &last {
            for r in fam.records.iter().filter(|r| r.kind == HypothesisKind::CovEquivalence) {
                let before = prev.record(&r.id).unwrap().raw_p.unwrap();
                assert!(r.raw_p.unwrap() <= before, "{} rose from {before}", r.id);
            }
        }
        last = Some(fam);
    }
}

#[test]
fn family_is_deterministic() {
    let data = generate_toy_dataset(800, 3).unwrap();
    let g = toy_first_iteration_graph();
    let fit = fit_scm(&g, &data).unwrap();
    let a = build_family(&g, &fit, &data, &spec(50), 0.05, 77, 1).unwrap();
    let b = build_family(&g, &fit, &data, &spec(50), 0.05, 77, 1).unwrap();
    assert_eq!(a, b);
    let c = build_family(&g, &fit, &data, &spec(50), 0.05, 78, 1).unwrap();
    assert_ne!(a, c);
}

#[test]
fn equivalence_at_full_sample_size() {
    let data = generate_toy_dataset(20_000, 42).unwrap();
    let g = toy_generating_graph();
    let fit = fit_scm(&g, &data).unwrap();
    let ok = equivalence_test((WIND, RPM), &g, &fit, &data, &spec(200), 1).unwrap();
    assert!(ok.raw_p < 0.001, "{ok:?}");

    let broken = g.remove_edge(RPM, ENERGY).unwrap().remove_edge(DEGRADATION, ENERGY).unwrap();
    let fit = fit_scm(&broken, &data).unwrap();
    let bad = equivalence_test((RPM, ENERGY), &broken, &fit, &data, &spec(200), 1).unwrap();
    assert!(bad.raw_p > 0.9, "{bad:?}");
    assert!(bad.estimate < -bad.threshold);
}

#[test]
fn adjustment_writes_back_into_the_family() {
    let data = generate_toy_dataset(600, 12).unwrap();
    let g = toy_first_iteration_graph();
    let fit = fit_scm(&g, &data).unwrap();
    let mut fam = build_family(&g, &fit, &data, &spec(40), 0.05, 2, 1).unwrap();
    let res = fdcr_adjust(&mut fam, 0.05, IntersectionMethod::WeightedSimes, 1.0).unwrap();
    assert!(fam.records.iter().all(|r| r.adjusted_p.is_some() && r.rejected.is_some()));
    let inter = fam.record(INTERSECTION_ID).unwrap();
    assert_eq!(inter.raw_p, res.intersection_p);
    assert_eq!(fam.adjustment.unwrap().c0, 1.0);
}
