use codesign_core::data::{moment_summary_of, Dataset};
use codesign_core::graph::{CausalGraph, Edge};
use codesign_core::scm::*;
use codesign_core::toy::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn chain_data(n: usize, seed: u64) -> (Vec<String>, Dataset) {
    let order: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let parents = vec![vec![], vec![(0, 2.0)], vec![(1, -0.5)]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = simulate_linear_scm(&order, &parents, &[1.0, 3.0, 0.5], &[1.0, 0.25, 4.0], n, &mut rng);
    (order.clone(), Dataset::new(order.into_iter().zip(cols).collect()).unwrap())
}

fn chain() -> CausalGraph {
    CausalGraph::from_parts(["A", "B", "C"], [Edge::new("A", "B", 3), Edge::new("B", "C", 3)], 0).unwrap()
}

#[test]
fn slopes_land_within_their_standard_errors() {
    let (_, data) = chain_data(5000, 1);
    let fit = fit_scm(&chain(), &data).unwrap();
    let b = &fit.equations["B"];
    let c = &fit.equations["C"];
    let ab = b.coefficients["A"];
    let bc = c.coefficients["B"];
    // sd(residual)/ (sd(parent) sqrt(n)): 0.5/sqrt(5000) and 2/(sqrt(4.25) sqrt(5000))
    assert!((ab.std_error - 0.5 / 5000f64.sqrt()).abs() < 0.1 * ab.std_error);
    assert!((bc.std_error - 2.0 / (4.25f64 * 5000.0).sqrt()).abs() < 0.1 * bc.std_error);
    assert!((ab.estimate - 2.0).abs() < 4.0 * ab.std_error);
    assert!((bc.estimate + 0.5).abs() < 4.0 * bc.std_error);
    assert!((b.intercept.estimate - 3.0).abs() < 4.0 * b.intercept.std_error);
    assert!((b.residual_variance - 0.25).abs() < 0.02);
}

#[test]
fn induced_moments_match_forward_simulation() {
    let (order, data) = chain_data(3000, 2);
    let g = chain();
    let fit = fit_scm(&g, &data).unwrap();
    let scm = fit.linear_scm();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cols = simulate_linear_scm(&scm.order, &scm.parents, &scm.intercepts, &scm.variances, 200_000, &mut rng);
    let sim = Dataset::new(scm.order.iter().cloned().zip(cols).collect()).unwrap();
    let sim = moment_summary_of(&sim, &order).unwrap();
    let induced = induced_moments(&fit, &g).unwrap();
    for a in &order {
        assert!((induced.mean_of(a).unwrap() - sim.mean_of(a).unwrap()).abs() < 0.05);
        for b in &order {
            let (x, y) = (induced.cov_of(a, b).unwrap(), sim.cov_of(a, b).unwrap());
            assert!((x - y).abs() < 0.02 * x.abs().max(1.0), "{a},{b}: {x} vs {y}");
        }
    }
}

#[test]
fn model_fit_separates_right_and_wrong_structures() {
    let (_, data) = chain_data(3000, 3);
    let fit = fit_scm(&chain(), &data).unwrap();
    let ok = model_fit_statistic(&fit, &data).unwrap();
    assert_eq!(ok.df, 1);
    assert!(ok.p_value > 1e-3, "{ok:?}");

    let wrong = CausalGraph::from_parts(["A", "B", "C"], [Edge::new("A", "B", 3)], 0).unwrap();
    let fit = fit_scm(&wrong, &data).unwrap();
    let bad = model_fit_statistic(&fit, &data).unwrap();
    assert_eq!(bad.df, 2);
    assert!(bad.p_value < 1e-10);
}

#[test]
fn toy_structure_with_spurious_edge() {
    let data = generate_toy_dataset(20_000, 7).unwrap();
    let fit = fit_scm(&toy_first_iteration_graph(), &data).unwrap();
    let rpm = &fit.equations[RPM];
    assert!(rpm.coefficients[DEGRADATION].estimate.abs() < 4.0 * rpm.coefficients[DEGRADATION].std_error + 0.02);
    assert!((rpm.coefficients[WIND].estimate - 0.1).abs() < 0.005);
    assert_eq!(fit.order.len(), 7);
    for eq in fit.equations.values() {
        assert!(matches!(residual_normality_test(eq), NormalityOutcome::Tested(_)));
    }
}
