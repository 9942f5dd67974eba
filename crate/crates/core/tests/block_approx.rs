use r2v_core::bench::{generate_connected_planted_partition, DegreeSpec};
use r2v_core::residual::{residual2vec, R2vConfig};
use r2v_core::transition::{block_approx_transition, exact_window_transition, mean_row_correlation};

#[test]
fn two_block_graph_with_true_partition() {
    let mut total = 0.0;
    for seed in 0..10 {
        let pp = generate_connected_planted_partition(30, 2, 0.1, DegreeSpec::Regular(6.0), seed, 50).unwrap();
        let exact = exact_window_transition(&pp.graph, 10).unwrap();
        let approx = block_approx_transition(&pp.graph, 2, 10, Some(&pp.labels)).unwrap();
        total += mean_row_correlation(&exact, &approx);
    }
    let mean = total / 10.0;
    assert!(mean >= 0.85, "mean correlation {mean}");
}

#[test]
fn correlation_grows_with_block_count() {
    let mut violations = 0;
    for seed in 0..10 {
        let pp = generate_connected_planted_partition(200, 4, 0.2, DegreeSpec::default_power_law(), seed, 50)
            .unwrap();
        let exact = exact_window_transition(&pp.graph, 10).unwrap();
        let corr: Vec<f64> = [2, 10, 50, 200]
            .iter()
            .map(|&b| mean_row_correlation(&exact, &block_approx_transition(&pp.graph, b, 10, None).unwrap()))
            .collect();
        if corr.windows(2).any(|w| w[1] < w[0]) {
            violations += 1;
        }
        assert!((corr[3] - 1.0).abs() < 1e-9, "{corr:?}");
    }
    assert!(violations <= 1, "{violations} seeds not monotone");
}

#[test]
fn planted_communities_are_closer_in_embedding() {
    let pp = generate_connected_planted_partition(100, 2, 0.05, DegreeSpec::Regular(8.0), 2, 50).unwrap();
    let cfg = R2vConfig { dim: 16, ..R2vConfig::default() };
    let e = residual2vec(&pp.graph, &cfg).unwrap();
    let (mut within, mut between) = (Vec::new(), Vec::new());
    for i in 0..100 {
        for j in i + 1..100 {
            let c = e.cosine(i, j);
            if pp.labels.label(i) == pp.labels.label(j) {
                within.push(c);
            } else {
                between.push(c);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&within) > mean(&between));
}
