use clusterherald::basis::Subspace;
use clusterherald::cluster::{
    fuse_2d_forced, fuse_linear, fuse_linear_forced, linear_cluster, parity_probabilities, parity_project, ClusterState,
    LinkRemoval,
};
use clusterherald::rng::StreamRng;
use proptest::prelude::*;

/// Graph state built gate by gate: `|+⟩^n`, CZ on every edge, then `σ_z`
/// on every qubit except the root.
fn graph_state(n: usize, edges: &[(usize, usize)], root: usize) -> ClusterState {
    let mut amps = vec![(1.0 / (1u64 << n) as f64).sqrt(); 1 << n];
    let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1 == 1;
    for &(i, j) in edges {
        for (idx, a) in amps.iter_mut().enumerate() {
            if bit(idx, i) && bit(idx, j) {
                *a = -*a;
            }
        }
    }
    for q in (0..n).filter(|&q| q != root) {
        for (idx, a) in amps.iter_mut().enumerate() {
            if bit(idx, q) {
                *a = -*a;
            }
        }
    }
    ClusterState::from_amps(n, amps).unwrap()
}

fn chain(n: usize) -> ClusterState {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    graph_state(n, &edges, 0)
}

/// Two chains joined by merging node `removed` into node `kept`.
fn contracted(n: usize, m: usize, kept: usize, removed: usize, root: usize) -> ClusterState {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).chain((n + 1..n + m).map(|i| (i - 1, i))).collect();
    for e in edges.iter_mut() {
        if e.0 == removed {
            e.0 = kept;
        }
        if e.1 == removed {
            e.1 = kept;
        }
    }
    let relabel = |q: usize| if q > removed { q - 1 } else { q };
    let edges: Vec<_> = edges.into_iter().map(|(i, j)| (relabel(i), relabel(j))).collect();
    graph_state(n + m - 1, &edges, relabel(root))
}

fn assert_overlap_one(a: &ClusterState, b: &ClusterState, what: &str) {
    let o = a.overlap(b);
    assert!((o - 1.0).abs() < 1e-12, "{what}: overlap {o}");
}

#[test]
fn linear_cluster_matches_gate_construction() {
    for n in 1..=10 {
        assert_overlap_one(&linear_cluster(n).unwrap(), &chain(n), &format!("n={n}"));
        // Same sign convention, not only the same state up to phase.
        assert_eq!(linear_cluster(n).unwrap().amps()[0].signum(), 1.0);
    }
}

#[test]
fn linear_fusion_success_all_sizes() {
    for n in 1..=9 {
        for m in 1..=(10 - n) {
            let (a, b) = (linear_cluster(n).unwrap(), linear_cluster(m).unwrap());
            for r in 0..2 {
                let f = fuse_linear_forced(&a, &b, Subspace::L, r).unwrap();
                assert!((f.probability - 0.5).abs() < 1e-12);
                assert_eq!(f.measurement, Some(r));
                assert_overlap_one(&f.state, &chain(n + m - 1), &format!("{n}+{m} r={r}"));
            }
        }
    }
}

#[test]
fn linear_fusion_failure_splits_chains() {
    for n in 1..=9 {
        for m in 1..=(10 - n) {
            let (a, b) = (linear_cluster(n).unwrap(), linear_cluster(m).unwrap());
            for (outcome, c) in [(Subspace::D, 0), (Subspace::H, 1)] {
                let f = fuse_linear_forced(&a, &b, outcome, 0).unwrap();
                assert!((f.probability - 0.25).abs() < 1e-12);
                assert_eq!(f.decoupled, Some(c));
                let expected: Vec<usize> = [n - 1, m - 1].into_iter().filter(|&s| s > 0).collect();
                let sizes: Vec<usize> = f.pieces.iter().map(|p| p.n_qubits()).collect();
                assert_eq!(sizes, expected);
                for p in &f.pieces {
                    assert_overlap_one(p, &chain(p.n_qubits()), &format!("{n}+{m} {outcome:?}"));
                }
            }
        }
    }
}

#[test]
fn two_dimensional_fusion_all_links() {
    for n in 1..=5 {
        for m in 1..=5 {
            let (a, b) = (linear_cluster(n).unwrap(), linear_cluster(m).unwrap());
            for k in 0..n {
                for l in 0..m {
                    for r in 0..2 {
                        let f = fuse_2d_forced(&a, &b, k, l, LinkRemoval::RemoveL, Subspace::L, r).unwrap();
                        assert_overlap_one(&f.state, &contracted(n, m, k, n + l, 0), &format!("remove l: {n},{m},{k},{l},{r}"));
                        let f = fuse_2d_forced(&a, &b, k, l, LinkRemoval::RemoveK, Subspace::L, r).unwrap();
                        assert_overlap_one(&f.state, &contracted(n, m, n + l, k, n), &format!("remove k: {n},{m},{k},{l},{r}"));
                    }
                    for outcome in [Subspace::D, Subspace::H] {
                        let f = fuse_2d_forced(&a, &b, k, l, LinkRemoval::RemoveL, outcome, 0).unwrap();
                        let expected: Vec<usize> = [k, n - k - 1, l, m - l - 1].into_iter().filter(|&s| s > 0).collect();
                        let sizes: Vec<usize> = f.pieces.iter().map(|p| p.n_qubits()).collect();
                        assert_eq!(sizes, expected);
                        for p in &f.pieces {
                            assert_overlap_one(p, &chain(p.n_qubits()), "failure piece");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn cross_of_two_triples() {
    let three = linear_cluster(3).unwrap();
    // Hub a_1 with neighbours a_0, a_2, b_0, b_2 (b_0, b_2 relabelled 3, 4).
    let cross = graph_state(5, &[(0, 1), (1, 2), (3, 1), (1, 4)], 0);
    for r in 0..2 {
        let f = fuse_2d_forced(&three, &three, 1, 1, LinkRemoval::default(), Subspace::L, r).unwrap();
        assert_overlap_one(&f.state, &cross, "cross");
    }
    let f = fuse_2d_forced(&three, &three, 1, 1, LinkRemoval::KeepBoth, Subspace::L, 0).unwrap();
    assert_eq!(f.state.n_qubits(), 6);
}

#[test]
fn l_outcome_frequency_matches_projector() {
    let (a, b) = (linear_cluster(3).unwrap(), linear_cluster(2).unwrap());
    let runs = 4000;
    let mut rng = StreamRng::new(21, 0);
    let hits = (0..runs)
        .filter(|_| fuse_linear(&a, &b, false, &mut rng).unwrap().outcome == Subspace::L)
        .count();
    let freq = hits as f64 / runs as f64;
    assert!((freq - 0.5).abs() < 3.0 * (0.25 / runs as f64).sqrt(), "L frequency {freq}");
}

fn random_state(n: usize, values: &[f64]) -> ClusterState {
    let mut amps: Vec<f64> = (0..1 << n).map(|i| values[i % values.len()] + 0.01 * i as f64).collect();
    let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    ClusterState::from_amps(n, amps).unwrap()
}

proptest! {
    #[test]
    fn projectors_complete_and_idempotent(values in proptest::collection::vec(-1.0f64..1.0, 4..20), q1 in 0usize..4, d in 1usize..4) {
        let n = 4;
        let q2 = (q1 + d) % n;
        let psi = random_state(n, &values);
        let p = parity_probabilities(&psi, q1, q2).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for outcome in Subspace::ALL {
            if let Ok((once, _)) = parity_project(&psi, q1, q2, outcome) {
                let (twice, p2) = parity_project(&once, q1, q2, outcome).unwrap();
                prop_assert!((p2 - 1.0).abs() < 1e-12);
                prop_assert!((twice.overlap(&once) - 1.0).abs() < 1e-12);
            }
        }
    }
}
