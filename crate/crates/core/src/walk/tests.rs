use super::*;
use crate::complex::build_complex;
use crate::complex::tests::figure_one;

fn id(c: &SimplicialComplex, labels: &[u32]) -> usize {
    let l: Vec<String> = labels.iter().map(|x| x.to_string()).collect();
    c.find_labels(&l).unwrap().index
}

fn params(strategy: SamplingStrategy, mode: AdjacencyMode, include_self: bool) -> WalkParams {
    WalkParams {
        strategy,
        mode,
        include_self,
        exclude_return: false,
    }
}

#[test]
fn connection_oracle_vertex_four() {
    let c = figure_one();
    let o = transition_oracle(&c, 0, WalkParams::default()).unwrap();
    let v4 = id(&c, &[4]);
    assert!((o.prob(v4, v4) - 0.5).abs() < 1e-15);
    for x in [1, 2, 3, 6] {
        assert!((o.prob(v4, id(&c, &[x])) - 0.125).abs() < 1e-15);
    }
    assert_eq!(o.prob(v4, id(&c, &[5])), 0.0);
}

#[test]
fn connection_oracle_edge_three_four() {
    // connections {3, 4, 134, 346}; via vertex 3 the cofaces are {13, 34, 36}
    let c = figure_one();
    let o = transition_oracle(&c, 1, WalkParams::default()).unwrap();
    let e34 = id(&c, &[3, 4]);
    let e13 = id(&c, &[1, 3]);
    // 1/4 * 1/3 via vertex 3 + 1/4 * 1/3 via triangle 134
    assert!((o.prob(e34, e13) - (1.0 / 12.0 + 1.0 / 12.0)).abs() < 1e-15);
}

#[test]
fn oracle_rows_sum_to_one() {
    let c = figure_one();
    for strategy in [SamplingStrategy::UniformConnection, SamplingStrategy::UniformNeighbor] {
        for mode in AdjacencyMode::ALL {
            for k in 0..=2 {
                for include_self in [true, false] {
                    let o = transition_oracle(&c, k, params(strategy, mode, include_self)).unwrap();
                    for row in &o.matrix {
                        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn neighbor_oracle_vertex_four() {
    let c = figure_one();
    let o = transition_oracle(&c, 0, params(SamplingStrategy::UniformNeighbor, AdjacencyMode::Both, false)).unwrap();
    assert!((o.prob(id(&c, &[4]), id(&c, &[1])) - 0.25).abs() < 1e-15);
}

#[test]
fn neighbor_oracle_one_edge_is_permutation() {
    let c = build_complex(&[vec![], vec![vec!["a", "b"]]], vec![], true).unwrap();
    let o = transition_oracle(&c, 0, params(SamplingStrategy::UniformNeighbor, AdjacencyMode::Both, false)).unwrap();
    assert_eq!(o.matrix, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
}

#[test]
fn isolated_vertex_stays() {
    let c = build_complex(&[vec![vec!["x"]]], vec![], false).unwrap();
    for mode in AdjacencyMode::ALL {
        let mut r = rng::stream(1, 0, 0);
        let w = sample_walk_connection(&c, SimplexId::new(0, 0), 5, &mut r, mode).unwrap();
        assert_eq!(w.simplices, vec![0; 5]);
        assert!(w.connections.iter().all(|&c| c == Connection::Stay));
        assert_eq!(w.to_line(), "k=0 0 S 0 S 0 S 0 S 0");
    }
}

#[test]
fn one_edge_alternates() {
    let c = build_complex(&[vec![], vec![vec!["a", "b"]]], vec![], true).unwrap();
    let mut r = rng::stream(3, 0, 0);
    let w = sample_walk_neighbor(&c, SimplexId::new(0, 0), 6, &mut r, AdjacencyMode::Both, false).unwrap();
    assert_eq!(w.simplices, vec![0, 1, 0, 1, 0, 1]);
    assert!(w.connections.iter().all(|&c| c == Connection::Coface(0)));
}

#[test]
fn shared_connections_edge_case() {
    let c = figure_one();
    let s = Sampler::new(&c, 1, params(SamplingStrategy::UniformNeighbor, AdjacencyMode::Both, false)).unwrap();
    let shared = s.shared_connections(id(&c, &[3, 4]), id(&c, &[4, 6]));
    assert_eq!(shared, vec![Connection::Face(id(&c, &[4])), Connection::Coface(id(&c, &[3, 4, 6]))]);
}

#[test]
fn zero_length_and_unknown_start() {
    let c = figure_one();
    let mut r = rng::stream(0, 0, 0);
    assert_eq!(
        sample_walk_connection(&c, SimplexId::new(0, 0), 0, &mut r, AdjacencyMode::Both),
        Err(WalkError::ZeroLength)
    );
    assert!(matches!(
        sample_walk_connection(&c, SimplexId::new(0, 17), 3, &mut r, AdjacencyMode::Both),
        Err(WalkError::Complex(_))
    ));
}

#[test]
fn walk_sets_are_deterministic_and_valid() {
    let c = figure_one();
    for strategy in [SamplingStrategy::UniformConnection, SamplingStrategy::UniformNeighbor] {
        for mode in AdjacencyMode::ALL {
            let p = params(strategy, mode, true);
            let a = sample_walk_sets(&c, 2, WalkCount::All, 12, p, 42).unwrap();
            let b = sample_walk_sets(&c, 2, WalkCount::All, 12, p, 42).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.walks(2).iter().map(|w| w.simplices[0]).collect::<Vec<_>>(), vec![0, 1]);
            for w in a.slots.iter().flatten() {
                validate_walk(&c, w).unwrap();
                assert_eq!(w.len(), 12);
                for conn in &w.connections {
                    match (mode, conn) {
                        (AdjacencyMode::UpperOnly, Connection::Face(_)) => panic!("face used in upper-only mode"),
                        (AdjacencyMode::LowerOnly, Connection::Coface(_)) if w.order > 0 => {
                            panic!("coface used in lower-only mode")
                        }
                        _ => {}
                    }
                }
            }
        }
    }
}

#[test]
fn sampled_starts_are_uniform() {
    let c = figure_one();
    let slot = sample_walk_set(&c, 0, WalkCount::Sampled(1000), 1, WalkParams::default(), 9).unwrap();
    let mut counts = [0usize; 6];
    for w in &slot {
        counts[w.simplices[0]] += 1;
    }
    let p: f64 = 1.0 / 6.0;
    let sigma = (1000.0 * p * (1.0 - p)).sqrt();
    for n in counts {
        assert!((n as f64 - 1000.0 * p).abs() <= 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn exclude_return_never_stays_when_avoidable() {
    let c = figure_one();
    let p = WalkParams {
        exclude_return: true,
        ..WalkParams::default()
    };
    let slot = sample_walk_set(&c, 0, WalkCount::All, 30, p, 5).unwrap();
    for w in &slot {
        for i in 1..w.len() {
            assert_ne!(w.simplices[i], w.simplices[i - 1]);
        }
    }
    let o = transition_oracle(&c, 0, p).unwrap();
    let v4 = id(&c, &[4]);
    assert_eq!(o.prob(v4, v4), 0.0);
}

#[test]
fn walk_line_round_trip() {
    let c = figure_one();
    let set = sample_walk_sets(&c, 2, WalkCount::All, 7, WalkParams::default(), 1).unwrap();
    for w in set.slots.iter().flatten() {
        assert_eq!(&Walk::from_line(&w.to_line()).unwrap(), w);
    }
    assert!(Walk::from_line("k=0 1 F:2").is_err());
}

#[test]
fn validator_rejects_bad_connections() {
    let c = figure_one();
    let w = Walk {
        order: 0,
        simplices: vec![id(&c, &[1]), id(&c, &[5])],
        connections: vec![Connection::Coface(0)],
    };
    assert!(matches!(validate_walk(&c, &w), Err(WalkError::Invalid { step: 0, .. })));
}
