use ndarray::{array, Array2};
use proptest::prelude::*;

use super::*;
use crate::rng::{self, domain};

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::stream(seed, domain::SYNTH, 99);
    Array2::from_shape_simple_fn((rows, cols), || 2.0 * rng::uniform_unit(&mut r) - 1.0)
}

/// Direct per-walk cross-correlation through every layer of the stack.
fn naive_conv(x: &Tensor<f64>, stack: &ConvStack, store: &ParamStore<f64>) -> Vec<Array2<f64>> {
    (0..x.walks)
        .map(|j| {
            let mut h = x.walk(j);
            for (li, layer) in stack.layers.iter().enumerate() {
                if li > 0 {
                    h.mapv_inplace(|v| v.max(0.0));
                }
                let w = store.get(layer.weight);
                let b = store.get(layer.bias);
                let len_out = h.nrows() - layer.kernel + 1;
                let mut out = Array2::zeros((len_out, layer.c_out));
                for i in 0..len_out {
                    for o in 0..layer.c_out {
                        let mut acc = b[[0, o]];
                        for t in 0..layer.kernel {
                            for c in 0..layer.c_in {
                                acc += h[[i + t, c]] * w[[t * layer.c_in + c, o]];
                            }
                        }
                        out[[i, o]] = acc;
                    }
                }
                h = out;
            }
            h
        })
        .collect()
}

#[test]
fn width_one_identity_kernel_is_identity() {
    let mut store = ParamStore::<f64>::new(0);
    let stack = ConvStack::new(&mut store, "c", &[1], &[3, 3]);
    *store.get_mut(stack.layers[0].weight) = Array2::eye(3);
    let x = Tensor::from_step_major(2, random_matrix(10, 3, 1)).unwrap();
    let y = conv1d_forward(&x, &stack, &store).unwrap();
    assert_eq!(y, x);
}

#[test]
fn all_ones_width_three_sums_to_three() {
    let mut store = ParamStore::<f64>::new(0);
    let stack = ConvStack::new(&mut store, "c", &[3], &[1, 1]);
    store.get_mut(stack.layers[0].weight).fill(1.0);
    let x = Tensor::from_step_major(4, Array2::ones((4 * 7, 1))).unwrap();
    let y = conv1d_forward(&x, &stack, &store).unwrap();
    assert_eq!(y.steps, 5);
    assert!(y.data.iter().all(|&v| v == 3.0));
}

#[test]
fn conv_matches_naive_reference() {
    let mut store = ParamStore::<f64>::new(5);
    let stack = ConvStack::new(&mut store, "c", &[3, 3], &[4, 6, 2]);
    assert_eq!(stack.receptive_field(), 5);
    let walks = 3;
    let x = Tensor::from_step_major(walks, random_matrix(12 * walks, 4, 2)).unwrap();
    let y = conv1d_forward(&x, &stack, &store).unwrap();
    assert_eq!(y.steps, 8);
    for (j, expected) in naive_conv(&x, &stack, &store).iter().enumerate() {
        let got = y.walk(j);
        assert_eq!(got.dim(), expected.dim());
        for (a, b) in got.iter().zip(expected) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn too_short_walks_are_rejected() {
    let mut store = ParamStore::<f64>::new(0);
    let stack = ConvStack::new(&mut store, "c", &[3, 3], &[1, 1, 1]);
    let x = Tensor::from_step_major(1, Array2::ones((4, 1))).unwrap();
    assert_eq!(
        conv1d_forward(&x, &stack, &store).unwrap_err(),
        NnError::WalkTooShort { length: 4, field: 5 }
    );
}

#[test]
fn kernels_for_window_give_window_plus_one() {
    for (s, expected) in [(1, vec![2, 1]), (4, vec![3, 3]), (8, vec![5, 5]), (5, vec![4, 3])] {
        let k = conv_kernels_for_window(s);
        assert_eq!(k, expected);
        assert_eq!(1 + k.iter().map(|w| w - 1).sum::<usize>(), s + 1);
    }
}

#[test]
fn sum_of_identity_conv_has_unit_input_gradient() {
    let mut store = ParamStore::<f64>::new(0);
    let stack = ConvStack::new(&mut store, "c", &[1], &[2, 2]);
    *store.get_mut(stack.layers[0].weight) = Array2::eye(2);
    let mut g = Graph::new();
    let bound = store.bind(&mut g);
    let x = g.input(random_matrix(6, 2, 3));
    let y = stack.forward(&mut g, &bound, x, 2).unwrap();
    let loss = g.sum(y);
    let grads = g.backward(loss).unwrap();
    assert!(grads.get(x).unwrap().iter().all(|&v| v == 1.0));
}

#[test]
fn mean_pool_gradient_is_inverse_count() {
    let mut g = Graph::<f64>::new();
    let x = g.input(random_matrix(5, 2, 4));
    let centers = [Some(0), Some(0), Some(1), None, Some(0)];
    let (w, counts) = PoolMode::Mean.weights::<f64>(&centers, 3);
    assert_eq!(counts, vec![3, 1, 0]);
    let p = g.pool(x, &centers, &w, 3).unwrap();
    let loss = g.sum(p);
    let grads = g.backward(loss).unwrap();
    let gx = grads.get(x).unwrap();
    let expected = [1.0 / 3.0, 1.0 / 3.0, 1.0, 0.0, 1.0 / 3.0];
    for (r, e) in expected.iter().enumerate() {
        assert!(gx.row(r).iter().all(|v| (v - e).abs() < 1e-15));
    }
}

#[test]
fn backward_needs_a_recorded_scalar() {
    let mut g = Graph::<f64>::new();
    let x = g.input(Array2::ones((2, 2)));
    assert_eq!(g.backward(Var(7)).unwrap_err(), NnError::GraphNotRecorded(7));
    assert_eq!(g.backward(x).unwrap_err(), NnError::NotScalar(2, 2));
}

#[test]
fn pooling_examples() {
    let rows = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
    let (p, counts) = segment_pool(&rows, &[2, 0, 1], 3, PoolMode::Mean).unwrap();
    assert_eq!(p, array![[3.0, 4.0], [5.0, 6.0], [1.0, 2.0]]);
    assert_eq!(counts, vec![1, 1, 1]);

    let (p, counts) = segment_pool(&rows, &[1, 1, 1], 3, PoolMode::Mean).unwrap();
    assert_eq!(p.row(1), array![3.0, 4.0]);
    assert_eq!(p.row(0), array![0.0, 0.0]);
    assert_eq!(counts, vec![0, 3, 0]);

    let (p, _) = segment_pool(&rows.slice(ndarray::s![..2, ..]).to_owned(), &[0, 0], 1, PoolMode::Mean).unwrap();
    assert_eq!(p, array![[2.0, 3.0]]);
    assert!(segment_pool(&rows, &[0, 5, 0], 3, PoolMode::Sum).is_err());
}

/// Builds a graph from scratch for each evaluation.
type Builder = dyn Fn(&mut Graph<f64>, &[Var]) -> Var;

fn check_gradients(inputs: &[Array2<f64>], build: &Builder) {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|x| g.input(x.clone())).collect();
    let loss = build(&mut g, &vars);
    let grads = g.backward(loss).unwrap();
    let eval = |perturbed: &[Array2<f64>]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|x| g.input(x.clone())).collect();
        let l = build(&mut g, &vars);
        g.value(l)[[0, 0]]
    };
    let h = 1e-6;
    for (i, x) in inputs.iter().enumerate() {
        let analytic: Vec<f64> = grads.get_or_zeros(vars[i], x.dim()).iter().copied().collect();
        for idx in 0..x.len() {
            let mut plus = inputs.to_vec();
            let mut minus = inputs.to_vec();
            plus[i].as_slice_mut().unwrap()[idx] += h;
            minus[i].as_slice_mut().unwrap()[idx] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic[idx];
            let rel = (a - numeric).abs() / a.abs().max(1.0);
            assert!(rel < 1e-4, "input {i} entry {idx}: analytic {a}, numeric {numeric}");
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    for config in 0..24u64 {
        let walks = 2 + (config % 3) as usize;
        let steps = 6 + (config % 4) as usize;
        let c_in = 2 + (config % 2) as usize;
        let n = 5;
        let classes = 3;
        let mut store = ParamStore::<f64>::new(config);
        let stack = ConvStack::new(&mut store, "conv", &[3, 2], &[c_in + 2, 4, 3]);
        let mlp = Mlp::new(&mut store, "mlp", &[3, 4, 3]);
        let head = Mlp::new(&mut store, "head", &[3, 3, classes]);
        let reg = Linear::new(&mut store, "reg", 3, 1);
        let constant = store.uniform("const", (1, 2), 1);
        // Nonzero biases exercise the bias paths.
        for id in store.ids().collect::<Vec<_>>() {
            if store.name(id).ends_with("bias") {
                let d = store.get(id).dim();
                *store.get_mut(id) = random_matrix(d.0, d.1, 1000 + config + id.0 as u64);
            }
        }
        let rows = walks * steps;
        let gather: Vec<Option<usize>> = (0..rows).map(|r| if r % 5 == 4 { None } else { Some((r * 7 + config as usize) % n) }).collect();
        let out_rows = walks * (steps - stack.receptive_field() + 1);
        let centers: Vec<Option<usize>> = (0..out_rows).map(|r| if r % 6 == 5 { None } else { Some((r * 3) % n) }).collect();
        let mode = if config % 2 == 0 { PoolMode::Mean } else { PoolMode::Sum };
        let (weights, counts) = mode.weights::<f64>(&centers, n);
        let covered: Vec<f64> = counts.iter().map(|&c| if c > 0 { 1.0 } else { 0.0 }).collect();
        let labels: Vec<usize> = (0..n).map(|i| (i + config as usize) % classes).collect();
        let mask: Vec<bool> = (0..n).map(|i| i != 2).collect();
        let target: Vec<f64> = (0..n).map(|i| i as f64 * 0.3 - 0.5).collect();

        let n_params = store.len();
        let mut inputs: Vec<Array2<f64>> = store.values().to_vec();
        inputs.push(random_matrix(n, c_in, 50 + config));
        let build = move |g: &mut Graph<f64>, v: &[Var]| -> Var {
            let (params, hidden) = (&v[..n_params], v[n_params]);
            let walk_rows = g.gather_rows(hidden, &gather).unwrap();
            let c = g.broadcast_rows(params[constant.0], rows).unwrap();
            let x = g.concat_cols(&[walk_rows, c]).unwrap();
            let conv = stack.forward(g, params, x, walks).unwrap();
            let pooled = g.pool(conv, &centers, &weights, n).unwrap();
            let upd = mlp.forward(g, params, pooled).unwrap();
            let upd = g.row_scale(upd, &covered).unwrap();
            let skip = g.scale(pooled, 0.5);
            let h = g.add(upd, skip).unwrap();
            let logits = head.forward(g, params, h).unwrap();
            let ce = g.masked_cross_entropy(logits, &labels, &mask).unwrap();
            let pred = reg.forward(g, params, h).unwrap();
            let mse = g.masked_mse(pred, &target, &mask).unwrap();
            g.add(ce, mse).unwrap()
        };
        check_gradients(&inputs, &build);
    }
}

#[test]
fn conv_is_linear_without_nonlinearity() {
    let mut store = ParamStore::<f64>::new(3);
    let stack = ConvStack::new(&mut store, "c", &[4], &[3, 2]);
    for l in &stack.layers {
        store.get_mut(l.bias).fill(0.0);
    }
    let x = random_matrix(20, 3, 8);
    let y = random_matrix(20, 3, 9);
    let f = |m: Array2<f64>| conv1d_forward(&Tensor::from_step_major(2, m).unwrap(), &stack, &store).unwrap().data;
    let lhs = f(&x * 2.5 + &y * -0.75);
    let rhs = f(x) * 2.5 + f(y) * -0.75;
    for (a, b) in lhs.iter().zip(&rhs) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn adam_zero_gradient_keeps_parameters() {
    let mut store = ParamStore::<f64>::new(1);
    store.uniform("w", (3, 2), 3);
    let before = store.clone();
    let mut adam = Adam::new(&store, 1e-3);
    adam.step(&mut store, &[Some(Array2::zeros((3, 2)))]);
    assert_eq!(store, before);
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut store = ParamStore::<f64>::new(1);
    let id = store.add("w", array![[0.5]]);
    let mut adam = Adam::new(&store, 1e-3);
    adam.step(&mut store, &[Some(array![[1.0]])]);
    let delta = 0.5 - store.get(id)[[0, 0]];
    assert!((delta - 1e-3).abs() < 1e-9, "{delta}");
}

#[test]
fn adam_is_deterministic() {
    let run = || {
        let mut store = ParamStore::<f32>::new(4);
        store.uniform("w", (4, 4), 4);
        let mut adam = Adam::new(&store, 1e-2);
        for i in 0..20 {
            let g = store.get(ParamId(0)).mapv(|v| v * (i as f32) - 0.1);
            adam.step(&mut store, &[Some(g)]);
        }
        store
    };
    let (a, b) = (run(), run());
    for (x, y) in a.values()[0].iter().zip(b.values()[0].iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn optimizer_state_round_trips() {
    let mut store = ParamStore::<f32>::new(4);
    store.uniform("w", (2, 3), 2);
    let mut adam = Adam::new(&store, 1e-3);
    adam.step(&mut store, &[Some(Array2::ones((2, 3)))]);
    let sched = PlateauSchedule::new(1e-3, 5);
    let state = OptimizerState::capture(&adam, &sched);
    let (back, s) = state.restore(&store).unwrap();
    assert_eq!(back, adam);
    assert_eq!(s, sched);
    let other = ParamStore::<f32>::new(0);
    assert!(state.restore(&other).is_none());
}

#[test]
fn plateau_keeps_rate_while_improving() {
    let mut s = PlateauSchedule::new(1e-3, 0);
    for e in 0..50 {
        let step = s.step(10.0 - e as f64 * 0.1);
        assert_eq!(step.lr, 1e-3);
        assert!(!step.stop);
    }
}

#[test]
fn plateau_halves_after_ten_flat_epochs() {
    let mut s = PlateauSchedule::new(1e-3, 0);
    s.step(1.0);
    for _ in 0..9 {
        assert_eq!(s.step(1.0).lr, 1e-3);
    }
    let step = s.step(1.0);
    assert!(step.reduced);
    assert!((step.lr - 5e-4).abs() < 1e-18);
}

#[test]
fn plateau_stops_after_ten_reductions() {
    let mut s = PlateauSchedule::new(1e-3, 0);
    let mut epochs = 0;
    loop {
        epochs += 1;
        let step = s.step(1.0);
        if step.stop {
            break;
        }
        assert!(epochs < 1000);
    }
    assert_eq!(s.reductions, 10);
    assert!(s.lr < 1e-6 && s.lr > 9.7e-7);
    assert_eq!(epochs, 1 + 10 * 10);
}

#[test]
fn plateau_respects_minimum_epochs() {
    let mut s = PlateauSchedule::new(1e-3, 500);
    let mut epochs = 0;
    while !s.step(1.0).stop {
        epochs += 1;
    }
    assert_eq!(epochs + 1, 500);
}

#[test]
fn init_is_seeded_and_bounded() {
    let make = |seed| {
        let mut s = ParamStore::<f64>::new(seed);
        Linear::new(&mut s, "l", 16, 8);
        s
    };
    assert_eq!(make(3), make(3));
    assert_ne!(make(3), make(4));
    let s = make(3);
    assert!(s.values()[0].iter().all(|v| v.abs() <= 0.25));
    assert!(s.values()[1].iter().all(|&v| v == 0.0));
}

#[test]
fn tensor_walk_layout() {
    let a = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
    let b = a.mapv(|v: f64| -v);
    let t = Tensor::from_walks(&[a.view(), b.view()]).unwrap();
    assert_eq!((t.walks, t.steps, t.channels()), (2, 3, 2));
    assert_eq!(t.at(1, 2), b.row(2));
    assert_eq!(t.walk(0), a);
    assert_eq!(t.walk(1), b);
    let mut t = t;
    assert!(t.set_grad(Array2::zeros((1, 1))).is_err());
    assert!(t.set_grad(Array2::zeros((6, 2))).is_ok());
}

proptest! {
    #[test]
    fn pooling_matches_grouping_oracle(
        centers in proptest::collection::vec(0usize..6, 1..40),
        seed in 0u64..1000,
        sum in any::<bool>(),
    ) {
        let rows = random_matrix(centers.len(), 3, seed);
        let mode = if sum { PoolMode::Sum } else { PoolMode::Mean };
        let (pooled, counts) = segment_pool(&rows, &centers, 6, mode).unwrap();
        let mut groups: std::collections::HashMap<usize, Vec<usize>> = Default::default();
        for (r, &c) in centers.iter().enumerate() {
            groups.entry(c).or_default().push(r);
        }
        for v in 0..6 {
            let members = groups.get(&v).cloned().unwrap_or_default();
            prop_assert_eq!(counts[v], members.len());
            for col in 0..3 {
                let total: f64 = members.iter().map(|&r| rows[[r, col]]).sum();
                let expected = match (mode, members.len()) {
                    (_, 0) => 0.0,
                    (PoolMode::Sum, _) => total,
                    (PoolMode::Mean, k) => total / k as f64,
                };
                prop_assert!((pooled[[v, col]] - expected).abs() < 1e-6);
            }
        }
        if sum {
            prop_assert!((pooled.sum() - rows.sum()).abs() < 1e-9);
        }
    }

    #[test]
    fn mean_pool_of_constant_rows_is_constant(centers in proptest::collection::vec(0usize..4, 1..20), c in -5.0f64..5.0) {
        let rows = Array2::from_elem((centers.len(), 2), c);
        let (pooled, counts) = segment_pool(&rows, &centers, 4, PoolMode::Mean).unwrap();
        for v in 0..4 {
            if counts[v] > 0 {
                prop_assert!(pooled.row(v).iter().all(|x| (x - c).abs() < 1e-12));
            }
        }
    }
}
