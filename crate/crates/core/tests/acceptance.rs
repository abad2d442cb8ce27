//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so progress and the pass/fail lines are
//! printed as they happen. `SCRAWL_ACCEPT=1,4,8` restricts the run to the
//! listed criteria.

use std::time::{Duration, Instant};

use ndarray::Array2;
use scrawl_core::complex::{build_complex, SimplexId, SimplicialComplex};
use scrawl_core::data::{parse_coauthorship, random_complex, CitationConfig, Task, VertexInputs};
use scrawl_core::features::structural_block;
use scrawl_core::model::{EpochBatch, ModelConfig, ScrawlModel};
use scrawl_core::nn::{ConvStack, Graph, Linear, Mlp, ParamStore, PoolMode, Var};
use scrawl_core::rng::{self, StreamRng};
use scrawl_core::run::{self, Dataset, DatasetKind, RunConfig, TaskKind, TrialResult};
use scrawl_core::walk::{
    sample_walk_set, transition_oracle, AdjacencyMode, Connection, Sampler, SamplingStrategy, Walk, WalkCount, WalkParams,
};

const DOMAIN: u64 = 0xACCE;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: u64) -> (bool, String) {
    (elapsed.as_secs() < limit_s, format!("{:.1}s (limit {limit_s}s)", elapsed.as_secs_f64()))
}

fn figure_one() -> SimplicialComplex {
    let v: Vec<Vec<u32>> = (1..=6).map(|i| vec![i]).collect();
    let e: Vec<Vec<u32>> = [[1, 2], [2, 4], [1, 3], [3, 4], [3, 6], [1, 4], [5, 6], [4, 6]].iter().map(|x| x.to_vec()).collect();
    let t = vec![vec![1, 3, 4], vec![3, 4, 6]];
    build_complex(&[v, e, t], vec![], false).unwrap()
}

fn random_matrix(rows: usize, cols: usize, r: &mut StreamRng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || 2.0 * rng::uniform_unit(r) - 1.0)
}

// ---------------------------------------------------------------- criterion 1

/// Identity and adjacency bits straight from vertex sets.
fn naive_bits(c: &SimplicialComplex, walk: &Walk, s: usize) -> Array2<u8> {
    let l = walk.len();
    let k = walk.order;
    let width = 3 * s - 2;
    let mut out = Array2::zeros((l, width));
    for i in 0..l {
        for j in 0..i {
            let offset = i - j;
            if offset > s {
                continue;
            }
            let a = c.vertices(walk.simplex(i));
            let b = c.vertices(walk.simplex(j));
            if a == b {
                out[[i, offset - 1]] = 1;
                continue;
            }
            if offset < 2 {
                continue;
            }
            let shared = a.iter().filter(|v| b.contains(v)).count();
            if k > 0 && shared == k {
                out[[i, s + offset - 2]] = 1;
            }
            let mut union: Vec<usize> = a.iter().chain(b).copied().collect();
            union.sort_unstable();
            union.dedup();
            if union.len() == k + 2 && c.find(&union).is_some() {
                out[[i, 2 * s - 1 + offset - 2]] = 1;
            }
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut r = rng::stream(1, DOMAIN, 0);
    let mut complexes = Vec::new();
    let mut seed = 0;
    while complexes.len() < 50 {
        let c = random_complex(4 + rng::uniform_index(&mut r, 6), 2 + rng::uniform_index(&mut r, 6), 2 + rng::uniform_index(&mut r, 3), seed);
        seed += 1;
        if c.total_simplices() <= 30 && c.max_order() >= 1 {
            complexes.push(c);
        }
    }
    let mut walks = 0;
    let mut mismatches = 0;
    for (ci, c) in complexes.iter().enumerate() {
        for w in 0..20 {
            let order = rng::uniform_index(&mut r, c.max_order() + 1);
            let length = 1 + rng::uniform_index(&mut r, 12);
            let s = 1 + rng::uniform_index(&mut r, 6);
            let params = WalkParams {
                strategy: [SamplingStrategy::UniformConnection, SamplingStrategy::UniformNeighbor][rng::uniform_index(&mut r, 2)],
                mode: AdjacencyMode::ALL[rng::uniform_index(&mut r, 3)],
                ..Default::default()
            };
            let walk = &sample_walk_set(c, order, WalkCount::Sampled(1), length, params, (ci * 100 + w) as u64).unwrap()[0];
            walks += 1;
            if structural_block(walk, c, s) != naive_bits(c, walk, s) {
                mismatches += 1;
            }
        }
    }

    // Cited entries: the vertex walk v1 v2 v4 v3 v6 v4 and the edge walk
    // (12) (24) (34) (46), both at s = 4.
    let fig = figure_one();
    let w0 = Walk {
        order: 0,
        simplices: vec![0, 1, 3, 2, 5, 3],
        connections: [0, 1, 3, 4, 7].map(Connection::Coface).to_vec(),
    };
    let w1 = Walk {
        order: 1,
        simplices: vec![0, 1, 3, 7],
        connections: [1, 3, 3].map(Connection::Face).to_vec(),
    };
    let b0 = structural_block(&w0, &fig, 4);
    let b1 = structural_block(&w1, &fig, 4);
    // Identity column j looks back j + 1 steps; adjacency column j looks back j + 2.
    let cited = [
        ("I(W0)[5,2] revisit of v4", b0[[5, 2]] == 1 && b0.row(5).iter().take(4).sum::<u8>() == 1),
        ("A_up(W0)[2,0]", b0[[2, 4 + 3]] == 1),
        ("A_down(W1)[3,0]", b1[[3, 4]] == 1),
    ];
    let cited_ok = cited.iter().all(|(_, ok)| *ok);
    let (fast, time) = within(t0.elapsed(), 30);
    outcome(
        walks == 1000 && mismatches == 0 && cited_ok && fast,
        format!(
            "{walks} walks on {} complexes, {mismatches} mismatches; cited entries {}; {time}",
            complexes.len(),
            cited.iter().map(|(n, ok)| format!("{n}={}", if *ok { "ok" } else { "WRONG" })).collect::<Vec<_>>().join(", ")
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let c = figure_one();
    let steps = 100_000usize;
    let mut worst: f64 = 0.0;
    let mut rows = 0;
    let mut stream = 0u64;
    for strategy in [SamplingStrategy::UniformConnection, SamplingStrategy::UniformNeighbor] {
        for mode in AdjacencyMode::ALL {
            for order in 0..=c.max_order() {
                let params = WalkParams { strategy, mode, ..Default::default() };
                let oracle = transition_oracle(&c, order, params).unwrap();
                let sampler = Sampler::new(&c, order, params).unwrap();
                let n = c.count(order);
                for v in 0..n {
                    let mut r = rng::stream(2, DOMAIN, stream);
                    stream += 1;
                    let mut counts = vec![0usize; n];
                    for _ in 0..steps {
                        counts[sampler.step(v, &mut r).1] += 1;
                    }
                    for (u, &k) in counts.iter().enumerate() {
                        worst = worst.max((k as f64 / steps as f64 - oracle.prob(v, u)).abs());
                    }
                    rows += 1;
                }
            }
        }
    }
    let (fast, time) = within(t0.elapsed(), 60);
    outcome(worst <= 0.01 && fast, format!("{rows} states x {steps} steps, max |freq - oracle| = {worst:.4} (tol 0.01); {time}"))
}

// ---------------------------------------------------------------- criterion 3

/// Relative error between analytic and central-difference gradients of
/// `f` with respect to every entry of `params` (stride `stride`).
fn fd_check(params: &mut [Array2<f64>], stride: usize, f: &dyn Fn(&[Array2<f64>]) -> f64, analytic: &[Array2<f64>]) -> (f64, usize) {
    let h = 1e-6;
    let analytic: Vec<Array2<f64>> = analytic.iter().map(|a| a.as_standard_layout().into_owned()).collect();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for pi in 0..params.len() {
        let len = params[pi].len();
        for e in (pi % stride..len).step_by(stride) {
            let orig = params[pi].as_slice().unwrap()[e];
            params[pi].as_slice_mut().unwrap()[e] = orig + h;
            let up = f(params);
            params[pi].as_slice_mut().unwrap()[e] = orig - h;
            let down = f(params);
            params[pi].as_slice_mut().unwrap()[e] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi].as_slice().unwrap()[e];
            worst = worst.max((numeric - a).abs() / numeric.abs().max(a.abs()).max(1e-3));
            n += 1;
        }
    }
    (worst, n)
}

fn randomize_biases(store: &mut ParamStore<f64>, r: &mut StreamRng) {
    // Zero biases leave ReLU inputs exactly on the kink for all-zero rows.
    for id in store.ids().collect::<Vec<_>>() {
        if store.name(id).ends_with("bias") {
            let d = store.get(id).dim();
            *store.get_mut(id) = random_matrix(d.0, d.1, r).mapv(|v| 0.5 * v);
        }
    }
}

/// Conv stack, pooling, update MLP, skip and both loss heads.
fn layer_config(config: u64) -> (f64, usize) {
    let mut r = rng::stream(3, DOMAIN, config);
    let walks = 2 + (config % 3) as usize;
    let steps = 6 + (config % 4) as usize;
    let c_in = 2 + (config % 2) as usize;
    let kernels: &[usize] = [&[3usize, 2][..], &[2, 2, 2], &[4], &[1, 3]][(config % 4) as usize];
    let (n, classes) = (5, 3);
    let mut store = ParamStore::<f64>::new(config);
    let mut channels = vec![c_in + 2];
    channels.extend(std::iter::repeat(4).take(kernels.len() - 1));
    channels.push(3);
    let stack = ConvStack::new(&mut store, "conv", kernels, &channels);
    let mlp = Mlp::new(&mut store, "mlp", &[3, 4, 3]);
    let head = Mlp::new(&mut store, "head", &[3, 3, classes]);
    let reg = Linear::new(&mut store, "reg", 3, 1);
    let constant = store.uniform("const", (1, 2), 1);
    randomize_biases(&mut store, &mut r);

    let rows = walks * steps;
    let gather: Vec<Option<usize>> = (0..rows).map(|i| if i % 5 == 4 { None } else { Some(rng::uniform_index(&mut r, n)) }).collect();
    let out_rows = walks * (steps - stack.receptive_field() + 1);
    let centers: Vec<Option<usize>> = (0..out_rows).map(|i| if i % 6 == 5 { None } else { Some(rng::uniform_index(&mut r, n)) }).collect();
    let mode = if config % 2 == 0 { PoolMode::Mean } else { PoolMode::Sum };
    let (weights, counts) = mode.weights::<f64>(&centers, n);
    let covered: Vec<f64> = counts.iter().map(|&c| if c > 0 { 1.0 } else { 0.0 }).collect();
    let labels: Vec<usize> = (0..n).map(|i| (i + config as usize) % classes).collect();
    let mask: Vec<bool> = (0..n).map(|i| i != 2).collect();
    let target: Vec<f64> = (0..n).map(|i| i as f64 * 0.3 - 0.5).collect();

    let n_params = store.len();
    let mut inputs: Vec<Array2<f64>> = store.values().to_vec();
    inputs.push(random_matrix(n, c_in, &mut r));
    let build = |g: &mut Graph<f64>, v: &[Var]| -> Var {
        let (params, hidden) = (&v[..n_params], v[n_params]);
        let walk_rows = g.gather_rows(hidden, &gather).unwrap();
        let c = g.broadcast_rows(params[constant.0], rows).unwrap();
        let x = g.concat_cols(&[walk_rows, c]).unwrap();
        let conv = stack.forward(g, params, x, walks).unwrap();
        let pooled = g.pool(conv, &centers, &weights, n).unwrap();
        let upd = mlp.forward(g, params, pooled).unwrap();
        let upd = g.row_scale(upd, &covered).unwrap();
        let h = g.add(upd, pooled).unwrap();
        let logits = head.forward(g, params, h).unwrap();
        let ce = g.masked_cross_entropy(logits, &labels, &mask).unwrap();
        let pred = reg.forward(g, params, h).unwrap();
        let mse = g.masked_mse(pred, &target, &mask).unwrap();
        g.add(ce, mse).unwrap()
    };
    let value = |xs: &[Array2<f64>]| {
        let mut g = Graph::new();
        let v: Vec<Var> = xs.iter().map(|x| g.input(x.clone())).collect();
        let l = build(&mut g, &v);
        g.value(l)[[0, 0]]
    };
    let mut g = Graph::new();
    let v: Vec<Var> = inputs.iter().map(|x| g.input(x.clone())).collect();
    let l = build(&mut g, &v);
    let grads = g.backward(l).unwrap();
    let analytic: Vec<Array2<f64>> = v.iter().zip(&inputs).map(|(&var, x)| grads.get_or_zeros(var, x.dim())).collect();
    fd_check(&mut inputs, 1, &value, &analytic)
}

struct ModelSetup {
    model: ScrawlModel,
    inputs: Vec<Array2<f64>>,
    batch: EpochBatch<f64>,
}

/// Vertices get two random input channels, edges none, the order above one.
fn model_setup(c: &SimplicialComplex, config: &ModelConfig, store: &mut ParamStore<f64>, seed: u64) -> ModelSetup {
    let counts = c.counts();
    let top = (config.max_order + 1).min(c.max_order());
    let dims: Vec<usize> = (0..=top).map(|k| [2, 0, 1, 1][k]).collect();
    let heads: Vec<Option<usize>> = (0..=config.max_order).map(|k| Some(k + 1)).collect();
    let model = ScrawlModel::new(store, config, &counts, &dims, &heads).unwrap();
    let mut r = rng::stream(seed, DOMAIN, 77);
    let inputs = (0..=model.top_order()).map(|k| random_matrix(counts[k], dims[k], &mut r)).collect();
    let walks = model.sample_walks(c, seed).unwrap();
    let batch = model.prepare(c, &walks).unwrap();
    ModelSetup { model, inputs, batch }
}

fn small_model(layers: usize, max_order: usize) -> ModelConfig {
    ModelConfig {
        max_order,
        layers,
        window: 3,
        walk_length: 7,
        walks: "all".into(),
        hidden: 5,
        head_hidden: 4,
        ..Default::default()
    }
}

fn model_loss(g: &mut Graph<f64>, s: &ModelSetup, bound: &[Var]) -> Var {
    let fwd = s.model.forward(g, bound, &s.inputs, &s.batch).unwrap();
    let mut total: Option<Var> = None;
    for (k, out) in fwd.outputs.iter().enumerate() {
        let Some(out) = *out else { continue };
        let (n, d) = g.shape(out);
        let l = if d == 1 {
            let t: Vec<f64> = (0..n).map(|i| ((i * 7 + k) % 5) as f64 * 0.3 - 0.6).collect();
            g.masked_mse(out, &t, &vec![true; n]).unwrap()
        } else {
            let labels: Vec<usize> = (0..n).map(|i| (i + k) % d).collect();
            g.masked_cross_entropy(out, &labels, &vec![true; n]).unwrap()
        };
        total = Some(match total {
            Some(a) => g.add(a, l).unwrap(),
            None => l,
        });
    }
    total.unwrap()
}

/// Full two-layer model forward on a random complex.
fn model_config(i: u64) -> (f64, usize) {
    let seed = 300 + i;
    let c = random_complex(7, 7, 3, seed);
    let config = small_model(2, c.max_order().min(1));
    let mut store = ParamStore::new(seed);
    let s = model_setup(&c, &config, &mut store, seed);
    randomize_biases(&mut store, &mut rng::stream(seed, DOMAIN, 5));
    let value = |xs: &[Array2<f64>]| {
        let mut g = Graph::new();
        let bound: Vec<Var> = xs.iter().map(|x| g.constant(x.clone())).collect();
        let l = model_loss(&mut g, &s, &bound);
        g.value(l)[[0, 0]]
    };
    let mut g = Graph::new();
    let bound = store.bind(&mut g);
    let l = model_loss(&mut g, &s, &bound);
    let grads = g.backward(l).unwrap();
    let analytic: Vec<Array2<f64>> = bound.iter().zip(store.values()).map(|(&v, p)| grads.get_or_zeros(v, p.dim())).collect();
    let mut params = store.values().to_vec();
    fd_check(&mut params, 3, &value, &analytic)
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut entries = 0;
    let mut configs = 0;
    for i in 0..16 {
        let (w, n) = layer_config(i);
        worst = worst.max(w);
        entries += n;
        configs += 1;
    }
    for i in 0..4 {
        let (w, n) = model_config(i);
        worst = worst.max(w);
        entries += n;
        configs += 1;
    }
    let (fast, time) = within(t0.elapsed(), 120);
    outcome(
        configs >= 20 && worst < 1e-4 && fast,
        format!("{configs} configurations (16 conv/pool/MLP, 4 full 2-layer), {entries} entries, worst relative error {worst:.2e} (tol 1e-4); {time}"),
    )
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Outcome {
    let c = figure_one();
    let mut store = ParamStore::new(3);
    let s = model_setup(&c, &small_model(3, 1), &mut store, 3);
    for id in s.model.module_params() {
        store.get_mut(id).fill(0.0);
    }
    let mut g = Graph::new();
    let bound = store.bind(&mut g);
    let fwd = s.model.forward(&mut g, &bound, &s.inputs, &s.batch).unwrap();
    let first = &fwd.states[0];
    let skip_ok = fwd.states[1..].iter().all(|st| first.iter().zip(st).all(|(a, b)| g.value(*a) == g.value(*b)))
        && g.value(first[0]).iter().any(|&v| v != 0.0);

    let mut equivariant = 0;
    for seed in 0..10u64 {
        let c = random_complex(9, 8, 3, 100 + seed);
        let mut store = ParamStore::new(seed);
        let s = model_setup(&c, &small_model(2, c.max_order().min(1)), &mut store, seed);
        let mut r = rng::stream(seed, DOMAIN, 11);
        let perms: Vec<Vec<usize>> = c
            .counts()
            .iter()
            .map(|&n| {
                let mut p: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    p.swap(i, rng::uniform_index(&mut r, i + 1));
                }
                p
            })
            .collect();
        let pc = c.permuted(&perms);
        let walks = s.model.sample_walks(&c, seed).unwrap();
        let pbatch = s.model.prepare(&pc, &walks.permuted(&perms)).unwrap();
        let pinputs: Vec<Array2<f64>> = s
            .inputs
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let mut y = Array2::zeros(x.dim());
                for i in 0..x.nrows() {
                    y.row_mut(perms[k][i]).assign(&x.row(i));
                }
                y
            })
            .collect();
        let out = s.model.predict(&store, &s.inputs, &s.batch).unwrap();
        let pout = s.model.predict(&store, &pinputs, &pbatch).unwrap();
        let ok = out.iter().zip(&pout).enumerate().all(|(k, (a, b))| match (a, b) {
            (Some(a), Some(b)) => (0..a.nrows()).all(|i| a.row(i) == b.row(perms[k][i])),
            (None, None) => true,
            _ => false,
        });
        if ok {
            equivariant += 1;
        }
    }
    outcome(
        skip_ok && equivariant == 10,
        format!("zero module parameters keep H^L == H^0: {skip_ok}; exact permutation equivariance on {equivariant}/10 instances"),
    )
}

// ------------------------------------------------------------ criteria 5 to 7

fn contact_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.dataset.kind = DatasetKind::SynthContact;
    cfg.task.kind = TaskKind::Classification;
    cfg.task.missing_rate = 0.4;
    cfg.task.stratified = true;
    cfg.task.vertex_inputs = VertexInputs::TrainLabels { dropout: 0.25 };
    cfg.model.max_order = 1;
    cfg.train.patience = 30;
    cfg.train.max_epochs = 300;
    cfg.train.min_epochs = 100;
    cfg
}

fn trials(label: &str, cfg: &RunConfig, n: usize) -> Vec<TrialResult> {
    let data = Dataset::load(&cfg.dataset).unwrap();
    let hash = run::config_hash(cfg, &data);
    (0..n)
        .map(|i| {
            let t0 = Instant::now();
            let r = run::train_trial(cfg, &data, &hash, i, |_| {}).unwrap();
            println!(
                "    {label} trial {i} (seed {}): {} epochs, best train acc {:.3}, val acc {:.3}, {:.0}s",
                r.seed,
                r.log.len(),
                best_train(&r),
                r.final_metric,
                t0.elapsed().as_secs_f64()
            );
            r
        })
        .collect()
}

fn best_train(r: &TrialResult) -> f64 {
    r.log.iter().map(|m| m.train_metric).fold(0.0, f64::max)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn metrics(rs: &[TrialResult]) -> Vec<f64> {
    rs.iter().map(|r| r.final_metric).collect()
}

fn criterion_5(baseline: &[TrialResult], elapsed: Duration) -> Outcome {
    let r = &baseline[0];
    let fit_epoch = r.log.iter().position(|m| m.train_metric >= 1.0).map(|e| e + 1);
    let (fast, time) = within(elapsed, 15 * 60);
    let ok = fit_epoch.is_some_and(|e| e <= 300) && r.final_metric >= 0.9 && fast;
    outcome(
        ok,
        format!(
            "train acc 1.0 first reached at epoch {}; val acc {:.3} (need >= 0.9, chance 0.25); {time}",
            fit_epoch.map_or("never".into(), |e| e.to_string()),
            r.final_metric
        ),
    )
}

fn criterion_6(baseline: &[TrialResult]) -> Outcome {
    let (m, sd) = mean_std(&metrics(baseline));
    println!("    contact-high-school data not bundled; synthetic contact substitutes: mean val acc {m:.3} +- {sd:.3} over 5 repeats");

    // Toy co-authorship complex: values are summed over the papers containing a simplex.
    let dir = tempfile::tempdir().unwrap();
    let toy = dir.path().join("toy.txt");
    std::fs::write(&toy, "A B : 35\nB D : 20\nC D : 15\nA B C : 10\n").unwrap();
    let (c, values) = parse_coauthorship(&std::fs::read_to_string(&toy).unwrap(), &toy).unwrap();
    let value = |labels: &[&str]| {
        let s: SimplexId = c.find_labels(labels).unwrap();
        values[s.order][s.index]
    };
    let expected: [(&[&str], f64); 10] = [
        (&["A"], 45.0),
        (&["B"], 65.0),
        (&["C"], 25.0),
        (&["D"], 35.0),
        (&["A", "B"], 45.0),
        (&["A", "C"], 10.0),
        (&["B", "C"], 10.0),
        (&["B", "D"], 20.0),
        (&["C", "D"], 15.0),
        (&["A", "B", "C"], 10.0),
    ];
    let toy_ok = expected.iter().all(|(l, v)| value(l) == *v) && c.counts() == vec![4, 5, 1];

    let mut cfg = RunConfig::default();
    cfg.dataset.kind = DatasetKind::SynthCitations;
    cfg.dataset.citations = CitationConfig {
        n_authors: 150,
        n_papers: 300,
        ..Default::default()
    };
    cfg.task.kind = TaskKind::Imputation;
    cfg.task.missing_rate = 0.1;
    cfg.train.patience = 30;
    cfg.train.max_epochs = 600;
    cfg.train.min_epochs = 100;
    let data = Dataset::load(&cfg.dataset).unwrap();
    let r = &trials("imputation", &cfg, 1)[0];
    let Task::Imputation(task) = data.task(&cfg.task, r.seed).unwrap() else { unreachable!() };
    let base: Vec<f64> = (0..=cfg.model.max_order)
        .filter(|&k| k < task.truth.len() && task.missing(k).iter().any(|&m| m))
        .map(|k| task.order_accuracy(k, &task.truth[k], &task.missing(k)).unwrap().1)
        .collect();
    let base = base.iter().sum::<f64>() / base.len() as f64;
    let gap = r.final_metric - base;
    outcome(
        toy_ok && gap >= 0.2,
        format!(
            "toy values {}; synthetic citations p=0.1: accuracy {:.3} vs median {base:.3}, gap {gap:.3} (need >= 0.2)",
            if toy_ok { "match" } else { "WRONG" },
            r.final_metric
        ),
    )
}

fn criterion_7(baseline: &[TrialResult]) -> Outcome {
    let base = mean_std(&metrics(baseline));
    let mut s1 = contact_config();
    s1.model.window = 1;
    let narrow = mean_std(&metrics(&trials("s=1", &s1, 5)));
    let mut l10 = contact_config();
    l10.model.walk_length = 10;
    let short = mean_std(&metrics(&trials("l=10", &l10, 5)));
    outcome(
        base.0 >= narrow.0 && base.0 >= short.0,
        format!(
            "s=8,l=50 {:.3} +- {:.3}; s=1 {:.3} +- {:.3}; l=10 {:.3} +- {:.3} (5 repeats each)",
            base.0, base.1, narrow.0, narrow.1, short.0, short.1
        ),
    )
}

// ---------------------------------------------------------------- criterion 8

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = contact_config();
    cfg.out = dir.path().to_path_buf();
    cfg.model.walk_length = 12;
    cfg.model.window = 4;
    cfg.model.layers = 2;
    cfg.model.hidden = 8;
    cfg.train.max_epochs = 5;
    cfg.train.min_epochs = 0;
    cfg.train.repeats = 2;
    cfg.train.seed = 7;
    cfg.train.strict_determinism = true;
    run::train(&cfg).unwrap();
    let a = std::fs::read(dir.path().join("metrics.csv")).unwrap();
    run::train(&cfg).unwrap();
    let b = std::fs::read(dir.path().join("metrics.csv")).unwrap();
    outcome(a == b, format!("two strict runs with master seed 7: metrics.csv {} ({} bytes)", if a == b { "identical" } else { "DIFFER" }, a.len()))
}

// ---------------------------------------------------------------------- main

fn main() {
    let selected: Option<Vec<usize>> = std::env::var("SCRAWL_ACCEPT")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let want = |i: usize| selected.as_ref().is_none_or(|s| s.contains(&i));
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |i: usize, name: &'static str, o: Outcome| {
        println!("{} criterion {i} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((i, name, o));
    };

    if want(1) {
        report(1, "encoding oracle", criterion_1());
    }
    if want(2) {
        report(2, "sampling distribution", criterion_2());
    }
    if want(3) {
        report(3, "gradients", criterion_3());
    }
    if want(4) {
        report(4, "skip and permutation invariants", criterion_4());
    }
    if want(5) || want(6) || want(7) {
        let t0 = Instant::now();
        let first = trials("s=8,l=50", &contact_config(), 1);
        let elapsed = t0.elapsed();
        if want(5) {
            report(5, "overfit smoke test", criterion_5(&first, elapsed));
        }
        if want(6) || want(7) {
            let mut baseline = first;
            let cfg = contact_config();
            let data = Dataset::load(&cfg.dataset).unwrap();
            let hash = run::config_hash(&cfg, &data);
            for i in 1..5 {
                let r = run::train_trial(&cfg, &data, &hash, i, |_| {}).unwrap();
                println!("    s=8,l=50 trial {i} (seed {}): {} epochs, val acc {:.3}", r.seed, r.log.len(), r.final_metric);
                baseline.push(r);
            }
            if want(6) {
                report(6, "classification substitute and imputation", criterion_6(&baseline));
            }
            if want(7) {
                report(7, "ablation trend", criterion_7(&baseline));
            }
        }
    }
    if want(8) {
        report(8, "determinism", criterion_8());
    }

    let failed: Vec<usize> = results.iter().filter(|(_, _, o)| !o.pass).map(|(i, _, _)| *i).collect();
    println!("acceptance: {} passed, {} failed", results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
