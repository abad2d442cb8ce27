//! Random walks on the `k`-simplices of a complex.
//!
//! Two transition kernels are supported:
//!
//! - *uniform connection*: draw a face or coface `e` of the current simplex
//!   uniformly, then step to a uniform coface (resp. face) of `e`. The current
//!   simplex itself is a candidate, so self-transitions are common.
//! - *uniform neighbor*: draw the next simplex uniformly from the lower and
//!   upper neighbours, then draw the connection uniformly from the shared
//!   faces and cofaces.
//!
//! [`AdjacencyMode`] restricts the usable connections. Walks on vertices always
//! keep their cofaces (edges), otherwise `LowerOnly` would freeze them. When no
//! connection is usable the walk records [`Connection::Stay`].

mod oracle;

pub use oracle::{transition_oracle, TransitionOracle};

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{ComplexError, SimplexId, SimplicialComplex};
use crate::rng::{self, StreamRng};
use crate::sparse::CsrPattern;

#[derive(Debug, Error, PartialEq)]
pub enum WalkError {
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error("walk length must be at least 1")]
    ZeroLength,
    #[error("invalid walk at step {step}: {reason}")]
    Invalid { step: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingStrategy {
    #[default]
    #[serde(alias = "connection")]
    UniformConnection,
    #[serde(alias = "neighbor")]
    UniformNeighbor,
}

impl FromStr for SamplingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "connection" | "uniform-connection" => Ok(Self::UniformConnection),
            "neighbor" | "uniform-neighbor" => Ok(Self::UniformNeighbor),
            _ => Err(format!("unknown sampling strategy `{s}` (expected connection|neighbor)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AdjacencyMode {
    #[default]
    Both,
    #[serde(alias = "upper")]
    UpperOnly,
    #[serde(alias = "lower")]
    LowerOnly,
}

impl AdjacencyMode {
    pub const ALL: [AdjacencyMode; 3] = [AdjacencyMode::Both, AdjacencyMode::UpperOnly, AdjacencyMode::LowerOnly];

    /// Whether faces may be traversed by walks on `order`-simplices.
    pub fn allows_faces(self, order: usize) -> bool {
        order > 0 && matches!(self, Self::Both | Self::LowerOnly)
    }

    /// Whether cofaces may be traversed; vertices always may.
    pub fn allows_cofaces(self, order: usize) -> bool {
        order == 0 || matches!(self, Self::Both | Self::UpperOnly)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Both => "both",
            Self::UpperOnly => "upper",
            Self::LowerOnly => "lower",
        }
    }
}

impl FromStr for AdjacencyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(Self::Both),
            "upper" | "upper-only" => Ok(Self::UpperOnly),
            "lower" | "lower-only" => Ok(Self::LowerOnly),
            _ => Err(format!("unknown adjacency mode `{s}` (expected both|upper|lower)")),
        }
    }
}

/// How many walks to start per order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WalkCount {
    /// One walk from every simplex, in index order.
    #[default]
    All,
    /// This many walks with starts drawn uniformly with replacement.
    Sampled(usize),
}

impl FromStr for WalkCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(Self::All);
        }
        match s.parse::<usize>() {
            Ok(m) if m > 0 => Ok(Self::Sampled(m)),
            _ => Err(format!("walk count must be `all` or a positive integer, got `{s}`")),
        }
    }
}

/// The connection traversed between two consecutive walk simplices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Connection {
    /// Index of a shared `(k-1)`-simplex.
    Face(usize),
    /// Index of a shared `(k+1)`-simplex.
    Coface(usize),
    /// No usable connection; the walk stayed in place.
    Stay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkParams {
    pub strategy: SamplingStrategy,
    pub mode: AdjacencyMode,
    /// Keep the diagonal of the neighbour table (the simplex itself is a
    /// candidate next step under neighbour sampling).
    pub include_self: bool,
    /// Under connection sampling, exclude the current simplex when choosing
    /// among the faces/cofaces of the drawn connection.
    pub exclude_return: bool,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            strategy: SamplingStrategy::UniformConnection,
            mode: AdjacencyMode::Both,
            include_self: true,
            exclude_return: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    pub order: usize,
    pub simplices: Vec<usize>,
    pub connections: Vec<Connection>,
}

impl Walk {
    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn simplex(&self, i: usize) -> SimplexId {
        SimplexId::new(self.order, self.simplices[i])
    }

    /// Relabels simplices and connections with per-order permutations.
    pub fn permuted(&self, perms: &[Vec<usize>]) -> Walk {
        let k = self.order;
        Walk {
            order: k,
            simplices: self.simplices.iter().map(|&v| perms[k][v]).collect(),
            connections: self
                .connections
                .iter()
                .map(|c| match *c {
                    Connection::Face(f) => Connection::Face(perms[k - 1][f]),
                    Connection::Coface(f) => Connection::Coface(perms[k + 1][f]),
                    Connection::Stay => Connection::Stay,
                })
                .collect(),
        }
    }

    /// One-line text form: `k=<order> v0 F:<id> v1 C:<id> v2 S v3 ...`.
    pub fn to_line(&self) -> String {
        let mut out = format!("k={}", self.order);
        for (i, v) in self.simplices.iter().enumerate() {
            if i > 0 {
                match self.connections[i - 1] {
                    Connection::Face(f) => write!(out, " F:{f}").unwrap(),
                    Connection::Coface(f) => write!(out, " C:{f}").unwrap(),
                    Connection::Stay => out.push_str(" S"),
                }
            }
            write!(out, " {v}").unwrap();
        }
        out
    }

    pub fn from_line(line: &str) -> Result<Walk, String> {
        let mut tokens = line.split_whitespace();
        let order = tokens
            .next()
            .and_then(|t| t.strip_prefix("k="))
            .and_then(|t| t.parse().ok())
            .ok_or("walk line must start with k=<order>")?;
        let mut simplices = Vec::new();
        let mut connections = Vec::new();
        for (i, t) in tokens.enumerate() {
            if i % 2 == 0 {
                simplices.push(t.parse().map_err(|_| format!("bad simplex index `{t}`"))?);
            } else {
                let c = if t == "S" {
                    Connection::Stay
                } else if let Some(x) = t.strip_prefix("F:") {
                    Connection::Face(x.parse().map_err(|_| format!("bad face `{t}`"))?)
                } else if let Some(x) = t.strip_prefix("C:") {
                    Connection::Coface(x.parse().map_err(|_| format!("bad coface `{t}`"))?)
                } else {
                    return Err(format!("bad connection token `{t}`"));
                };
                connections.push(c);
            }
        }
        if simplices.is_empty() || connections.len() + 1 != simplices.len() {
            return Err("walk line must alternate simplices and connections".into());
        }
        Ok(Walk {
            order,
            simplices,
            connections,
        })
    }
}

/// Checks the connection invariants of a walk against the complex.
pub fn validate_walk(c: &SimplicialComplex, walk: &Walk) -> Result<(), WalkError> {
    if walk.is_empty() {
        return Err(WalkError::ZeroLength);
    }
    if walk.connections.len() + 1 != walk.len() {
        return Err(WalkError::Invalid {
            step: 0,
            reason: "connection count must be one less than the length".into(),
        });
    }
    for (i, &v) in walk.simplices.iter().enumerate() {
        c.check(SimplexId::new(walk.order, v))?;
        if i == 0 {
            continue;
        }
        let prev = walk.simplex(i - 1);
        let cur = walk.simplex(i);
        let ok = match walk.connections[i - 1] {
            Connection::Face(f) => c.face_indices(prev).contains(&f) && c.face_indices(cur).contains(&f),
            Connection::Coface(f) => c.coface_indices(prev).contains(&f) && c.coface_indices(cur).contains(&f),
            Connection::Stay => prev == cur,
        };
        if !ok {
            return Err(WalkError::Invalid {
                step: i - 1,
                reason: format!("{:?} does not join {} and {}", walk.connections[i - 1], prev, cur),
            });
        }
    }
    Ok(())
}

/// Per-order transition tables restricted to an adjacency mode.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    complex: &'a SimplicialComplex,
    order: usize,
    params: WalkParams,
    /// Allowed faces and cofaces per simplex (split at `split_point`).
    connections: CsrPattern,
    split_point: usize,
    /// Allowed neighbours per simplex.
    neighbors: CsrPattern,
}

impl<'a> Sampler<'a> {
    pub fn new(complex: &'a SimplicialComplex, order: usize, params: WalkParams) -> Result<Self, WalkError> {
        let table = complex.connection_table(order)?;
        let faces_ok = params.mode.allows_faces(order);
        let cofaces_ok = params.mode.allows_cofaces(order);
        let split = table.split_point;
        let connections = CsrPattern::from_rows(
            table.table.cols(),
            (0..complex.count(order)).map(|i| {
                table
                    .table
                    .row(i)
                    .iter()
                    .copied()
                    .filter(|&j| if j < split { faces_ok } else { cofaces_ok })
                    .collect::<Vec<_>>()
            }),
        );
        let neighbors = if params.strategy == SamplingStrategy::UniformNeighbor {
            let n = complex.count(order);
            let lower = match complex.face_rows(order) {
                Some(down) if faces_ok => down.product(&complex.boundary(order)),
                _ => CsrPattern::empty(n, n),
            };
            let upper = match (cofaces_ok, complex.coface_rows(order), complex.face_rows(order + 1)) {
                (true, Some(up), Some(down)) => up.product(down),
                _ => CsrPattern::empty(n, n),
            };
            let both = lower.union(&upper);
            if params.include_self {
                both
            } else {
                both.without_diagonal()
            }
        } else {
            CsrPattern::empty(0, 0)
        };
        Ok(Self {
            complex,
            order,
            params,
            connections,
            split_point: split,
            neighbors,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// One transition from simplex `v`.
    pub fn step(&self, v: usize, rng: &mut StreamRng) -> (Connection, usize) {
        match self.params.strategy {
            SamplingStrategy::UniformConnection => self.step_connection(v, rng),
            SamplingStrategy::UniformNeighbor => self.step_neighbor(v, rng),
        }
    }

    fn step_connection(&self, v: usize, rng: &mut StreamRng) -> (Connection, usize) {
        let row = self.connections.row(v);
        if row.is_empty() {
            return (Connection::Stay, v);
        }
        let j = row[rng::uniform_index(rng, row.len())];
        let (connection, candidates) = if j < self.split_point {
            (Connection::Face(j), self.complex.coface_indices(SimplexId::new(self.order - 1, j)))
        } else {
            let c = j - self.split_point;
            (Connection::Coface(c), self.complex.face_indices(SimplexId::new(self.order + 1, c)))
        };
        if self.params.exclude_return {
            let others = candidates.len() - 1;
            if others == 0 {
                return (connection, v);
            }
            let mut pick = rng::uniform_index(rng, others);
            // skip over v inside the sorted candidate list
            let pos = candidates.binary_search(&v).expect("v is incident to its own connection");
            if pick >= pos {
                pick += 1;
            }
            return (connection, candidates[pick]);
        }
        (connection, candidates[rng::uniform_index(rng, candidates.len())])
    }

    fn step_neighbor(&self, v: usize, rng: &mut StreamRng) -> (Connection, usize) {
        let row = self.neighbors.row(v);
        if row.is_empty() {
            return (Connection::Stay, v);
        }
        let u = row[rng::uniform_index(rng, row.len())];
        let shared = self.shared_connections(v, u);
        debug_assert!(!shared.is_empty());
        (shared[rng::uniform_index(rng, shared.len())], u)
    }

    /// Allowed faces and cofaces shared by `v` and `u`, faces first.
    pub fn shared_connections(&self, v: usize, u: usize) -> Vec<Connection> {
        let a = SimplexId::new(self.order, v);
        let b = SimplexId::new(self.order, u);
        let mut out = Vec::new();
        if self.params.mode.allows_faces(self.order) {
            out.extend(intersect(self.complex.face_indices(a), self.complex.face_indices(b)).map(Connection::Face));
        }
        if self.params.mode.allows_cofaces(self.order) {
            out.extend(intersect(self.complex.coface_indices(a), self.complex.coface_indices(b)).map(Connection::Coface));
        }
        out
    }

    /// Samples one walk of `length` simplices starting at `start`.
    pub fn walk(&self, start: usize, length: usize, rng: &mut StreamRng) -> Result<Walk, WalkError> {
        if length == 0 {
            return Err(WalkError::ZeroLength);
        }
        self.complex.check(SimplexId::new(self.order, start))?;
        let mut simplices = Vec::with_capacity(length);
        let mut connections = Vec::with_capacity(length - 1);
        simplices.push(start);
        let mut v = start;
        for _ in 1..length {
            let (c, next) = self.step(v, rng);
            connections.push(c);
            simplices.push(next);
            v = next;
        }
        Ok(Walk {
            order: self.order,
            simplices,
            connections,
        })
    }
}

fn intersect<'s>(a: &'s [usize], b: &'s [usize]) -> impl Iterator<Item = usize> + 's {
    a.iter().copied().filter(move |x| b.binary_search(x).is_ok())
}

/// Samples a single walk under uniform connection sampling.
pub fn sample_walk_connection(
    c: &SimplicialComplex,
    start: SimplexId,
    length: usize,
    rng: &mut StreamRng,
    mode: AdjacencyMode,
) -> Result<Walk, WalkError> {
    let params = WalkParams {
        strategy: SamplingStrategy::UniformConnection,
        mode,
        ..WalkParams::default()
    };
    c.check(start)?;
    Sampler::new(c, start.order, params)?.walk(start.index, length, rng)
}

/// Samples a single walk under uniform neighbour sampling.
pub fn sample_walk_neighbor(
    c: &SimplicialComplex,
    start: SimplexId,
    length: usize,
    rng: &mut StreamRng,
    mode: AdjacencyMode,
    include_self: bool,
) -> Result<Walk, WalkError> {
    let params = WalkParams {
        strategy: SamplingStrategy::UniformNeighbor,
        mode,
        include_self,
        exclude_return: false,
    };
    c.check(start)?;
    Sampler::new(c, start.order, params)?.walk(start.index, length, rng)
}

/// Walks for every modelled order of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSet {
    /// `slots[k]` holds the walks on `k`-simplices; all of equal length.
    pub slots: Vec<Vec<Walk>>,
    pub epoch_seed: u64,
    pub params: WalkParams,
    pub length: usize,
    /// Orders that had no simplices and therefore no walks.
    pub empty_orders: Vec<usize>,
}

impl WalkSet {
    pub fn walks(&self, order: usize) -> &[Walk] {
        self.slots.get(order).map_or(&[], Vec::as_slice)
    }

    /// Lines of the `dump-walks` format, orders ascending.
    pub fn to_lines(&self) -> Vec<String> {
        self.slots.iter().flatten().map(Walk::to_line).collect()
    }

    pub fn permuted(&self, perms: &[Vec<usize>]) -> WalkSet {
        WalkSet {
            slots: self.slots.iter().map(|s| s.iter().map(|w| w.permuted(perms)).collect()).collect(),
            ..self.clone()
        }
    }
}

/// Samples the order-`k` slot of a walk set. Walk `j` draws from the stream
/// `(epoch_seed, k, j)`; sampled start positions from `(epoch_seed, starts, k)`.
pub fn sample_walk_set(
    c: &SimplicialComplex,
    order: usize,
    count: WalkCount,
    length: usize,
    params: WalkParams,
    epoch_seed: u64,
) -> Result<Vec<Walk>, WalkError> {
    if length == 0 {
        return Err(WalkError::ZeroLength);
    }
    let n = c.count(order);
    if n == 0 {
        return Ok(Vec::new());
    }
    let sampler = Sampler::new(c, order, params)?;
    let starts: Vec<usize> = match count {
        WalkCount::All => (0..n).collect(),
        WalkCount::Sampled(m) => {
            let mut r = rng::stream(epoch_seed, rng::domain::WALK_STARTS, order as u64);
            (0..m).map(|_| rng::uniform_index(&mut r, n)).collect()
        }
    };
    starts
        .par_iter()
        .enumerate()
        .map(|(j, &start)| {
            let mut r = rng::stream(epoch_seed, order as u64, j as u64);
            sampler.walk(start, length, &mut r)
        })
        .collect()
}

/// Samples walks for orders `0..=max_order` (orders absent from the complex
/// yield empty slots).
pub fn sample_walk_sets(
    c: &SimplicialComplex,
    max_order: usize,
    count: WalkCount,
    length: usize,
    params: WalkParams,
    epoch_seed: u64,
) -> Result<WalkSet, WalkError> {
    let mut slots = Vec::with_capacity(max_order + 1);
    let mut empty_orders = Vec::new();
    for k in 0..=max_order {
        let slot = sample_walk_set(c, k, count, length, params, epoch_seed)?;
        if slot.is_empty() {
            log::warn!("order {k} has no simplices; no walks sampled");
            empty_orders.push(k);
        }
        slots.push(slot);
    }
    Ok(WalkSet {
        slots,
        epoch_seed,
        params,
        length,
        empty_orders,
    })
}

#[cfg(test)]
mod tests;
