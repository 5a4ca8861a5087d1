//! Deterministic and seeded-random network families.
//!
//! Random families draw from `ChaCha20Rng::seed_from_u64(seed)`. A uniform
//! variate is `(next_u64 >> 11) * 2^-53`; choices over `k` outcomes take the
//! first index whose cumulative normalised weight exceeds the variate.

use std::collections::HashMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::MeasuredNetwork;

/// Upper limit on generated vertex counts.
pub const MAX_GENERATED_VERTICES: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffspringLaw {
    /// Poisson(1) offspring; the conditioned tree is a uniform labelled tree.
    Poisson,
    /// Geometric(1/2) offspring on {0, 1, ...}.
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DendriteShape {
    Star { k: usize },
    Binary { depth: usize },
    /// Vicsek cross tree; level 0 is a centre with four unit legs.
    Vicsek { level: usize },
    /// Galton-Watson tree conditioned on `size` vertices.
    GaltonWatson { size: usize, law: OffspringLaw },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Path {
        n: usize,
    },
    Sierpinski {
        level: usize,
    },
    /// Each cell picks the 3-cell or the 6-cell subdivision with the given weights.
    RandomRecursiveGasket {
        level: usize,
        weights: [f64; 2],
        #[serde(default)]
        seed: u64,
    },
    Dendrite {
        #[serde(flatten)]
        shape: DendriteShape,
        #[serde(default)]
        seed: u64,
    },
    /// Vicsek tree whose measure puts relative weight `weights[0]` on the
    /// centre child and `weights[1]` on each corner child, with the contrast
    /// damped as `w^(1/k)` at subdivision depth `k`.
    TwoWeightedTree {
        depth: usize,
        weights: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeasureRule {
    /// Self-similar for gaskets and the Vicsek tree, per-cell for random
    /// gaskets, unit mass per vertex otherwise.
    #[default]
    Natural,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default)]
    pub measure: MeasureRule,
}

impl From<Family> for GeneratorSpec {
    fn from(family: Family) -> Self {
        Self { family, measure: MeasureRule::Natural }
    }
}

impl GeneratorSpec {
    /// Seed embedded in random families.
    pub fn seed(&self) -> Option<u64> {
        match &self.family {
            Family::RandomRecursiveGasket { seed, .. } | Family::Dendrite { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    pub fn set_seed(&mut self, new: u64) {
        if let Family::RandomRecursiveGasket { seed, .. } | Family::Dendrite { seed, .. } = &mut self.family {
            *seed = new;
        }
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<MeasuredNetwork> {
    let net = match &spec.family {
        Family::Path { n } => gen_path(*n)?,
        Family::Sierpinski { level } => gen_sierpinski(*level)?,
        Family::RandomRecursiveGasket { level, weights, seed } => gen_random_recursive_gasket(*level, *weights, *seed)?,
        Family::Dendrite { shape, seed } => gen_dendrite(shape, *seed)?,
        Family::TwoWeightedTree { depth, weights } => gen_two_weighted_tree(*depth, *weights)?,
    };
    match spec.measure {
        MeasureRule::Natural => Ok(net),
        MeasureRule::Uniform => {
            let edges = net.edges().iter().map(|e| (e.u, e.v, e.conductance)).collect();
            MeasuredNetwork::with_ids(net.name().to_string(), net.ids().to_vec(), vec![1.0; net.len()], edges)
        }
    }
}

fn uniform(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn choose(rng: &mut ChaCha20Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let u = uniform(rng) * total;
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

fn index_below(rng: &mut ChaCha20Rng, n: usize) -> usize {
    ((uniform(rng) * n as f64) as usize).min(n - 1)
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_GENERATED_VERTICES {
        return Err(Error::InvalidSpec(format!("{n} vertices exceeds the cap of {MAX_GENERATED_VERTICES}")));
    }
    Ok(())
}

/// Unit conductances and unit masses on `0 - 1 - ... - (n-1)`.
pub fn gen_path(n: usize) -> Result<MeasuredNetwork> {
    if n < 2 {
        return Err(Error::InvalidSpec("a path needs at least 2 vertices".into()));
    }
    check_size(n)?;
    let edges = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    MeasuredNetwork::from_parts(format!("path-{n}"), vec![1.0; n], edges)
}

/// Vertices keyed by lattice coordinates, numbered in order of first appearance.
#[derive(Default)]
struct LatticeBuilder {
    index: HashMap<(i64, i64), usize>,
    measure: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
}

impl LatticeBuilder {
    fn vertex(&mut self, p: (i64, i64)) -> usize {
        let next = self.index.len();
        let id = *self.index.entry(p).or_insert(next);
        if id == self.measure.len() {
            self.measure.push(0.0);
        }
        id
    }

    fn edge(&mut self, a: (i64, i64), b: (i64, i64)) -> (usize, usize) {
        let (u, v) = (self.vertex(a), self.vertex(b));
        self.edges.push((u, v, 1.0));
        (u, v)
    }

    fn finish(self, name: String) -> Result<MeasuredNetwork> {
        check_size(self.measure.len())?;
        MeasuredNetwork::from_parts(name, self.measure, self.edges)
    }
}

/// Bottom-level upward triangle with origin `(a, b)` and side `s` on the
/// triangular lattice; its mass is split equally among the corners.
fn bottom_triangle(builder: &mut LatticeBuilder, (a, b): (i64, i64), s: i64, mass: f64) {
    let p = [(a, b), (a + s, b), (a, b + s)];
    let ids: Vec<usize> = p.iter().map(|&q| builder.vertex(q)).collect();
    for &i in &ids {
        builder.measure[i] += mass / 3.0;
    }
    builder.edge(p[0], p[1]);
    builder.edge(p[1], p[2]);
    builder.edge(p[0], p[2]);
}

/// Upward sub-triangles of a cell split into `m` parts per side (m = 2 or 3).
fn subcells((a, b): (i64, i64), s: i64, m: i64) -> Vec<(i64, i64)> {
    let t = s / m;
    let mut out = Vec::new();
    for j in 0..m {
        for i in 0..m - j {
            out.push((a + i * t, b + j * t));
        }
    }
    out
}

/// Level-`level` Sierpinski gasket graph with the self-similar measure of total mass 1.
pub fn gen_sierpinski(level: usize) -> Result<MeasuredNetwork> {
    if level > 6 {
        return Err(Error::InvalidSpec(format!("gasket level {level} exceeds 6")));
    }
    fn rec(builder: &mut LatticeBuilder, origin: (i64, i64), s: i64, depth: usize, mass: f64) {
        if depth == 0 {
            bottom_triangle(builder, origin, s, mass);
            return;
        }
        for c in subcells(origin, s, 2) {
            rec(builder, c, s / 2, depth - 1, mass / 3.0);
        }
    }
    let mut builder = LatticeBuilder::default();
    rec(&mut builder, (0, 0), 1 << level, level, 1.0);
    builder.finish(format!("sierpinski-{level}"))
}

/// Random recursive gasket: every non-bottom cell, visited in depth-first
/// pre-order, draws one variate to choose between the 3-cell (side halved)
/// and the 6-cell (side divided by three) subdivision. Children share the
/// parent's mass equally.
pub fn gen_random_recursive_gasket(level: usize, weights: [f64; 2], seed: u64) -> Result<MeasuredNetwork> {
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidSpec(format!("pattern weights {weights:?} must be non-negative with positive sum")));
    }
    if level > 5 {
        return Err(Error::InvalidSpec(format!("random gasket level {level} exceeds 5")));
    }
    fn rec(builder: &mut LatticeBuilder, rng: &mut ChaCha20Rng, w: &[f64; 2], origin: (i64, i64), s: i64, depth: usize, mass: f64) {
        if depth == 0 {
            bottom_triangle(builder, origin, s, mass);
            return;
        }
        let m = if choose(rng, w) == 0 { 2 } else { 3 };
        let children = subcells(origin, s, m);
        let child_mass = mass / children.len() as f64;
        for c in children {
            rec(builder, rng, w, c, s / m, depth - 1, child_mass);
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut builder = LatticeBuilder::default();
    rec(&mut builder, &mut rng, &weights, (0, 0), 6i64.pow(level as u32), level, 1.0);
    builder.finish(format!("random-gasket-{level}-{seed}"))
}

pub fn gen_dendrite(shape: &DendriteShape, seed: u64) -> Result<MeasuredNetwork> {
    match *shape {
        DendriteShape::Star { k } => {
            if k == 0 {
                return Err(Error::InvalidSpec("a star needs at least one leg".into()));
            }
            check_size(k + 1)?;
            let edges = (1..=k).map(|i| (0, i, 1.0)).collect();
            MeasuredNetwork::from_parts(format!("star-{k}"), vec![1.0; k + 1], edges)
        }
        DendriteShape::Binary { depth } => {
            let n = (1usize << (depth + 1)) - 1;
            check_size(n)?;
            let edges = (1..n).map(|i| ((i - 1) / 2, i, 1.0)).collect();
            MeasuredNetwork::from_parts(format!("binary-{depth}"), vec![1.0; n], edges)
        }
        DendriteShape::Vicsek { level } => vicsek(level, |_, _| 1.0, format!("vicsek-{level}")),
        DendriteShape::GaltonWatson { size, law } => {
            if size < 2 {
                return Err(Error::InvalidSpec("a conditioned tree needs at least 2 vertices".into()));
            }
            check_size(size)?;
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let parents = match law {
                OffspringLaw::Poisson => prufer_tree(&mut rng, size),
                OffspringLaw::Geometric => geometric_tree(&mut rng, size),
            };
            let edges = parents.iter().enumerate().skip(1).map(|(v, &p)| (p, v, 1.0)).collect();
            let tag = match law {
                OffspringLaw::Poisson => "poisson",
                OffspringLaw::Geometric => "geometric",
            };
            MeasuredNetwork::from_parts(format!("gw-{tag}-{size}-{seed}"), vec![1.0; size], edges)
        }
    }
}

/// Uniform labelled tree decoded from a random Prufer sequence; returns
/// parent pointers after re-rooting at vertex 0 in BFS order.
fn prufer_tree(rng: &mut ChaCha20Rng, n: usize) -> Vec<usize> {
    let seq: Vec<usize> = (0..n.saturating_sub(2)).map(|_| index_below(rng, n)).collect();
    let mut degree = vec![1usize; n];
    for &s in &seq {
        degree[s] += 1;
    }
    let mut leaves: std::collections::BTreeSet<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    let mut adj = vec![Vec::new(); n];
    for &s in &seq {
        let leaf = *leaves.iter().next().unwrap();
        leaves.remove(&leaf);
        adj[leaf].push(s);
        adj[s].push(leaf);
        degree[s] -= 1;
        if degree[s] == 1 {
            leaves.insert(s);
        }
    }
    let rest: Vec<usize> = leaves.into_iter().collect();
    adj[rest[0]].push(rest[1]);
    adj[rest[1]].push(rest[0]);
    bfs_relabel(&adj)
}

/// Relabel a tree in BFS order from vertex 0 and return parent pointers.
fn bfs_relabel(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut label = vec![usize::MAX; n];
    let mut order = vec![0usize];
    label[0] = 0;
    let mut parents = vec![0usize];
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        let mut nbrs = adj[v].clone();
        nbrs.sort_unstable();
        for w in nbrs {
            if label[w] == usize::MAX {
                label[w] = order.len();
                order.push(w);
                parents.push(label[v]);
            }
        }
    }
    parents
}

/// Geometric(1/2) Galton-Watson tree conditioned on `n` vertices: redraw
/// offspring vectors until they sum to `n - 1`, rotate by the cyclic lemma
/// and decode the depth-first Lukasiewicz walk.
fn geometric_tree(rng: &mut ChaCha20Rng, n: usize) -> Vec<usize> {
    let xi = loop {
        let xi: Vec<usize> = (0..n)
            .map(|_| {
                let u = 1.0 - uniform(rng);
                (u.ln() / 0.5f64.ln()).floor() as usize
            })
            .collect();
        if xi.iter().sum::<usize>() == n - 1 {
            break xi;
        }
    };
    // rotate to start right after the first minimum of the walk
    let mut walk = 0i64;
    let mut min = i64::MAX;
    let mut start = 0;
    for (i, &k) in xi.iter().enumerate() {
        walk += k as i64 - 1;
        if walk < min {
            min = walk;
            start = i + 1;
        }
    }
    let xi: Vec<usize> = (0..n).map(|i| xi[(start + i) % n]).collect();
    let mut parents = vec![0usize; n];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for (v, &k) in xi.iter().enumerate() {
        if v > 0 {
            let top = stack.last_mut().expect("Lukasiewicz walk stays non-negative");
            parents[v] = top.0;
            top.1 -= 1;
            if top.1 == 0 {
                stack.pop();
            }
        }
        if k > 0 {
            stack.push((v, k));
        }
    }
    parents
}

/// Vicsek tree at `level`. `weight(depth, child)` gives the relative mass of
/// child `child` (0 centre, 1..=4 corners) of a cell at subdivision depth
/// `depth >= 1`; each bottom cross spreads its mass evenly over its four
/// edges and each edge halves its share between its endpoints.
fn vicsek(level: usize, weight: impl Fn(usize, usize) -> f64, name: String) -> Result<MeasuredNetwork> {
    if level > 5 {
        return Err(Error::InvalidSpec(format!("Vicsek level {level} exceeds 5")));
    }
    const DIRS: [(i64, i64); 4] = [(1, 1), (-1, 1), (-1, -1), (1, -1)];
    fn rec(builder: &mut LatticeBuilder, weight: &dyn Fn(usize, usize) -> f64, c: (i64, i64), level: usize, depth: usize, mass: f64) {
        if level == 0 {
            for d in DIRS {
                let (u, v) = builder.edge(c, (c.0 + d.0, c.1 + d.1));
                builder.measure[u] += mass / 8.0;
                builder.measure[v] += mass / 8.0;
            }
            return;
        }
        let arm = 2 * 3i64.pow(level as u32 - 1);
        let w: Vec<f64> = (0..5).map(|k| weight(depth + 1, k)).collect();
        let total: f64 = w.iter().sum();
        rec(builder, weight, c, level - 1, depth + 1, mass * w[0] / total);
        for (k, d) in DIRS.iter().enumerate() {
            rec(builder, weight, (c.0 + d.0 * arm, c.1 + d.1 * arm), level - 1, depth + 1, mass * w[k + 1] / total);
        }
    }
    let mut builder = LatticeBuilder::default();
    rec(&mut builder, &weight, (0, 0), level, 0, 1.0);
    builder.finish(name)
}

/// Vicsek tree with a damped two-weight cascade measure; the damping makes
/// the volume fluctuations grow logarithmically rather than polynomially.
pub fn gen_two_weighted_tree(depth: usize, weights: [f64; 2]) -> Result<MeasuredNetwork> {
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidSpec(format!("weights {weights:?} must be positive")));
    }
    let [w_centre, w_corner] = weights;
    vicsek(
        depth,
        move |k, child| {
            let w = if child == 0 { w_centre } else { w_corner };
            w.powf(1.0 / k as f64)
        },
        format!("two-weighted-tree-{depth}"),
    )
}

/// Connected network with a random spanning tree plus `extra` random chords,
/// conductances in [0.2, 5] and masses in [0.1, 3]. Intended for tests.
pub fn random_connected(n: usize, extra: usize, seed: u64) -> Result<MeasuredNetwork> {
    if n < 2 {
        return Err(Error::InvalidSpec("need at least 2 vertices".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    let mut edges = Vec::new();
    for v in 1..n {
        let u = index_below(&mut rng, v);
        seen.insert((u, v));
        edges.push((u, v, 0.2 + 4.8 * uniform(&mut rng)));
    }
    let max_extra = n * (n - 1) / 2 - (n - 1);
    for _ in 0..extra.min(max_extra) {
        loop {
            let a = index_below(&mut rng, n);
            let b = index_below(&mut rng, n);
            let key = (a.min(b), a.max(b));
            if a != b && seen.insert(key) {
                edges.push((key.0, key.1, 0.2 + 4.8 * uniform(&mut rng)));
                break;
            }
        }
    }
    let measure = (0..n).map(|_| 0.1 + 2.9 * uniform(&mut rng)).collect();
    MeasuredNetwork::from_parts(format!("random-{n}-{seed}"), measure, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resistance::{effective_resistance, resistance_metric};

    fn hop_distances(net: &MeasuredNetwork, s: usize) -> Vec<f64> {
        let mut d = vec![f64::INFINITY; net.len()];
        d[s] = 0.0;
        let mut q = std::collections::VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            for &(y, _) in net.neighbors(x) {
                if d[y].is_infinite() {
                    d[y] = d[x] + 1.0;
                    q.push_back(y);
                }
            }
        }
        d
    }

    fn corner(net: &MeasuredNetwork, side: i64) -> [usize; 3] {
        // corners are the only vertices of degree 2
        let c: Vec<usize> = (0..net.len()).filter(|&x| net.neighbors(x).len() == 2).collect();
        assert_eq!(c.len(), 3, "side {side}");
        [c[0], c[1], c[2]]
    }

    #[test]
    fn path_basics() {
        let net = gen_path(2).unwrap();
        assert_eq!(net.edges().len(), 1);
        let net = gen_path(30).unwrap();
        assert!((resistance_metric(&net).unwrap().diameter() - 29.0).abs() < 1e-9);
        assert!(gen_path(1).is_err());
    }

    #[test]
    fn gasket_counts_and_mass() {
        for level in 0..=5usize {
            let net = gen_sierpinski(level).unwrap();
            assert_eq!(net.len(), (3usize.pow(level as u32 + 1) + 3) / 2);
            assert!((net.total_mass() - 1.0).abs() < 1e-12);
            assert_eq!(net.edges().len(), 3usize.pow(level as u32 + 1));
        }
        assert!(gen_sierpinski(7).is_err());
    }

    #[test]
    fn gasket_resistance_scaling() {
        let mut prev = None;
        for level in 1..=4usize {
            let net = gen_sierpinski(level).unwrap();
            let [a, b, _] = corner(&net, 1 << level);
            let r = effective_resistance(&net, &[a], &[b]).unwrap();
            if let Some(p) = prev {
                let ratio: f64 = r / p;
                assert!((ratio - 5.0 / 3.0).abs() < 0.02 * 5.0 / 3.0, "ratio {ratio}");
            }
            prev = Some(r);
        }
    }

    #[test]
    fn degenerate_random_gasket_is_deterministic_gasket() {
        for level in 1..=3 {
            let det = gen_sierpinski(level).unwrap();
            let rnd = gen_random_recursive_gasket(level, [1.0, 0.0], 9).unwrap();
            assert_eq!(det.len(), rnd.len());
            assert_eq!(det.edges().len(), rnd.edges().len());
            let mut a: Vec<f64> = det.measure().to_vec();
            let mut b: Vec<f64> = rnd.measure().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn random_families_are_reproducible() {
        let a = gen_random_recursive_gasket(3, [0.5, 0.5], 42).unwrap();
        let b = gen_random_recursive_gasket(3, [0.5, 0.5], 42).unwrap();
        assert_eq!(a.to_spec(), b.to_spec());
        assert!((a.total_mass() - 1.0).abs() < 1e-12);
        let c = gen_random_recursive_gasket(3, [0.5, 0.5], 43).unwrap();
        assert_ne!(a.to_spec(), c.to_spec());
        for law in [OffspringLaw::Poisson, OffspringLaw::Geometric] {
            let shape = DendriteShape::GaltonWatson { size: 500, law };
            let x = gen_dendrite(&shape, 7).unwrap();
            let y = gen_dendrite(&shape, 7).unwrap();
            assert_eq!(x.to_spec(), y.to_spec());
            assert_eq!(x.len(), 500);
            assert_eq!(x.edges().len(), 499);
        }
    }

    #[test]
    fn trees_have_path_metric() {
        let shapes = [
            DendriteShape::Star { k: 3 },
            DendriteShape::Binary { depth: 4 },
            DendriteShape::Vicsek { level: 2 },
            DendriteShape::GaltonWatson { size: 60, law: OffspringLaw::Poisson },
            DendriteShape::GaltonWatson { size: 60, law: OffspringLaw::Geometric },
        ];
        for shape in &shapes {
            let net = gen_dendrite(shape, 3).unwrap();
            assert_eq!(net.edges().len(), net.len() - 1);
            let metric = resistance_metric(&net).unwrap();
            for s in [0, net.len() / 2, net.len() - 1] {
                let d = hop_distances(&net, s);
                for y in 0..net.len() {
                    assert!((metric.get(s, y) - d[y]).abs() < 1e-12, "{shape:?}");
                }
            }
        }
        let star = gen_dendrite(&DendriteShape::Star { k: 3 }, 0).unwrap();
        assert!((resistance_metric(&star).unwrap().get(1, 2) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn vicsek_counts() {
        let mut count = 5;
        for level in 0..=3 {
            let net = gen_dendrite(&DendriteShape::Vicsek { level }, 0).unwrap();
            assert_eq!(net.len(), count);
            assert!((net.total_mass() - 1.0).abs() < 1e-12);
            let diam = resistance_metric(&net).unwrap().diameter();
            assert!((diam - 2.0 * 3f64.powi(level as i32)).abs() < 1e-9);
            count = 5 * count - 4;
        }
    }

    #[test]
    fn two_weighted_tree_reduces_to_vicsek() {
        let a = gen_two_weighted_tree(2, [1.0, 1.0]).unwrap();
        let b = gen_dendrite(&DendriteShape::Vicsek { level: 2 }, 0).unwrap();
        for (x, y) in a.measure().iter().zip(b.measure()) {
            assert!((x - y).abs() < 1e-15);
        }
        let c = gen_two_weighted_tree(2, [8.0, 1.0]).unwrap();
        assert!((c.total_mass() - 1.0).abs() < 1e-12);
        assert!(c.measure()[0] > a.measure()[0]);
    }

    #[test]
    fn spec_json_round_trip() {
        let specs = vec![
            GeneratorSpec::from(Family::Path { n: 10 }),
            GeneratorSpec::from(Family::RandomRecursiveGasket { level: 2, weights: [0.3, 0.7], seed: 5 }),
            GeneratorSpec {
                family: Family::Dendrite {
                    shape: DendriteShape::GaltonWatson { size: 50, law: OffspringLaw::Geometric },
                    seed: 1,
                },
                measure: MeasureRule::Uniform,
            },
            GeneratorSpec::from(Family::TwoWeightedTree { depth: 2, weights: [4.0, 1.0] }),
        ];
        for spec in specs {
            let json = serde_json::to_string(&spec).unwrap();
            let back: GeneratorSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back, spec);
            generate(&spec).unwrap();
        }
        let parsed: GeneratorSpec = serde_json::from_str(r#"{"family":"sierpinski","level":2}"#).unwrap();
        assert_eq!(generate(&parsed).unwrap().len(), 15);
    }

    #[test]
    fn random_connected_is_valid() {
        for seed in 0..20 {
            let net = random_connected(15, 10, seed).unwrap();
            assert_eq!(net.edges().len(), 24);
        }
    }
}
