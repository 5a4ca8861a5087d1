//! Effective resistance, the resistance metric and its balls, escape
//! resistance, greedy ball covers and the chaining-condition probe.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{GroundedSolver, MeasuredNetwork};

/// Effective resistance between disjoint non-empty vertex sets.
pub fn effective_resistance(net: &MeasuredNetwork, a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut boundary = BTreeMap::new();
    for &x in a {
        if x >= net.len() {
            return Err(Error::VertexOutOfRange(x));
        }
        boundary.insert(x, 1.0);
    }
    for &x in b {
        if x >= net.len() {
            return Err(Error::VertexOutOfRange(x));
        }
        if boundary.insert(x, 0.0).is_some() {
            return Err(Error::OverlappingSets(x));
        }
    }
    let solver = GroundedSolver::new(net, boundary.keys().copied())?;
    let potential = solver.solve(&boundary, &vec![0.0; net.len()])?;
    Ok(1.0 / net.dirichlet_energy(&potential)?)
}

/// All-pairs resistance metric plus the graph adjacency needed for balls.
#[derive(Debug, Clone)]
pub struct ResistanceMetric {
    values: DMatrix<f64>,
    adjacency: Vec<Vec<usize>>,
}

/// Full resistance matrix from one grounded factorisation:
/// `R(x,y) = G(x,x) + G(y,y) - 2 G(x,y)` with `G` the Green function grounded at vertex 0.
pub fn resistance_metric(net: &MeasuredNetwork) -> Result<ResistanceMetric> {
    let n = net.len();
    let adjacency: Vec<Vec<usize>> =
        (0..n).map(|x| net.neighbors(x).iter().map(|&(y, _)| y).collect()).collect();
    let mut values = DMatrix::zeros(n, n);
    if n > 1 {
        let solver = GroundedSolver::new(net, [0])?;
        let green = solver.factor().expect("interior is non-empty").inverse();
        // interior slot k holds vertex k + 1
        let g = |x: usize, y: usize| if x == 0 || y == 0 { 0.0 } else { green[(x - 1, y - 1)] };
        for x in 0..n {
            for y in x + 1..n {
                let r = g(x, x) + g(y, y) - 2.0 * g(x, y);
                values[(x, y)] = r;
                values[(y, x)] = r;
            }
        }
    }
    Ok(ResistanceMetric { values, adjacency })
}

impl ResistanceMetric {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[(x, y)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn diameter(&self) -> f64 {
        self.values.max()
    }

    /// Smallest positive resistance between distinct vertices.
    pub fn min_positive(&self) -> f64 {
        let n = self.len();
        let mut best = f64::INFINITY;
        for x in 0..n {
            for y in x + 1..n {
                best = best.min(self.get(x, y));
            }
        }
        best
    }

    /// Largest resistance across a single edge: the discretisation scale.
    pub fn max_edge_resistance(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (x, nbrs) in self.adjacency.iter().enumerate() {
            for &y in nbrs {
                best = best.max(self.get(x, y));
            }
        }
        best
    }

    /// Sorted distinct positive pairwise resistances, merged within a relative tolerance.
    pub fn breakpoints(&self, rel_tol: f64) -> Vec<f64> {
        let n = self.len();
        let mut all = Vec::with_capacity(n * (n - 1) / 2);
        for x in 0..n {
            for y in x + 1..n {
                all.push(self.get(x, y));
            }
        }
        all.sort_by(f64::total_cmp);
        let mut out: Vec<f64> = Vec::new();
        for r in all {
            match out.last() {
                Some(&last) if r - last <= rel_tol * last => {}
                _ => out.push(r),
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let n = self.len();
        let mut header = vec![String::from("vertex")];
        header.extend((0..n).map(|i| i.to_string()));
        w.write_record(&header)?;
        for x in 0..n {
            let mut row = vec![x.to_string()];
            row.extend((0..n).map(|y| format!("{:e}", self.get(x, y))));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Graph-connected component of `{y : R(center, y) < radius}` containing the center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResistanceBall {
    pub center: usize,
    pub radius: f64,
    /// Sorted ascending.
    pub members: Vec<usize>,
}

impl ResistanceBall {
    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    pub fn volume(&self, net: &MeasuredNetwork) -> f64 {
        net.mass_of(&self.members)
    }

    pub fn complement(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&x| !self.contains(x)).collect()
    }
}

pub fn resistance_ball(metric: &ResistanceMetric, x: usize, radius: f64) -> Result<ResistanceBall> {
    if !(radius > 0.0) {
        return Err(Error::NonPositiveRadius(radius));
    }
    if x >= metric.len() {
        return Err(Error::VertexOutOfRange(x));
    }
    let mut seen = vec![false; metric.len()];
    seen[x] = true;
    let mut members = vec![x];
    let mut queue = VecDeque::from([x]);
    while let Some(u) = queue.pop_front() {
        for &v in metric.neighbors(u) {
            if !seen[v] && metric.get(x, v) < radius {
                seen[v] = true;
                members.push(v);
                queue.push_back(v);
            }
        }
    }
    members.sort_unstable();
    Ok(ResistanceBall { center: x, radius, members })
}

/// `R(center, B^c)`; never exceeds the radius.
pub fn escape_resistance(net: &MeasuredNetwork, ball: &ResistanceBall) -> Result<f64> {
    let complement = ball.complement(net.len());
    if complement.is_empty() {
        return Err(Error::NoComplement(ball.center));
    }
    effective_resistance(net, &[ball.center], &complement)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverResult {
    pub center: usize,
    pub radius: f64,
    pub shrink: f64,
    pub centers: Vec<usize>,
    pub size: usize,
}

/// Greedy cover of `B(x, r)` by balls of radius `shrink * r`: repeatedly pick
/// the smallest-index member not yet covered.
pub fn greedy_cover(metric: &ResistanceMetric, x: usize, radius: f64, shrink: f64) -> Result<CoverResult> {
    if !(shrink > 0.0 && shrink <= 0.5) {
        return Err(Error::BadShrinkFactor(shrink));
    }
    let ball = resistance_ball(metric, x, radius)?;
    let mut covered = vec![false; metric.len()];
    let mut centers = Vec::new();
    for &candidate in &ball.members {
        if covered[candidate] {
            continue;
        }
        centers.push(candidate);
        for y in resistance_ball(metric, candidate, shrink * radius)?.members {
            covered[y] = true;
        }
    }
    assert!(ball.members.iter().all(|&y| covered[y]), "greedy cover left a member uncovered");
    Ok(CoverResult { center: x, radius, shrink, size: centers.len(), centers })
}

/// Minimax chains from one source: `best[k][v]` is the smallest achievable
/// largest step over chains `source = x_0, ..., x_k = v` (repeats allowed).
#[derive(Debug, Clone)]
pub struct ChainTable {
    source: usize,
    best: Vec<Vec<f64>>,
    pred: Vec<Vec<usize>>,
}

impl ChainTable {
    pub fn new(metric: &ResistanceMetric, source: usize, max_len: usize) -> Self {
        let n = metric.len();
        let mut best = vec![vec![f64::INFINITY; n]];
        best[0][source] = 0.0;
        let mut pred = vec![vec![source; n]];
        for k in 1..=max_len {
            let prev = &best[k - 1];
            let mut row = vec![f64::INFINITY; n];
            let mut prow = vec![source; n];
            for v in 0..n {
                for u in 0..n {
                    if prev[u] >= row[v] {
                        continue;
                    }
                    let step = prev[u].max(metric.get(u, v));
                    if step < row[v] {
                        row[v] = step;
                        prow[v] = u;
                    }
                }
            }
            best.push(row);
            pred.push(prow);
        }
        Self { source, best, pred }
    }

    pub fn max_len(&self) -> usize {
        self.best.len() - 1
    }

    pub fn best_step(&self, target: usize, len: usize) -> f64 {
        self.best[len][target]
    }

    pub fn chain(&self, target: usize, len: usize) -> Vec<usize> {
        let mut chain = vec![target];
        let mut v = target;
        for k in (1..=len).rev() {
            v = self.pred[k][v];
            chain.push(v);
        }
        debug_assert_eq!(v, self.source);
        chain.reverse();
        chain
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainProbe {
    pub chain: Vec<usize>,
    pub step_resistances: Vec<f64>,
    /// `max_i R(x_{i-1}, x_i) * n / R(x, y)`.
    pub constant: f64,
}

pub fn chaining_probe(metric: &ResistanceMetric, x: usize, y: usize, n: usize) -> Result<ChainProbe> {
    if n == 0 {
        return Err(Error::ZeroChainLength);
    }
    for v in [x, y] {
        if v >= metric.len() {
            return Err(Error::VertexOutOfRange(v));
        }
    }
    let table = ChainTable::new(metric, x, n);
    Ok(probe_from_table(metric, &table, y, n))
}

pub(crate) fn probe_from_table(metric: &ResistanceMetric, table: &ChainTable, y: usize, n: usize) -> ChainProbe {
    let chain = table.chain(y, n);
    let step_resistances: Vec<f64> = chain.windows(2).map(|w| metric.get(w[0], w[1])).collect();
    let dist = metric.get(table.source, y);
    let worst = step_resistances.iter().copied().fold(0.0, f64::max);
    let constant = if dist > 0.0 { worst * n as f64 / dist } else { 0.0 };
    ChainProbe { chain, step_resistances, constant }
}

/// Network-level (CC) probe: worst chaining constant over sampled pairs and
/// every chain length the discretisation can resolve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainingReport {
    pub sources: Vec<usize>,
    pub pairs_checked: usize,
    pub max_len: usize,
    pub edge_scale: f64,
    pub max_constant: f64,
    pub worst_pair: (usize, usize, usize),
    pub threshold: f64,
    pub passed: bool,
}

/// Largest chaining constant accepted as "(CC) holds" at desk scale. Vertex
/// chains on a tree reach at most `1 + edge_scale * n / R <= 2` for the lengths probed.
pub const CHAINING_THRESHOLD: f64 = 2.0;

pub fn probe_chaining_condition(metric: &ResistanceMetric, max_sources: usize, len_cap: usize) -> ChainingReport {
    let n = metric.len();
    let stride = (n / max_sources.max(1)).max(1);
    let sources: Vec<usize> = (0..n).step_by(stride).take(max_sources.max(1)).collect();
    let edge_scale = metric.max_edge_resistance();
    let max_len = ((metric.diameter() / edge_scale).floor() as usize).clamp(1, len_cap.max(1));
    let mut pairs_checked = 0;
    let mut max_constant: f64 = 0.0;
    let mut worst_pair = (0, 0, 1);
    for &x in &sources {
        let table = ChainTable::new(metric, x, max_len);
        for y in 0..n {
            let dist = metric.get(x, y);
            if y == x || dist <= 0.0 {
                continue;
            }
            pairs_checked += 1;
            let resolvable = ((dist / edge_scale).floor() as usize).clamp(1, max_len);
            for len in 1..=resolvable {
                let c = table.best_step(y, len) * len as f64 / dist;
                if c > max_constant {
                    max_constant = c;
                    worst_pair = (x, y, len);
                }
            }
        }
    }
    ChainingReport {
        sources,
        pairs_checked,
        max_len,
        edge_scale,
        max_constant,
        worst_pair,
        threshold: CHAINING_THRESHOLD,
        passed: max_constant <= CHAINING_THRESHOLD + 1e-9,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> MeasuredNetwork {
        let edges = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        MeasuredNetwork::from_parts("path", vec![1.0; n], edges).unwrap()
    }

    fn triangle() -> MeasuredNetwork {
        MeasuredNetwork::from_parts("triangle", vec![1.0; 3], vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
            .unwrap()
    }

    fn star(k: usize) -> MeasuredNetwork {
        let edges = (1..=k).map(|i| (0, i, 1.0)).collect();
        MeasuredNetwork::from_parts("star", vec![1.0; k + 1], edges).unwrap()
    }

    /// Unit triangle, grounded at vertex 1 with vertex 0 held at 1: the free
    /// vertex sits at 1/2, the energy is 1 + 2 * (1/2)^2 = 3/2, so R = 2/3.
    #[test]
    fn effective_resistance_examples() {
        let single = MeasuredNetwork::from_parts("e", vec![1.0, 1.0], vec![(0, 1, 2.0)]).unwrap();
        assert!((effective_resistance(&single, &[0], &[1]).unwrap() - 0.5).abs() < 1e-14);
        assert!((effective_resistance(&path(4), &[0], &[3]).unwrap() - 3.0).abs() < 1e-12);
        assert!((effective_resistance(&triangle(), &[0], &[1]).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        assert!(matches!(effective_resistance(&triangle(), &[0, 1], &[1]), Err(Error::OverlappingSets(1))));
        assert!(matches!(effective_resistance(&triangle(), &[], &[1]), Err(Error::EmptySet)));
    }

    #[test]
    fn metric_examples() {
        let m = resistance_metric(&path(6)).unwrap();
        for x in 0..6 {
            for y in 0..6 {
                assert!((m.get(x, y) - (x as f64 - y as f64).abs()).abs() < 1e-12);
            }
        }
        let t = resistance_metric(&triangle()).unwrap();
        for (x, y) in [(0, 1), (1, 2), (0, 2)] {
            assert!((t.get(x, y) - 2.0 / 3.0).abs() < 1e-14);
        }
        assert_eq!(t.breakpoints(1e-9).len(), 1);
    }

    #[test]
    fn ball_examples() {
        let m = resistance_metric(&path(8)).unwrap();
        assert_eq!(resistance_ball(&m, 0, 2.5).unwrap().members, vec![0, 1, 2]);
        assert_eq!(resistance_ball(&m, 3, 100.0).unwrap().members.len(), 8);
        // strict inequality: vertex at distance exactly 2 is outside
        assert_eq!(resistance_ball(&m, 0, 2.0).unwrap().members, vec![0, 1]);
        let t = resistance_metric(&triangle()).unwrap();
        assert_eq!(resistance_ball(&t, 0, 0.7).unwrap().members, vec![0, 1, 2]);
        assert!(matches!(resistance_ball(&t, 0, 0.0), Err(Error::NonPositiveRadius(_))));
        assert!(matches!(resistance_ball(&t, 0, -1.0), Err(Error::NonPositiveRadius(_))));
    }

    #[test]
    fn ball_grows_along_graph_paths() {
        let net = MeasuredNetwork::from_parts(
            "chain",
            vec![1.0; 4],
            vec![(0, 1, 1.0), (1, 2, 100.0), (2, 3, 100.0)],
        )
        .unwrap();
        let m = resistance_metric(&net).unwrap();
        // R(0,1) = 1, R(0,2) = 1.01, R(0,3) = 1.02
        assert_eq!(resistance_ball(&m, 0, 1.015).unwrap().members, vec![0, 1, 2]);
        assert_eq!(resistance_ball(&m, 3, 0.015).unwrap().members, vec![2, 3]);
    }

    #[test]
    fn escape_resistance_examples() {
        let net = path(11);
        let m = resistance_metric(&net).unwrap();
        let ball = resistance_ball(&m, 0, 3.0).unwrap();
        assert_eq!(ball.members, vec![0, 1, 2]);
        assert!((escape_resistance(&net, &ball).unwrap() - 3.0).abs() < 1e-12);

        let k = 5;
        let s = star(k);
        let ms = resistance_metric(&s).unwrap();
        let ball = resistance_ball(&ms, 0, 1.0).unwrap();
        assert_eq!(ball.members, vec![0]);
        assert!((escape_resistance(&s, &ball).unwrap() - 1.0 / k as f64).abs() < 1e-14);

        let whole = resistance_ball(&ms, 0, 10.0).unwrap();
        assert!(matches!(escape_resistance(&s, &whole), Err(Error::NoComplement(0))));
    }

    /// All covers reachable by picking any uncovered member at each step.
    fn cover_size_range(m: &ResistanceMetric, members: &[usize], small: f64) -> (usize, usize) {
        let balls: Vec<Vec<usize>> =
            members.iter().map(|&c| resistance_ball(m, c, small).unwrap().members).collect();
        fn go(members: &[usize], balls: &[Vec<usize>], covered: u64, depth: usize, out: &mut (usize, usize)) {
            let mut any = false;
            for (i, &v) in members.iter().enumerate() {
                if covered & (1 << v) == 0 {
                    any = true;
                    let mut next = covered;
                    for &y in &balls[i] {
                        next |= 1 << y;
                    }
                    go(members, balls, next, depth + 1, out);
                }
            }
            if !any {
                out.0 = out.0.min(depth);
                out.1 = out.1.max(depth);
            }
        }
        let mut out = (usize::MAX, 0);
        let mut outside = 0u64;
        for v in 0..m.len() {
            if !members.contains(&v) {
                outside |= 1 << v;
            }
        }
        go(members, &balls, outside, 0, &mut out);
        out
    }

    #[test]
    fn greedy_cover_examples() {
        let m = resistance_metric(&path(12)).unwrap();
        let single = greedy_cover(&m, 0, 0.5, 0.5).unwrap();
        assert_eq!(single.centers, vec![0]);

        let cover = greedy_cover(&m, 0, 8.0, 0.5).unwrap();
        let ball = resistance_ball(&m, 0, 8.0).unwrap();
        let (lo, hi) = cover_size_range(&m, &ball.members, 4.0);
        assert!(lo <= cover.size && cover.size <= hi, "{lo} <= {} <= {hi}", cover.size);
        assert_eq!(cover.centers, vec![0, 4]);
        assert!(matches!(greedy_cover(&m, 0, 8.0, 0.6), Err(Error::BadShrinkFactor(_))));
        assert!(matches!(greedy_cover(&m, 0, 8.0, 0.0), Err(Error::BadShrinkFactor(_))));
    }

    #[test]
    fn chaining_probe_examples() {
        let m = resistance_metric(&path(9)).unwrap();
        let one = chaining_probe(&m, 0, 8, 1).unwrap();
        assert_eq!(one.chain, vec![0, 8]);
        assert!((one.constant - 1.0).abs() < 1e-12);

        let four = chaining_probe(&m, 0, 8, 4).unwrap();
        assert_eq!(four.chain.len(), 5);
        assert!(four.constant <= 1.0 + 1.0 * 4.0 / 8.0 + 1e-12);

        let t = resistance_metric(&triangle()).unwrap();
        let probe = chaining_probe(&t, 0, 1, 2).unwrap();
        // exhaustive middle vertex: every choice has a step of 2/3
        let brute = (0..3)
            .map(|mid| t.get(0, mid).max(t.get(mid, 1)))
            .fold(f64::INFINITY, f64::min);
        assert!((probe.constant - brute * 2.0 / t.get(0, 1)).abs() < 1e-12);
        assert!((probe.constant - 2.0).abs() < 1e-12);
        assert!(matches!(chaining_probe(&t, 0, 1, 0), Err(Error::ZeroChainLength)));
    }

    #[test]
    fn chaining_condition_holds_on_path() {
        let m = resistance_metric(&path(20)).unwrap();
        let report = probe_chaining_condition(&m, 5, 32);
        assert!(report.passed, "{report:?}");
        assert!(report.max_constant >= 1.0);
    }
}
