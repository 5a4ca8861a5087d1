//! Finite measured electrical networks.
//!
//! A [`MeasuredNetwork`] is the discrete stand-in for a measure-metric space
//! carrying a resistance form: vertices carry positive masses, edges carry
//! positive conductances, and the Dirichlet energy of a vertex function is
//! `sum over edges of c(u,v) * (f(u) - f(v))^2`.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One real value per vertex, indexed like the network's vertices.
pub type VertexFunction = Vec<f64>;

/// Relative residual the grounded solver refines towards.
pub const SOLVE_TOLERANCE: f64 = 1e-12;
const MAX_REFINEMENT_STEPS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexSpec {
    pub id: String,
    pub measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub u: String,
    pub v: String,
    pub conductance: f64,
}

/// On-disk network description. Internal indices follow file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub vertices: Vec<VertexSpec>,
    pub edges: Vec<EdgeSpec>,
}

impl NetworkSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub conductance: f64,
}

/// Validated, immutable network. Vertex `i` is the `i`-th vertex of the spec.
#[derive(Debug, Clone)]
pub struct MeasuredNetwork {
    name: String,
    ids: Vec<String>,
    measure: Vec<f64>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

/// Validate a network description.
pub fn build_network(spec: &NetworkSpec) -> Result<MeasuredNetwork> {
    let mut index = HashMap::with_capacity(spec.vertices.len());
    for (i, v) in spec.vertices.iter().enumerate() {
        if index.insert(v.id.clone(), i).is_some() {
            return Err(Error::DuplicateVertex(v.id.clone()));
        }
    }
    let lookup = |id: &str| index.get(id).copied().ok_or_else(|| Error::UnknownVertex(id.to_string()));
    let mut edges = Vec::with_capacity(spec.edges.len());
    for e in &spec.edges {
        edges.push((lookup(&e.u)?, lookup(&e.v)?, e.conductance));
    }
    MeasuredNetwork::with_ids(
        spec.name.clone(),
        spec.vertices.iter().map(|v| v.id.clone()).collect(),
        spec.vertices.iter().map(|v| v.measure).collect(),
        edges,
    )
}

impl MeasuredNetwork {
    /// Build from index-based parts; vertex ids are the decimal indices.
    pub fn from_parts(
        name: impl Into<String>,
        measure: Vec<f64>,
        edges: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        let ids = (0..measure.len()).map(|i| i.to_string()).collect();
        Self::with_ids(name.into(), ids, measure, edges)
    }

    pub fn with_ids(
        name: String,
        ids: Vec<String>,
        measure: Vec<f64>,
        edge_list: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        let n = measure.len();
        if n == 0 {
            return Err(Error::EmptyNetwork);
        }
        debug_assert_eq!(ids.len(), n);
        for (i, &m) in measure.iter().enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::NonPositiveMeasure { id: ids[i].clone(), value: m });
            }
        }
        let mut seen = BTreeMap::new();
        let mut adjacency = vec![Vec::new(); n];
        let mut edges = Vec::with_capacity(edge_list.len());
        for (u, v, c) in edge_list {
            if u >= n {
                return Err(Error::VertexOutOfRange(u));
            }
            if v >= n {
                return Err(Error::VertexOutOfRange(v));
            }
            if u == v {
                return Err(Error::SelfLoop(ids[u].clone()));
            }
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::NonPositiveConductance {
                    u: ids[u].clone(),
                    v: ids[v].clone(),
                    value: c,
                });
            }
            if seen.insert((u.min(v), u.max(v)), ()).is_some() {
                return Err(Error::DuplicateEdge(ids[u].clone(), ids[v].clone()));
            }
            adjacency[u].push((v, c));
            adjacency[v].push((u, c));
            edges.push(Edge { u, v, conductance: c });
        }
        for nbrs in &mut adjacency {
            nbrs.sort_by_key(|&(w, _)| w);
        }

        let mut reached = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        reached[0] = true;
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &adjacency[x] {
                if !reached[y] {
                    reached[y] = true;
                    queue.push_back(y);
                }
            }
        }
        if let Some(missing) = reached.iter().position(|&r| !r) {
            return Err(Error::Disconnected(ids[missing].clone(), ids[0].clone()));
        }

        Ok(Self { name, ids, measure, edges, adjacency })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_mass(&self) -> f64 {
        self.measure.iter().sum()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours of `x` with the connecting conductance, sorted by index.
    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adjacency[x]
    }

    pub fn degree_weight(&self, x: usize) -> f64 {
        self.adjacency[x].iter().map(|&(_, c)| c).sum()
    }

    pub fn mass_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&x| self.measure[x]).sum()
    }

    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            name: self.name.clone(),
            vertices: self
                .ids
                .iter()
                .zip(&self.measure)
                .map(|(id, &m)| VertexSpec { id: id.clone(), measure: m })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    u: self.ids[e.u].clone(),
                    v: self.ids[e.v].clone(),
                    conductance: e.conductance,
                })
                .collect(),
        }
    }

    /// Copy of the network with one edge's conductance replaced.
    pub fn with_conductance(&self, edge: usize, conductance: f64) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| (e.u, e.v, if i == edge { conductance } else { e.conductance }))
            .collect();
        Self::with_ids(self.name.clone(), self.ids.clone(), self.measure.clone(), edges)
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: f.len() });
        }
        Ok(())
    }

    /// Symmetric bilinear form `E(f, g)`.
    pub fn dirichlet_form(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        self.check_len(g)?;
        Ok(self
            .edges
            .iter()
            .map(|e| e.conductance * (f[e.u] - f[e.v]) * (g[e.u] - g[e.v]))
            .sum())
    }

    pub fn dirichlet_energy(&self, f: &[f64]) -> Result<f64> {
        self.dirichlet_form(f, f)
    }

    /// Dense conductance Laplacian `D - C`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut lap = DMatrix::zeros(n, n);
        for e in &self.edges {
            lap[(e.u, e.u)] += e.conductance;
            lap[(e.v, e.v)] += e.conductance;
            lap[(e.u, e.v)] -= e.conductance;
            lap[(e.v, e.u)] -= e.conductance;
        }
        lap
    }

    /// `(D - C) f` evaluated sparsely.
    pub fn apply_laplacian(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|x| self.adjacency[x].iter().map(|&(y, c)| c * (f[x] - f[y])).sum())
            .collect()
    }

    /// Generator `(Lf)(x) = mu(x)^-1 sum_y c(x,y) (f(y) - f(x))`.
    pub fn apply_generator(&self, f: &[f64]) -> Vec<f64> {
        self.apply_laplacian(f)
            .into_iter()
            .zip(&self.measure)
            .map(|(lf, m)| -lf / m)
            .collect()
    }

    /// Solve `-L u = source` off the boundary with `u` prescribed on it.
    pub fn solve_grounded(
        &self,
        boundary: &BTreeMap<usize, f64>,
        source: &[f64],
    ) -> Result<VertexFunction> {
        let solver = GroundedSolver::new(self, boundary.keys().copied())?;
        solver.solve(boundary, source)
    }
}

/// Cholesky factorisation of the Laplacian restricted to the complement of a
/// fixed boundary set; reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct GroundedSolver<'a> {
    net: &'a MeasuredNetwork,
    interior: Vec<usize>,
    slot: Vec<Option<usize>>,
    factor: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl<'a> GroundedSolver<'a> {
    pub fn new(net: &'a MeasuredNetwork, boundary: impl IntoIterator<Item = usize>) -> Result<Self> {
        let n = net.len();
        let mut on_boundary = vec![false; n];
        let mut any = false;
        for b in boundary {
            if b >= n {
                return Err(Error::VertexOutOfRange(b));
            }
            on_boundary[b] = true;
            any = true;
        }
        if !any {
            return Err(Error::EmptyBoundary);
        }
        let interior: Vec<usize> = (0..n).filter(|&x| !on_boundary[x]).collect();
        let mut slot = vec![None; n];
        for (k, &x) in interior.iter().enumerate() {
            slot[x] = Some(k);
        }
        let factor = if interior.is_empty() {
            None
        } else {
            let m = interior.len();
            let mut a = DMatrix::zeros(m, m);
            for (k, &x) in interior.iter().enumerate() {
                a[(k, k)] = net.degree_weight(x);
                for &(y, c) in net.neighbors(x) {
                    if let Some(j) = slot[y] {
                        a[(k, j)] -= c;
                    }
                }
            }
            // Positive definite whenever the boundary is non-empty on a connected network.
            let chol = nalgebra::Cholesky::new(a)
                .ok_or_else(|| Error::Solver("grounded Laplacian is not positive definite".into()))?;
            Some(chol)
        };
        Ok(Self { net, interior, slot, factor })
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn factor(&self) -> Option<&nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        self.factor.as_ref()
    }

    /// `boundary` must assign a value to every boundary vertex; `source` is a
    /// vertex function whose boundary entries are ignored.
    pub fn solve(&self, boundary: &BTreeMap<usize, f64>, source: &[f64]) -> Result<VertexFunction> {
        self.net.check_len(source)?;
        let n = self.net.len();
        let mut u = vec![0.0; n];
        for x in 0..n {
            if self.slot[x].is_none() {
                u[x] = *boundary.get(&x).ok_or(Error::VertexOutOfRange(x))?;
            }
        }
        let Some(factor) = &self.factor else {
            return Ok(u);
        };
        let m = self.interior.len();
        let mut rhs = DVector::zeros(m);
        for (k, &x) in self.interior.iter().enumerate() {
            let mut b = self.net.measure[x] * source[x];
            for &(y, c) in self.net.neighbors(x) {
                if self.slot[y].is_none() {
                    b += c * u[y];
                }
            }
            rhs[k] = b;
        }
        let scale = rhs.amax();
        if scale == 0.0 {
            return Ok(u);
        }
        let mut sol = factor.solve(&rhs);
        for _ in 0..MAX_REFINEMENT_STEPS {
            let resid = &rhs - self.apply_interior(&sol);
            if resid.amax() <= SOLVE_TOLERANCE * scale {
                break;
            }
            sol += factor.solve(&resid);
        }
        for (k, &x) in self.interior.iter().enumerate() {
            u[x] = sol[k];
        }
        Ok(u)
    }

    fn apply_interior(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            v.len(),
            self.interior.iter().enumerate().map(|(k, &x)| {
                let mut acc = self.net.degree_weight(x) * v[k];
                for &(y, c) in self.net.neighbors(x) {
                    if let Some(j) = self.slot[y] {
                        acc -= c * v[j];
                    }
                }
                acc
            }),
        )
    }
}
