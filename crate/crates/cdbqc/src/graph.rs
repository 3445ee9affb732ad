//! Simple graphs with a total measurement order, cluster grids, and
//! odd-neighborhood computation.
//!
//! Vertices are labeled `1..=N`; the label order is the order in which the
//! corresponding qubits are measured. Graphs are immutable after construction
//! so every downstream consumer can assume a frozen substrate.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};

/// An undirected simple graph over vertices `1..=N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    // adjacency[v] is valid for v in 1..=N; slot 0 is unused.
    adjacency: Vec<BTreeSet<usize>>,
}

impl Graph {
    /// Build a graph from an edge list. Rejects self-loops, duplicate edges,
    /// and out-of-range endpoints.
    pub fn new(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut adjacency = vec![BTreeSet::new(); vertex_count + 1];
        for &(a, b) in edges {
            for v in [a, b] {
                if v == 0 || v > vertex_count {
                    return Err(Error::VertexOutOfRange {
                        vertex: v,
                        vertex_count,
                    });
                }
            }
            if a == b || adjacency[a].contains(&b) {
                return Err(Error::InvalidEdge { a, b });
            }
            adjacency[a].insert(b);
            adjacency[b].insert(a);
        }
        Ok(Graph {
            vertex_count,
            adjacency,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Vertices in measurement order.
    pub fn vertices(&self) -> RangeInclusive<usize> {
        1..=self.vertex_count
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        v >= 1 && v <= self.vertex_count
    }

    /// Edges as sorted `(low, high)` pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for v in self.vertices() {
            for &w in &self.adjacency[v] {
                if v < w {
                    out.push((v, w));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency[1..].iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.contains_vertex(a) && self.contains_vertex(b) && self.adjacency[a].contains(&b)
    }

    /// The neighborhood N(v).
    pub fn neighborhood(&self, v: usize) -> Result<&BTreeSet<usize>> {
        if !self.contains_vertex(v) {
            return Err(Error::VertexOutOfRange {
                vertex: v,
                vertex_count: self.vertex_count,
            });
        }
        Ok(&self.adjacency[v])
    }

    /// The odd neighborhood of a vertex set: all vertices with an odd number
    /// of neighbors inside `subset`.
    pub fn odd_neighborhood(&self, subset: &BTreeSet<usize>) -> Result<BTreeSet<usize>> {
        for &v in subset {
            if !self.contains_vertex(v) {
                return Err(Error::VertexOutOfRange {
                    vertex: v,
                    vertex_count: self.vertex_count,
                });
            }
        }
        let mut odd = BTreeSet::new();
        for v in self.vertices() {
            let hits = self.adjacency[v].intersection(subset).count();
            if hits % 2 == 1 {
                odd.insert(v);
            }
        }
        Ok(odd)
    }
}

/// Dimensions of an n x m cluster grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridSpec {
    rows: usize,
    cols: usize,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidGridDimensions { rows, cols });
        }
        Ok(GridSpec { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn vertex_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn transposed(&self) -> GridSpec {
        GridSpec {
            rows: self.cols,
            cols: self.rows,
        }
    }

    /// Label of the vertex at (row, col), both 1-based. Row-major: left to
    /// right within a row, rows top to bottom.
    pub fn vertex_at(&self, row: usize, col: usize) -> Option<usize> {
        if row == 0 || col == 0 || row > self.rows || col > self.cols {
            return None;
        }
        Some((row - 1) * self.cols + col)
    }

    /// (row, col) of a vertex label, both 1-based.
    pub fn position(&self, v: usize) -> Option<(usize, usize)> {
        if v == 0 || v > self.vertex_count() {
            return None;
        }
        Some(((v - 1) / self.cols + 1, (v - 1) % self.cols + 1))
    }

    /// The lattice neighbor to the right, if any.
    pub fn right_of(&self, v: usize) -> Option<usize> {
        let (row, col) = self.position(v)?;
        self.vertex_at(row, col + 1)
    }

    /// The lattice neighbor below, if any.
    pub fn down_of(&self, v: usize) -> Option<usize> {
        let (row, col) = self.position(v)?;
        self.vertex_at(row + 1, col)
    }
}

/// A graph with designated input and output vertex sets. The sets may
/// overlap; their sizes must match (unitary embeddings only).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenGraph {
    graph: Graph,
    inputs: BTreeSet<usize>,
    outputs: BTreeSet<usize>,
}

impl OpenGraph {
    pub fn new(graph: Graph, inputs: BTreeSet<usize>, outputs: BTreeSet<usize>) -> Result<Self> {
        for &v in inputs.iter().chain(outputs.iter()) {
            if !graph.contains_vertex(v) {
                return Err(Error::VertexOutOfRange {
                    vertex: v,
                    vertex_count: graph.vertex_count(),
                });
            }
        }
        if inputs.len() != outputs.len() {
            return Err(Error::InputOutputSizeMismatch {
                inputs: inputs.len(),
                outputs: outputs.len(),
            });
        }
        Ok(OpenGraph {
            graph,
            inputs,
            outputs,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn inputs(&self) -> &BTreeSet<usize> {
        &self.inputs
    }

    pub fn outputs(&self) -> &BTreeSet<usize> {
        &self.outputs
    }

    pub fn is_output(&self, v: usize) -> bool {
        self.outputs.contains(&v)
    }

    /// Non-output vertices in measurement order.
    pub fn non_outputs(&self) -> Vec<usize> {
        self.graph
            .vertices()
            .filter(|v| !self.outputs.contains(v))
            .collect()
    }

    /// Non-input vertices in measurement order.
    pub fn non_inputs(&self) -> Vec<usize> {
        self.graph
            .vertices()
            .filter(|v| !self.inputs.contains(v))
            .collect()
    }
}

/// Build the n x m cluster grid with row-major measurement order: the vertex
/// at (row, col) is labeled (row-1)*cols + col and joined to its horizontal
/// and vertical lattice neighbors.
pub fn build_cluster_grid(spec: &GridSpec) -> Graph {
    let mut edges = Vec::new();
    for v in 1..=spec.vertex_count() {
        if let Some(r) = spec.right_of(v) {
            edges.push((v, r));
        }
        if let Some(d) = spec.down_of(v) {
            edges.push((v, d));
        }
    }
    Graph::new(spec.vertex_count(), &edges).expect("grid edges are valid by construction")
}
