//! Cell graphs on `W_n` (or on restrictions `A . W_m`), their discrete
//! energies, and the averaging operators between levels.

use crate::geometry::{cell_square, CarpetSpec, LevelGeometry};
use crate::rational::{ratio_to_f64, Ratio};
use crate::scalar::{Real, Scalar};
use crate::word::{level_size, Word};
use crate::Error;
use std::fmt::Write as _;

/// Level-`n` adjacency graph, possibly restricted to a sub-collection of
/// words. Edges are stored once with `i < j`; there are no self-loops.
#[derive(Debug, Clone)]
pub struct CellGraph {
    pub level: u32,
    pub n_letters: u32,
    /// Explicit vertex words for restricted graphs, `None` for full levels.
    pub words: Option<Vec<Word>>,
    pub n_vertices: usize,
    pub edges: Vec<(u32, u32)>,
    adj_ptr: Vec<u32>,
    adj: Vec<u32>,
}

impl CellGraph {
    fn from_parts(
        level: u32,
        n_letters: u32,
        words: Option<Vec<Word>>,
        n_vertices: usize,
        edges: Vec<(u32, u32)>,
    ) -> CellGraph {
        let mut deg = vec![0u32; n_vertices];
        for &(a, b) in &edges {
            assert!(a < b, "edges stored with i < j");
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        let mut adj_ptr = vec![0u32; n_vertices + 1];
        for i in 0..n_vertices {
            adj_ptr[i + 1] = adj_ptr[i] + deg[i];
        }
        let mut cursor = adj_ptr.clone();
        let mut adj = vec![0u32; edges.len() * 2];
        for &(a, b) in &edges {
            adj[cursor[a as usize] as usize] = b;
            cursor[a as usize] += 1;
            adj[cursor[b as usize] as usize] = a;
            cursor[b as usize] += 1;
        }
        CellGraph { level, n_letters, words, n_vertices, edges, adj_ptr, adj }
    }

    /// Arbitrary graph from an edge list (solver tests, random graphs).
    pub fn from_edges(n_vertices: usize, mut edges: Vec<(u32, u32)>) -> CellGraph {
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
            assert!(e.0 != e.1, "no self-loops");
        }
        edges.sort_unstable();
        edges.dedup();
        CellGraph::from_parts(0, 0, None, n_vertices, edges)
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[self.adj_ptr[v] as usize..self.adj_ptr[v + 1] as usize]
    }

    pub fn degree(&self, v: usize) -> usize {
        (self.adj_ptr[v + 1] - self.adj_ptr[v]) as usize
    }

    pub fn word_at(&self, idx: usize) -> Word {
        match &self.words {
            Some(ws) => ws[idx].clone(),
            None => Word::from_index(idx, self.level, self.n_letters),
        }
    }

    pub fn index_of(&self, w: &Word) -> Option<usize> {
        match &self.words {
            Some(ws) => ws.binary_search(w).ok(),
            None => {
                if w.level() == self.level {
                    Some(w.index(self.n_letters))
                } else {
                    None
                }
            }
        }
    }

    /// Vertex indices whose word starts with the given prefix. For full
    /// levels this is a contiguous block.
    pub fn block_of(&self, prefix: &Word) -> Vec<u32> {
        match &self.words {
            None => {
                let m = self.level - prefix.level();
                let span = level_size(self.n_letters, m).unwrap();
                let start = prefix.index(self.n_letters) * span;
                (start as u32..(start + span) as u32).collect()
            }
            Some(ws) => ws
                .iter()
                .enumerate()
                .filter(|(_, w)| w.letters().starts_with(prefix.letters()))
                .map(|(i, _)| i as u32)
                .collect(),
        }
    }

    /// Connected components; returns (component id per vertex, count).
    pub fn components(&self) -> (Vec<u32>, usize) {
        let mut comp = vec![u32::MAX; self.n_vertices];
        let mut count = 0usize;
        let mut stack = Vec::new();
        for s in 0..self.n_vertices {
            if comp[s] != u32::MAX {
                continue;
            }
            comp[s] = count as u32;
            stack.push(s as u32);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u as usize) {
                    if comp[v as usize] == u32::MAX {
                        comp[v as usize] = count as u32;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    /// Edge-list export: header `n_vertices n_edges`, then one `i j` per line.
    pub fn export_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n_vertices, self.edges.len());
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }
}

/// Builds the exact adjacency graph of level `n`, optionally restricted to a
/// word set (edges to the complement are dropped). Neighbor candidates come
/// from spatial hashing of exact corners; every candidate is confirmed by the
/// exact intersection predicate.
pub fn build_graph(
    spec: &CarpetSpec,
    n: u32,
    restriction: Option<&[Word]>,
) -> Result<CellGraph, Error> {
    assert!(n >= 1, "cell graphs start at level 1");
    let geom = match restriction {
        None => LevelGeometry::build(spec, n)?,
        Some(words) => {
            let mut sorted = words.to_vec();
            sorted.sort();
            sorted.dedup();
            assert!(sorted.iter().all(|w| w.level() == n), "restriction words must be level n");
            if sorted.len() > crate::geometry::MAX_CELLS {
                return Err(Error::LevelTooLarge { level: n });
            }
            LevelGeometry::of_words(spec, &sorted)
        }
    };
    let edges = geom.adjacency();
    Ok(CellGraph::from_parts(
        n,
        spec.n_maps(),
        geom.words.clone(),
        geom.len(),
        edges,
    ))
}

/// Graph on the blowup `prefixes . W_m`.
pub fn build_blowup_graph(
    spec: &CarpetSpec,
    prefixes: &[Word],
    m: u32,
) -> Result<CellGraph, Error> {
    let mut sorted = prefixes.to_vec();
    sorted.sort();
    sorted.dedup();
    let geom = LevelGeometry::build_blowup(spec, &sorted, m)?;
    let edges = geom.adjacency();
    Ok(CellGraph::from_parts(
        geom.level,
        spec.n_maps(),
        geom.words.clone(),
        geom.len(),
        edges,
    ))
}

/// Real-valued function on the vertices of a cell graph.
#[derive(Debug, Clone)]
pub struct CellFunction<S: Scalar = Real> {
    pub level: u32,
    pub values: Vec<S>,
}

impl<S: Scalar> CellFunction<S> {
    pub fn new(level: u32, values: Vec<S>) -> Self {
        CellFunction { level, values }
    }

    pub fn constant(level: u32, n: usize, c: S) -> Self {
        CellFunction { level, values: vec![c; n] }
    }

    pub fn mean(&self) -> S {
        let n = S::from_usize(self.values.len()).unwrap();
        self.values.iter().copied().sum::<S>() / n
    }
}

/// The graph energy `sum over edges (f(w)-f(w'))(g(w)-g(w'))`, summed in
/// fixed edge order.
pub fn energy_bilinear<S: Scalar>(graph: &CellGraph, f: &[S], g: &[S]) -> S {
    assert_eq!(f.len(), graph.n_vertices, "function/graph mismatch");
    assert_eq!(g.len(), graph.n_vertices, "function/graph mismatch");
    let mut acc = S::zero();
    for &(a, b) in &graph.edges {
        let df = f[a as usize] - f[b as usize];
        let dg = g[a as usize] - g[b as usize];
        acc += df * dg;
    }
    acc
}

pub fn energy<S: Scalar>(graph: &CellGraph, f: &[S]) -> S {
    energy_bilinear(graph, f, f)
}

/// Input classes for the cell-averaging projection.
pub enum Projectable {
    /// Values on level-`m` cells, copied to all descendants.
    PiecewiseConstant { level: u32, values: Vec<Real> },
    /// `a*x1 + b*x2 + c`; symmetric measure forces cell-center evaluation.
    Affine { a: Real, b: Real, c: Real },
}

/// Exact cell averages of the supported function classes at level `n`.
pub fn project(spec: &CarpetSpec, u: &Projectable, n: u32) -> Result<CellFunction, Error> {
    let size = level_size(spec.n_maps(), n)
        .filter(|&c| c <= crate::geometry::MAX_CELLS)
        .ok_or(Error::LevelTooLarge { level: n })?;
    match u {
        Projectable::PiecewiseConstant { level, values } => {
            if *level > n {
                return Err(Error::Unsupported(
                    "piecewise level must not exceed the target level".into(),
                ));
            }
            let span = level_size(spec.n_maps(), n - level).unwrap();
            let expect = level_size(spec.n_maps(), *level).unwrap();
            assert_eq!(values.len(), expect, "value count must match the level");
            let mut out = Vec::with_capacity(size);
            for v in values {
                out.extend(std::iter::repeat(*v).take(span));
            }
            Ok(CellFunction::new(n, out))
        }
        Projectable::Affine { a, b, c } => {
            let geom = LevelGeometry::build(spec, n)?;
            let values = (0..geom.len())
                .map(|i| {
                    let center = geom.square(i).center();
                    a * ratio_to_f64(&center.x) + b * ratio_to_f64(&center.y) + c
                })
                .collect();
            Ok(CellFunction::new(n, values))
        }
    }
}

/// Cell average of an affine function over one cell (exact center rule).
pub fn project_affine_on_word(spec: &CarpetSpec, a: Real, b: Real, c: Real, w: &Word) -> Real {
    let center = cell_square(spec, w).center();
    a * ratio_to_f64(&center.x) + b * ratio_to_f64(&center.y) + c
}

/// Block means: level `n+m` function to level `n`, `f'(w) = mean over w.W_m`.
pub fn coarsen(
    spec: &CarpetSpec,
    f: &CellFunction,
    target: u32,
) -> Result<CellFunction, Error> {
    if f.level < target {
        return Err(Error::LevelMismatch { left: f.level, right: target });
    }
    let span = level_size(spec.n_maps(), f.level - target)
        .ok_or(Error::LevelTooLarge { level: f.level })?;
    let n_out = f.values.len() / span;
    assert_eq!(n_out * span, f.values.len());
    let inv = 1.0 / span as Real;
    let values = (0..n_out)
        .map(|i| {
            let mut acc = 0.0;
            for v in &f.values[i * span..(i + 1) * span] {
                acc += *v;
            }
            acc * inv
        })
        .collect();
    Ok(CellFunction::new(target, values))
}

/// CSV export `word,value` in canonical vertex order.
pub fn export_function_csv(graph: &CellGraph, f: &CellFunction) -> String {
    let mut out = String::from("word,value\n");
    for (i, v) in f.values.iter().enumerate() {
        let _ = writeln!(out, "{},{}", graph.word_at(i), crate::io::fmt_float(*v));
    }
    out
}

/// Exact x-offset index of a bottom-row word (letters in `1..=k`):
/// the cell sits at horizontal position `offset / k^n`.
pub fn bottom_row_offset(k: u32, w: &Word) -> u64 {
    let mut acc = 0u64;
    for &l in w.letters() {
        debug_assert!(l >= 1 && (l as u32) <= k, "not a bottom-row word");
        acc = acc * k as u64 + (l as u64 - 1);
    }
    acc
}

/// Mean value of `f` over a vertex subset.
pub fn subset_mean(f: &[Real], subset: &[u32]) -> Real {
    let mut acc = 0.0;
    for &i in subset {
        acc += f[i as usize];
    }
    acc / subset.len() as Real
}

/// Sum of squared deviations from the mean.
pub fn variance_sum(f: &[Real]) -> Real {
    let mean = f.iter().sum::<Real>() / f.len() as Real;
    f.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Exact relation between `Ratio` squares for test use.
pub fn square_side(spec: &CarpetSpec, n: u32) -> Ratio {
    let mut s = Ratio::from_integer(1.into());
    for _ in 0..n {
        s = s / Ratio::from_integer((spec.k as i64).into());
    }
    s
}
