//! Geodesic metric surrogate, resistance metric sampling, exponent-ratio
//! scans, equicontinuity moduli, and the k = 7 sliding carpet family.

use crate::geometry::{CarpetSpec, LevelGeometry, Similarity};
use crate::graph::{build_graph, CellGraph};
use crate::poincare::cross_resistance_on;
use crate::rational::{ratio, Point, Ratio};
use crate::scalar::Real;
use crate::solver::{effective_resistance, SolverConfig, SparseForm};
use crate::symmetry::ALL_SYMMETRIES;
use crate::Error;
use num::BigInt;
use num_traits::ToPrimitive;
use rand::prelude::*;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

/// Vertices are square corners and k-adic edge subdivision points of all
/// level-`m` cells; edges connect vertices of a common square (ring segments,
/// corner chords, corner-to-subdivision spokes). Path lengths always dominate
/// the Euclidean distance; `error_bound = 4 k^-m` records the resolution of
/// the surrogate.
pub struct GeodesicMesh {
    pub level: u32,
    pub k: u32,
    pub error_bound: Real,
    pub points: Vec<(Real, Real)>,
    adj_ptr: Vec<u32>,
    adj_to: Vec<u32>,
    adj_w: Vec<Real>,
    /// Vertex ids of each cell's boundary ring.
    pub square_verts: Vec<Vec<u32>>,
    /// Smallest cell index owning each vertex.
    pub vertex_cell: Vec<u32>,
    geom: LevelGeometry,
}

impl GeodesicMesh {
    pub fn build(spec: &CarpetSpec, m: u32) -> Result<GeodesicMesh, Error> {
        let geom = LevelGeometry::build(spec, m)?;
        let k = spec.k as usize;
        // vertex coordinates in units of den * k (edge subdivision step =
        // side_units in those units)
        let den_fine = &geom.den * BigInt::from(spec.k);
        let denf = den_fine.to_f64().expect("denominator range");
        let mut ids: HashMap<(BigInt, BigInt), u32> = HashMap::new();
        let mut points: Vec<(Real, Real)> = Vec::new();
        let mut vertex_cell: Vec<u32> = Vec::new();
        let mut square_verts: Vec<Vec<u32>> = Vec::with_capacity(geom.len());
        let mut edge_set: HashSet<(u32, u32)> = HashSet::new();

        for ci in 0..geom.len() {
            let c = &geom.cells[ci];
            let x0 = &c.corner.0 * BigInt::from(spec.k);
            let y0 = &c.corner.1 * BigInt::from(spec.k);
            let step = geom.side_units.clone();
            // ring positions counterclockwise from the lower-left corner
            let mut ring: Vec<(BigInt, BigInt)> = Vec::with_capacity(4 * k);
            for j in 0..k {
                ring.push((&x0 + &step * BigInt::from(j), y0.clone()));
            }
            let xk = &x0 + &step * BigInt::from(k as u32);
            for j in 0..k {
                ring.push((xk.clone(), &y0 + &step * BigInt::from(j)));
            }
            let yk = &y0 + &step * BigInt::from(k as u32);
            for j in 0..k {
                ring.push((&xk - &step * BigInt::from(j), yk.clone()));
            }
            for j in 0..k {
                ring.push((x0.clone(), &yk - &step * BigInt::from(j)));
            }
            let vids: Vec<u32> = ring
                .iter()
                .map(|key| match ids.get(key) {
                    Some(&v) => {
                        if vertex_cell[v as usize] > ci as u32 {
                            vertex_cell[v as usize] = ci as u32;
                        }
                        v
                    }
                    None => {
                        let v = points.len() as u32;
                        ids.insert(key.clone(), v);
                        points.push((
                            key.0.to_f64().unwrap() / denf,
                            key.1.to_f64().unwrap() / denf,
                        ));
                        vertex_cell.push(ci as u32);
                        v
                    }
                })
                .collect();
            let nv = vids.len();
            let mut push_edge = |a: u32, b: u32| {
                if a != b {
                    edge_set.insert((a.min(b), a.max(b)));
                }
            };
            for j in 0..nv {
                push_edge(vids[j], vids[(j + 1) % nv]);
            }
            let corners = [vids[0], vids[k], vids[2 * k], vids[3 * k]];
            for a in 0..4 {
                for b in a + 1..4 {
                    push_edge(corners[a], corners[b]);
                }
                for (j, &v) in vids.iter().enumerate() {
                    if j % k != 0 {
                        push_edge(corners[a], v);
                    }
                }
            }
            square_verts.push(vids);
        }

        // zipper shared segments: cells that touch along a partial edge
        // need not have coincident subdivision points, but the carpet
        // connects anywhere along the overlap, so link consecutive vertices
        // lying on each shared segment
        {
            let mut vertex_keys: Vec<(BigInt, BigInt)> = vec![(BigInt::from(0), BigInt::from(0)); points.len()];
            for (k2, &v) in &ids {
                vertex_keys[v as usize] = k2.clone();
            }
            for (i, j) in geom.adjacency() {
                let kind = geom.intersect(i as usize, j as usize);
                let (pa, pb) = match &kind {
                    crate::geometry::IntersectKind::Segment { a, b, .. } => (a.clone(), b.clone()),
                    _ => continue,
                };
                // segment endpoints in fine units
                let ax = crate::rational::ratio_in_units(&pa.x, &den_fine);
                let ay = crate::rational::ratio_in_units(&pa.y, &den_fine);
                let bx = crate::rational::ratio_in_units(&pb.x, &den_fine);
                let by = crate::rational::ratio_in_units(&pb.y, &den_fine);
                let horizontal = ay == by;
                let mut line: Vec<u32> = Vec::new();
                for &ci in &[i as usize, j as usize] {
                    for &v in &square_verts[ci] {
                        let kxy = &vertex_keys[v as usize];
                        let on = if horizontal {
                            kxy.1 == ay && kxy.0 >= ax && kxy.0 <= bx
                        } else {
                            kxy.0 == ax && kxy.1 >= ay && kxy.1 <= by
                        };
                        if on {
                            line.push(v);
                        }
                    }
                }
                line.sort_by(|&p, &q| {
                    let kp = &vertex_keys[p as usize];
                    let kq = &vertex_keys[q as usize];
                    if horizontal { kp.0.cmp(&kq.0) } else { kp.1.cmp(&kq.1) }
                });
                line.dedup();
                for w in line.windows(2) {
                    if w[0] != w[1] {
                        edge_set.insert((w[0].min(w[1]), w[0].max(w[1])));
                    }
                }
            }
        }

        let n = points.len();
        let mut deg = vec![0u32; n];
        for &(a, b) in &edge_set {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        let mut adj_ptr = vec![0u32; n + 1];
        for i in 0..n {
            adj_ptr[i + 1] = adj_ptr[i] + deg[i];
        }
        let mut cursor = adj_ptr.clone();
        let mut adj_to = vec![0u32; edge_set.len() * 2];
        let mut adj_w = vec![0.0; edge_set.len() * 2];
        let mut edges: Vec<(u32, u32)> = edge_set.into_iter().collect();
        edges.sort_unstable();
        for (a, b) in edges {
            let w = {
                let (ax, ay) = points[a as usize];
                let (bx, by) = points[b as usize];
                ((ax - bx) * (ax - bx) + (ay - by) * (ay - by)).sqrt()
            };
            adj_to[cursor[a as usize] as usize] = b;
            adj_w[cursor[a as usize] as usize] = w;
            cursor[a as usize] += 1;
            adj_to[cursor[b as usize] as usize] = a;
            adj_w[cursor[b as usize] as usize] = w;
            cursor[b as usize] += 1;
        }
        Ok(GeodesicMesh {
            level: m,
            k: spec.k,
            error_bound: 4.0 * (spec.k as Real).powi(-(m as i32)),
            points,
            adj_ptr,
            adj_to,
            adj_w,
            square_verts,
            vertex_cell,
            geom,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn n_edges(&self) -> usize {
        self.adj_to.len() / 2
    }

    /// Cells whose closed square contains the point.
    pub fn locate_cells(&self, p: &Point) -> Vec<usize> {
        (0..self.geom.len())
            .filter(|&i| self.geom.square(i).contains_point(p))
            .collect()
    }

    fn neighbors(&self, v: usize) -> impl Iterator<Item = (u32, Real)> + '_ {
        (self.adj_ptr[v] as usize..self.adj_ptr[v + 1] as usize)
            .map(move |i| (self.adj_to[i], self.adj_w[i]))
    }
}

/// Deterministic float ordering for the Dijkstra heap.
#[derive(PartialEq)]
struct HeapKey(Real, u32);
impl Eq for HeapKey {}
impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Reusable Dijkstra scratch with O(1) reset. Only distances of settled
/// (popped) vertices are exposed; tentative labels stay internal.
pub struct DijkstraScratch {
    dist: Vec<Real>,
    stamp: Vec<u32>,
    settled: Vec<u32>,
    round: u32,
}

impl DijkstraScratch {
    pub fn new(n: usize) -> Self {
        DijkstraScratch { dist: vec![0.0; n], stamp: vec![0; n], settled: vec![0; n], round: 0 }
    }

    fn get(&self, v: usize) -> Option<Real> {
        (self.stamp[v] == self.round).then(|| self.dist[v])
    }

    fn set(&mut self, v: usize, d: Real) {
        self.stamp[v] = self.round;
        self.dist[v] = d;
    }

    /// Runs Dijkstra from seeded sources. Stops once all `targets` settle
    /// (if given) or after `budget` pops (if given). Returns whether all
    /// targets settled.
    pub fn run(
        &mut self,
        mesh: &GeodesicMesh,
        sources: &[(u32, Real)],
        targets: Option<&[u32]>,
        budget: Option<usize>,
    ) -> bool {
        self.round += 1;
        let mut heap: BinaryHeap<Reverse<HeapKey>> = BinaryHeap::new();
        for &(s, d0) in sources {
            match self.get(s as usize) {
                Some(d) if d <= d0 => {}
                _ => {
                    self.set(s as usize, d0);
                    heap.push(Reverse(HeapKey(d0, s)));
                }
            }
        }
        let mut remaining: Option<HashSet<u32>> = targets.map(|t| t.iter().copied().collect());
        let mut pops = 0usize;
        while let Some(Reverse(HeapKey(d, u))) = heap.pop() {
            if self.get(u as usize) != Some(d) || self.settled[u as usize] == self.round {
                continue;
            }
            self.settled[u as usize] = self.round;
            pops += 1;
            if let Some(rem) = remaining.as_mut() {
                rem.remove(&u);
                if rem.is_empty() {
                    return true;
                }
            }
            if let Some(b) = budget {
                if pops >= b {
                    return remaining.as_ref().map_or(true, |r| r.is_empty());
                }
            }
            for (v, w) in mesh.neighbors(u as usize) {
                let nd = d + w;
                let better = match self.get(v as usize) {
                    None => true,
                    Some(old) => nd < old,
                };
                if better {
                    self.set(v as usize, nd);
                    heap.push(Reverse(HeapKey(nd, v)));
                }
            }
        }
        remaining.as_ref().map_or(true, |r| r.is_empty())
    }

    /// Exact distance of a settled vertex.
    pub fn distance(&self, v: u32) -> Option<Real> {
        (self.settled[v as usize] == self.round)
            .then(|| self.dist[v as usize])
    }
}

/// Shortest mesh path between two exact points of the square union.
/// Returns the distance and the mesh resolution bound.
pub fn geodesic_distance(
    mesh: &GeodesicMesh,
    x: &Point,
    y: &Point,
) -> Result<(Real, Real), Error> {
    let cx = mesh.locate_cells(x);
    let cy = mesh.locate_cells(y);
    if cx.is_empty() || cy.is_empty() {
        return Err(Error::OutOfRange("point outside the level square union".into()));
    }
    if x == y {
        return Ok((0.0, mesh.error_bound));
    }
    let (xf, yf) = x.to_f64();
    let (xg, yg) = y.to_f64();
    // same closed square: the straight chord is a mesh-admissible move
    let mut best_direct = Real::INFINITY;
    if cx.iter().any(|c| cy.contains(c)) {
        best_direct = ((xf - xg) * (xf - xg) + (yf - yg) * (yf - yg)).sqrt();
    }
    let sources: Vec<(u32, Real)> = cx
        .iter()
        .flat_map(|&c| mesh.square_verts[c].iter().copied())
        .map(|v| {
            let (px, py) = mesh.points[v as usize];
            (v, ((px - xf) * (px - xf) + (py - yf) * (py - yf)).sqrt())
        })
        .collect();
    let targets: Vec<u32> = cy
        .iter()
        .flat_map(|&c| mesh.square_verts[c].iter().copied())
        .collect();
    let mut scratch = DijkstraScratch::new(mesh.n_vertices());
    scratch.run(mesh, &sources, Some(&targets), None);
    let mut best = best_direct;
    for &t in &targets {
        if let Some(d) = scratch.distance(t) {
            let (px, py) = mesh.points[t as usize];
            let tail = ((px - xg) * (px - xg) + (py - yg) * (py - yg)).sqrt();
            best = best.min(d + tail);
        }
    }
    if !best.is_finite() {
        return Err(Error::Disconnected);
    }
    Ok((best, mesh.error_bound))
}

#[derive(Debug, Clone)]
pub struct ModulusReport {
    pub delta: Real,
    pub value: Real,
    pub pairs_seen: usize,
    pub hard_sources: usize,
    pub promoted: usize,
    /// The maximum came from an exact shortest-path run.
    pub confirmed: bool,
}

/// Max mesh distance over vertex pairs at Euclidean distance below `delta`.
///
/// Locally connected pairs settle with budgeted searches; sources whose
/// targets stay unsettled (straddles of narrow gaps) are grouped spatially,
/// one full run per group representative supplies exact distances, and the
/// top candidates are re-confirmed with exact runs from their own sources.
pub fn equicontinuity_modulus(mesh: &GeodesicMesh, delta: Real) -> ModulusReport {
    // pairs are detectable down to the vertex spacing k^-(m+1)
    let spacing = mesh.error_bound / mesh.k as Real;
    assert!(delta > spacing, "delta must exceed the mesh vertex spacing");
    let n = mesh.n_vertices();
    let cell = delta;
    let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    for (i, &(x, y)) in mesh.points.iter().enumerate() {
        buckets
            .entry(((x / cell).floor() as i64, (y / cell).floor() as i64))
            .or_default()
            .push(i as u32);
    }
    let near_of = |u: u32, ordered: bool| -> Vec<u32> {
        let (x, y) = mesh.points[u as usize];
        let (bx, by) = ((x / cell).floor() as i64, (y / cell).floor() as i64);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = buckets.get(&(bx + dx, by + dy)) {
                    for &v in list {
                        if (!ordered && v != u) || v > u {
                            let (px, py) = mesh.points[v as usize];
                            let d2 = (px - x) * (px - x) + (py - y) * (py - y);
                            if d2 < delta * delta {
                                out.push(v);
                            }
                        }
                    }
                }
            }
        }
        out
    };

    // Phase A: budgeted local searches, chunked for parallelism.
    const BUDGET: usize = 4000;
    const CHUNK: usize = 2048;
    let n_chunks = n.div_ceil(CHUNK);
    let partials = crate::runner::par_map_indexed(n_chunks, |ci| {
        let mut scratch = DijkstraScratch::new(n);
        let mut local_max: Real = 0.0;
        let mut pairs = 0usize;
        let mut hard: Vec<u32> = Vec::new();
        for u in (ci * CHUNK) as u32..((ci + 1) * CHUNK).min(n) as u32 {
            let targets = near_of(u, true);
            if targets.is_empty() {
                continue;
            }
            pairs += targets.len();
            let done = scratch.run(mesh, &[(u, 0.0)], Some(&targets), Some(BUDGET));
            let mut missing = false;
            for &t in &targets {
                match scratch.distance(t) {
                    Some(d) => local_max = local_max.max(d),
                    None => missing = true,
                }
            }
            if !done || missing {
                hard.push(u);
            }
        }
        (local_max, pairs, hard)
    });
    let mut value: Real = 0.0;
    let mut pairs_seen = 0usize;
    let mut hard: Vec<u32> = Vec::new();
    for (m, p, h) in partials {
        value = value.max(m);
        pairs_seen += p;
        hard.extend(h);
    }
    hard.sort_unstable();
    let hard_sources = hard.len();

    // Phase B: exact runs from group representatives.
    let group_cell = 2.0 * delta;
    let mut groups: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    for &u in &hard {
        let (x, y) = mesh.points[u as usize];
        groups
            .entry(((x / group_cell).floor() as i64, (y / group_cell).floor() as i64))
            .or_default()
            .push(u);
    }
    let mut group_list: Vec<((i64, i64), Vec<u32>)> = groups.into_iter().collect();
    group_list.sort_by_key(|(k, _)| *k);
    let reps: Vec<u32> = group_list.iter().map(|(_, members)| members[0]).collect();

    let rep_runs = crate::runner::par_map_indexed(reps.len(), |ri| {
        let rep = reps[ri];
        let mut scratch = DijkstraScratch::new(n);
        scratch.run(mesh, &[(rep, 0.0)], None, None);
        // exact values for the rep's own pairs, triangle bounds for the rest
        // of the group, both pair directions considered
        let mut exact_max: Real = 0.0;
        for t in near_of(rep, false) {
            if let Some(d) = scratch.distance(t) {
                exact_max = exact_max.max(d);
            }
        }
        let mut bounds: Vec<(u32, Real)> = Vec::new();
        for &u in &group_list[ri].1 {
            if u == rep {
                continue;
            }
            let du = scratch.distance(u).unwrap_or(Real::INFINITY);
            let mut cand: Real = 0.0;
            for t in near_of(u, false) {
                if let Some(dt) = scratch.distance(t) {
                    if du.is_finite() {
                        cand = cand.max((dt - du).max(0.0));
                    }
                }
            }
            bounds.push((u, cand));
        }
        (exact_max, bounds)
    });
    let mut candidates: Vec<(u32, Real)> = Vec::new();
    let mut exact_value = value;
    for (exact_max, bounds) in rep_runs {
        exact_value = exact_value.max(exact_max);
        candidates.extend(bounds);
    }

    // confirm the strongest lower bounds exactly
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let promote: Vec<u32> = candidates
        .iter()
        .take_while(|(_, c)| *c > exact_value)
        .take(8)
        .map(|(u, _)| *u)
        .collect();
    let confirmed_runs = crate::runner::par_map_indexed(promote.len(), |pi| {
        let u = promote[pi];
        let mut scratch = DijkstraScratch::new(n);
        scratch.run(mesh, &[(u, 0.0)], None, None);
        let mut m: Real = 0.0;
        for t in near_of(u, false) {
            if let Some(d) = scratch.distance(t) {
                m = m.max(d);
            }
        }
        m
    });
    for m in confirmed_runs {
        exact_value = exact_value.max(m);
    }
    let unconfirmed_extra = candidates
        .iter()
        .filter(|(u, _)| !promote.contains(u))
        .map(|(_, c)| *c)
        .fold(0.0, Real::max);
    let (final_value, confirmed) = if unconfirmed_extra > exact_value {
        (unconfirmed_extra, false)
    } else {
        (exact_value, true)
    };
    ModulusReport {
        delta,
        value: final_value,
        pairs_seen,
        hard_sources,
        promoted: promote.len(),
        confirmed,
    }
}

/// Level-`m` resistance-metric sampler, normalized so the bottom-to-top
/// resistance is one unit.
pub struct ResistanceProbe {
    pub level: u32,
    pub graph: CellGraph,
    pub form: SparseForm,
    pub cross_lr: Real,
    geom: LevelGeometry,
    cfg: SolverConfig,
}

impl ResistanceProbe {
    pub fn new(spec: &CarpetSpec, m: u32, cfg: &SolverConfig) -> Result<ResistanceProbe, Error> {
        let graph = build_graph(spec, m, None)?;
        let form: SparseForm = SparseForm::laplacian(&graph);
        let cross = cross_resistance_on(&graph, &form, spec, cfg)?;
        Ok(ResistanceProbe {
            level: m,
            graph,
            form,
            cross_lr: cross.left_right,
            geom: LevelGeometry::build(spec, m)?,
            cfg: cfg.clone(),
        })
    }

    /// Smallest cell index whose closed square contains the point.
    pub fn cell_of(&self, p: &Point) -> Result<usize, Error> {
        (0..self.geom.len())
            .find(|&i| self.geom.square(i).contains_point(p))
            .ok_or_else(|| Error::OutOfRange("point outside the square union".into()))
    }

    /// Normalized resistance between the cells containing the two points.
    pub fn between_points(&self, x: &Point, y: &Point) -> Result<Real, Error> {
        let cx = self.cell_of(x)?;
        let cy = self.cell_of(y)?;
        self.between_cells(cx, cy)
    }

    pub fn between_cells(&self, cx: usize, cy: usize) -> Result<Real, Error> {
        if cx == cy {
            return Err(Error::SameCell);
        }
        let r = effective_resistance(&self.form, &[cx as u32], &[cy as u32], &self.cfg)?;
        Ok(r / self.cross_lr)
    }
}

#[derive(Debug, Clone)]
pub struct ThetaEntry {
    pub euclid: Real,
    pub geodesic: Real,
    pub resistance: Real,
    pub ratio: Real,
}

#[derive(Debug, Clone)]
pub struct ThetaScan {
    pub theta: Real,
    pub entries: Vec<ThetaEntry>,
    pub min_ratio: Real,
    pub max_ratio: Real,
    pub spread: Real,
}

/// Samples vertex pairs across dyadic separation scales and reports
/// `resistance / geodesic^theta` ratios.
pub fn theta_ratio_scan(
    spec: &CarpetSpec,
    n_pairs: usize,
    m: u32,
    r_hat: Real,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<ThetaScan, Error> {
    let mesh = GeodesicMesh::build(spec, m)?;
    let probe = ResistanceProbe::new(spec, m, cfg)?;
    let theta = -r_hat.ln() / (spec.k as Real).ln();
    let n = mesh.n_vertices();
    // keep separations well above the mesh resolution
    let scales = m.saturating_sub(2).max(1);

    let entries = crate::runner::par_map_indexed(n_pairs, |t| {
        let mut rng = crate::runner::task_rng(seed, t as u64);
        let j = 1 + (t as u32 % scales);
        let target = (spec.k as Real).powi(-(j as i32));
        let mut scratch = DijkstraScratch::new(n);
        for _attempt in 0..64 {
            let u = rng.gen_range(0..n) as u32;
            let (ux, uy) = mesh.points[u as usize];
            // candidate targets in the annulus [target/2, target], scanned
            // from a random start so samples cover the whole carpet
            let mut cands: Vec<u32> = Vec::new();
            let start = rng.gen_range(0..n);
            for off in 0..n {
                let v = (start + off) % n;
                let (vx, vy) = mesh.points[v];
                let d2 = (vx - ux) * (vx - ux) + (vy - uy) * (vy - uy);
                if d2 >= target * target / 4.0 && d2 <= target * target {
                    cands.push(v as u32);
                }
                if cands.len() >= 256 {
                    break;
                }
            }
            if cands.is_empty() {
                continue;
            }
            let v = cands[rng.gen_range(0..cands.len())];
            let cu = mesh.vertex_cell[u as usize] as usize;
            let cv = mesh.vertex_cell[v as usize] as usize;
            if cu == cv {
                continue;
            }
            scratch.run(&mesh, &[(u, 0.0)], Some(&[v]), None);
            let d_g = match scratch.distance(v) {
                Some(d) => d,
                None => continue,
            };
            if d_g < mesh.error_bound {
                continue; // below surrogate resolution
            }
            let r = match probe.between_cells(cu, cv) {
                Ok(r) => r,
                Err(_) => continue,
            };
            let (vx, vy) = mesh.points[v as usize];
            let euclid = ((vx - ux) * (vx - ux) + (vy - uy) * (vy - uy)).sqrt();
            return Ok::<Option<ThetaEntry>, Error>(Some(ThetaEntry {
                euclid,
                geodesic: d_g,
                resistance: r,
                ratio: r / d_g.powf(theta),
            }));
        }
        Ok(None)
    });
    let mut out = Vec::new();
    for e in entries {
        if let Some(e) = e? {
            out.push(e);
        }
    }
    let min_ratio = out.iter().map(|e| e.ratio).fold(Real::INFINITY, Real::min);
    let max_ratio = out.iter().map(|e| e.ratio).fold(0.0, Real::max);
    Ok(ThetaScan {
        theta,
        entries: out,
        min_ratio,
        max_ratio,
        spread: max_ratio / min_ratio,
    })
}

/// The sliding family: `k = 7`, the 24 boundary maps, one square at
/// `(z + 2/7, 1/7)` and its symmetry orbit, all as translations.
pub fn sliding_family_spec(z: &Ratio) -> Result<CarpetSpec, Error> {
    let lo = ratio(0, 1);
    let hi = ratio(1, 14);
    if z < &lo || z > &hi {
        return Err(Error::OutOfRange(format!(
            "slide parameter {} outside [0, 1/14]",
            crate::rational::format_ratio(z)
        )));
    }
    let mut spec = CarpetSpec::boundary_ring(7);
    let base_x = z + ratio(2, 7);
    let base_y = ratio(1, 7);
    let side = ratio(1, 7);
    let base = (base_x.clone(), base_y.clone());
    let mut corners: Vec<(Ratio, Ratio)> = Vec::new();
    for g in ALL_SYMMETRIES {
        let a = g.apply(&Point::new(base_x.clone(), base_y.clone()));
        let b = g.apply(&Point::new(&base_x + &side, &base_y + &side));
        corners.push((a.x.min(b.x), a.y.min(b.y)));
    }
    corners.sort();
    corners.dedup();
    if corners.len() != 8 {
        return Err(Error::InvalidSpec(format!(
            "orbit of the sliding square collapsed to {} members",
            corners.len()
        )));
    }
    // the base square comes first, its orbit follows in corner order
    spec.maps.push(Similarity::translation(base.0.clone(), base.1.clone()));
    for (tx, ty) in corners {
        if (&tx, &ty) != (&base.0, &base.1) {
            spec.maps.push(Similarity::translation(tx, ty));
        }
    }
    let report = spec.validate();
    if !report.ok() {
        let (name, witness) = report.first_failure().unwrap();
        return Err(Error::InvalidSpec(format!("sliding spec fails {name}: {witness}")));
    }
    Ok(spec)
}

/// Fixed probe point pairs for the sliding scan: two outer corners, a pair
/// bracketing the sliding cell's corner gap, and a bottom-to-top pair.
/// Probe points sit on level-1 cell edges, which belong to the square union
/// at every level and never move with the slide parameter, so the containing
/// cells are stable across the scan.
pub fn slide_probe_pairs() -> Vec<(Point, Point)> {
    vec![
        (
            Point::new(ratio(0, 1), ratio(0, 1)),
            Point::new(ratio(1, 1), ratio(0, 1)),
        ),
        (
            Point::new(ratio(5, 14), ratio(1, 7)),
            Point::new(ratio(1, 7), ratio(5, 14)),
        ),
        (
            Point::new(ratio(5, 14), ratio(1, 7)),
            Point::new(ratio(5, 14), ratio(1, 1)),
        ),
    ]
}

/// One row of the sliding scan.
#[derive(Debug, Clone)]
pub struct SlideSample {
    pub z: Ratio,
    pub cross_r: Real,
    pub probe_r: Vec<Real>,
    pub modulus: Real,
    /// Resistance-ratio estimate of the renormalization factor.
    pub r_hat: Real,
    pub level: u32,
    pub error_bound: Real,
}

/// Scans the slide parameter grid: per `z`, the side-to-side resistance,
/// probe resistances, the equicontinuity modulus, and a cheap resistance
/// estimate of the renormalization factor.
pub fn sliding_scan(
    zs: &[Ratio],
    m: u32,
    modulus_level: u32,
    delta: Real,
    cfg: &SolverConfig,
) -> Result<Vec<SlideSample>, Error> {
    let probes = slide_probe_pairs();
    let results = crate::runner::par_map_indexed(zs.len(), |zi| {
        let z = &zs[zi];
        let spec = sliding_family_spec(z)?;
        let probe = ResistanceProbe::new(&spec, m, cfg)?;
        let prev = crate::poincare::cross_resistance(&spec, m - 1, cfg)?;
        let here_lr = probe.cross_lr;
        let r_hat = prev.left_right / here_lr;
        let mut probe_r = Vec::with_capacity(probes.len());
        for (a, b) in &probes {
            probe_r.push(probe.between_points(a, b)?);
        }
        let mesh = GeodesicMesh::build(&spec, modulus_level)?;
        let modulus = equicontinuity_modulus(&mesh, delta).value;
        Ok::<SlideSample, Error>(SlideSample {
            z: z.clone(),
            cross_r: here_lr,
            probe_r,
            modulus,
            r_hat,
            level: m,
            error_bound: 4.0 * (spec.k as Real).powi(-(m as i32)),
        })
    });
    let mut out = Vec::with_capacity(zs.len());
    for r in results {
        out.push(r?);
    }
    Ok(out)
}
