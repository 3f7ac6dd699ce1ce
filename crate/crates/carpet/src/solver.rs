//! Sparse linear algebra over cell graphs: Laplacians, Dirichlet problems,
//! effective resistances, spectral gaps, constrained quadratic suprema and
//! Schur-complement traces.
//!
//! Iterative paths are conjugate gradient with Jacobi preconditioning;
//! singular (pseudoinverse) solves project onto the mean-zero subspace at
//! every iteration. A dense route via `nalgebra` backs the Schur complement
//! and the small-problem oracles in tests. All kernels are single-threaded
//! and sum in fixed index order, so results do not depend on thread count.

use crate::graph::CellGraph;
use crate::scalar::{Real, Scalar};
use crate::Error;
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Solver knobs; the defaults match the documented tolerances.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative residual target for conjugate gradient.
    pub cg_tol: f64,
    /// Iteration cap as a multiple of the system dimension.
    pub cg_max_mult: usize,
    /// Relative stabilization target for the Ritz value of the gap solve.
    pub lanczos_tol: f64,
    /// Seed for the deterministic Lanczos start vector.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { cg_tol: 1e-10, cg_max_mult: 5, lanczos_tol: 1e-10, seed: 0x5EED }
    }
}

/// Symmetric positive-semidefinite form in compressed row storage.
/// Row sums are zero (graph Laplacian); the kernel is spanned by the
/// indicators of the connected components.
#[derive(Debug, Clone)]
pub struct SparseForm<S: Scalar = Real> {
    pub dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<S>,
    pub component: Vec<u32>,
    pub n_components: usize,
}

/// Iteration record for one linear solve.
#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Free vertices in components no constraint touches (valued 0).
    pub untouched_vertices: usize,
}

/// Dirichlet minimizer plus its solve diagnostics.
#[derive(Debug, Clone)]
pub struct DirichletSolution<S: Scalar = Real> {
    pub values: Vec<S>,
    pub report: SolveReport,
}

/// Spectral gap result: `lambda` is the reciprocal best constant in the
/// variance-energy inequality.
#[derive(Debug, Clone)]
pub struct GapReport<S: Scalar = Real> {
    pub gap: S,
    pub lambda: S,
    pub lanczos_steps: usize,
    pub inner_iterations: usize,
}

impl<S: Scalar> SparseForm<S> {
    /// Graph Laplacian of a cell graph: degree on the diagonal, -1 per edge.
    pub fn laplacian(graph: &CellGraph) -> SparseForm<S> {
        let n = graph.n_vertices;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0usize);
        for v in 0..n {
            let nbrs = graph.neighbors(v);
            let mut row: Vec<u32> = nbrs.to_vec();
            row.push(v as u32);
            row.sort_unstable();
            for c in row {
                col_idx.push(c);
                vals.push(if c as usize == v {
                    S::from_usize(nbrs.len()).unwrap()
                } else {
                    -S::one()
                });
            }
            row_ptr.push(col_idx.len());
        }
        let (component, n_components) = graph.components();
        SparseForm { dim: n, row_ptr, col_idx, vals, component, n_components }
    }

    /// Dense symmetric matrix (small systems, Schur results).
    pub fn from_dense(m: &DMatrix<f64>) -> SparseForm<S> {
        let n = m.nrows();
        assert_eq!(n, m.ncols());
        let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let cut = scale * 1e-15;
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if i == j || v.abs() > cut {
                    col_idx.push(j as u32);
                    vals.push(S::from_f64(v).unwrap());
                }
            }
            row_ptr.push(col_idx.len());
        }
        let mut form = SparseForm {
            dim: n,
            row_ptr,
            col_idx,
            vals,
            component: vec![0; n],
            n_components: if n == 0 { 0 } else { 1 },
        };
        let (component, n_components) = form.structure_components();
        form.component = component;
        form.n_components = n_components;
        form
    }

    fn structure_components(&self) -> (Vec<u32>, usize) {
        let mut comp = vec![u32::MAX; self.dim];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.dim {
            if comp[s] != u32::MAX {
                continue;
            }
            comp[s] = count as u32;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for k in self.row_ptr[u]..self.row_ptr[u + 1] {
                    let v = self.col_idx[k] as usize;
                    if v != u && self.vals[k] != S::zero() && comp[v] == u32::MAX {
                        comp[v] = count as u32;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    pub fn matvec(&self, x: &[S], y: &mut [S]) {
        debug_assert_eq!(x.len(), self.dim);
        for i in 0..self.dim {
            let mut acc = S::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k] as usize];
            }
            y[i] = acc;
        }
    }

    /// Quadratic form `x^T L x`.
    pub fn quadratic(&self, x: &[S]) -> S {
        let mut acc = S::zero();
        for i in 0..self.dim {
            let mut row = S::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.vals[k] * x[self.col_idx[k] as usize];
            }
            acc += row * x[i];
        }
        acc
    }

    pub fn diagonal(&self) -> Vec<S> {
        (0..self.dim)
            .map(|i| {
                let mut d = S::zero();
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    if self.col_idx[k] as usize == i {
                        d = self.vals[k];
                    }
                }
                d
            })
            .collect()
    }

    pub fn trace(&self) -> S {
        self.diagonal().into_iter().sum()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| (self.col_idx[k] as usize, self.vals[k]))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] = v.to_f64().unwrap();
            }
        }
        m
    }
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

fn project_mean_zero<S: Scalar>(x: &mut [S]) {
    let n = S::from_usize(x.len()).unwrap();
    let mean = x.iter().copied().sum::<S>() / n;
    for v in x.iter_mut() {
        *v -= mean;
    }
}

/// Preconditioned conjugate gradient on an abstract SPD operator.
/// `project` re-imposes a kernel-orthogonality constraint every iteration.
fn cg_kernel<S: Scalar>(
    apply: &mut dyn FnMut(&[S], &mut [S]),
    inv_diag: &[S],
    b: &[S],
    tol_rel: f64,
    max_iters: usize,
    project: bool,
) -> (Vec<S>, SolveReport) {
    let n = b.len();
    let mut x = vec![S::zero(); n];
    let mut r = b.to_vec();
    if project {
        project_mean_zero(&mut r);
    }
    let b_norm = norm(&r);
    let tol = S::from_f64(tol_rel).unwrap();
    if b_norm == S::zero() {
        return (x, SolveReport { iterations: 0, residual: 0.0, converged: true, untouched_vertices: 0 });
    }
    let mut z: Vec<S> = r.iter().zip(inv_diag).map(|(ri, d)| *ri * *d).collect();
    if project {
        project_mean_zero(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![S::zero(); n];
    let mut iterations = 0;
    let mut residual = b_norm;
    while iterations < max_iters {
        apply(&p, &mut q);
        if project {
            project_mean_zero(&mut q);
        }
        let pq = dot(&p, &q);
        if pq <= S::zero() {
            break; // operator numerically singular along p
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if project {
            project_mean_zero(&mut x);
            project_mean_zero(&mut r);
        }
        iterations += 1;
        residual = norm(&r);
        if residual <= tol * b_norm {
            break;
        }
        let mut z2: Vec<S> = r.iter().zip(inv_diag).map(|(ri, d)| *ri * *d).collect();
        if project {
            project_mean_zero(&mut z2);
        }
        let rz2 = dot(&r, &z2);
        let beta = rz2 / rz;
        rz = rz2;
        for i in 0..n {
            p[i] = z2[i] + beta * p[i];
        }
        z = z2;
        let _ = &z;
    }
    let converged = residual <= tol * b_norm;
    (
        x,
        SolveReport {
            iterations,
            residual: (residual / b_norm).to_f64().unwrap_or(f64::NAN),
            converged,
            untouched_vertices: 0,
        },
    )
}

/// Pseudoinverse application `x = L^+ b` on a connected form, by projected CG.
pub fn solve_pseudo<S: Scalar>(
    form: &SparseForm<S>,
    b: &[S],
    cfg: &SolverConfig,
    tol_override: Option<f64>,
) -> Result<(Vec<S>, SolveReport), Error> {
    if form.n_components != 1 {
        return Err(Error::Disconnected);
    }
    let diag = form.diagonal();
    let inv_diag: Vec<S> = diag
        .iter()
        .map(|d| if *d > S::zero() { S::one() / *d } else { S::one() })
        .collect();
    let max_iters = (form.dim * cfg.cg_max_mult).max(64);
    let tol = tol_override.unwrap_or(cfg.cg_tol);
    let mut apply = |x: &[S], y: &mut [S]| form.matvec(x, y);
    let (x, report) = cg_kernel(&mut apply, &inv_diag, b, tol, max_iters, true);
    if !report.converged {
        return Err(Error::NonConvergence {
            iterations: report.iterations,
            residual: report.residual,
        });
    }
    Ok((x, report))
}

/// Energy minimizer subject to pinned vertex sets.
///
/// Constraint sets must be pairwise disjoint and non-empty. Free vertices in
/// components that no constraint touches are valued 0 and flagged in the
/// report.
pub fn solve_dirichlet<S: Scalar>(
    form: &SparseForm<S>,
    constraints: &[(Vec<u32>, S)],
    cfg: &SolverConfig,
) -> Result<DirichletSolution<S>, Error> {
    if constraints.is_empty() || constraints.iter().any(|(set, _)| set.is_empty()) {
        return Err(Error::EmptyConstraint);
    }
    let n = form.dim;
    let mut pinned = vec![false; n];
    let mut values = vec![S::zero(); n];
    for (set, val) in constraints {
        for &v in set {
            let v = v as usize;
            if pinned[v] {
                return Err(Error::InvalidInput("constraint sets overlap".into()));
            }
            pinned[v] = true;
            values[v] = *val;
        }
    }

    // Reachability from the constrained set marks solvable free vertices.
    let mut reach = pinned.clone();
    let mut stack: Vec<usize> = (0..n).filter(|&v| pinned[v]).collect();
    while let Some(u) = stack.pop() {
        for (v, w) in form.row(u) {
            if v != u && w != S::zero() && !reach[v] {
                reach[v] = true;
                stack.push(v);
            }
        }
    }
    let untouched_vertices = (0..n).filter(|&v| !reach[v]).count();

    let free: Vec<usize> = (0..n).filter(|&v| !pinned[v] && reach[v]).collect();
    if free.is_empty() {
        return Ok(DirichletSolution {
            values,
            report: SolveReport {
                iterations: 0,
                residual: 0.0,
                converged: true,
                untouched_vertices,
            },
        });
    }
    let mut free_pos = vec![usize::MAX; n];
    for (fi, &v) in free.iter().enumerate() {
        free_pos[v] = fi;
    }

    // Right-hand side sum of pinned neighbor values; diagonal of L_ff is the
    // full diagonal of L.
    let mut b = vec![S::zero(); free.len()];
    let mut inv_diag = vec![S::one(); free.len()];
    for (fi, &v) in free.iter().enumerate() {
        let mut acc = S::zero();
        for (u, w) in form.row(v) {
            if u == v {
                inv_diag[fi] = S::one() / w;
            } else if pinned[u] {
                acc -= w * values[u];
            }
        }
        b[fi] = acc;
    }

    let max_iters = (free.len() * cfg.cg_max_mult).max(64);
    let mut apply = |x: &[S], y: &mut [S]| {
        for (fi, &v) in free.iter().enumerate() {
            let mut acc = S::zero();
            for (u, w) in form.row(v) {
                if u == v {
                    acc += w * x[fi];
                } else if free_pos[u] != usize::MAX {
                    acc += w * x[free_pos[u]];
                }
            }
            y[fi] = acc;
        }
    };
    let (xf, mut report) = cg_kernel(&mut apply, &inv_diag, &b, cfg.cg_tol, max_iters, false);
    if !report.converged {
        return Err(Error::NonConvergence {
            iterations: report.iterations,
            residual: report.residual,
        });
    }
    for (fi, &v) in free.iter().enumerate() {
        values[v] = xf[fi];
    }
    report.untouched_vertices = untouched_vertices;
    Ok(DirichletSolution { values, report })
}

/// Effective resistance between two vertex sets: reciprocal of the minimal
/// energy among functions 0 on `a`, 1 on `b`.
pub fn effective_resistance<S: Scalar>(
    form: &SparseForm<S>,
    a: &[u32],
    b: &[u32],
    cfg: &SolverConfig,
) -> Result<S, Error> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyConstraint);
    }
    if a.iter().any(|v| b.contains(v)) {
        return Err(Error::InvalidInput("resistance sets overlap".into()));
    }
    // finite resistance needs a component meeting both sets
    let connected = a.iter().any(|&va| {
        b.iter()
            .any(|&vb| form.component[va as usize] == form.component[vb as usize])
    });
    if !connected {
        return Err(Error::InfiniteResistance);
    }
    let sol = solve_dirichlet(
        form,
        &[(a.to_vec(), S::zero()), (b.to_vec(), S::one())],
        cfg,
    )?;
    let e = form.quadratic(&sol.values);
    if e <= S::zero() {
        return Err(Error::InfiniteResistance);
    }
    Ok(S::one() / e)
}

/// Smallest nonzero eigenvalue of the Laplacian (connected graphs), via
/// Lanczos on the pseudoinverse with the constant vector deflated; each
/// operator application is a projected CG solve.
pub fn spectral_gap<S: Scalar>(
    form: &SparseForm<S>,
    cfg: &SolverConfig,
) -> Result<GapReport<S>, Error> {
    if form.dim < 2 {
        return Err(Error::InvalidInput("gap needs at least two vertices".into()));
    }
    if form.n_components != 1 {
        return Err(Error::Disconnected);
    }
    let n = form.dim;
    let max_steps = (n - 1).min(80);
    let inner_tol = (cfg.lanczos_tol * 1e-2).max(1e-13);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (n as u64).wrapping_mul(0x9E37_79B9));
    let mut v: Vec<S> = (0..n)
        .map(|_| S::from_f64(rng.gen_range(-1.0..1.0)).unwrap())
        .collect();
    project_mean_zero(&mut v);
    let nv = norm(&v);
    for x in v.iter_mut() {
        *x = *x / nv;
    }

    let mut basis: Vec<Vec<S>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut inner_iterations = 0usize;
    let mut theta_prev = f64::NAN;
    let mut stable = 0usize;
    let mut theta = 0.0f64;

    for step in 0..max_steps {
        let vj = basis[step].clone();
        let (mut w, rep) = solve_pseudo(form, &vj, cfg, Some(inner_tol))?;
        inner_iterations += rep.iterations;
        let alpha = dot(&w, &vj);
        alphas.push(alpha.to_f64().unwrap());
        for i in 0..n {
            w[i] -= alpha * vj[i];
        }
        if step > 0 {
            let beta_prev = S::from_f64(betas[step - 1]).unwrap();
            let vm = &basis[step - 1];
            for i in 0..n {
                w[i] -= beta_prev * vm[i];
            }
        }
        // full reorthogonalization, twice, plus kernel deflation
        for _ in 0..2 {
            project_mean_zero(&mut w);
            for q in &basis {
                let c = dot(&w, q);
                for i in 0..n {
                    w[i] -= c * q[i];
                }
            }
        }
        theta = largest_tridiag_eigenvalue(&alphas, &betas);
        let rel = if theta_prev.is_nan() {
            f64::INFINITY
        } else {
            ((theta - theta_prev) / theta).abs()
        };
        theta_prev = theta;
        if rel <= cfg.lanczos_tol {
            stable += 1;
            if stable >= 2 {
                break;
            }
        } else {
            stable = 0;
        }
        let beta = norm(&w);
        if beta.to_f64().unwrap() <= 1e-14 * theta.abs().max(1.0) {
            break; // Krylov space exhausted: Ritz values exact
        }
        betas.push(beta.to_f64().unwrap());
        for x in w.iter_mut() {
            *x = *x / beta;
        }
        basis.push(w);
    }
    if theta <= 0.0 {
        return Err(Error::NonConvergence { iterations: inner_iterations, residual: f64::NAN });
    }
    let lambda = S::from_f64(theta).unwrap();
    Ok(GapReport {
        gap: S::one() / lambda,
        lambda,
        lanczos_steps: alphas.len(),
        inner_iterations,
    })
}

/// Largest eigenvalue of the symmetric tridiagonal (alphas, betas).
fn largest_tridiag_eigenvalue(alphas: &[f64], betas: &[f64]) -> f64 {
    let m = alphas.len();
    if m == 1 {
        return alphas[0];
    }
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigenvalues();
    eig.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

/// Best constant `S` with `(a . f)^2 <= S * f^T L f`, i.e. `a^T L^+ a`,
/// for `a` orthogonal to constants on a connected graph.
pub fn quadratic_sup<S: Scalar>(
    form: &SparseForm<S>,
    a: &[S],
    cfg: &SolverConfig,
) -> Result<S, Error> {
    if form.n_components != 1 {
        return Err(Error::Disconnected);
    }
    let total: S = a.iter().copied().sum();
    let scale: S = a.iter().map(|v| v.abs()).sum();
    if scale == S::zero() {
        return Ok(S::zero());
    }
    if (total / scale).abs().to_f64().unwrap() > 1e-9 {
        return Err(Error::InvalidInput(
            "functional not orthogonal to constants".into(),
        ));
    }
    let (x, _) = solve_pseudo(form, a, cfg, None)?;
    Ok(dot(a, &x))
}

/// Schur complement of the form onto `keep`, eliminating the complement.
/// Effective resistances between kept vertices are preserved exactly.
pub fn trace_form<S: Scalar>(form: &SparseForm<S>, keep: &[u32]) -> Result<SparseForm<S>, Error> {
    const DENSE_LIMIT: usize = 5000;
    if form.dim > DENSE_LIMIT {
        return Err(Error::LevelTooLarge { level: 0 });
    }
    if keep.is_empty() {
        return Err(Error::EmptyConstraint);
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let n = form.dim;
    let mut is_kept = vec![false; n];
    for &v in &keep {
        is_kept[v as usize] = true;
    }
    let drop: Vec<usize> = (0..n).filter(|&v| !is_kept[v]).collect();
    if drop.is_empty() {
        return Ok(form.clone());
    }

    // every dropped component must reach a kept vertex, else L_CC is singular
    {
        let mut reach = is_kept.clone();
        let mut stack: Vec<usize> = keep.iter().map(|&v| v as usize).collect();
        while let Some(u) = stack.pop() {
            for (v, w) in form.row(u) {
                if v != u && w != S::zero() && !reach[v] {
                    reach[v] = true;
                    stack.push(v);
                }
            }
        }
        if reach.iter().any(|r| !r) {
            return Err(Error::Singular(
                "eliminated set contains a whole component".into(),
            ));
        }
    }

    let dense = form.to_dense();
    let kv: Vec<usize> = keep.iter().map(|&v| v as usize).collect();
    let l_vv = dense.select_rows(kv.iter()).select_columns(kv.iter());
    let l_vc = dense.select_rows(kv.iter()).select_columns(drop.iter());
    let l_cv = dense.select_rows(drop.iter()).select_columns(kv.iter());
    let l_cc = dense.select_rows(drop.iter()).select_columns(drop.iter());
    let chol = nalgebra::Cholesky::new(l_cc)
        .ok_or_else(|| Error::Singular("complement block not positive definite".into()))?;
    let x = chol.solve(&l_cv);
    let mut s = l_vv - l_vc * x;
    // symmetrize away factorization noise
    for i in 0..s.nrows() {
        for j in 0..i {
            let m = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = m;
            s[(j, i)] = m;
        }
    }
    Ok(SparseForm::from_dense(&s))
}

/// Connected random graph (spanning tree plus extras); deterministic per seed.
pub fn random_connected_graph(n: usize, extra_edges: usize, seed: u64) -> CellGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push((u as u32, v as u32));
    }
    let mut added = 0;
    while added < extra_edges {
        let a = rng.gen_range(0..n) as u32;
        let b = rng.gen_range(0..n) as u32;
        if a != b && !edges.contains(&(a.min(b), a.max(b))) {
            edges.push((a.min(b), a.max(b)));
            added += 1;
        }
    }
    CellGraph::from_edges(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, energy};
    use crate::Error;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn cycle(n: usize) -> CellGraph {
        CellGraph::from_edges(
            n,
            (0..n).map(|i| (i as u32, ((i + 1) % n) as u32)).collect(),
        )
    }

    fn complete(n: usize) -> CellGraph {
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                e.push((i as u32, j as u32));
            }
        }
        CellGraph::from_edges(n, e)
    }

    /// Dense smallest-nonzero-eigenvalue oracle.
    fn dense_gap(form: &SparseForm) -> f64 {
        let eig = form.to_dense().symmetric_eigenvalues();
        let mut vals: Vec<f64> = eig.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        vals.into_iter().find(|v| *v > 1e-9).unwrap()
    }

    /// Dense effective resistance oracle via pseudoinverse.
    fn dense_resistance(form: &SparseForm, a: &[u32], b: &[u32]) -> f64 {
        let d = form.to_dense();
        let pinv = d.pseudo_inverse(1e-12).unwrap();
        let n = form.dim;
        let mut s = nalgebra::DVector::zeros(n);
        // unit current into the a/b "supernodes": solve with indicators
        for &v in a {
            s[v as usize] = -1.0 / a.len() as f64;
        }
        for &v in b {
            s[v as usize] = 1.0 / b.len() as f64;
        }
        // not the set resistance in general; used only for singleton sets
        assert!(a.len() == 1 && b.len() == 1);
        let x = &pinv * &s;
        x[b[0] as usize] - x[a[0] as usize]
    }

    #[test]
    fn laplacian_matches_energy() {
        let g = build_graph(&crate::geometry::CarpetSpec::sc3(), 2, None).unwrap();
        let form: SparseForm = SparseForm::laplacian(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..4 {
            let f: Vec<f64> = (0..g.n_vertices).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e = energy(&g, &f);
            let q = form.quadratic(&f);
            assert!((e - q).abs() <= 1e-12 * e.abs().max(1.0));
        }
    }

    #[test]
    fn sc3_level1_laplacian_trace_is_twice_edge_count() {
        let g = build_graph(&crate::geometry::CarpetSpec::sc3(), 1, None).unwrap();
        let form: SparseForm = SparseForm::laplacian(&g);
        assert_eq!(form.trace(), 24.0);
        // row sums vanish
        for i in 0..form.dim {
            let s: f64 = form.row(i).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-14);
        }
    }

    #[test]
    fn single_vertex_graph_has_zero_form() {
        let g = CellGraph::from_edges(1, vec![]);
        let form: SparseForm = SparseForm::laplacian(&g);
        assert_eq!(form.dim, 1);
        assert_eq!(form.trace(), 0.0);
    }

    #[test]
    fn dirichlet_with_everything_pinned_returns_constraints() {
        let g = cycle(4);
        let form: SparseForm = SparseForm::laplacian(&g);
        let sol = solve_dirichlet(
            &form,
            &[(vec![0, 1], 2.0), (vec![2, 3], -1.0)],
            &cfg(),
        )
        .unwrap();
        assert_eq!(sol.values, vec![2.0, 2.0, -1.0, -1.0]);
    }

    #[test]
    fn dirichlet_flags_untouched_components() {
        // two disjoint edges; constrain only the first
        let g = CellGraph::from_edges(4, vec![(0, 1), (2, 3)]);
        let form: SparseForm = SparseForm::laplacian(&g);
        let sol = solve_dirichlet(&form, &[(vec![0], 1.0)], &cfg()).unwrap();
        assert_eq!(sol.report.untouched_vertices, 2);
        assert_eq!(sol.values[2], 0.0);
        assert_eq!(sol.values[3], 0.0);
    }

    #[test]
    fn sc3_cross_solution_has_symmetric_midline() {
        let spec = crate::geometry::CarpetSpec::sc3();
        let g = build_graph(&spec, 1, None).unwrap();
        let form: SparseForm = SparseForm::laplacian(&g);
        // left column words 7, 8, 1 (indices 6, 7, 0); right column 3, 4, 5
        let sol = solve_dirichlet(
            &form,
            &[(vec![6, 7, 0], 0.0), (vec![2, 3, 4], 1.0)],
            &cfg(),
        )
        .unwrap();
        assert!((sol.values[1] - 0.5).abs() < 1e-10); // bottom middle
        assert!((sol.values[5] - 0.5).abs() < 1e-10); // top middle
        let e = form.quadratic(&sol.values);
        assert!((e - 2.0).abs() < 1e-9);
    }

    #[test]
    fn dirichlet_matches_dense_oracle() {
        let spec = crate::geometry::CarpetSpec::sc3();
        let g = build_graph(&spec, 2, None).unwrap();
        let form: SparseForm = SparseForm::laplacian(&g);
        let a: Vec<u32> = (0..8).collect();
        let b: Vec<u32> = (56..64).collect();
        let sol = solve_dirichlet(&form, &[(a.clone(), 0.0), (b.clone(), 1.0)], &cfg()).unwrap();
        let e = form.quadratic(&sol.values);

        // dense oracle: solve the pinned system directly
        let dense = form.to_dense();
        let free: Vec<usize> = (0..form.dim)
            .filter(|v| !a.contains(&(*v as u32)) && !b.contains(&(*v as u32)))
            .collect();
        let lff = dense.select_rows(free.iter()).select_columns(free.iter());
        let mut rhs = nalgebra::DVector::zeros(free.len());
        for (fi, &v) in free.iter().enumerate() {
            for (u, w) in form.row(v) {
                if b.contains(&(u as u32)) {
                    rhs[fi] -= w * 1.0;
                }
            }
        }
        let x = nalgebra::Cholesky::new(lff).unwrap().solve(&rhs);
        let mut full = vec![0.0; form.dim];
        for &v in &b {
            full[v as usize] = 1.0;
        }
        for (fi, &v) in free.iter().enumerate() {
            full[v] = x[fi];
        }
        let e_oracle = form.quadratic(&full);
        assert!((e - e_oracle).abs() <= 1e-9 * e_oracle);
    }

    #[test]
    fn variational_optimality_of_minimizer() {
        let spec = crate::geometry::CarpetSpec::sc3();
        let g = build_graph(&spec, 2, None).unwrap();
        let form: SparseForm = SparseForm::laplacian(&g);
        let a: Vec<u32> = (0..8).collect();
        let b: Vec<u32> = (56..64).collect();
        let sol = solve_dirichlet(&form, &[(a.clone(), 0.0), (b.clone(), 1.0)], &cfg()).unwrap();
        let e0 = form.quadratic(&sol.values);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..8 {
            let mut dir = vec![0.0; form.dim];
            for v in 0..form.dim {
                if !a.contains(&(v as u32)) && !b.contains(&(v as u32)) {
                    dir[v] = rng.gen_range(-1.0..1.0);
                }
            }
            for t in [1e-3, -1e-3] {
                let trial: Vec<f64> =
                    sol.values.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
                assert!(form.quadratic(&trial) >= e0 - 1e-12);
            }
        }
    }

    #[test]
    fn sc3_cross_resistance_level1_is_half() {
        let spec = crate::geometry::CarpetSpec::sc3();
        let g = build_graph(&spec, 1, None).unwrap();
        let form: SparseForm = SparseForm::laplacian(&g);
        let r = effective_resistance(&form, &[6, 7, 0], &[2, 3, 4], &cfg()).unwrap();
        assert!((r - 0.5).abs() < 1e-9);
        let r2 = effective_resistance(&form, &[2, 3, 4], &[6, 7, 0], &cfg()).unwrap();
        assert!((r - r2).abs() < 1e-12);
    }

    #[test]
    fn two_edge_path_has_resistance_two() {
        let g = CellGraph::from_edges(3, vec![(0, 1), (1, 2)]);
        let form: SparseForm = SparseForm::laplacian(&g);
        let r = effective_resistance(&form, &[0], &[2], &cfg()).unwrap();
        assert!((r - 2.0).abs() < 1e-10);
    }

    #[test]
    fn disconnected_resistance_is_signaled() {
        let g = CellGraph::from_edges(4, vec![(0, 1), (2, 3)]);
        let form: SparseForm = SparseForm::laplacian(&g);
        match effective_resistance(&form, &[0], &[2], &cfg()) {
            Err(Error::InfiniteResistance) => {}
            other => panic!("expected infinite resistance, got {other:?}"),
        }
    }

    #[test]
    fn rayleigh_monotonicity_on_random_graphs() {
        for seed in 0..6 {
            let g = random_connected_graph(12, 6, seed);
            let form: SparseForm = SparseForm::laplacian(&g);
            let r_before = effective_resistance(&form, &[0], &[5], &cfg()).unwrap();
            assert!((r_before - dense_resistance(&form, &[0], &[5])).abs() < 1e-8);
            // add a fresh edge
            let mut edges = g.edges.clone();
            let new_edge = (0..12u32)
                .flat_map(|a| (a + 1..12).map(move |b| (a, b)))
                .find(|e| !edges.contains(e))
                .unwrap();
            edges.push(new_edge);
            let g2 = CellGraph::from_edges(12, edges);
            let form2: SparseForm = SparseForm::laplacian(&g2);
            let r_after = effective_resistance(&form2, &[0], &[5], &cfg()).unwrap();
            assert!(r_after <= r_before + 1e-10, "seed {seed}");
        }
    }

    #[test]
    fn cycle_gap_matches_closed_form() {
        let form: SparseForm = SparseForm::laplacian(&cycle(8));
        let rep = spectral_gap(&form, &cfg()).unwrap();
        let expect = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / 8.0).cos();
        assert!((rep.gap - expect).abs() < 1e-8 * expect);
    }

    #[test]
    fn complete_graph_gap_is_n() {
        let form: SparseForm = SparseForm::laplacian(&complete(4));
        let rep = spectral_gap(&form, &cfg()).unwrap();
        assert!((rep.gap - 4.0).abs() < 1e-8);
    }

    #[test]
    fn sc3_level1_gap_matches_dense() {
        let g = build_graph(&crate::geometry::CarpetSpec::sc3(), 1, None).unwrap();
        let form: SparseForm = SparseForm::laplacian(&g);
        let rep = spectral_gap(&form, &cfg()).unwrap();
        let oracle = dense_gap(&form);
        assert!((rep.gap - oracle).abs() <= 1e-8 * oracle, "{} vs {oracle}", rep.gap);
    }

    #[test]
    fn sc3_level2_gap_matches_dense() {
        let g = build_graph(&crate::geometry::CarpetSpec::sc3(), 2, None).unwrap();
        let form: SparseForm = SparseForm::laplacian(&g);
        let rep = spectral_gap(&form, &cfg()).unwrap();
        let oracle = dense_gap(&form);
        assert!((rep.gap - oracle).abs() <= 1e-8 * oracle);
    }

    #[test]
    fn gap_errors_on_disconnected() {
        let g = CellGraph::from_edges(4, vec![(0, 1), (2, 3)]);
        let form: SparseForm = SparseForm::laplacian(&g);
        assert!(matches!(spectral_gap(&form, &cfg()), Err(Error::Disconnected)));
    }

    #[test]
    fn quadratic_sup_two_vertex_edge() {
        let g = CellGraph::from_edges(2, vec![(0, 1)]);
        let form: SparseForm = SparseForm::laplacian(&g);
        let s = quadratic_sup(&form, &[1.0, -1.0], &cfg()).unwrap();
        // certificate at f = L^+ a: equality in (a.f)^2 <= S f^T L f
        let (x, _) = solve_pseudo(&form, &[1.0, -1.0], &cfg(), None).unwrap();
        let af = x[0] - x[1];
        assert!((af * af - s * form.quadratic(&x)).abs() < 1e-12);

        let z = quadratic_sup(&form, &[0.0, 0.0], &cfg()).unwrap();
        assert_eq!(z, 0.0);
        assert!(quadratic_sup(&form, &[1.0, 0.0], &cfg()).is_err());
    }

    #[test]
    fn quadratic_sup_certificate_on_random_graph() {
        let g = random_connected_graph(20, 15, 42);
        let form: SparseForm = SparseForm::laplacian(&g);
        let mut a = vec![0.0; 20];
        for i in 0..10 {
            a[i] = 0.1;
            a[i + 10] = -0.1;
        }
        let s = quadratic_sup(&form, &a, &cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let f: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let af: f64 = a.iter().zip(&f).map(|(x, y)| x * y).sum();
            let d = form.quadratic(&f);
            assert!(af * af <= s * d * (1.0 + 1e-10) + 1e-15);
        }
    }

    #[test]
    fn trace_of_three_path_onto_endpoints() {
        let g = CellGraph::from_edges(3, vec![(0, 1), (1, 2)]);
        let form: SparseForm = SparseForm::laplacian(&g);
        let t = trace_form(&form, &[0, 2]).unwrap();
        // single edge of conductance 1/2
        let d = t.to_dense();
        assert!((d[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((d[(0, 1)] + 0.5).abs() < 1e-12);
        let r = effective_resistance(&t, &[0], &[1], &cfg()).unwrap();
        assert!((r - 2.0).abs() < 1e-10);
    }

    #[test]
    fn trace_keeping_everything_is_identity() {
        let g = cycle(5);
        let form: SparseForm = SparseForm::laplacian(&g);
        let t = trace_form(&form, &[0, 1, 2, 3, 4]).unwrap();
        let (a, b) = (form.to_dense(), t.to_dense());
        assert!((a - b).abs().max() < 1e-14);
    }

    #[test]
    fn trace_preserves_resistances_and_composes() {
        for seed in 0..4 {
            let g = random_connected_graph(20, 14, 100 + seed);
            let form: SparseForm = SparseForm::laplacian(&g);
            let keep: Vec<u32> = vec![0, 3, 7, 11, 19];
            let t = trace_form(&form, &keep).unwrap();
            for i in 0..keep.len() {
                for j in i + 1..keep.len() {
                    let r0 =
                        effective_resistance(&form, &[keep[i]], &[keep[j]], &cfg()).unwrap();
                    let r1 =
                        effective_resistance(&t, &[i as u32], &[j as u32], &cfg()).unwrap();
                    assert!((r0 - r1).abs() <= 1e-10 * r0.max(1.0), "seed {seed}");
                }
            }
            // transitivity: trace to a subset of keep equals trace of trace
            let t2 = trace_form(&t, &[0, 1, 2]).unwrap();
            let direct = trace_form(&form, &keep[..3].to_vec()).unwrap();
            let diff = (t2.to_dense() - direct.to_dense()).abs().max();
            assert!(diff < 1e-9, "seed {seed}: {diff}");
        }
    }

    #[test]
    fn trace_rejects_buried_component() {
        let g = CellGraph::from_edges(4, vec![(0, 1), (2, 3)]);
        let form: SparseForm = SparseForm::laplacian(&g);
        assert!(matches!(
            trace_form(&form, &[0, 1]),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn kernels_work_in_f32_too() {
        let g = cycle(6);
        let form: SparseForm<f32> = SparseForm::laplacian(&g);
        let mut c = cfg();
        c.cg_tol = 1e-6;
        c.lanczos_tol = 1e-5;
        let sol = solve_dirichlet(&form, &[(vec![0], 0.0f32), (vec![3], 1.0f32)], &c).unwrap();
        assert!((sol.values[1] - 1.0 / 3.0).abs() < 1e-5);
        let rep = spectral_gap(&form, &c).unwrap();
        let expect = 2.0 - 2.0 * (2.0 * std::f32::consts::PI / 6.0).cos();
        assert!((rep.gap - expect).abs() < 1e-4);
    }
}
