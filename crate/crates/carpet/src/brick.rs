//! The building-brick extension machinery: lower-wall word sets, brick
//! functions, the extension with linear boundary values, separator functions
//! with exact plateaus, and straight-chain resistances.
//!
//! The lower wall of depth `m` always occupies the full strip
//! `[0,1] x [0, k^-m]`: bottom-touching cells sit at height 0 and their
//! horizontal spans cover the bottom edge. Cell containment in the wall is
//! therefore the exact strip test `corner_y + side <= k^-m`.

use crate::geometry::{
    boundary_indices, cell_square, contact_constant, neighborhood, CarpetSpec, LevelGeometry, Side,
};
use crate::graph::{build_blowup_graph, build_graph, energy, CellFunction, CellGraph};
use crate::rational::ratio_to_f64;
use crate::scalar::Real;
use crate::solver::{effective_resistance, solve_dirichlet, SolverConfig, SparseForm};
use crate::symmetry::SymmetryElement;
use crate::word::{level_size, Word};
use crate::Error;
use num::BigInt;
use num_traits::ToPrimitive;

/// Words of `W_n` whose cell lies inside the depth-`m` lower wall.
pub fn wall_words(spec: &CarpetSpec, m: u32, n: u32) -> Result<Vec<Word>, Error> {
    assert!(m >= 1 && m <= n);
    let geom = LevelGeometry::build(spec, n)?;
    Ok(wall_indices(&geom, m)
        .into_iter()
        .map(|i| geom.word_at(i))
        .collect())
}

/// Strip test on a prepared level geometry.
pub fn wall_indices(geom: &LevelGeometry, m: u32) -> Vec<usize> {
    // den / k^m, exact
    let mut strip = geom.den.clone();
    for _ in 0..m {
        strip /= BigInt::from(geom.k);
    }
    (0..geom.len())
        .filter(|&i| &geom.cells[i].corner.1 + &geom.side_units <= strip)
        .collect()
}

/// The lower-wall decomposition at one level.
#[derive(Debug, Clone)]
pub struct WallSets {
    pub m: u32,
    pub n: u32,
    /// Cells inside the depth-`m` wall.
    pub wall: Vec<Word>,
    /// Brick cells: inside the depth-1 wall but not the depth-2 wall.
    pub brick: Vec<Word>,
}

pub fn wall_sets(spec: &CarpetSpec, m: u32, n: u32) -> Result<WallSets, Error> {
    assert!(n >= 2, "brick cells need level >= 2");
    let geom = LevelGeometry::build(spec, n)?;
    let wall_m: Vec<usize> = wall_indices(&geom, m);
    let wall1: Vec<usize> = wall_indices(&geom, 1);
    let wall2: std::collections::BTreeSet<usize> = wall_indices(&geom, 2).into_iter().collect();
    let brick = wall1
        .iter()
        .copied()
        .filter(|i| !wall2.contains(i))
        .map(|i| geom.word_at(i))
        .collect();
    Ok(WallSets {
        m,
        n,
        wall: wall_m.into_iter().map(|i| geom.word_at(i)).collect(),
        brick,
    })
}

/// A harmonic minimizer together with its energy.
#[derive(Debug, Clone)]
pub struct HarmonicCross {
    pub values: CellFunction,
    pub energy: Real,
}

/// The side-to-side harmonic function: 0 on the left column, 1 on the right.
pub fn cross_minimizer(
    spec: &CarpetSpec,
    n: u32,
    cfg: &SolverConfig,
) -> Result<HarmonicCross, Error> {
    let graph = build_graph(spec, n, None)?;
    let form: SparseForm = SparseForm::laplacian(&graph);
    let geom = LevelGeometry::build(spec, n)?;
    let zeros: Vec<u32> = boundary_indices(&geom, Some(Side::Left))
        .into_iter()
        .map(|i| i as u32)
        .collect();
    let ones: Vec<u32> = boundary_indices(&geom, Some(Side::Right))
        .into_iter()
        .map(|i| i as u32)
        .collect();
    let sol = solve_dirichlet(&form, &[(zeros, 0.0), (ones, 1.0)], cfg)?;
    let e = form.quadratic(&sol.values);
    Ok(HarmonicCross { values: CellFunction::new(n, sol.values), energy: e })
}

/// The wall ring `A_n`: wall cells plus everything adjacent to them.
pub fn wall_ring_indices(graph: &CellGraph, geom: &LevelGeometry) -> Vec<u32> {
    let wall = wall_indices(geom, 1);
    let mut mark = vec![false; graph.n_vertices];
    for &i in &wall {
        mark[i] = true;
        for &v in graph.neighbors(i) {
            mark[v as usize] = true;
        }
    }
    (0..graph.n_vertices as u32).filter(|&v| mark[v as usize]).collect()
}

/// The annulus harmonic function: 1 on the top side, 0 on the wall ring.
pub fn annulus_minimizer(
    spec: &CarpetSpec,
    n: u32,
    cfg: &SolverConfig,
) -> Result<HarmonicCross, Error> {
    let graph = build_graph(spec, n, None)?;
    let form: SparseForm = SparseForm::laplacian(&graph);
    let geom = LevelGeometry::build(spec, n)?;
    let ring = wall_ring_indices(&graph, &geom);
    let top: Vec<u32> = boundary_indices(&geom, Some(Side::Top))
        .into_iter()
        .map(|i| i as u32)
        .collect();
    if top.iter().any(|v| ring.contains(v)) {
        return Err(Error::InvalidSpec(format!(
            "wall ring touches the top side at level {n}; the annulus problem degenerates"
        )));
    }
    let sol = solve_dirichlet(&form, &[(top, 1.0), (ring, 0.0)], cfg)?;
    let e = form.quadratic(&sol.values);
    Ok(HarmonicCross { values: CellFunction::new(n, sol.values), energy: e })
}

/// Bottom-row letters with their exact column offsets (`corner_x * k`).
fn bottom_letters(spec: &CarpetSpec) -> Result<Vec<(u16, u64)>, Error> {
    let geom = LevelGeometry::build(spec, 1)?;
    let mut out = Vec::new();
    for i in boundary_indices(&geom, Some(Side::Bottom)) {
        let pos = (&geom.cells[i].corner.0 / &geom.side_units)
            .to_u64()
            .expect("grid offset");
        out.push(((i + 1) as u16, pos));
    }
    out.sort_by_key(|&(_, pos)| pos);
    Ok(out)
}

/// The brick function `b_n` on the brick cells, assembled from the cross
/// minimizers of two consecutive levels and the annulus minimizer:
/// `b_n(i.w) = (h_n(i.w) - c_i) h'_{n-1}(w) + h_{n-1}(w)(1 - h'_{n-1}(w))/k + c_i`
/// with `c_i` the column offset of bottom cell `i`. The side columns carry
/// the exact values 0 and 1.
#[derive(Debug, Clone)]
pub struct BrickFunction {
    pub n: u32,
    pub words: Vec<Word>,
    pub values: Vec<Real>,
    /// Largest deviation of the raw assembly from the exact side values,
    /// before they are pinned.
    pub raw_boundary_error: Real,
    /// Energy of `b_n` on the restricted brick graph.
    pub energy: Real,
    /// `D_n(h_n)`, `D_{n-1}(h_{n-1})`, `D_{n-1}(h'_{n-1})`.
    pub ingredient_energies: [Real; 3],
    pub h_n: CellFunction,
    pub h_prev: CellFunction,
    pub annulus_prev: CellFunction,
}

pub fn brick_function(spec: &CarpetSpec, n: u32, cfg: &SolverConfig) -> Result<BrickFunction, Error> {
    assert!(n >= 2);
    let h_n = cross_minimizer(spec, n, cfg)?;
    let h_prev = cross_minimizer(spec, n - 1, cfg)?;
    let annulus_prev = annulus_minimizer(spec, n - 1, cfg)?;
    let k = spec.k as Real;

    let prev_geom = LevelGeometry::build(spec, n - 1)?;
    let prev_wall: std::collections::BTreeSet<usize> =
        wall_indices(&prev_geom, 1).into_iter().collect();
    let bottoms = bottom_letters(spec)?;

    let n_letters = spec.n_maps();
    let mut entries: Vec<(Word, Real)> = Vec::new();
    for &(letter, pos) in &bottoms {
        let c = pos as Real / k;
        for wi in 0..prev_geom.len() {
            if prev_wall.contains(&wi) {
                continue;
            }
            let w = prev_geom.word_at(wi);
            let full = Word::single(letter).concat(&w);
            let hv = h_n.values.values[full.index(n_letters)];
            let hp = annulus_prev.values.values[wi];
            let h2 = h_prev.values.values[wi];
            let val = (hv - c) * hp + h2 * (1.0 - hp) / k + c;
            entries.push((full, val));
        }
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let words: Vec<Word> = entries.iter().map(|(w, _)| w.clone()).collect();
    let mut values: Vec<Real> = entries.iter().map(|(_, v)| *v).collect();

    // exact side values
    let geom = LevelGeometry::of_words(spec, &words);
    let mut raw_boundary_error: Real = 0.0;
    for i in 0..geom.len() {
        if geom.touches_side(i, Side::Left) {
            raw_boundary_error = raw_boundary_error.max(values[i].abs());
            values[i] = 0.0;
        } else if geom.touches_side(i, Side::Right) {
            raw_boundary_error = raw_boundary_error.max((values[i] - 1.0).abs());
            values[i] = 1.0;
        }
    }

    let brick_graph = build_graph(spec, n, Some(&words))?;
    let e = energy(&brick_graph, &values);
    Ok(BrickFunction {
        n,
        words,
        values,
        raw_boundary_error,
        energy: e,
        ingredient_energies: [h_n.energy, h_prev.energy, annulus_prev.energy],
        h_n: h_n.values,
        h_prev: h_prev.values,
        annulus_prev: annulus_prev.values,
    })
}

/// Extension with linear boundary values: a level-`n` function agreeing with
/// the cell averages of `u(x) = x1` on the boundary words, built by gluing
/// scaled bricks along the lower wall, reflecting to the top wall, and using
/// the cross minimizer in between.
#[derive(Debug, Clone)]
pub struct LinearBoundary {
    pub n: u32,
    pub f: CellFunction,
    /// Max over boundary words of `|f - average of x1|`.
    pub boundary_max_error: Real,
    pub energy: Real,
}

pub fn linear_boundary_function(
    spec: &CarpetSpec,
    n: u32,
    cfg: &SolverConfig,
) -> Result<LinearBoundary, Error> {
    assert!(n >= 2);
    let n_letters = spec.n_maps();
    let h_n = cross_minimizer(spec, n, cfg)?;
    let mut g = h_n.values.values.clone();

    // bricks for levels 2..=n
    let mut bricks: Vec<Option<BrickFunction>> = vec![None; n as usize + 1];
    for level in 2..=n {
        bricks[level as usize] = Some(brick_function(spec, level, cfg)?);
    }

    let k = spec.k as Real;
    // glued bricks along the wall, scaled and offset per bottom-row prefix
    for l in 0..=n.saturating_sub(2) {
        let prefixes: Vec<(Word, u64)> = if l == 0 {
            vec![(Word::empty(), 0)]
        } else {
            let geom_l = LevelGeometry::build(spec, l)?;
            boundary_indices(&geom_l, Some(Side::Bottom))
                .into_iter()
                .map(|i| {
                    let pos = ((&geom_l.cells[i].corner.0) / &geom_l.side_units)
                        .to_u64()
                        .expect("grid offset");
                    (geom_l.word_at(i), pos)
                })
                .collect()
        };
        let brick = bricks[(n - l) as usize].as_ref().unwrap();
        let scale = k.powi(l as i32);
        for (prefix, e_w) in prefixes {
            for (word, val) in brick.words.iter().zip(&brick.values) {
                let full = prefix.concat(word);
                g[full.index(n_letters)] = (e_w as Real + val) / scale;
            }
        }
    }

    // the depth-n wall itself: the rescaled linear profile
    let geom = LevelGeometry::build(spec, n)?;
    let kn = k.powi(n as i32);
    for i in boundary_indices(&geom, Some(Side::Bottom)) {
        let pos = ((&geom.cells[i].corner.0) / &geom.side_units)
            .to_f64()
            .expect("grid offset");
        g[i] = pos / (kn - 1.0);
    }

    // reflect the whole lower wall to the top wall
    let wall1 = wall_indices(&geom, 1);
    for i in wall1 {
        let w = geom.word_at(i);
        let img = crate::geometry::symmetry_action(spec, SymmetryElement::Gv, &w)?;
        g[img.index(n_letters)] = g[i];
    }

    // affine rescale to match the averages of x1 exactly on the boundary
    let f: Vec<Real> = g.iter().map(|v| (kn - 1.0) / kn * v + 0.5 / kn).collect();

    let mut boundary_max_error: Real = 0.0;
    for i in 0..geom.len() {
        if geom.touches_outer_boundary(i) {
            let center = geom.square(i).center();
            let expect = ratio_to_f64(&center.x);
            boundary_max_error = boundary_max_error.max((f[i] - expect).abs());
        }
    }
    let graph = build_graph(spec, n, None)?;
    let e = energy(&graph, &f);
    Ok(LinearBoundary {
        n,
        f: CellFunction::new(n, f),
        boundary_max_error,
        energy: e,
    })
}

/// Separator around a word: 1 on the blowup of the cell, 0 beyond the blowup
/// of its two-step neighborhood, built as the clamped minimum of four
/// axis-aligned affine extensions.
#[derive(Debug, Clone)]
pub struct Separator {
    pub base: Word,
    pub depth: u32,
    pub values: Vec<Real>,
    pub energy: Real,
    pub pre_clamp_energy: Real,
    /// Worst shortfall below 1 of the raw minimum on the plateau.
    pub plateau_one_error: Real,
    /// Worst excess above 0 of the raw minimum on the far set.
    pub plateau_zero_error: Real,
}

pub fn separator_function(
    spec: &CarpetSpec,
    w: &Word,
    n: u32,
    cfg: &SolverConfig,
) -> Result<Separator, Error> {
    assert!(n >= 2, "separator needs extension depth >= 2");
    let m = w.level();
    assert!(m >= 1);
    let n_letters = spec.n_maps();
    let near = neighborhood(spec, w, 2)?;
    let base_count = level_size(n_letters, m).unwrap();
    if near.len() == base_count {
        return Err(Error::FarSetEmpty);
    }

    let graph = build_graph(spec, m + n, None)?;
    let lb = linear_boundary_function(spec, n, cfg)?;
    let ext1 = &lb.f.values;
    let span = level_size(n_letters, n).unwrap();
    // coordinate swap by the diagonal symmetry on level-n words
    let mut ext2 = vec![0.0; span];
    for ti in 0..span {
        let tau = Word::from_index(ti, n, n_letters);
        let img = crate::geometry::symmetry_action(spec, SymmetryElement::Gd1, &tau)?;
        ext2[ti] = ext1[img.index(n_letters)];
    }

    let c0 = contact_constant(spec)?.c0;
    let c1 = (2.0 as Real).sqrt() / c0;
    let c2 = 1.0 + 0.5 * c1;
    let wsq = cell_square(spec, w);
    let pc = wsq.center();
    let (px, py) = pc.to_f64();
    let km = (spec.k as Real).powi(m as i32);
    // gradients and constants of the four affine walls
    let dirs: [(Real, Real, Real); 4] = [
        (km * c1, 0.0, c2 - km * c1 * px),
        (-km * c1, 0.0, c2 + km * c1 * px),
        (0.0, km * c1, c2 - km * c1 * py),
        (0.0, -km * c1, c2 + km * c1 * py),
    ];

    let geom_m = LevelGeometry::build(spec, m)?;
    let den = geom_m.den.to_f64().expect("denominator range");
    let mut gmin = vec![Real::INFINITY; graph.n_vertices];
    for &(a, b, c) in &dirs {
        for wi in 0..geom_m.len() {
            let cell = &geom_m.cells[wi];
            let mm = cell.lin.affine().m;
            // local gradient = M^T (a,b) / k^m
            let glx = (mm[0][0] as Real * a + mm[1][0] as Real * b) / km;
            let gly = (mm[0][1] as Real * a + mm[1][1] as Real * b) / km;
            let tx = cell.trans.0.to_f64().unwrap() / den;
            let ty = cell.trans.1.to_f64().unwrap() / den;
            let beta = a * tx + b * ty + c;
            debug_assert!(glx == 0.0 || gly == 0.0);
            let base = wi * span;
            if gly == 0.0 {
                for ti in 0..span {
                    let v = glx * ext1[ti] + beta;
                    let slot = &mut gmin[base + ti];
                    if v < *slot {
                        *slot = v;
                    }
                }
            } else {
                for ti in 0..span {
                    let v = gly * ext2[ti] + beta;
                    let slot = &mut gmin[base + ti];
                    if v < *slot {
                        *slot = v;
                    }
                }
            }
        }
    }

    let near_set: std::collections::BTreeSet<&Word> = near.iter().collect();
    let mut plateau_one_error: Real = 0.0;
    let mut plateau_zero_error: Real = 0.0;
    let w_block = graph.block_of(w);
    for &v in &w_block {
        plateau_one_error = plateau_one_error.max(1.0 - gmin[v as usize]);
    }
    let mut far_blocks: Vec<u32> = Vec::new();
    for idx in 0..base_count {
        let other = Word::from_index(idx, m, n_letters);
        if !near_set.contains(&other) {
            far_blocks.extend(graph.block_of(&other));
        }
    }
    for &v in &far_blocks {
        plateau_zero_error = plateau_zero_error.max(gmin[v as usize]);
    }

    let pre_clamp_energy = energy(&graph, &gmin);
    let mut values: Vec<Real> = gmin.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    for &v in &w_block {
        values[v as usize] = 1.0;
    }
    for &v in &far_blocks {
        values[v as usize] = 0.0;
    }
    let e = energy(&graph, &values);
    Ok(Separator {
        base: w.clone(),
        depth: n,
        values,
        energy: e,
        pre_clamp_energy,
        plateau_one_error: plateau_one_error.max(0.0),
        plateau_zero_error: plateau_zero_error.max(0.0),
    })
}

/// Resistance of a straight chain of `l` bottom-row cells between the blowups
/// of its two end cells, within the chain's restricted graph. Independent of
/// the chain's level because bottom rows are grid translations.
pub fn chain_resistance(
    spec: &CarpetSpec,
    n: u32,
    l: u32,
    cfg: &SolverConfig,
) -> Result<Real, Error> {
    assert!(l >= 2);
    let k = spec.k;
    let base_level = if l <= k { 1 } else if l <= k * k { 2 } else {
        return Err(Error::Unsupported("chain longer than k^2".into()));
    };
    let geom = LevelGeometry::build(spec, base_level)?;
    let mut bottoms: Vec<(u64, Word)> = boundary_indices(&geom, Some(Side::Bottom))
        .into_iter()
        .map(|i| {
            let pos = ((&geom.cells[i].corner.0) / &geom.side_units)
                .to_u64()
                .expect("grid offset");
            (pos, geom.word_at(i))
        })
        .collect();
    bottoms.sort();
    if (l as usize) > bottoms.len() {
        return Err(Error::Unsupported("chain not constructible".into()));
    }
    let chain: Vec<Word> = bottoms[..l as usize].iter().map(|(_, w)| w.clone()).collect();
    let first = chain.first().unwrap().clone();
    let last = chain.last().unwrap().clone();
    let graph = build_blowup_graph(spec, &chain, n)?;
    let form: SparseForm = SparseForm::laplacian(&graph);
    let a = graph.block_of(&first);
    let b = graph.block_of(&last);
    effective_resistance(&form, &a, &b, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CarpetSpec;
    use crate::word::Word;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn sc3() -> CarpetSpec {
        CarpetSpec::sc3()
    }

    #[test]
    fn wall_words_are_prefixed_by_bottom_rows() {
        let spec = sc3();
        let w12 = wall_words(&spec, 1, 2).unwrap();
        assert_eq!(w12.len(), 24); // 3 bottom cells x 8 children
        for w in &w12 {
            assert!(w.letters()[0] <= 3, "{w}");
        }
        let w22 = wall_words(&spec, 2, 2).unwrap();
        assert_eq!(w22.len(), 9); // bottom rows of bottom cells
        for w in &w22 {
            assert!(w.letters()[0] <= 3 && w.letters()[1] <= 3, "{w}");
        }
    }

    #[test]
    fn wall_decomposition_identity() {
        // wall(1, n) = union over l of bottomrow_l . brick_{n-l}, plus the
        // depth-n wall, as exact disjoint word sets
        let spec = sc3();
        let n = 3;
        let mut assembled: Vec<Word> = Vec::new();
        for l in 0..=n - 2 {
            let prefixes: Vec<Word> = if l == 0 {
                vec![Word::empty()]
            } else {
                crate::geometry::boundary_words(&spec, l, Some(Side::Bottom)).unwrap()
            };
            let bricks = wall_sets(&spec, 1, n - l).unwrap().brick;
            for p in &prefixes {
                for b in &bricks {
                    assembled.push(p.concat(b));
                }
            }
        }
        assembled.extend(crate::geometry::boundary_words(&spec, n, Some(Side::Bottom)).unwrap());
        let before = assembled.len();
        assembled.sort();
        assembled.dedup();
        assert_eq!(before, assembled.len(), "pieces are disjoint");
        let wall = wall_words(&spec, 1, n).unwrap();
        assert_eq!(assembled, wall);
    }

    #[test]
    fn annulus_ring_on_sc3_level1() {
        let spec = sc3();
        let graph = build_graph(&spec, 1, None).unwrap();
        let geom = LevelGeometry::build(&spec, 1).unwrap();
        let ring = wall_ring_indices(&graph, &geom);
        // bottom row 1,2,3 plus neighbors 4 and 8 (indices 3 and 7)
        assert_eq!(ring, vec![0, 1, 2, 3, 7]);
    }

    #[test]
    fn cross_minimizer_level1_values() {
        let spec = sc3();
        let h = cross_minimizer(&spec, 1, &cfg()).unwrap();
        // 0 on the left column, 1 on the right, 1/2 in the middle by symmetry
        assert_eq!(h.values.values[6], 0.0);
        assert_eq!(h.values.values[2], 1.0);
        assert!((h.values.values[1] - 0.5).abs() < 1e-10);
        assert!((h.energy - 2.0).abs() < 1e-9);
    }

    #[test]
    fn brick_function_identities() {
        let spec = sc3();
        for n in [2u32, 3] {
            let b = brick_function(&spec, n, &cfg()).unwrap();
            assert!(b.raw_boundary_error <= 1e-9, "side columns: {}", b.raw_boundary_error);

            // top row of the brick agrees with the cross minimizer
            let geom = LevelGeometry::of_words(&spec, &b.words);
            let prev_geom = LevelGeometry::build(&spec, n - 1).unwrap();
            let graph_prev = build_graph(&spec, n - 1, None).unwrap();
            let ring: std::collections::BTreeSet<u32> =
                wall_ring_indices(&graph_prev, &prev_geom).into_iter().collect();
            let k = spec.k as Real;
            for (i, w) in b.words.iter().enumerate() {
                let suffix = w.suffix(1);
                let sfx_idx = suffix.index(spec.n_maps());
                // agreement with h_n where the annulus function is 1 (top side)
                if prev_geom.touches_side(sfx_idx, Side::Top) {
                    let hv = b.h_n.values[w.index(spec.n_maps())];
                    assert!((b.values[i] - hv).abs() <= 1e-9, "{w}");
                }
                // offset + scaled cross values on the wall ring
                if ring.contains(&(sfx_idx as u32)) {
                    let col = {
                        let sq = geom.square(i);
                        // column offset of the first letter
                        let c = crate::geometry::cell_square(&spec, &w.prefix(1));
                        let _ = sq;
                        crate::rational::ratio_to_f64(&c.x)
                    };
                    let expect = col + b.h_prev.values[sfx_idx] / k;
                    assert!((b.values[i] - expect).abs() <= 1e-9, "{w}");
                }
            }
            // measured constant of the energy bound stays sane
            let denom: Real = b.ingredient_energies.iter().sum();
            assert!(b.energy / denom < 1e3);
        }
    }

    #[test]
    fn linear_boundary_matches_cell_averages() {
        let spec = sc3();
        for n in [2u32, 3] {
            let lb = linear_boundary_function(&spec, n, &cfg()).unwrap();
            assert!(lb.boundary_max_error <= 1e-9, "n={n}: {}", lb.boundary_max_error);
            assert!(lb.energy.is_finite() && lb.energy > 0.0);
        }
    }

    #[test]
    fn linear_boundary_energy_tracks_sigma_scale() {
        // D_n(f_n) * sigma_n / N^n measured and stable across the two
        // largest levels tested
        let spec = sc3();
        let mut ratios = Vec::new();
        for n in [3u32, 4] {
            let lb = linear_boundary_function(&spec, n, &cfg()).unwrap();
            let sigma = crate::poincare::sigma_estimate(&spec, n, 1, &cfg()).unwrap().value;
            ratios.push(lb.energy * sigma / 8.0f64.powi(n as i32));
        }
        assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
        let q = ratios[0] / ratios[1];
        assert!(q < 3.0 && q > 1.0 / 3.0, "{ratios:?}");
    }

    #[test]
    fn linear_boundary_is_vertically_symmetric() {
        let spec = sc3();
        let lb = linear_boundary_function(&spec, 2, &cfg()).unwrap();
        let n_letters = spec.n_maps();
        for idx in 0..lb.f.values.len() {
            let w = Word::from_index(idx, 2, n_letters);
            let img = crate::geometry::symmetry_action(&spec, SymmetryElement::Gv, &w).unwrap();
            let v2 = lb.f.values[img.index(n_letters)];
            assert!((lb.f.values[idx] - v2).abs() <= 1e-9, "{w}");
        }
    }

    #[test]
    fn separator_plateaus_are_exact() {
        let spec = sc3();
        let w = Word(vec![2, 5]);
        let sep = separator_function(&spec, &w, 2, &cfg()).unwrap();
        assert!(sep.plateau_one_error <= 1e-9, "{}", sep.plateau_one_error);
        assert!(sep.plateau_zero_error <= 1e-9, "{}", sep.plateau_zero_error);
        // clamping never raises the energy
        assert!(sep.energy <= sep.pre_clamp_energy * (1.0 + 1e-12));
        // feasibility: the separator bounds the blowup resistance
        let r = crate::poincare::blowup_resistance(&spec, &w, 2, &cfg()).unwrap();
        assert!(r >= 1.0 / sep.energy - 1e-9, "r = {r}, 1/E = {}", 1.0 / sep.energy);
        // exact plateau values survive in the output
        let graph = build_graph(&spec, 4, None).unwrap();
        for &v in &graph.block_of(&w) {
            assert_eq!(sep.values[v as usize], 1.0);
        }
    }

    #[test]
    fn chain_resistance_monotone_and_matches_dense() {
        let spec = sc3();
        let r2 = chain_resistance(&spec, 1, 2, &cfg()).unwrap();
        let r3 = chain_resistance(&spec, 1, 3, &cfg()).unwrap();
        assert!(r3 >= r2 - 1e-10, "chain resistance grows with length");

        // dense oracle for the l = 2 chain
        let bottoms = crate::geometry::boundary_words(&spec, 1, Some(Side::Bottom)).unwrap();
        let chain = vec![bottoms[0].clone(), bottoms[1].clone()];
        let graph = build_blowup_graph(&spec, &chain, 1).unwrap();
        let form: SparseForm = SparseForm::laplacian(&graph);
        let a = graph.block_of(&chain[0]);
        let b = graph.block_of(&chain[1]);
        let dense = form.to_dense();
        // pin one block to 0 and the other to 1, solve the free part densely
        let pinned: std::collections::BTreeMap<usize, f64> = a
            .iter()
            .map(|&v| (v as usize, 0.0))
            .chain(b.iter().map(|&v| (v as usize, 1.0)))
            .collect();
        let free: Vec<usize> = (0..form.dim).filter(|v| !pinned.contains_key(v)).collect();
        let lff = dense.select_rows(free.iter()).select_columns(free.iter());
        let mut rhs = nalgebra::DVector::zeros(free.len());
        for (fi, &v) in free.iter().enumerate() {
            for (u, wgt) in form.row(v) {
                if let Some(val) = pinned.get(&u) {
                    rhs[fi] -= wgt * val;
                }
            }
        }
        let x = nalgebra::Cholesky::new(lff).unwrap().solve(&rhs);
        let mut full = vec![0.0; form.dim];
        for (&v, &val) in &pinned {
            full[v] = val;
        }
        for (fi, &v) in free.iter().enumerate() {
            full[v] = x[fi];
        }
        let oracle = 1.0 / form.quadratic(&full);
        assert!((r2 - oracle).abs() <= 1e-9 * oracle);
    }
}
