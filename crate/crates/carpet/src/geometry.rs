//! Exact geometry of unconstrained Sierpinski carpets.
//!
//! A carpet spec is an iterated function system of `N` similarities with
//! contraction `1/k`, each a square symmetry followed by a rational
//! translation. Everything here is decided in exact rational arithmetic:
//! which cells intersect, whether the contact is a segment or a single point,
//! segment lengths, validation witnesses. Floating point never enters.

use crate::rational::{format_ratio, ratio, ratio_int, Point, Ratio};
use crate::symmetry::{SymmetryElement, ALL_SYMMETRIES};
use crate::word::{level_size, Word};
use crate::Error;
use num::bigint::BigInt;
use num::{Integer, One, Signed, Zero};
use num_traits::ToPrimitive;
use std::collections::HashMap;

/// Hard cap on the number of cells materialized at one level.
pub const MAX_CELLS: usize = 20_000_000;

/// One similarity `x -> Γ(x)/k + t` of the system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Similarity {
    pub sym: SymmetryElement,
    pub tx: Ratio,
    pub ty: Ratio,
}

impl Similarity {
    pub fn translation(tx: Ratio, ty: Ratio) -> Self {
        Similarity { sym: SymmetryElement::Id, tx, ty }
    }

    /// Image of an axis-parallel square (exact).
    pub fn apply_square(&self, k: u32, sq: &Square) -> Square {
        let a = Point::new(sq.x.clone(), sq.y.clone());
        let b = Point::new(&sq.x + &sq.side, &sq.y + &sq.side);
        let ia = self.sym.apply(&a);
        let ib = self.sym.apply(&b);
        let kk = ratio_int(k as i64);
        let x = (ia.x.min(ib.x)) / &kk + &self.tx;
        let y = (ia.y.min(ib.y)) / &kk + &self.ty;
        Square { x, y, side: &sq.side / &kk }
    }
}

/// Axis-parallel square given by its lower-left corner and side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Square {
    pub x: Ratio,
    pub y: Ratio,
    pub side: Ratio,
}

impl Square {
    pub fn unit() -> Self {
        Square { x: Ratio::zero(), y: Ratio::zero(), side: Ratio::one() }
    }

    pub fn center(&self) -> Point {
        let half = &self.side / ratio_int(2);
        Point::new(&self.x + &half, &self.y + &half)
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        p.x >= self.x
            && p.y >= self.y
            && p.x <= &self.x + &self.side
            && p.y <= &self.y + &self.side
    }

    /// Containment as sets (closed squares).
    pub fn contains_square(&self, other: &Square) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && &other.x + &other.side <= &self.x + &self.side
            && &other.y + &other.side <= &self.y + &self.side
    }
}

/// Exact classification of the intersection of two equal-level cell squares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntersectKind {
    Empty,
    Point(Point),
    Segment { a: Point, b: Point, length: Ratio },
    /// Interiors overlap: never happens on a valid carpet, reported by
    /// validation with the offending pair.
    Overlap,
}

impl IntersectKind {
    pub fn touches(&self) -> bool {
        !matches!(self, IntersectKind::Empty)
    }
}

/// Sides of the unit square, numbered like the corners: 1 bottom, 2 right,
/// 3 top, 4 left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

pub const ALL_SIDES: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

impl Side {
    pub fn index(self) -> u32 {
        match self {
            Side::Bottom => 1,
            Side::Right => 2,
            Side::Top => 3,
            Side::Left => 4,
        }
    }

    pub fn from_index(i: u32) -> Option<Side> {
        match i {
            1 => Some(Side::Bottom),
            2 => Some(Side::Right),
            3 => Some(Side::Top),
            4 => Some(Side::Left),
            _ => None,
        }
    }
}

/// An unconstrained-carpet spec: `k`, and `N` similarities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarpetSpec {
    pub k: u32,
    pub maps: Vec<Similarity>,
}

/// Lower-left corner of the boundary map number `(k-1)*j + i` (1-based `i`).
pub fn boundary_map_corner(k: u32, j: u32, i: u32) -> (Ratio, Ratio) {
    let k_ = k as i64;
    let i_ = i as i64;
    match j {
        0 => (ratio(i_ - 1, k_), Ratio::zero()),
        1 => (ratio(k_ - 1, k_), ratio(i_ - 1, k_)),
        2 => (ratio(k_ - i_, k_), ratio(k_ - 1, k_)),
        3 => (Ratio::zero(), ratio(k_ - i_, k_)),
        _ => unreachable!(),
    }
}

impl CarpetSpec {
    pub fn n_maps(&self) -> u32 {
        self.maps.len() as u32
    }

    /// The standard Sierpinski carpet: k = 3, all eight boundary squares.
    pub fn sc3() -> CarpetSpec {
        CarpetSpec::boundary_ring(3)
    }

    /// The `4(k-1)` boundary maps of the canonical numbering, as a spec
    /// skeleton; callers append interior maps.
    pub fn boundary_ring(k: u32) -> CarpetSpec {
        let mut maps = Vec::new();
        for j in 0..4 {
            for i in 1..k {
                let (tx, ty) = boundary_map_corner(k, j, i);
                maps.push(Similarity { sym: SymmetryElement::Id, tx, ty });
            }
        }
        CarpetSpec { k, maps }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// Outcome of one validation condition.
#[derive(Debug, Clone)]
pub enum CheckResult {
    Pass,
    Fail(String),
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        matches!(self, CheckResult::Pass)
    }
}

/// Pass/fail per defining condition, each failure carrying a witness.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub structure: CheckResult,
    pub non_overlapping: CheckResult,
    pub connectivity: CheckResult,
    pub symmetry: CheckResult,
    pub boundary_included: CheckResult,
    pub boundary_numbering: CheckResult,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.all().iter().all(|(_, c)| c.passed())
    }

    pub fn all(&self) -> Vec<(&'static str, &CheckResult)> {
        vec![
            ("structure", &self.structure),
            ("non_overlapping", &self.non_overlapping),
            ("connectivity", &self.connectivity),
            ("symmetry", &self.symmetry),
            ("boundary_included", &self.boundary_included),
            ("boundary_numbering", &self.boundary_numbering),
        ]
    }

    pub fn first_failure(&self) -> Option<(&'static str, String)> {
        self.all().into_iter().find_map(|(name, c)| match c {
            CheckResult::Pass => None,
            CheckResult::Fail(w) => Some((name, w.clone())),
        })
    }
}

/// Common-denominator integer image of one cell: `F_w` has linear part
/// `M_w/k^n` and translation `trans/den`; the cell square has lower-left
/// `corner/den` and side `side_units/den`.
#[derive(Debug, Clone)]
pub struct CellGeom {
    pub corner: (BigInt, BigInt),
    pub lin: SymmetryElement,
    pub trans: (BigInt, BigInt),
}

/// All cells of one level (or of a restriction), over one exact common
/// denominator, in canonical word order.
#[derive(Debug, Clone)]
pub struct LevelGeometry {
    pub k: u32,
    pub n_letters: u32,
    pub level: u32,
    /// Words, present only for restricted sets; full levels are implicit
    /// (index `i` is `Word::from_index(i, level, n_letters)`).
    pub words: Option<Vec<Word>>,
    pub den: BigInt,
    pub side_units: BigInt,
    pub cells: Vec<CellGeom>,
}

fn linear_apply(sym: SymmetryElement, v: &(BigInt, BigInt)) -> (BigInt, BigInt) {
    let m = sym.affine().m;
    let row = |r: [i8; 2]| -> BigInt {
        let mut acc = BigInt::zero();
        if r[0] != 0 {
            acc += &v.0 * BigInt::from(r[0]);
        }
        if r[1] != 0 {
            acc += &v.1 * BigInt::from(r[1]);
        }
        acc
    };
    (row(m[0]), row(m[1]))
}

fn min_part(sym: SymmetryElement) -> (i8, i8) {
    let m = sym.affine().m;
    let f = |r: [i8; 2]| -> i8 {
        let s = r[0] + r[1];
        if s < 0 { s } else { 0 }
    };
    (f(m[0]), f(m[1]))
}

/// `b_Γ + min_part` vanishes for every element: the image corner of `F_w(□)`
/// is `trans + side_units * min_part + side_units * b = trans + corner_off`.
fn corner_offset(sym: SymmetryElement, side_units: &BigInt) -> (BigInt, BigInt) {
    let a = sym.affine();
    let (mx, my) = min_part(sym);
    (
        side_units * BigInt::from(a.b[0] + mx),
        side_units * BigInt::from(a.b[1] + my),
    )
}

/// Level-1 map data over denominator `D*k`: effective translation of
/// `x -> Γ(x)/k + t` and its linear part.
fn level_one_data(spec: &CarpetSpec, scale_d: &BigInt) -> Vec<CellGeom> {
    let k = BigInt::from(spec.k);
    let den1 = scale_d * &k;
    spec.maps
        .iter()
        .map(|m| {
            let a = m.sym.affine();
            // effective translation = b_Γ/k + t, in den1 units
            let tx = scale_d * BigInt::from(a.b[0]) + ratio_units(&m.tx, &den1);
            let ty = scale_d * BigInt::from(a.b[1]) + ratio_units(&m.ty, &den1);
            let off = corner_offset(m.sym, scale_d);
            CellGeom {
                corner: (&tx + off.0, &ty + off.1),
                lin: m.sym,
                trans: (tx, ty),
            }
        })
        .collect()
}

fn ratio_units(r: &Ratio, den: &BigInt) -> BigInt {
    crate::rational::ratio_in_units(r, den)
}

/// Least common multiple of all translation denominators.
fn common_scale(spec: &CarpetSpec) -> BigInt {
    let mut d = BigInt::one();
    for m in &spec.maps {
        d = d.lcm(m.tx.denom());
        d = d.lcm(m.ty.denom());
    }
    d
}

impl LevelGeometry {
    /// All cells of level `n`.
    pub fn build(spec: &CarpetSpec, n: u32) -> Result<LevelGeometry, Error> {
        let count = level_size(spec.n_maps(), n).filter(|&c| c <= MAX_CELLS);
        if count.is_none() {
            return Err(Error::LevelTooLarge { level: n });
        }
        let mut g = LevelGeometry::level_zero(spec);
        for _ in 0..n {
            g = g.extend(spec, None);
        }
        Ok(g)
    }

    /// Cells `p . W_m` for the given sorted prefixes, in (prefix, suffix)
    /// lexicographic order.
    pub fn build_blowup(
        spec: &CarpetSpec,
        prefixes: &[Word],
        m: u32,
    ) -> Result<LevelGeometry, Error> {
        let base_level = prefixes.first().map(|w| w.level()).unwrap_or(0);
        assert!(prefixes.iter().all(|w| w.level() == base_level));
        debug_assert!(prefixes.windows(2).all(|p| p[0] < p[1]), "prefixes must be sorted");
        let count = level_size(spec.n_maps(), m)
            .and_then(|c| c.checked_mul(prefixes.len().max(1)))
            .filter(|&c| c <= MAX_CELLS);
        if count.is_none() {
            return Err(Error::LevelTooLarge { level: base_level + m });
        }
        let mut g = LevelGeometry::of_words(spec, prefixes);
        for _ in 0..m {
            g = g.extend(spec, None);
        }
        Ok(g)
    }

    fn level_zero(spec: &CarpetSpec) -> LevelGeometry {
        let d = common_scale(spec);
        LevelGeometry {
            k: spec.k,
            n_letters: spec.n_maps(),
            level: 0,
            words: None,
            den: d.clone(),
            side_units: d.clone(),
            cells: vec![CellGeom {
                corner: (BigInt::zero(), BigInt::zero()),
                lin: SymmetryElement::Id,
                trans: (BigInt::zero(), BigInt::zero()),
            }],
        }
    }

    /// Geometry of an explicit word list (all the same level).
    pub fn of_words(spec: &CarpetSpec, words: &[Word]) -> LevelGeometry {
        let d = common_scale(spec);
        let level1 = level_one_data(spec, &d);
        let k = BigInt::from(spec.k);
        let level = words.first().map(|w| w.level()).unwrap_or(0);
        let mut den = d.clone();
        for _ in 0..level {
            den = &den * &k;
        }
        let side_units = d.clone();
        let cells = words
            .iter()
            .map(|w| {
                // fold letters left to right on (lin, trans in current den units)
                let mut lin = SymmetryElement::Id;
                let mut trans = (BigInt::zero(), BigInt::zero());
                for &letter in w.letters() {
                    let li = &level1[(letter - 1) as usize];
                    let rot = linear_apply(lin, &li.trans);
                    trans = (&trans.0 * &k + rot.0, &trans.1 * &k + rot.1);
                    lin = lin.compose(spec.maps[(letter - 1) as usize].sym);
                }
                // trans is now in units of D*k^level = den
                let off = corner_offset(lin, &side_units);
                CellGeom {
                    corner: (&trans.0 + off.0, &trans.1 + off.1),
                    lin,
                    trans,
                }
            })
            .collect();
        LevelGeometry {
            k: spec.k,
            n_letters: spec.n_maps(),
            level,
            words: Some(words.to_vec()),
            den,
            side_units,
            cells,
        }
    }

    /// Appends one letter to every cell (children in letter order).
    fn extend(&self, spec: &CarpetSpec, keep: Option<&[bool]>) -> LevelGeometry {
        let d = common_scale(spec);
        let level1 = level_one_data(spec, &d);
        let k = BigInt::from(spec.k);
        let den = &self.den * &k;
        let mut cells = Vec::with_capacity(self.cells.len() * spec.maps.len());
        let mut words = self.words.as_ref().map(|ws| {
            Vec::with_capacity(ws.len() * spec.maps.len())
        });
        for (ci, cell) in self.cells.iter().enumerate() {
            if let Some(mask) = keep {
                if !mask[ci] {
                    continue;
                }
            }
            for (li, l1) in level1.iter().enumerate() {
                let rot = linear_apply(cell.lin, &l1.trans);
                let trans = (&cell.trans.0 * &k + rot.0, &cell.trans.1 * &k + rot.1);
                let lin = cell.lin.compose(spec.maps[li].sym);
                let off = corner_offset(lin, &self.side_units);
                cells.push(CellGeom {
                    corner: (&trans.0 + off.0, &trans.1 + off.1),
                    lin,
                    trans,
                });
                if let Some(ws) = words.as_mut() {
                    ws.push(self.words.as_ref().unwrap()[ci].push((li + 1) as u16));
                }
            }
        }
        LevelGeometry {
            k: self.k,
            n_letters: self.n_letters,
            level: self.level + 1,
            words,
            den,
            side_units: self.side_units.clone(),
            cells,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
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

    /// Exact rational square of cell `idx`.
    pub fn square(&self, idx: usize) -> Square {
        let c = &self.cells[idx];
        let den = Ratio::from_integer(self.den.clone());
        Square {
            x: Ratio::from_integer(c.corner.0.clone()) / den.clone(),
            y: Ratio::from_integer(c.corner.1.clone()) / den.clone(),
            side: Ratio::from_integer(self.side_units.clone()) / den,
        }
    }

    /// Exact intersection classification of two cells of this level.
    pub fn intersect(&self, i: usize, j: usize) -> IntersectKind {
        let a = &self.cells[i];
        let b = &self.cells[j];
        let s = &self.side_units;
        let lo_x = (&a.corner.0).max(&b.corner.0).clone();
        let hi_x = (&a.corner.0 + s).min(&b.corner.0 + s);
        let lo_y = (&a.corner.1).max(&b.corner.1).clone();
        let hi_y = (&a.corner.1 + s).min(&b.corner.1 + s);
        let ox = &hi_x - &lo_x;
        let oy = &hi_y - &lo_y;
        if ox.is_negative() || oy.is_negative() {
            return IntersectKind::Empty;
        }
        let den = Ratio::from_integer(self.den.clone());
        let pt = |x: &BigInt, y: &BigInt| {
            Point::new(
                Ratio::from_integer(x.clone()) / den.clone(),
                Ratio::from_integer(y.clone()) / den.clone(),
            )
        };
        match (ox.is_zero(), oy.is_zero()) {
            (true, true) => IntersectKind::Point(pt(&lo_x, &lo_y)),
            (true, false) => IntersectKind::Segment {
                a: pt(&lo_x, &lo_y),
                b: pt(&lo_x, &hi_y),
                length: Ratio::from_integer(oy) / den,
            },
            (false, true) => IntersectKind::Segment {
                a: pt(&lo_x, &lo_y),
                b: pt(&hi_x, &lo_y),
                length: Ratio::from_integer(ox) / den,
            },
            (false, false) => IntersectKind::Overlap,
        }
    }

    /// Squared Euclidean distance between two cells' squares (zero if they touch).
    pub fn distance_squared(&self, i: usize, j: usize) -> Ratio {
        let a = &self.cells[i];
        let b = &self.cells[j];
        let s = &self.side_units;
        let gap = |p: &BigInt, q: &BigInt| -> BigInt {
            let d = if p > q { p - q } else { q - p };
            if &d > s { d - s } else { BigInt::zero() }
        };
        let dx = gap(&a.corner.0, &b.corner.0);
        let dy = gap(&a.corner.1, &b.corner.1);
        let den2 = Ratio::from_integer(&self.den * &self.den);
        Ratio::from_integer(&dx * &dx + &dy * &dy) / den2
    }

    /// Adjacent unordered pairs `(i, j)`, `i < j`, via exact spatial hashing
    /// of the corners. Candidates come from the 3x3 bucket neighborhood and
    /// are confirmed by the exact corner comparison.
    pub fn adjacency(&self) -> Vec<(u32, u32)> {
        let s = &self.side_units;
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        let key = |c: &CellGeom| -> (i64, i64) {
            let bx = (&c.corner.0).div_floor(s);
            let by = (&c.corner.1).div_floor(s);
            (bx.to_i64().expect("bucket overflow"), by.to_i64().expect("bucket overflow"))
        };
        for (i, c) in self.cells.iter().enumerate() {
            buckets.entry(key(c)).or_default().push(i as u32);
        }
        let touch = |a: &CellGeom, b: &CellGeom| -> bool {
            let dx = if a.corner.0 > b.corner.0 {
                &a.corner.0 - &b.corner.0
            } else {
                &b.corner.0 - &a.corner.0
            };
            if &dx > s {
                return false;
            }
            let dy = if a.corner.1 > b.corner.1 {
                &a.corner.1 - &b.corner.1
            } else {
                &b.corner.1 - &a.corner.1
            };
            &dy <= s
        };
        let mut edges = Vec::new();
        for (i, c) in self.cells.iter().enumerate() {
            let (bx, by) = key(c);
            for nx in bx - 1..=bx + 1 {
                for ny in by - 1..=by + 1 {
                    if let Some(list) = buckets.get(&(nx, ny)) {
                        for &j in list {
                            if (j as usize) > i && touch(c, &self.cells[j as usize]) {
                                edges.push((i as u32, j));
                            }
                        }
                    }
                }
            }
        }
        edges.sort_unstable();
        edges
    }

    /// Quadratic-scan adjacency; the independent check for the hash build.
    pub fn adjacency_brute_force(&self) -> Vec<(u32, u32)> {
        let mut edges = Vec::new();
        for i in 0..self.cells.len() {
            for j in i + 1..self.cells.len() {
                if self.intersect(i, j).touches() {
                    edges.push((i as u32, j as u32));
                }
            }
        }
        edges
    }

    /// Does cell `idx` touch the given side of the unit square?
    pub fn touches_side(&self, idx: usize, side: Side) -> bool {
        let c = &self.cells[idx];
        match side {
            Side::Bottom => c.corner.1.is_zero(),
            Side::Left => c.corner.0.is_zero(),
            Side::Right => &c.corner.0 + &self.side_units == self.den,
            Side::Top => &c.corner.1 + &self.side_units == self.den,
        }
    }

    pub fn touches_outer_boundary(&self, idx: usize) -> bool {
        ALL_SIDES.iter().any(|&s| self.touches_side(idx, s))
    }
}

/// Exact square `F_w(□)`.
pub fn cell_square(spec: &CarpetSpec, w: &Word) -> Square {
    let mut sq = Square::unit();
    for &letter in w.letters().iter().rev() {
        let m = &spec.maps[(letter - 1) as usize];
        sq = m.apply_square(spec.k, &sq);
    }
    sq
}

/// Exact classification of `F_w(□) ∩ F_w'(□)` for equal-level words.
pub fn cells_intersect(spec: &CarpetSpec, w: &Word, w2: &Word) -> Result<IntersectKind, Error> {
    if w.level() != w2.level() {
        return Err(Error::LevelMismatch { left: w.level(), right: w2.level() });
    }
    let g = LevelGeometry::of_words(spec, &{
        let mut v = vec![w.clone(), w2.clone()];
        v.sort();
        v
    });
    Ok(g.intersect(0, 1))
}

/// The contact constant `c0`: half of `min(1/2, k * min distance between
/// disjoint level-1 cells)`. Distances between disjoint cells are realized on
/// square boundaries, which lie in the carpet, so the square distance is the
/// cell distance. Returns the exact square of `c0` along with a rounded value.
#[derive(Debug, Clone)]
pub struct ContactConstant {
    pub c0_squared: Ratio,
    pub c0: f64,
    /// Disjoint level-1 pair achieving the minimum, if any pair is disjoint.
    pub achieved_by: Option<(u16, u16)>,
}

pub fn contact_constant(spec: &CarpetSpec) -> Result<ContactConstant, Error> {
    let g = LevelGeometry::build(spec, 1)?;
    let mut best: Option<(Ratio, (u16, u16))> = None;
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            if g.intersect(i, j).touches() {
                continue;
            }
            let d2 = g.distance_squared(i, j);
            if best.as_ref().map_or(true, |(b, _)| d2 < *b) {
                best = Some((d2, (i as u16 + 1, j as u16 + 1)));
            }
        }
    }
    let quarter = ratio(1, 4);
    let k2 = ratio_int((spec.k * spec.k) as i64);
    let (c0p_sq, achieved_by) = match best {
        Some((d2, pair)) => {
            let scaled = k2 * d2;
            if scaled < quarter {
                (scaled, Some(pair))
            } else {
                (quarter, None)
            }
        }
        None => (quarter, None),
    };
    let c0_squared = c0p_sq / ratio_int(4);
    let c0 = crate::rational::ratio_to_f64(&c0_squared).sqrt();
    Ok(ContactConstant { c0_squared, c0, achieved_by })
}

/// Words of level `n` whose cell touches the given side (or any side).
pub fn boundary_words(spec: &CarpetSpec, n: u32, side: Option<Side>) -> Result<Vec<Word>, Error> {
    let g = LevelGeometry::build(spec, n)?;
    Ok(boundary_indices(&g, side).into_iter().map(|i| g.word_at(i)).collect())
}

pub fn boundary_indices(g: &LevelGeometry, side: Option<Side>) -> Vec<usize> {
    (0..g.len())
        .filter(|&i| match side {
            Some(s) => g.touches_side(i, s),
            None => g.touches_outer_boundary(i),
        })
        .collect()
}

/// All words reachable from `w` by at most `radius` adjacency steps
/// (including `w` itself).
pub fn neighborhood(spec: &CarpetSpec, w: &Word, radius: u32) -> Result<Vec<Word>, Error> {
    assert!(w.level() >= 1, "neighborhood needs a level >= 1 word");
    assert!(radius >= 1);
    let g = LevelGeometry::build(spec, w.level())?;
    let edges = g.adjacency();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); g.len()];
    for &(a, b) in &edges {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }
    let start = g.index_of(w).expect("word letters out of range");
    let mut dist = vec![u32::MAX; g.len()];
    dist[start] = 0;
    let mut frontier = vec![start as u32];
    for d in 1..=radius {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in &adj[u as usize] {
                if dist[v as usize] == u32::MAX {
                    dist[v as usize] = d;
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    Ok((0..g.len())
        .filter(|&i| dist[i] != u32::MAX)
        .map(|i| g.word_at(i))
        .collect())
}

/// The word `w'` with `F_w'(□) = Γ(F_w(□))`, computed letterwise: at each
/// step the image square identifies the letter, and the residual isometry
/// carried into the sub-cell is `Γ_j^{-1} Γ Γ_i`.
pub fn symmetry_action(spec: &CarpetSpec, gamma: SymmetryElement, w: &Word) -> Result<Word, Error> {
    let d = common_scale(spec);
    let level1 = level_one_data(spec, &d);
    let den1 = &d * BigInt::from(spec.k);
    let mut corner_to_letter: HashMap<(BigInt, BigInt), u16> = HashMap::new();
    for (i, c) in level1.iter().enumerate() {
        corner_to_letter.insert(c.corner.clone(), (i + 1) as u16);
    }
    let mut g = gamma;
    let mut letters = Vec::with_capacity(w.letters().len());
    for &letter in w.letters() {
        let cell = &level1[(letter - 1) as usize];
        let img = g.apply_square_scaled(&cell.corner.0, &cell.corner.1, &d, &den1);
        let j = *corner_to_letter.get(&img).ok_or_else(|| {
            Error::InvalidSpec(format!(
                "symmetry {} maps cell {} outside the square multiset",
                g.name(),
                letter
            ))
        })?;
        letters.push(j);
        let gj = spec.maps[(j - 1) as usize].sym;
        let gi = spec.maps[(letter - 1) as usize].sym;
        g = gj.inverse().compose(g).compose(gi);
    }
    Ok(Word(letters))
}

/// Checks the four defining conditions plus structural sanity and the
/// canonical boundary numbering.
pub fn validate(spec: &CarpetSpec) -> ValidationReport {
    let k = spec.k;
    let n = spec.n_maps();

    let structure = {
        let mut problems = Vec::new();
        if k < 3 {
            problems.push(format!("k = {k} < 3"));
        }
        if n < 4 * (k - 1) || n > k * k - 1 {
            problems.push(format!("N = {n} outside [4(k-1), k^2-1] = [{}, {}]", 4 * (k - 1), k * k - 1));
        }
        let hi = ratio((k as i64) - 1, k as i64);
        for (i, m) in spec.maps.iter().enumerate() {
            let ok = !m.tx.is_negative()
                && !m.ty.is_negative()
                && m.tx <= hi
                && m.ty <= hi;
            if !ok {
                problems.push(format!("map {} translation outside [0, 1-1/k]^2", i + 1));
                break;
            }
        }
        if problems.is_empty() {
            CheckResult::Pass
        } else {
            CheckResult::Fail(problems.join("; "))
        }
    };
    // geometric checks still run when only the map count or a translation is
    // off; they need at least one map and k >= 3 to make sense
    if spec.maps.is_empty() || k < 3 {
        let fail = CheckResult::Fail("skipped: no usable geometry".into());
        return ValidationReport {
            structure,
            non_overlapping: fail.clone(),
            connectivity: fail.clone(),
            symmetry: fail.clone(),
            boundary_included: fail.clone(),
            boundary_numbering: fail,
        };
    }

    let g = LevelGeometry::build(spec, 1).expect("level 1 always fits");

    let non_overlapping = {
        let mut witness = None;
        'outer: for i in 0..g.len() {
            for j in i + 1..g.len() {
                if matches!(g.intersect(i, j), IntersectKind::Overlap) {
                    witness = Some((i + 1, j + 1));
                    break 'outer;
                }
            }
        }
        match witness {
            None => CheckResult::Pass,
            Some((i, j)) => CheckResult::Fail(format!("cells {i} and {j} overlap with interior area")),
        }
    };

    let connectivity = {
        let edges = g.adjacency_brute_force();
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); g.len()];
        for &(a, b) in &edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        let mut seen = vec![false; g.len()];
        let mut stack = vec![0u32];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u as usize] {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    stack.push(v);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            None => CheckResult::Pass,
            Some(i) => CheckResult::Fail(format!("cell {} unreachable from cell 1", i + 1)),
        }
    };

    let symmetry = {
        let mut corners: Vec<(BigInt, BigInt)> = g.cells.iter().map(|c| c.corner.clone()).collect();
        corners.sort();
        let mut witness = None;
        for gamma in ALL_SYMMETRIES {
            let mut imgs: Vec<(BigInt, BigInt)> = g
                .cells
                .iter()
                .map(|c| gamma.apply_square_scaled(&c.corner.0, &c.corner.1, &g.side_units, &g.den))
                .collect();
            imgs.sort();
            if imgs != corners {
                let missing = imgs.iter().find(|p| corners.binary_search(p).is_err());
                witness = Some(format!(
                    "square multiset not invariant under {}{}",
                    gamma.name(),
                    missing
                        .map(|p| format!(
                            ", image corner ({}, {})/{} has no preimage",
                            p.0, p.1, g.den
                        ))
                        .unwrap_or_default()
                ));
                break;
            }
        }
        match witness {
            None => CheckResult::Pass,
            Some(w) => CheckResult::Fail(w),
        }
    };

    let boundary_included = {
        // bottom-touching cells must cover [0,1] x {0}
        let mut intervals: Vec<(BigInt, BigInt)> = (0..g.len())
            .filter(|&i| g.touches_side(i, Side::Bottom))
            .map(|i| {
                let c = &g.cells[i];
                (c.corner.0.clone(), &c.corner.0 + &g.side_units)
            })
            .collect();
        intervals.sort();
        let mut cursor = BigInt::zero();
        let mut gap = None;
        for (a, b) in &intervals {
            if a > &cursor {
                gap = Some((cursor.clone(), a.clone()));
                break;
            }
            if b > &cursor {
                cursor = b.clone();
            }
        }
        if gap.is_none() && cursor < g.den {
            gap = Some((cursor.clone(), g.den.clone()));
        }
        match gap {
            None => CheckResult::Pass,
            Some((a, b)) => CheckResult::Fail(format!(
                "bottom edge uncovered on ({}, {}) / {}",
                a, b, g.den
            )),
        }
    };

    let boundary_numbering = {
        let mut witness = None;
        'outer: for j in 0..4u32 {
            for i in 1..k {
                let idx = ((k - 1) * j + i - 1) as usize;
                let (tx, ty) = boundary_map_corner(k, j, i);
                if idx >= spec.maps.len() {
                    witness = Some(format!("missing boundary map {}", idx + 1));
                    break 'outer;
                }
                let m = &spec.maps[idx];
                if m.sym != SymmetryElement::Id || m.tx != tx || m.ty != ty {
                    witness = Some(format!(
                        "map {} should be the translation to ({}, {})",
                        idx + 1,
                        format_ratio(&tx),
                        format_ratio(&ty)
                    ));
                    break 'outer;
                }
            }
        }
        match witness {
            None => CheckResult::Pass,
            Some(w) => CheckResult::Fail(w),
        }
    };

    ValidationReport {
        structure,
        non_overlapping,
        connectivity,
        symmetry,
        boundary_included,
        boundary_numbering,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{parse_ratio, zero};

    #[test]
    fn sc3_passes_all_checks() {
        let report = CarpetSpec::sc3().validate();
        assert!(report.ok(), "{:?}", report.first_failure());
    }

    #[test]
    fn sc3_with_boundary_square_removed_fails_cover_check() {
        let mut spec = CarpetSpec::sc3();
        // removing the second bottom map leaves (1/3, 2/3) uncovered
        spec.maps.remove(1);
        let report = spec.validate();
        assert!(!report.ok());
        match &report.boundary_included {
            CheckResult::Fail(w) => assert!(w.contains("uncovered"), "{w}"),
            CheckResult::Pass => panic!("cover check should fail"),
        }
    }

    #[test]
    fn empty_word_is_unit_square() {
        let sq = cell_square(&CarpetSpec::sc3(), &Word::empty());
        assert_eq!(sq, Square::unit());
    }

    #[test]
    fn sc3_first_map_is_corner_square() {
        let sq = cell_square(&CarpetSpec::sc3(), &Word::single(1));
        assert_eq!(sq.x, zero());
        assert_eq!(sq.y, zero());
        assert_eq!(sq.side, ratio(1, 3));
    }

    #[test]
    fn sc3_level1_edge_and_point_contacts() {
        let spec = CarpetSpec::sc3();
        // cells at (0,0) and (1/3,0): maps 1 and 2
        let kind = cells_intersect(&spec, &Word::single(1), &Word::single(2)).unwrap();
        match kind {
            IntersectKind::Segment { length, .. } => assert_eq!(length, ratio(1, 3)),
            other => panic!("expected segment, got {other:?}"),
        }
        // cells at (1/3,0) and (2/3,1/3): maps 2 and 4 touch at one point
        let kind = cells_intersect(&spec, &Word::single(2), &Word::single(4)).unwrap();
        match kind {
            IntersectKind::Point(p) => {
                assert_eq!(p, Point::new(ratio(2, 3), ratio(1, 3)));
            }
            other => panic!("expected point, got {other:?}"),
        }
    }

    #[test]
    fn level_mismatch_is_an_error() {
        let spec = CarpetSpec::sc3();
        let e = cells_intersect(&spec, &Word::single(1), &Word(vec![1, 1]));
        assert!(e.is_err());
    }

    #[test]
    fn sc3_level1_has_twelve_edges_hash_and_brute_force() {
        let g = LevelGeometry::build(&CarpetSpec::sc3(), 1).unwrap();
        let hash = g.adjacency();
        let brute = g.adjacency_brute_force();
        assert_eq!(hash, brute);
        assert_eq!(hash.len(), 12);
    }

    #[test]
    fn sc3_level2_hash_matches_brute_force() {
        let g = LevelGeometry::build(&CarpetSpec::sc3(), 2).unwrap();
        assert_eq!(g.adjacency(), g.adjacency_brute_force());
    }

    #[test]
    fn sc3_contact_constant_is_one_quarter() {
        let c = contact_constant(&CarpetSpec::sc3()).unwrap();
        assert_eq!(c.c0_squared, ratio(1, 16));
        assert!(c.achieved_by.is_none(), "capped at 1/2 since min distance is 1/3");
    }

    #[test]
    fn sc3_boundary_words() {
        let spec = CarpetSpec::sc3();
        let left = boundary_words(&spec, 1, Some(Side::Left)).unwrap();
        assert_eq!(left.len(), 3);
        let all0 = boundary_words(&spec, 0, None).unwrap();
        assert_eq!(all0, vec![Word::empty()]);
        let b2 = boundary_words(&spec, 2, None).unwrap();
        assert_eq!(b2.len(), 32);
    }

    #[test]
    fn sc3_neighborhoods() {
        let spec = CarpetSpec::sc3();
        let corner = neighborhood(&spec, &Word::single(1), 1).unwrap();
        assert_eq!(corner.len(), 3); // self + ring neighbors 2 and 8
        for w in 1..=8u16 {
            let full = neighborhood(&spec, &Word::single(w), 4).unwrap();
            assert_eq!(full.len(), 8, "graph diameter is at most 4");
        }
    }

    #[test]
    fn symmetry_action_on_sc3() {
        let spec = CarpetSpec::sc3();
        // identity fixes words
        let w = Word(vec![3, 5, 1]);
        assert_eq!(symmetry_action(&spec, SymmetryElement::Id, &w).unwrap(), w);
        // Gv maps the corner cell at (0,0) to the cell at (0, 2/3): map 7
        let img = symmetry_action(&spec, SymmetryElement::Gv, &Word::single(1)).unwrap();
        assert_eq!(img, Word::single(7));
        // involution
        let back = symmetry_action(&spec, SymmetryElement::Gv, &img).unwrap();
        assert_eq!(back, Word::single(1));
    }

    #[test]
    fn symmetry_action_preserves_contact_kind() {
        let spec = CarpetSpec::sc3();
        let g = LevelGeometry::build(&spec, 2).unwrap();
        let pairs = [(0usize, 1usize), (3, 9), (10, 17)];
        for gamma in ALL_SYMMETRIES {
            for &(i, j) in &pairs {
                let (wi, wj) = (g.word_at(i), g.word_at(j));
                let a = cells_intersect(&spec, &wi, &wj).unwrap();
                let gi = symmetry_action(&spec, gamma, &wi).unwrap();
                let gj = symmetry_action(&spec, gamma, &wj).unwrap();
                let b = cells_intersect(&spec, &gi, &gj).unwrap();
                let same = match (&a, &b) {
                    (IntersectKind::Empty, IntersectKind::Empty) => true,
                    (IntersectKind::Point(_), IntersectKind::Point(_)) => true,
                    (
                        IntersectKind::Segment { length: l1, .. },
                        IntersectKind::Segment { length: l2, .. },
                    ) => l1 == l2,
                    _ => false,
                };
                assert!(same, "{gamma:?} {wi} {wj}: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn nested_cells_stay_inside_parents() {
        let spec = CarpetSpec::sc3();
        for idx in 0..8u16 {
            let parent = cell_square(&spec, &Word::single(idx + 1));
            for tail in 1..=8u16 {
                let child = cell_square(&spec, &Word(vec![idx + 1, tail]));
                assert!(parent.contains_square(&child));
            }
        }
    }

    #[test]
    fn example_slide_cell_square() {
        // k=7 slide family member: F_25 at z = 1/28 maps the square to
        // [9/28, 13/28] x [1/7, 2/7]
        let z = parse_ratio("1/28").unwrap();
        let spec = crate::metric::sliding_family_spec(&z).unwrap();
        let sq = cell_square(&spec, &Word::single(25));
        assert_eq!(sq.x, ratio(9, 28));
        assert_eq!(sq.y, ratio(1, 7));
        assert_eq!(sq.side, ratio(1, 7));
        let kind = cells_intersect(&spec, &Word::single(25), &Word::single(3)).unwrap();
        match kind {
            IntersectKind::Segment { length, .. } => assert_eq!(length, ratio(3, 28)),
            other => panic!("expected segment, got {other:?}"),
        }
    }
}
