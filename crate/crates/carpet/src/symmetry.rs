//! The eight self-isometries of the unit square.
//!
//! `Gv` is the reflection (x1,x2) -> (x1,1-x2), `Gh` -> (1-x1,x2), `Gd1` the
//! main-diagonal swap, `Gd2` the anti-diagonal, and `Gr1..Gr3` the
//! counterclockwise rotations by 90/180/270 degrees about the center.
//! Every element is an affine map `x -> M x + b` with a signed permutation
//! matrix `M`; the eight linear parts are pairwise distinct, so an element is
//! recovered from `M` alone.

use crate::rational::{Point, Ratio};
use num::BigInt;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryElement {
    Id,
    #[serde(rename = "v")]
    Gv,
    #[serde(rename = "h")]
    Gh,
    #[serde(rename = "d1")]
    Gd1,
    #[serde(rename = "d2")]
    Gd2,
    #[serde(rename = "r1")]
    Gr1,
    #[serde(rename = "r2")]
    Gr2,
    #[serde(rename = "r3")]
    Gr3,
}

pub const ALL_SYMMETRIES: [SymmetryElement; 8] = [
    SymmetryElement::Id,
    SymmetryElement::Gv,
    SymmetryElement::Gh,
    SymmetryElement::Gd1,
    SymmetryElement::Gd2,
    SymmetryElement::Gr1,
    SymmetryElement::Gr2,
    SymmetryElement::Gr3,
];

/// Integer affine data: x -> M x + b with M entries in {-1,0,1}, b in {0,1}^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Affine {
    pub m: [[i8; 2]; 2],
    pub b: [i8; 2],
}

impl SymmetryElement {
    pub fn affine(self) -> Affine {
        use SymmetryElement::*;
        match self {
            Id => Affine { m: [[1, 0], [0, 1]], b: [0, 0] },
            Gv => Affine { m: [[1, 0], [0, -1]], b: [0, 1] },
            Gh => Affine { m: [[-1, 0], [0, 1]], b: [1, 0] },
            Gd1 => Affine { m: [[0, 1], [1, 0]], b: [0, 0] },
            Gd2 => Affine { m: [[0, -1], [-1, 0]], b: [1, 1] },
            Gr1 => Affine { m: [[0, -1], [1, 0]], b: [1, 0] },
            Gr2 => Affine { m: [[-1, 0], [0, -1]], b: [1, 1] },
            Gr3 => Affine { m: [[0, 1], [-1, 0]], b: [0, 1] },
        }
    }

    fn from_linear(m: [[i8; 2]; 2]) -> SymmetryElement {
        for g in ALL_SYMMETRIES {
            if g.affine().m == m {
                return g;
            }
        }
        unreachable!("not a signed permutation matrix: {m:?}")
    }

    /// Group composition: `self.compose(rhs)` is the map x -> self(rhs(x)).
    pub fn compose(self, rhs: SymmetryElement) -> SymmetryElement {
        let a = self.affine();
        let c = rhs.affine();
        let mut m = [[0i8; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a.m[i][0] * c.m[0][j] + a.m[i][1] * c.m[1][j];
            }
        }
        let out = Self::from_linear(m);
        debug_assert_eq!(
            {
                let b = [
                    a.m[0][0] * c.b[0] + a.m[0][1] * c.b[1] + a.b[0],
                    a.m[1][0] * c.b[0] + a.m[1][1] * c.b[1] + a.b[1],
                ];
                b
            },
            out.affine().b,
            "affine part drifted out of the group"
        );
        out
    }

    pub fn inverse(self) -> SymmetryElement {
        for g in ALL_SYMMETRIES {
            if self.compose(g) == SymmetryElement::Id {
                return g;
            }
        }
        unreachable!()
    }

    /// Exact image of a point of the unit square.
    pub fn apply(self, p: &Point) -> Point {
        let a = self.affine();
        let lin = |row: [i8; 2], bi: i8| -> Ratio {
            let mut v = Ratio::from_integer(BigInt::from(bi));
            if row[0] != 0 {
                v += &p.x * Ratio::from_integer(BigInt::from(row[0]));
            }
            if row[1] != 0 {
                v += &p.y * Ratio::from_integer(BigInt::from(row[1]));
            }
            v
        };
        Point::new(lin(a.m[0], a.b[0]), lin(a.m[1], a.b[1]))
    }

    /// Image of integer coordinates scaled so the unit square is `[0, den]^2`.
    pub fn apply_scaled(self, x: &BigInt, y: &BigInt, den: &BigInt) -> (BigInt, BigInt) {
        let a = self.affine();
        let row = |r: [i8; 2], bi: i8| -> BigInt {
            let mut v = den * BigInt::from(bi);
            if r[0] != 0 {
                v += x * BigInt::from(r[0]);
            }
            if r[1] != 0 {
                v += y * BigInt::from(r[1]);
            }
            v
        };
        (row(a.m[0], a.b[0]), row(a.m[1], a.b[1]))
    }

    /// Lower-left corner of the image of the axis-parallel square with
    /// lower-left `(x, y)` and side `side`, all scaled by a common denominator.
    pub fn apply_square_scaled(
        self,
        x: &BigInt,
        y: &BigInt,
        side: &BigInt,
        den: &BigInt,
    ) -> (BigInt, BigInt) {
        let (ax, ay) = self.apply_scaled(x, y, den);
        let (bx, by) = self.apply_scaled(&(x + side), &(y + side), den);
        (ax.min(bx), ay.min(by))
    }

    pub fn name(self) -> &'static str {
        use SymmetryElement::*;
        match self {
            Id => "id",
            Gv => "v",
            Gh => "h",
            Gd1 => "d1",
            Gd2 => "d2",
            Gr1 => "r1",
            Gr2 => "r2",
            Gr3 => "r3",
        }
    }

    pub fn parse(s: &str) -> Option<SymmetryElement> {
        ALL_SYMMETRIES.into_iter().find(|g| g.name() == s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn group_is_closed_of_order_eight() {
        for a in ALL_SYMMETRIES {
            for b in ALL_SYMMETRIES {
                let _ = a.compose(b); // panics if composition leaves the table
            }
        }
        // r1^2 = r2, r1^3 = r3, r1^4 = id
        use SymmetryElement::*;
        assert_eq!(Gr1.compose(Gr1), Gr2);
        assert_eq!(Gr1.compose(Gr2), Gr3);
        assert_eq!(Gr1.compose(Gr3), Id);
        // reflections are involutions
        for g in [Gv, Gh, Gd1, Gd2] {
            assert_eq!(g.compose(g), Id);
        }
    }

    #[test]
    fn inverses_cancel() {
        for g in ALL_SYMMETRIES {
            assert_eq!(g.compose(g.inverse()), SymmetryElement::Id);
            assert_eq!(g.inverse().compose(g), SymmetryElement::Id);
        }
    }

    #[test]
    fn point_images_match_formulas() {
        let p = Point::new(ratio(1, 3), ratio(1, 4));
        use SymmetryElement::*;
        assert_eq!(Gv.apply(&p), Point::new(ratio(1, 3), ratio(3, 4)));
        assert_eq!(Gh.apply(&p), Point::new(ratio(2, 3), ratio(1, 4)));
        assert_eq!(Gd1.apply(&p), Point::new(ratio(1, 4), ratio(1, 3)));
        assert_eq!(Gd2.apply(&p), Point::new(ratio(3, 4), ratio(2, 3)));
        assert_eq!(Gr1.apply(&p), Point::new(ratio(3, 4), ratio(1, 3)));
        assert_eq!(Gr2.apply(&p), Point::new(ratio(2, 3), ratio(3, 4)));
        assert_eq!(Gr3.apply(&p), Point::new(ratio(1, 4), ratio(2, 3)));
    }

    #[test]
    fn unit_square_is_preserved() {
        use num::Zero;
        let den = BigInt::from(12);
        let side = BigInt::from(12);
        for g in ALL_SYMMETRIES {
            let (x, y) = g.apply_square_scaled(&BigInt::zero(), &BigInt::zero(), &side, &den);
            assert_eq!((x, y), (BigInt::zero(), BigInt::zero()), "{g:?}");
        }
    }
}
