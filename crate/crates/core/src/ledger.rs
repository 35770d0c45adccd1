//! Integer bookkeeping for the transforms of `L^i I_X`: Chern triples
//! `(r, c, chi)` with `c_1 = c * l` and `l^2 = 2`, and the classification of
//! incidence profiles into loci and transform sheaves.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MukaiVector {
    pub r: i64,
    pub c: i64,
    pub chi: i64,
}

impl MukaiVector {
    pub const ZERO: MukaiVector = MukaiVector { r: 0, c: 0, chi: 0 };

    pub const fn new(r: i64, c: i64, chi: i64) -> Self {
        MukaiVector { r, c, chi }
    }

    /// `L^i I_X` for `|X| = n`.
    pub fn twisted_ideal(i: i64, n: i64) -> Self {
        MukaiVector::new(1, i, i * i - n)
    }

    /// A line bundle of degree `d` on a curve of class `k l`.
    pub fn on_curve(k: i64, d: i64) -> Self {
        // chi(O_D) = -D^2 / 2 = -k^2
        MukaiVector::new(0, k, d - k * k)
    }

    /// Skyscraper sheaf of length `n`.
    pub fn points(n: i64) -> Self {
        MukaiVector::new(0, 0, n)
    }
}

impl fmt::Display for MukaiVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.r, self.c, self.chi)
    }
}

impl Add for MukaiVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        MukaiVector::new(self.r + o.r, self.c + o.c, self.chi + o.chi)
    }
}

impl Sub for MukaiVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for MukaiVector {
    type Output = Self;
    fn neg(self) -> Self {
        MukaiVector::new(-self.r, -self.c, -self.chi)
    }
}

impl Mul<MukaiVector> for i64 {
    type Output = MukaiVector;
    fn mul(self, v: MukaiVector) -> MukaiVector {
        MukaiVector::new(self * v.r, self * v.c, self * v.chi)
    }
}

/// Chern triple of the transform: `(r, c, chi) -> (chi, -c, r)`.
pub fn phi_ch(v: MukaiVector) -> MukaiVector {
    MukaiVector::new(v.chi, -v.c, v.r)
}

/// Triples no stable sheaf can have. Rank two with `c = 0, chi = -1` would
/// extend a twisted ideal of a collinear triple, which always has sections
/// after some twist.
pub fn excluded_stable(v: MukaiVector) -> Option<&'static str> {
    (v == MukaiVector::new(2, 0, -1)).then_some("rank two stable sheaves with (2,0,-1) do not exist: the extension forces a section")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidenceProfile {
    pub i: u8,
    pub n: usize,
    /// All of `X` on one theta translate.
    pub collinear: bool,
    pub has_collinear_colength1: bool,
    pub has_collinear_len4: bool,
    /// Collinear length-3 subschemes, capped at 2.
    pub has_collinear_len3: u8,
    /// Every length-4 subscheme contains exactly one collinear triple, all on
    /// a common translate.
    pub unique_len3_in_every_z: bool,
}

impl IncidenceProfile {
    pub fn generic(i: u8, n: usize) -> Self {
        IncidenceProfile {
            i,
            n,
            collinear: false,
            has_collinear_colength1: false,
            has_collinear_len4: false,
            has_collinear_len3: 0,
            unique_len3_in_every_z: false,
        }
    }

    /// Every point on one translate, with the sub-flags that implies.
    pub fn collinear(i: u8, n: usize) -> Self {
        IncidenceProfile {
            i,
            n,
            collinear: true,
            has_collinear_colength1: n >= 2,
            has_collinear_len4: n >= 4,
            has_collinear_len3: if n >= 4 { 2 } else { (n >= 3) as u8 },
            unique_len3_in_every_z: false,
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        let n = self.n;
        if self.i != 1 && self.i != 2 {
            return Err(format!("level {} is not 1 or 2", self.i));
        }
        if self.has_collinear_len3 > 2 {
            return Err("collinear triple count is capped at 2".into());
        }
        if self.has_collinear_len4 && n < 4 {
            return Err(format!("no length-4 subscheme in length {n}"));
        }
        if self.has_collinear_len3 > 0 && n < 3 {
            return Err(format!("no length-3 subscheme in length {n}"));
        }
        if self.has_collinear_len4 && self.has_collinear_len3 < 2 {
            return Err("a collinear length-4 subscheme contains four collinear triples".into());
        }
        if self.has_collinear_colength1 && n < 3 {
            // every subscheme of length at most 1 is trivially on a translate
            return Err(format!("colength-one collinearity is not a condition in length {n}"));
        }
        if self.collinear {
            let implied = (n < 3 || self.has_collinear_colength1)
                && (n < 4 || self.has_collinear_len4)
                && (n < 3 || self.has_collinear_len3 >= 1 + (n >= 4) as u8)
                && !self.unique_len3_in_every_z;
            if !implied {
                return Err("collinear scheme with sub-flags that contradict it".into());
            }
        }
        if self.unique_len3_in_every_z && (n != 5 || self.has_collinear_len4 || self.has_collinear_len3 == 0) {
            return Err("a common triple per length-4 subscheme only arises in length 5 without a collinear length-4 subscheme".into());
        }
        if n == 4 && self.has_collinear_colength1 != (self.has_collinear_len3 > 0) {
            return Err("in length 4 colength-one and triple collinearity coincide".into());
        }
        if n == 5 && self.has_collinear_colength1 != self.has_collinear_len4 {
            return Err("in length 5 colength-one and length-4 collinearity coincide".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocusShape {
    Empty,
    Point,
    PointSet,
    Curve,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocusFormula {
    pub shape: LocusShape,
    pub formula: String,
    /// Largest number of points, for finite loci known only by a bound.
    pub max_points: Option<usize>,
}

impl LocusFormula {
    fn empty() -> Self {
        LocusFormula { shape: LocusShape::Empty, formula: "{}".into(), max_points: Some(0) }
    }

    fn point(f: &str) -> Self {
        LocusFormula { shape: LocusShape::Point, formula: f.into(), max_points: Some(1) }
    }

    fn points(f: &str, max: usize) -> Self {
        LocusFormula { shape: LocusShape::PointSet, formula: f.into(), max_points: Some(max) }
    }

    fn curve(f: &str) -> Self {
        LocusFormula { shape: LocusShape::Curve, formula: f.into(), max_points: None }
    }
}

/// A transform sheaf: its symbol and the Chern triples of its constituents
/// (torsion part first when it is an extension).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheafTerm {
    pub symbol: String,
    pub parts: Vec<MukaiVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SheafTerm {
    fn zero() -> Self {
        SheafTerm { symbol: "0".into(), parts: vec![], note: None }
    }

    fn new(symbol: &str, parts: &[MukaiVector]) -> Self {
        SheafTerm { symbol: symbol.into(), parts: parts.to_vec(), note: None }
    }

    fn noted(mut self, note: &str) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn ch(&self) -> MukaiVector {
        self.parts.iter().fold(MukaiVector::ZERO, |a, &b| a + b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationRow {
    pub label: String,
    pub i: u8,
    pub n: usize,
    pub s_locus: LocusFormula,
    pub r0: SheafTerm,
    pub r1: SheafTerm,
    pub witness_formulas: Vec<String>,
    pub condition: String,
}

fn row(label: &str, p: &IncidenceProfile, s: LocusFormula, r0: SheafTerm, r1: SheafTerm, witnesses: &[&str], condition: &str) -> ClassificationRow {
    ClassificationRow {
        label: label.into(),
        i: p.i,
        n: p.n,
        s_locus: s,
        r0,
        r1,
        witness_formulas: witnesses.iter().map(|s| s.to_string()).collect(),
        condition: condition.into(),
    }
}

fn unclassified(p: &IncidenceProfile, why: &str) -> Error {
    Error::UnclassifiedProfile(format!("{p:?}: {why}"))
}

/// The table row matching a profile.
pub fn classify(p: &IncidenceProfile) -> Result<ClassificationRow> {
    p.check().map_err(|why| unclassified(p, &why))?;
    let n = p.n as i64;
    let v = MukaiVector::new;
    if p.i == 1 {
        return Ok(match p.n {
            0 => row("empty", p, LocusFormula::empty(), SheafTerm::new("L^", &[v(1, -1, 1)]), SheafTerm::zero(), &[], "no conditions"),
            1 => row(
                "P",
                p,
                LocusFormula::curve("D_p"),
                SheafTerm::zero(),
                SheafTerm::new("P_p O_{D_-p}", &[MukaiVector::on_curve(1, 0)]),
                &["p"],
                "single point",
            ),
            2 => row(
                "Q",
                p,
                LocusFormula::points("{-p+l, -p-l'}", 2),
                SheafTerm::zero(),
                SheafTerm::new("I_{S_1} L^", &[v(1, 1, -1)]),
                &["-u for u in lines_through(Q)"],
                "p - q = l - l'",
            ),
            _ => {
                let s1 = if p.collinear { LocusFormula::point("{-v}") } else { LocusFormula::empty() };
                let r1 = SheafTerm::new("R^1_1 torsion-free", &[v(n - 1, 1, -1)]);
                row("X", p, s1, SheafTerm::zero(), r1, if p.collinear { &["-v"] } else { &[] }, "WIT_1, torsion-free transform")
            }
        });
    }
    Ok(match p.n {
        0 => row("empty", p, LocusFormula::empty(), SheafTerm::new("L^2", &[v(4, -2, 1)]), SheafTerm::zero(), &[], "no conditions"),
        1 => row(
            "P",
            p,
            LocusFormula::empty(),
            SheafTerm::new("R^0_2(P)", &[v(3, -2, 1)]).noted("rank 3 mu-stable bundle"),
            SheafTerm::zero(),
            &[],
            "single point",
        ),
        2 => row(
            "Q",
            p,
            LocusFormula::point("{-p-q}"),
            SheafTerm::new("R^0_2(Q)", &[v(2, -2, 2)]).noted("mu-semistable"),
            SheafTerm::new("O_{S_2}", &[MukaiVector::points(1)]),
            &["-p-q"],
            "pair",
        ),
        3 if p.collinear => row(
            "Y collinear",
            p,
            LocusFormula::curve("D_u"),
            SheafTerm::new("L^-1_-v", &[v(1, -1, 1)]),
            SheafTerm::new("degree 1 line bundle on D_u", &[MukaiVector::on_curve(1, 1)]),
            &["v - tau"],
            "Y on D_v, tau = sum Y, u = v - tau",
        ),
        3 => row(
            "Y",
            p,
            LocusFormula::points("{-p-q, -q-y, -y-p}", 3),
            SheafTerm::new("L^-2 P_-tau", &[v(1, -2, 4)]),
            SheafTerm::new("O_{S_2}", &[MukaiVector::points(3)]),
            &["-p-q", "-q-y", "-y-p"],
            "tau = sum Y",
        ),
        4 if p.collinear => row(
            "Z collinear",
            p,
            LocusFormula::point("{2v - sigma}"),
            SheafTerm::new("L^-1_-v", &[v(1, -1, 1)]),
            SheafTerm::new("L^_{sigma-v} I_{2v-sigma}", &[v(1, 1, 0)]),
            &["2v - sigma"],
            "Z on D_v, sigma = sum Z",
        ),
        4 => {
            let kummer = p.has_collinear_len3 > 0;
            let (witnesses, condition): (&[&str], &str) = if kummer {
                (&["v - sum Y", "-v - z"], "Z = Y + z with Y on D_v: the curve splits into two translates")
            } else {
                (&[], "D' in |L^2 P_sigma|, sigma = sum Z")
            };
            row(
                if kummer { "Z with collinear Y" } else { "Z" },
                p,
                LocusFormula::curve("D'"),
                SheafTerm::zero(),
                SheafTerm::new("degree 3 line bundle on D'", &[MukaiVector::on_curve(2, 3)]),
                witnesses,
                condition,
            )
        }
        5 if p.collinear => row(
            "W collinear",
            p,
            LocusFormula::empty(),
            SheafTerm::new("L^-1_v", &[v(1, -1, 1)]),
            SheafTerm::new("R^1_2(W)", &[v(2, 1, 0)]).noted("rank 2 mu-stable bundle"),
            &[],
            "W on D_v",
        ),
        5 if p.has_collinear_len4 => row(
            "W with collinear Z",
            p,
            LocusFormula::curve("D_u"),
            SheafTerm::zero(),
            SheafTerm::new("T x L^_x I_y", &[MukaiVector::on_curve(1, 0), v(1, 1, 0)]),
            &["-v - w"],
            "Z on D_v inside W = Z + w, deg T = 0 on D_u",
        ),
        5 if p.unique_len3_in_every_z => row(
            "W with common triples",
            p,
            LocusFormula::curve("D_u"),
            SheafTerm::zero(),
            SheafTerm::new("T x L^_x", &[MukaiVector::on_curve(1, -1), v(1, 1, 1)]),
            &[],
            "every Z in W has one collinear Y, all on D_x, deg T = -1 on D_u",
        ),
        5 => row(
            "W",
            p,
            LocusFormula::points("W'", 5),
            SheafTerm::zero(),
            SheafTerm::new("L^2 P_a I_{W'}", &[v(1, 2, -1)]),
            &[],
            "W' of length 5",
        ),
        _ if p.collinear => row(
            "X collinear",
            p,
            LocusFormula::empty(),
            SheafTerm::new("L^-1_v", &[v(1, -1, 1)]),
            SheafTerm::new("R^1_2(X)", &[v(n - 3, 1, 0)]).noted("vector bundle"),
            &[],
            "X on D_v",
        ),
        _ if p.has_collinear_colength1 => row(
            "X with collinear colength one",
            p,
            LocusFormula::curve("D_u"),
            SheafTerm::zero(),
            SheafTerm::new("T x E", &[MukaiVector::on_curve(1, 0), v(n - 4, 1, 0)]),
            &["-v - x"],
            "X = X' + x with X' on D_v, deg T = 0 on D_u",
        ),
        _ => {
            let max = match p.n {
                6 => 3,
                7 | 8 => 2,
                _ => 1,
            };
            row(
                "X",
                p,
                LocusFormula::points("S_2(X)", max),
                SheafTerm::zero(),
                SheafTerm::new("R^1_2(X)", &[v(n - 4, 2, -1)]).noted("torsion-free, singular exactly on S_2(X); a bundle when S_2 is empty"),
                &[],
                "no collinear colength-one subscheme",
            )
        }
    })
}

/// `ch R^0 - ch L^i^ + ch H_X - ch R^1 = 0`, with `H_X` homogeneous of rank `n`.
pub fn balance_check(row: &ClassificationRow, n: usize, i: u8) -> bool {
    let li_hat = phi_ch(MukaiVector::twisted_ideal(i as i64, 0));
    let hx = MukaiVector::new(n as i64, 0, 0);
    row.r0.ch() - li_hat + hx - row.r1.ch() == MukaiVector::ZERO
}

/// Every tabulated row: both levels, the special lengths, and the rows for
/// `|X| >= 6` at lengths 6 to 8.
pub fn appendix_rows() -> Vec<ClassificationRow> {
    let mut profiles = Vec::new();
    for n in 1..=8 {
        profiles.push(IncidenceProfile::generic(1, n));
    }
    profiles.push(IncidenceProfile::collinear(1, 3));
    for n in 1..=8 {
        profiles.push(IncidenceProfile::generic(2, n));
    }
    for n in 3..=8 {
        profiles.push(IncidenceProfile::collinear(2, n));
    }
    profiles.push(IncidenceProfile { has_collinear_colength1: true, has_collinear_len3: 1, ..IncidenceProfile::generic(2, 4) });
    profiles.push(IncidenceProfile { has_collinear_colength1: true, has_collinear_len4: true, has_collinear_len3: 2, ..IncidenceProfile::generic(2, 5) });
    profiles.push(IncidenceProfile { has_collinear_len3: 2, unique_len3_in_every_z: true, ..IncidenceProfile::generic(2, 5) });
    for n in 6..=8 {
        profiles.push(IncidenceProfile {
            has_collinear_colength1: true,
            has_collinear_len4: true,
            has_collinear_len3: 2,
            ..IncidenceProfile::generic(2, n)
        });
    }
    profiles.iter().map(|p| classify(p).expect("tabulated profile")).collect()
}

pub fn rows_to_json(rows: &[ClassificationRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_examples() {
        assert_eq!(phi_ch(MukaiVector::new(0, 0, 1)), MukaiVector::new(1, 0, 0));
        assert_eq!(phi_ch(MukaiVector::new(1, 0, 0)), MukaiVector::new(0, 0, 1));
        // WIT_1 flips the sign of the transformed triple
        assert_eq!(-phi_ch(MukaiVector::new(1, 2, -1)), MukaiVector::new(1, 2, -1));
        assert_eq!(phi_ch(MukaiVector::new(1, 2, -1)), MukaiVector::new(-1, -2, 1));
    }

    #[test]
    fn every_row_balances() {
        for r in appendix_rows() {
            assert!(balance_check(&r, r.n, r.i), "{} i={} n={}: r0 {} r1 {}", r.label, r.i, r.n, r.r0.ch(), r.r1.ch());
        }
    }

    #[test]
    fn collinear_four_row() {
        let r = classify(&IncidenceProfile::collinear(2, 4)).unwrap();
        assert_eq!(r.s_locus.shape, LocusShape::Point);
        assert_eq!(r.witness_formulas, vec!["2v - sigma"]);
        assert_eq!(r.r0.ch() + MukaiVector::new(4, 0, 0), MukaiVector::new(5, -1, 1));
        assert_eq!(MukaiVector::new(4, -2, 1) + r.r1.ch(), MukaiVector::new(5, -1, 1));
    }

    #[test]
    fn point_row_has_no_jump() {
        let r = classify(&IncidenceProfile::generic(2, 1)).unwrap();
        assert_eq!(r.s_locus.shape, LocusShape::Empty);
        assert_eq!(r.r0.ch(), MukaiVector::new(3, -2, 1));
        assert!(r.r0.note.as_deref().unwrap().contains("rank 3"));
    }

    #[test]
    fn level_one_is_torsion_free() {
        for n in 2..=8 {
            let r = classify(&IncidenceProfile::generic(1, n)).unwrap();
            assert_eq!(r.r0, SheafTerm::zero());
            assert_eq!(r.r1.ch().r, n as i64 - 1);
        }
    }

    #[test]
    fn impossible_profiles_are_rejected() {
        let bad = IncidenceProfile { has_collinear_len4: true, ..IncidenceProfile::collinear(2, 3) };
        assert!(matches!(classify(&bad), Err(Error::UnclassifiedProfile(_))));
        let bad = IncidenceProfile { i: 3, ..IncidenceProfile::generic(2, 3) };
        assert!(classify(&bad).is_err());
        assert!(excluded_stable(MukaiVector::new(2, 0, -1)).is_some());
        assert!(excluded_stable(MukaiVector::new(2, 1, 0)).is_none());
    }

    #[test]
    fn bounds_for_long_schemes() {
        let bound = |n| classify(&IncidenceProfile::generic(2, n)).unwrap().s_locus.max_points;
        assert_eq!(bound(6), Some(3));
        assert_eq!(bound(7), Some(2));
        assert_eq!(bound(8), Some(2));
    }

    #[test]
    fn json_export_round_trips() {
        let rows = appendix_rows();
        let back: Vec<ClassificationRow> = serde_json::from_str(&rows_to_json(&rows)).unwrap();
        assert_eq!(back, rows);
    }
}
