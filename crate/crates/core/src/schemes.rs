//! Zero-dimensional subschemes of the surface of length at most 8, stored as
//! lists of jets with distinct supports, and the linear conditions they impose
//! on holomorphic functions.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surface::TorusPoint;
use crate::theta::{Derivs, MULTI_INDICES};

pub const MAX_LENGTH: usize = 8;

/// Number of derivatives of order at most two; condition functionals live in
/// this span.
pub const COND_LEN: usize = 6;

const DIR_TOL: f64 = 1e-12;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn norm2(v: [C64; 2]) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

/// A fat point. Directions are tangent vectors in the `C^2` coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Jet {
    Reduced { p: TorusPoint },
    /// `{p, t}`: a point with a tangent direction.
    Double { p: TorusPoint, t: [C64; 2] },
    /// `C[e]/(e^3)` embedded along the arc `s -> p + s t + s^2 n`.
    Curvilinear { p: TorusPoint, t: [C64; 2], n: [C64; 2] },
    /// `C[e,h]/(e - h^2, e h)` with `t` the `h` direction and `n` the `e`
    /// direction.
    Yd { p: TorusPoint, t: [C64; 2], n: [C64; 2] },
    /// The first infinitesimal neighbourhood `C[e,h]/(e^2, h^2, e h)`.
    Ye { p: TorusPoint },
}

/// A linear functional on germs at `point`, as coefficients against
/// `D1^i D2^j f(point)` for `i + j <= 2` in storage order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Functional {
    pub point: TorusPoint,
    pub coeffs: [C64; COND_LEN],
}

impl Functional {
    /// Applies the functional to derivatives of a function taken at `point`.
    pub fn apply(&self, d: &Derivs) -> C64 {
        self.coeffs.iter().zip(d.0.iter()).map(|(c, x)| c * x).sum()
    }

    /// Applies the functional to `D_k f` (k = 0 or 1), which needs derivatives
    /// one order higher.
    pub fn apply_shifted(&self, d: &Derivs, k: usize) -> C64 {
        MULTI_INDICES[..COND_LEN]
            .iter()
            .zip(self.coeffs.iter())
            .map(|(&(i, j), c)| {
                let (i, j) = if k == 0 { (i + 1, j) } else { (i, j + 1) };
                c * d.get(i, j)
            })
            .sum()
    }

    pub fn order(&self) -> usize {
        if self.coeffs[3..].iter().any(|c| c.norm() > 0.0) {
            2
        } else if self.coeffs[1..3].iter().any(|c| c.norm() > 0.0) {
            1
        } else {
            0
        }
    }
}

fn eval_at() -> [C64; COND_LEN] {
    let mut c = [zero(); COND_LEN];
    c[0] = C64::new(1.0, 0.0);
    c
}

fn first(t: [C64; 2]) -> [C64; COND_LEN] {
    let mut c = [zero(); COND_LEN];
    c[1] = t[0];
    c[2] = t[1];
    c
}

/// `D_t^2` expanded on the Hessian entries (mixed entry stored once).
fn second(t: [C64; 2]) -> [C64; COND_LEN] {
    let mut c = [zero(); COND_LEN];
    c[3] = t[0] * t[0];
    c[4] = 2.0 * t[0] * t[1];
    c[5] = t[1] * t[1];
    c
}

fn combine(a: [C64; COND_LEN], ka: f64, b: [C64; COND_LEN], kb: f64) -> [C64; COND_LEN] {
    let mut out = [zero(); COND_LEN];
    for k in 0..COND_LEN {
        out[k] = a[k] * ka + b[k] * kb;
    }
    out
}

impl Jet {
    pub fn reduced(p: TorusPoint) -> Jet {
        Jet::Reduced { p }
    }

    pub fn double(p: TorusPoint, t: [C64; 2]) -> Jet {
        Jet::Double { p, t }
    }

    pub fn curvilinear(p: TorusPoint, t: [C64; 2], n: [C64; 2]) -> Jet {
        Jet::Curvilinear { p, t, n }
    }

    pub fn yd(p: TorusPoint, t: [C64; 2], n: [C64; 2]) -> Jet {
        Jet::Yd { p, t, n }
    }

    pub fn ye(p: TorusPoint) -> Jet {
        Jet::Ye { p }
    }

    pub fn support(&self) -> TorusPoint {
        match *self {
            Jet::Reduced { p } | Jet::Ye { p } => p,
            Jet::Double { p, .. } | Jet::Curvilinear { p, .. } | Jet::Yd { p, .. } => p,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Jet::Reduced { .. } => 1,
            Jet::Double { .. } => 2,
            _ => 3,
        }
    }

    pub fn is_reduced(&self) -> bool {
        matches!(self, Jet::Reduced { .. })
    }

    fn with_support(&self, p: TorusPoint) -> Jet {
        match *self {
            Jet::Reduced { .. } => Jet::Reduced { p },
            Jet::Double { t, .. } => Jet::Double { p, t },
            Jet::Curvilinear { t, n, .. } => Jet::Curvilinear { p, t, n },
            Jet::Yd { t, n, .. } => Jet::Yd { p, t, n },
            Jet::Ye { .. } => Jet::Ye { p },
        }
    }

    /// Rescales the leading direction to unit length. The second direction of
    /// the length-3 jets is rescaled by the square of the same factor so the
    /// subscheme itself does not change.
    pub fn normalized(&self) -> Result<Jet> {
        let unit = |t: [C64; 2]| -> Result<(f64, [C64; 2])> {
            let k = norm2(t);
            if !(k > DIR_TOL) || !k.is_finite() {
                return Err(Error::UnsupportedJet(format!("degenerate direction {t:?}")));
            }
            Ok((k, [t[0] / k, t[1] / k]))
        };
        Ok(match *self {
            Jet::Double { p, t } => Jet::Double { p, t: unit(t)?.1 },
            Jet::Curvilinear { p, t, n } => {
                let (k, t) = unit(t)?;
                Jet::Curvilinear { p, t, n: [n[0] / (k * k), n[1] / (k * k)] }
            }
            Jet::Yd { p, t, n } => {
                let (k, t) = unit(t)?;
                let n = [n[0] / (k * k), n[1] / (k * k)];
                let det = t[0] * n[1] - t[1] * n[0];
                if det.norm() <= DIR_TOL * norm2(n).max(1.0) {
                    return Err(Error::UnsupportedJet("Y_d directions are dependent".into()));
                }
                Jet::Yd { p, t, n }
            }
            other => other,
        })
    }

    /// Condition functionals of this jet, `len()` of them.
    pub fn conditions(&self) -> Result<Vec<Functional>> {
        let j = self.normalized()?;
        let p = j.support();
        let rows = match j {
            Jet::Reduced { .. } => vec![eval_at()],
            Jet::Double { t, .. } => vec![eval_at(), first(t)],
            // second derivative of s -> f(p + s t + s^2 n) at s = 0
            Jet::Curvilinear { t, n, .. } => vec![eval_at(), first(t), combine(second(t), 1.0, first(n), 2.0)],
            // dual basis {1, d_h, d_e + d_h^2 / 2} in the (h, e) coordinates
            Jet::Yd { t, n, .. } => vec![eval_at(), first(t), combine(first(n), 1.0, second(t), 0.5)],
            Jet::Ye { .. } => vec![
                eval_at(),
                first([C64::new(1.0, 0.0), zero()]),
                first([zero(), C64::new(1.0, 0.0)]),
            ],
        };
        Ok(rows.into_iter().map(|coeffs| Functional { point: p, coeffs }).collect())
    }

    /// Colength-one subjets. `None` stands for removing a reduced point. The
    /// flag is set when the true family is one-dimensional (only the
    /// coordinate directions are listed).
    fn colength_one(&self) -> (Vec<Option<Jet>>, bool) {
        match *self {
            Jet::Reduced { .. } => (vec![None], false),
            Jet::Double { p, .. } => (vec![Some(Jet::Reduced { p })], false),
            Jet::Curvilinear { p, t, .. } | Jet::Yd { p, t, .. } => (vec![Some(Jet::Double { p, t })], false),
            Jet::Ye { p } => (
                vec![
                    Some(Jet::Double { p, t: [C64::new(1.0, 0.0), zero()] }),
                    Some(Jet::Double { p, t: [zero(), C64::new(1.0, 0.0)] }),
                ],
                true,
            ),
        }
    }
}

/// A zero-dimensional subscheme: jets with pairwise distinct supports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Jet>", into = "Vec<Jet>")]
pub struct ZeroScheme {
    jets: Vec<Jet>,
}

impl TryFrom<Vec<Jet>> for ZeroScheme {
    type Error = Error;
    fn try_from(jets: Vec<Jet>) -> Result<Self> {
        ZeroScheme::new(jets)
    }
}

impl From<ZeroScheme> for Vec<Jet> {
    fn from(x: ZeroScheme) -> Vec<Jet> {
        x.jets
    }
}

impl ZeroScheme {
    pub fn new(jets: Vec<Jet>) -> Result<Self> {
        let jets = jets.iter().map(Jet::normalized).collect::<Result<Vec<_>>>()?;
        for (k, a) in jets.iter().enumerate() {
            if jets[..k].iter().any(|b| b.support() == a.support()) {
                return Err(Error::InvalidScheme(format!(
                    "two jets supported at {:?}; merge them into one jet",
                    a.support()
                )));
            }
        }
        let len: usize = jets.iter().map(Jet::len).sum();
        if len > MAX_LENGTH {
            return Err(Error::InvalidScheme(format!("length {len} exceeds {MAX_LENGTH}")));
        }
        Ok(ZeroScheme { jets })
    }

    pub fn reduced(points: &[TorusPoint]) -> Result<Self> {
        Self::new(points.iter().map(|&p| Jet::Reduced { p }).collect())
    }

    pub fn empty() -> Self {
        ZeroScheme { jets: Vec::new() }
    }

    pub fn jets(&self) -> &[Jet] {
        &self.jets
    }

    pub fn len(&self) -> usize {
        self.jets.iter().map(Jet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.jets.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.jets.iter().all(Jet::is_reduced)
    }

    pub fn support(&self) -> Vec<TorusPoint> {
        self.jets.iter().map(Jet::support).collect()
    }

    /// All condition functionals, jet by jet, `len()` in total.
    pub fn conditions(&self) -> Result<Vec<Functional>> {
        let mut out = Vec::with_capacity(self.len());
        for j in &self.jets {
            out.extend(j.conditions()?);
        }
        Ok(out)
    }

    /// Translate by `a`; tangent data is unchanged.
    pub fn translate(&self, a: TorusPoint) -> ZeroScheme {
        ZeroScheme { jets: self.jets.iter().map(|j| j.with_support(j.support() + a)).collect() }
    }

    /// `X` together with one more jet.
    pub fn with(&self, jet: Jet) -> Result<ZeroScheme> {
        let mut jets = self.jets.clone();
        jets.push(jet);
        ZeroScheme::new(jets)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scheme serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidScheme(e.to_string()))
    }
}

/// Colength-one subschemes together with a flag saying whether some jet has a
/// one-parameter family of them (only representatives are listed).
#[derive(Clone, Debug, PartialEq)]
pub struct Subschemes {
    pub schemes: Vec<ZeroScheme>,
    pub one_parameter: bool,
}

pub fn colength_one_subschemes(x: &ZeroScheme) -> Subschemes {
    let mut schemes = Vec::new();
    let mut one_parameter = false;
    for (k, j) in x.jets.iter().enumerate() {
        let (subs, flag) = j.colength_one();
        one_parameter |= flag;
        for sub in subs {
            let mut jets = x.jets.clone();
            match sub {
                Some(s) => jets[k] = s,
                None => {
                    jets.remove(k);
                }
            }
            schemes.push(ZeroScheme { jets });
        }
    }
    Subschemes { schemes, one_parameter }
}

/// `sum X`: support points weighted by jet length.
pub fn scheme_sum(x: &ZeroScheme) -> TorusPoint {
    x.jets.iter().map(|j| j.support().scale(j.len() as i64)).sum()
}
