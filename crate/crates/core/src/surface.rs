//! The principally polarized abelian surface `C^2 / (Z^2 + tau Z^2)` and
//! arithmetic on its points.
//!
//! Points are kept in real lattice coordinates `(p, q)` with `z = p + tau q`.
//! Each coordinate is stored as a 64-bit fixed-point fraction of a full turn,
//! so addition, negation and integer multiples are exact and reduction mod 1
//! is the wrap-around of the integer type.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// Symmetric 2x2 complex period matrix with positive definite imaginary part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodMatrix {
    t11: C64,
    t12: C64,
    t22: C64,
}

impl PeriodMatrix {
    pub fn new(t11: C64, t12: C64, t22: C64) -> Result<Self> {
        let m = PeriodMatrix { t11, t12, t22 };
        let (a, b, d) = (t11.im, t12.im, t22.im);
        if !(a > 0.0 && a * d - b * b > 0.0) {
            return Err(Error::InvalidPeriodMatrix(format!(
                "Im(tau) is not positive definite (minors {a}, {})",
                a * d - b * b
            )));
        }
        if ![t11, t12, t22].iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::InvalidPeriodMatrix("non-finite entry".into()));
        }
        Ok(m)
    }

    /// Builds from a full matrix, rejecting anything that is not exactly symmetric.
    pub fn from_matrix(m: [[C64; 2]; 2]) -> Result<Self> {
        if m[0][1] != m[1][0] {
            return Err(Error::InvalidPeriodMatrix(format!(
                "tau is not symmetric: {} vs {}",
                m[0][1], m[1][0]
            )));
        }
        Self::new(m[0][0], m[0][1], m[1][1])
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        [[self.t11, self.t12], [self.t12, self.t22]]
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.matrix()[i][j]
    }

    pub fn imag(&self) -> [[f64; 2]; 2] {
        [[self.t11.im, self.t12.im], [self.t12.im, self.t22.im]]
    }

    pub fn real(&self) -> [[f64; 2]; 2] {
        [[self.t11.re, self.t12.re], [self.t12.re, self.t22.re]]
    }

    pub fn imag_inverse(&self) -> [[f64; 2]; 2] {
        let [[a, b], [_, d]] = self.imag();
        let det = a * d - b * b;
        [[d / det, -b / det], [-b / det, a / det]]
    }

    /// Leading principal minors of `Im(tau)`.
    pub fn imag_minors(&self) -> (f64, f64) {
        let [[a, b], [_, d]] = self.imag();
        (a, a * d - b * b)
    }

    /// Eigenvalues of `Im(tau)`, smallest first.
    pub fn imag_eigenvalues(&self) -> (f64, f64) {
        let [[a, b], [_, d]] = self.imag();
        let mean = 0.5 * (a + d);
        let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mean - disc, mean + disc)
    }

    pub fn scaled(&self, k: f64) -> PeriodMatrix {
        PeriodMatrix { t11: self.t11 * k, t12: self.t12 * k, t22: self.t22 * k }
    }

    pub fn mul_real(&self, q: [f64; 2]) -> [C64; 2] {
        [self.t11 * q[0] + self.t12 * q[1], self.t12 * q[0] + self.t22 * q[1]]
    }

    /// `n^T tau n` for a real vector.
    pub fn quad(&self, n: [f64; 2]) -> C64 {
        let t = self.mul_real(n);
        t[0] * n[0] + t[1] * n[1]
    }

    /// Real lattice coordinates `(p, q)` of `z = p + tau q` (not reduced).
    pub fn lattice_coords(&self, z: [C64; 2]) -> ([f64; 2], [f64; 2]) {
        let yi = self.imag_inverse();
        let q = [
            yi[0][0] * z[0].im + yi[0][1] * z[1].im,
            yi[1][0] * z[0].im + yi[1][1] * z[1].im,
        ];
        let re = self.real();
        let p = [
            z[0].re - (re[0][0] * q[0] + re[0][1] * q[1]),
            z[1].re - (re[1][0] * q[0] + re[1][1] * q[1]),
        ];
        (p, q)
    }

    /// True when the off-diagonal entry vanishes, i.e. the surface is visibly a
    /// product of elliptic curves. Irreducibility of the theta divisor is not
    /// certified otherwise.
    pub fn product_warning(&self) -> bool {
        self.t12.norm() < 1e-9
    }
}

impl Default for PeriodMatrix {
    fn default() -> Self {
        PeriodMatrix {
            t11: C64::new(0.0, 1.0),
            t12: C64::new(0.3, 0.2),
            t22: C64::new(0.0, 1.2),
        }
    }
}

#[inline]
fn to_fixed(x: f64) -> u64 {
    let frac = x - x.floor();
    // `as` saturates, so a fraction that rounds up to 1.0 lands on u64::MAX.
    (frac * TWO_POW_64) as u64
}

#[inline]
fn from_fixed(x: u64) -> f64 {
    let v = x as f64 / TWO_POW_64;
    if v >= 1.0 {
        0.0
    } else {
        v
    }
}

#[inline]
fn from_fixed_centered(x: u64) -> f64 {
    (x as i64) as f64 / TWO_POW_64
}

/// A point of the torus in reduced lattice coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TorusPoint {
    // order (p1, p2, q1, q2)
    raw: [u64; 4],
}

impl TorusPoint {
    pub fn new(p: [f64; 2], q: [f64; 2]) -> Self {
        TorusPoint { raw: [to_fixed(p[0]), to_fixed(p[1]), to_fixed(q[0]), to_fixed(q[1])] }
    }

    pub fn from_coords(c: [f64; 4]) -> Self {
        Self::new([c[0], c[1]], [c[2], c[3]])
    }

    pub fn origin() -> Self {
        TorusPoint { raw: [0; 4] }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        TorusPoint { raw: [rng.gen(), rng.gen(), rng.gen(), rng.gen()] }
    }

    /// Reduces an arbitrary point of `C^2` modulo the lattice.
    pub fn from_complex(z: [C64; 2], tau: &PeriodMatrix) -> Self {
        let (p, q) = tau.lattice_coords(z);
        Self::new(p, q)
    }

    /// Coordinates `(p1, p2, q1, q2)`, each in `[0, 1)`.
    pub fn coords(&self) -> [f64; 4] {
        self.raw.map(from_fixed)
    }

    /// Coordinates of the representative closest to the origin, each in `[-1/2, 1/2)`.
    pub fn centered_coords(&self) -> [f64; 4] {
        self.raw.map(from_fixed_centered)
    }

    pub fn p(&self) -> [f64; 2] {
        let c = self.coords();
        [c[0], c[1]]
    }

    pub fn q(&self) -> [f64; 2] {
        let c = self.coords();
        [c[2], c[3]]
    }

    /// `k * self`, exact.
    pub fn scale(&self, k: i64) -> Self {
        TorusPoint { raw: self.raw.map(|x| x.wrapping_mul(k as u64)) }
    }

    /// The representative of `self / 2` whose coordinates lie in `[0, 1/2)`.
    /// Any of the sixteen halves differs from it by a point of order two.
    pub fn half(&self) -> Self {
        TorusPoint { raw: self.raw.map(|x| x >> 1) }
    }

    /// `p + tau q` for the `[0,1)` representative.
    pub fn embed(&self, tau: &PeriodMatrix) -> [C64; 2] {
        let c = self.coords();
        embed_coords(c, tau)
    }

    /// `p + tau q` for the centered representative.
    pub fn embed_centered(&self, tau: &PeriodMatrix) -> [C64; 2] {
        embed_coords(self.centered_coords(), tau)
    }

    pub fn is_two_torsion(&self) -> bool {
        self.scale(2) == TorusPoint::origin()
    }
}

pub(crate) fn embed_coords(c: [f64; 4], tau: &PeriodMatrix) -> [C64; 2] {
    let t = tau.mul_real([c[2], c[3]]);
    [t[0] + c[0], t[1] + c[1]]
}

impl Add for TorusPoint {
    type Output = TorusPoint;
    fn add(self, o: TorusPoint) -> TorusPoint {
        let mut raw = self.raw;
        for (r, s) in raw.iter_mut().zip(o.raw) {
            *r = r.wrapping_add(s);
        }
        TorusPoint { raw }
    }
}

impl Sub for TorusPoint {
    type Output = TorusPoint;
    fn sub(self, o: TorusPoint) -> TorusPoint {
        self + (-o)
    }
}

impl Neg for TorusPoint {
    type Output = TorusPoint;
    fn neg(self) -> TorusPoint {
        TorusPoint { raw: self.raw.map(u64::wrapping_neg) }
    }
}

impl std::iter::Sum for TorusPoint {
    fn sum<I: Iterator<Item = TorusPoint>>(iter: I) -> TorusPoint {
        iter.fold(TorusPoint::origin(), |a, b| a + b)
    }
}

impl fmt::Debug for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.coords();
        write!(f, "TorusPoint({:.9}, {:.9}; {:.9}, {:.9})", c[0], c[1], c[2], c[3])
    }
}

impl Serialize for TorusPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for TorusPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = <[f64; 4]>::deserialize(d)?;
        if c.iter().any(|x| !x.is_finite()) {
            return Err(serde::de::Error::custom("non-finite torus coordinate"));
        }
        Ok(TorusPoint::from_coords(c))
    }
}

/// `p + tau q`.
pub fn embed(pt: &TorusPoint, tau: &PeriodMatrix) -> [C64; 2] {
    pt.embed(tau)
}

/// Euclidean length in `C^2` of the shortest representative of `a - b`.
pub fn torus_distance(a: &TorusPoint, b: &TorusPoint, tau: &PeriodMatrix) -> f64 {
    let d = (*a - *b).centered_coords();
    let mut best = f64::INFINITY;
    for s in 0..81 {
        let shift = [(s % 3) as f64 - 1.0, ((s / 3) % 3) as f64 - 1.0, ((s / 9) % 3) as f64 - 1.0, (s / 27) as f64 - 1.0];
        let c = [d[0] + shift[0], d[1] + shift[1], d[2] + shift[2], d[3] + shift[3]];
        let z = embed_coords(c, tau);
        let n = (z[0].norm_sqr() + z[1].norm_sqr()).sqrt();
        best = best.min(n);
    }
    best
}

/// The sixteen points of order dividing two, ordered lexicographically in `(q, p)`.
pub fn two_torsion() -> Vec<TorusPoint> {
    let mut out = Vec::with_capacity(16);
    for bits in 0..16u32 {
        let h = |b: u32| if (bits >> b) & 1 == 1 { 0.5 } else { 0.0 };
        // q1 is the most significant coordinate
        out.push(TorusPoint::new([h(1), h(0)], [h(3), h(2)]));
    }
    out
}

/// Surface plus the numerical knobs shared by every computation.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceConfig {
    pub tau: PeriodMatrix,
    pub truncation_radius: usize,
    pub point_tol: f64,
    pub rank_tol: f64,
    pub seed: u64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            tau: PeriodMatrix::default(),
            truncation_radius: 8,
            point_tol: 1e-6,
            rank_tol: 1e-6,
            seed: 20_240_601,
        }
    }
}

impl SurfaceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.truncation_radius < 3 {
            return Err(Error::InvalidConfig(format!(
                "truncation_radius must be at least 3, got {}",
                self.truncation_radius
            )));
        }
        for (name, v) in [("point_tol", self.point_tol), ("rank_tol", self.rank_tol)] {
            if !(v > 0.0 && v <= 1e-3) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1e-3], got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SurfaceConfig { seed, ..self.clone() }
    }

    pub fn with_truncation(&self, truncation_radius: usize) -> Self {
        SurfaceConfig { truncation_radius, ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: SurfaceConfig = serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigDoc {
    tau: [[[f64; 2]; 2]; 2],
    truncation_radius: usize,
    point_tol: f64,
    rank_tol: f64,
    seed: u64,
}

impl Serialize for SurfaceConfig {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m = self.tau.matrix();
        let c = |z: C64| [z.re, z.im];
        ConfigDoc {
            tau: [[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]],
            truncation_radius: self.truncation_radius,
            point_tol: self.point_tol,
            rank_tol: self.rank_tol,
            seed: self.seed,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SurfaceConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ConfigDoc::deserialize(d)?;
        let c = |v: [f64; 2]| C64::new(v[0], v[1]);
        let m = [[c(doc.tau[0][0]), c(doc.tau[0][1])], [c(doc.tau[1][0]), c(doc.tau[1][1])]];
        let tau = PeriodMatrix::from_matrix(m).map_err(serde::de::Error::custom)?;
        Ok(SurfaceConfig {
            tau,
            truncation_radius: doc.truncation_radius,
            point_tol: doc.point_tol,
            rank_tol: doc.rank_tol,
            seed: doc.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tau() -> PeriodMatrix {
        PeriodMatrix::default()
    }

    #[test]
    fn embed_examples() {
        let t = tau();
        let z = TorusPoint::origin().embed(&t);
        assert_eq!(z, [C64::new(0.0, 0.0); 2]);
        let z = TorusPoint::new([0.5, 0.0], [0.0, 0.0]).embed(&t);
        assert_eq!(z, [C64::new(0.5, 0.0), C64::new(0.0, 0.0)]);
        let z = TorusPoint::new([0.0, 0.0], [0.5, 0.0]).embed(&t);
        assert!((z[0] - C64::new(0.0, 0.5)).norm() < 1e-15);
        assert!((z[1] - C64::new(0.15, 0.1)).norm() < 1e-15);
    }

    #[test]
    fn default_tau_minors() {
        let (m1, m2) = tau().imag_minors();
        assert!((m1 - 1.0).abs() < 1e-15);
        assert!((m2 - 1.16).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_period_matrices() {
        let i = C64::new(0.0, 1.0);
        let bad = [[i, C64::new(0.3, 0.2)], [C64::new(0.3, 0.21), i]];
        assert!(PeriodMatrix::from_matrix(bad).is_err());
        let indefinite = [[i, C64::new(0.0, 2.0)], [C64::new(0.0, 2.0), i]];
        assert!(PeriodMatrix::from_matrix(indefinite).is_err());
    }

    #[test]
    fn distance_examples() {
        let t = tau();
        let a = TorusPoint::from_coords([0.9, 0.0, 0.0, 0.0]);
        let b = TorusPoint::from_coords([0.05, 0.0, 0.0, 0.0]);
        assert!((torus_distance(&a, &b, &t) - 0.15).abs() < 1e-12);
        assert_eq!(torus_distance(&a, &a, &t), 0.0);
        let shifted = TorusPoint::from_coords([1.9, -1.0, 2.0, 3.0]);
        assert!(torus_distance(&a, &shifted, &t) < 1e-12);
    }

    #[test]
    fn distance_oracle_brute_force() {
        // independent oracle: scan a wide box of lattice translates
        let t = tau();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = TorusPoint::random(&mut rng);
            let b = TorusPoint::random(&mut rng);
            let (ca, cb) = (a.coords(), b.coords());
            let mut best = f64::INFINITY;
            for m1 in -3..=3 {
                for m2 in -3..=3 {
                    for n1 in -3..=3 {
                        for n2 in -3..=3 {
                            let c = [
                                ca[0] - cb[0] + m1 as f64,
                                ca[1] - cb[1] + m2 as f64,
                                ca[2] - cb[2] + n1 as f64,
                                ca[3] - cb[3] + n2 as f64,
                            ];
                            let z = embed_coords(c, &t);
                            best = best.min((z[0].norm_sqr() + z[1].norm_sqr()).sqrt());
                        }
                    }
                }
            }
            assert!((torus_distance(&a, &b, &t) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn two_torsion_points() {
        let t = tau();
        let pts = two_torsion();
        assert_eq!(pts.len(), 16);
        assert_eq!(pts[0], TorusPoint::origin());
        for e in &pts {
            assert!(torus_distance(&(*e + *e), &TorusPoint::origin(), &t) == 0.0);
            assert!(e.is_two_torsion());
        }
        let mut sorted = pts.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 16);
        // lexicographic in (q, p)
        let keys: Vec<[f64; 4]> = pts.iter().map(|e| { let c = e.coords(); [c[2], c[3], c[0], c[1]] }).collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn config_round_trip_and_validation() {
        let cfg = SurfaceConfig::default();
        let back = SurfaceConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
        assert!(cfg.with_truncation(2).validate().is_err());
        let loose = SurfaceConfig { rank_tol: 1e-2, ..cfg.clone() };
        assert!(loose.validate().is_err());
        let asym = cfg.to_json().replacen("0.3", "0.31", 1);
        assert!(SurfaceConfig::from_json(&asym).is_err());
    }

    #[test]
    fn exact_arithmetic() {
        let a = TorusPoint::from_coords([0.1, 0.7, 0.33, 0.999]);
        assert_eq!(-(-a), a);
        assert_eq!(a - a, TorusPoint::origin());
        assert_eq!(a.scale(3), a + a + a);
        assert!(torus_distance(&a.half().scale(2), &a, &tau()) < 1e-15);
    }
}
