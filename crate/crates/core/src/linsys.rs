//! Evaluation matrices and `h^0` for the twisted systems `|l|` and `|2l|`,
//! translates of the theta divisor through a scheme, their intersections,
//! singularities of sections of `L^2`, and the Gauss map of a translate.
//!
//! All function values are reported after multiplication by the positive
//! weight `exp(-k pi y^T (Im tau)^{-1} y)`, `y = Im z`, `k` the level. That
//! makes magnitudes lattice periodic; since the weight is a common positive
//! factor per support point it changes neither ranks nor zero sets, and at a
//! zero it does not affect Newton steps either.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schemes::{Functional, ZeroScheme};
use crate::solve::{gauss_newton, multistart, Eval, GnOptions, Root};
use crate::surface::{torus_distance, SurfaceConfig, TorusPoint};
use crate::theta::{Characteristic, Derivs, ThetaEngine};

/// Starts for two-unknown multistart solves.
pub const MULTISTART: usize = 64;

const AMBIGUITY_BAND: f64 = 10.0;

/// A twist of `|2l|`: sections `z -> Theta_s(z + c/2)` with the half taken
/// as [`TorusPoint::half`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct TwistParam {
    pub c: TorusPoint,
}

impl TwistParam {
    pub fn new(c: TorusPoint) -> Self {
        TwistParam { c }
    }

    pub fn zero() -> Self {
        TwistParam::default()
    }
}

/// A member of a twisted `|2l|`, given by its coefficients on the basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionL2 {
    pub lambda: [C64; 4],
    pub twist: TwistParam,
}

impl SectionL2 {
    pub fn new(lambda: [C64; 4], twist: TwistParam) -> Result<Self> {
        let n: f64 = lambda.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidConfig("section coefficients vanish".into()));
        }
        Ok(SectionL2 { lambda: lambda.map(|x| x / n), twist })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularityType {
    Node,
    Tacnode,
    Higher,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub point: TorusPoint,
    #[serde(rename = "type")]
    pub kind: SingularityType,
    /// Smallest over largest singular value of the Hessian.
    pub hessian_condition: f64,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn unit(v: [C64; 2]) -> [C64; 2] {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / n, v[1] / n]
}

fn add(a: [C64; 2], b: [C64; 2]) -> [C64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: [C64; 2], b: [C64; 2]) -> [C64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Directional derivative `D_t` of a derivative set: returns the jet of
/// `D_t f` one order lower.
fn directional(d: &Derivs, t: [C64; 2]) -> Derivs {
    let mut out = Derivs::default();
    for (idx, &(i, j)) in crate::theta::MULTI_INDICES.iter().enumerate() {
        if i + j < 3 {
            out.0[idx] = t[0] * d.get(i + 1, j) + t[1] * d.get(i, j + 1);
        }
    }
    out
}

/// Numerical rank: singular values above `tol * reference`. `Err` carries the
/// offending ratio when one lies inside the ambiguity band.
fn numerical_rank(svals: &[f64], reference: f64, tol: f64) -> std::result::Result<usize, f64> {
    let mut rank = 0;
    for &s in svals {
        let ratio = s / reference;
        if ratio > tol / AMBIGUITY_BAND && ratio < tol * AMBIGUITY_BAND {
            return Err(ratio);
        }
        if ratio >= tol * AMBIGUITY_BAND {
            rank += 1;
        }
    }
    Ok(rank)
}

pub(crate) fn singular_values(m: &DMatrix<C64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().cloned().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Numerical context: the configuration plus a prepared theta evaluator.
#[derive(Clone, Debug)]
pub struct Engine {
    cfg: SurfaceConfig,
    theta: ThetaEngine,
    theta_ref: f64,
    basis_ref: f64,
}

impl Engine {
    pub fn new(cfg: &SurfaceConfig) -> Result<Self> {
        cfg.validate()?;
        let theta = ThetaEngine::new(&cfg.tau, cfg.truncation_radius)?;
        let mut e = Engine { cfg: cfg.clone(), theta, theta_ref: 1.0, basis_ref: 1.0 };
        // RMS of the weighted values over a fixed grid of the cell
        let mut st = 0.0;
        let mut sb = 0.0;
        let k = 6;
        for idx in 0..k * k * k * k {
            let c = [idx % k, (idx / k) % k, (idx / (k * k)) % k, idx / (k * k * k)].map(|x| (x as f64 + 0.37) / k as f64);
            let z = TorusPoint::from_coords(c).embed_centered(&cfg.tau);
            st += e.theta_weighted(z, 0).value().norm_sqr();
            sb += e.basis_weighted(z, 0).iter().map(|d| d.value().norm_sqr()).sum::<f64>();
        }
        let n = (k * k * k * k) as f64;
        e.theta_ref = (st / n).sqrt();
        e.basis_ref = (sb / (4.0 * n)).sqrt();
        Ok(e)
    }

    pub fn cfg(&self) -> &SurfaceConfig {
        &self.cfg
    }

    pub fn theta_engine(&self) -> &ThetaEngine {
        &self.theta
    }

    fn metric(&self, z: [C64; 2]) -> f64 {
        let yi = self.cfg.tau.imag_inverse();
        let y = [z[0].im, z[1].im];
        y[0] * (yi[0][0] * y[0] + yi[0][1] * y[1]) + y[1] * (yi[1][0] * y[0] + yi[1][1] * y[1])
    }

    /// Weighted derivatives of `theta(w)` up to `order`, scaled to unit RMS.
    pub fn theta_weighted(&self, w: [C64; 2], order: usize) -> Derivs {
        let (lf, d) = self.theta.theta_jet(Characteristic::zero(), w, order);
        d.scale((lf - PI * self.metric(w)).exp() / self.theta_ref)
    }

    /// Weighted derivatives of the four basis functions at `w`.
    pub fn basis_weighted(&self, w: [C64; 2], order: usize) -> [Derivs; 4] {
        let (lf, d) = self.theta.basis_jets(w, order);
        let s = (lf - 2.0 * PI * self.metric(w)).exp() / self.basis_ref;
        d.map(|x| x.scale(s))
    }

    /// `c/2` in `C^2` for a twist.
    pub fn half_shift(&self, twist: &TwistParam) -> [C64; 2] {
        twist.c.half().embed(&self.cfg.tau)
    }

    fn embed(&self, p: &TorusPoint) -> [C64; 2] {
        p.embed_centered(&self.cfg.tau)
    }

    /// Rows `condition_j(z -> Theta_s(z + h))`, optionally with their
    /// derivatives in `h`.
    pub(crate) fn l2_matrix_at(&self, conds: &[Functional], h: [C64; 2], deriv: bool) -> (DMatrix<C64>, Option<[DMatrix<C64>; 2]>) {
        let n = conds.len();
        let mut m = DMatrix::from_element(n, 4, zero());
        let mut dm = deriv.then(|| [DMatrix::from_element(n, 4, zero()), DMatrix::from_element(n, 4, zero())]);
        let mut r = 0;
        while r < n {
            let p = conds[r].point;
            let mut end = r;
            let mut order = 0;
            while end < n && conds[end].point == p {
                order = order.max(conds[end].order());
                end += 1;
            }
            let w = add(self.embed(&p), h);
            let d = self.basis_weighted(w, order + deriv as usize);
            for row in r..end {
                for s in 0..4 {
                    m[(row, s)] = conds[row].apply(&d[s]);
                    if let Some(dm) = dm.as_mut() {
                        dm[0][(row, s)] = conds[row].apply_shifted(&d[s], 0);
                        dm[1][(row, s)] = conds[row].apply_shifted(&d[s], 1);
                    }
                }
            }
            r = end;
        }
        (m, dm)
    }

    /// Column `condition_j(z -> theta(z + c))` for the twisted `|l|`.
    pub(crate) fn l1_matrix_at(&self, conds: &[Functional], c: [C64; 2], deriv: bool) -> (DMatrix<C64>, Option<[DMatrix<C64>; 2]>) {
        let n = conds.len();
        let mut m = DMatrix::from_element(n, 1, zero());
        let mut dm = deriv.then(|| [DMatrix::from_element(n, 1, zero()), DMatrix::from_element(n, 1, zero())]);
        for (row, f) in conds.iter().enumerate() {
            let d = self.theta_weighted(add(self.embed(&f.point), c), f.order() + deriv as usize);
            m[(row, 0)] = f.apply(&d);
            if let Some(dm) = dm.as_mut() {
                dm[0][(row, 0)] = f.apply_shifted(&d, 0);
                dm[1][(row, 0)] = f.apply_shifted(&d, 1);
            }
        }
        (m, dm)
    }

    /// The `|X| x 4` matrix of conditions of `X` on the twisted `|2l|`.
    pub fn eval_matrix(&self, x: &ZeroScheme, twist: &TwistParam) -> Result<DMatrix<C64>> {
        if x.is_empty() {
            return Err(Error::InvalidScheme("empty scheme imposes no conditions".into()));
        }
        let conds = x.conditions()?;
        Ok(self.l2_matrix_at(&conds, self.half_shift(twist), false).0)
    }

    /// The `|X| x 1` matrix of conditions of `X` on `|l|` twisted by `c`.
    pub fn eval_matrix_l1(&self, x: &ZeroScheme, c: &TorusPoint) -> Result<DMatrix<C64>> {
        if x.is_empty() {
            return Err(Error::InvalidScheme("empty scheme imposes no conditions".into()));
        }
        let conds = x.conditions()?;
        Ok(self.l1_matrix_at(&conds, self.embed(c), false).0)
    }

    fn rank_with_retry(&self, compute: impl Fn(&Engine) -> Result<(Vec<f64>, f64)>) -> Result<usize> {
        let tol = self.cfg.rank_tol;
        let (s, reference) = compute(self)?;
        match numerical_rank(&s, reference, tol) {
            Ok(r) => Ok(r),
            Err(_) => {
                let fine = Engine::new(&self.cfg.with_truncation(2 * self.cfg.truncation_radius))?;
                let (s, reference) = compute(&fine)?;
                numerical_rank(&s, reference, tol).map_err(|ratio| Error::RankAmbiguous { ratio, tol })
            }
        }
    }

    /// `h^0(L^2 P I_X)` at the twist: `4 - rank`.
    pub fn h0(&self, x: &ZeroScheme, twist: &TwistParam) -> Result<usize> {
        let rank = self.rank_with_retry(|e| {
            let s = singular_values(&e.eval_matrix(x, twist)?);
            let smax = s[0];
            Ok((s, smax))
        })?;
        Ok(4 - rank)
    }

    /// `h^0(L P I_X)` for the twist `c`: 1 when `X` lies on `D_{-c}`.
    pub fn h0_l1(&self, x: &ZeroScheme, c: &TorusPoint) -> Result<usize> {
        let rank = self.rank_with_retry(|e| Ok((singular_values(&e.eval_matrix_l1(x, c)?), 1.0)))?;
        Ok(1 - rank)
    }

    pub(crate) fn rng(&self, tag: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    fn random_starts(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<[C64; 2]> {
        (0..n).map(|_| TorusPoint::random(rng).embed_centered(&self.cfg.tau)).collect()
    }

    fn solve(&self, f: &(dyn Fn([C64; 2]) -> Eval + Sync), starts: &[[C64; 2]], what: &str) -> Result<Vec<Root>> {
        let opts = GnOptions::default();
        let roots = multistart(&f, starts, &self.cfg.tau, self.cfg.point_tol, &opts);
        if roots.is_empty() {
            // a plateau just above the tolerance means the answer is unclear
            let best = starts
                .par_iter()
                .map(|&z| gauss_newton(&f, z, &opts).res_sq)
                .reduce(|| f64::INFINITY, f64::min);
            if best < 1e-12 {
                return Err(Error::NonConvergent(format!("{what}: residual plateau {best:e}")));
            }
        }
        Ok(roots)
    }

    /// All `u` with `X` contained in `D_u`, with multiplicities.
    pub fn lines_through(&self, x: &ZeroScheme) -> Result<Vec<(TorusPoint, usize)>> {
        if x.len() < 2 {
            return Err(Error::InvalidScheme("a single point lies on a one-parameter family of translates".into()));
        }
        let conds = x.conditions()?;
        let pts: Vec<[C64; 2]> = conds.iter().map(|f| self.embed(&f.point)).collect();
        let f = |u: [C64; 2]| -> Eval {
            let mut r = Vec::with_capacity(conds.len());
            let mut j = Vec::with_capacity(conds.len());
            for (f, z) in conds.iter().zip(&pts) {
                let d = self.theta_weighted(sub(*z, u), f.order() + 1);
                r.push(f.apply(&d));
                j.push([-f.apply_shifted(&d, 0), -f.apply_shifted(&d, 1)]);
            }
            (r, j)
        };
        let mut rng = self.rng(0x11);
        let starts = self.random_starts(&mut rng, MULTISTART);
        Ok(self.solve(&f, &starts, "lines_through")?.into_iter().map(|r| (r.point, r.multiplicity)).collect())
    }

    /// `D_u` meets `D_v`: points with multiplicities, total 2.
    pub fn line_intersection(&self, u: &TorusPoint, v: &TorusPoint) -> Result<Vec<(TorusPoint, usize)>> {
        if torus_distance(u, v, &self.cfg.tau) < self.cfg.point_tol {
            return Err(Error::CoincidentLines);
        }
        let (eu, ev) = (self.embed(u), self.embed(v));
        let f = |z: [C64; 2]| -> Eval {
            let a = self.theta_weighted(sub(z, eu), 1);
            let b = self.theta_weighted(sub(z, ev), 1);
            (vec![a.value(), b.value()], vec![a.gradient(), b.gradient()])
        };
        let mut rng = self.rng(0x12);
        let starts = self.random_starts(&mut rng, MULTISTART);
        Ok(self.solve(&f, &starts, "line_intersection")?.into_iter().map(|r| (r.point, r.multiplicity)).collect())
    }

    /// Weighted derivatives of a section at `z`.
    pub fn section_weighted(&self, s: &SectionL2, z: [C64; 2], order: usize) -> Derivs {
        let d = self.basis_weighted(add(z, self.half_shift(&s.twist)), order);
        let mut out = Derivs::default();
        for (k, dk) in d.iter().enumerate() {
            for i in 0..out.0.len() {
                out.0[i] += s.lambda[k] * dk.0[i];
            }
        }
        out
    }

    /// The reducible member `D_x + D_{-x}` of the untwisted `|2l|`, i.e.
    /// `theta(z + x) theta(z - x)`.
    pub fn kummer_section(&self, x: &TorusPoint) -> SectionL2 {
        let d = self.basis_weighted(self.embed(x), 0);
        SectionL2::new(d.map(|v| v.value()), TwistParam::zero()).expect("basis has no common zero")
    }

    /// A random member of the untwisted `|2l|` through `e`.
    pub fn random_section_through(&self, e: &TorusPoint, rng: &mut impl Rng) -> SectionL2 {
        let v = self.basis_weighted(self.embed(e), 0).map(|d| d.value());
        let mu: [C64; 4] = std::array::from_fn(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let dot: C64 = mu.iter().zip(&v).map(|(a, b)| a * b).sum();
        let nn: f64 = v.iter().map(|b| b.norm_sqr()).sum();
        let lambda = std::array::from_fn(|k| mu[k] - v[k].conj() * (dot / nn));
        SectionL2::new(lambda, TwistParam::zero()).expect("nonzero coefficients")
    }

    /// Singular points of the divisor of `s`, classified.
    pub fn singular_points(&self, s: &SectionL2) -> Result<Vec<SingularityReport>> {
        let mut rng = self.rng(0x13);
        let mut found: Vec<[C64; 2]> = Vec::new();
        let sing = |z: [C64; 2]| -> Eval {
            let d = self.section_weighted(s, z, 2);
            let h = d.hessian();
            (vec![d.value(), d.gradient()[0], d.gradient()[1]], vec![d.gradient(), h[0], h[1]])
        };
        // tacnodes converge linearly, so iterate down to the noise floor
        let fine = GnOptions { max_iter: 400, tol_sq: 1e-30, max_step: 1e-2 };
        for _ in 0..2 {
            let v = unit([C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5), C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)]);
            // points of the divisor where the tangent contains v; every singular
            // point is among them
            let polar = |z: [C64; 2]| -> Eval {
                let d = self.section_weighted(s, z, 2);
                let dv = directional(&d, v);
                (vec![d.value(), dv.value()], vec![d.gradient(), dv.gradient()])
            };
            let starts = self.random_starts(&mut rng, 2 * MULTISTART);
            let cands: Vec<Option<[C64; 2]>> = starts
                .par_iter()
                .map(|&z0| {
                    let r = gauss_newton(&polar, z0, &GnOptions::default());
                    if !r.converged {
                        return None;
                    }
                    let g = self.section_weighted(s, r.z, 1).gradient();
                    if g[0].norm() + g[1].norm() > 1e-2 {
                        return None;
                    }
                    let q = gauss_newton(&sing, r.z, &fine);
                    (q.res_sq < 1e-18).then_some(q.z)
                })
                .collect();
            found.extend(cands.into_iter().flatten());
        }
        let tau = &self.cfg.tau;
        let mut pts: Vec<(TorusPoint, [C64; 2], f64)> = Vec::new();
        for z in found {
            let p = TorusPoint::from_complex(z, tau);
            let r = crate::solve::res_sq(&sing(z).0);
            match pts.iter_mut().find(|q| torus_distance(&q.0, &p, tau) < 1e-4) {
                Some(q) => {
                    if r < q.2 {
                        *q = (p, z, r);
                    }
                }
                None => pts.push((p, z, r)),
            }
        }
        pts.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(pts.into_iter().map(|(_, z, _)| self.classify_singularity(s, z)).collect())
    }

    /// Node / tacnode / higher at a singular point `z` of the divisor of `s`.
    pub fn classify_singularity(&self, s: &SectionL2, z: [C64; 2]) -> SingularityReport {
        let point = TorusPoint::from_complex(z, &self.cfg.tau);
        let h = self.section_weighted(s, z, 2).hessian();
        let hm = DMatrix::from_fn(2, 2, |i, j| h[i][j]);
        let svd = hm.svd(false, true);
        let (mut i_big, mut i_small) = (0, 1);
        if svd.singular_values[1] > svd.singular_values[0] {
            std::mem::swap(&mut i_big, &mut i_small);
        }
        let big = svd.singular_values[i_big];
        let small = svd.singular_values[i_small];
        let cond = if big > 0.0 { small / big } else { 0.0 };
        let kind = if cond > self.cfg.rank_tol {
            SingularityType::Node
        } else if big < 1e-8 {
            SingularityType::Higher
        } else {
            let vt = svd.v_t.expect("requested");
            // rows of V^H are conjugated right singular vectors
            let v = [vt[(i_small, 0)].conj(), vt[(i_small, 1)].conj()];
            let w = [vt[(i_big, 0)].conj(), vt[(i_big, 1)].conj()];
            match self.tangency_exponent(s, z, v, w) {
                Some(e) if (e - 4.0).abs() < 0.5 => SingularityType::Tacnode,
                _ => SingularityType::Higher,
            }
        };
        SingularityReport { point, kind, hessian_condition: cond }
    }

    /// Growth exponent of `s` along the polar curve `D_w s = 0` leaving `z`
    /// in direction `v`: 4 for a simple tacnode.
    fn tangency_exponent(&self, s: &SectionL2, z: [C64; 2], v: [C64; 2], w: [C64; 2]) -> Option<f64> {
        let on_polar = |t: f64| -> Option<C64> {
            let base = [z[0] + v[0] * t, z[1] + v[1] * t];
            let mut sw = zero();
            for _ in 0..50 {
                let p = [base[0] + w[0] * sw, base[1] + w[1] * sw];
                let d = self.section_weighted(s, p, 2);
                let dw = directional(&d, w);
                let g = dw.value();
                let dg = w[0] * dw.get(1, 0) + w[1] * dw.get(0, 1);
                if dg.norm() == 0.0 {
                    return None;
                }
                let step = g / dg;
                sw -= step;
                if step.norm() < 1e-15 {
                    break;
                }
            }
            let p = [base[0] + w[0] * sw, base[1] + w[1] * sw];
            Some(self.section_weighted(s, p, 0).value())
        };
        let ts = [0.004, 0.008, 0.016];
        let g: Vec<f64> = ts.iter().map(|&t| on_polar(t).map(|x| x.norm())).collect::<Option<Vec<_>>>()?;
        if g.iter().any(|x| !(*x > 0.0)) {
            return None;
        }
        Some(0.5 * ((g[1] / g[0]).log2() + (g[2] / g[1]).log2()))
    }

    /// Points `u` of `D_p` whose translate `D_u` has tangent `t` at `p`.
    pub fn gauss_map_fiber(&self, p: &TorusPoint, t: [C64; 2]) -> Result<Vec<(TorusPoint, usize)>> {
        let n = (t[0].norm_sqr() + t[1].norm_sqr()).sqrt();
        if !(n > 0.0) {
            return Err(Error::InvalidConfig("direction must be nonzero".into()));
        }
        let t = unit(t);
        let f = self.gauss_system(t);
        let mut rng = self.rng(0x14);
        let starts = self.random_starts(&mut rng, MULTISTART);
        let roots = self.solve(&f, &starts, "gauss_map_fiber")?;
        let ep = self.embed(p);
        let mut out: Vec<(TorusPoint, usize)> =
            roots.into_iter().map(|r| (TorusPoint::from_complex(sub(ep, r.z), &self.cfg.tau), r.multiplicity)).collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    /// `theta(w) = 0 = D_t theta(w)`; `w = p - u` in the Gauss-map fiber.
    fn gauss_system(&self, t: [C64; 2]) -> impl Fn([C64; 2]) -> Eval + Sync + '_ {
        move |w: [C64; 2]| -> Eval {
            let d = self.theta_weighted(w, 2);
            let dt = directional(&d, t);
            (vec![d.value(), dt.value()], vec![d.gradient(), dt.gradient()])
        }
    }

    /// Counts branch values of the Gauss map of a translate by monodromy: the
    /// sphere of directions is cut into `lat x lon` cells under a random
    /// rotation and a fiber point is continued around every cell boundary.
    /// A cell whose loop swaps the two sheets contains a branch value.
    pub fn gauss_branch_count(&self, lat: usize, lon: usize) -> Result<usize> {
        let mut rng = self.rng(0x15);
        let rot = random_rotation(&mut rng);
        let vertex = |i: usize, j: usize| -> [f64; 2] {
            [-0.5 * PI + PI * i as f64 / lat as f64, 2.0 * PI * j as f64 / lon as f64]
        };
        let dir = |a: [f64; 2]| -> [C64; 2] {
            let x0 = [a[0].cos() * a[1].cos(), a[0].cos() * a[1].sin(), a[0].sin()];
            let x: [f64; 3] = std::array::from_fn(|r| rot[r][0] * x0[0] + rot[r][1] * x0[1] + rot[r][2] * x0[2]);
            // stereographic point [1 + x3 : x1 + i x2] = [x1 - i x2 : 1 - x3]
            let t = if x[2] > 0.0 {
                [C64::new(1.0 + x[2], 0.0), C64::new(x[0], x[1])]
            } else {
                [C64::new(x[0], -x[1]), C64::new(1.0 - x[2], 0.0)]
            };
            unit(t)
        };
        // vertex ids: the poles are single vertices
        let vid = |i: usize, j: usize| -> usize {
            if i == 0 {
                0
            } else if i == lat {
                1
            } else {
                2 + (i - 1) * lon + (j % lon)
            }
        };
        let nverts = 2 + (lat - 1) * lon;
        let mut coords = vec![[0.0; 2]; nverts];
        for i in 0..=lat {
            for j in 0..lon {
                coords[vid(i, j)] = vertex(i, j);
            }
        }
        let starts = self.random_starts(&mut rng, 16);
        let fibers: Vec<Option<[C64; 2]>> = coords
            .par_iter()
            .map(|&a| {
                let f = self.gauss_system(dir(a));
                starts.iter().map(|&z| gauss_newton(&f, z, &GnOptions::default())).find(|r| r.converged).map(|r| r.z)
            })
            .collect();
        let fibers: Vec<[C64; 2]> = fibers
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::NonConvergent("Gauss fiber at a grid vertex".into()))?;
        // parallel edges (i, j) -> (i, j + 1) away from the poles, then
        // meridian edges (i, j) -> (i + 1, j)
        let mut edges: Vec<(usize, usize, [f64; 2], [f64; 2])> = Vec::new();
        for i in 1..lat {
            for j in 0..lon {
                edges.push((vid(i, j), vid(i, j + 1), vertex(i, j), vertex(i, j + 1)));
            }
        }
        for i in 0..lat {
            for j in 0..lon {
                edges.push((vid(i, j), vid(i + 1, j), vertex(i, j), vertex(i + 1, j)));
            }
        }
        let signs: Vec<Option<i8>> = edges
            .par_iter()
            .map(|&(va, vb, a, b)| self.continue_fiber(fibers[va], fibers[vb], a, b, &dir))
            .collect();
        let signs: Vec<i8> = signs
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::NonConvergent("Gauss fiber continuation".into()))?;
        let par = |i: usize, j: usize| if i == 0 || i == lat { 1 } else { signs[(i - 1) * lon + j % lon] };
        let mer = |i: usize, j: usize| signs[(lat - 1) * lon + i * lon + j % lon];
        let mut swaps = 0;
        for i in 0..lat {
            for j in 0..lon {
                if par(i, j) * mer(i, j + 1) * par(i + 1, j) * mer(i, j) < 0 {
                    swaps += 1;
                }
            }
        }
        Ok(swaps)
    }

    /// Continues the fiber point `wa` along the arc from angles `a` to `b`
    /// and reports whether it arrives at `wb` (+1) or at `-wb` (-1).
    fn continue_fiber(&self, wa: [C64; 2], wb: [C64; 2], a: [f64; 2], b: [f64; 2], dir: &(dyn Fn([f64; 2]) -> [C64; 2] + Sync)) -> Option<i8> {
        let tau = &self.cfg.tau;
        let mut w = wa;
        let mut s = 0.0f64;
        let mut h = 1.0 / 16.0;
        let opts = GnOptions { max_iter: 30, tol_sq: 1e-24, max_step: 0.05 };
        let mut guard = 0;
        while s < 1.0 {
            guard += 1;
            if guard > 20_000 {
                return None;
            }
            let st = (s + h).min(1.0);
            let ang = [a[0] + (b[0] - a[0]) * st, a[1] + (b[1] - a[1]) * st];
            let f = self.gauss_system(dir(ang));
            let r = gauss_newton(&f, w, &opts);
            let here = TorusPoint::from_complex(w, tau);
            let other = -here;
            let gap = torus_distance(&here, &other, tau);
            let moved = ((r.z[0] - w[0]).norm_sqr() + (r.z[1] - w[1]).norm_sqr()).sqrt();
            if r.converged && moved < 0.3 * gap.max(1e-9) && moved < 0.05 {
                w = r.z;
                s = st;
                h = (h * 1.5).min(1.0 / 16.0);
            } else {
                h *= 0.5;
                if h < 1e-9 {
                    return None;
                }
            }
        }
        let end = TorusPoint::from_complex(w, tau);
        let target = TorusPoint::from_complex(wb, tau);
        let same = torus_distance(&end, &target, tau);
        let flipped = torus_distance(&end, &(-target), tau);
        if same < 1e-6 && flipped > 1e-6 {
            Some(1)
        } else if flipped < 1e-6 && same > 1e-6 {
            Some(-1)
        } else {
            None
        }
    }

    /// A random point of `D_u`.
    pub fn random_point_on_line(&self, u: &TorusPoint, rng: &mut impl Rng) -> TorusPoint {
        let eu = self.embed(u);
        loop {
            let mut w = TorusPoint::random(rng).embed_centered(&self.cfg.tau);
            for _ in 0..100 {
                let d = self.theta_weighted(w, 1);
                let g = d.gradient();
                let gn = g[0].norm_sqr() + g[1].norm_sqr();
                if gn == 0.0 {
                    break;
                }
                // minimum-norm Newton step onto the curve
                let k = d.value() / gn;
                let step = [g[0].conj() * k, g[1].conj() * k];
                let len = (step[0].norm_sqr() + step[1].norm_sqr()).sqrt();
                let scale = if len > 0.1 { 0.1 / len } else { 1.0 };
                w = [w[0] - step[0] * scale, w[1] - step[1] * scale];
                if d.value().norm() < 1e-15 {
                    break;
                }
            }
            if self.theta_weighted(w, 0).value().norm() < 1e-13 {
                return TorusPoint::from_complex(add(w, eu), &self.cfg.tau);
            }
        }
    }

    /// Tangent direction of `D_u` at a point `z` on it.
    pub fn tangent(&self, u: &TorusPoint, z: &TorusPoint) -> [C64; 2] {
        let w = sub(self.embed(z), self.embed(u));
        let g = self.theta_weighted(w, 1).gradient();
        unit([g[1], -g[0]])
    }

    /// Weighted `theta(z - u)`: zero exactly on `D_u`.
    pub fn on_line_residual(&self, u: &TorusPoint, z: &TorusPoint) -> f64 {
        self.theta_weighted(sub(self.embed(z), self.embed(u)), 0).value().norm()
    }
}

fn random_rotation(rng: &mut impl Rng) -> [[f64; 3]; 3] {
    // uniform unit quaternion
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = [a * (2.0 * PI * u2).sin(), a * (2.0 * PI * u2).cos(), b * (2.0 * PI * u3).sin(), b * (2.0 * PI * u3).cos()];
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn eval_matrix(x: &ZeroScheme, twist: &TwistParam, cfg: &SurfaceConfig) -> Result<DMatrix<C64>> {
    Engine::new(cfg)?.eval_matrix(x, twist)
}

pub fn h0(x: &ZeroScheme, twist: &TwistParam, cfg: &SurfaceConfig) -> Result<usize> {
    Engine::new(cfg)?.h0(x, twist)
}

pub fn lines_through(x: &ZeroScheme, cfg: &SurfaceConfig) -> Result<Vec<(TorusPoint, usize)>> {
    Engine::new(cfg)?.lines_through(x)
}

pub fn line_intersection(u: &TorusPoint, v: &TorusPoint, cfg: &SurfaceConfig) -> Result<Vec<(TorusPoint, usize)>> {
    Engine::new(cfg)?.line_intersection(u, v)
}

pub fn singular_points(s: &SectionL2, cfg: &SurfaceConfig) -> Result<Vec<SingularityReport>> {
    Engine::new(cfg)?.singular_points(s)
}

pub fn gauss_map_fiber(p: &TorusPoint, t: [C64; 2], cfg: &SurfaceConfig) -> Result<Vec<(TorusPoint, usize)>> {
    Engine::new(cfg)?.gauss_map_fiber(p, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::Jet;
    use crate::surface::two_torsion;

    fn engine() -> Engine {
        Engine::new(&SurfaceConfig::default()).unwrap()
    }

    fn dist(a: &TorusPoint, b: &TorusPoint) -> f64 {
        torus_distance(a, b, &PeriodMatrix::default())
    }

    use crate::surface::PeriodMatrix;

    #[test]
    fn single_point_has_three_sections() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = ZeroScheme::reduced(&[TorusPoint::random(&mut rng)]).unwrap();
            let m = e.eval_matrix(&x, &TwistParam::new(TorusPoint::random(&mut rng))).unwrap();
            assert_eq!(m.shape(), (1, 4));
            assert_eq!(e.h0(&x, &TwistParam::new(TorusPoint::random(&mut rng))).unwrap(), 3);
        }
    }

    #[test]
    fn full_neighbourhood_of_two_torsion_point() {
        let e = engine();
        for t in two_torsion() {
            let x = ZeroScheme::new(vec![Jet::ye(t)]).unwrap();
            let m = e.eval_matrix(&x, &TwistParam::zero()).unwrap();
            // the gradient rows are a common multiple of the value row, so
            // they vanish in the symmetric trivialization
            let sv = singular_values(&m);
            assert!(sv[2] < 1e-10 * sv[0], "{t:?}: {sv:?}");
            assert!(e.h0(&x, &TwistParam::zero()).unwrap() >= 2);
        }
    }

    #[test]
    fn basis_values_are_independent() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<_> = (0..4).map(|_| TorusPoint::random(&mut rng)).collect();
        let x = ZeroScheme::reduced(&pts).unwrap();
        assert_eq!(e.h0(&x, &TwistParam::zero()).unwrap(), 0);
    }

    #[test]
    fn pair_lies_on_two_lines() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let (p, q) = (TorusPoint::random(&mut rng), TorusPoint::random(&mut rng));
            let lines = e.lines_through(&ZeroScheme::reduced(&[p, q]).unwrap()).unwrap();
            let total: usize = lines.iter().map(|l| l.1).sum();
            assert_eq!(total, 2, "{lines:?}");
            for (u, _) in &lines {
                assert!(e.on_line_residual(u, &p) < 1e-9 && e.on_line_residual(u, &q) < 1e-9);
            }
            // both lines meet in p and q
            if lines.len() == 2 {
                let meet = e.line_intersection(&lines[0].0, &lines[1].0).unwrap();
                for pt in [p, q] {
                    assert!(meet.iter().any(|m| dist(&m.0, &pt) < 1e-7), "{meet:?}");
                }
            }
        }
    }

    #[test]
    fn generic_triple_is_not_collinear() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<_> = (0..3).map(|_| TorusPoint::random(&mut rng)).collect();
        assert!(e.lines_through(&ZeroScheme::reduced(&pts).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn constructed_collinear_triple() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = TorusPoint::random(&mut rng);
        let pts: Vec<_> = (0..3).map(|_| e.random_point_on_line(&v, &mut rng)).collect();
        let lines = e.lines_through(&ZeroScheme::reduced(&pts).unwrap()).unwrap();
        assert_eq!(lines.len(), 1);
        assert!(dist(&lines[0].0, &v) < 1e-8);
    }

    #[test]
    fn six_two_torsion_points_on_theta_divisor() {
        let e = engine();
        let on: Vec<_> = two_torsion().into_iter().filter(|t| e.on_line_residual(&TorusPoint::origin(), t) < 1e-12).collect();
        assert_eq!(on.len(), 6);
    }

    #[test]
    fn double_line_through_pair() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let l = e.random_point_on_line(&TorusPoint::origin(), &mut rng);
        let p = TorusPoint::random(&mut rng);
        let q = p + l.scale(2);
        let lines = e.lines_through(&ZeroScheme::reduced(&[p, q]).unwrap()).unwrap();
        assert_eq!(lines.len(), 1, "{lines:?}");
        assert_eq!(lines[0].1, 2);
        assert!(dist(&lines[0].0, &(p + l)) < 1e-5);
    }

    #[test]
    fn coincident_lines_rejected() {
        let e = engine();
        let u = TorusPoint::from_coords([0.1, 0.2, 0.3, 0.4]);
        assert_eq!(e.line_intersection(&u, &u).unwrap_err(), Error::CoincidentLines);
    }

    #[test]
    fn tangent_lines_meet_doubly() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l = e.random_point_on_line(&TorusPoint::origin(), &mut rng);
        let meet = e.line_intersection(&-l, &l).unwrap();
        assert_eq!(meet.len(), 1, "{meet:?}");
        assert_eq!(meet[0].1, 2);
        assert!(dist(&meet[0].0, &TorusPoint::origin()) < 1e-5);
    }

    #[test]
    fn kummer_nodes() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = TorusPoint::random(&mut rng);
        let s = e.kummer_section(&x);
        let sing = e.singular_points(&s).unwrap();
        assert_eq!(sing.len(), 2, "{sing:?}");
        let meet = e.line_intersection(&x, &-x).unwrap();
        for r in &sing {
            assert_eq!(r.kind, SingularityType::Node);
            assert!(meet.iter().any(|m| dist(&m.0, &r.point) < 1e-7));
        }
    }

    #[test]
    fn kummer_tacnode() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = e.random_point_on_line(&TorusPoint::origin(), &mut rng);
        let sing = e.singular_points(&e.kummer_section(&l)).unwrap();
        assert_eq!(sing.len(), 1, "{sing:?}");
        assert_eq!(sing[0].kind, SingularityType::Tacnode);
        assert!(dist(&sing[0].point, &TorusPoint::origin()) < 1e-4);
    }

    #[test]
    fn node_at_two_torsion_point() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t = two_torsion()[5];
        let s = e.random_section_through(&t, &mut rng);
        let d = e.section_weighted(&s, t.embed_centered(&PeriodMatrix::default()), 1);
        assert!(d.value().norm() < 1e-12);
        assert!(d.gradient()[0].norm() < 1e-10 && d.gradient()[1].norm() < 1e-10);
        let r = e.classify_singularity(&s, t.embed_centered(&PeriodMatrix::default()));
        assert_eq!(r.kind, SingularityType::Node);
    }

    #[test]
    fn gauss_fiber_has_two_points() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = TorusPoint::random(&mut rng);
        let u = e.random_point_on_line(&p, &mut rng);
        // u is on D_p iff p is on D_u by evenness
        let t = e.tangent(&u, &p);
        let fiber = e.gauss_map_fiber(&p, t).unwrap();
        assert_eq!(fiber.len(), 2, "{fiber:?}");
        assert!(fiber.iter().any(|f| dist(&f.0, &u) < 1e-8));
    }

    #[test]
    fn gauss_map_has_six_branch_values() {
        let e = engine();
        assert_eq!(e.gauss_branch_count(24, 30).unwrap(), 6);
    }
}
