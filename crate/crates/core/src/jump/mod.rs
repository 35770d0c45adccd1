//! Jumping loci `S_1(X)` and `S_2(X)`: the twists at which the evaluation
//! matrix of `X` loses rank, found by a grid scan of the relative smallest
//! singular value followed by Gauss-Newton on a kernel formulation, then
//! split into isolated points and traced curves.

mod suites;

pub use suites::{default_trials, suite_names, verify_suite, verify_suite_with, SuiteReport, TrialFailure};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsys::{singular_values, Engine, TwistParam};
use crate::schemes::{Functional, ZeroScheme};
use crate::solve::{gauss_newton, Eval, GnOptions};
use crate::surface::{torus_distance, two_torsion, SurfaceConfig, TorusPoint};

/// Accept a refined twist when the relative singular value is below this.
pub const POINT_S_TOL: f64 = 1e-8;
const PROBE_RADIUS: f64 = 1e-3;
const TRACE_STEP: f64 = 0.04;

/// Which twisted system: `|l|` (`i = 1`) or `|2l|` (`i = 2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    One,
    Two,
}

impl Level {
    pub fn from_index(i: u8) -> Result<Level> {
        match i {
            1 => Ok(Level::One),
            2 => Ok(Level::Two),
            _ => Err(Error::InvalidConfig(format!("level must be 1 or 2, got {i}"))),
        }
    }

    fn ncols(self) -> usize {
        match self {
            Level::One => 1,
            Level::Two => 4,
        }
    }
}

/// Affine identification of twists with reported dual coordinates:
/// `reported = sign * c + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calibration {
    pub sign: i8,
    pub offset: TorusPoint,
}

impl Calibration {
    pub fn identity() -> Self {
        Calibration { sign: 1, offset: TorusPoint::origin() }
    }

    pub fn to_dual(&self, c: &TorusPoint) -> TorusPoint {
        c.scale(self.sign as i64) + self.offset
    }

    pub fn from_dual(&self, d: &TorusPoint) -> TorusPoint {
        (*d - self.offset).scale(self.sign as i64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocusKind {
    Empty,
    Finite,
    Curve,
    CurvePlusPoints,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpPoint {
    pub point: TorusPoint,
    pub height: usize,
    /// Relative singular value at the refined twist.
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpLocus {
    pub kind: LocusKind,
    pub generic_h0: usize,
    pub points: Vec<JumpPoint>,
    pub curve_samples: Vec<TorusPoint>,
    /// `beta` with `theta(c - beta) = 0` on the first traced component, when
    /// that component is a theta translate.
    pub curve_witness: Option<TorusPoint>,
    /// Witnesses of every traced component that admits one.
    pub witnesses: Vec<TorusPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Discover,
    Confirm,
}

#[derive(Clone, Debug)]
pub struct JumpOptions {
    pub mode: Mode,
    /// Points per lattice coordinate of the discovery grid.
    pub grid: usize,
    /// Most local minima of the grid refined.
    pub max_seeds: usize,
    /// Dual points to confirm (calibrated coordinates).
    pub predictions: Vec<TorusPoint>,
    pub curve_samples: usize,
}

impl Default for JumpOptions {
    fn default() -> Self {
        JumpOptions { mode: Mode::Discover, grid: 12, max_seeds: 96, predictions: Vec::new(), curve_samples: 40 }
    }
}

impl JumpOptions {
    pub fn confirm(predictions: Vec<TorusPoint>) -> Self {
        JumpOptions { mode: Mode::Confirm, predictions, ..Default::default() }
    }
}

/// The determinantal problem of one scheme at one level. The unknown `h` is
/// the shift inside the sections: `c/2` at level two, `c` at level one.
pub struct Determinantal<'a> {
    engine: &'a Engine,
    scheme: ZeroScheme,
    conds: Vec<Functional>,
    level: Level,
    rank: usize,
}

/// A converged twist together with the kernel parametrization used to reach it.
#[derive(Clone, Debug)]
struct Refined {
    h: [C64; 2],
    s: f64,
    frame: DMatrix<C64>,
    b: DMatrix<C64>,
}

fn norm(v: [C64; 2]) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

fn random_unit(rng: &mut impl Rng) -> [C64; 2] {
    let v = [C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5), C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)];
    let n = norm(v);
    [v[0] / n, v[1] / n]
}

impl<'a> Determinantal<'a> {
    pub fn new(engine: &'a Engine, x: &ZeroScheme, level: Level) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidScheme("empty scheme".into()));
        }
        let conds = x.conditions()?;
        let mut d = Determinantal { engine, scheme: x.clone(), conds, level, rank: 0 };
        let mut rng = engine.rng(0x21);
        let tol = engine.cfg().rank_tol;
        let mut rank = 0;
        for _ in 0..8 {
            let h = TorusPoint::random(&mut rng).embed_centered(&engine.cfg().tau);
            let sv = singular_values(&d.matrix(h, false).0);
            let r = match level {
                Level::Two => sv.iter().filter(|&&s| s > tol * sv[0]).count(),
                Level::One => (d.level_one_measure(&sv) > tol) as usize,
            };
            rank = rank.max(r);
        }
        d.rank = rank;
        Ok(d)
    }

    pub fn generic_rank(&self) -> usize {
        self.rank
    }

    pub fn generic_h0(&self) -> usize {
        self.level.ncols() - self.rank
    }

    fn matrix(&self, h: [C64; 2], deriv: bool) -> (DMatrix<C64>, Option<[DMatrix<C64>; 2]>) {
        match self.level {
            Level::One => self.engine.l1_matrix_at(&self.conds, h, deriv),
            Level::Two => self.engine.l2_matrix_at(&self.conds, h, deriv),
        }
    }

    fn level_one_measure(&self, sv: &[f64]) -> f64 {
        sv[0] / (self.conds.len() as f64).sqrt()
    }

    /// Relative size of the singular value whose vanishing means a jump.
    fn s_of(&self, sv: &[f64]) -> f64 {
        match self.level {
            Level::One => self.level_one_measure(sv),
            // a single row can only drop rank by vanishing outright
            Level::Two if self.rank <= 1 => self.level_one_measure(sv),
            Level::Two => sv[self.rank - 1] / sv[0],
        }
    }

    pub fn s_at_h(&self, h: [C64; 2]) -> f64 {
        self.s_of(&singular_values(&self.matrix(h, false).0))
    }

    /// The shift `h` used for a twist `c`.
    pub fn h_of(&self, c: &TorusPoint) -> [C64; 2] {
        let tau = &self.engine.cfg().tau;
        match self.level {
            Level::One => c.embed_centered(tau),
            Level::Two => c.half().embed(tau),
        }
    }

    pub fn c_of(&self, h: [C64; 2]) -> TorusPoint {
        let tau = &self.engine.cfg().tau;
        match self.level {
            Level::One => TorusPoint::from_complex(h, tau),
            Level::Two => TorusPoint::from_complex([h[0] * 2.0, h[1] * 2.0], tau),
        }
    }

    pub fn s_at(&self, c: &TorusPoint) -> f64 {
        self.s_at_h(self.h_of(c))
    }

    pub fn h0_at(&self, c: &TorusPoint) -> Result<usize> {
        match self.level {
            Level::One => self.engine.h0_l1(&self.scheme, c),
            Level::Two => self.engine.h0(&self.scheme, &TwistParam::new(*c)),
        }
    }

    /// Kernel dimension at a jump.
    fn kdim(&self) -> usize {
        self.level.ncols() - self.rank + 1
    }

    fn frame_at(&self, h: [C64; 2]) -> DMatrix<C64> {
        let m = self.matrix(h, false).0;
        let n = self.level.ncols();
        let svd = m.svd(false, true);
        let vt = svd.v_t.expect("requested");
        // order right singular vectors by decreasing singular value; nalgebra
        // returns min(rows, cols) of them, so complete to a basis if needed
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
        let mut cols: Vec<nalgebra::DVector<C64>> = idx.iter().map(|&i| vt.row(i).adjoint().into_owned()).collect();
        let mut e = 0;
        while cols.len() < n {
            let mut v = nalgebra::DVector::from_element(n, C64::new(0.0, 0.0));
            v[e] = C64::new(1.0, 0.0);
            for c in &cols {
                let p = c.dotc(&v);
                v -= c * p;
            }
            let nv = v.norm();
            if nv > 1e-6 {
                cols.push(v / C64::new(nv, 0.0));
            }
            e += 1;
        }
        // kernel candidates first, then the rest
        let k = self.kdim();
        let mut ordered = cols[n - k..].to_vec();
        ordered.extend_from_slice(&cols[..n - k]);
        DMatrix::from_columns(&ordered)
    }

    /// Gauss-Newton on `M(h) (G_ker + G_rest B) = 0` in the unknowns `(h, B)`.
    /// Minimum-norm steps make it project onto the locus when that is a curve.
    fn refine(&self, h0: [C64; 2], frame: Option<(DMatrix<C64>, DMatrix<C64>)>, max_iter: usize) -> Option<Refined> {
        let n = self.level.ncols();
        let k = self.kdim();
        let nb = n - k;
        let (frame, mut b) = frame.unwrap_or_else(|| (self.frame_at(h0), DMatrix::from_element(nb, k, C64::new(0.0, 0.0))));
        let gk = frame.columns(0, k).into_owned();
        let gr = frame.columns(k, nb).into_owned();
        let mut h = h0;
        let residual = |h: [C64; 2], b: &DMatrix<C64>| -> (DMatrix<C64>, Option<[DMatrix<C64>; 2]>, DMatrix<C64>) {
            let (m, dm) = self.matrix(h, true);
            let v = &gk + &gr * b;
            let f = &m * &v;
            (m, dm, f)
        };
        let (mut m, mut dm, mut f) = residual(h, &b);
        let mut fnorm = f.norm();
        for _ in 0..max_iter {
            let scale = singular_values(&m)[0];
            if fnorm < 1e-14 * scale {
                break;
            }
            let rows = f.len();
            let ncol = 2 + nb * k;
            let mut jac = DMatrix::from_element(rows, ncol, C64::new(0.0, 0.0));
            let v = &gk + &gr * &b;
            let dmv = dm.as_ref().map(|d| [&d[0] * &v, &d[1] * &v]).expect("derivatives requested");
            let mgr = &m * &gr;
            let nrows = m.nrows();
            for col in 0..k {
                for r in 0..nrows {
                    let row = col * nrows + r;
                    jac[(row, 0)] = dmv[0][(r, col)];
                    jac[(row, 1)] = dmv[1][(r, col)];
                    for a in 0..nb {
                        jac[(row, 2 + a * k + col)] = mgr[(r, a)];
                    }
                }
            }
            let rhs = nalgebra::DVector::from_fn(rows, |i, _| -f[(i % nrows, i / nrows)]);
            let svd = jac.svd(true, true);
            let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
            let step = svd.solve(&rhs, smax * 1e-12).ok()?;
            let mut dh = [step[0], step[1]];
            let len = norm(dh);
            let mut shrink = 1.0;
            if len > 0.05 {
                shrink = 0.05 / len;
                dh = dh.map(|x| x * shrink);
            }
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..10 {
                let ht = [h[0] + dh[0] * lambda, h[1] + dh[1] * lambda];
                let bt = DMatrix::from_fn(nb, k, |a, col| b[(a, col)] + step[2 + a * k + col] * (shrink * lambda));
                let (mt, dmt, ft) = residual(ht, &bt);
                let fnt = ft.norm();
                if fnt.is_finite() && fnt < fnorm {
                    h = ht;
                    b = bt;
                    m = mt;
                    dm = dmt;
                    f = ft;
                    fnorm = fnt;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let s = self.s_at_h(h);
        (s < POINT_S_TOL).then(|| Refined { h, s, frame, b })
    }

    /// Tangent of the locus at a refined twist, from the null vector of the
    /// Jacobian of the kernel system.
    fn tangent(&self, r: &Refined) -> Option<Vec<C64>> {
        let n = self.level.ncols();
        let k = self.kdim();
        let nb = n - k;
        let (m, dm) = self.matrix(r.h, true);
        let dm = dm?;
        let gk = r.frame.columns(0, k).into_owned();
        let gr = r.frame.columns(k, nb).into_owned();
        let v = &gk + &gr * &r.b;
        let dmv = [&dm[0] * &v, &dm[1] * &v];
        let mgr = &m * &gr;
        let nrows = m.nrows();
        let ncol = 2 + nb * k;
        let mut jac = DMatrix::from_element(nrows * k, ncol, C64::new(0.0, 0.0));
        for col in 0..k {
            for rr in 0..nrows {
                let row = col * nrows + rr;
                jac[(row, 0)] = dmv[0][(rr, col)];
                jac[(row, 1)] = dmv[1][(rr, col)];
                for a in 0..nb {
                    jac[(row, 2 + a * k + col)] = mgr[(rr, a)];
                }
            }
        }
        // null vector: last right singular vector of the (padded) Jacobian
        let pad = if jac.nrows() < ncol {
            let mut p = DMatrix::from_element(ncol, ncol, C64::new(0.0, 0.0));
            p.view_mut((0, 0), (jac.nrows(), ncol)).copy_from(&jac);
            p
        } else {
            jac
        };
        let svd = pad.svd(false, true);
        let vt = svd.v_t?;
        let (imin, _) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
        let t: Vec<C64> = (0..ncol).map(|j| vt[(imin, j)].conj()).collect();
        // unit speed in h
        let nt = norm([t[0], t[1]]);
        (nt > 1e-6).then(|| t.iter().map(|x| x / nt).collect())
    }

    /// True when nearby starts converge to different points of the locus.
    fn on_curve(&self, r: &Refined, rng: &mut impl Rng) -> bool {
        let mut moved = 0;
        for _ in 0..4 {
            let d = random_unit(rng);
            let start = [r.h[0] + d[0] * PROBE_RADIUS, r.h[1] + d[1] * PROBE_RADIUS];
            if let Some(q) = self.refine(start, Some((r.frame.clone(), r.b.clone())), 60) {
                let dist = norm([q.h[0] - r.h[0], q.h[1] - r.h[1]]);
                // an isolated twist pulls the probe back to rounding level
                if dist > 1e-3 * PROBE_RADIUS {
                    moved += 1;
                }
            }
        }
        moved >= 2
    }

    /// Samples along the curve through `start` by tangent steps and
    /// projection back onto the locus.
    fn trace(&self, start: &Refined, count: usize, rng: &mut impl Rng) -> Vec<Refined> {
        let mut out = vec![start.clone()];
        let mut cur = start.clone();
        let mut failures = 0;
        while out.len() < count && failures < 8 * count {
            let phase = C64::from_polar(TRACE_STEP, rng.gen::<f64>() * std::f64::consts::TAU);
            let mut b = cur.b.clone();
            let pred = match self.tangent(&cur) {
                Some(t) => {
                    let k = b.ncols();
                    for (j, x) in t[2..].iter().enumerate() {
                        b[(j / k, j % k)] += x * phase;
                    }
                    [cur.h[0] + t[0] * phase, cur.h[1] + t[1] * phase]
                }
                None => {
                    let t = random_unit(rng);
                    [cur.h[0] + t[0] * phase, cur.h[1] + t[1] * phase]
                }
            };
            match self.refine(pred, Some((cur.frame.clone(), b)), 60) {
                Some(next) if norm([next.h[0] - cur.h[0], next.h[1] - cur.h[1]]) > 0.2 * TRACE_STEP => {
                    // fresh frame keeps the kernel parametrization well conditioned
                    let fresh = self.refine(next.h, None, 20).unwrap_or(next);
                    out.push(fresh.clone());
                    cur = fresh;
                }
                _ => {
                    failures += 1;
                    // restart from a random earlier sample
                    cur = out[rng.gen_range(0..out.len())].clone();
                }
            }
        }
        out
    }
}

/// Relative smallest singular value `s(c)` of the matrix of `X` at the dual
/// point `dual`.
pub fn s_value(engine: &Engine, x: &ZeroScheme, level: Level, cal: &Calibration, dual: &TorusPoint) -> Result<f64> {
    let d = Determinantal::new(engine, x, level)?;
    Ok(d.s_at(&cal.from_dual(dual)))
}

/// `log10 s` over the slice of dual points `(c1, c2, c3, c4)` with `c3, c4`
/// fixed and `c1, c2` on a `res x res` grid; rows are `[c1, c2, log10 s]`.
pub fn grid_slice(engine: &Engine, x: &ZeroScheme, level: Level, cal: &Calibration, c3: f64, c4: f64, res: usize) -> Result<Vec<[f64; 3]>> {
    if res == 0 || res > 512 {
        return Err(Error::InvalidConfig(format!("slice resolution must be in 1..=512, got {res}")));
    }
    let d = Determinantal::new(engine, x, level)?;
    Ok((0..res * res)
        .into_par_iter()
        .map(|idx| {
            let (c1, c2) = ((idx / res) as f64 / res as f64, (idx % res) as f64 / res as f64);
            let dual = TorusPoint::from_coords([c1, c2, c3, c4]);
            // exact zeros are clamped so the log stays finite
            [c1, c2, d.s_at(&cal.from_dual(&dual)).max(1e-300).log10()]
        })
        .collect())
}

/// Fits `beta` with `theta(c_k - beta) = 0` for all samples.
pub fn fit_witness(engine: &Engine, samples: &[TorusPoint]) -> Option<(TorusPoint, f64)> {
    if samples.len() < 3 {
        return None;
    }
    let tau = engine.cfg().tau;
    // farthest-point selection keeps the fit away from a short arc
    let mut chosen = vec![0usize];
    while chosen.len() < samples.len().min(12) {
        let next = (0..samples.len())
            .max_by(|&a, &b| {
                let da = chosen.iter().map(|&c| torus_distance(&samples[a], &samples[c], &tau)).fold(f64::INFINITY, f64::min);
                let db = chosen.iter().map(|&c| torus_distance(&samples[b], &samples[c], &tau)).fold(f64::INFINITY, f64::min);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        chosen.push(next);
    }
    let residuals = |pts: Vec<[C64; 2]>| {
        move |beta: [C64; 2]| -> Eval {
            let mut r = Vec::new();
            let mut j = Vec::new();
            for c in &pts {
                let d = engine.theta_weighted([c[0] - beta[0], c[1] - beta[1]], 1);
                r.push(d.value());
                let g = d.gradient();
                j.push([-g[0], -g[1]]);
            }
            (r, j)
        }
    };
    let fit = residuals(chosen.iter().map(|&i| samples[i].embed_centered(&tau)).collect());
    let all = residuals(samples.iter().map(|s| s.embed_centered(&tau)).collect());
    let mut rng = engine.rng(0x22);
    let starts: Vec<[C64; 2]> = (0..48).map(|_| TorusPoint::random(&mut rng).embed_centered(&tau)).collect();
    let opts = GnOptions { max_iter: 100, tol_sq: 1e-24, max_step: 0.1 };
    // samples carry their own error, so candidates are ranked, not thresholded
    starts
        .par_iter()
        .map(|&z| {
            let coarse = gauss_newton(&fit, z, &opts);
            let polished = gauss_newton(&all, coarse.z, &opts);
            let bp = TorusPoint::from_complex(polished.z, &tau);
            let worst = samples.iter().map(|s| engine.on_line_residual(&bp, s)).fold(0.0, f64::max);
            (bp, worst)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
}

fn dedup_push(list: &mut Vec<Refined>, r: Refined, d: &Determinantal, tol: f64) {
    let tau = d.engine.cfg().tau;
    let c = d.c_of(r.h);
    if !list.iter().any(|q| torus_distance(&d.c_of(q.h), &c, &tau) < tol) {
        list.push(r);
    }
}

/// Grid scan of `s` and its discrete local minima, best first.
fn grid_seeds(d: &Determinantal, grid: usize, max_seeds: usize) -> Vec<([C64; 2], f64)> {
    let n = grid;
    let total = n * n * n * n;
    let coord = |idx: usize| [idx % n, (idx / n) % n, (idx / (n * n)) % n, idx / (n * n * n)];
    let vals: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let c = TorusPoint::from_coords(coord(idx).map(|k| k as f64 / n as f64));
            d.s_at(&c)
        })
        .collect();
    let mut minima: Vec<(usize, f64)> = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let k = coord(idx);
            let v = vals[idx];
            for nb in 0..81usize {
                if nb == 40 {
                    continue;
                }
                let off = [nb % 3, (nb / 3) % 3, (nb / 9) % 3, nb / 27];
                let kk: Vec<usize> = (0..4).map(|a| (k[a] + n + off[a] - 1) % n).collect();
                let j = kk[0] + n * (kk[1] + n * (kk[2] + n * kk[3]));
                if vals[j] < v {
                    return None;
                }
            }
            Some((idx, v))
        })
        .collect();
    minima.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    minima.truncate(max_seeds);
    // shallow basins can lack a discrete minimum, so the lowest values join in
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap().then(a.cmp(&b)));
    for &idx in order.iter().take(max_seeds / 2) {
        if !minima.iter().any(|m| m.0 == idx) {
            minima.push((idx, vals[idx]));
        }
    }
    minima
        .into_iter()
        .map(|(idx, v)| {
            let c = TorusPoint::from_coords(coord(idx).map(|k| k as f64 / n as f64));
            (d.h_of(&c), v)
        })
        .collect()
}

/// Jumping locus of `X` at level `i` in calibrated dual coordinates.
pub fn jump_locus(x: &ZeroScheme, i: u8, cfg: &SurfaceConfig, cal: &Calibration) -> Result<JumpLocus> {
    let engine = Engine::new(cfg)?;
    jump_locus_with(&engine, x, Level::from_index(i)?, cal, &JumpOptions::default())
}

pub fn jump_locus_with(engine: &Engine, x: &ZeroScheme, level: Level, cal: &Calibration, opts: &JumpOptions) -> Result<JumpLocus> {
    let d = Determinantal::new(engine, x, level)?;
    let generic_h0 = d.generic_h0();
    let empty = JumpLocus {
        kind: LocusKind::Empty,
        generic_h0,
        points: vec![],
        curve_samples: vec![],
        curve_witness: None,
        witnesses: vec![],
    };
    let seeds: Vec<([C64; 2], f64)> = match opts.mode {
        Mode::Discover => grid_seeds(&d, opts.grid, opts.max_seeds),
        Mode::Confirm => opts.predictions.iter().map(|p| (d.h_of(&cal.from_dual(p)), 0.0)).collect(),
    };
    let tau = engine.cfg().tau;
    let refined: Vec<Option<Refined>> = seeds
        .par_iter()
        .map(|&(h, _)| {
            let r = d.refine(h, None, 80)?;
            // a confirmation only counts near the prediction it started from
            let wandered = opts.mode == Mode::Confirm && torus_distance(&d.c_of(r.h), &d.c_of(h), &tau) > 1e-3;
            (!wandered).then_some(r)
        })
        .collect();
    let tol = engine.cfg().point_tol;
    let mut found: Vec<Refined> = Vec::new();
    for r in refined.into_iter().flatten() {
        dedup_push(&mut found, r, &d, tol);
    }
    if found.is_empty() {
        if let Some(best) = seeds.iter().map(|s| s.1).reduce(f64::min) {
            if opts.mode == Mode::Discover && best < 1e-6 {
                return Err(Error::BudgetExhausted(format!("grid reached s = {best:e} but no twist refined")));
            }
        }
        return Ok(empty);
    }
    let mut rng = engine.rng(0x23);
    let curve_flags: Vec<bool> = found.iter().map(|r| d.on_curve(r, &mut rng)).collect();
    let mut samples: Vec<TorusPoint> = Vec::new();
    let mut witnesses: Vec<TorusPoint> = Vec::new();
    let mut unexplained: Vec<Vec<TorusPoint>> = Vec::new();
    let mut isolated = Vec::new();
    for (r, on_curve) in found.iter().zip(&curve_flags) {
        if !on_curve {
            isolated.push(r.clone());
            continue;
        }
        let dual = cal.to_dual(&d.c_of(r.h));
        // skip points on a component already traced
        let covered = witnesses.iter().any(|w| engine.on_line_residual(w, &dual) < 1e-6)
            || unexplained.iter().any(|comp| comp.iter().any(|s| torus_distance(s, &dual, &tau) < 1e-4));
        if covered {
            continue;
        }
        let traced = d.trace(r, opts.curve_samples, &mut rng);
        let comp: Vec<TorusPoint> = traced.iter().map(|t| cal.to_dual(&d.c_of(t.h))).collect();
        match fit_witness(engine, &comp) {
            Some((beta, worst)) if worst < 1e-6 => witnesses.push(beta),
            _ => unexplained.push(comp.clone()),
        }
        samples.extend(comp);
        if unexplained.len() >= 2 || witnesses.len() >= 4 {
            break;
        }
    }
    if !samples.is_empty() {
        // every sample must keep its rank drop with twice the lattice terms
        let fine_engine = Engine::new(&engine.cfg().with_truncation(2 * engine.cfg().truncation_radius))?;
        let fine = Determinantal::new(&fine_engine, x, level)?;
        samples.retain(|dual| fine.s_at(&cal.from_dual(dual)) < 1e-6);
    }
    let mut points = Vec::new();
    for r in isolated {
        let c = d.c_of(r.h);
        if witnesses.iter().any(|w| engine.on_line_residual(w, &cal.to_dual(&c)) < 1e-6) {
            continue;
        }
        let h0 = d.h0_at(&c)?;
        let height = h0.saturating_sub(generic_h0).max(1);
        points.push(JumpPoint { point: cal.to_dual(&c), height, s: r.s });
    }
    points.sort_by(|a, b| a.point.cmp(&b.point));
    let kind = match (samples.is_empty(), points.is_empty()) {
        (true, true) => LocusKind::Empty,
        (true, false) => LocusKind::Finite,
        (false, true) => LocusKind::Curve,
        (false, false) => LocusKind::CurvePlusPoints,
    };
    Ok(JumpLocus { kind, generic_h0, points, curve_samples: samples, curve_witness: witnesses.first().copied(), witnesses })
}

/// Fixes the identification of twists with dual points from the jump of
/// three random reduced pairs, which must sit at `-(p + q)`.
pub fn calibrate(cfg: &SurfaceConfig) -> Result<Calibration> {
    let engine = Engine::new(cfg)?;
    calibrate_with(&engine)
}

pub fn calibrate_with(engine: &Engine) -> Result<Calibration> {
    let mut rng = engine.rng(0x24);
    let tau = engine.cfg().tau;
    let mut pairs = Vec::new();
    for _ in 0..3 {
        let (p, q) = (TorusPoint::random(&mut rng), TorusPoint::random(&mut rng));
        let x = ZeroScheme::reduced(&[p, q])?;
        let locus = jump_locus_with(engine, &x, Level::Two, &Calibration::identity(), &JumpOptions::default())?;
        if locus.kind != LocusKind::Finite || locus.points.len() != 1 {
            return Err(Error::CalibrationInconsistent(format!("pair jump locus {:?} with {} points", locus.kind, locus.points.len())));
        }
        pairs.push((-(p + q), locus.points[0].point));
    }
    let tol = 10.0 * engine.cfg().point_tol;
    let mut good = Vec::new();
    for sign in [1i8, -1] {
        let offsets: Vec<TorusPoint> = pairs.iter().map(|(target, c)| *target - c.scale(sign as i64)).collect();
        if offsets.iter().all(|o| torus_distance(o, &offsets[0], &tau) < tol) {
            let mut offset = offsets[0];
            if let Some(t) = two_torsion().into_iter().find(|t| torus_distance(t, &offset, &tau) < 1e-8) {
                offset = t;
            }
            good.push(Calibration { sign, offset });
        }
    }
    good.into_iter().next().ok_or_else(|| Error::CalibrationInconsistent("no sign reproduces -(p + q) for all samples".into()))
}

#[cfg(test)]
mod tests;
