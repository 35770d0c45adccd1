//! Property suites: each draws random configurations from a per-trial seed,
//! computes loci or divisors, and compares them with the predicted answer.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{jump_locus_with, s_value, Calibration, JumpLocus, JumpOptions, Level, LocusKind};
use crate::error::{Error, Result};
use crate::ledger::{appendix_rows, balance_check, phi_ch, MukaiVector};
use crate::linsys::{Engine, SingularityType, TwistParam};
use crate::schemes::ZeroScheme;
use crate::surface::{torus_distance, two_torsion, SurfaceConfig, TorusPoint};
use crate::theta::Characteristic;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    pub passes: usize,
    pub failures: Vec<TrialFailure>,
    /// Sub-seed of every trial, in order.
    pub seeds: Vec<u64>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.passes == self.trials
    }
}

type Trial = fn(&Ctx, &mut ChaCha8Rng) -> std::result::Result<(), String>;

struct Suite {
    name: &'static str,
    trials: usize,
    run: Trial,
}

const SUITES: &[Suite] = &[
    Suite { name: "s2-point", trials: 20, run: s2_point },
    Suite { name: "s2-pair", trials: 20, run: s2_pair },
    Suite { name: "line-duality", trials: 20, run: line_duality },
    Suite { name: "s2-triple", trials: 20, run: s2_triple },
    Suite { name: "s2-collinear-triple", trials: 10, run: s2_collinear_triple },
    Suite { name: "s2-length4", trials: 10, run: s2_length4 },
    Suite { name: "s2-length4-kummer", trials: 10, run: s2_length4_kummer },
    Suite { name: "s2-length5", trials: 5, run: s2_length5 },
    Suite { name: "s2-length5-generic", trials: 5, run: s2_length5_generic },
    Suite { name: "s2-collinear-empty", trials: 5, run: s2_collinear_empty },
    Suite { name: "s2-length-bounds", trials: 5, run: s2_length_bounds },
    Suite { name: "singular-divisors", trials: 10, run: singular_divisors },
    Suite { name: "gauss-map", trials: 20, run: gauss_map },
    Suite { name: "theta-sanity", trials: 20, run: theta_sanity },
    Suite { name: "ledger-balance", trials: 1, run: ledger_balance },
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.name).collect()
}

/// Trial count a suite runs with when none is requested.
pub fn default_trials(name: &str) -> Result<usize> {
    find(name).map(|s| s.trials)
}

fn find(name: &str) -> Result<&'static Suite> {
    SUITES.iter().find(|s| s.name == name).ok_or_else(|| Error::UnknownSuite(name.to_string()))
}

struct Ctx<'a> {
    engine: &'a Engine,
    cal: Calibration,
    trial: usize,
}

fn trial_seed(base: u64, name: &str, trial: usize) -> u64 {
    // FNV-1a over the name keeps suites independent of registry order
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    base ^ h ^ (trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs `trials` seeded trials of a suite; `None` uses the suite default.
pub fn verify_suite(name: &str, cfg: &SurfaceConfig, cal: &Calibration, trials: Option<usize>) -> Result<SuiteReport> {
    let suite = find(name)?;
    let engine = Engine::new(cfg)?;
    verify_suite_with(&engine, suite.name, cal, trials)
}

pub fn verify_suite_with(engine: &Engine, name: &str, cal: &Calibration, trials: Option<usize>) -> Result<SuiteReport> {
    let suite = find(name)?;
    let n = trials.unwrap_or(suite.trials);
    let mut report = SuiteReport { suite: name.to_string(), trials: n, passes: 0, failures: vec![], seeds: vec![] };
    for trial in 0..n {
        let seed = trial_seed(engine.cfg().seed, name, trial);
        report.seeds.push(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ctx = Ctx { engine, cal: *cal, trial };
        match (suite.run)(&ctx, &mut rng) {
            Ok(()) => report.passes += 1,
            Err(detail) => report.failures.push(TrialFailure { trial, seed, detail }),
        }
    }
    Ok(report)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn num<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

impl Ctx<'_> {
    fn dist(&self, a: &TorusPoint, b: &TorusPoint) -> f64 {
        torus_distance(a, b, &self.engine.cfg().tau)
    }

    fn locus(&self, x: &[TorusPoint], level: Level) -> std::result::Result<JumpLocus, String> {
        let x = num(ZeroScheme::reduced(x))?;
        num(jump_locus_with(self.engine, &x, level, &self.cal, &JumpOptions::default()))
    }

    fn s_at(&self, x: &[TorusPoint], dual: &TorusPoint) -> std::result::Result<f64, String> {
        let x = num(ZeroScheme::reduced(x))?;
        num(s_value(self.engine, &x, Level::Two, &self.cal, dual))
    }

    fn random(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<TorusPoint> {
        (0..n).map(|_| TorusPoint::random(rng)).collect()
    }

    fn on_line(&self, v: &TorusPoint, n: usize, rng: &mut ChaCha8Rng) -> Vec<TorusPoint> {
        (0..n).map(|_| self.engine.random_point_on_line(v, rng)).collect()
    }

    /// Every predicted point matched by a distinct found point.
    fn matches(&self, locus: &JumpLocus, predicted: &[TorusPoint], tol: f64) -> std::result::Result<(), String> {
        ensure(locus.kind == LocusKind::Finite && locus.points.len() == predicted.len(), || {
            format!("expected {} isolated points, found {:?} with {} points", predicted.len(), locus.kind, locus.points.len())
        })?;
        for p in predicted {
            let best = locus.points.iter().map(|q| self.dist(&q.point, p)).fold(f64::INFINITY, f64::min);
            ensure(best < tol, || format!("predicted {p:?} missed by {best:e}"))?;
        }
        Ok(())
    }
}

fn sum(pts: &[TorusPoint]) -> TorusPoint {
    pts.iter().copied().sum()
}

const POINT_MATCH: f64 = 1e-5;

fn s2_point(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let p = ctx.random(1, rng);
    let x = num(ZeroScheme::reduced(&p))?;
    for _ in 0..200 {
        let h0 = num(ctx.engine.h0(&x, &TwistParam::new(TorusPoint::random(rng))))?;
        ensure(h0 == 3, || format!("h0 = {h0} at a random twist"))?;
    }
    let l = ctx.locus(&p, Level::Two)?;
    ensure(l.kind == LocusKind::Empty, || format!("locus {:?}", l.kind))
}

fn s2_pair(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let q = ctx.random(2, rng);
    let l = ctx.locus(&q, Level::Two)?;
    ctx.matches(&l, &[-sum(&q)], POINT_MATCH)
}

fn line_duality(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let q = ctx.random(2, rng);
    let x = num(ZeroScheme::reduced(&q))?;
    let lines = num(ctx.engine.lines_through(&x))?;
    let total: usize = lines.iter().map(|l| l.1).sum();
    ensure(total == 2, || format!("total line multiplicity {total}"))?;
    let predicted: Vec<TorusPoint> = lines.iter().map(|l| -l.0).collect();
    let l = ctx.locus(&q, Level::One)?;
    ctx.matches(&l, &predicted, POINT_MATCH)?;
    // p - q in 2 D_L: both lines coincide and the level-one locus is one point
    let lp = ctx.engine.random_point_on_line(&TorusPoint::origin(), rng);
    let p = TorusPoint::random(rng);
    let pair = [p, p + lp.scale(2)];
    let lines = num(ctx.engine.lines_through(&num(ZeroScheme::reduced(&pair))?))?;
    ensure(lines.len() == 1 && lines[0].1 == 2, || format!("constructed double line gave {lines:?}"))?;
    let l = ctx.locus(&pair, Level::One)?;
    ensure(l.points.len() == 1 && ctx.dist(&l.points[0].point, &-lines[0].0) < 1e-4, || {
        format!("nonreduced level-one locus: {} points", l.points.len())
    })
}

fn s2_triple(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let y = ctx.random(3, rng);
    let lines = num(ctx.engine.lines_through(&num(ZeroScheme::reduced(&y))?))?;
    ensure(lines.is_empty(), || "random triple came out collinear".into())?;
    let l = ctx.locus(&y, Level::Two)?;
    ctx.matches(&l, &[-(y[0] + y[1]), -(y[1] + y[2]), -(y[2] + y[0])], POINT_MATCH)?;
    let total: TorusPoint = l.points.iter().map(|p| p.point).sum();
    let d = ctx.dist(&total, &(-sum(&y)).scale(2));
    ensure(d < POINT_MATCH, || format!("sum of the locus off by {d:e}"))
}

fn collinear_curve(ctx: &Ctx, l: &JumpLocus, beta: &TorusPoint) -> std::result::Result<(), String> {
    ensure(matches!(l.kind, LocusKind::Curve | LocusKind::CurvePlusPoints), || format!("locus {:?}", l.kind))?;
    ensure(l.curve_samples.len() >= 32, || format!("{} curve samples", l.curve_samples.len()))?;
    let worst = l.curve_samples.iter().map(|s| ctx.engine.on_line_residual(beta, s)).fold(0.0, f64::max);
    ensure(worst < 1e-6, || format!("sample off the predicted translate by {worst:e}"))?;
    let w = l.curve_witness.ok_or("no witness fitted")?;
    ensure(ctx.dist(&w, beta) < 1e-6, || format!("witness {w:?} differs from {beta:?}"))
}

fn s2_collinear_triple(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let v = TorusPoint::random(rng);
    let y = ctx.on_line(&v, 3, rng);
    let l = ctx.locus(&y, Level::Two)?;
    collinear_curve(ctx, &l, &(v - sum(&y)))
}

fn triples(z: &[TorusPoint]) -> Vec<Vec<TorusPoint>> {
    (0..z.len()).map(|skip| z.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, p)| *p).collect()).collect()
}

/// All `-(a + b)` over pairs inside each length-3 subscheme lie on the locus.
fn pair_sums_on_locus(ctx: &Ctx, z: &[TorusPoint]) -> std::result::Result<(), String> {
    for y in triples(z) {
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            let c = -(y[a] + y[b]);
            let s = ctx.s_at(z, &c)?;
            ensure(s < 1e-6, || format!("s = {s:e} at the pair sum {c:?}"))?;
        }
    }
    Ok(())
}

fn length4_collinear(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let v = TorusPoint::random(rng);
    let z = ctx.on_line(&v, 4, rng);
    let l = ctx.locus(&z, Level::Two)?;
    ctx.matches(&l, &[v.scale(2) - sum(&z)], POINT_MATCH)
}

fn length4_generic(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let z = ctx.random(4, rng);
    let l = ctx.locus(&z, Level::Two)?;
    ensure(l.kind == LocusKind::Curve, || format!("generic length 4 gave {:?}", l.kind))?;
    pair_sums_on_locus(ctx, &z)
}

fn kummer_config(ctx: &Ctx, rng: &mut ChaCha8Rng) -> (TorusPoint, Vec<TorusPoint>) {
    let v = TorusPoint::random(rng);
    let mut z = ctx.on_line(&v, 3, rng);
    z.push(TorusPoint::random(rng));
    (v, z)
}

fn length4_kummer(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let (v, z) = kummer_config(ctx, rng);
    let l = ctx.locus(&z, Level::Two)?;
    ensure(l.kind == LocusKind::Curve, || format!("locus {:?}", l.kind))?;
    for beta in [v - sum(&z[..3]), -v - z[3]] {
        ensure(l.witnesses.iter().any(|w| ctx.dist(w, &beta) < 1e-6), || format!("no traced translate with witness {beta:?}"))?;
    }
    Ok(())
}

fn s2_length4(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    length4_collinear(ctx, rng).map_err(|e| format!("collinear: {e}"))?;
    length4_generic(ctx, rng).map_err(|e| format!("generic: {e}"))?;
    length4_kummer(ctx, rng).map_err(|e| format!("kummer: {e}"))
}

fn s2_length4_kummer(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let (_, z) = kummer_config(ctx, rng);
    let l = ctx.locus(&z, Level::Two)?;
    ensure(l.kind == LocusKind::Curve, || format!("locus {:?}", l.kind))?;
    pair_sums_on_locus(ctx, &z)
}

fn s2_length5_generic(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let w = ctx.random(5, rng);
    let l = ctx.locus(&w, Level::Two)?;
    ensure(l.kind == LocusKind::Finite && l.points.len() == 5, || format!("locus {:?} with {} points", l.kind, l.points.len()))?;
    ensure(l.points.iter().all(|p| p.height == 1), || "a point of height above one".into())
}

fn s2_length5(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    s2_length5_generic(ctx, rng).map_err(|e| format!("generic: {e}"))?;
    let v = TorusPoint::random(rng);
    let mut w = ctx.on_line(&v, 4, rng);
    w.push(TorusPoint::random(rng));
    let l = ctx.locus(&w, Level::Two).map_err(|e| format!("collinear Z: {e}"))?;
    ensure(matches!(l.kind, LocusKind::Curve | LocusKind::CurvePlusPoints), || format!("collinear Z: locus {:?}", l.kind))?;
    let beta = -v - w[4];
    ensure(l.witnesses.iter().any(|x| ctx.dist(x, &beta) < 1e-6), || format!("collinear Z: no component with witness {beta:?}"))?;
    let wc = ctx.on_line(&v, 5, rng);
    let l = ctx.locus(&wc, Level::Two).map_err(|e| format!("collinear W: {e}"))?;
    ensure(l.kind == LocusKind::Empty, || format!("collinear W: locus {:?}", l.kind))
}

fn s2_collinear_empty(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let v = TorusPoint::random(rng);
    let n = rng.gen_range(5..=6);
    let x = ctx.on_line(&v, n, rng);
    let l = ctx.locus(&x, Level::Two)?;
    ensure(l.kind == LocusKind::Empty, || format!("{n} collinear points: locus {:?}", l.kind))
}

fn bounded(ctx: &Ctx, x: &[TorusPoint], max: usize, must_contain: Option<TorusPoint>) -> std::result::Result<(), String> {
    let l = ctx.locus(x, Level::Two)?;
    ensure(matches!(l.kind, LocusKind::Empty | LocusKind::Finite), || format!("|X| = {}: locus {:?}", x.len(), l.kind))?;
    ensure(l.points.len() <= max, || format!("|X| = {}: {} points", x.len(), l.points.len()))?;
    if let Some(c) = must_contain {
        // confirm the predicted point, then require discovery to have seen it
        let s = ctx.s_at(x, &c)?;
        ensure(s < 1e-6, || format!("|X| = {}: s = {s:e} at the predicted point", x.len()))?;
        ensure(l.points.iter().any(|p| ctx.dist(&p.point, &c) < POINT_MATCH), || format!("|X| = {}: predicted point not discovered", x.len()))?;
    }
    Ok(())
}

fn s2_length_bounds(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    bounded(ctx, &ctx.random(6, rng), 3, None)?;
    bounded(ctx, &ctx.random(7, rng), 2, None)?;
    // three points on each of two translates: -(a + b) is a jump
    let (a, b) = (TorusPoint::random(rng), TorusPoint::random(rng));
    let mut x = ctx.on_line(&a, 3, rng);
    x.extend(ctx.on_line(&b, 3, rng));
    bounded(ctx, &x, 3, Some(-(a + b)))?;
    let mut x = ctx.on_line(&a, 4, rng);
    x.extend(ctx.on_line(&b, 3, rng));
    bounded(ctx, &x, 2, None)
}

fn singular_divisors(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let e = ctx.engine;
    let tau = e.cfg().tau;
    let x = TorusPoint::random(rng);
    let sing = num(e.singular_points(&e.kummer_section(&x)))?;
    let meet = num(e.line_intersection(&x, &-x))?;
    ensure(sing.len() == 2, || format!("kummer section with {} singular points", sing.len()))?;
    for r in &sing {
        ensure(r.kind == SingularityType::Node, || format!("kummer singularity {:?}", r.kind))?;
        ensure(meet.iter().any(|m| ctx.dist(&m.0, &r.point) < 1e-6), || "node off the line intersection".into())?;
    }
    let l = e.random_point_on_line(&TorusPoint::origin(), rng);
    let sing = num(e.singular_points(&e.kummer_section(&l)))?;
    ensure(sing.len() == 1 && sing[0].kind == SingularityType::Tacnode && ctx.dist(&sing[0].point, &TorusPoint::origin()) < 1e-4, || {
        format!("l on the theta divisor: singularities {sing:?}")
    })?;
    let t = two_torsion()[rng.gen_range(0..16)];
    let s = e.random_section_through(&t, rng);
    let z = t.embed_centered(&tau);
    let d = e.section_weighted(&s, z, 1);
    let g = d.gradient();
    let gn = (g[0].norm_sqr() + g[1].norm_sqr()).sqrt();
    ensure(d.value().norm() < 1e-8 && gn < 1e-8, || format!("section through {t:?}: value {:e}, gradient {gn:e}", d.value().norm()))?;
    let r = e.classify_singularity(&s, z);
    ensure(r.kind == SingularityType::Node, || format!("singularity at {t:?} classified {:?}", r.kind))
}

fn gauss_map(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let e = ctx.engine;
    let p = TorusPoint::random(rng);
    let t = [C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5), C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)];
    let fiber = num(e.gauss_map_fiber(&p, t))?;
    let size: usize = fiber.iter().map(|f| f.1).sum();
    ensure(size == 2, || format!("fiber of size {size}"))?;
    // the sweep is deterministic, so the first trial carries it
    if ctx.trial == 0 {
        let n = num(e.gauss_branch_count(24, 30))?;
        ensure(n == 6, || format!("{n} branch values over the sweep"))?;
    }
    Ok(())
}

fn theta_sanity(ctx: &Ctx, rng: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    let e = ctx.engine;
    let th = e.theta_engine();
    let tau = e.cfg().tau;
    let z = TorusPoint::random(rng).embed_centered(&tau);
    let ch0 = Characteristic::zero();
    let val = |w: [C64; 2]| {
        let (lf, d) = th.theta_jet(ch0, w, 0);
        d.value() * lf.exp()
    };
    let plus = val(z);
    let minus = val([-z[0], -z[1]]);
    ensure((plus - minus).norm() < 1e-12 * plus.norm().max(1.0), || format!("evenness defect {:e}", (plus - minus).norm()))?;
    let m = [rng.gen_range(-2..=2) as f64, rng.gen_range(-2..=2) as f64];
    let n = [rng.gen_range(-2..=2) as f64, rng.gen_range(-2..=2) as f64];
    let tn = tau.mul_real(n);
    let shifted = val([z[0] + m[0] + tn[0], z[1] + m[1] + tn[1]]);
    let pi = std::f64::consts::PI;
    let i = C64::new(0.0, 1.0);
    let factor = (-pi * i * tau.quad(n) - 2.0 * pi * i * (n[0] * z[0] + n[1] * z[1])).exp();
    let qp = (shifted - factor * plus).norm() / (factor * plus).norm();
    ensure(qp < 1e-10, || format!("quasi-periodicity defect {qp:e}"))?;
    // theta(w + a) theta(w - a) lies in the span of the four basis functions
    let a = TorusPoint::random(rng).embed_centered(&tau);
    let ws: Vec<[C64; 2]> = (0..16).map(|_| TorusPoint::random(rng).embed_centered(&tau)).collect();
    let basis = DMatrix::from_fn(16, 4, |r, c| th.basis_values(ws[r])[c]);
    let rhs = DVector::from_fn(16, |r, _| val([ws[r][0] + a[0], ws[r][1] + a[1]]) * val([ws[r][0] - a[0], ws[r][1] - a[1]]));
    let coef = basis.clone().svd(true, true).solve(&rhs, 1e-14).map_err(|e| e.to_string())?;
    let fit = (&basis * coef - &rhs).norm() / rhs.norm();
    ensure(fit < 1e-8, || format!("addition span residual {fit:e}"))?;
    let on = two_torsion().into_iter().filter(|t| e.on_line_residual(&TorusPoint::origin(), t) < 1e-12).count();
    ensure(on == 6, || format!("{on} two-torsion points on the theta divisor"))?;
    let h = 1e-5;
    let (lf, d) = th.theta_jet(ch0, z, 1);
    let g = d.gradient().map(|x| x * lf.exp());
    for k in 0..2 {
        let (mut zp, mut zm) = (z, z);
        zp[k] += h;
        zm[k] -= h;
        let fd = (val(zp) - val(zm)) / (2.0 * h);
        let err = (fd - g[k]).norm() / g[k].norm().max(1.0);
        ensure(err < 1e-7, || format!("gradient defect {err:e} in direction {k}"))?;
    }
    Ok(())
}

fn ledger_balance(_: &Ctx, _: &mut ChaCha8Rng) -> std::result::Result<(), String> {
    for r in appendix_rows() {
        ensure(balance_check(&r, r.n, r.i), || format!("row {} (i = {}, n = {}) does not balance", r.label, r.i, r.n))?;
    }
    let v = MukaiVector::new;
    for (from, to) in [(v(0, 0, 1), v(1, 0, 0)), (v(1, 0, 0), v(0, 0, 1)), (v(1, 2, -1), v(-1, -2, 1))] {
        ensure(phi_ch(from) == to, || format!("transform of {from} is {}", phi_ch(from)))?;
    }
    for i in 1..=2i64 {
        for n in 0..=8i64 {
            let m = MukaiVector::twisted_ideal(i, n);
            ensure(m.chi == i * i - n, || format!("chi of L^{i} I_X with |X| = {n} is {}", m.chi))?;
        }
    }
    Ok(())
}
