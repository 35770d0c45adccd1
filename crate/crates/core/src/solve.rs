//! Damped Gauss-Newton for small holomorphic systems in two complex unknowns,
//! with multistart driving and double-root polishing.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::surface::{torus_distance, PeriodMatrix, TorusPoint};

/// Residuals and their Jacobian (one row per residual) at a point of `C^2`.
pub(crate) type Eval = (Vec<C64>, Vec<[C64; 2]>);

#[derive(Clone, Copy, Debug)]
pub(crate) struct GnOptions {
    pub max_iter: usize,
    /// Convergence threshold on the summed squared residual.
    pub tol_sq: f64,
    /// Longest step allowed in `C^2`.
    pub max_step: f64,
}

impl Default for GnOptions {
    fn default() -> Self {
        GnOptions { max_iter: 200, tol_sq: 1e-18, max_step: 0.25 }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GnResult {
    pub z: [C64; 2],
    pub res_sq: f64,
    pub converged: bool,
}

pub(crate) fn res_sq(r: &[C64]) -> f64 {
    r.iter().map(|x| x.norm_sqr()).sum()
}

/// Singular values of an `m x 2` Jacobian, largest first.
pub(crate) fn jac_singular_values(j: &[[C64; 2]]) -> (f64, f64) {
    // eigenvalues of the 2x2 Hermitian J^H J
    let mut a = 0.0;
    let mut d = 0.0;
    let mut b = C64::new(0.0, 0.0);
    for row in j {
        a += row[0].norm_sqr();
        d += row[1].norm_sqr();
        b += row[0].conj() * row[1];
    }
    let mean = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    ((mean + disc).max(0.0).sqrt(), (mean - disc).max(0.0).sqrt())
}

/// Minimum-norm least-squares step `J d = -r`.
pub(crate) fn lsq_step(j: &[[C64; 2]], r: &[C64]) -> [C64; 2] {
    let m = j.len();
    let jm = DMatrix::from_fn(m, 2, |i, k| j[i][k]);
    let rv = DVector::from_fn(m, |i, _| -r[i]);
    let svd = jm.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return [C64::new(0.0, 0.0); 2];
    }
    match svd.solve(&rv, smax * 1e-13) {
        Ok(d) => [d[0], d[1]],
        Err(_) => [C64::new(0.0, 0.0); 2],
    }
}

fn norm2(v: [C64; 2]) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

pub(crate) fn gauss_newton<F>(f: &F, z0: [C64; 2], opts: &GnOptions) -> GnResult
where
    F: Fn([C64; 2]) -> Eval + ?Sized,
{
    let mut z = z0;
    let (mut r, mut j) = f(z);
    let mut rs = res_sq(&r);
    let mut polish = 0;
    for _ in 0..opts.max_iter {
        if rs < opts.tol_sq {
            // two more full steps are nearly free and tighten the root
            polish += 1;
            if polish > 2 {
                break;
            }
        }
        let mut d = lsq_step(&j, &r);
        let len = norm2(d);
        if len > opts.max_step {
            d = d.map(|x| x * (opts.max_step / len));
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let zt = [z[0] + d[0] * lambda, z[1] + d[1] * lambda];
            let (rt, jt) = f(zt);
            let rst = res_sq(&rt);
            if rst.is_finite() && (rst < rs || (rs < opts.tol_sq && rst <= 4.0 * rs)) {
                z = zt;
                r = rt;
                j = jt;
                rs = rst;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    GnResult { z, res_sq: rs, converged: rs < opts.tol_sq }
}

/// Refines a suspected double root of a square system by adding `det J` to the
/// equations; its gradient is taken by central differences.
pub(crate) fn polish_double<F>(f: &F, z0: [C64; 2], opts: &GnOptions) -> Option<[C64; 2]>
where
    F: Fn([C64; 2]) -> Eval + Sync + ?Sized,
{
    let det = |z: [C64; 2]| -> C64 {
        let (_, j) = f(z);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    };
    let aug = |z: [C64; 2]| -> Eval {
        let (mut r, mut j) = f(z);
        let h = 1e-5;
        let g = [0, 1].map(|k| {
            let mut zp = z;
            let mut zm = z;
            zp[k] += h;
            zm[k] -= h;
            (det(zp) - det(zm)) / (2.0 * h)
        });
        r.push(det(z));
        j.push(g);
        (r, j)
    };
    let out = gauss_newton(&aug, z0, &GnOptions { max_step: 1e-2, ..*opts });
    out.converged.then_some(out.z)
}

/// A converged root with its multiplicity estimate.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Root {
    pub point: TorusPoint,
    pub z: [C64; 2],
    pub multiplicity: usize,
    pub jac_ratio: f64,
}

pub(crate) const DOUBLE_TOL: f64 = 1e-4;

/// Runs Gauss-Newton from every start, polishes near-double roots of square
/// systems, and merges roots that coincide on the torus.
pub(crate) fn multistart<F>(f: &F, starts: &[[C64; 2]], tau: &PeriodMatrix, merge_tol: f64, opts: &GnOptions) -> Vec<Root>
where
    F: Fn([C64; 2]) -> Eval + Sync,
{
    let found: Vec<Option<Root>> = starts
        .par_iter()
        .map(|&z0| {
            let res = gauss_newton(f, z0, opts);
            if !res.converged {
                return None;
            }
            let mut z = res.z;
            let (r, j) = f(z);
            let (smax, smin) = jac_singular_values(&j);
            let mut ratio = if smax > 0.0 { smin / smax } else { 0.0 };
            if ratio < DOUBLE_TOL && r.len() == 2 {
                if let Some(zp) = polish_double(f, z, opts) {
                    z = zp;
                    let (_, j) = f(z);
                    let (a, b) = jac_singular_values(&j);
                    ratio = if a > 0.0 { b / a } else { 0.0 };
                }
            }
            let multiplicity = if ratio < DOUBLE_TOL { 2 } else { 1 };
            Some(Root { point: TorusPoint::from_complex(z, tau), z, multiplicity, jac_ratio: ratio })
        })
        .collect();
    let mut roots: Vec<Root> = Vec::new();
    for r in found.into_iter().flatten() {
        // imprecise double roots are merged more generously
        let radius = |q: &Root| if q.multiplicity == 2 || r.multiplicity == 2 { merge_tol.max(1e-3) } else { merge_tol };
        match roots.iter_mut().find(|q| torus_distance(&q.point, &r.point, tau) < radius(q)) {
            Some(q) => {
                if r.multiplicity > q.multiplicity || (r.multiplicity == 2 && r.jac_ratio < q.jac_ratio) {
                    *q = r;
                }
            }
            None => roots.push(r),
        }
    }
    roots.sort_by(|a, b| a.point.cmp(&b.point));
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn simple_square_system() {
        // z1^2 = 1/16, z2 = z1 (roots away from each other and inside one cell)
        let f = |z: [C64; 2]| -> Eval {
            (vec![z[0] * z[0] - 0.0625, z[1] - z[0]], vec![[2.0 * z[0], c(0.0, 0.0)], [c(-1.0, 0.0), c(1.0, 0.0)]])
        };
        let r = gauss_newton(&f, [c(0.3, 0.1), c(0.0, 0.0)], &GnOptions::default());
        assert!(r.converged);
        assert!((r.z[0] - 0.25).norm() < 1e-12);
    }

    #[test]
    fn double_root_is_polished_and_flagged() {
        let f = |z: [C64; 2]| -> Eval {
            let u = z[0] - 0.1;
            (vec![u * u, z[1] - 0.2], vec![[2.0 * u, c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]])
        };
        let tau = PeriodMatrix::default();
        let starts = [[c(0.2, 0.05), c(0.1, 0.0)], [c(0.0, -0.05), c(0.3, 0.0)]];
        let roots = multistart(&f, &starts, &tau, 1e-6, &GnOptions::default());
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].multiplicity, 2);
        assert!((roots[0].z[0] - 0.1).norm() < 1e-6);
    }

    #[test]
    fn singular_values_of_two_column_jacobian() {
        let j = [[c(3.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 4.0)]];
        let (a, b) = jac_singular_values(&j);
        assert!((a - 4.0).abs() < 1e-12 && (b - 3.0).abs() < 1e-12);
    }
}
