use super::*;
use crate::surface::SurfaceConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn engine() -> Engine {
    Engine::new(&SurfaceConfig::default()).unwrap()
}

#[test]
fn pair_has_one_jump_at_minus_sum() {
    let e = engine();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (p, q) = (TorusPoint::random(&mut rng), TorusPoint::random(&mut rng));
    let x = ZeroScheme::reduced(&[p, q]).unwrap();
    let t = Instant::now();
    let l = jump_locus_with(&e, &x, Level::Two, &Calibration::identity(), &JumpOptions::default()).unwrap();
    eprintln!("{:?} {:?} {:?}", t.elapsed(), l.kind, l.points);
    eprintln!("target {:?}", -(p + q));
    assert_eq!(l.kind, LocusKind::Finite);
    assert_eq!(l.points.len(), 1);
    let tau = e.cfg().tau;
    assert!(torus_distance(&l.points[0].point, &(-(p + q)), &tau) < 1e-5);
}

fn discover(e: &Engine, x: &ZeroScheme, level: Level) -> JumpLocus {
    let t = Instant::now();
    let l = jump_locus_with(e, x, level, &Calibration::identity(), &JumpOptions::default()).unwrap();
    eprintln!("{:?} kind {:?} points {} samples {} witness {:?}", t.elapsed(), l.kind, l.points.len(), l.curve_samples.len(), l.curve_witness);
    l
}

fn near(list: &[JumpPoint], target: &TorusPoint, e: &Engine) -> bool {
    list.iter().any(|p| torus_distance(&p.point, target, &e.cfg().tau) < 1e-5)
}

#[test]
fn single_point_has_no_jump() {
    let e = engine();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = ZeroScheme::reduced(&[TorusPoint::random(&mut rng)]).unwrap();
    assert_eq!(discover(&e, &x, Level::Two).kind, LocusKind::Empty);
}

#[test]
fn generic_triple_jumps_at_pair_sums() {
    let e = engine();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pts: Vec<TorusPoint> = (0..3).map(|_| TorusPoint::random(&mut rng)).collect();
    let x = ZeroScheme::reduced(&pts).unwrap();
    let l = discover(&e, &x, Level::Two);
    assert_eq!(l.kind, LocusKind::Finite);
    assert_eq!(l.points.len(), 3);
    for (a, b) in [(0, 1), (1, 2), (2, 0)] {
        assert!(near(&l.points, &(-(pts[a] + pts[b])), &e));
    }
}

#[test]
fn collinear_triple_jumps_along_translate() {
    let e = engine();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let v = TorusPoint::random(&mut rng);
    let pts: Vec<TorusPoint> = (0..3).map(|_| e.random_point_on_line(&v, &mut rng)).collect();
    let x = ZeroScheme::reduced(&pts).unwrap();
    let l = discover(&e, &x, Level::Two);
    assert_eq!(l.kind, LocusKind::Curve);
    assert!(l.curve_samples.len() >= 32);
    let beta = v - pts.iter().copied().sum::<TorusPoint>();
    for s in &l.curve_samples {
        assert!(e.on_line_residual(&beta, s) < 1e-6);
    }
}

#[test]
fn point_with_direction_jumps_at_minus_twice_point() {
    let e = engine();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = TorusPoint::random(&mut rng);
    let x = ZeroScheme::new(vec![crate::schemes::Jet::double(p, [C64::new(0.6, 0.1), C64::new(-0.3, 0.4)])]).unwrap();
    let l = discover(&e, &x, Level::Two);
    assert_eq!(l.kind, LocusKind::Finite);
    assert_eq!(l.points.len(), 1);
    assert!(near(&l.points, &p.scale(-2), &e));
}

#[test]
fn level_one_pair_is_negated_lines() {
    let e = engine();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (p, q) = (TorusPoint::random(&mut rng), TorusPoint::random(&mut rng));
    let x = ZeroScheme::reduced(&[p, q]).unwrap();
    let l = discover(&e, &x, Level::One);
    let lines = e.lines_through(&x).unwrap();
    assert_eq!(l.points.len(), 2);
    for (u, _) in lines {
        assert!(near(&l.points, &(-u), &e));
    }
}

#[test]
fn collinear_four_jumps_once() {
    let e = engine();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let v = TorusPoint::random(&mut rng);
    let pts: Vec<TorusPoint> = (0..4).map(|_| e.random_point_on_line(&v, &mut rng)).collect();
    let x = ZeroScheme::reduced(&pts).unwrap();
    let l = discover(&e, &x, Level::Two);
    let sigma: TorusPoint = pts.iter().copied().sum();
    assert_eq!(l.kind, LocusKind::Finite);
    assert_eq!(l.points.len(), 1);
    assert!(near(&l.points, &(v.scale(2) - sigma), &e));
}

#[test]
fn calibration_is_identity_for_default_conventions() {
    let e = engine();
    let cal = calibrate_with(&e).unwrap();
    assert_eq!(cal, Calibration::identity());
    assert_eq!(calibrate_with(&e).unwrap(), cal);
}

#[test]
fn kummer_type_four_has_two_translates() {
    let e = engine();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let v = TorusPoint::random(&mut rng);
    let mut z: Vec<TorusPoint> = (0..3).map(|_| e.random_point_on_line(&v, &mut rng)).collect();
    z.push(TorusPoint::random(&mut rng));
    let l = discover(&e, &ZeroScheme::reduced(&z).unwrap(), Level::Two);
    let sy: TorusPoint = z[..3].iter().copied().sum();
    assert_eq!(l.kind, LocusKind::Curve);
    for beta in [v - sy, -v - z[3]] {
        assert!(l.witnesses.iter().any(|w| torus_distance(w, &beta, &e.cfg().tau) < 1e-6));
    }
}

#[test]
fn generic_five_has_five_points() {
    let e = engine();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let w: Vec<TorusPoint> = (0..5).map(|_| TorusPoint::random(&mut rng)).collect();
    let l = discover(&e, &ZeroScheme::reduced(&w).unwrap(), Level::Two);
    assert_eq!(l.kind, LocusKind::Finite);
    assert_eq!(l.points.len(), 5);
    assert!(l.points.iter().all(|p| p.height == 1));
}

#[test]
fn confirm_mode_checks_predictions_only() {
    let e = engine();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let pts: Vec<TorusPoint> = (0..3).map(|_| TorusPoint::random(&mut rng)).collect();
    let x = ZeroScheme::reduced(&pts).unwrap();
    let pred = vec![-(pts[0] + pts[1]), TorusPoint::random(&mut rng)];
    let l = jump_locus_with(&e, &x, Level::Two, &Calibration::identity(), &JumpOptions::confirm(pred.clone())).unwrap();
    assert_eq!(l.points.len(), 1);
    assert!(near(&l.points, &pred[0], &e));
}

#[test]
fn slice_through_a_jump_dips() {
    let e = engine();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let p = TorusPoint::random(&mut rng);
    // choose q so that -(p + q) sits on a grid node of the slice
    let target = TorusPoint::from_coords([0.25, 0.5, 0.3, 0.7]);
    let q = -target - p;
    let x = ZeroScheme::reduced(&[p, q]).unwrap();
    let rows = grid_slice(&e, &x, Level::Two, &Calibration::identity(), 0.3, 0.7, 8).unwrap();
    assert_eq!(rows.len(), 64);
    let min = rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
    assert!(min < -6.0, "{min}");
    let one = ZeroScheme::reduced(&[p]).unwrap();
    let rows = grid_slice(&e, &one, Level::Two, &Calibration::identity(), 0.3, 0.7, 8).unwrap();
    assert!(rows.iter().all(|r| r[2] > -3.0));
    assert!(grid_slice(&e, &one, Level::Two, &Calibration::identity(), 0.3, 0.7, 0).is_err());
}
