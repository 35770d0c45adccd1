//! One line per acceptance criterion: the suite, its pass count, wall time,
//! and the runtime budget it must fit in. Exits nonzero if any line fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ppas_core::jump::{calibrate_with, verify_suite_with};
use ppas_core::linsys::Engine;
use ppas_core::surface::SurfaceConfig;

const CRITERIA: [(&str, u64); 12] = [
    ("s2-point", 300),
    ("s2-pair", 300),
    ("line-duality", 300),
    ("s2-triple", 300),
    ("s2-collinear-triple", 300),
    ("s2-length4", 900),
    ("s2-length5", 1800),
    ("s2-length-bounds", 1800),
    ("singular-divisors", 300),
    ("gauss-map", 300),
    ("theta-sanity", 300),
    ("ledger-balance", 1),
];

fn main() -> ExitCode {
    let cfg = SurfaceConfig::default();
    let engine = Engine::new(&cfg).expect("default configuration is valid");
    let t = Instant::now();
    let cal = match calibrate_with(&engine) {
        Ok(c) => c,
        Err(e) => {
            println!("FAIL calibration: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("calibration sign {} offset {:?} ({:.1?})", cal.sign, cal.offset, t.elapsed());
    let mut failed = 0;
    for (k, (suite, budget)) in CRITERIA.iter().enumerate() {
        let t = Instant::now();
        let report = verify_suite_with(&engine, suite, &cal, None);
        let took = t.elapsed();
        let in_budget = took <= Duration::from_secs(*budget);
        match report {
            Ok(r) => {
                let ok = r.passed() && in_budget;
                failed += !ok as usize;
                println!(
                    "{} {:>2} {:<20} {}/{} trials  {:.1?} (budget {}s)",
                    if ok { "PASS" } else { "FAIL" },
                    k + 1,
                    suite,
                    r.passes,
                    r.trials,
                    took,
                    budget
                );
                for f in &r.failures {
                    println!("       trial {} seed {}: {}", f.trial, f.seed, f.detail);
                }
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2} {:<20} error: {e}", k + 1, suite);
            }
        }
    }
    println!("{} of {} criteria pass", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
