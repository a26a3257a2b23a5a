//! Acceptance battery: one PASS/FAIL line per criterion, nonzero exit on any failure.

use gfa_core::verify::{budget, run_battery, tol, Criterion, CRITERIA};

fn main() {
    println!("acceptance battery, pinned tolerances:");
    println!(
        "  valuation {} (log factor {}), quadrature {:e}, drop slope {} rel, convexity {}",
        tol::VALUATION,
        tol::VALUATION_LOG,
        tol::EX510_QUADRATURE,
        tol::EX510_SLOPE_REL,
        tol::CONVEXITY
    );
    println!(
        "  Parseval {:e}, inversion {:e}, Gaussian {:e}, peak*eps in [{}, {}], pairing slope >= {}, total {} s",
        tol::PARSEVAL,
        tol::INVERSION,
        tol::GAUSS_TRANSFORM,
        tol::PEAK_LO,
        tol::PEAK_HI,
        tol::PAIRING_SLOPE,
        tol::BATTERY_SECONDS
    );
    let line = |c: &Criterion| {
        let limit = budget(c.id).map(|b| format!(" (budget {b} s)")).unwrap_or_default();
        println!(
            "{} {:<18} {}  [{:.1} s{limit}]",
            if c.passed { "PASS" } else { "FAIL" },
            c.id,
            c.summary,
            c.seconds
        );
    };
    let b = run_battery(false, line);
    let passed = b.criteria.iter().filter(|c| c.passed).count();
    println!("{passed}/{} criteria passed", CRITERIA.len());
    if !b.passed {
        std::process::exit(1);
    }
}
