//! The global tolerance scale, exercised in its own process because it is
//! shared state.

use randcert::qstates::{overlap_feasible, OverlapBounds};
use randcert::tolerance;

#[test]
fn scale_widens_feasibility_checks() {
    // Gram excess exceeds one by about 1e-11: infeasible at the default
    // scalar tolerance of 1e-12, accepted once the scale reaches 100.
    let d01: f64 = 0.5;
    let d02: f64 = 0.8;
    let mut d12 = 0.0;
    // Solve d02^2 + d12^2 + d01^2 - 2 d01 d02 d12 = 1 + 1e-11 for the larger root.
    let (b, cc) = (-2.0 * d01 * d02, d02 * d02 + d01 * d01 - 1.0 - 1e-11);
    d12 += (-b + (b * b - 4.0 * cc).sqrt()) / 2.0;
    let d = OverlapBounds { d01, d02, d12 };
    assert!((d.gram_excess() - 1.0 - 1e-11).abs() < 1e-13);

    assert_eq!(tolerance::scale(), 1.0);
    assert!(!overlap_feasible(&d));
    tolerance::set_scale(100.0);
    assert_eq!(tolerance::scalar(), 1e-10);
    assert_eq!(tolerance::matrix(), 1e-8);
    assert!(overlap_feasible(&d));
    tolerance::set_scale(-1.0);
    assert_eq!(tolerance::scale(), 100.0);
    tolerance::set_scale(1.0);
    assert!(!overlap_feasible(&d));
}
