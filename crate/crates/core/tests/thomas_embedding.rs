//! Coefficient pattern of the fitted Thomas embedding against the embedding
//! expanded by hand.
//!
//! With z = [x, sin x, cos x] and ẋ_k = sin x_{k+1} − α x_k:
//!   d/dt sin x_k =  cos x_k sin x_{k+1} − α cos x_k x_k
//!   d/dt cos x_k = −sin x_k sin x_{k+1} + α sin x_k x_k
//! The minimum-norm fit splits each product evenly between its two
//! Kronecker slots.

use qendy::dictionary::builtin;
use qendy::dynamics::{exact_derivatives, integrate_sampled, systems};
use qendy::{fit, FitOptions};

const ALPHA: f64 = 0.2;
const N: usize = 9;

fn x(k: usize) -> usize {
    k % 3
}
fn s(k: usize) -> usize {
    3 + k % 3
}
fn c(k: usize) -> usize {
    6 + k % 3
}

fn expected() -> (Vec<(usize, usize, f64)>, Vec<(usize, usize, f64)>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut product = |row: usize, p: usize, q: usize, v: f64| {
        a.push((row, N * p + q, v / 2.0));
        a.push((row, N * q + p, v / 2.0));
    };
    for k in 0..3 {
        product(s(k), c(k), s(k + 1), 1.0);
        product(s(k), c(k), x(k), -ALPHA);
        product(c(k), s(k), s(k + 1), -1.0);
        product(c(k), s(k), x(k), ALPHA);
        b.push((x(k), s(k + 1), 1.0));
        b.push((x(k), x(k), -ALPHA));
    }
    (a, b)
}

#[test]
fn fitted_pattern_matches_hand_expansion() {
    let f = systems::thomas(ALPHA, 0.0);
    let traj = integrate_sampled(&f, &[1.0, -1.0, 0.0], 100.0, 1000, 1e-3).unwrap();
    let ts = exact_derivatives(&f, traj.states()).unwrap();
    let model = fit(&builtin::thomas(), &ts, &FitOptions::default()).unwrap();

    let (a, b) = expected();
    let report = model.sparsity_report(1e-6);
    assert_eq!((report.a, report.b, report.c), (a.len(), b.len(), 0));
    assert_eq!((a.len(), b.len()), (24, 6));
    for (row, col, v) in a {
        assert!((model.a()[(row, col)] - v).abs() < 1e-6, "A[{row},{col}] = {}", model.a()[(row, col)]);
    }
    for (row, col, v) in b {
        assert!((model.b()[(row, col)] - v).abs() < 1e-6, "B[{row},{col}] = {}", model.b()[(row, col)]);
    }
}
