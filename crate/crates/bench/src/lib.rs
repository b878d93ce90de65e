//! Fixtures shared by the benchmarks in `benches/`.

use gasket_core::geometry::{build_window, ExactPoint, GasketGraph, WindowSpec};
use gasket_core::num_rational::Rational64;
use gasket_core::stable::{RimPolicy, WalkOperator};

/// The `F+ u F-` window at `level` with the walk killed on the rim, and the
/// interior vertices of the ball `rho^2 < 1/4` about the origin.
pub fn pair_ball(level: u32) -> (GasketGraph, WalkOperator, Vec<usize>) {
    let g = build_window(&WindowSpec::pair(), level).expect("small window");
    let w = WalkOperator::new(&g, RimPolicy::Absorbing);
    let o = ExactPoint::origin();
    let d = w
        .states()
        .iter()
        .copied()
        .filter(|&v| g.vertex(v).dist2(&o) < Rational64::new(1, 4))
        .collect();
    (g, w, d)
}
