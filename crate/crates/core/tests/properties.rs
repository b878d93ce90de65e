use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

use gasket_core::bhi::{ratio_statistic, ExperimentConfig};
use gasket_core::geometry::{Cell, Dilate, ExactPoint};
use gasket_core::io::format_f64;
use gasket_core::spline::{rotated_state, Rational};

fn dyadic() -> impl Strategy<Value = Rational64> {
    (-64i64..=64, 0u32..6).prop_map(|(n, k)| Rational64::new(n, 1 << k))
}

fn point() -> impl Strategy<Value = ExactPoint> {
    (dyadic(), dyadic()).prop_map(|(a, b)| ExactPoint::new(a, b))
}

fn path(max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(1u8..=3, 0..=max)
}

proptest! {
    #[test]
    fn distance_is_symmetric_and_scales_by_four(p in point(), q in point(), n in -3i32..4) {
        prop_assert_eq!(p.dist2(&q), q.dist2(&p));
        let four = Rational64::from_integer(4);
        let factor = if n >= 0 { four.pow(n) } else { four.pow(-n).recip() };
        prop_assert_eq!(p.dilate(n).dist2(&q.dilate(n)), p.dist2(&q) * factor);
        prop_assert_eq!(p.mirror().dist2(&q.mirror()), p.dist2(&q));
    }

    #[test]
    fn points_print_and_parse_back(p in point()) {
        let back: ExactPoint = p.to_string().parse().unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn cells_contain_their_children(level in 0i32..4, i in 0i64..8, j in 0i64..8) {
        let s = Rational64::new(1, 1 << level);
        let half = Rational64::new(1, 2);
        let ll = ExactPoint::new(s * Rational64::from_integer(i) + s * half * Rational64::from_integer(j), s * half * Rational64::from_integer(j));
        let c = Cell::new(level, ll);
        for v in c.vertices {
            prop_assert!(c.contains(&v));
        }
        for (k, child) in c.children().iter().enumerate() {
            prop_assert_eq!(child.vertices[k], c.vertices[k]);
            for v in child.vertices {
                prop_assert!(c.contains(&v));
            }
        }
    }

    #[test]
    fn spline_states_obey_the_bounds(p in path(7)) {
        let three = Rational::from_integer(3.into());
        let mut values = [Rational::zero(), Rational::zero(), Rational::zero()];
        for apex in 0..3 {
            let s = rotated_state(apex, &p, 10).unwrap();
            for slot in 0..3 {
                let v = &s.values[slot];
                prop_assert!(!v.is_negative() && *v <= Rational::one());
                prop_assert!(s.derivs[slot].abs() <= &three * v);
                values[slot] += v;
            }
        }
        for v in values {
            prop_assert!(v.is_one());
        }
    }

    #[test]
    fn ratio_statistic_is_at_least_one_and_symmetric(
        fg in prop::collection::vec((1e-6f64..1e3, 1e-6f64..1e3), 1..40),
        c in 1e-3f64..1e3,
    ) {
        let f: Vec<f64> = fg.iter().map(|x| x.0).collect();
        let g: Vec<f64> = fg.iter().map(|x| x.1).collect();
        let pts: Vec<usize> = (0..f.len()).collect();
        let (r, swapped) = ratio_statistic(&f, &g, &pts).unwrap();
        prop_assert!(r >= 1.0);
        prop_assert!((r / swapped - 1.0).abs() < 1e-12);
        let scaled: Vec<f64> = f.iter().map(|x| x * c).collect();
        let (rs, _) = ratio_statistic(&scaled, &g, &pts).unwrap();
        prop_assert!((rs / r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn floats_round_trip_through_text(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        prop_assert_eq!(format_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn configs_round_trip(
        alphas in prop::collection::vec(0.01f64..0.99, 1..5),
        seed in any::<u32>(),
        instances in 1usize..500,
        density in 0.05f64..1.0,
    ) {
        let mut c = ExperimentConfig {
            alphas,
            seed: seed as u64,
            instances,
            ..ExperimentConfig::default()
        };
        c.domain = gasket_core::bhi::DomainFamily::RandomCellUnion { level: 3, density };
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        prop_assert_eq!(back.hash(), c.hash());
        prop_assert_eq!(back, c);
    }
}
