use proptest::prelude::*;
use scsf_core::curve::Curve;
use scsf_core::flow::{run, FlowConfig, Monitors, StopStatus};
use scsf_core::fourier::{synthesize_fourier_curve, FourierSpec, FourierTerm};
use scsf_core::ratio::{compute_psi, min_huisken_ratio, min_symmetric_ratio};
use scsf_core::symmetry::{build_symmetric_pairing, count_plane_crossings, reflect_curve, Hyperplane};

fn spec_from(c: [f64; 4]) -> FourierSpec {
    FourierSpec::new(
        vec![
            vec![FourierTerm::cos(1, 1.0), FourierTerm::cos(2, c[0])],
            vec![FourierTerm::sin(1, 0.5 + c[1].abs()), FourierTerm::sin(3, c[2])],
            vec![FourierTerm::cos(2, c[3])],
        ],
        256,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psi_is_symmetric_and_bounded(len in 0.1f64..100.0, frac in 0.0f64..1.0) {
        let l = frac * len;
        let a = compute_psi(len, l).unwrap();
        let b = compute_psi(len, len - l).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * len);
        prop_assert!(a <= l.min(len - l) + 1e-12 * len);
        prop_assert!(a <= len / std::f64::consts::PI * (1.0 + 1e-12));
    }

    #[test]
    fn ratio_is_invariant_under_similarity(c in prop::array::uniform4(-0.3f64..0.3), scale in 0.2f64..5.0, shift in -3.0f64..3.0) {
        let curve = synthesize_fourier_curve(&spec_from(c)).unwrap();
        let moved = curve
            .map_points(|p, out| {
                // rotate in the xz-plane, scale, translate
                let (s, co) = (0.7f64.sin(), 0.7f64.cos());
                out[0] = scale * (co * p[0] - s * p[2]) + shift;
                out[1] = scale * p[1] - shift;
                out[2] = scale * (s * p[0] + co * p[2]);
            })
            .unwrap();
        let a = min_huisken_ratio(&curve).min;
        let b = min_huisken_ratio(&moved).min;
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }

    #[test]
    fn symmetric_minimum_bounds_the_global_one(c in prop::array::uniform4(-0.3f64..0.3)) {
        // even in y ↦ -y: x and z are cosine series, y a sine series
        let curve = synthesize_fourier_curve(&spec_from(c)).unwrap();
        let plane = Hyperplane::coordinate(1, 3);
        prop_assume!(count_plane_crossings(&curve, &plane).unwrap().count() == 2);
        let pairing = build_symmetric_pairing(&curve, &plane, 1e-6).unwrap();
        let sym = min_symmetric_ratio(&pairing).min;
        let global = min_huisken_ratio(&curve).min;
        // both minima come from golden-section refinement with ~1e-6 resolution
        prop_assert!(sym >= global - 1e-6, "{sym} < {global}");
        prop_assert!(sym <= 1.0 + 1e-12);
    }

    #[test]
    fn reflection_is_an_involution(c in prop::array::uniform4(-0.3f64..0.3), n in prop::array::uniform3(-1.0f64..1.0), off in -1.0f64..1.0) {
        prop_assume!(n.iter().map(|x| x * x).sum::<f64>() > 1e-3);
        let curve = synthesize_fourier_curve(&spec_from(c)).unwrap();
        let plane = Hyperplane::new(n.to_vec(), off).unwrap();
        let twice = reflect_curve(&reflect_curve(&curve, &plane).unwrap(), &plane).unwrap();
        for (p, q) in curve.points().zip(twice.points()) {
            for k in 0..3 {
                prop_assert!((p[k] - q[k]).abs() < 1e-12);
            }
        }
        prop_assert!((min_huisken_ratio(&curve).min - min_huisken_ratio(&reflect_curve(&curve, &plane).unwrap()).min).abs() < 1e-7);
    }
}

#[test]
fn zero_step_run_is_empty() {
    let mut c = FlowConfig::new(FourierSpec::circle(1.0, 2, 64), 64);
    c.stop.max_steps = Some(0);
    let t = run(&c).unwrap();
    assert!(t.rows.is_empty());
    assert_eq!(t.status, StopStatus::MaxSteps);
    assert_eq!(t.status.to_string(), "reached max steps");
}

#[test]
fn circle_reaches_the_length_floor_in_time_order() {
    let mut c = FlowConfig::new(FourierSpec::circle(1.0, 2, 128), 128);
    c.stop.min_length_fraction = Some(0.1);
    c.monitors = Monitors { huisken: false, symmetric: false, projection: false, diagnostics: false };
    let t = run(&c).unwrap();
    assert_eq!(t.status, StopStatus::LengthFloor);
    assert!(t.rows.windows(2).all(|w| w[1].t > w[0].t));
    assert_eq!(t.length_increases, 0);
}

#[test]
fn polygon_curves_accept_arbitrary_points() {
    let pts: Vec<Vec<f64>> = (0..12).map(|j| vec![(j % 4) as f64, (j / 4) as f64 + 0.1 * j as f64]).collect();
    let c = Curve::from_points(&pts).unwrap();
    assert_eq!(c.len(), 12);
    assert!(min_huisken_ratio(&c).min <= 1.0);
}
