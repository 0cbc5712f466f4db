use std::f64::consts::{PI, TAU};

use franson_dwdm::optimizer::corridor_offset;
use franson_dwdm::phase::{wrap_offset, wrap_phase};
use franson_dwdm::*;
use proptest::prelude::*;

const PUMP: f64 = 770.0;

fn silica_pairs() -> Vec<ChannelPair> {
    pair_channels(&GridSpec::default(), PUMP, (1541.0, 1579.0))
}

/// Number of spans that fit inside ±t after shifting by φ₀, allowing any 2π branch.
fn fitting(spans: &[(f64, f64)], phi0: f64, t: f64) -> usize {
    spans
        .iter()
        .filter(|&&(lo, hi)| (-3..=3).any(|m| {
            let s = m as f64 * TAU + phi0;
            lo + s >= -t - 1e-12 && hi + s <= t + 1e-12
        }))
        .count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn conjugate_is_an_involution(wl in 1000.0f64..3000.0) {
        let b = conjugate_wavelength(PUMP, wl).unwrap();
        let back = conjugate_wavelength(PUMP, b).unwrap();
        prop_assert!((back - wl).abs() <= 1e-9 * wl);
        // Frequencies add up to the pump's.
        prop_assert!((nm_to_thz(wl) + nm_to_thz(b) - nm_to_thz(PUMP)).abs() < 1e-9);
    }

    #[test]
    fn conjugate_is_strictly_decreasing(a in 1000.0f64..3000.0, d in 0.01f64..100.0) {
        let lo = conjugate_wavelength(PUMP, a).unwrap();
        let hi = conjugate_wavelength(PUMP, a + d).unwrap();
        prop_assert!(hi < lo);
    }

    #[test]
    fn qber_is_even_periodic_and_bounded(phi in -10.0f64..10.0) {
        let q = qber_from_phase(phi);
        prop_assert!((0.0..=1.0).contains(&q));
        prop_assert!((q - qber_from_phase(-phi)).abs() < 1e-15);
        prop_assert!((q - qber_from_phase(phi + TAU)).abs() < 1e-12);
        let (p1, p2) = coincidence_probabilities(phi);
        prop_assert!((0.0..=1.0).contains(&p1) && (0.0..=1.0).contains(&p2));
        prop_assert!((p1 + p2 - 1.0).abs() < 1e-15);
        prop_assert!((p1 - 0.5 * (1.0 + phi.cos())).abs() < 1e-12);
    }

    #[test]
    fn qber_inverse_recovers_principal_phase(phi in -PI..PI) {
        let back = phase_from_qber(qber_from_phase(phi), phi).unwrap();
        prop_assert!((back - phi).abs() < 1e-7 * (1.0 + phi.abs()), "{} vs {}", back, phi);
    }

    #[test]
    fn wraps_land_in_their_intervals(phi in -100.0f64..100.0) {
        let w = wrap_phase(phi);
        prop_assert!(w > -PI && w <= PI);
        let o = wrap_offset(phi);
        prop_assert!((-PI..PI).contains(&o));
        let k = ((phi - w) / TAU).round();
        prop_assert!((phi - w - k * TAU).abs() < 1e-9);
    }

    #[test]
    fn grid_index_round_trips(k in -4000i64..4000, spacing in prop::sample::select(vec![12.5, 25.0, 50.0, 100.0])) {
        let g = GridSpec::itu(spacing);
        let nu = g.center_frequency_thz(k);
        prop_assert_eq!(g.nearest_index(nu), k);
        prop_assert_eq!(g.nearest_index(nu + 0.49 * spacing * 1e-3), k);
        prop_assert_eq!(g.nearest_index(nm_to_thz(thz_to_nm(nu))), k);
        prop_assert_eq!(g.channel(k).index, k);
    }

    #[test]
    fn minimax_offset_is_optimal(xs in prop::collection::vec(-1.0f64..1.0, 1..40), c in -2.0f64..2.0) {
        let phi0 = optimize_offset(&xs).unwrap();
        let worst = |s: f64| xs.iter().map(|x| (x + s).abs()).fold(0.0, f64::max);
        prop_assert!(worst(phi0) <= worst(c) + 1e-12);
    }

    #[test]
    fn corridor_offset_matches_brute_force(
        spans in prop::collection::vec((-3.0f64..3.0, 0.0f64..0.3), 1..25),
        t in 0.05f64..0.5,
    ) {
        let spans: Vec<(f64, f64)> = spans.into_iter().map(|(lo, w)| (lo, lo + w)).collect();
        let best_brute = (0..20_000)
            .map(|i| fitting(&spans, -PI + TAU * i as f64 / 20_000.0, t))
            .max()
            .unwrap();
        match corridor_offset(&spans, t) {
            Some((phi0, n)) => {
                prop_assert!((-PI..PI).contains(&phi0));
                prop_assert_eq!(fitting(&spans, phi0, t), n);
                prop_assert!(n >= best_brute);
            }
            None => prop_assert_eq!(best_brute, 0),
        }
    }

    #[test]
    fn closed_form_detuning_swap_relation(a in 1500.0f64..1620.0, b in 1500.0f64..1620.0, l in 0.01f64..0.2) {
        let f = SellmeierModel::fused_silica();
        let ab = closed_form_detuning(&f, a, b, l).unwrap();
        let ba = closed_form_detuning(&f, b, a, l).unwrap();
        prop_assert!(((1.0 + ab / l) * (1.0 + ba / l) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn refractive_index_is_deterministic(wl in 210.0f64..3710.0) {
        let f = SellmeierModel::fused_silica();
        let n1 = refractive_index(&f, wl).unwrap();
        let n2 = refractive_index(&f.clone(), wl).unwrap();
        prop_assert_eq!(n1.to_bits(), n2.to_bits());
        prop_assert_eq!(n1.to_bits(), dispersion_sample(&f, wl).unwrap().n.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn balanced_phase_is_exchange_symmetric(wl in 1541.0f64..1600.0, l in 0.01f64..0.1, phi0 in -PI..PI) {
        let interf = InterferometerPair::balanced(l, SellmeierModel::fused_silica())
            .unwrap()
            .with_phase_offset(phi0);
        let partner = conjugate_wavelength(PUMP, wl).unwrap();
        let a = two_photon_phase(&interf, PUMP, wl).unwrap();
        let b = two_photon_phase(&interf, PUMP, partner).unwrap();
        prop_assert!(wrap_phase(a - b).abs() < 1e-6, "{} vs {}", a, b);
    }

    #[test]
    fn pair_count_is_monotone_in_threshold(
        delta_um in -30.0f64..30.0,
        phi0 in -PI..PI,
        t1 in 0.0f64..1.0,
        dt in 0.0f64..1.0,
    ) {
        let interf = InterferometerPair::new(0.067, delta_um * 1e-6, SellmeierModel::fused_silica())
            .unwrap()
            .with_phase_offset(phi0);
        let pairs = silica_pairs();
        let (a, _) = count_passing_pairs(&pairs, &interf, PUMP, t1, EdgeRule::Center).unwrap();
        let (b, _) = count_passing_pairs(&pairs, &interf, PUMP, t1 + dt, EdgeRule::Center).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn edge_rule_is_never_more_permissive(delta_um in -30.0f64..30.0, phi0 in -PI..PI, t in 0.0f64..1.0) {
        let interf = InterferometerPair::new(0.067, delta_um * 1e-6, SellmeierModel::fused_silica())
            .unwrap()
            .with_phase_offset(phi0);
        let pairs = silica_pairs();
        let (center, c) = count_passing_pairs(&pairs, &interf, PUMP, t, EdgeRule::Center).unwrap();
        let (edges, e) = count_passing_pairs(&pairs, &interf, PUMP, t, EdgeRule::Edges).unwrap();
        prop_assert!(edges <= center);
        for (pc, pe) in c.iter().zip(&e) {
            prop_assert!(!pe.passes() || pc.passes());
        }
    }
}
