mod common;

use harmonic_certainty::bounds::{certainty_bound, BoundInput, LambdaSource};
use harmonic_certainty::inversion::{harmonic_invert, InversionConfig};
use harmonic_certainty::{
    apply_noise, synthesize_autocorrelation, FrequencyModel, NoiseKind, NoiseSpec, SamplingGrid,
};
use proptest::prelude::*;

/// Frequencies in `[-2, 2]` with gaps of at least 0.3, and amplitudes in
/// `[0.1, 1]`.
fn modes(max_k: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_k).prop_flat_map(|k| {
        (
            prop::collection::vec(0.3f64..1.0, k),
            -2.0f64..-1.0,
            prop::collection::vec(0.1f64..1.0, k),
        )
            .prop_map(|(gaps, start, amps)| {
                let mut w = start;
                let omegas = gaps
                    .iter()
                    .map(|g| {
                        let cur = w;
                        w += g;
                        cur
                    })
                    .collect();
                (omegas, amps)
            })
    })
}

fn kinds() -> impl Strategy<Value = NoiseKind> {
    prop_oneof![
        Just(NoiseKind::UniformDisk),
        Just(NoiseKind::TruncatedGaussian)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn noiseless_inversion_recovers_every_mode(
        (omegas, amps) in modes(3),
        extra in 0usize..6,
        t_gap in 0.5f64..3.0,
    ) {
        let model = FrequencyModel::normalized(omegas, amps).unwrap();
        let n = 2 * model.k() + extra;
        let gap = if model.k() > 1 { model.min_gap() } else { 1.0 };
        let grid = SamplingGrid::with_total_time(t_gap / gap, n).unwrap();
        let series = synthesize_autocorrelation(&model, &grid).unwrap();
        let r = harmonic_invert(&series, &InversionConfig::new(0.0)).unwrap();
        prop_assert_eq!(r.detected_rank, model.k());
        for (a, b) in r.omegas.iter().zip(model.omegas()) {
            prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{} vs {}", a, b);
        }
        for (a, b) in r.amps.iter().zip(model.amps()) {
            prop_assert!((a - b).abs() <= 1e-6, "{} vs {}", a, b);
        }
    }

    #[test]
    fn mode_order_does_not_matter((omegas, amps) in modes(4), dt in 0.01f64..0.5) {
        let k = omegas.len();
        let fwd = FrequencyModel::new(omegas.clone(), amps.clone()).unwrap();
        let rev = FrequencyModel::new(
            omegas.iter().rev().copied().collect(),
            amps.iter().rev().copied().collect(),
        ).unwrap();
        let grid = SamplingGrid::new(dt, k + 4).unwrap();
        prop_assert_eq!(
            synthesize_autocorrelation(&fwd, &grid).unwrap(),
            synthesize_autocorrelation(&rev, &grid).unwrap()
        );
    }

    #[test]
    fn frequency_shift_moves_recovered_frequencies(
        (omegas, amps) in modes(3),
        shift in -0.5f64..0.5,
    ) {
        let model = FrequencyModel::new(omegas, amps).unwrap();
        let shifted = model.shifted(shift).unwrap();
        let grid = SamplingGrid::new(0.3, 2 * model.k() + 3).unwrap();
        let invert = |m: &FrequencyModel| {
            let s = synthesize_autocorrelation(m, &grid).unwrap();
            harmonic_invert(&s, &InversionConfig::new(0.0)).unwrap()
        };
        let (a, b) = (invert(&model), invert(&shifted));
        for (x, y) in a.omegas.iter().zip(&b.omegas) {
            prop_assert!((y - x - shift).abs() < 1e-7);
        }
        for (x, y) in a.amps.iter().zip(&b.amps) {
            prop_assert!((x - y).abs() < 1e-7);
        }
        let sa = synthesize_autocorrelation(&model, &grid).unwrap();
        let sb = synthesize_autocorrelation(&shifted, &grid).unwrap();
        for (n, (x, y)) in sa.values().iter().zip(sb.values()).enumerate() {
            let phase = num_complex::Complex64::from_polar(1.0, -shift * grid.time(n));
            prop_assert!((x * phase - y).norm() < 1e-12);
        }
    }

    #[test]
    fn normalized_signal_stays_in_unit_disk((omegas, amps) in modes(5), dt in 0.001f64..2.0) {
        let model = FrequencyModel::normalized(omegas, amps).unwrap();
        let s = synthesize_autocorrelation(&model, &SamplingGrid::new(dt, 30).unwrap()).unwrap();
        prop_assert!((s.values()[0].re - 1.0).abs() < 1e-12);
        for c in s.values() {
            prop_assert!(c.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn noise_never_exceeds_ceiling(
        eta in 1e-9f64..1.0,
        kind in kinds(),
        seed in any::<u64>(),
        copies in 1u64..100,
    ) {
        let spec = NoiseSpec::new(eta, kind, seed).with_copies(copies);
        let limit = eta / (copies as f64).sqrt();
        prop_assert!((spec.effective_eta_max() - limit).abs() <= 1e-15 * limit);
        for z in spec.sample(500) {
            prop_assert!(z.norm() <= limit * (1.0 + 1e-12));
        }
        let exact = synthesize_autocorrelation(
            &common::reference_model(),
            &common::reference_grid(),
        ).unwrap();
        let noisy = apply_noise(&exact, &spec).unwrap();
        for (a, b) in noisy.values().iter().zip(exact.values()) {
            prop_assert!((a - b).norm() <= limit * (1.0 + 1e-9));
        }
    }

    #[test]
    fn bound_is_linear_in_eta_and_halves_per_four_copies(
        (omegas, amps) in modes(3),
        eta in 1e-12f64..1e-3,
        copies in 1u64..50,
    ) {
        let model = FrequencyModel::new(omegas, amps).unwrap();
        let grid = SamplingGrid::new(0.05, model.k() + 5).unwrap();
        let input = BoundInput::Model { model: &model, grid: &grid };
        let b1 = certainty_bound(input, eta, LambdaSource::Exact).unwrap();
        let b2 = certainty_bound(input, 2.0 * eta, LambdaSource::Exact).unwrap();
        prop_assert!((b2.bound_total / b1.bound_total - 2.0).abs() < 1e-12);
        prop_assert!((b2.bound_per_step / b1.bound_per_step - 2.0).abs() < 1e-12);
        let spec = NoiseSpec::new(eta, NoiseKind::UniformDisk, 0);
        let m1 = certainty_bound(input, spec.with_copies(copies).effective_eta_max(), LambdaSource::Exact).unwrap();
        let m4 = certainty_bound(input, spec.with_copies(4 * copies).effective_eta_max(), LambdaSource::Exact).unwrap();
        prop_assert!((m1.bound_total / m4.bound_total - 2.0).abs() < 1e-12);
        prop_assert!(b1.bound_total >= 0.0 && b1.kappa >= 1.0 - 1e-12 && b1.kappa <= b1.kappa_upper * (1.0 + 1e-12));
    }

    #[test]
    fn smaller_noise_is_never_less_admissible(
        (omegas, amps) in modes(3),
        eta in 1e-12f64..1e-2,
    ) {
        let model = FrequencyModel::new(omegas, amps).unwrap();
        let grid = SamplingGrid::new(0.05, model.k() + 5).unwrap();
        let input = BoundInput::Model { model: &model, grid: &grid };
        let hi = certainty_bound(input, eta, LambdaSource::Exact).unwrap();
        let lo = certainty_bound(input, eta / 10.0, LambdaSource::Exact).unwrap();
        prop_assert!(!hi.admissible || lo.admissible);
        prop_assert!(lo.bound_total <= hi.bound_total);
    }
}
