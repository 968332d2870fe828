use std::f64::consts::FRAC_PI_4;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seqsteer::circuit::{build_sequence_circuit, Circuit};
use seqsteer::history;
use seqsteer::linalg::{identity, max_abs_diff, random_density, CMatrix};
use seqsteer::noise::depolarized_bell;
use seqsteer::pipeline::{certify, standard_plan, CertifyOptions};
use seqsteer::sdp::{steering_weight, SolverSettings};
use seqsteer::selftest::theorem2_minentropy;
use seqsteer::tomography::{bloch_rescale, project_causal};
use seqsteer::tqsm::{assemblage_at_round, Basis, MeasurementPlan, RotatedMeasurement};
use seqsteer::Assemblage;

fn angle() -> impl Strategy<Value = f64> {
    0.0..=FRAC_PI_4
}

fn state(seed: u64) -> CMatrix {
    random_density(4, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn plan(phi: &[f64], theta: &[f64]) -> MeasurementPlan {
    MeasurementPlan::from_angles(phi, theta, false).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kraus_instruments_are_complete(a in angle(), x in any::<bool>()) {
        let m = RotatedMeasurement::new(if x { Basis::X } else { Basis::Z }, a).unwrap();
        let sum = m.kraus(0).adjoint() * m.kraus(0) + m.kraus(1).adjoint() * m.kraus(1);
        prop_assert!(max_abs_diff(&sum, &identity(2)) < 1e-14);
    }

    #[test]
    fn assemblages_are_causal_and_marginalize(
        seed in any::<u64>(),
        phi in prop::collection::vec(angle(), 3),
        theta in prop::collection::vec(angle(), 3),
    ) {
        let rho = state(seed);
        let p = plan(&phi, &theta);
        let mut prev: Option<Assemblage> = None;
        for n in 1..=3 {
            let a = assemblage_at_round(&rho, &p, n, false).unwrap();
            prop_assert!(a.no_signalling_error() < 1e-12);
            prop_assert!(a.causality_error() < 1e-12);
            prop_assert!(a.psd_error() < 1e-12);
            let total: f64 = (0..a.size()).map(|b| a.prob(b, 0)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            if let Some(prev) = prev {
                let m = a.marginal().unwrap();
                for (x, y) in m.elements().iter().zip(prev.elements()) {
                    prop_assert!(max_abs_diff(x, y) < 1e-12);
                }
            }
            prev = Some(a);
        }
    }

    #[test]
    fn causal_projection_is_causal_and_idempotent(seed in any::<u64>(), noise in 0.0..0.05f64, a1 in angle(), a2 in angle()) {
        let rho = state(seed);
        let a = assemblage_at_round(&rho, &plan(&[0.0, a1], &[a2, 0.0]), 2, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let jitter = Assemblage::new(2, a.elements().iter().map(|e| {
            e + seqsteer::linalg::random_hermitian(2, &mut rng) * seqsteer::linalg::real(noise)
        }).collect()).unwrap();
        let (p, d) = project_causal(&jitter).unwrap();
        prop_assert!(p.causality_error() < 1e-10 && p.no_signalling_error() < 1e-10);
        prop_assert!(d >= 0.0);
        let (q, d2) = project_causal(&p).unwrap();
        prop_assert!(d2 < 1e-10);
        for (x, y) in p.elements().iter().zip(q.elements()) {
            prop_assert!(max_abs_diff(x, y) < 1e-10);
        }
    }

    #[test]
    fn circuit_text_round_trips(phi in prop::collection::vec(angle(), 3), theta in prop::collection::vec(angle(), 3), n in 1usize..=3) {
        let c = build_sequence_circuit(&plan(&phi, &theta), n).unwrap();
        let text = c.to_string();
        let back: Circuit = text.parse().unwrap();
        prop_assert_eq!(back.to_string(), text);
        prop_assert_eq!(back.gates().len(), c.gates().len());
    }

    #[test]
    fn circuit_assemblage_matches_exact(seed in any::<u64>(), a1 in angle(), a2 in angle(), a3 in angle()) {
        let rho = state(seed);
        let p = plan(&[0.0, a1], &[a2, a3]);
        let exact = assemblage_at_round(&rho, &p, 2, false).unwrap();
        let circ = seqsteer::circuit::circuit_assemblage(&build_sequence_circuit(&p, 2).unwrap(), &rho).unwrap();
        for (x, y) in exact.elements().iter().zip(circ.elements()) {
            prop_assert!(max_abs_diff(x, y) < 1e-10);
        }
    }

    #[test]
    fn schedule_bound_beats_linear_rate(n in 1usize..=16, c in 0.05..0.95f64) {
        let t = theorem2_minentropy(n, c).unwrap();
        prop_assert!(t.chain_holds(1e-12));
        prop_assert!(t.bound() >= (1.0 - c) * n as f64 - 1e-12);
        prop_assert!(t.log_thetas.iter().all(|&lt| lt.is_finite() && lt <= FRAC_PI_4.ln()));
    }

    #[test]
    fn bloch_rescale_lands_in_ball(x in -2.0..2.0f64, y in -2.0..2.0f64, z in -2.0..2.0f64) {
        let (r, rescaled) = bloch_rescale([x, y, z]);
        let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        prop_assert!(norm <= 1.0 + 1e-12);
        prop_assert_eq!(rescaled, (x * x + y * y + z * z).sqrt() > 1.0);
    }

    #[test]
    fn history_bits_round_trip(h in 0usize..64, len in 6usize..=8) {
        prop_assert_eq!(history::from_bits(&history::to_bits(h, len)), h);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn steering_weight_is_a_fraction(seed in any::<u64>(), a in angle(), b in angle()) {
        let rho = state(seed);
        let asm = assemblage_at_round(&rho, &plan(&[a], &[b]), 1, false).unwrap();
        let sw = steering_weight(&asm, true, &SolverSettings::default()).unwrap();
        prop_assert!(sw.sw > -1e-7 && sw.sw < 1.0 + 1e-7, "{}", sw.sw);
    }

    #[test]
    fn guessing_probability_is_bounded(eps in 0.0..0.3f64, theta in angle(), rounds in 1usize..=2) {
        let rho = depolarized_bell(eps).unwrap();
        let p = standard_plan(rounds, theta, 0.0).unwrap();
        let y: Vec<u8> = seqsteer::pipeline::alternating_inputs(rounds);
        let c = certify(&rho, &p, &y, &CertifyOptions::default()).unwrap();
        let floor = 0.5f64.powi(rounds as i32);
        prop_assert!(c.report.p_guess >= floor - 1e-6 && c.report.p_guess <= 1.0 + 1e-6, "{}", c.report.p_guess);
        prop_assert!(c.report.h_min <= rounds as f64 + 1e-6);
    }
}
