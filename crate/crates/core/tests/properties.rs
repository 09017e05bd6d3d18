//! Property tests for the invariants that hold over whole parameter ranges
//! rather than at hand-picked instances.

use proptest::prelude::*;

use visc_nonlocal::checkers::{find_certificate, CertificateSearchConfig};
use visc_nonlocal::forge::build_glue_1d;
use visc_nonlocal::functions::{CandidateFunction, Mode};
use visc_nonlocal::harness::StudyTable;
use visc_nonlocal::levy::{small_ball_quadratic_moment, LevyKernel};
use visc_nonlocal::linalg::SymMat;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// eps -> trace M(eps) is nondecreasing for admissible kernels.
    #[test]
    fn moment_trace_monotone(
        alpha in 0.1f64..1.9,
        cutoff in 0.5f64..2.0,
        eps1 in 0.01f64..1.0,
        scale in 1.1f64..4.0,
    ) {
        let k = LevyKernel::truncated_stable(1, alpha, cutoff).unwrap();
        let m1 = small_ball_quadratic_moment(&k, eps1).unwrap();
        let m2 = small_ball_quadratic_moment(&k, eps1 * scale).unwrap();
        prop_assert!(m2.trace() >= m1.trace() - 1e-12 * m2.trace().max(1.0));
        prop_assert!(m1.trace() >= 0.0);
    }

    /// Glue spline invariants hold across the (lambda, s) range: junction
    /// values match the quadratic, the outer band is the exact constant,
    /// and the bridge stays between the parabola and zero.
    #[test]
    fn glue_invariants(lambda in -5.0f64..-0.05, s in 0.1f64..5.0) {
        let g = build_glue_1d(lambda, s).unwrap();
        let third = s / 3.0;
        let (v, d1, d2) = g.eval_extended(third);
        prop_assert!((v - lambda * s * s / 9.0).abs() < 1e-12 * (1.0 + v.abs()));
        prop_assert!((d1 - 2.0 * lambda * s / 3.0).abs() < 1e-12 * (1.0 + d1.abs()));
        prop_assert!((d2 - 2.0 * lambda).abs() < 1e-12 * (1.0 + d2.abs()));
        for k in 0..32 {
            let x = s * (k as f64 + 0.5) / 32.0;
            let (v, _, _) = g.eval_extended(x);
            prop_assert!(v >= lambda * x * x - 1e-12 * (1.0 + (lambda * x * x).abs()));
            prop_assert!(v <= 1e-12);
            // even symmetry
            prop_assert_eq!(v, g.eval_extended(-x).0);
        }
        let (v, d1, d2) = g.eval_extended(0.9 * s);
        prop_assert!((v - 2.0 * lambda * s * s / 9.0).abs() < 1e-12 * (1.0 + v.abs()));
        prop_assert_eq!(d1, 0.0);
        prop_assert_eq!(d2, 0.0);
    }

    /// For smooth candidates the jet at a point is certified at some eps
    /// for every delta: the dyadic search must succeed.
    #[test]
    fn certificates_exist_for_smooth_candidates(
        amp in 0.2f64..2.0,
        width in 0.5f64..2.0,
        x0 in -0.8f64..0.8,
        delta in 0.01f64..0.5,
    ) {
        let u = CandidateFunction::GaussianBump {
            amplitude: amp,
            center: vec![0.0],
            width,
        };
        let jet = u.jet(&[x0]).unwrap();
        let cfg = CertificateSearchConfig { delta, levels: 40, ..Default::default() };
        let cert = find_certificate(
            &u,
            &[x0],
            &jet.gradient,
            &jet.hessian,
            Mode::Sub,
            &cfg,
        );
        prop_assert!(cert.is_some());
    }

    /// Study tables survive the CSV round trip bit-exactly.
    #[test]
    fn study_table_round_trip(values in proptest::collection::vec(-1e12f64..1e12, 1..24)) {
        let cols = 4usize.min(values.len()).max(1);
        let mut table = StudyTable::new((0..cols).map(|i| format!("c{i}")).collect());
        for (i, chunk) in values.chunks(cols).enumerate() {
            if chunk.len() == cols {
                table.push(chunk.to_vec(), i % 2 == 0);
            }
        }
        let back = StudyTable::parse_csv(&table.to_csv()).unwrap();
        prop_assert_eq!(&back.columns, &table.columns);
        prop_assert_eq!(&back.monotone_flags, &table.monotone_flags);
        for (a, b) in back.rows.iter().flatten().zip(table.rows.iter().flatten()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    /// Symmetric matrices reconstruct from their eigendecomposition.
    #[test]
    fn eigh_reconstructs(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        c in -3.0f64..3.0,
        d in -3.0f64..3.0,
        e in -3.0f64..3.0,
        f in -3.0f64..3.0,
    ) {
        let m = SymMat::from_rows(&[
            vec![a, b, c],
            vec![b, d, e],
            vec![c, e, f],
        ]);
        let (vals, v) = m.eigh();
        let scale = 1.0 + m.frobenius_norm();
        for i in 0..3 {
            for j in 0..3 {
                let mut rec = 0.0;
                for k in 0..3 {
                    rec += v.get(i, k) * vals[k] * v.get(j, k);
                }
                prop_assert!((rec - m.get(i, j)).abs() < 1e-10 * scale);
            }
        }
    }
}
