use ocpa_core::analysis::charfn::charfn_decay_probe;
use ocpa_core::analysis::ehm::ehm_identity_check;
use ocpa_core::analysis::smallball::small_ball_criterion;
use ocpa_core::exec::Sequential;
use ocpa_core::kernel::{neumann_kernel, reflection_kernel, spectral_kernel, KernelConfig};
use ocpa_core::noise::{sample_noise_step, SeedSpec, SpaceTimeGrid};
use ocpa_core::occupation::{fourier_functional, occupation_histogram, sobolev_profile};
use ocpa_core::stats::fit_power_law;
use ocpa_core::PathSample;
use proptest::prelude::*;

fn walk(dim: usize, steps: usize, dt: f64, increments: &[f64]) -> PathSample {
    let mut states = vec![0.0; (steps + 1) * dim];
    for i in 1..=steps {
        for k in 0..dim {
            states[i * dim + k] =
                states[(i - 1) * dim + k] + increments[((i - 1) * dim + k) % increments.len()];
        }
    }
    PathSample::new(dim, dt, states, None, "walk").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_symmetric_and_positive(t in 1e-4f64..2.0, x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let cfg = KernelConfig::default();
        let a = neumann_kernel(t, x, y, &cfg).unwrap();
        let b = neumann_kernel(t, y, x, &cfg).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() < 1e-14 * a.max(1.0));
    }

    #[test]
    fn series_agree(t in 1e-3f64..1.0, x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let cfg = KernelConfig::default();
        let s = spectral_kernel(t, x, y, &cfg);
        let r = reflection_kernel(t, x, y);
        prop_assert!((s - r).abs() < 1e-10, "{} {}", s, r);
    }

    #[test]
    fn noise_is_a_pure_function_of_its_key(seed in any::<u64>(), rep in 0u64..1000, step in 0usize..50) {
        let grid = SpaceTimeGrid::new(16, 50, 0.01, 0.5).unwrap();
        let s = SeedSpec::new(seed, rep);
        prop_assert_eq!(
            sample_noise_step(&grid, 2, s, step).unwrap(),
            sample_noise_step(&grid, 2, s, step).unwrap()
        );
    }

    #[test]
    fn fourier_modulus_bounded(inc in prop::collection::vec(-1.0f64..1.0, 1..40), xi in -50.0f64..50.0) {
        let p = walk(1, 40, 0.025, &inc);
        let f = fourier_functional(&p, &[xi]).unwrap();
        prop_assert!(f.value.norm() <= p.horizon() * (1.0 + 1e-12));
        prop_assert_eq!(fourier_functional(&p, &[0.0]).unwrap().value.re, p.horizon());
    }

    #[test]
    fn histogram_mass_is_conserved(inc in prop::collection::vec(-0.2f64..0.2, 2..60), bins in 2usize..40) {
        let p = walk(2, 60, 0.01, &inc);
        let bound = p.states().iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
        let h = occupation_histogram(&p, &[-bound, -bound], &[bound, bound], bins).unwrap();
        prop_assert!((h.total_mass() - p.horizon()).abs() < 1e-12);
        prop_assert_eq!(h.out_of_box(), 0.0);
        prop_assert!(h.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn sobolev_energy_ordered_in_alpha(
        inc in prop::collection::vec(-0.5f64..0.5, 1..30),
        a1 in 0.0f64..2.0,
        da in 0.0f64..1.0,
        half in 2usize..16,
    ) {
        let p = walk(1, 30, 0.05, &inc);
        let step = 0.5;
        let r = half as f64 * step;
        let e = sobolev_profile(&p, &[a1, a1 + da], &[r], step).unwrap();
        // |xi| <= R on the lattice, so weighting by |xi|^{2 da} costs at most R^{2 da}.
        prop_assert!(e[1][0] <= e[0][0] * r.powf(2.0 * da) * (1.0 + 1e-12));
    }

    #[test]
    fn small_ball_probability_monotone(inc in prop::collection::vec(-0.3f64..0.3, 3..50)) {
        let p = walk(1, 50, 0.02, &inc);
        let eps = [1.0, 0.5, 0.2, 0.1, 0.05];
        let t = small_ball_criterion(&[p], &eps, 1.0, &Sequential).unwrap();
        prop_assert!(t.probabilities.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(t.criterion_values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn charfn_modulus_at_most_one(inc in prop::collection::vec(-1.0f64..1.0, 3..20), v in -20.0f64..20.0) {
        let paths: Vec<PathSample> = (0..5).map(|r| {
            let shifted: Vec<f64> = inc.iter().map(|x| x * (r as f64 + 1.0)).collect();
            walk(1, 20, 0.05, &shifted)
        }).collect();
        let rows = charfn_decay_probe(&paths, &[0.1, 0.5, 1.0], &[vec![vec![v], vec![-v]]], &Sequential).unwrap();
        prop_assert!(rows[0].modulus <= 1.0);
    }

    #[test]
    fn power_law_fit_recovers_exponent(slope in -2.0f64..2.0, c in 0.1f64..10.0) {
        let s: Vec<f64> = (0..6).map(|k| 2f64.powi(-k)).collect();
        let l: Vec<f64> = s.iter().map(|x| c * x.powf(slope)).collect();
        let fit = fit_power_law(&s, &l).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn simplex_identity_holds(b1 in -0.5f64..0.9, b2 in -0.5f64..0.9, h in 0.1f64..3.0) {
        let c = ehm_identity_check(&[b1, b2], h).unwrap();
        prop_assert!(c.residual < 1e-6, "{:?}", c);
    }
}
