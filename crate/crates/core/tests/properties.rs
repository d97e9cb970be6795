use std::collections::HashSet;

use ep_cde::cli::GridFile;
use ep_cde::design::{estimate_design, generate_fixed_design, optimal_design, DesignDensity, DesignTarget};
use ep_cde::estimator::{shrink_weight, wiener_weight, DensityGrid};
use ep_cde::fourier::{empirical_theta, synth_sq};
use ep_cde::oracle::super_oracle_bandwidth;
use ep_cde::quadrature::simpson_weights;
use ep_cde::risk::{class_risk, pinsker_aniso, SmoothnessClass};
use ep_cde::schedule::{bi_cutoff_level, bivariate_threshold, build_schedule, uni_cutoff_level};
use ep_cde::sim::{fit_ise, generate_dataset, IseGrid, ModelSpec, DEFAULT_Y_WINDOW};
use ep_cde::study::{median, CellReport, ReplicateRecord};
use ep_cde::{fit, DesignKind, DesignSpec, Loss, SamplePairs};
use proptest::prelude::*;
use std::sync::Arc;

fn unit_pairs(n: usize) -> impl Strategy<Value = SamplePairs> {
    (prop::collection::vec(-0.5f64..1.5, n), prop::collection::vec(0.0f64..=1.0, n))
        .prop_map(|(y, x)| SamplePairs::new(y, x, DesignKind::Random).unwrap())
}

fn tensor_simpson(nodes: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let h = 1.0 / (nodes - 1) as f64;
    let w = simpson_weights(nodes, h);
    let mut total = 0.0;
    for (i, wi) in w.iter().enumerate() {
        for (k, wk) in w.iter().enumerate() {
            total += wi * wk * f(i as f64 * h, k as f64 * h);
        }
    }
    total
}

fn coefficient_set() -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
    prop::collection::hash_map((0usize..12, 0usize..12), -1.0f64..1.0, 1..6)
        .prop_map(|m| m.into_iter().map(|((j, r), v)| (j, r, v)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn parseval_on_tensor_grid(coeffs in coefficient_set()) {
        let energy: f64 = coeffs.iter().map(|c| c.2 * c.2).sum();
        let q = tensor_simpson(513, |y, x| synth_sq(&coeffs, y, x).unwrap().powi(2));
        prop_assert!((q - energy).abs() <= 1e-6 * energy, "{q} vs {energy}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zeroth_coefficient_is_the_unit_fraction(data in unit_pairs(40)) {
        let inside = data.y().iter().filter(|y| (0.0..=1.0).contains(*y)).count();
        let one = ep_cde::design::ConstantDensity(1.0);
        prop_assert_eq!(empirical_theta(&data, &one, 0, 0).unwrap(), inside as f64 / 40.0);
    }

    #[test]
    fn design_estimate_floor_and_mass(x in prop::collection::vec(0.0f64..=1.0, 16..400)) {
        let est = estimate_design(&x).unwrap();
        let nodes = 10_001;
        let h = 1.0 / (nodes - 1) as f64;
        let w = simpson_weights(nodes, h);
        let (mut pivotal, mut truncated) = (0.0, 0.0);
        for (i, wi) in w.iter().enumerate() {
            let t = i as f64 * h;
            let p = ep_cde::PredictorDensity::density(&est, t);
            prop_assert!(p >= est.floor());
            pivotal += wi * est.pivotal(t);
            truncated += wi * p;
        }
        prop_assert!((pivotal - 1.0).abs() < 1e-10, "pivotal mass {pivotal}");
        prop_assert!(truncated >= 1.0 - 1e-12);
    }

    #[test]
    fn fixed_design_is_strictly_increasing(n in 1usize..300, slope in -1.9f64..1.9) {
        let spec = DesignSpec::new(DesignKind::Fixed, DesignDensity::Linear { slope }).unwrap();
        let x = generate_fixed_design(&spec, n).unwrap();
        prop_assert_eq!(x.len(), n);
        prop_assert!(x.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn optimal_design_is_scale_invariant(a in 0.1f64..2.0, c in 0.01f64..100.0) {
        let sigma = move |x: f64| 1.0 + a * x * x;
        let base = optimal_design(DesignTarget::Regression(Arc::new(sigma))).unwrap();
        let scaled = optimal_design(DesignTarget::Regression(Arc::new(move |x| c * sigma(x)))).unwrap();
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            prop_assert!((base.density(x) - scaled.density(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn bivariate_thresholds_order_by_product(k1 in 1usize..40, t1 in 1usize..40, k2 in 1usize..40, t2 in 1usize..40) {
        let (a, b) = (bivariate_threshold(k1, t1), bivariate_threshold(k2, t2));
        prop_assert!(a > 0.0 && a < 1.0);
        let (pa, pb) = ((k1 + 3) * (t1 + 3), (k2 + 3) * (t2 + 3));
        if pa < pb {
            prop_assert!(a > b);
        } else if pa == pb {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn schedule_cutoffs_and_partition(n in 16usize..200_000) {
        let s = build_schedule(n, Loss::Square, None).unwrap();
        let (k, t) = (s.k_cut(), s.t_cut());
        let ue = s.uni_edges();
        prop_assert!((ue[k] as f64) > uni_cutoff_level(n));
        prop_assert!(k == 1 || (ue[k - 1] as f64) <= uni_cutoff_level(n));
        let be = s.bi_edges();
        prop_assert!((be[t] as f64) > bi_cutoff_level(n));
        prop_assert!(t == 1 || (be[t - 1] as f64) <= bi_cutoff_level(n));
        for kk in 1..=k {
            prop_assert!(s.uni_threshold(kk) > 0.0 && s.uni_threshold(kk) < 1.0);
        }
        let mut seen = HashSet::new();
        for kk in 1..=t {
            for tau in 1..=t {
                prop_assert!(s.bi_threshold(kk, tau) > 0.0 && s.bi_threshold(kk, tau) < 1.0);
                for j in s.bi_response_range(kk) {
                    for r in s.bi_predictor_range(tau) {
                        prop_assert!(seen.insert((j, r)), "({j}, {r}) in two blocks");
                    }
                }
            }
        }
        let ext = s.bi_extent();
        prop_assert_eq!(seen.len(), ext * ext);
        prop_assert!(seen.iter().all(|&(j, r)| j < ext && r >= 1 && r <= ext));
    }

    #[test]
    fn shrink_weights_lie_in_unit_interval_and_grow(
        sum_sq in 0.0f64..10.0,
        extra in 0.0f64..10.0,
        t in 0.01f64..0.99,
        d in 0.1f64..5.0,
        n in 16usize..10_000,
    ) {
        let w1 = shrink_weight(sum_sq, t, d, n);
        let w2 = shrink_weight(sum_sq + extra, t, d, n);
        prop_assert!((0.0..1.0).contains(&w1));
        prop_assert!((0.0..1.0).contains(&w2));
        if sum_sq > t * d / n as f64 {
            prop_assert!(w2 >= w1);
        }
    }

    #[test]
    fn wiener_weight_minimises_block_loss(theta in 1e-4f64..5.0, len in 1.0f64..50.0, d in 0.1f64..5.0, n in 16usize..5000) {
        let noise = d / n as f64;
        let loss = |c: f64| (1.0 - c).powi(2) * len * theta + c * c * len * noise;
        let best = wiener_weight(theta, d, n);
        for i in 0..=200 {
            let c = i as f64 / 200.0;
            prop_assert!(loss(best) <= loss(c) + 1e-15);
        }
    }

    #[test]
    fn bandwidth_scaling(n in 2usize..1_000_000) {
        prop_assert!((super_oracle_bandwidth(32 * n) / super_oracle_bandwidth(n) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn aniso_constant_is_symmetric(a in 0.5f64..4.0, b in 0.5f64..4.0) {
        prop_assert_eq!(pinsker_aniso(a, b).unwrap(), pinsker_aniso(b, a).unwrap());
    }

    #[test]
    fn sobolev_risk_monotone(my in 1u32..4, mx in 1u32..4, q in 0.1f64..10.0, d in 0.1f64..10.0, n in 100usize..100_000) {
        let c = SmoothnessClass::sobolev(my, mx, q).unwrap();
        let r = class_risk(&c, d, n).unwrap();
        prop_assert!(class_risk(&c, d, 2 * n).unwrap() < r);
        prop_assert!(class_risk(&c, 1.5 * d, n).unwrap() > r);
        let bigger = SmoothnessClass::sobolev(my, mx, 1.5 * q).unwrap();
        prop_assert!(class_risk(&bigger, d, n).unwrap() > r);
    }

    #[test]
    fn grid_file_round_trip(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 6)) {
        let g = GridFile {
            meta: vec![("loss".into(), "square".into())],
            grid: DensityGrid { ys: vec![0.0, 0.5, 1.0], xs: vec![0.25, 0.75], values },
        };
        let back = GridFile::parse(&g.to_csv()).unwrap();
        prop_assert_eq!(back.grid.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        g.grid.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn aggregates_ignore_replicate_order(ises in prop::collection::vec((1e-4f64..1.0, 1e-4f64..1.0), 1..30), rot in 0usize..30) {
        let records: Vec<ReplicateRecord> = ises
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| ReplicateRecord {
                n: 100,
                replicate: i,
                seed: i as u64,
                ise_ep: a,
                ise_super: Some(b),
                ise_sub: Some(b * 1.1),
                ise_oracle: None,
                ise_univariate: None,
                bivariate_energy: a * b,
                difficulty: 1.0,
            })
            .collect();
        let mut rotated = records.clone();
        let len = rotated.len();
        rotated.rotate_left(rot % len);
        rotated.reverse();
        let a = CellReport { n: 100, records, failures: vec![] };
        let b = CellReport { n: 100, records: rotated, failures: vec![] };
        prop_assert_eq!(a.median_ratio_super(), b.median_ratio_super());
        prop_assert_eq!(a.median_ratio_sub(), b.median_ratio_sub());
        prop_assert_eq!(a.median_bivariate_energy(), b.median_bivariate_energy());
        let ma = a.mean_ise_ep().unwrap();
        prop_assert!((ma - b.mean_ise_ep().unwrap()).abs() <= 1e-15 * ma.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn only_the_indicator_sees_outside_responses(data in unit_pairs(60), far in 1.5f64..50.0) {
        let moved: Vec<f64> = data.y().iter().map(|&y| if (0.0..=1.0).contains(&y) { y } else { -far }).collect();
        let other = SamplePairs::new(moved, data.x().to_vec(), DesignKind::Random).unwrap();
        let a = fit(&data, Loss::Square, None, None).unwrap();
        let b = fit(&other, Loss::Square, None, None).unwrap();
        prop_assert_eq!(a.square_coefficients(), b.square_coefficients());
    }

    #[test]
    fn evaluation_uses_only_retained_coefficients(data in unit_pairs(80), y in 0.0f64..=1.0, x in 0.0f64..=1.0) {
        let f = fit(&data, Loss::Square, None, None).unwrap();
        let coeffs = f.square_coefficients().unwrap();
        let s = f.schedule();
        let j_max = s.uni_extent().max(s.bi_extent());
        prop_assert!(coeffs.iter().all(|&(j, r, _)| j < j_max && r <= s.bi_extent()));
        let direct = synth_sq(&coeffs, y, x).unwrap();
        prop_assert!((f.evaluate(y, x).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn ise_ignores_row_order(seed in any::<u64>(), shift in 1usize..99) {
        let model = ModelSpec::standard_normal_null();
        let truth = model.true_model().unwrap();
        let data = generate_dataset(&model, 100, seed).unwrap();
        let order: Vec<usize> = (0..100).map(|i| (i + shift) % 100).rev().collect();
        let a = fit(&data, Loss::Line, None, None).unwrap();
        let b = fit(&data.permuted(&order), Loss::Line, None, None).unwrap();
        let g = IseGrid::for_fit(&a, DEFAULT_Y_WINDOW);
        let (ia, ib) = (fit_ise(&a, &truth, &g).unwrap(), fit_ise(&b, &truth, &g).unwrap());
        prop_assert!((ia - ib).abs() <= 1e-9 * ia);
    }
}

#[test]
fn bivariate_energy_shrinks_with_n_under_independence() {
    let model = ModelSpec::standard_normal_null();
    let energy = |n: usize| {
        let e: Vec<f64> = (0..50u64)
            .map(|s| {
                let d = generate_dataset(&model, n, 1000 + s).unwrap();
                fit(&d, Loss::Line, None, None).unwrap().bivariate_energy()
            })
            .collect();
        median(&e).unwrap()
    };
    let (small, large) = (energy(200), energy(2000));
    // thresholds remove the interaction part outright in most replicates, so
    // the medians can tie at zero
    assert!(large <= small, "median interaction energy {large} at n = 2000 vs {small} at n = 200");
    assert_eq!(large, 0.0);
}
