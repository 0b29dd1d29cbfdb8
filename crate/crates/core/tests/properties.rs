mod common;

use archk::kernel::{Combination, HierarchicalKernel, KernelSpec};
use archk::metric::{self, DimMetricParams, DimPoint};
use archk::space::{Bounds, ParamSpace, Value};
use archk::verify;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn params(rho: f64, omega: f64) -> DimMetricParams {
    DimMetricParams::new(1.0, rho, omega).unwrap()
}

fn real_point() -> impl Strategy<Value = DimPoint<f64>> {
    prop_oneof![
        1 => Just(DimPoint::inactive()),
        3 => (0.0f64..=1.0).prop_map(DimPoint::active),
        1 => prop_oneof![Just(0.0), Just(1.0)].prop_map(DimPoint::active),
    ]
}

fn cat_point(m: usize) -> impl Strategy<Value = DimPoint<usize>> {
    prop_oneof![
        1 => Just(DimPoint::inactive()),
        3 => (0..m).prop_map(DimPoint::active),
    ]
}

fn bounds() -> impl Strategy<Value = Bounds> {
    (-50.0f64..50.0, -2.0f64..2.0).prop_map(|(lower, log_w)| Bounds {
        lower,
        upper: lower + 10f64.powf(log_w),
    })
}

/// Maps a unit-interval point into `b`.
fn scale(p: DimPoint<f64>, b: Bounds) -> DimPoint<f64> {
    DimPoint {
        value: p.value.map(|t| (b.lower + t * b.width()).min(b.upper)),
        active: p.active,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn real_metric_is_isometric_and_pseudometric(
        rho in 0.0f64..=1.0, omega in 0.0f64..=1.0, b in bounds(),
        x in real_point(), y in real_point(), z in real_point(),
    ) {
        let p = params(rho, omega);
        let (x, y, z) = (scale(x, b), scale(y, b), scale(z, b));
        let d = |a, c| metric::dist_real(p, b, a, c).unwrap();
        let f = |a| metric::embed_real(p, b, a).unwrap();

        prop_assert!((d(x, y) - f(x).distance(&f(y))).abs() <= 1e-12);
        prop_assert_eq!(d(x, y), d(y, x));
        prop_assert!(d(x, y) >= 0.0);
        prop_assert_eq!(d(x, x), 0.0);
        prop_assert!(d(x, y) <= d(x, z) + d(y, z) + 1e-12);
        let norm = f(x).norm();
        let expected = if x.active { omega } else { 0.0 };
        prop_assert!((norm - expected).abs() <= 1e-15);
    }

    #[test]
    fn categorical_metric_is_isometric_and_pseudometric(
        rho in 0.0f64..=1.0, omega in 0.0f64..=1.0,
        (m, x, y, z) in (2usize..12).prop_flat_map(|m| (Just(m), cat_point(m), cat_point(m), cat_point(m))),
    ) {
        let p = params(rho, omega);
        let d = |a, c| metric::dist_cat(p, m, a, c).unwrap();
        let f = |a| metric::embed_cat(p, m, a).unwrap();

        prop_assert!((d(x, y) - f(x).distance(&f(y))).abs() <= 1e-12);
        prop_assert_eq!(d(x, y), d(y, x));
        prop_assert_eq!(d(x, x), 0.0);
        prop_assert!(d(x, y) <= d(x, z) + d(y, z) + 1e-12);
        let norm = f(x).norm();
        let expected = if x.active { omega } else { 0.0 };
        prop_assert!((norm - expected).abs() <= 1e-15);
    }

    #[test]
    fn real_distance_grows_with_separation(
        rho in 0.01f64..=1.0, b in bounds(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
    ) {
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        prop_assume!(hi - lo > 1e-9);
        let p = params(rho, 1.0);
        let at = |t: f64| DimPoint::active(b.lower + t * b.width());
        let near = metric::dist_real(p, b, at(0.0), at(lo)).unwrap();
        let far = metric::dist_real(p, b, at(0.0), at(hi)).unwrap();
        prop_assert!(far > near);
    }

    #[test]
    fn distances_scale_linearly_in_omega(
        rho in 0.0f64..=1.0, k in 0u32..6, x in real_point(), y in real_point(),
    ) {
        // Powers of two keep the scaling exact in floating point.
        let omega = 0.5f64.powi(k as i32);
        let b = Bounds { lower: 0.0, upper: 1.0 };
        let d = metric::dist_real(params(rho, omega), b, x, y).unwrap();
        let d1 = metric::dist_real(params(rho, 1.0), b, x, y).unwrap();
        prop_assert_eq!(d, omega * d1);
        let c = metric::dist_cat(params(rho, omega), 4, DimPoint::active(1), DimPoint::active(3)).unwrap();
        let c1 = metric::dist_cat(params(rho, 1.0), 4, DimPoint::active(1), DimPoint::active(3)).unwrap();
        prop_assert_eq!(c, omega * c1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_is_psd_on_random_spaces(seed in any::<u64>(), product in any::<bool>(), rational in any::<bool>()) {
        let mut rng = archk::seeded_rng(seed, 0);
        let space = verify::random_space(&mut rng, 6, 3);
        let comb = if product { Combination::Product } else { Combination::Sum };
        let kernel = common::random_kernel(&space, comb, rational, &mut rng);
        let configs: Vec<_> = (0..30).map(|_| space.sampler().sample(&mut rng)).collect();
        let g = kernel.gram(&configs).unwrap();
        let lambda = common::jacobi_eigenvalues(&g.entries).into_iter().fold(f64::INFINITY, f64::min);
        prop_assert!(lambda >= -1e-8 * 30.0, "jacobi lambda_min {lambda}");
        let report = verify::check_psd(&g.entries, verify::PSD_TOLERANCE).unwrap();
        prop_assert!(report.pass);
        prop_assert!((report.worst_violation + lambda).abs() < 1e-9);
    }

    #[test]
    fn kernel_is_local_to_ancestors(seed in any::<u64>()) {
        let mut rng = archk::seeded_rng(seed, 1);
        let space = verify::random_space(&mut rng, 6, 3);
        let kernel = common::random_kernel(&space, Combination::Sum, false, &mut rng);
        let sampler = space.sampler();
        let x = sampler.sample(&mut rng);
        let y = sampler.sample(&mut rng);
        let z = sampler.sample(&mut rng);
        for i in 0..space.len() {
            let base = kernel.k_dim(i, &x, &y).unwrap();
            for j in 0..space.len() {
                if j == i || space.ancestor_indices(i).contains(&j) {
                    continue;
                }
                // Copy z's coordinate j into x when the result stays valid.
                if let Ok(x2) = space.with_value(&x, j, z.value(j)) {
                    prop_assert_eq!(kernel.k_dim(i, &x2, &y).unwrap(), base);
                }
            }
        }
    }

    #[test]
    fn combined_kernel_symmetry_and_cauchy_schwarz(seed in any::<u64>(), product in any::<bool>()) {
        let mut rng = archk::seeded_rng(seed, 2);
        let space = verify::random_space(&mut rng, 6, 3);
        let comb = if product { Combination::Product } else { Combination::Sum };
        let kernel = common::random_kernel(&space, comb, seed % 2 == 0, &mut rng);
        let x = space.sampler().sample(&mut rng);
        let y = space.sampler().sample(&mut rng);
        let kxy = kernel.k_combined(&x, &y).unwrap();
        prop_assert_eq!(kxy, kernel.k_combined(&y, &x).unwrap());
        let kxx = kernel.k_combined(&x, &x).unwrap();
        let kyy = kernel.k_combined(&y, &y).unwrap();
        prop_assert!(kxy * kxy <= kxx * kyy + 1e-10);
        prop_assert!((kxx - kernel.prior_variance()).abs() <= 1e-12 * kxx.max(1.0));
    }

    #[test]
    fn lowering_an_ancestor_gamma_raises_descendant_kernels(seed in any::<u64>(), shrink in 0.0f64..1.0) {
        let mut rng = archk::seeded_rng(seed, 3);
        let space = verify::random_space(&mut rng, 6, 3);
        let kernel = common::random_kernel(&space, Combination::Product, false, &mut rng);
        let x = space.sampler().sample(&mut rng);
        let y = space.sampler().sample(&mut rng);
        let spec = kernel.spec();
        for j in 0..space.len() {
            let mut lowered: KernelSpec = spec.clone();
            let entry = lowered.dimensions.get_mut(&space.dimension(j).id).unwrap();
            entry.gamma *= shrink;
            let weaker = HierarchicalKernel::new(&space, &lowered).unwrap();
            for i in 0..space.len() {
                if i == j || space.ancestor_indices(i).contains(&j) {
                    prop_assert!(weaker.k_dim(i, &x, &y).unwrap() >= kernel.k_dim(i, &x, &y).unwrap());
                }
            }
        }
    }

    #[test]
    fn unit_product_kernel_is_bounded_by_one(seed in any::<u64>()) {
        let mut rng = archk::seeded_rng(seed, 4);
        let space = verify::random_space(&mut rng, 6, 3);
        let spec = KernelSpec::shared(
            Combination::Product,
            archk::kernel::DimKernelSpec::new(0.9, 0.8, archk::kernel::BaseKernel::exponentiated_quadratic(1.0, 0.5)),
        );
        let kernel = HierarchicalKernel::new(&space, &spec).unwrap();
        let x = space.sampler().sample(&mut rng);
        let y = space.sampler().sample(&mut rng);
        let k = kernel.k_combined(&x, &y).unwrap();
        prop_assert!(k <= 1.0);
        let all_zero = (0..space.len()).all(|i| kernel.dim_distance(i, &x, &y).unwrap() == 0.0);
        prop_assert_eq!(k == 1.0, all_zero);
    }

    #[test]
    fn activity_is_local_to_ancestors(seed in any::<u64>()) {
        let mut rng = archk::seeded_rng(seed, 5);
        let space = verify::random_space(&mut rng, 6, 3);
        let x = space.sampler().sample(&mut rng);
        let y = space.sampler().sample(&mut rng);
        // Splice y's ancestor values of i into x: activity of i follows y.
        for i in 0..space.len() {
            let mut spliced = x.as_config();
            for &a in space.ancestor_indices(i) {
                spliced.set(a, y.value(a));
            }
            let via = space.activity_with(i, &mut |g| spliced.get(g));
            prop_assert_eq!(via.unwrap(), y.is_active(i));
        }
    }

    #[test]
    fn space_description_round_trips(seed in any::<u64>()) {
        let mut rng = archk::seeded_rng(seed, 6);
        let space = verify::random_space(&mut rng, 8, 4);
        prop_assert_eq!(ParamSpace::from_json(&space.to_json()).unwrap(), space);
    }
}

#[test]
fn jacobi_oracle_sanity() {
    let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
    let mut ev = common::jacobi_eigenvalues(&m);
    ev.sort_by(f64::total_cmp);
    let s = 2f64.sqrt();
    for (got, want) in ev.iter().zip([2.0 - s, 2.0, 2.0 + s]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn duplicate_pair_gram_eigenvalues() {
    let space = common::three_level_space();
    let spec = KernelSpec::shared(
        Combination::Sum,
        archk::kernel::DimKernelSpec::new(0.7, 0.6, archk::kernel::BaseKernel::exponentiated_quadratic(1.0, 1.0)),
    );
    let kernel = HierarchicalKernel::new(&space, &spec).unwrap();
    let x = space.sample_config(8);
    let g = kernel.gram(&[x.clone(), x.clone()]).unwrap();
    let kxx = kernel.k_combined(&x, &x).unwrap();
    assert!(g.entries.iter().all(|&v| v == kxx));
    let mut ev = common::jacobi_eigenvalues(&g.entries);
    ev.sort_by(f64::total_cmp);
    assert!(ev[0].abs() < 1e-12);
    assert!((ev[1] - 2.0 * kxx).abs() < 1e-12);
}

#[test]
fn real_third_rho_boundary() {
    let b = Bounds { lower: 3.0, upper: 7.5 };
    for omega in [0.1, 0.5, 0.9, 1.0] {
        let far = |rho: f64| {
            metric::dist_real(params(rho, omega), b, DimPoint::active(3.0), DimPoint::active(7.5)).unwrap()
        };
        assert!((far(1.0 / 3.0) - omega).abs() <= 1e-12);
        assert!(far(1.0 / 3.0 + 0.05) > omega);
        assert!(far(1.0 / 3.0 - 0.05) < omega);
    }
}

#[test]
fn categorical_rho_zero_ignores_symbols() {
    for m in 2..8 {
        for a in 0..m {
            for c in 0..m {
                let d = metric::dist_cat(params(0.0, 0.8), m, DimPoint::active(a), DimPoint::active(c)).unwrap();
                assert_eq!(d, 0.0);
            }
        }
    }
}

#[test]
fn stored_categories_map_to_values() {
    let space = common::three_level_space();
    let c = space.validate_config_json(r#"{"model": "net", "act": "gelu", "depth": 3, "l2": -1, "opt": "adam"}"#).unwrap();
    assert_eq!(c.value(space.index_of("act").unwrap()), Some(Value::Category(2)));
}
