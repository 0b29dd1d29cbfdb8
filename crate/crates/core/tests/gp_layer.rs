mod common;

use archk::gp::{self, Dataset, TuneOptions};
use archk::kernel::{BaseKernel, Combination, DimKernelSpec, HierarchicalKernel, KernelSpec};
use archk::space::{ParamSpace, ValidConfig};
use rand_distr::{Distribution, StandardNormal};

fn sharp_kernel(space: &ParamSpace) -> HierarchicalKernel {
    let spec = KernelSpec::shared(
        Combination::Product,
        DimKernelSpec::new(1.0, 1.0, BaseKernel::exponentiated_quadratic(1.0, 0.3)),
    );
    HierarchicalKernel::new(space, &spec).unwrap()
}

fn distinct_configs(space: &ParamSpace, n: usize, seed: u64) -> Vec<ValidConfig> {
    let mut rng = archk::seeded_rng(seed, 0);
    let mut out: Vec<ValidConfig> = Vec::new();
    while out.len() < n {
        let c = space.sampler().sample(&mut rng);
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Draws targets from the GP prior of `kernel`.
fn prior_sample(kernel: &HierarchicalKernel, configs: &[ValidConfig], noise: f64, seed: u64) -> Vec<f64> {
    let mut cov = kernel.gram(configs).unwrap().entries;
    for i in 0..cov.nrows() {
        cov[(i, i)] += noise + 1e-9;
    }
    let l = cov.cholesky().unwrap().l();
    let mut rng = archk::seeded_rng(seed, 9);
    let z = nalgebra::DVector::from_fn(configs.len(), |_, _| StandardNormal.sample(&mut rng));
    (l * z).iter().copied().collect()
}

#[test]
fn factor_reconstructs_regularized_gram() {
    let space = common::three_level_space();
    let kernel = sharp_kernel(&space);
    let configs = distinct_configs(&space, 30, 1);
    let y: Vec<f64> = (0..30).map(|k| (k as f64 * 0.3).sin()).collect();
    let model = gp::fit(&kernel, &Dataset::new(configs, y).unwrap(), 0.05).unwrap();
    let target = model.regularized_gram().unwrap();
    let l = model.factor();
    let rel = (l * l.transpose() - &target).norm() / target.norm();
    assert!(rel <= 1e-8, "relative error {rel}");
}

#[test]
fn lml_matches_dense_oracle() {
    let space = common::three_level_space();
    let kernel = sharp_kernel(&space);
    for n in [1usize, 5, 10, 20] {
        let configs = distinct_configs(&space, n, n as u64);
        let y = prior_sample(&kernel, &configs, 0.1, 3);
        let model = gp::fit(&kernel, &Dataset::new(configs, y.clone()).unwrap(), 0.1).unwrap();
        let oracle = common::dense_lml(&model.regularized_gram().unwrap(), &y);
        assert!((model.log_marginal_likelihood() - oracle).abs() <= 1e-8, "n={n}");
    }
}

#[test]
fn scaling_targets_lowers_lml() {
    let space = common::three_level_space();
    let kernel = sharp_kernel(&space);
    let configs = distinct_configs(&space, 12, 5);
    let y: Vec<f64> = (0..12).map(|k| (k as f64).cos()).collect();
    let y10: Vec<f64> = y.iter().map(|v| 10.0 * v).collect();
    let a = gp::fit(&kernel, &Dataset::new(configs.clone(), y).unwrap(), 0.1).unwrap();
    let b = gp::fit(&kernel, &Dataset::new(configs, y10).unwrap(), 0.1).unwrap();
    assert!(b.log_marginal_likelihood() < a.log_marginal_likelihood());
}

#[test]
fn noiseless_fit_interpolates() {
    let space = common::three_level_space();
    let kernel = sharp_kernel(&space);
    let configs = distinct_configs(&space, 20, 7);
    let y = prior_sample(&kernel, &configs, 0.0, 2);
    let model = gp::fit(&kernel, &Dataset::new(configs.clone(), y.clone()).unwrap(), 0.0).unwrap();
    assert_eq!(model.jitter(), 0.0);
    let pred = model.predict(&configs).unwrap();
    for (m, t) in pred.means.iter().zip(&y) {
        assert!((m - t).abs() <= 1e-6);
    }
    assert!(pred.variances.iter().all(|&v| v <= 1e-6));
    assert!(pred.min_raw_variance >= -1e-6);
}

#[test]
fn noisy_variance_at_training_points_is_below_noise() {
    let space = common::three_level_space();
    let kernel = sharp_kernel(&space);
    let configs = distinct_configs(&space, 15, 8);
    let y = prior_sample(&kernel, &configs, 0.2, 4);
    let model = gp::fit(&kernel, &Dataset::new(configs.clone(), y).unwrap(), 0.2).unwrap();
    let pred = model.predict(&configs).unwrap();
    assert!(pred.variances.iter().all(|&v| (0.0..=0.2 + 1e-6).contains(&v)));

    let fresh = distinct_configs(&space, 40, 99);
    let pred = model.predict(&fresh).unwrap();
    assert!(pred.min_raw_variance >= -1e-6);
    assert!(pred.variances.iter().all(|&v| v <= kernel.prior_variance() + 1e-12));
}

#[test]
fn tuning_beats_default_hyperparameters() {
    let space = common::three_level_space();
    let truth = KernelSpec {
        combination: Combination::Product,
        default: None,
        dimensions: space
            .dimensions()
            .iter()
            .enumerate()
            .map(|(i, d)| {
                (
                    d.id.clone(),
                    DimKernelSpec::new(0.9, 0.7, BaseKernel::exponentiated_quadratic(if i == 0 { 2.0 } else { 1.0 }, 0.4)),
                )
            })
            .collect(),
    };
    let truth = HierarchicalKernel::new(&space, &truth).unwrap();
    let configs = distinct_configs(&space, 40, 21);
    let y = prior_sample(&truth, &configs, 0.01, 8);
    let data = Dataset::new(configs, y).unwrap();

    let result = gp::tune(&space, &data, &TuneOptions::new(200, 5)).unwrap();
    for c in &result.candidates {
        if let Some(v) = c.lml {
            assert!(result.lml >= v);
        }
    }
    let default = HierarchicalKernel::new(
        &space,
        &KernelSpec::shared(
            Combination::Product,
            DimKernelSpec::new(1.0, 0.5, BaseKernel::exponentiated_quadratic(1.0, 1.0)),
        ),
    )
    .unwrap();
    let baseline = gp::fit(&default, &data, 0.01).unwrap().log_marginal_likelihood();
    assert!(result.lml >= baseline, "tuned {} < default {}", result.lml, baseline);

    let again = gp::tune(&space, &data, &TuneOptions::new(200, 5)).unwrap();
    assert_eq!(again.incumbent, result.incumbent);
    assert_eq!(again.lml.to_bits(), result.lml.to_bits());
}

#[test]
fn jittered_fit_is_recorded_and_usable() {
    let space = common::three_level_space();
    let kernel = sharp_kernel(&space);
    let x = space.sample_config(3);
    let data = Dataset::new(vec![x.clone(), x.clone(), space.sample_config(4)], vec![1.0, 1.0, -1.0]).unwrap();
    let model = gp::fit(&kernel, &data, 0.0).unwrap();
    assert!(model.jitter() > 0.0);
    let pred = model.predict(&[x]).unwrap();
    assert!((pred.means[0] - 1.0).abs() < 1e-3);
}
