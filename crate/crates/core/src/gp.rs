//! Exact Gaussian-process regression with the hierarchical kernel.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{BaseKernel, Combination, DimKernelSpec, HierarchicalKernel, KernelError, KernelSpec};
use crate::linalg;
use crate::space::{ParamSpace, ValidConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("NotFactorizable: Cholesky failed even with jitter {max_jitter:e}")]
    NotFactorizable { max_jitter: f64 },
    #[error("DimensionMismatch: {configs} configs but {targets} targets")]
    DimensionMismatch { configs: usize, targets: usize },
    #[error("EmptyDataset")]
    EmptyDataset,
    #[error("NonFiniteTarget at row {0}")]
    NonFiniteTarget(usize),
    #[error("InvalidNoise: {0}")]
    InvalidNoise(f64),
    #[error("InvalidBudget: budget must be at least 1")]
    InvalidBudget,
    #[error("AllCandidatesFailed: none of {0} candidates could be fitted")]
    AllCandidatesFailed(usize),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    configs: Vec<ValidConfig>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(configs: Vec<ValidConfig>, targets: Vec<f64>) -> Result<Self, GpError> {
        if configs.len() != targets.len() {
            return Err(GpError::DimensionMismatch {
                configs: configs.len(),
                targets: targets.len(),
            });
        }
        if let Some(row) = targets.iter().position(|y| !y.is_finite()) {
            return Err(GpError::NonFiniteTarget(row));
        }
        Ok(Self { configs, targets })
    }

    pub fn configs(&self) -> &[ValidConfig] {
        &self.configs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Jitter multipliers (of the mean diagonal) tried in order after a plain
/// factorization fails.
pub const JITTER_LADDER: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: HierarchicalKernel,
    noise: f64,
    jitter: f64,
    train: Vec<ValidConfig>,
    targets: DVector<f64>,
    factor: DMatrix<f64>,
    alpha: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Number of variances raised to zero.
    pub clamped: usize,
    /// Smallest variance before clamping (`+inf` for no queries).
    pub min_raw_variance: f64,
}

/// Factorizes `K + noise I`, adding diagonal jitter only if needed.
pub fn fit(kernel: &HierarchicalKernel, data: &Dataset, noise: f64) -> Result<GpModel, GpError> {
    if data.is_empty() {
        return Err(GpError::EmptyDataset);
    }
    if !noise.is_finite() || noise < 0.0 {
        return Err(GpError::InvalidNoise(noise));
    }
    let n = data.len();
    let mut cov = kernel.gram(data.configs())?.entries;
    for i in 0..n {
        cov[(i, i)] += noise;
    }
    let mean_diag = cov.diagonal().mean();

    let mut attempt = 0.0;
    let mut factor = linalg::cholesky(&cov);
    for &scale in &JITTER_LADDER {
        if factor.is_some() {
            break;
        }
        attempt = scale * mean_diag;
        let mut jittered = cov.clone();
        for i in 0..n {
            jittered[(i, i)] += attempt;
        }
        log::debug!("cholesky failed, retrying with jitter {attempt:e}");
        factor = linalg::cholesky(&jittered);
    }
    let factor = factor.ok_or(GpError::NotFactorizable { max_jitter: attempt })?;

    let targets = DVector::from_column_slice(data.targets());
    let alpha = cholesky_solve(&factor, &targets);
    Ok(GpModel {
        kernel: kernel.clone(),
        noise,
        jitter: attempt,
        train: data.configs().to_vec(),
        targets,
        factor,
        alpha,
    })
}

fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let z = l.solve_lower_triangular(b).expect("factor has a positive diagonal");
    l.tr_solve_lower_triangular(&z).expect("factor has a positive diagonal")
}

impl GpModel {
    pub fn kernel(&self) -> &HierarchicalKernel {
        &self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Diagonal jitter added on top of the noise, 0 for a clean fit.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    /// `K + (noise + jitter) I`, the matrix the factor represents.
    pub fn regularized_gram(&self) -> Result<DMatrix<f64>, GpError> {
        let mut cov = self.kernel.gram(&self.train)?.entries;
        for i in 0..cov.nrows() {
            cov[(i, i)] += self.noise + self.jitter;
        }
        Ok(cov)
    }

    /// Posterior mean and variance at each query.
    pub fn predict(&self, queries: &[ValidConfig]) -> Result<Prediction, GpError> {
        if queries.is_empty() {
            return Ok(Prediction {
                means: Vec::new(),
                variances: Vec::new(),
                clamped: 0,
                min_raw_variance: f64::INFINITY,
            });
        }
        let cross = self.kernel.cross_gram(&self.train, queries)?;
        let means = cross.tr_mul(&self.alpha);
        let v = self
            .factor
            .solve_lower_triangular(&cross)
            .expect("factor has a positive diagonal");
        let mut variances = Vec::with_capacity(queries.len());
        let mut clamped = 0;
        let mut min_raw = f64::INFINITY;
        for (j, q) in queries.iter().enumerate() {
            let prior = self.kernel.k_combined(q, q)?;
            let raw = prior - v.column(j).norm_squared();
            min_raw = min_raw.min(raw);
            if raw < 0.0 {
                clamped += 1;
            }
            variances.push(raw.max(0.0));
        }
        Ok(Prediction {
            means: means.iter().copied().collect(),
            variances,
            clamped,
            min_raw_variance: min_raw,
        })
    }

    /// `-y^T alpha / 2 - sum log L_ii - (N/2) log 2 pi`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.train.len() as f64;
        let fit = -0.5 * self.targets.dot(&self.alpha);
        let complexity: f64 = self.factor.diagonal().iter().map(|d| d.ln()).sum();
        fit - complexity - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            spec: self.kernel.spec(),
            noise: self.noise,
            jitter: self.jitter,
            log_marginal_likelihood: self.log_marginal_likelihood(),
            n_train: self.train.len(),
        }
    }
}

/// Serializable description of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSummary {
    pub spec: KernelSpec,
    pub noise: f64,
    pub jitter: f64,
    pub log_marginal_likelihood: f64,
    pub n_train: usize,
}

// ---------------------------------------------------------------------------
// Tuning

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelFamily {
    ExponentiatedQuadratic,
    /// Rational quadratic with a fixed shape parameter.
    RationalQuadratic { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneOptions {
    pub budget: usize,
    pub seed: u64,
    pub combination: Combination,
    pub family: KernelFamily,
}

impl TuneOptions {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            combination: Combination::Product,
            family: KernelFamily::ExponentiatedQuadratic,
        }
    }
}

pub const LENGTH_SCALE_RANGE: (f64, f64) = (1e-2, 1e2);
pub const SIGMA_RANGE: (f64, f64) = (1e-1, 1e1);
pub const NOISE_RANGE: (f64, f64) = (1e-6, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub spec: KernelSpec,
    pub noise: f64,
    /// `None` when the fit failed.
    pub lml: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub spec: KernelSpec,
    pub noise: f64,
    pub lml: f64,
    pub incumbent: usize,
    pub candidates: Vec<Candidate>,
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Draws one candidate: per dimension in canonical order `gamma`, `rho`,
/// length scale, output scale; then the noise variance.
pub fn sample_candidate<R: Rng + ?Sized>(space: &ParamSpace, opts: &TuneOptions, rng: &mut R) -> (KernelSpec, f64) {
    let mut dims = std::collections::BTreeMap::new();
    for d in space.dimensions() {
        let gamma: f64 = rng.random();
        let rho: f64 = rng.random();
        let length_scale = log_uniform(rng, LENGTH_SCALE_RANGE);
        let sigma = log_uniform(rng, SIGMA_RANGE);
        let kernel = match opts.family {
            KernelFamily::ExponentiatedQuadratic => BaseKernel::exponentiated_quadratic(sigma, length_scale),
            KernelFamily::RationalQuadratic { alpha } => {
                BaseKernel::rational_quadratic(sigma, length_scale, alpha)
            }
        };
        dims.insert(d.id.clone(), DimKernelSpec::new(gamma, rho, kernel));
    }
    let noise = log_uniform(rng, NOISE_RANGE);
    (
        KernelSpec {
            combination: opts.combination,
            default: None,
            dimensions: dims,
        },
        noise,
    )
}

/// Random search for the hyperparameters with the highest log marginal
/// likelihood. Ties keep the earliest candidate.
pub fn tune(space: &ParamSpace, data: &Dataset, opts: &TuneOptions) -> Result<TuneResult, GpError> {
    if opts.budget == 0 {
        return Err(GpError::InvalidBudget);
    }
    let mut rng = crate::seeded_rng(opts.seed, 0);
    let mut candidates = Vec::with_capacity(opts.budget);
    let mut best: Option<(usize, f64)> = None;
    for index in 0..opts.budget {
        let (spec, noise) = sample_candidate(space, opts, &mut rng);
        let kernel = HierarchicalKernel::new(space, &spec)?;
        let lml = match fit(&kernel, data, noise) {
            Ok(model) => Some(model.log_marginal_likelihood()).filter(|v| v.is_finite()),
            Err(GpError::NotFactorizable { .. }) => None,
            Err(e) => return Err(e),
        };
        if let Some(v) = lml {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((index, v));
            }
        }
        candidates.push(Candidate { spec, noise, lml });
    }
    let (incumbent, lml) = best.ok_or(GpError::AllCandidatesFailed(opts.budget))?;
    Ok(TuneResult {
        spec: candidates[incumbent].spec.clone(),
        noise: candidates[incumbent].noise,
        lml,
        incumbent,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toggle() -> ParamSpace {
        ParamSpace::from_json(
            r#"{
                "dimensions": [
                    {"id": "A", "type": "categorical", "values": ["on", "off"]},
                    {"id": "B", "type": "real", "lower": 0.0, "upper": 1.0}
                ],
                "conditions": [{"target": "B", "governor": "A", "allowed": ["on"]}]
            }"#,
        )
        .unwrap()
    }

    fn kernel(space: &ParamSpace) -> HierarchicalKernel {
        let spec = KernelSpec::shared(
            Combination::Product,
            DimKernelSpec::new(1.0, 1.0, BaseKernel::exponentiated_quadratic(1.0, 1.0)),
        );
        HierarchicalKernel::new(space, &spec).unwrap()
    }

    #[test]
    fn scalar_fit() {
        let space = toggle();
        let k = kernel(&space);
        let x = space.validate_config_json(r#"{"A": "on", "B": 0.5}"#).unwrap();
        let model = fit(&k, &Dataset::new(vec![x], vec![0.3]).unwrap(), 0.1).unwrap();
        assert_eq!(model.jitter(), 0.0);
        assert_abs_diff_eq!(model.factor()[(0, 0)], (1.0f64 + 0.1).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn duplicate_configs_need_jitter() {
        let space = toggle();
        let k = kernel(&space);
        let x = space.validate_config_json(r#"{"A": "on", "B": 0.5}"#).unwrap();
        let data = Dataset::new(vec![x.clone(), x], vec![1.0, 1.0]).unwrap();
        let model = fit(&k, &data, 0.0).unwrap();
        assert!(model.jitter() > 0.0);
        assert!(model.jitter() <= 1e-4);
    }

    #[test]
    fn scalar_lml_closed_form() {
        let space = toggle();
        // sigma^2 + noise = 1
        let spec = KernelSpec::shared(
            Combination::Product,
            DimKernelSpec::new(1.0, 1.0, BaseKernel::exponentiated_quadratic(0.8f64.sqrt().sqrt(), 1.0)),
        );
        let k = HierarchicalKernel::new(&space, &spec).unwrap();
        let x = space.validate_config_json(r#"{"A": "on", "B": 0.5}"#).unwrap();
        let model = fit(&k, &Dataset::new(vec![x], vec![0.0]).unwrap(), 0.2).unwrap();
        assert_abs_diff_eq!(model.log_marginal_likelihood(), -0.9189385332, epsilon = 1e-9);
    }

    #[test]
    fn one_point_posterior_mean() {
        let space = toggle();
        let k = kernel(&space);
        let x = space.validate_config_json(r#"{"A": "on", "B": 0.5}"#).unwrap();
        let z = space.validate_config_json(r#"{"A": "off"}"#).unwrap();
        let model = fit(&k, &Dataset::new(vec![x.clone()], vec![2.0]).unwrap(), 0.0).unwrap();
        let kzx = k.k_combined(&z, &x).unwrap();
        let pred = model.predict(&[z]).unwrap();
        assert_abs_diff_eq!(pred.means[0], 2.0 * kzx / 1.0, epsilon = 1e-14);
        assert!(model.predict(&[]).unwrap().means.is_empty());
    }

    #[test]
    fn error_paths() {
        let space = toggle();
        let k = kernel(&space);
        assert_eq!(
            Dataset::new(vec![space.sample_config(0)], vec![]).unwrap_err(),
            GpError::DimensionMismatch { configs: 1, targets: 0 }
        );
        assert_eq!(
            Dataset::new(vec![space.sample_config(0)], vec![f64::NAN]).unwrap_err(),
            GpError::NonFiniteTarget(0)
        );
        let empty = Dataset::new(vec![], vec![]).unwrap();
        assert_eq!(fit(&k, &empty, 0.1).unwrap_err(), GpError::EmptyDataset);
        let one = Dataset::new(vec![space.sample_config(0)], vec![1.0]).unwrap();
        assert_eq!(fit(&k, &one, -1.0).unwrap_err(), GpError::InvalidNoise(-1.0));
        assert_eq!(
            tune(&space, &one, &TuneOptions::new(0, 1)).unwrap_err(),
            GpError::InvalidBudget
        );
    }

    #[test]
    fn tune_budget_one_returns_the_candidate() {
        let space = toggle();
        let configs: Vec<_> = (0..8).map(|s| space.sample_config(s)).collect();
        let y: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let data = Dataset::new(configs, y).unwrap();
        let r = tune(&space, &data, &TuneOptions::new(1, 42)).unwrap();
        assert_eq!(r.incumbent, 0);
        assert_eq!(r.candidates.len(), 1);
        assert_eq!(r.spec, r.candidates[0].spec);
        assert_eq!(tune(&space, &data, &TuneOptions::new(1, 42)).unwrap(), r);
    }
}
