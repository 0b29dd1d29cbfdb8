//! Base covariances, per-dimension kernels and their combination.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metric::{self, DimMetricParams, DimPoint, Embedding, MetricError};
use crate::space::{Domain, ParamSpace, SpaceError, ValidConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("NegativeDistance: {0}")]
    NegativeDistance(f64),
    #[error("InvalidHyperparameter: {name} = {value}")]
    InvalidHyperparameter { name: &'static str, value: f64 },
    #[error("EmptyInput: at least one configuration is required")]
    EmptyInput,
    #[error("DimensionMismatch: config has {got} dimensions, space has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("MissingDimensionSpec: no kernel settings for `{0}`")]
    MissingDimensionSpec(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Euclidean covariance as a function of distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseKernel {
    /// `sigma^2 exp(-d^2 / (2 lambda^2))`
    ExponentiatedQuadratic { sigma: f64, length_scale: f64 },
    /// `sigma^2 (1 + d^2 / (2 alpha lambda^2))^(-alpha)`
    RationalQuadratic { sigma: f64, length_scale: f64, alpha: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<(), KernelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(KernelError::InvalidHyperparameter { name, value })
    }
}

impl BaseKernel {
    pub fn exponentiated_quadratic(sigma: f64, length_scale: f64) -> Self {
        BaseKernel::ExponentiatedQuadratic { sigma, length_scale }
    }

    pub fn rational_quadratic(sigma: f64, length_scale: f64, alpha: f64) -> Self {
        BaseKernel::RationalQuadratic {
            sigma,
            length_scale,
            alpha,
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        match *self {
            BaseKernel::ExponentiatedQuadratic { sigma, length_scale } => {
                positive("sigma", sigma)?;
                positive("length_scale", length_scale)
            }
            BaseKernel::RationalQuadratic {
                sigma,
                length_scale,
                alpha,
            } => {
                positive("sigma", sigma)?;
                positive("length_scale", length_scale)?;
                positive("alpha", alpha)
            }
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            BaseKernel::ExponentiatedQuadratic { sigma, .. }
            | BaseKernel::RationalQuadratic { sigma, .. } => sigma,
        }
    }

    /// `kappa(0)`.
    pub fn variance(&self) -> f64 {
        self.sigma() * self.sigma()
    }

    pub fn kappa(&self, delta: f64) -> Result<f64, KernelError> {
        self.validate()?;
        if delta.is_nan() || delta < 0.0 {
            return Err(KernelError::NegativeDistance(delta));
        }
        Ok(self.eval(delta))
    }

    fn eval(&self, delta: f64) -> f64 {
        match *self {
            BaseKernel::ExponentiatedQuadratic { sigma, length_scale } => {
                let r = delta / length_scale;
                sigma * sigma * (-0.5 * r * r).exp()
            }
            BaseKernel::RationalQuadratic {
                sigma,
                length_scale,
                alpha,
            } => {
                let r = delta / length_scale;
                sigma * sigma * (1.0 + r * r / (2.0 * alpha)).powf(-alpha)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combination {
    Sum,
    Product,
}

/// Settings for one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimKernelSpec {
    pub gamma: f64,
    pub rho: f64,
    pub kernel: BaseKernel,
}

impl DimKernelSpec {
    pub fn new(gamma: f64, rho: f64, kernel: BaseKernel) -> Self {
        Self { gamma, rho, kernel }
    }
}

/// Kernel hyperparameters as stored in a spec file.
///
/// Dimensions without an entry in `dimensions` fall back to `default`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub combination: Combination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<DimKernelSpec>,
    #[serde(default)]
    pub dimensions: BTreeMap<String, DimKernelSpec>,
}

impl KernelSpec {
    /// Same settings for every dimension.
    pub fn shared(combination: Combination, dim: DimKernelSpec) -> Self {
        Self {
            combination,
            default: Some(dim),
            dimensions: BTreeMap::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ResolvedDim {
    metric: DimMetricParams,
    base: BaseKernel,
}

/// The combined kernel bound to a space, with `omega` values precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalKernel {
    space: ParamSpace,
    combination: Combination,
    dims: Vec<ResolvedDim>,
}

impl HierarchicalKernel {
    pub fn new(space: &ParamSpace, spec: &KernelSpec) -> Result<Self, KernelError> {
        for id in spec.dimensions.keys() {
            space.index_of(id)?;
        }
        let settings: Vec<DimKernelSpec> = space
            .dimensions()
            .iter()
            .map(|d| {
                spec.dimensions
                    .get(&d.id)
                    .or(spec.default.as_ref())
                    .copied()
                    .ok_or_else(|| KernelError::MissingDimensionSpec(d.id.clone()))
            })
            .collect::<Result<_, _>>()?;
        let gammas: Vec<f64> = settings.iter().map(|s| s.gamma).collect();
        let mut dims = Vec::with_capacity(settings.len());
        for (i, s) in settings.iter().enumerate() {
            s.kernel.validate()?;
            let omega = metric::omega_indexed(space, &gammas, i)?;
            dims.push(ResolvedDim {
                metric: DimMetricParams::new(s.gamma, s.rho, omega)?,
                base: s.kernel,
            });
        }
        Ok(Self {
            space: space.clone(),
            combination: spec.combination,
            dims,
        })
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn combination(&self) -> Combination {
        self.combination
    }

    pub fn metric_params(&self, i: usize) -> DimMetricParams {
        self.dims[i].metric
    }

    pub fn base(&self, i: usize) -> BaseKernel {
        self.dims[i].base
    }

    /// Fully explicit spec (one entry per dimension, no default).
    pub fn spec(&self) -> KernelSpec {
        KernelSpec {
            combination: self.combination,
            default: None,
            dimensions: self
                .space
                .dimensions()
                .iter()
                .zip(&self.dims)
                .map(|(d, r)| {
                    (
                        d.id.clone(),
                        DimKernelSpec::new(r.metric.gamma(), r.metric.rho(), r.base),
                    )
                })
                .collect(),
        }
    }

    /// SHA-256 of the explicit spec together with the space.
    pub fn digest(&self) -> String {
        let payload = serde_json::json!({
            "space": self.space.describe(),
            "kernel": self.spec(),
        });
        sha256_hex(payload.to_string().as_bytes())
    }

    fn check_len(&self, x: &ValidConfig) -> Result<(), KernelError> {
        if x.len() == self.space.len() {
            Ok(())
        } else {
            Err(KernelError::DimensionMismatch {
                expected: self.space.len(),
                got: x.len(),
            })
        }
    }

    /// `d_i(x, x')`.
    pub fn dim_distance(&self, i: usize, x: &ValidConfig, y: &ValidConfig) -> Result<f64, KernelError> {
        self.check_len(x)?;
        self.check_len(y)?;
        let params = self.dims[i].metric;
        Ok(match &self.space.dimension(i).domain {
            Domain::Real(b) => metric::dist_real(params, *b, real_point(x, i), real_point(y, i))?,
            Domain::Categorical(values) => {
                metric::dist_cat(params, values.len(), cat_point(x, i), cat_point(y, i))?
            }
        })
    }

    /// `f_i(x)`.
    pub fn embed(&self, i: usize, x: &ValidConfig) -> Result<Embedding, KernelError> {
        self.check_len(x)?;
        let params = self.dims[i].metric;
        Ok(match &self.space.dimension(i).domain {
            Domain::Real(b) => metric::embed_real(params, *b, real_point(x, i))?,
            Domain::Categorical(values) => metric::embed_cat(params, values.len(), cat_point(x, i))?,
        })
    }

    /// `k_i(x, x') = kappa_i(d_i(x, x'))`.
    pub fn k_dim(&self, i: usize, x: &ValidConfig, y: &ValidConfig) -> Result<f64, KernelError> {
        let d = self.dim_distance(i, x, y)?;
        self.dims[i].base.kappa(d)
    }

    pub fn k_dim_by_id(&self, id: &str, x: &ValidConfig, y: &ValidConfig) -> Result<f64, KernelError> {
        self.k_dim(self.space.index_of(id)?, x, y)
    }

    /// Sum or product of `k_i` over all dimensions.
    pub fn k_combined(&self, x: &ValidConfig, y: &ValidConfig) -> Result<f64, KernelError> {
        let mut acc = match self.combination {
            Combination::Sum => 0.0,
            Combination::Product => 1.0,
        };
        for i in 0..self.dims.len() {
            let k = self.k_dim(i, x, y)?;
            match self.combination {
                Combination::Sum => acc += k,
                Combination::Product => acc *= k,
            }
        }
        Ok(acc)
    }

    /// `k(x, x)`, which depends only on the base variances.
    pub fn prior_variance(&self) -> f64 {
        let v = self.dims.iter().map(|d| d.base.variance());
        match self.combination {
            Combination::Sum => v.sum(),
            Combination::Product => v.product(),
        }
    }

    /// Gram matrix over `configs`. The upper triangle is computed and
    /// mirrored, so the result is exactly symmetric.
    pub fn gram(&self, configs: &[ValidConfig]) -> Result<GramMatrix, KernelError> {
        if configs.is_empty() {
            return Err(KernelError::EmptyInput);
        }
        let n = configs.len();
        let mut entries = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let k = self.k_combined(&configs[a], &configs[b])?;
                entries[(a, b)] = k;
                entries[(b, a)] = k;
            }
        }
        Ok(GramMatrix {
            entries,
            config_digest: configs_digest(&self.space, configs),
            spec_digest: self.digest(),
        })
    }

    /// `K[m][n] = k(a_m, b_n)`.
    pub fn cross_gram(&self, a: &[ValidConfig], b: &[ValidConfig]) -> Result<DMatrix<f64>, KernelError> {
        let mut out = DMatrix::zeros(a.len(), b.len());
        for (m, x) in a.iter().enumerate() {
            for (n, y) in b.iter().enumerate() {
                out[(m, n)] = self.k_combined(x, y)?;
            }
        }
        Ok(out)
    }
}

fn real_point(x: &ValidConfig, i: usize) -> DimPoint<f64> {
    DimPoint {
        value: x.real(i),
        active: x.is_active(i),
    }
}

fn cat_point(x: &ValidConfig, i: usize) -> DimPoint<usize> {
    DimPoint {
        value: x.category(i),
        active: x.is_active(i),
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 over the raw JSON of each configuration, in order.
pub fn configs_digest(space: &ParamSpace, configs: &[ValidConfig]) -> String {
    let raw: Vec<_> = configs.iter().map(|c| space.to_raw(c)).collect();
    sha256_hex(serde_json::to_string(&raw).expect("configs serialize").as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub config_digest: String,
    pub spec_digest: String,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }
}
