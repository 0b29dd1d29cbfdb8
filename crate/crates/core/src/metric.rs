//! Per-dimension pseudometrics and their Euclidean embeddings.
//!
//! Every dimension `i` has a weight `omega_i` (the product of the decay
//! factors `gamma_j` over `i` and its ancestors) and a trade-off `rho_i`.
//! Distances are:
//!
//! | activity of (x, x') | real dimension                          | categorical dimension                      |
//! |---------------------|-----------------------------------------|--------------------------------------------|
//! | both inactive       | 0                                       | 0                                          |
//! | exactly one active  | `omega`                                 | `omega`                                    |
//! | both active         | `2 omega |sin(pi rho (x - x') / 2w)|`  | `omega sqrt2 rho / sqrt(1 + (m-1)(1-rho)^2)` if different, else 0 |
//!
//! where `w = u - l`. Each is the Euclidean distance between the embedded
//! points returned by [`embed_real`] / [`embed_cat`]: the origin when the
//! dimension is inactive, otherwise a point at radius `omega` (an arc of a
//! circle for reals, a normalized one-hot-with-floor vector for categories).

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use thiserror::Error;

use crate::space::{Bounds, ParamSpace, SpaceError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("MissingValue: dimension is active but has no value")]
    MissingValue,
    #[error("ValueOutOfBounds: {value} outside [{lower}, {upper}]")]
    ValueOutOfBounds { value: f64, lower: f64, upper: f64 },
    #[error("UnknownCategory: index {index} with {count} categories")]
    UnknownCategory { index: usize, count: usize },
    #[error("InvalidCategoryCount: {0} (need at least 2)")]
    InvalidCategoryCount(usize),
    #[error("ParameterOutOfRange: {name} = {value} not in [0, 1]")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("MissingGamma: no decay factor for `{0}`")]
    MissingGamma(String),
    #[error("GammaOutOfRange: `{id}` has gamma {value} not in [0, 1]")]
    GammaOutOfRange { id: String, value: f64 },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

fn unit_interval(name: &'static str, value: f64) -> Result<f64, MetricError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(MetricError::ParameterOutOfRange { name, value })
    }
}

/// Hyperparameters of one dimension's pseudometric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimMetricParams {
    gamma: f64,
    rho: f64,
    omega: f64,
}

impl DimMetricParams {
    pub fn new(gamma: f64, rho: f64, omega: f64) -> Result<Self, MetricError> {
        Ok(Self {
            gamma: unit_interval("gamma", gamma)?,
            rho: unit_interval("rho", rho)?,
            omega: unit_interval("omega", omega)?,
        })
    }

    /// Params for a root dimension, where `omega == gamma`.
    pub fn root(gamma: f64, rho: f64) -> Result<Self, MetricError> {
        Self::new(gamma, rho, gamma)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn with_omega(self, omega: f64) -> Result<Self, MetricError> {
        Self::new(self.gamma, self.rho, omega)
    }

    pub fn with_rho(self, rho: f64) -> Result<Self, MetricError> {
        Self::new(self.gamma, rho, self.omega)
    }
}

/// One coordinate of a configuration as seen by a single dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimPoint<T> {
    pub value: Option<T>,
    pub active: bool,
}

impl<T> DimPoint<T> {
    pub fn active(value: T) -> Self {
        Self {
            value: Some(value),
            active: true,
        }
    }

    pub fn inactive() -> Self {
        Self {
            value: None,
            active: false,
        }
    }

    fn required(self) -> Result<T, MetricError> {
        self.value.ok_or(MetricError::MissingValue)
    }
}

/// A point in the Euclidean image of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Embedding) -> f64 {
        debug_assert_eq!(self.0.len(), other.0.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// `omega_i`: product of `gamma_j` over `j` in `anc(i) ∪ {i}`, with the
/// decay factors looked up by dimension id.
pub fn omega(space: &ParamSpace, gammas: &BTreeMap<String, f64>, id: &str) -> Result<f64, MetricError> {
    let i = space.index_of(id)?;
    let mut product = 1.0;
    for &j in space.ancestor_indices(i).iter().chain(std::iter::once(&i)) {
        let jid = &space.dimension(j).id;
        let g = *gammas
            .get(jid)
            .ok_or_else(|| MetricError::MissingGamma(jid.clone()))?;
        if !(0.0..=1.0).contains(&g) {
            return Err(MetricError::GammaOutOfRange {
                id: jid.clone(),
                value: g,
            });
        }
        product *= g;
    }
    Ok(product)
}

/// [`omega`] with decay factors indexed by canonical dimension position.
pub fn omega_indexed(space: &ParamSpace, gammas: &[f64], i: usize) -> Result<f64, MetricError> {
    let mut product = 1.0;
    for &j in space.ancestor_indices(i).iter().chain(std::iter::once(&i)) {
        let g = gammas[j];
        if !(0.0..=1.0).contains(&g) {
            return Err(MetricError::GammaOutOfRange {
                id: space.dimension(j).id.clone(),
                value: g,
            });
        }
        product *= g;
    }
    Ok(product)
}

fn check_real(bounds: Bounds, p: DimPoint<f64>) -> Result<Option<f64>, MetricError> {
    if !p.active {
        return Ok(None);
    }
    let x = p.required()?;
    if !bounds.contains(x) {
        return Err(MetricError::ValueOutOfBounds {
            value: x,
            lower: bounds.lower,
            upper: bounds.upper,
        });
    }
    Ok(Some(x))
}

fn check_cat(m: usize, p: DimPoint<usize>) -> Result<Option<usize>, MetricError> {
    if m < 2 {
        return Err(MetricError::InvalidCategoryCount(m));
    }
    if !p.active {
        return Ok(None);
    }
    let j = p.required()?;
    if j >= m {
        return Err(MetricError::UnknownCategory { index: j, count: m });
    }
    Ok(Some(j))
}

/// Pseudometric of a bounded real dimension.
///
/// `1 - cos t` is evaluated as `2 sin^2(t/2)`, which avoids cancellation
/// for nearby values.
pub fn dist_real(
    params: DimMetricParams,
    bounds: Bounds,
    a: DimPoint<f64>,
    b: DimPoint<f64>,
) -> Result<f64, MetricError> {
    match (check_real(bounds, a)?, check_real(bounds, b)?) {
        (None, None) => Ok(0.0),
        (Some(_), None) | (None, Some(_)) => Ok(params.omega),
        (Some(x), Some(y)) => {
            let half_angle = PI * params.rho * (x - y) / (2.0 * bounds.width());
            Ok(2.0 * params.omega * half_angle.sin().abs())
        }
    }
}

/// Image of a real coordinate: the origin if inactive, else
/// `omega [sin t, cos t]` with `t = pi rho (x - l) / (u - l)`.
pub fn embed_real(params: DimMetricParams, bounds: Bounds, p: DimPoint<f64>) -> Result<Embedding, MetricError> {
    Ok(match check_real(bounds, p)? {
        None => Embedding(vec![0.0, 0.0]),
        Some(x) => {
            let t = PI * params.rho * (x - bounds.lower) / bounds.width();
            Embedding(vec![params.omega * t.sin(), params.omega * t.cos()])
        }
    })
}

/// Norm of `e_j + (1 - rho) sum_{l != j} e_l`.
fn cat_norm(m: usize, rho: f64) -> f64 {
    let off = 1.0 - rho;
    (1.0 + (m as f64 - 1.0) * off * off).sqrt()
}

/// Distance between two different active categories.
pub fn cat_separation(params: DimMetricParams, m: usize) -> f64 {
    params.omega * SQRT_2 * params.rho / cat_norm(m, params.rho)
}

/// Pseudometric of a categorical dimension with `m` values.
pub fn dist_cat(
    params: DimMetricParams,
    m: usize,
    a: DimPoint<usize>,
    b: DimPoint<usize>,
) -> Result<f64, MetricError> {
    match (check_cat(m, a)?, check_cat(m, b)?) {
        (None, None) => Ok(0.0),
        (Some(_), None) | (None, Some(_)) => Ok(params.omega),
        (Some(x), Some(y)) if x == y => Ok(0.0),
        (Some(_), Some(_)) => Ok(cat_separation(params, m)),
    }
}

/// Image of a categorical coordinate: zero if inactive, else the vector with
/// 1 at the chosen category and `1 - rho` elsewhere, scaled to norm `omega`.
pub fn embed_cat(params: DimMetricParams, m: usize, p: DimPoint<usize>) -> Result<Embedding, MetricError> {
    Ok(match check_cat(m, p)? {
        None => Embedding(vec![0.0; m]),
        Some(j) => {
            let scale = params.omega / cat_norm(m, params.rho);
            let off = scale * (1.0 - params.rho);
            let mut v = vec![off; m];
            v[j] = scale;
            Embedding(v)
        }
    })
}

/// Closed-form crossover value of `rho` as printed alongside the categorical
/// metric: the root in (0, 1) of `sqrt2 rho = 1 + (m-1)(1-rho)^2`.
pub fn rho_star_paper(m: usize) -> Result<f64, MetricError> {
    if m < 2 {
        return Err(MetricError::InvalidCategoryCount(m));
    }
    let m = m as f64;
    let numerator = SQRT_2 - 2.0 + 2.0 * m - (6.0 - 4.0 * SQRT_2 + 4.0 * (SQRT_2 - 1.0) * m).sqrt();
    Ok(numerator / (2.0 * (m - 1.0)))
}

/// The `rho` at which two different active categories are exactly as far
/// apart as an active and an inactive point, for the metric implemented by
/// [`dist_cat`]. Found by bisection to full double precision.
pub fn rho_star_crossover(m: usize) -> Result<f64, MetricError> {
    if m < 2 {
        return Err(MetricError::InvalidCategoryCount(m));
    }
    // Increasing in rho: -sqrt(m) at 0, sqrt2 - 1 at 1.
    let excess = |rho: f64| SQRT_2 * rho - cat_norm(m, rho);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick whichever end has the smaller residual.
    Ok(if excess(lo).abs() <= excess(hi).abs() { lo } else { hi })
}
