//! Numerical checks of the properties the construction guarantees:
//! positive semidefiniteness of Gram matrices, the isometry between each
//! pseudometric and its embedding, and the pseudometric axioms.
//!
//! Sampled checks stratify over activity patterns. Sample `k` of a pair
//! check asks for the pattern `PAIR_PATTERNS[k % 4]`, a triple check for
//! `k % 8` over all eight patterns, so rare branches of deep hierarchies are
//! exercised as often as the common ones. Patterns a dimension cannot reach
//! (an inactive root, say) fall back to unconstrained samples.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{HierarchicalKernel, KernelError};
use crate::linalg;
use crate::space::{ParamSpace, RawConfig, Sampler, ValidConfig};

/// Tolerance for metric identities in double precision.
pub const METRIC_TOLERANCE: f64 = 1e-12;
/// Relative tolerance (times N) on the smallest Gram eigenvalue.
pub const PSD_TOLERANCE: f64 = 1e-8;
/// Largest `|K - K^T|` accepted by [`check_psd`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

const ENDPOINT_PROB: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("AsymmetricInput: max |K - K^T| = {0:e}")]
    AsymmetricInput(f64),
    #[error("NotSquare: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("EmptyInput")]
    EmptyInput,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Spectrum { min_eigenvalue: f64 },
    Pair { x: RawConfig, y: RawConfig },
    Triple { x: RawConfig, y: RawConfig, z: RawConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<String>,
    pub samples: usize,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Observed activity patterns, e.g. `"TF"` for (active, inactive).
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub patterns: BTreeMap<String, usize>,
}

/// Minimum-eigenvalue test: passes iff `lambda_min >= -tol * N`.
pub fn check_psd(matrix: &DMatrix<f64>, tol: f64) -> Result<CheckReport, VerifyError> {
    if matrix.nrows() != matrix.ncols() {
        return Err(VerifyError::NotSquare {
            rows: matrix.nrows(),
            cols: matrix.ncols(),
        });
    }
    if matrix.is_empty() {
        return Err(VerifyError::EmptyInput);
    }
    let asym = linalg::max_asymmetry(matrix);
    if asym > SYMMETRY_TOLERANCE {
        return Err(VerifyError::AsymmetricInput(asym));
    }
    let n = matrix.nrows();
    let lambda_min = linalg::min_eigenvalue(matrix);
    let tolerance = tol * n as f64;
    Ok(CheckReport {
        check: "psd".into(),
        dimension: None,
        samples: n,
        worst_violation: -lambda_min,
        tolerance,
        pass: -lambda_min <= tolerance,
        witness: Some(Witness::Spectrum {
            min_eigenvalue: lambda_min,
        }),
        patterns: BTreeMap::new(),
    })
}

/// Samples `n` configs and checks the PSD property of their Gram matrix.
pub fn check_gram_psd(kernel: &HierarchicalKernel, n: usize, seed: u64) -> Result<CheckReport, VerifyError> {
    let mut rng = crate::seeded_rng(seed, 0);
    let sampler = kernel.space().sampler();
    let configs: Vec<ValidConfig> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    let gram = kernel.gram(&configs)?;
    check_psd(&gram.entries, PSD_TOLERANCE)
}

/// `|d_i(x, y) - ||f_i(x) - f_i(y)|||`.
pub fn isometry_residual(
    kernel: &HierarchicalKernel,
    i: usize,
    x: &ValidConfig,
    y: &ValidConfig,
) -> Result<f64, KernelError> {
    let d = kernel.dim_distance(i, x, y)?;
    let e = kernel.embed(i, x)?.distance(&kernel.embed(i, y)?);
    Ok((d - e).abs())
}

/// `d_i(x, y) - d_i(x, z) - d_i(y, z)`; positive means the triangle
/// inequality fails.
pub fn triangle_violation(
    kernel: &HierarchicalKernel,
    i: usize,
    x: &ValidConfig,
    y: &ValidConfig,
    z: &ValidConfig,
) -> Result<f64, KernelError> {
    Ok(kernel.dim_distance(i, x, y)? - kernel.dim_distance(i, x, z)? - kernel.dim_distance(i, y, z)?)
}

/// Largest of `|d(x, y) - d(y, x)|`, `-d(x, y)`, `d(x, x)` and `d(y, y)`:
/// zero exactly when symmetry, non-negativity and zero self-distance hold.
pub fn axiom_violation(
    kernel: &HierarchicalKernel,
    i: usize,
    x: &ValidConfig,
    y: &ValidConfig,
) -> Result<f64, KernelError> {
    let xy = kernel.dim_distance(i, x, y)?;
    let yx = kernel.dim_distance(i, y, x)?;
    let xx = kernel.dim_distance(i, x, x)?;
    let yy = kernel.dim_distance(i, y, y)?;
    Ok((xy - yx).abs().max(-xy).max(xx).max(yy).max(0.0))
}

fn pattern_key(flags: &[bool]) -> String {
    flags.iter().map(|&a| if a { 'T' } else { 'F' }).collect()
}

/// Per-dimension stratified sampler.
struct Stratified<'a> {
    sampler: Sampler<'a>,
    dim: usize,
    reachable: [bool; 2],
}

impl<'a> Stratified<'a> {
    fn new<R: Rng + ?Sized>(space: &'a ParamSpace, dim: usize, rng: &mut R) -> Self {
        let sampler = space.sampler().with_endpoint_prob(ENDPOINT_PROB);
        let reachable = [
            sampler.requirements_for(dim, false, rng).is_some(),
            sampler.requirements_for(dim, true, rng).is_some(),
        ];
        Self {
            sampler,
            dim,
            reachable,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, active: bool, rng: &mut R) -> ValidConfig {
        if self.reachable[active as usize] {
            if let Some(c) = self.sampler.sample_with_activity(self.dim, active, rng) {
                return c;
            }
        }
        self.sampler.sample(rng)
    }
}

const PAIR_PATTERNS: [[bool; 2]; 4] = [[true, true], [true, false], [false, true], [false, false]];

struct Worst<W> {
    value: f64,
    witness: Option<W>,
}

impl<W> Worst<W> {
    fn new() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            witness: None,
        }
    }

    /// Strictly-greater update, so the earliest witness wins ties.
    fn offer(&mut self, value: f64, witness: impl FnOnce() -> W) {
        if value > self.value || (value.is_nan() && !self.value.is_nan()) {
            self.value = value;
            self.witness = Some(witness());
        }
    }
}

fn pair_check<F>(
    kernel: &HierarchicalKernel,
    name: &str,
    tolerance: f64,
    n_pairs: usize,
    seed: u64,
    mut measure: F,
) -> Result<Vec<CheckReport>, VerifyError>
where
    F: FnMut(usize, &ValidConfig, &ValidConfig) -> Result<f64, KernelError>,
{
    let space = kernel.space();
    let mut reports = Vec::with_capacity(space.len());
    for i in 0..space.len() {
        let mut rng = crate::seeded_rng(seed, i as u64 + 1);
        let strat = Stratified::new(space, i, &mut rng);
        let mut worst = Worst::new();
        let mut patterns = BTreeMap::new();
        for k in 0..n_pairs {
            let [a, b] = PAIR_PATTERNS[k % PAIR_PATTERNS.len()];
            let x = strat.draw(a, &mut rng);
            let y = strat.draw(b, &mut rng);
            *patterns
                .entry(pattern_key(&[x.is_active(i), y.is_active(i)]))
                .or_insert(0) += 1;
            let v = measure(i, &x, &y)?;
            worst.offer(v, || Witness::Pair {
                x: space.to_raw(&x),
                y: space.to_raw(&y),
            });
        }
        reports.push(CheckReport {
            check: name.into(),
            dimension: Some(space.dimension(i).id.clone()),
            samples: n_pairs,
            worst_violation: worst.value,
            tolerance,
            pass: worst.value <= tolerance,
            witness: worst.witness,
            patterns,
        });
    }
    Ok(reports)
}

/// Isometry residual per dimension over `n_pairs` stratified pairs.
pub fn check_isometry(kernel: &HierarchicalKernel, n_pairs: usize, seed: u64) -> Result<Vec<CheckReport>, VerifyError> {
    pair_check(kernel, "isometry", METRIC_TOLERANCE, n_pairs, seed, |i, x, y| {
        isometry_residual(kernel, i, x, y)
    })
}

/// Symmetry, non-negativity and zero self-distance, which must hold exactly.
pub fn check_axioms(kernel: &HierarchicalKernel, n_pairs: usize, seed: u64) -> Result<Vec<CheckReport>, VerifyError> {
    pair_check(kernel, "axioms", 0.0, n_pairs, seed, |i, x, y| {
        axiom_violation(kernel, i, x, y)
    })
}

/// Triangle inequality per dimension over `n_triples` stratified triples.
/// Each triple is tested with every side in the long position; the witness
/// is stored in the order that reproduces the reported violation through
/// [`triangle_violation`].
pub fn check_triangle(kernel: &HierarchicalKernel, n_triples: usize, seed: u64) -> Result<Vec<CheckReport>, VerifyError> {
    let space = kernel.space();
    let mut reports = Vec::with_capacity(space.len());
    for i in 0..space.len() {
        // Separate streams from the pair checks.
        let mut rng = crate::seeded_rng(seed, (1 << 32) + i as u64);
        let strat = Stratified::new(space, i, &mut rng);
        let mut worst = Worst::new();
        let mut patterns = BTreeMap::new();
        for k in 0..n_triples {
            let code = k % 8;
            let pts = [
                strat.draw(code & 4 != 0, &mut rng),
                strat.draw(code & 2 != 0, &mut rng),
                strat.draw(code & 1 != 0, &mut rng),
            ];
            *patterns
                .entry(pattern_key(&[pts[0].is_active(i), pts[1].is_active(i), pts[2].is_active(i)]))
                .or_insert(0) += 1;
            for [a, b, c] in [[0, 1, 2], [0, 2, 1], [1, 2, 0]] {
                let v = triangle_violation(kernel, i, &pts[a], &pts[b], &pts[c])?;
                worst.offer(v, || Witness::Triple {
                    x: space.to_raw(&pts[a]),
                    y: space.to_raw(&pts[b]),
                    z: space.to_raw(&pts[c]),
                });
            }
        }
        reports.push(CheckReport {
            check: "triangle".into(),
            dimension: Some(space.dimension(i).id.clone()),
            samples: n_triples,
            worst_violation: worst.value,
            tolerance: METRIC_TOLERANCE,
            pass: worst.value <= METRIC_TOLERANCE,
            witness: worst.witness,
            patterns,
        });
    }
    Ok(reports)
}

/// Random hierarchical space with `1..=max_dims` dimensions and at most
/// `max_depth` levels. Dimensions may have two governors (diamonds), and
/// allowed sets are random non-empty subsets.
pub fn random_space<R: Rng + ?Sized>(rng: &mut R, max_dims: usize, max_depth: usize) -> ParamSpace {
    use crate::space::{ConditionDescription, DimensionDescription, SpaceDescription};

    let n = rng.random_range(1..=max_dims.max(1));
    let mut dims = Vec::with_capacity(n);
    let mut conditions = Vec::new();
    // (index, level, category count) of categorical dims.
    let mut governors: Vec<(usize, usize, usize)> = Vec::new();
    let mut level = vec![1usize; n];
    for k in 0..n {
        let id = format!("d{k}");
        let eligible: Vec<(usize, usize, usize)> =
            governors.iter().copied().filter(|g| g.1 < max_depth).collect();
        if !eligible.is_empty() && rng.random_bool(0.7) {
            let first = eligible[rng.random_range(0..eligible.len())];
            let mut chosen = vec![first];
            if eligible.len() > 1 && rng.random_bool(0.25) {
                let second = eligible[rng.random_range(0..eligible.len())];
                if second.0 != first.0 {
                    chosen.push(second);
                }
            }
            for (g, g_level, m) in chosen {
                let mut allowed: Vec<String> =
                    (0..m).filter(|_| rng.random_bool(0.5)).map(|v| format!("v{v}")).collect();
                if allowed.is_empty() {
                    allowed.push(format!("v{}", rng.random_range(0..m)));
                }
                conditions.push(ConditionDescription {
                    target: id.clone(),
                    governor: format!("d{g}"),
                    allowed,
                });
                level[k] = level[k].max(g_level + 1);
            }
        }
        if rng.random_bool(0.5) {
            let m = rng.random_range(2..=5);
            dims.push(DimensionDescription::Categorical {
                id,
                values: (0..m).map(|v| format!("v{v}")).collect(),
            });
            governors.push((k, level[k], m));
        } else {
            let lower = rng.random_range(-10.0..10.0);
            let width = 10f64.powf(rng.random_range(-2.0..2.0));
            dims.push(DimensionDescription::Real {
                id,
                lower,
                upper: lower + width,
            });
        }
    }
    ParamSpace::validate_space(&SpaceDescription {
        dimensions: dims,
        conditions,
    })
    .expect("generated spaces are acyclic with categorical governors")
}

/// Recomputes a sampled report's violation from its witness.
pub fn reevaluate(kernel: &HierarchicalKernel, report: &CheckReport) -> Result<Option<f64>, VerifyError> {
    let space = kernel.space();
    let (Some(id), Some(witness)) = (&report.dimension, &report.witness) else {
        return Ok(None);
    };
    let i = space.index_of(id).map_err(KernelError::from)?;
    let parse = |raw: &RawConfig| space.validate_config(raw).map_err(KernelError::from);
    let value = match (report.check.as_str(), witness) {
        ("isometry", Witness::Pair { x, y }) => isometry_residual(kernel, i, &parse(x)?, &parse(y)?)?,
        ("axioms", Witness::Pair { x, y }) => axiom_violation(kernel, i, &parse(x)?, &parse(y)?)?,
        ("triangle", Witness::Triple { x, y, z }) => {
            triangle_violation(kernel, i, &parse(x)?, &parse(y)?, &parse(z)?)?
        }
        _ => return Ok(None),
    };
    Ok(Some(value))
}
