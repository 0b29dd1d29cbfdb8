//! Hierarchical parameter spaces.
//!
//! A [`ParamSpace`] is a list of dimensions plus activation conditions. Each
//! condition says "`target` is active only if `governor` is active and takes one
//! of the `allowed` values". Conditions induce a DAG (governor → target); a
//! target with several conditions needs all of them to hold. Dimensions with
//! no conditions are roots and are always active.
//!
//! Dimensions are stored in a canonical topological order fixed at
//! validation time: Kahn's algorithm, breaking ties by declaration order.
//! Dimension indices used throughout the crate refer to that order.

mod sample;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sample::{Requirements, Sampler};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("CycleDetected: conditions form a cycle through {0:?}")]
    CycleDetected(Vec<String>),
    #[error("GovernorNotCategorical: `{governor}` governs `{target}` but is not categorical")]
    GovernorNotCategorical { governor: String, target: String },
    #[error("ClauseValueOutsideDomain: `{value}` is not a value of governor `{governor}`")]
    ClauseValueOutsideDomain { governor: String, value: String },
    #[error("EmptyAllowedSet: condition on `{target}` by `{governor}` allows no values")]
    EmptyAllowedSet { target: String, governor: String },
    #[error("DuplicateDimensionId: `{0}`")]
    DuplicateDimensionId(String),
    #[error("EmptyBounds: `{id}` has lower {lower} >= upper {upper}")]
    EmptyBounds { id: String, lower: f64, upper: f64 },
    #[error("NonFiniteBounds: `{id}` has non-finite bounds")]
    NonFiniteBounds { id: String },
    #[error("TooFewCategories: `{id}` has {count} values, at least 2 required")]
    TooFewCategories { id: String, count: usize },
    #[error("DuplicateCategory: `{id}` lists `{value}` more than once")]
    DuplicateCategory { id: String, value: String },
    #[error("UnknownDimension: `{0}`")]
    UnknownDimension(String),
    #[error("UndecidableActivity: activity of `{target}` needs a value for active governor `{governor}`")]
    UndecidableActivity { target: String, governor: String },
    #[error("MissingActiveValue: `{0}` is active but unassigned")]
    MissingActiveValue(String),
    #[error("ValueOutOfBounds: `{id}` = {value} outside [{lower}, {upper}]")]
    ValueOutOfBounds { id: String, value: f64, lower: f64, upper: f64 },
    #[error("UnknownCategory: `{value}` is not a value of `{id}`")]
    UnknownCategory { id: String, value: String },
    #[error("TypeMismatch: `{id}` expects a {expected} value")]
    TypeMismatch { id: String, expected: &'static str },
    #[error("invalid space description: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Real(Bounds),
    Categorical(Vec<String>),
}

impl Domain {
    pub fn is_categorical(&self) -> bool {
        matches!(self, Domain::Categorical(_))
    }

    /// Number of categories, `None` for real dimensions.
    pub fn category_count(&self) -> Option<usize> {
        match self {
            Domain::Categorical(values) => Some(values.len()),
            Domain::Real(_) => None,
        }
    }

    pub fn category_index(&self, symbol: &str) -> Option<usize> {
        match self {
            Domain::Categorical(values) => values.iter().position(|v| v == symbol),
            Domain::Real(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dimension {
    pub id: String,
    pub domain: Domain,
}

/// A validated activation condition, stored on its target.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub governor: usize,
    /// One flag per governor category.
    pub allowed: Vec<bool>,
}

/// A value for one dimension. Categories are stored by index into the
/// dimension's value list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Real(f64),
    Category(usize),
}

/// A possibly partial, type-checked assignment of values to dimensions.
///
/// Produced by [`ParamSpace::resolve`]; activity and bounds are not checked
/// yet, see [`ParamSpace::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: Vec<Option<Value>>,
}

impl Config {
    pub fn empty(space: &ParamSpace) -> Self {
        Self {
            values: vec![None; space.len()],
        }
    }

    pub fn get(&self, i: usize) -> Option<Value> {
        self.values.get(i).copied().flatten()
    }

    pub fn set(&mut self, i: usize, value: Option<Value>) {
        self.values[i] = value;
    }

    pub fn values(&self) -> &[Option<Value>] {
        &self.values
    }
}

/// A configuration that passed [`ParamSpace::validate`]: every active
/// dimension carries an in-domain value.
///
/// Values assigned to inactive dimensions are kept but never read by the
/// metric or kernel code.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidConfig {
    values: Vec<Option<Value>>,
    active: Vec<bool>,
}

impl ValidConfig {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize) -> Option<Value> {
        self.values[i]
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    pub fn activity(&self) -> &[bool] {
        &self.active
    }

    /// Dimensions carrying a value while inactive.
    pub fn inert(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.values.len()).filter(|&i| !self.active[i] && self.values[i].is_some())
    }

    pub fn real(&self, i: usize) -> Option<f64> {
        match self.values[i] {
            Some(Value::Real(x)) => Some(x),
            _ => None,
        }
    }

    pub fn category(&self, i: usize) -> Option<usize> {
        match self.values[i] {
            Some(Value::Category(c)) => Some(c),
            _ => None,
        }
    }

    pub fn as_config(&self) -> Config {
        Config {
            values: self.values.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// File-level description

/// JSON form of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDescription {
    pub dimensions: Vec<DimensionDescription>,
    #[serde(default)]
    pub conditions: Vec<ConditionDescription>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DimensionDescription {
    Real { id: String, lower: f64, upper: f64 },
    Categorical { id: String, values: Vec<String> },
}

impl DimensionDescription {
    pub fn id(&self) -> &str {
        match self {
            DimensionDescription::Real { id, .. } | DimensionDescription::Categorical { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionDescription {
    pub target: String,
    pub governor: String,
    pub allowed: Vec<String>,
}

/// A value as written in a config file: numbers for real dimensions,
/// strings for categorical ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Number(f64),
    Symbol(String),
}

impl fmt::Display for RawValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawValue::Number(x) => write!(f, "{x}"),
            RawValue::Symbol(s) => f.write_str(s),
        }
    }
}

/// Config file contents: dimension id → value.
pub type RawConfig = BTreeMap<String, RawValue>;

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    dims: Vec<Dimension>,
    clauses: Vec<Vec<Clause>>,
    ancestors: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

impl ParamSpace {
    pub fn from_json(text: &str) -> Result<Self, SpaceError> {
        let desc: SpaceDescription =
            serde_json::from_str(text).map_err(|e| SpaceError::Parse(e.to_string()))?;
        Self::validate_space(&desc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.describe()).expect("space description serializes")
    }

    /// Checks a raw description and fixes the canonical dimension order.
    pub fn validate_space(desc: &SpaceDescription) -> Result<Self, SpaceError> {
        let mut declared: HashMap<&str, usize> = HashMap::new();
        for (pos, d) in desc.dimensions.iter().enumerate() {
            if declared.insert(d.id(), pos).is_some() {
                return Err(SpaceError::DuplicateDimensionId(d.id().to_string()));
            }
            match d {
                DimensionDescription::Real { id, lower, upper } => {
                    if !lower.is_finite() || !upper.is_finite() {
                        return Err(SpaceError::NonFiniteBounds { id: id.clone() });
                    }
                    if lower >= upper {
                        return Err(SpaceError::EmptyBounds {
                            id: id.clone(),
                            lower: *lower,
                            upper: *upper,
                        });
                    }
                }
                DimensionDescription::Categorical { id, values } => {
                    if values.len() < 2 {
                        return Err(SpaceError::TooFewCategories {
                            id: id.clone(),
                            count: values.len(),
                        });
                    }
                    for (k, v) in values.iter().enumerate() {
                        if values[..k].contains(v) {
                            return Err(SpaceError::DuplicateCategory {
                                id: id.clone(),
                                value: v.clone(),
                            });
                        }
                    }
                }
            }
        }

        // Clauses in declaration-index space.
        let n = desc.dimensions.len();
        let mut raw_clauses: Vec<Vec<(usize, Vec<bool>)>> = vec![Vec::new(); n];
        for c in &desc.conditions {
            let target = *declared
                .get(c.target.as_str())
                .ok_or_else(|| SpaceError::UnknownDimension(c.target.clone()))?;
            let governor = *declared
                .get(c.governor.as_str())
                .ok_or_else(|| SpaceError::UnknownDimension(c.governor.clone()))?;
            let values = match &desc.dimensions[governor] {
                DimensionDescription::Categorical { values, .. } => values,
                DimensionDescription::Real { .. } => {
                    return Err(SpaceError::GovernorNotCategorical {
                        governor: c.governor.clone(),
                        target: c.target.clone(),
                    })
                }
            };
            if c.allowed.is_empty() {
                return Err(SpaceError::EmptyAllowedSet {
                    target: c.target.clone(),
                    governor: c.governor.clone(),
                });
            }
            let mut allowed = vec![false; values.len()];
            for v in &c.allowed {
                let k = values.iter().position(|x| x == v).ok_or_else(|| {
                    SpaceError::ClauseValueOutsideDomain {
                        governor: c.governor.clone(),
                        value: v.clone(),
                    }
                })?;
                allowed[k] = true;
            }
            raw_clauses[target].push((governor, allowed));
        }

        let order = topological_order(n, &raw_clauses).map_err(|stuck| {
            SpaceError::CycleDetected(
                stuck
                    .into_iter()
                    .map(|k| desc.dimensions[k].id().to_string())
                    .collect(),
            )
        })?;
        let mut position = vec![0usize; n];
        for (canonical, &declared_pos) in order.iter().enumerate() {
            position[declared_pos] = canonical;
        }

        let dims: Vec<Dimension> = order
            .iter()
            .map(|&k| match &desc.dimensions[k] {
                DimensionDescription::Real { id, lower, upper } => Dimension {
                    id: id.clone(),
                    domain: Domain::Real(Bounds {
                        lower: *lower,
                        upper: *upper,
                    }),
                },
                DimensionDescription::Categorical { id, values } => Dimension {
                    id: id.clone(),
                    domain: Domain::Categorical(values.clone()),
                },
            })
            .collect();
        let clauses: Vec<Vec<Clause>> = order
            .iter()
            .map(|&k| {
                raw_clauses[k]
                    .iter()
                    .map(|(g, allowed)| Clause {
                        governor: position[*g],
                        allowed: allowed.clone(),
                    })
                    .collect()
            })
            .collect();

        // Governors precede targets, so one pass in canonical order suffices.
        let mut ancestors: Vec<Vec<usize>> = Vec::with_capacity(n);
        for cs in clauses.iter().take(n) {
            let mut anc = Vec::new();
            for c in cs {
                anc.push(c.governor);
                anc.extend_from_slice(&ancestors[c.governor]);
            }
            anc.sort_unstable();
            anc.dedup();
            ancestors.push(anc);
        }

        let index = dims
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), i))
            .collect();
        Ok(Self {
            dims,
            clauses,
            ancestors,
            index,
        })
    }

    /// Inverse of [`ParamSpace::validate_space`], in canonical order.
    pub fn describe(&self) -> SpaceDescription {
        let dimensions = self
            .dims
            .iter()
            .map(|d| match &d.domain {
                Domain::Real(b) => DimensionDescription::Real {
                    id: d.id.clone(),
                    lower: b.lower,
                    upper: b.upper,
                },
                Domain::Categorical(values) => DimensionDescription::Categorical {
                    id: d.id.clone(),
                    values: values.clone(),
                },
            })
            .collect();
        let mut conditions = Vec::new();
        for (i, clauses) in self.clauses.iter().enumerate() {
            for c in clauses {
                let gov = &self.dims[c.governor];
                let values = match &gov.domain {
                    Domain::Categorical(v) => v,
                    Domain::Real(_) => unreachable!("governors are categorical"),
                };
                conditions.push(ConditionDescription {
                    target: self.dims[i].id.clone(),
                    governor: gov.id.clone(),
                    allowed: values
                        .iter()
                        .zip(&c.allowed)
                        .filter(|(_, &ok)| ok)
                        .map(|(v, _)| v.clone())
                        .collect(),
                });
            }
        }
        SpaceDescription {
            dimensions,
            conditions,
        }
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn dimension(&self, i: usize) -> &Dimension {
        &self.dims[i]
    }

    pub fn clauses(&self, i: usize) -> &[Clause] {
        &self.clauses[i]
    }

    pub fn index_of(&self, id: &str) -> Result<usize, SpaceError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| SpaceError::UnknownDimension(id.to_string()))
    }

    pub fn is_root(&self, i: usize) -> bool {
        self.clauses[i].is_empty()
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.is_root(i))
    }

    /// Ancestor indices of `i`, sorted ascending (which is also topological).
    pub fn ancestor_indices(&self, i: usize) -> &[usize] {
        &self.ancestors[i]
    }

    /// Transitive closure of the governors of `id`.
    pub fn ancestors(&self, id: &str) -> Result<Vec<&str>, SpaceError> {
        let i = self.index_of(id)?;
        Ok(self.ancestors[i]
            .iter()
            .map(|&a| self.dims[a].id.as_str())
            .collect())
    }

    /// Number of vertices on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut level = vec![1usize; self.len()];
        for i in 0..self.len() {
            for c in &self.clauses[i] {
                level[i] = level[i].max(level[c.governor] + 1);
            }
        }
        level.into_iter().max().unwrap_or(0)
    }

    // -----------------------------------------------------------------------
    // Activity

    /// Whether dimension `id` is active under `config`.
    ///
    /// A clause that is definitely false makes the dimension inactive even if
    /// another clause cannot be decided.
    pub fn is_active(&self, config: &Config, id: &str) -> Result<bool, SpaceError> {
        let i = self.index_of(id)?;
        self.activity_with(i, &mut |g| config.get(g))
    }

    /// Activity of `i`, reading values only through `lookup`.
    ///
    /// `lookup` is only ever called with ancestors of `i`.
    pub fn activity_with<F>(&self, i: usize, lookup: &mut F) -> Result<bool, SpaceError>
    where
        F: FnMut(usize) -> Option<Value>,
    {
        let mut pending = None;
        for c in &self.clauses[i] {
            let holds = match self.activity_with(c.governor, lookup) {
                Ok(false) => Ok(false),
                Ok(true) => match lookup(c.governor) {
                    Some(Value::Category(k)) => Ok(c.allowed.get(k).copied().unwrap_or(false)),
                    Some(Value::Real(_)) => Err(SpaceError::TypeMismatch {
                        id: self.dims[c.governor].id.clone(),
                        expected: "categorical",
                    }),
                    None => Err(SpaceError::UndecidableActivity {
                        target: self.dims[i].id.clone(),
                        governor: self.dims[c.governor].id.clone(),
                    }),
                },
                Err(e) => Err(e),
            };
            match holds {
                Ok(false) => return Ok(false),
                Ok(true) => {}
                Err(e) => {
                    pending.get_or_insert(e);
                }
            }
        }
        pending.map_or(Ok(true), Err)
    }

    /// Activity of every dimension, or the first undecidable one.
    pub fn activity(&self, config: &Config) -> Result<Vec<bool>, SpaceError> {
        let mut active = vec![false; self.len()];
        for i in 0..self.len() {
            active[i] = self.clause_activity(i, &active, config)?;
        }
        Ok(active)
    }

    fn clause_activity(&self, i: usize, active: &[bool], config: &Config) -> Result<bool, SpaceError> {
        let mut pending = None;
        for c in &self.clauses[i] {
            if !active[c.governor] {
                return Ok(false);
            }
            match config.get(c.governor) {
                Some(Value::Category(k)) => {
                    if !c.allowed[k] {
                        return Ok(false);
                    }
                }
                _ => {
                    pending.get_or_insert(SpaceError::UndecidableActivity {
                        target: self.dims[i].id.clone(),
                        governor: self.dims[c.governor].id.clone(),
                    });
                }
            }
        }
        pending.map_or(Ok(true), Err)
    }

    // -----------------------------------------------------------------------
    // Configurations

    /// Resolves ids and types of a raw config. Bounds and activity are
    /// checked by [`ParamSpace::validate`].
    pub fn resolve(&self, raw: &RawConfig) -> Result<Config, SpaceError> {
        let mut config = Config::empty(self);
        for (id, raw_value) in raw {
            let i = self.index_of(id)?;
            let value = match (&self.dims[i].domain, raw_value) {
                (Domain::Real(_), RawValue::Number(x)) => Value::Real(*x),
                (Domain::Real(_), RawValue::Symbol(_)) => {
                    return Err(SpaceError::TypeMismatch {
                        id: id.clone(),
                        expected: "real",
                    })
                }
                (Domain::Categorical(values), RawValue::Symbol(s)) => Value::Category(
                    values.iter().position(|v| v == s).ok_or_else(|| {
                        SpaceError::UnknownCategory {
                            id: id.clone(),
                            value: s.clone(),
                        }
                    })?,
                ),
                (Domain::Categorical(_), RawValue::Number(x)) => {
                    return Err(SpaceError::UnknownCategory {
                        id: id.clone(),
                        value: x.to_string(),
                    })
                }
            };
            config.values[i] = Some(value);
        }
        Ok(config)
    }

    /// Checks bounds and coverage of active dimensions.
    pub fn validate(&self, config: &Config) -> Result<ValidConfig, SpaceError> {
        if config.values.len() != self.len() {
            return Err(SpaceError::Parse(format!(
                "config has {} slots, space has {} dimensions",
                config.values.len(),
                self.len()
            )));
        }
        for (i, v) in config.values.iter().enumerate() {
            match (&self.dims[i].domain, v) {
                (Domain::Real(b), Some(Value::Real(x))) => {
                    if !b.contains(*x) {
                        return Err(SpaceError::ValueOutOfBounds {
                            id: self.dims[i].id.clone(),
                            value: *x,
                            lower: b.lower,
                            upper: b.upper,
                        });
                    }
                }
                (Domain::Categorical(values), Some(Value::Category(k))) => {
                    if *k >= values.len() {
                        return Err(SpaceError::UnknownCategory {
                            id: self.dims[i].id.clone(),
                            value: k.to_string(),
                        });
                    }
                }
                (Domain::Real(_), Some(Value::Category(_))) => {
                    return Err(SpaceError::TypeMismatch {
                        id: self.dims[i].id.clone(),
                        expected: "real",
                    })
                }
                (Domain::Categorical(_), Some(Value::Real(_))) => {
                    return Err(SpaceError::TypeMismatch {
                        id: self.dims[i].id.clone(),
                        expected: "categorical",
                    })
                }
                (_, None) => {}
            }
        }
        // In canonical order an unassigned active governor is reported before
        // any of its targets could become undecidable.
        let mut active = vec![false; self.len()];
        for i in 0..self.len() {
            active[i] = self.clause_activity(i, &active, config)?;
            if active[i] && config.values[i].is_none() {
                return Err(SpaceError::MissingActiveValue(self.dims[i].id.clone()));
            }
        }
        Ok(ValidConfig {
            values: config.values.clone(),
            active,
        })
    }

    pub fn validate_config(&self, raw: &RawConfig) -> Result<ValidConfig, SpaceError> {
        self.validate(&self.resolve(raw)?)
    }

    pub fn validate_config_json(&self, text: &str) -> Result<ValidConfig, SpaceError> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| SpaceError::Parse(e.to_string()))?;
        self.validate_config(&raw)
    }

    /// Raw form of a config, including inert assignments.
    pub fn to_raw(&self, config: &ValidConfig) -> RawConfig {
        self.raw_values(&config.values)
    }

    pub fn raw_values(&self, values: &[Option<Value>]) -> RawConfig {
        values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| {
                let raw = match (v.as_ref()?, &self.dims[i].domain) {
                    (Value::Real(x), _) => RawValue::Number(*x),
                    (Value::Category(k), Domain::Categorical(values)) => {
                        RawValue::Symbol(values[*k].clone())
                    }
                    (Value::Category(k), Domain::Real(_)) => RawValue::Number(*k as f64),
                };
                Some((self.dims[i].id.clone(), raw))
            })
            .collect()
    }

    /// Returns a copy of `config` with dimension `i` replaced, re-validated.
    pub fn with_value(
        &self,
        config: &ValidConfig,
        i: usize,
        value: Option<Value>,
    ) -> Result<ValidConfig, SpaceError> {
        let mut c = config.as_config();
        c.set(i, value);
        self.validate(&c)
    }

    pub fn sampler(&self) -> Sampler<'_> {
        Sampler::new(self)
    }

    /// Deterministic uniform sample, see [`Sampler`].
    pub fn sample_config(&self, seed: u64) -> ValidConfig {
        self.sampler().sample_seeded(seed)
    }
}

/// Kahn's algorithm with ties broken by lowest declaration index. On a cycle,
/// returns the dimensions that could not be ordered.
fn topological_order(n: usize, clauses: &[Vec<(usize, Vec<bool>)>]) -> Result<Vec<usize>, Vec<usize>> {
    let mut indegree = vec![0usize; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (target, cs) in clauses.iter().enumerate() {
        for (governor, _) in cs {
            indegree[target] += 1;
            children[*governor].push(target);
        }
    }
    let mut ready: std::collections::BTreeSet<usize> =
        (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(next) = ready.pop_first() {
        order.push(next);
        for &child in &children[next] {
            indegree[child] -= 1;
            if indegree[child] == 0 {
                ready.insert(child);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).filter(|&i| indegree[i] > 0).collect())
    }
}
