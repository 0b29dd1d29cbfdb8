use rand::seq::SliceRandom;
use rand::Rng;

use super::{Config, Domain, ParamSpace, ValidConfig, Value};

/// Constraints for conditioned sampling: `Some(mask)` at index `i` means
/// dimension `i` must be active and take a category whose flag is set.
///
/// Requirement sets are closed under governors: whenever a dimension is
/// required, so are the governor values that activate it.
#[derive(Debug, Clone, PartialEq)]
pub struct Requirements(Vec<Option<Vec<bool>>>);

impl Requirements {
    pub fn none(space: &ParamSpace) -> Self {
        Self(vec![None; space.len()])
    }

    pub fn mask(&self, i: usize) -> Option<&[bool]> {
        self.0[i].as_deref()
    }

    /// Intersects the allowed set of `i` with `allowed`; false if empty.
    fn restrict(&mut self, space: &ParamSpace, i: usize, allowed: &[bool]) -> bool {
        let m = space.dims[i].domain.category_count().unwrap_or(0);
        let slot = self.0[i].get_or_insert_with(|| vec![true; m]);
        for (s, a) in slot.iter_mut().zip(allowed) {
            *s &= *a;
        }
        slot.iter().any(|&s| s)
    }

    /// Adds what is needed for `i` to be active.
    fn require_active(&mut self, space: &ParamSpace, i: usize) -> bool {
        for c in &space.clauses[i] {
            if !self.restrict(space, c.governor, &c.allowed) {
                return false;
            }
            if !self.require_active(space, c.governor) {
                return false;
            }
        }
        true
    }

    /// Adds what is needed for `i` to be inactive, choosing among the ways
    /// to break one of its clauses at random.
    fn require_inactive<R: Rng + ?Sized>(&mut self, space: &ParamSpace, i: usize, rng: &mut R) -> bool {
        let mut routes: Vec<(usize, bool)> = space.clauses[i]
            .iter()
            .enumerate()
            .flat_map(|(k, _)| [(k, true), (k, false)])
            .collect();
        routes.shuffle(rng);
        for (k, disallowed_value) in routes {
            let clause = &space.clauses[i][k];
            let g = clause.governor;
            let mut attempt = self.clone();
            let ok = if disallowed_value {
                // Governor active with a value outside the allowed set.
                let complement: Vec<bool> = clause.allowed.iter().map(|a| !a).collect();
                attempt.restrict(space, g, &complement) && attempt.require_active(space, g)
            } else {
                // Governor inactive; impossible if already required active.
                attempt.0[g].is_none() && attempt.require_inactive(space, g, rng)
            };
            if ok {
                *self = attempt;
                return true;
            }
        }
        false
    }
}

/// Samples configurations in canonical order: roots unconditionally,
/// conditional dimensions only when active. Reals are uniform on their
/// bounds, categories uniform over their values.
#[derive(Debug, Clone, Copy)]
pub struct Sampler<'a> {
    space: &'a ParamSpace,
    endpoint_prob: f64,
}

impl<'a> Sampler<'a> {
    pub fn new(space: &'a ParamSpace) -> Self {
        Self {
            space,
            endpoint_prob: 0.0,
        }
    }

    /// Probability of snapping a real value to each bound. Used by the
    /// verification oracles to exercise extreme distances.
    pub fn with_endpoint_prob(mut self, p: f64) -> Self {
        self.endpoint_prob = p.clamp(0.0, 0.5);
        self
    }

    pub fn sample_seeded(&self, seed: u64) -> ValidConfig {
        self.sample(&mut crate::seeded_rng(seed, 0))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ValidConfig {
        self.sample_with(&Requirements::none(self.space), rng)
    }

    /// Samples subject to `req`; every required dimension ends up active.
    pub fn sample_with<R: Rng + ?Sized>(&self, req: &Requirements, rng: &mut R) -> ValidConfig {
        let space = self.space;
        let mut config = Config::empty(space);
        let mut active = vec![false; space.len()];
        for i in 0..space.len() {
            active[i] = space.clauses[i].iter().all(|c| {
                active[c.governor]
                    && matches!(config.get(c.governor), Some(Value::Category(k)) if c.allowed[k])
            });
            if !active[i] {
                continue;
            }
            let value = match &space.dims[i].domain {
                Domain::Real(b) => {
                    let u: f64 = rng.random();
                    let x = if u < self.endpoint_prob {
                        b.lower
                    } else if u < 2.0 * self.endpoint_prob {
                        b.upper
                    } else {
                        b.lower + b.width() * rng.random::<f64>()
                    };
                    Value::Real(x.clamp(b.lower, b.upper))
                }
                Domain::Categorical(values) => {
                    let choices: Vec<usize> = match req.mask(i) {
                        Some(mask) => (0..values.len()).filter(|&k| mask[k]).collect(),
                        None => (0..values.len()).collect(),
                    };
                    Value::Category(choices[rng.random_range(0..choices.len())])
                }
            };
            config.set(i, Some(value));
        }
        ValidConfig {
            values: config.values,
            active,
        }
    }

    /// Requirements that force dimension `i` to the given activity, or
    /// `None` when that activity is unreachable (e.g. an inactive root).
    pub fn requirements_for<R: Rng + ?Sized>(&self, i: usize, active: bool, rng: &mut R) -> Option<Requirements> {
        let mut req = Requirements::none(self.space);
        let ok = if active {
            req.require_active(self.space, i)
        } else {
            req.require_inactive(self.space, i, rng)
        };
        ok.then_some(req)
    }

    /// Samples a config in which dimension `i` has the requested activity.
    pub fn sample_with_activity<R: Rng + ?Sized>(&self, i: usize, active: bool, rng: &mut R) -> Option<ValidConfig> {
        let req = self.requirements_for(i, active, rng)?;
        let config = self.sample_with(&req, rng);
        (config.is_active(i) == active).then_some(config)
    }
}
