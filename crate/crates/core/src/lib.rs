//! Covariance functions over hierarchical parameter spaces.
//!
//! A parameter space mixes bounded real and categorical dimensions; some
//! dimensions are only *active* when categorical ancestors take particular
//! values. Each dimension gets a pseudometric that treats inactive values as
//! irrelevant, together with an embedding into Euclidean space that reproduces
//! that pseudometric exactly. Plugging the embedded distances into a standard
//! Euclidean covariance (exponentiated or rational quadratic) yields a
//! positive-semidefinite kernel on the whole space.
//!
//! Module map:
//!
//! - [`space`]: dimensions, activation conditions, configurations and sampling.
//! - [`metric`]: per-dimension pseudometrics, embeddings and hierarchy weights.
//! - [`kernel`]: base covariances, per-dimension and combined kernels, Gram matrices.
//! - [`gp`]: exact Gaussian-process regression and random-search tuning.
//! - [`verify`]: numerical checks for PSD, isometry and pseudometric axioms.
//! - [`io`]: file formats (space/config JSON, dataset and matrix CSV, manifests).
//!
//! ```
//! use archk::kernel::{BaseKernel, Combination, DimKernelSpec, HierarchicalKernel, KernelSpec};
//! use archk::space::ParamSpace;
//!
//! let space = ParamSpace::from_json(r#"{
//!     "dimensions": [
//!         {"id": "solver", "type": "categorical", "values": ["sgd", "adam"]},
//!         {"id": "momentum", "type": "real", "lower": 0.0, "upper": 1.0}
//!     ],
//!     "conditions": [{"target": "momentum", "governor": "solver", "allowed": ["sgd"]}]
//! }"#).unwrap();
//!
//! let spec = KernelSpec::shared(
//!     Combination::Product,
//!     DimKernelSpec::new(1.0, 0.5, BaseKernel::exponentiated_quadratic(1.0, 1.0)),
//! );
//! let kernel = HierarchicalKernel::new(&space, &spec).unwrap();
//!
//! let a = space.validate_config_json(r#"{"solver": "sgd", "momentum": 0.9}"#).unwrap();
//! let b = space.validate_config_json(r#"{"solver": "adam"}"#).unwrap();
//! let k = kernel.k_combined(&a, &b).unwrap();
//! assert!(k > 0.0 && k < 1.0);
//! ```

pub mod gp;
pub mod io;
pub mod kernel;
pub mod metric;
pub mod space;
pub mod verify;

mod linalg;

/// Seeded generator used everywhere randomness is needed.
///
/// ChaCha8 is counter-based and its output stream is fixed across platforms,
/// so every seed reproduces the same samples.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the generator for `seed`, optionally on a separate stream.
pub fn seeded_rng(seed: u64, stream: u64) -> SeededRng {
    use rand::SeedableRng;
    let mut rng = SeededRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
