#![allow(dead_code)]

use archk::kernel::{BaseKernel, Combination, DimKernelSpec, HierarchicalKernel, KernelSpec};
use archk::space::ParamSpace;
use nalgebra::DMatrix;
use rand::Rng;

/// Cyclic Jacobi eigenvalue iteration; independent of the library's
/// eigen-solver.
pub fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[(i, i)]).collect()
}

/// Log marginal likelihood through an explicit inverse and determinant.
pub fn dense_lml(cov: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = y.len();
    let y = nalgebra::DVector::from_column_slice(y);
    let inv = cov.clone().try_inverse().expect("invertible");
    let det = cov.clone().lu().determinant();
    -0.5 * (y.transpose() * inv * &y)[(0, 0)] - 0.5 * det.ln() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

pub fn three_level_space() -> ParamSpace {
    ParamSpace::from_json(
        r#"{
            "dimensions": [
                {"id": "model", "type": "categorical", "values": ["linear", "tree", "net"]},
                {"id": "l2", "type": "real", "lower": -6, "upper": 0},
                {"id": "depth", "type": "real", "lower": 1, "upper": 12},
                {"id": "act", "type": "categorical", "values": ["relu", "tanh", "gelu"]},
                {"id": "leak", "type": "real", "lower": 0, "upper": 0.3},
                {"id": "opt", "type": "categorical", "values": ["sgd", "adam"]}
            ],
            "conditions": [
                {"target": "depth", "governor": "model", "allowed": ["tree", "net"]},
                {"target": "act", "governor": "model", "allowed": ["net"]},
                {"target": "leak", "governor": "act", "allowed": ["relu"]},
                {"target": "opt", "governor": "model", "allowed": ["linear", "net"]}
            ]
        }"#,
    )
    .unwrap()
}

pub fn random_kernel<R: Rng + ?Sized>(
    space: &ParamSpace,
    combination: Combination,
    rational: bool,
    rng: &mut R,
) -> HierarchicalKernel {
    let dims = space
        .dimensions()
        .iter()
        .map(|d| {
            let sigma = rng.random_range(0.3..2.0);
            let length = 10f64.powf(rng.random_range(-1.0..0.7));
            let base = if rational {
                BaseKernel::rational_quadratic(sigma, length, rng.random_range(0.2..5.0))
            } else {
                BaseKernel::exponentiated_quadratic(sigma, length)
            };
            (
                d.id.clone(),
                DimKernelSpec::new(rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0), base),
            )
        })
        .collect();
    HierarchicalKernel::new(
        space,
        &KernelSpec {
            combination,
            default: None,
            dimensions: dims,
        },
    )
    .unwrap()
}
