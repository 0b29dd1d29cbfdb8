//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes and returns JSON strings; the plain functions behind
//! them are ordinary Rust and are tested natively.

use archk::kernel::{HierarchicalKernel, KernelSpec};
use archk::metric::{self, DimMetricParams, DimPoint};
use archk::space::{Bounds, ParamSpace, ValidConfig};
use archk::verify;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Curves {
    pub rho: Vec<f64>,
    pub real: Vec<f64>,
    pub categorical: Vec<f64>,
    pub omega: f64,
    pub rho_star_paper: f64,
    pub rho_star_crossover: f64,
}

/// Distance between two active values as `rho` sweeps `[0, 1]`: a real pair
/// `gap` (fraction of the range) apart, and two different categories out of
/// `m`. Inactive-vs-active pairs are always `omega` apart.
pub fn curves(omega: f64, gap: f64, m: usize, steps: usize) -> Result<Curves, String> {
    if !(0.0..=1.0).contains(&gap) {
        return Err(format!("gap must lie in [0, 1], got {gap}"));
    }
    let steps = steps.max(2);
    let bounds = Bounds { lower: 0.0, upper: 1.0 };
    let mut out = Curves {
        rho: Vec::with_capacity(steps),
        real: Vec::with_capacity(steps),
        categorical: Vec::with_capacity(steps),
        omega,
        rho_star_paper: metric::rho_star_paper(m).map_err(|e| e.to_string())?,
        rho_star_crossover: metric::rho_star_crossover(m).map_err(|e| e.to_string())?,
    };
    for k in 0..steps {
        let rho = k as f64 / (steps - 1) as f64;
        let p = DimMetricParams::new(1.0, rho, omega).map_err(|e| e.to_string())?;
        let real = metric::dist_real(p, bounds, DimPoint::active(0.0), DimPoint::active(gap)).map_err(|e| e.to_string())?;
        let cat = metric::dist_cat(p, m, DimPoint::active(0), DimPoint::active(1)).map_err(|e| e.to_string())?;
        out.rho.push(rho);
        out.real.push(real);
        out.categorical.push(cat);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct Arc {
    pub points: Vec<[f64; 2]>,
    pub inactive: [f64; 2],
}

/// Image of a real dimension under its embedding for `x` across the range.
pub fn real_arc(rho: f64, omega: f64, steps: usize) -> Result<Arc, String> {
    let p = DimMetricParams::new(1.0, rho, omega).map_err(|e| e.to_string())?;
    let bounds = Bounds { lower: 0.0, upper: 1.0 };
    let steps = steps.max(2);
    let embed = |point| metric::embed_real(p, bounds, point).map(|e| [e.0[0], e.0[1]]);
    let points = (0..steps)
        .map(|k| embed(DimPoint::active(k as f64 / (steps - 1) as f64)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let inactive = embed(DimPoint::inactive()).map_err(|e| e.to_string())?;
    Ok(Arc { points, inactive })
}

#[derive(Debug, Serialize)]
pub struct Heatmap {
    pub n: usize,
    pub matrix: Vec<Vec<f64>>,
    pub configs: Vec<archk::space::RawConfig>,
    pub lambda_min: f64,
    pub pass: bool,
}

/// Gram matrix of `n` configs sampled with `seed`, with its smallest
/// eigenvalue.
pub fn heatmap(space_json: &str, spec_json: &str, n: usize, seed: u64) -> Result<Heatmap, String> {
    let space = ParamSpace::from_json(space_json).map_err(|e| e.to_string())?;
    let spec = KernelSpec::from_json(spec_json).map_err(|e| e.to_string())?;
    let kernel = HierarchicalKernel::new(&space, &spec).map_err(|e| e.to_string())?;
    if n == 0 {
        return Err("n must be at least 1".into());
    }
    let mut rng = archk::seeded_rng(seed, 0);
    let sampler = space.sampler();
    let configs: Vec<ValidConfig> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    let gram = kernel.gram(&configs).map_err(|e| e.to_string())?.entries;
    let report = verify::check_psd(&gram, verify::PSD_TOLERANCE).map_err(|e| e.to_string())?;
    Ok(Heatmap {
        n,
        matrix: gram.row_iter().map(|r| r.iter().copied().collect()).collect(),
        configs: configs.iter().map(|c| space.to_raw(c)).collect(),
        lambda_min: -report.worst_violation,
        pass: report.pass,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = distanceCurves)]
pub fn distance_curves(omega: f64, gap: f64, m: usize, steps: usize) -> Result<String, JsValue> {
    to_js(curves(omega, gap, m, steps))
}

#[wasm_bindgen(js_name = realEmbedding)]
pub fn real_embedding(rho: f64, omega: f64, steps: usize) -> Result<String, JsValue> {
    to_js(real_arc(rho, omega, steps))
}

#[wasm_bindgen(js_name = gramHeatmap)]
pub fn gram_heatmap(space_json: &str, spec_json: &str, n: usize, seed: u64) -> Result<String, JsValue> {
    to_js(heatmap(space_json, spec_json, n, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPACE: &str = r#"{
        "dimensions": [
            {"id": "solver", "type": "categorical", "values": ["sgd", "adam"]},
            {"id": "momentum", "type": "real", "lower": 0, "upper": 1}
        ],
        "conditions": [{"target": "momentum", "governor": "solver", "allowed": ["sgd"]}]
    }"#;
    const SPEC: &str = r#"{"combination": "sum", "default": {"gamma": 0.5, "rho": 0.5,
        "kernel": {"type": "exponentiated_quadratic", "sigma": 1.0, "length_scale": 1.0}}}"#;

    #[test]
    fn real_curve_crosses_omega_at_one_third() {
        let c = curves(1.0, 1.0, 2, 301).unwrap();
        assert_eq!(c.real[0], 0.0);
        assert!((c.real[100] - 1.0).abs() < 1e-12);
        assert!(c.real[99] < 1.0 && c.real[101] > 1.0);
    }

    #[test]
    fn categorical_curve_reaches_omega_at_crossover() {
        let c = curves(1.0, 0.5, 3, 5).unwrap();
        // rho = 0.75 is the m = 3 crossover
        assert!((c.categorical[3] - 1.0).abs() < 1e-12);
        assert!((c.rho_star_crossover - 0.75).abs() < 1e-15);
        assert!(curves(1.0, 1.5, 3, 5).is_err());
        assert!(curves(1.0, 0.5, 1, 5).is_err());
    }

    #[test]
    fn arc_stays_on_the_circle() {
        let a = real_arc(0.5, 0.8, 20).unwrap();
        for [x, y] in &a.points {
            assert!((x.hypot(*y) - 0.8).abs() < 1e-15);
        }
        assert_eq!(a.points[0], [0.0, 0.8]);
        assert_eq!(a.inactive, [0.0, 0.0]);
    }

    #[test]
    fn heatmap_is_symmetric_and_psd() {
        let h = heatmap(SPACE, SPEC, 12, 3).unwrap();
        assert_eq!(h.matrix.len(), 12);
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(h.matrix[i][j], h.matrix[j][i]);
            }
        }
        assert!(h.pass);
        assert_eq!(h.configs.len(), 12);
        assert!(heatmap(SPACE, SPEC, 0, 3).is_err());
        assert!(heatmap("{}", SPEC, 3, 3).is_err());
    }
}
