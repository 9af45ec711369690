//! Direct imaging: the image-plane intensity `P(x, y) = (1/V) Σ_v |ψ_v|²`,
//! its Fisher information and the Chernoff exponent between two scenes.
//!
//! A single source contributes the Gaussian
//! `|ψ_v|² = exp(−((x+δx)² + (y+δy)²)/w) / (π w)` with `w = 1 + δz²`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::chernoff::{kernel_with_log, ChernoffResult};
use crate::error::Result;
use crate::linalg::RMatrix;
use crate::psf::{labels, ParamIndex, PointSource, Scene};
use crate::qfim::{reparametrize, FisherMatrix, Jacobian};
use crate::quadrature::QuadratureGrid;

/// Densities below this are skipped.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Below this `|a/b − 1|` the log-ratio is taken from the summed difference;
/// above it `ln(a/b)` is exact to rounding and `ln_1p` of a difference near
/// `−1` is not.
const LOG_RATIO_SWITCH: f64 = 0.5;

pub fn source_intensity(src: &PointSource, x: f64, y: f64) -> f64 {
    let w = 1.0 + src.dz * src.dz;
    let (xs, ys) = (x + src.dx, y + src.dy);
    (-(xs * xs + ys * ys) / w).exp() / (PI * w)
}

/// `∂|ψ_v|²/∂(δx, δy, δz)`.
pub fn source_intensity_grad(src: &PointSource, x: f64, y: f64) -> [f64; 3] {
    let w = 1.0 + src.dz * src.dz;
    let (xs, ys) = (x + src.dx, y + src.dy);
    let i = (-(xs * xs + ys * ys) / w).exp() / (PI * w);
    let r2 = xs * xs + ys * ys;
    [-2.0 * xs / w * i, -2.0 * ys / w * i, i * 2.0 * src.dz * (r2 / w - 1.0) / w]
}

pub fn intensity(scene: &Scene, x: f64, y: f64) -> f64 {
    scene.sources().iter().map(|s| source_intensity(s, x, y)).sum::<f64>() / scene.len() as f64
}

/// `ln |ψ_u|² − ln |ψ_v|²` without cancellation for nearby sources.
pub fn source_log_ratio(u: &PointSource, v: &PointSource, x: f64, y: f64) -> f64 {
    let wu = 1.0 + u.dz * u.dz;
    let wv = 1.0 + v.dz * v.dz;
    let (xu, yu) = (x + u.dx, y + u.dy);
    let ru2 = xu * xu + yu * yu;
    // r_v² − r_u² and w_u − w_v as products of differences
    let dr2 = (v.dx - u.dx) * (2.0 * x + u.dx + v.dx) + (v.dy - u.dy) * (2.0 * y + u.dy + v.dy);
    let dw = (u.dz - v.dz) * (u.dz + v.dz);
    (dr2 * wu + ru2 * dw) / (wu * wv) - (dw / wv).ln_1p()
}

/// Fisher information estimate with its quadrature error.
#[derive(Debug, Clone, PartialEq)]
pub struct DiFisher {
    pub fisher: FisherMatrix,
    /// Largest entry change on the last refinement.
    pub error: f64,
    pub panels: usize,
}

pub fn fim_di_estimate(
    scene: &Scene,
    params: &[ParamIndex],
    grid: &QuadratureGrid,
    jacobian: Option<&Jacobian>,
) -> Result<DiFisher> {
    scene.check_params(params)?;
    let m = params.len();
    let v = scene.len() as f64;
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a..m).map(move |b| (a, b))).collect();
    let r = grid.half_width_for(&[scene]);
    let res = grid.integrate(r, pairs.len(), |x, y, out| {
        let p = intensity(scene, x, y);
        if p < DENSITY_FLOOR {
            return;
        }
        let grads: Vec<[f64; 3]> = scene.sources().iter().map(|s| source_intensity_grad(s, x, y)).collect();
        let g: Vec<f64> = params.iter().map(|pa| grads[pa.source][pa.axis.index()] / v).collect();
        for (k, &(a, b)) in pairs.iter().enumerate() {
            out[k] += g[a] * g[b] / p;
        }
    })?;
    let mut f = RMatrix::zeros(m, m);
    for (k, &(a, b)) in pairs.iter().enumerate() {
        f[(a, b)] = res.values[k];
        f[(b, a)] = res.values[k];
    }
    let mut fisher = FisherMatrix::new(labels(params), f)?;
    if let Some(j) = jacobian {
        fisher = reparametrize(&fisher, j)?;
    }
    Ok(DiFisher { fisher, error: res.error, panels: res.panels })
}

/// Direct-imaging Fisher information per detected photon.
pub fn fim_di(
    scene: &Scene,
    params: &[ParamIndex],
    grid: &QuadratureGrid,
    jacobian: Option<&Jacobian>,
) -> Result<FisherMatrix> {
    fim_di_estimate(scene, params, grid, jacobian).map(|d| d.fisher)
}

/// Chernoff exponent between two intensity distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiChernoff {
    pub result: ChernoffResult,
    /// Change of the maximal gap `K` on the last refinement.
    pub error: f64,
    pub panels: usize,
}

/// Node values `(weight, a, b, ln(a/b))`.
fn chernoff_nodes(s0: &Scene, s1: &Scene, grid: &QuadratureGrid, panels: usize, r: f64) -> Vec<[f64; 4]> {
    let rule = grid.rule(panels, r);
    let paired = s0.len() == s1.len();
    let rows: Vec<Vec<[f64; 4]>> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&x, &wx)| {
            let mut row = Vec::with_capacity(rule.len());
            for (&y, &wy) in rule.nodes.iter().zip(&rule.weights) {
                let a = intensity(s0, x, y);
                let b = intensity(s1, x, y);
                if a < DENSITY_FLOOR && b < DENSITY_FLOOR {
                    continue;
                }
                let log_ratio = if a <= 0.0 || b <= 0.0 {
                    0.0
                } else if paired && (a / b - 1.0).abs() < LOG_RATIO_SWITCH {
                    // a − b from per-source differences, each relative to its own scale
                    let diff: f64 = s0
                        .sources()
                        .iter()
                        .zip(s1.sources())
                        .map(|(u, v)| source_intensity(v, x, y) * source_log_ratio(u, v, x, y).exp_m1())
                        .sum::<f64>()
                        / s0.len() as f64;
                    (diff / b).ln_1p()
                } else {
                    (a / b).ln()
                };
                row.push([wx * wy, a, b, log_ratio]);
            }
            row
        })
        .collect();
    rows.concat()
}

fn gap(nodes: &[[f64; 4]], s: f64) -> f64 {
    nodes.iter().map(|n| n[0] * kernel_with_log(n[1], n[2], n[3], s)).sum()
}

/// `ξ_DI = −ln min_s ∬ P₀^s P₁^{1−s}`; `s` is the exponent of `scene0`.
pub fn chernoff_di_estimate(scene0: &Scene, scene1: &Scene, grid: &QuadratureGrid) -> Result<DiChernoff> {
    grid.validate()?;
    let r = grid.half_width_for(&[scene0, scene1]);
    let mut panels = grid.initial_panels;
    let mut coarse = chernoff_nodes(scene0, scene1, grid, panels, r);
    let mut estimate = f64::INFINITY;
    while panels * 2 <= grid.max_panels {
        panels *= 2;
        let fine = chernoff_nodes(scene0, scene1, grid, panels, r);
        let result = ChernoffResult::from_objective(|s| gap(&fine, s));
        estimate = (result.gap - gap(&coarse, result.s_star)).abs();
        if estimate <= grid.target_tol * result.gap || estimate == 0.0 {
            log::debug!("chernoff quadrature converged: {panels} panels, error {estimate:.2e}");
            return Ok(DiChernoff { result, error: estimate, panels });
        }
        coarse = fine;
    }
    Err(crate::Error::QuadratureFailure { tol: grid.target_tol, estimate })
}

pub fn chernoff_di(scene0: &Scene, scene1: &Scene, grid: &QuadratureGrid) -> Result<(f64, f64)> {
    chernoff_di_estimate(scene0, scene1, grid).map(|c| (c.result.xi, c.result.s_star))
}

/// Total mass of the intensity, for normalization checks.
pub fn total_intensity(scene: &Scene, grid: &QuadratureGrid) -> Result<f64> {
    let r = grid.half_width_for(&[scene]);
    Ok(grid.integrate(r, 1, |x, y, out| out[0] += intensity(scene, x, y))?.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psf::Axis;

    #[test]
    fn peak_values() {
        let s = Scene::new(vec![PointSource::ORIGIN], 100.0).unwrap();
        assert!((intensity(&s, 0.0, 0.0) - 1.0 / PI).abs() < 1e-16);
        let dz = 0.8;
        let s = Scene::new(vec![PointSource::new(0.0, 0.0, dz)], 100.0).unwrap();
        assert!((intensity(&s, 0.0, 0.0) - 1.0 / (PI * (1.0 + dz * dz))).abs() < 1e-16);
    }

    #[test]
    fn normalized() {
        let s = Scene::new(vec![PointSource::new(1.5, -0.5, 2.0), PointSource::new(-2.0, 0.0, -0.3)], 100.0).unwrap();
        let mass = total_intensity(&s, &QuadratureGrid::default()).unwrap();
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn log_ratio_matches_direct() {
        let u = PointSource::new(0.3, -0.2, 0.7);
        let v = PointSource::new(-0.1, 0.4, 1.2);
        let (x, y) = (0.6, -1.1);
        let direct = (source_intensity(&u, x, y) / source_intensity(&v, x, y)).ln();
        assert!((source_log_ratio(&u, &v, x, y) - direct).abs() < 1e-13);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let src = PointSource::new(0.4, -0.7, 0.9);
        let (x, y) = (0.2, 0.5);
        let g = source_intensity_grad(&src, x, y);
        let h = 1e-5;
        for axis in Axis::ALL {
            let fd = (source_intensity(&src.shifted(axis, h), x, y) - source_intensity(&src.shifted(axis, -h), x, y))
                / (2.0 * h);
            assert!((fd - g[axis.index()]).abs() < 1e-9, "{axis:?}");
        }
    }

    #[test]
    fn isolated_source_transverse_information() {
        let s = Scene::new(vec![PointSource::ORIGIN], 100.0).unwrap();
        let f = fim_di(&s, &[ParamIndex::new(0, Axis::X)], &QuadratureGrid::default(), None).unwrap();
        assert!((f.matrix[(0, 0)] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn identical_scenes_have_zero_exponent() {
        let s = Scene::new(vec![PointSource::new(0.5, 0.0, 0.2)], 100.0).unwrap();
        let (xi, _) = chernoff_di(&s, &s, &QuadratureGrid::default()).unwrap();
        assert_eq!(xi, 0.0);
    }
}
