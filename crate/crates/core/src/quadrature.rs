//! Tensor-product composite Gauss–Legendre quadrature on `[-R, R]²`.
//!
//! Refinement doubles the panel count per axis until two successive
//! estimates agree to `target_tol` relative to the largest component.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psf::Scene;

/// Smallest half-width ever used.
pub const MIN_HALF_WIDTH: f64 = 8.0;
/// Margin in units of the widest beam radius `√(1+δz²)` beyond the
/// outermost source.
pub const TAIL_RADII: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureGrid {
    /// Fixed half-width; `None` sizes the box from the scenes.
    pub half_width: Option<f64>,
    pub target_tol: f64,
    /// Gauss–Legendre nodes per panel.
    pub order: usize,
    pub initial_panels: usize,
    pub max_panels: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self { half_width: None, target_tol: 1e-10, order: 20, initial_panels: 8, max_panels: 512 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult {
    pub values: Vec<f64>,
    /// `max |Q_2n − Q_n|` over components.
    pub error: f64,
    pub panels: usize,
    pub half_width: f64,
}

/// One-dimensional composite rule.
#[derive(Debug, Clone)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    pub fn composite(order: usize, panels: usize, half_width: f64) -> Self {
        let order = NonZeroUsize::new(order.max(1)).unwrap();
        let base = GaussLegendre::new(order);
        let width = 2.0 * half_width / panels as f64;
        let mut nodes = Vec::with_capacity(order.get() * panels);
        let mut weights = Vec::with_capacity(order.get() * panels);
        for p in 0..panels {
            let mid = -half_width + (p as f64 + 0.5) * width;
            for (x, w) in base.iter() {
                nodes.push(mid + 0.5 * width * x);
                weights.push(0.5 * width * w);
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl QuadratureGrid {
    pub fn with_tol(target_tol: f64) -> Self {
        Self { target_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_tol > 0.0) {
            return Err(Error::Config(format!("quadrature tolerance must be positive, got {}", self.target_tol)));
        }
        if self.order == 0 || self.initial_panels == 0 || self.max_panels < self.initial_panels {
            return Err(Error::Config("quadrature order and panel counts must be positive".into()));
        }
        if let Some(r) = self.half_width {
            if !(r > 0.0) {
                return Err(Error::Config(format!("half-width must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// Half-width covering every source of every scene with a margin of
    /// [`TAIL_RADII`] beam radii.
    pub fn half_width_for(&self, scenes: &[&Scene]) -> f64 {
        if let Some(r) = self.half_width {
            return r;
        }
        let mut r = MIN_HALF_WIDTH;
        for s in scenes {
            for p in s.sources() {
                let reach = p.dx.abs().max(p.dy.abs()) + TAIL_RADII * (1.0 + p.dz * p.dz).sqrt();
                r = r.max(reach);
            }
        }
        r
    }

    pub fn rule(&self, panels: usize, half_width: f64) -> Rule1D {
        Rule1D::composite(self.order, panels, half_width)
    }

    /// Integrates the `dim`-component integrand `f(x, y, out)` which must add
    /// its values into `out`.
    pub fn integrate<F>(&self, half_width: f64, dim: usize, f: F) -> Result<QuadResult>
    where
        F: Fn(f64, f64, &mut [f64]) + Sync,
    {
        self.validate()?;
        let mut panels = self.initial_panels;
        let mut prev = tensor_sum(&self.rule(panels, half_width), dim, &f);
        let mut estimate = f64::INFINITY;
        while panels * 2 <= self.max_panels {
            panels *= 2;
            let next = tensor_sum(&self.rule(panels, half_width), dim, &f);
            estimate = prev.iter().zip(&next).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            let scale = next.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if estimate <= self.target_tol * scale || estimate == 0.0 {
                log::debug!("quadrature converged: {panels} panels, half-width {half_width:.2}, error {estimate:.2e}");
                return Ok(QuadResult { values: next, error: estimate, panels, half_width });
            }
            prev = next;
        }
        Err(Error::QuadratureFailure { tol: self.target_tol, estimate })
    }
}

/// Σ_ij w_i w_j f(x_i, y_j), rows evaluated in parallel and reduced in order.
pub fn tensor_sum<F>(rule: &Rule1D, dim: usize, f: &F) -> Vec<f64>
where
    F: Fn(f64, f64, &mut [f64]) + Sync,
{
    let rows: Vec<Vec<f64>> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&x, &wx)| {
            let mut row = vec![0.0; dim];
            let mut point = vec![0.0; dim];
            for (&y, &wy) in rule.nodes.iter().zip(&rule.weights) {
                point.iter_mut().for_each(|v| *v = 0.0);
                f(x, y, &mut point);
                let w = wx * wy;
                for (r, p) in row.iter_mut().zip(&point) {
                    *r += w * p;
                }
            }
            row
        })
        .collect();
    let mut total = vec![0.0; dim];
    for row in rows {
        for (t, r) in total.iter_mut().zip(row) {
            *t += r;
        }
    }
    total
}
