//! Gaussian point-spread-function overlaps and the block Gram matrix of an
//! incoherent point-source scene.
//!
//! Every source `v` emits the normalized image-plane Gaussian beam
//!
//! ```text
//! ψ_v(x, y) = π^{-1/2} · i/(δz_v + i) · exp(-i((x+δx_v)² + (y+δy_v)²)/(2(δz_v + i)) - i·kzr·δz_v)
//! ```
//!
//! with transverse coordinates in units of `√(z_R/k)` and axial ones in
//! units of the Rayleigh length. The overlap `⟨ψ_v|ψ_u⟩` depends only on the
//! displacement difference `Δ = p_v - p_u`:
//!
//! ```text
//! O(Δ) = 2/(2 + iΔz) · exp(i(Δx² + Δy²)/(2(Δz - 2i)) + i·kzr·Δz)
//! ```
//!
//! so all tangent overlaps are partial derivatives of `O` and are evaluated
//! from the log-derivatives `h_a = ∂_a ln O` and their Jacobian.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};

/// Sources closer than this in every coordinate are treated as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// Displacement of one emitter in normalized object coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSource {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl PointSource {
    pub const ORIGIN: PointSource = PointSource { dx: 0.0, dy: 0.0, dz: 0.0 };

    pub fn new(dx: f64, dy: f64, dz: f64) -> Self {
        Self { dx, dy, dz }
    }

    pub fn coord(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.dx,
            Axis::Y => self.dy,
            Axis::Z => self.dz,
        }
    }

    pub fn shifted(&self, axis: Axis, by: f64) -> Self {
        let mut out = *self;
        match axis {
            Axis::X => out.dx += by,
            Axis::Y => out.dy += by,
            Axis::Z => out.dz += by,
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite() && self.dz.is_finite()
    }

    fn coincides_with(&self, other: &PointSource) -> bool {
        (self.dx - other.dx).abs() < COINCIDENCE_TOL
            && (self.dy - other.dy).abs() < COINCIDENCE_TOL
            && (self.dz - other.dz).abs() < COINCIDENCE_TOL
    }
}

/// An incoherent ensemble of equal-intensity point sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    sources: Vec<PointSource>,
    kzr: f64,
}

impl Scene {
    pub fn new(sources: Vec<PointSource>, kzr: f64) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::InvalidScene("scene needs at least one source".into()));
        }
        if !(kzr.is_finite() && kzr > 0.0) {
            return Err(Error::InvalidScene(format!("kzr must be positive and finite, got {kzr}")));
        }
        if let Some(i) = sources.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidScene(format!("source {i} has a non-finite coordinate")));
        }
        Ok(Self { sources, kzr })
    }

    pub fn sources(&self) -> &[PointSource] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn kzr(&self) -> f64 {
        self.kzr
    }

    pub fn with_kzr(&self, kzr: f64) -> Result<Self> {
        Self::new(self.sources.clone(), kzr)
    }

    /// Every displacement parameter, source-major.
    pub fn all_params(&self) -> Vec<ParamIndex> {
        (0..self.len()).flat_map(|s| Axis::ALL.into_iter().map(move |axis| ParamIndex { source: s, axis })).collect()
    }

    /// First pair of coincident sources, if any.
    pub fn coincident_pair(&self) -> Option<(usize, usize)> {
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                if self.sources[i].coincides_with(&self.sources[j]) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn check_params(&self, params: &[ParamIndex]) -> Result<()> {
        match params.iter().find(|p| p.source >= self.len()) {
            Some(p) => Err(Error::InvalidScene(format!(
                "parameter {} refers to source {} of a {}-source scene",
                p.label(),
                p.source,
                self.len()
            ))),
            None => Ok(()),
        }
    }
}

/// One displacement parameter `θ_v^a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamIndex {
    pub source: usize,
    pub axis: Axis,
}

impl ParamIndex {
    pub fn new(source: usize, axis: Axis) -> Self {
        Self { source, axis }
    }

    /// `dx1`, `dz3`, ... with 1-based source numbering.
    pub fn label(&self) -> String {
        format!("d{}{}", self.axis.name(), self.source + 1)
    }

    /// Position of the tangent `|∂_a ψ_v⟩` inside the 3V tangent block.
    pub fn tangent_index(&self, n_sources: usize) -> usize {
        self.axis.index() * n_sources + self.source
    }
}

pub fn labels(params: &[ParamIndex]) -> Vec<String> {
    params.iter().map(ParamIndex::label).collect()
}

/// `O(Δ)`, its log-gradient and the Jacobian of the log-gradient.
#[derive(Debug, Clone, Copy)]
struct PairOverlap {
    value: Complex64,
    h: [Complex64; 3],
    dh: [[Complex64; 3]; 3],
}

impl PairOverlap {
    fn new(v: &PointSource, u: &PointSource, kzr: f64) -> Self {
        let (ddx, ddy, ddz) = (v.dx - u.dx, v.dy - u.dy, v.dz - u.dz);
        let s = ddx * ddx + ddy * ddy;
        let w = c(ddz, -2.0);
        let i = c(0.0, 1.0);
        // the gauge phase is a separate factor so it is bitwise constant
        // under transverse shifts
        let value = c(0.0, -2.0) / w * (i * s / (w * 2.0)).exp() * Complex64::cis(kzr * ddz);
        let w2 = w * w;
        let h = [i * ddx / w, i * ddy / w, -w.inv() - i * s / (w2 * 2.0) + i * kzr];
        let dxz = -i * ddx / w2;
        let dyz = -i * ddy / w2;
        let dh = [[i / w, c(0.0, 0.0), dxz], [c(0.0, 0.0), i / w, dyz], [dxz, dyz, w2.inv() + i * s / (w2 * w)]];
        Self { value, h, dh }
    }

    /// Log-derivative with the gauge term `i·kzr` removed.
    fn h_gauge_free(&self, axis: usize, kzr: f64) -> Complex64 {
        if axis == 2 {
            self.h[2] - c(0.0, kzr)
        } else {
            self.h[axis]
        }
    }
}

/// Image-plane amplitude `ψ_v(x, y)`.
pub fn field(src: &PointSource, x: f64, y: f64, kzr: f64) -> Complex64 {
    let q = c(src.dz, 1.0);
    let (xs, ys) = (x + src.dx, y + src.dy);
    let i = c(0.0, 1.0);
    let arg = -i * (xs * xs + ys * ys) / (q * 2.0);
    i / q * arg.exp() * Complex64::cis(-kzr * src.dz) * std::f64::consts::PI.sqrt().recip()
}

/// `⟨ψ_v|ψ_u⟩`.
pub fn overlap_psi_psi(v: &PointSource, u: &PointSource, kzr: f64) -> Complex64 {
    PairOverlap::new(v, u, kzr).value
}

/// `⟨∂_a ψ_v|ψ_u⟩`, the derivative taken with respect to source `v`'s displacement.
pub fn overlap_dpsi_psi(v: &PointSource, axis: Axis, u: &PointSource, kzr: f64) -> Complex64 {
    let p = PairOverlap::new(v, u, kzr);
    p.value * p.h[axis.index()]
}

/// `⟨ψ_v|∂_b ψ_u⟩`.
pub fn overlap_psi_dpsi(v: &PointSource, u: &PointSource, axis: Axis, kzr: f64) -> Complex64 {
    let p = PairOverlap::new(v, u, kzr);
    -p.value * p.h[axis.index()]
}

/// `⟨∂_a ψ_v|∂_b ψ_u⟩`.
pub fn overlap_dpsi_dpsi(v: &PointSource, axis_a: Axis, u: &PointSource, axis_b: Axis, kzr: f64) -> Complex64 {
    let p = PairOverlap::new(v, u, kzr);
    let (a, b) = (axis_a.index(), axis_b.index());
    -p.value * (p.h[a] * p.h[b] + p.dh[a][b])
}

/// Gram matrix in the basis `{|ψ_v⟩} ∪ {|∂_x ψ_v⟩} ∪ {|∂_y ψ_v⟩} ∪ {|∂_z ψ_v⟩}`.
#[derive(Debug, Clone)]
pub struct BlockGram {
    /// `⟨ψ_v|ψ_u⟩`, V×V.
    pub delta: CMatrix,
    /// `⟨ψ_v|∂ψ_u⟩`, V×3V.
    pub gamma: CMatrix,
    /// `⟨∂ψ_v|∂ψ_u⟩`, 3V×3V.
    pub tau: CMatrix,
}

impl BlockGram {
    pub fn n_sources(&self) -> usize {
        self.delta.nrows()
    }

    pub fn full(&self) -> CMatrix {
        let v = self.n_sources();
        let mut g = CMatrix::zeros(4 * v, 4 * v);
        g.view_mut((0, 0), (v, v)).copy_from(&self.delta);
        g.view_mut((0, v), (v, 3 * v)).copy_from(&self.gamma);
        g.view_mut((v, 0), (3 * v, v)).copy_from(&self.gamma.adjoint());
        g.view_mut((v, v), (3 * v, 3 * v)).copy_from(&self.tau);
        g
    }
}

/// Assembles the block Gram matrix of `scene`.
pub fn assemble_gram(scene: &Scene) -> Result<BlockGram> {
    if let Some((i, j)) = scene.coincident_pair() {
        return Err(Error::DegenerateScene(i, j));
    }
    Ok(gram_unchecked(scene))
}

fn gram_unchecked(scene: &Scene) -> BlockGram {
    let n = scene.len();
    let kzr = scene.kzr();
    let src = scene.sources();
    let mut delta = CMatrix::zeros(n, n);
    let mut gamma = CMatrix::zeros(n, 3 * n);
    let mut tau = CMatrix::zeros(3 * n, 3 * n);
    for v in 0..n {
        for u in 0..n {
            let p = PairOverlap::new(&src[v], &src[u], kzr);
            delta[(v, u)] = if v == u { c(1.0, 0.0) } else { p.value };
            for b in 0..3 {
                gamma[(v, b * n + u)] = -p.value * p.h[b];
                for a in 0..3 {
                    tau[(a * n + v, b * n + u)] = -p.value * (p.h[a] * p.h[b] + p.dh[a][b]);
                }
            }
        }
    }
    BlockGram { delta, gamma, tau }
}

/// Gram matrix of the horizontally lifted basis
/// `{|ψ_v⟩} ∪ {|∂_a ψ_v⟩ - ⟨ψ_v|∂_a ψ_v⟩|ψ_v⟩}`.
///
/// The lift leaves every `∂ρ` of the incoherent mixture unchanged (the removed
/// component along `|ψ_v⟩` is purely imaginary), and cancels the `kzr` terms
/// in closed form, so the result stays well conditioned for large `kzr`.
pub fn horizontal_gram(scene: &Scene) -> Result<BlockGram> {
    if let Some((i, j)) = scene.coincident_pair() {
        return Err(Error::DegenerateScene(i, j));
    }
    let n = scene.len();
    let kzr = scene.kzr();
    let src = scene.sources();
    // log-derivative at Δ = 0 without the gauge term: (0, 0, -i/2)
    let h0 = [c(0.0, 0.0), c(0.0, 0.0), c(0.0, -0.5)];
    let mut delta = CMatrix::zeros(n, n);
    let mut gamma = CMatrix::zeros(n, 3 * n);
    let mut tau = CMatrix::zeros(3 * n, 3 * n);
    for v in 0..n {
        for u in 0..n {
            let p = PairOverlap::new(&src[v], &src[u], kzr);
            delta[(v, u)] = if v == u { c(1.0, 0.0) } else { p.value };
            for b in 0..3 {
                let right = p.h_gauge_free(b, kzr) - h0[b];
                gamma[(v, b * n + u)] = -p.value * right;
                for a in 0..3 {
                    let left = p.h_gauge_free(a, kzr) + h0[a].conj();
                    tau[(a * n + v, b * n + u)] = -p.value * (left * right + p.dh[a][b]);
                }
            }
        }
    }
    Ok(BlockGram { delta, gamma, tau })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_defect, HermitianEigen};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn self_overlap_is_one() {
        let p = PointSource::new(0.3, -1.2, 0.7);
        assert!(close(overlap_psi_psi(&p, &p, 100.0), c(1.0, 0.0), 1e-15));
    }

    #[test]
    fn transverse_shift_of_two() {
        let o = overlap_psi_psi(&PointSource::new(2.0, 0.0, 0.0), &PointSource::ORIGIN, 100.0);
        assert!(close(o, c((-1.0f64).exp(), 0.0), 1e-15));
    }

    #[test]
    fn axial_shift_of_two_halves_the_modulus_squared() {
        let o = overlap_psi_psi(&PointSource::new(0.0, 0.0, 2.0), &PointSource::ORIGIN, 37.0);
        assert!((o.norm_sqr() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn first_order_overlaps() {
        let o = PointSource::ORIGIN;
        assert_eq!(overlap_dpsi_psi(&o, Axis::X, &o, 100.0), c(0.0, 0.0));
        // ⟨∂_x ψ_v|ψ_u⟩ = -(Δx/2)·exp(-Δx²/4) for real Gaussians on focus
        let v = PointSource::new(1.0, 0.0, 0.0);
        let d = overlap_dpsi_psi(&v, Axis::X, &o, 100.0);
        assert!(close(d, c(-0.5 * (-0.25f64).exp(), 0.0), 1e-15));
        // ⟨ψ_v|∂ψ_u⟩ is the conjugate of ⟨∂ψ_u|ψ_v⟩
        let p = PointSource::new(0.4, -0.3, 0.9);
        let q = PointSource::new(-0.2, 0.5, -0.1);
        for axis in Axis::ALL {
            let lhs = overlap_psi_dpsi(&p, &q, axis, 10.0);
            let rhs = overlap_dpsi_psi(&q, axis, &p, 10.0).conj();
            assert!(close(lhs, rhs, 1e-14));
        }
    }

    #[test]
    fn coincident_tangent_norms() {
        let o = PointSource::ORIGIN;
        let xx = overlap_dpsi_dpsi(&o, Axis::X, &o, Axis::X, 100.0);
        let xy = overlap_dpsi_dpsi(&o, Axis::X, &o, Axis::Y, 100.0);
        assert!(close(xx, c(0.5, 0.0), 1e-15));
        assert_eq!(xy, c(0.0, 0.0));
        // τ_zz = (kzr - 1/2)² + 1/4
        let zz = overlap_dpsi_dpsi(&o, Axis::Z, &o, Axis::Z, 100.0);
        assert!(close(zz, c(99.5f64.powi(2) + 0.25, 0.0), 1e-9));
    }

    #[test]
    fn gram_of_single_source() {
        let s = Scene::new(vec![PointSource::ORIGIN], 100.0).unwrap();
        let g = assemble_gram(&s).unwrap();
        assert_eq!(g.delta[(0, 0)], c(1.0, 0.0));
        assert!(close(g.tau[(0, 0)], c(0.5, 0.0), 1e-15));
        assert!(close(g.tau[(1, 1)], c(0.5, 0.0), 1e-15));
        assert!(g.tau[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn gram_of_two_sources() {
        let s = Scene::new(vec![PointSource::new(-1.0, 0.0, 0.0), PointSource::new(1.0, 0.0, 0.0)], 100.0).unwrap();
        let g = assemble_gram(&s).unwrap();
        let e = (-1.0f64).exp();
        assert!(close(g.delta[(0, 1)], c(e, 0.0), 1e-15));
        assert!(close(g.delta[(1, 0)], c(e, 0.0), 1e-15));
    }

    #[test]
    fn coincident_sources_are_rejected() {
        let s = Scene::new(vec![PointSource::ORIGIN, PointSource::new(0.0, 0.0, 1e-12)], 100.0).unwrap();
        assert_eq!(assemble_gram(&s).unwrap_err(), Error::DegenerateScene(0, 1));
    }

    #[test]
    fn full_gram_is_hermitian_psd() {
        let s = Scene::new(
            vec![PointSource::new(0.3, 0.1, -0.4), PointSource::new(-1.1, 0.7, 0.2), PointSource::new(0.5, -0.9, 1.3)],
            10.0,
        )
        .unwrap();
        let g = assemble_gram(&s).unwrap().full();
        assert!(hermiticity_defect(&g) < 1e-12);
        let e = HermitianEigen::new(&g);
        assert!(e.min() >= -1e-10 * e.max().max(1.0));
    }

    #[test]
    fn horizontal_gram_matches_lifted_basis() {
        let s = Scene::new(vec![PointSource::new(0.2, -0.4, 0.3), PointSource::new(-0.5, 0.1, -0.6)], 7.0).unwrap();
        let g = assemble_gram(&s).unwrap().full();
        let n = s.len();
        // explicit change of basis T: tangent t ↦ t - ⟨ψ_v|t⟩ ψ_v
        let mut t = CMatrix::identity(4 * n, 4 * n);
        for v in 0..n {
            for a in 0..3 {
                let col = n + a * n + v;
                t[(v, col)] = -g[(v, col)];
            }
        }
        let lifted = t.adjoint() * &g * &t;
        let h = horizontal_gram(&s).unwrap().full();
        assert!((lifted - h).norm() < 1e-11);
    }
}
