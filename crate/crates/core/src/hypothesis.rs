//! Crack detection as a binary hypothesis test: a flat surface (null,
//! emitters L, R, C) against a crack of depth δz (emitters L, R, Z).
//!
//! States are represented exactly in a finite orthonormal embedding: for a
//! Gram matrix `G` of the involved pure states, the columns of `A = √G` are
//! vectors with `a_i† a_j = G_ij`.

use num_complex::Complex64;

use crate::chernoff::{chernoff_discrete_with_diff, kernel, ChernoffResult};
use crate::crack::{build_crack, CrackSpec};
use crate::error::{Error, Result};
use crate::linalg::{cr, hermiticity_defect, psd_sqrt, trace_norm, CMatrix, HermitianEigen};
use crate::modesort::{ModeBasis, SceneModes};
use crate::psf::{overlap_psi_psi, PointSource, Scene};

/// Density-matrix eigenvalues below this are treated as exact zeros.
pub const RANK_TOL: f64 = 1e-12;

/// Density matrix in an orthonormal embedding of a set of pure sources.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedState {
    pub matrix: CMatrix,
    pub source_labels: Vec<String>,
}

impl EmbeddedState {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Largest deviation from the density-matrix invariants: Hermiticity,
    /// unit trace and a nonnegative spectrum.
    pub fn validity_defect(&self) -> f64 {
        let herm = hermiticity_defect(&self.matrix);
        let tr = (self.trace() - 1.0).abs();
        let neg = (-HermitianEigen::new(&self.matrix).min()).max(0.0);
        herm.max(tr).max(neg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisPair {
    pub rho0: EmbeddedState,
    pub rho1: EmbeddedState,
}

impl HypothesisPair {
    /// Equal-weight mixtures of the sources of each scene, embedded through
    /// the Gram matrix of the union of all distinct sources.
    pub fn from_scenes(scene0: &Scene, scene1: &Scene) -> Result<Self> {
        if scene0.kzr() != scene1.kzr() {
            return Err(Error::InvalidScene("both hypotheses must share kzr".into()));
        }
        let kzr = scene0.kzr();
        let mut basis: Vec<PointSource> = Vec::new();
        let mut index = |p: &PointSource| match basis.iter().position(|q| q == p) {
            Some(i) => i,
            None => {
                basis.push(*p);
                basis.len() - 1
            }
        };
        let members0: Vec<usize> = scene0.sources().iter().map(&mut index).collect();
        let members1: Vec<usize> = scene1.sources().iter().map(&mut index).collect();
        let n = basis.len();
        let gram = CMatrix::from_fn(n, n, |i, j| overlap_psi_psi(&basis[i], &basis[j], kzr));
        let a = psd_sqrt(&gram);
        let labels: Vec<String> = basis.iter().map(|p| format!("({}, {}, {})", p.dx, p.dy, p.dz)).collect();
        let state = |members: &[usize]| {
            let w = 1.0 / members.len() as f64;
            let mut rho = CMatrix::zeros(n, n);
            for &m in members {
                let col = a.column(m);
                rho += (col * col.adjoint()).scale(w);
            }
            EmbeddedState { matrix: (&rho + rho.adjoint()).scale(0.5), source_labels: labels.clone() }
        };
        Ok(Self { rho0: state(&members0), rho1: state(&members1) })
    }

    /// Applies `U ρ U†` to both states.
    pub fn conjugated_by(&self, u: &CMatrix) -> Self {
        let tf = |s: &EmbeddedState| EmbeddedState {
            matrix: u * &s.matrix * u.adjoint(),
            source_labels: s.source_labels.clone(),
        };
        Self { rho0: tf(&self.rho0), rho1: tf(&self.rho1) }
    }
}

fn check_crack_inputs(delta_x: f64, delta_z: f64, kzr: f64) -> Result<CrackSpec> {
    CrackSpec::new(delta_x, delta_z, kzr)
}

/// Flat surface against a crack of width `δx` and depth `δz`.
pub fn embed_states(delta_x: f64, delta_z: f64, kzr: f64) -> Result<HypothesisPair> {
    let spec = check_crack_inputs(delta_x, delta_z, kzr)?;
    HypothesisPair::from_scenes(&build_crack(&spec.flat())?, &build_crack(&spec)?)
}

/// Eigen-decompositions of both states with the overlap weights
/// `w_ij = |⟨u_i|v_j⟩|²`.
struct SpectralPair {
    lambda: Vec<f64>,
    mu: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

impl SpectralPair {
    fn new(pair: &HypothesisPair) -> Self {
        let e0 = HermitianEigen::new(&pair.rho0.matrix);
        let e1 = HermitianEigen::new(&pair.rho1.matrix);
        let clamp = |v: &[f64]| v.iter().map(|&x| if x < RANK_TOL { 0.0 } else { x }).collect::<Vec<_>>();
        let cross = e0.vectors.adjoint() * &e1.vectors;
        let weights =
            (0..cross.nrows()).map(|i| (0..cross.ncols()).map(|j| cross[(i, j)].norm_sqr()).collect()).collect();
        Self { lambda: clamp(&e0.values), mu: clamp(&e1.values), weights }
    }

    fn gap(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &l) in self.lambda.iter().enumerate() {
            for (j, &m) in self.mu.iter().enumerate() {
                acc += self.weights[i][j] * kernel(l, m, s);
            }
        }
        acc
    }
}

/// `Tr[ρ₀^s ρ₁^{1−s}]` with the support-projector convention for zero
/// eigenvalues.
pub fn quantum_objective(pair: &HypothesisPair, s: f64) -> f64 {
    1.0 - SpectralPair::new(pair).gap(s)
}

/// Quantum Chernoff exponent `ξ_Q = −ln min_s Tr[ρ₀^s ρ₁^{1−s}]`.
pub fn qcb(pair: &HypothesisPair) -> ChernoffResult {
    let sp = SpectralPair::new(pair);
    ChernoffResult::from_objective(|s| sp.gap(s))
}

/// Uhlmann fidelity `‖√ρ₀ √ρ₁‖₁`.
pub fn fidelity_direct(pair: &HypothesisPair) -> f64 {
    trace_norm(&(psd_sqrt(&pair.rho0.matrix) * psd_sqrt(&pair.rho1.matrix))).min(1.0)
}

/// Pure-state overlaps of the crack test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapTriple {
    /// `⟨ψ_L|ψ_C⟩`
    pub alpha: Complex64,
    /// `⟨ψ_L|ψ_Z⟩`
    pub beta: Complex64,
    /// `⟨ψ_C|ψ_Z⟩`
    pub gamma: Complex64,
    /// `⟨ψ_L|ψ_R⟩`
    pub alpha4: Complex64,
}

impl OverlapTriple {
    pub fn new(delta_x: f64, delta_z: f64, kzr: f64) -> Result<Self> {
        let [l, r, c] = check_crack_inputs(delta_x, delta_z, kzr)?.flat().sources();
        let z = PointSource::new(0.0, 0.0, -delta_z);
        Ok(Self {
            alpha: overlap_psi_psi(&l, &c, kzr),
            beta: overlap_psi_psi(&l, &z, kzr),
            gamma: overlap_psi_psi(&c, &z, kzr),
            alpha4: overlap_psi_psi(&l, &r, kzr),
        })
    }

    pub fn conjugated(&self) -> Self {
        Self { alpha: self.alpha.conj(), beta: self.beta.conj(), gamma: self.gamma.conj(), alpha4: self.alpha4.conj() }
    }

    /// `F = ‖M₁‖₁ + ‖M₂‖₁ / 3` in the even/odd parity ensemble of the edge
    /// emitters, with `M₁ = (1 − α⁴)/3` and `M₂ = [[1 + α⁴, √2 β], [√2 α, γ]]`.
    pub fn fidelity(&self) -> f64 {
        let m1 = ((cr(1.0) - self.alpha4) / 3.0).norm();
        let s2 = std::f64::consts::SQRT_2;
        let m2 = [cr(1.0) + self.alpha4, self.beta * s2, self.alpha * s2, self.gamma];
        let frob2: f64 = m2.iter().map(|z| z.norm_sqr()).sum();
        let det = (m2[0] * m2[3] - m2[1] * m2[2]).norm();
        (m1 + (frob2 + 2.0 * det).sqrt() / 3.0).min(1.0)
    }

    /// Odd-parity block `‖M₁‖₁` alone.
    pub fn odd_block(&self) -> f64 {
        ((cr(1.0) - self.alpha4) / 3.0).norm()
    }
}

/// Fidelity of the crack test from the purification trace norm.
pub fn fidelity_trace_norm(delta_x: f64, delta_z: f64, kzr: f64) -> Result<f64> {
    Ok(OverlapTriple::new(delta_x, delta_z, kzr)?.fidelity())
}

/// `−2 ln F`, an upper bound on `ξ_Q`.
pub fn qcb_fidelity_bound(delta_x: f64, delta_z: f64, kzr: f64) -> Result<f64> {
    Ok(-2.0 * fidelity_trace_norm(delta_x, delta_z, kzr)?.ln())
}

/// Mode-sorting Chernoff exponent between two scenes of equal size; the
/// probability difference is accumulated per source pair.
pub fn chernoff_ms_scenes(
    scene0: &Scene,
    scene1: &Scene,
    basis: &ModeBasis,
    include_remainder: bool,
) -> Result<ChernoffResult> {
    if scene0.len() != scene1.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} sources", scene0.len()),
            got: format!("{} sources", scene1.len()),
        });
    }
    let m0 = SceneModes::new(scene0, basis);
    let m1 = SceneModes::new(scene1, basis);
    let w = 1.0 / scene0.len() as f64;
    let mut p = Vec::with_capacity(basis.len() + 1);
    let mut q = Vec::with_capacity(basis.len() + 1);
    let mut diff = Vec::with_capacity(basis.len() + 1);
    for &mode in basis.modes() {
        let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
        for (s0, s1) in m0.sources.iter().zip(&m1.sources) {
            let (pa, pb) = (s0.prob(mode), s1.prob(mode));
            a += pa;
            b += pb;
            d += pa - pb;
        }
        p.push(a * w);
        q.push(b * w);
        diff.push(d * w);
    }
    if include_remainder {
        let rp = (1.0 - p.iter().sum::<f64>()).max(0.0);
        let rq = (1.0 - q.iter().sum::<f64>()).max(0.0);
        let rd = -diff.iter().sum::<f64>();
        p.push(rp);
        q.push(rq);
        diff.push(rd);
    }
    Ok(chernoff_discrete_with_diff(&p, &q, &diff))
}

/// `ξ_MS` for the crack test: `s` is the exponent of the flat hypothesis.
pub fn chernoff_ms(
    delta_x: f64,
    delta_z: f64,
    kzr: f64,
    basis: &ModeBasis,
    include_remainder: bool,
) -> Result<ChernoffResult> {
    let spec = check_crack_inputs(delta_x, delta_z, kzr)?;
    chernoff_ms_scenes(&build_crack(&spec.flat())?, &build_crack(&spec)?, basis, include_remainder)
}
