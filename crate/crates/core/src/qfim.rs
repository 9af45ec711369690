//! Quantum Fisher information of source displacements.
//!
//! Three independent routes compute the same matrix:
//!
//! * [`qfim_reduced`]: closed form in terms of the V×V reduced Lyapunov
//!   solution `L_Δ` and the Gram blocks.
//! * [`qfim_general`]: the full non-orthogonal SLD equation
//!   `2D_a = L_a G R + R G L_a` solved as one dense linear system over the
//!   4V-dimensional basis (gauge `L_τ = 0`), followed by
//!   `H_ab = Re Tr(R G L_a G L_b G)`.
//! * [`qfim_embedding_oracle`]: explicit orthonormal vectors from the square
//!   root of the Gram matrix and the textbook eigenbasis SLD formula.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    cr, frobenius, psd_sqrt, real_symmetric_eigenvalues, solve_lyapunov, CMatrix, HermitianEigen, RMatrix,
};
use crate::psf::{assemble_gram, horizontal_gram, labels, BlockGram, ParamIndex, Scene};

/// Largest tolerated condition number of `G_Δ` and of an information matrix.
pub const MAX_CONDITION: f64 = 1e12;
/// Density-matrix eigenvalues below this are outside the SLD support.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Real symmetric information matrix over a labelled parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub params: Vec<String>,
    pub matrix: RMatrix,
}

impl FisherMatrix {
    pub fn new(params: Vec<String>, matrix: RMatrix) -> Result<Self> {
        if matrix.nrows() != params.len() || matrix.ncols() != params.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0}", params.len()),
                got: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        Ok(Self { params, matrix })
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.params.iter().position(|p| p == label)
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.matrix[(self.index_of(a)?, self.index_of(b)?)])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        real_symmetric_eigenvalues(&self.matrix)
    }

    pub fn asymmetry(&self) -> f64 {
        frobenius(&(&self.matrix - self.matrix.transpose()))
    }

    pub fn scaled(&self, by: f64) -> Self {
        Self { params: self.params.clone(), matrix: self.matrix.scale(by) }
    }

    /// Relative Frobenius distance `‖A − B‖ / max(‖A‖, ‖B‖)`.
    pub fn relative_distance(&self, other: &FisherMatrix) -> f64 {
        let scale = frobenius(&self.matrix).max(frobenius(&other.matrix));
        if scale == 0.0 {
            0.0
        } else {
            frobenius(&(&self.matrix - &other.matrix)) / scale
        }
    }

    /// Eigenvalues of `self − other`, ascending.
    pub fn excess_over(&self, other: &FisherMatrix) -> Result<Vec<f64>> {
        if self.params != other.params {
            return Err(Error::DimensionMismatch { expected: self.params.join(","), got: other.params.join(",") });
        }
        Ok(real_symmetric_eigenvalues(&(&self.matrix - &other.matrix)))
    }

    fn symmetrized(mut self) -> Self {
        self.matrix = (&self.matrix + self.matrix.transpose()).scale(0.5);
        self
    }
}

/// Jacobian `B_{αb} = ∂θ_b/∂θ̃_α` of a reparametrization θ ↦ θ̃.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub matrix: RMatrix,
    pub source_params: Vec<String>,
    pub target_params: Vec<String>,
}

impl Jacobian {
    pub fn new(matrix: RMatrix, source_params: Vec<String>, target_params: Vec<String>) -> Result<Self> {
        if matrix.nrows() != target_params.len() || matrix.ncols() != source_params.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", target_params.len(), source_params.len()),
                got: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        let rank = matrix.clone().svd(false, false).rank(1e-12);
        if rank < matrix.nrows() {
            return Err(Error::Config(format!(
                "Jacobian must have full row rank, got rank {rank} for {} rows",
                matrix.nrows()
            )));
        }
        Ok(Self { matrix, source_params, target_params })
    }

    pub fn identity(params: Vec<String>) -> Self {
        let n = params.len();
        Self { matrix: RMatrix::identity(n, n), source_params: params.clone(), target_params: params }
    }
}

/// `B F Bᵀ`, relabelled to the target parameters.
pub fn reparametrize(f: &FisherMatrix, b: &Jacobian) -> Result<FisherMatrix> {
    if b.source_params != f.params {
        return Err(Error::DimensionMismatch { expected: f.params.join(","), got: b.source_params.join(",") });
    }
    let m = &b.matrix * &f.matrix * b.matrix.transpose();
    Ok(FisherMatrix { params: b.target_params.clone(), matrix: m }.symmetrized())
}

/// Cramér–Rao bound `N⁻¹ F⁻¹` for `n_photons` detected photons.
pub fn crb(f: &FisherMatrix, n_photons: f64) -> Result<RMatrix> {
    let eig = f.eigenvalues();
    let lo = eig.first().copied().unwrap_or(0.0);
    let hi = eig.last().copied().unwrap_or(0.0);
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond < MAX_CONDITION) {
        return Err(Error::SingularInformation(cond));
    }
    let inv = f.matrix.clone().try_inverse().ok_or(Error::SingularInformation(cond))?;
    Ok(inv.scale(1.0 / n_photons))
}

/// Reduced SLD blocks `L_Δ^a`, one per parameter.
#[derive(Debug, Clone)]
pub struct SldSolution {
    pub params: Vec<ParamIndex>,
    pub l_delta: Vec<CMatrix>,
}

/// `G_Δ` with its eigen-decomposition and inverse.
struct DeltaFactor {
    eig: HermitianEigen,
    inverse: CMatrix,
}

impl DeltaFactor {
    fn new(gram: &BlockGram) -> Result<Self> {
        let eig = HermitianEigen::new(&gram.delta);
        let cond = eig.condition();
        if !(cond < MAX_CONDITION) || eig.min() <= 0.0 {
            return Err(Error::IllConditioned(cond));
        }
        let inverse = eig.map(|x| 1.0 / x);
        Ok(Self { eig, inverse })
    }
}

/// Right-hand side of the reduced Lyapunov equation for parameter `a`:
/// `-2 (G_γ E_a† G_Δ⁻¹ + G_Δ⁻¹ E_a G_γ†)` with `E_a` the unit V×3V matrix at
/// (source of a, tangent of a).
fn reduced_rhs(gram: &BlockGram, inv: &CMatrix, a: ParamIndex) -> CMatrix {
    let n = gram.n_sources();
    let t = a.tangent_index(n);
    // G_γ E_a† has the tangent column of G_γ in column `source`.
    let mut ge = CMatrix::zeros(n, n);
    ge.set_column(a.source, &gram.gamma.column(t));
    let first = ge * inv;
    let second = first.adjoint();
    (first + second).scale(-2.0)
}

fn solve_sld_with(gram: &BlockGram, factor: &DeltaFactor, a: ParamIndex) -> CMatrix {
    let rhs = reduced_rhs(gram, &factor.inverse, a);
    let l = solve_lyapunov(&factor.eig, &rhs);
    (&l + l.adjoint()).scale(0.5)
}

/// Solves the reduced Lyapunov equation `L_Δ G_Δ + G_Δ L_Δ = C_a`.
pub fn solve_reduced_sld(gram: &BlockGram, a: ParamIndex) -> Result<CMatrix> {
    let factor = DeltaFactor::new(gram)?;
    Ok(solve_sld_with(gram, &factor, a))
}

/// Residual `‖L G_Δ + G_Δ L − C_a‖_F / ‖C_a‖_F` of a reduced SLD solution.
pub fn reduced_sld_residual(gram: &BlockGram, a: ParamIndex, l: &CMatrix) -> Result<f64> {
    let factor = DeltaFactor::new(gram)?;
    let rhs = reduced_rhs(gram, &factor.inverse, a);
    let res = l * &gram.delta + &gram.delta * l - &rhs;
    let scale = rhs.norm();
    Ok(if scale == 0.0 { res.norm() } else { res.norm() / scale })
}

pub fn solve_reduced_slds(scene: &Scene, params: &[ParamIndex]) -> Result<SldSolution> {
    scene.check_params(params)?;
    let gram = assemble_gram(scene)?;
    let factor = DeltaFactor::new(&gram)?;
    let l_delta = params.iter().map(|&a| solve_sld_with(&gram, &factor, a)).collect();
    Ok(SldSolution { params: params.to_vec(), l_delta })
}

/// QFIM from the reduced closed form.
///
/// With `t_a`, `u_a` the tangent and source index of parameter `a`:
///
/// ```text
/// V·H_ab = 2 Re (G_γ† L_Δ^a G_Δ)[t_b, u_b]
///        + 4 Re G_γ†[t_a, u_b] · (G_γ† G_Δ⁻¹)[t_b, u_a]
///        + 4 δ(u_a, u_b) Re G_τ[t_a, t_b]
/// ```
///
/// The last term is the tangent-curvature contribution; it carries the whole
/// information of an isolated source.
///
/// The Gram blocks are taken in the horizontal gauge ([`horizontal_gram`]),
/// which leaves `∂ρ` unchanged but removes the `kzr²` terms that otherwise
/// cancel between the three contributions.
pub fn qfim_reduced(scene: &Scene, params: &[ParamIndex]) -> Result<FisherMatrix> {
    scene.check_params(params)?;
    qfim_reduced_from_gram(&horizontal_gram(scene)?, params)
}

/// Reduced closed form evaluated on a caller-supplied Gram matrix.
pub fn qfim_reduced_from_gram(gram: &BlockGram, params: &[ParamIndex]) -> Result<FisherMatrix> {
    let n = gram.n_sources();
    if let Some(bad) = params.iter().find(|p| p.source >= n) {
        return Err(Error::DimensionMismatch { expected: format!("source index < {n}"), got: bad.source.to_string() });
    }
    let factor = DeltaFactor::new(gram)?;
    let gamma_adj = gram.gamma.adjoint();
    let gamma_adj_inv = &gamma_adj * &factor.inverse;
    let m = params.len();
    let mut h = RMatrix::zeros(m, m);
    for (i, &a) in params.iter().enumerate() {
        let l = solve_sld_with(gram, &factor, a);
        let gl = &gamma_adj * &l * &gram.delta;
        let ta = a.tangent_index(n);
        for (j, &b) in params.iter().enumerate() {
            let tb = b.tangent_index(n);
            let mut val =
                2.0 * gl[(tb, b.source)].re + 4.0 * (gamma_adj[(ta, b.source)] * gamma_adj_inv[(tb, a.source)]).re;
            if a.source == b.source {
                val += 4.0 * gram.tau[(ta, tb)].re;
            }
            h[(i, j)] = val / n as f64;
        }
    }
    Ok(FisherMatrix { params: labels(params), matrix: h }.symmetrized())
}

/// QFIM from the full non-orthogonal SLD equation, solved without block
/// elimination.
pub fn qfim_general(scene: &Scene, params: &[ParamIndex]) -> Result<FisherMatrix> {
    scene.check_params(params)?;
    let gram = assemble_gram(scene)?;
    // same conditioning guard as the reduced path
    DeltaFactor::new(&gram)?;
    let n = scene.len();
    let dim = 4 * n;
    let g = gram.full();
    let weight = 1.0 / n as f64;
    let mut r = CMatrix::zeros(dim, dim);
    for v in 0..n {
        r[(v, v)] = cr(weight);
    }
    let gr = &g * &r;
    let rg = &r * &g;

    // Unknowns and equations: every (i, j) outside the tangent-tangent block.
    let in_tau = |i: usize, j: usize| i >= n && j >= n;
    let cells: Vec<(usize, usize)> =
        (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).filter(|&(i, j)| !in_tau(i, j)).collect();
    let mut slot = vec![usize::MAX; dim * dim];
    for (k, &(i, j)) in cells.iter().enumerate() {
        slot[i * dim + j] = k;
    }
    let size = cells.len();
    let mut system = CMatrix::zeros(size, size);
    for (row, &(i, j)) in cells.iter().enumerate() {
        // (L G R)_ij = Σ_k L_ik (GR)_kj ; (R G L)_ij = Σ_k (RG)_ik L_kj
        for k in 0..dim {
            if let Some(&col) = Some(&slot[i * dim + k]).filter(|&&c| c != usize::MAX) {
                system[(row, col)] += gr[(k, j)];
            }
            if let Some(&col) = Some(&slot[k * dim + j]).filter(|&&c| c != usize::MAX) {
                system[(row, col)] += rg[(i, k)];
            }
        }
    }
    let lu = system.lu();

    let mut slds = Vec::with_capacity(params.len());
    for &a in params {
        let t = n + a.tangent_index(n);
        let mut rhs = DVector::<Complex64>::zeros(size);
        rhs[slot[a.source * dim + t]] = cr(2.0 * weight);
        rhs[slot[t * dim + a.source]] = cr(2.0 * weight);
        let x = lu.solve(&rhs).ok_or(Error::IllConditioned(f64::INFINITY))?;
        let mut l = CMatrix::zeros(dim, dim);
        for (k, &(i, j)) in cells.iter().enumerate() {
            l[(i, j)] = x[k];
        }
        slds.push(l);
    }

    let rg_ = &r * &g;
    let m = params.len();
    let mut h = RMatrix::zeros(m, m);
    for i in 0..m {
        let left = &rg_ * &slds[i] * &g;
        for j in 0..m {
            let prod = &left * &slds[j] * &g;
            h[(i, j)] = prod.trace().re;
        }
    }
    Ok(FisherMatrix { params: labels(params), matrix: h }.symmetrized())
}

/// QFIM from explicit orthonormal vectors and the eigenbasis SLD formula
/// `H_ab = Σ_{p_i+p_j>0} 2 Re[(∂_a ρ)_ij (∂_b ρ)_ji] / (p_i + p_j)`.
pub fn qfim_embedding_oracle(scene: &Scene, params: &[ParamIndex]) -> Result<FisherMatrix> {
    scene.check_params(params)?;
    let gram = horizontal_gram(scene)?;
    let n = scene.len();
    let a = psd_sqrt(&gram.full());
    let weight = 1.0 / n as f64;
    let dim = 4 * n;
    let mut rho = CMatrix::zeros(dim, dim);
    for v in 0..n {
        let col = a.column(v);
        rho += (col * col.adjoint()).scale(weight);
    }
    let eig = HermitianEigen::new(&rho);
    let p: Vec<f64> = eig.values.iter().map(|&x| if x < SUPPORT_TOL { 0.0 } else { x }).collect();
    let u = &eig.vectors;

    let derivs: Vec<CMatrix> = params
        .iter()
        .map(|pa| {
            let src = a.column(pa.source);
            let tan = a.column(n + pa.tangent_index(n));
            let d = (tan * src.adjoint() + src * tan.adjoint()).scale(weight);
            u.adjoint() * d * u
        })
        .collect();

    let m = params.len();
    let mut h = RMatrix::zeros(m, m);
    for x in 0..m {
        for y in 0..m {
            let mut acc = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    let s = p[i] + p[j];
                    if s > 0.0 {
                        acc += 2.0 * (derivs[x][(i, j)] * derivs[y][(j, i)]).re / s;
                    }
                }
            }
            h[(x, y)] = acc;
        }
    }
    Ok(FisherMatrix { params: labels(params), matrix: h }.symmetrized())
}
