//! Hermite–Gaussian mode sorting.
//!
//! The measurement projects onto `φ_{j,l}(x, y) = h_j(x) h_l(y) e^{-(x²+y²)/2} / √π`
//! with `h_n = H_n / √(2ⁿ n!)`. A source at `(δx, δy, δz)` has amplitude
//!
//! ```text
//! ⟨φ_{j,l}|ψ⟩ = (2i/w) · e^{-i·kzr·δz} · e^{-i(δx²+δy²)/(2w)} · M_j(μ_x, σ²) · M_l(μ_y, σ²)
//! w = δz + 2i,  μ_x = -iδx/w,  μ_y = -iδy/w,  σ² = (δz + i)/(δz + 2i)
//! ```
//!
//! where `M_n(μ, σ²) = Σ_ζ h_{n,ζ} E[X^ζ]` with `X` a complex Gaussian of mean
//! `μ` and variance `σ²`. The moments use the centred binomial expansion
//! `E[X^ζ] = Σ_α C(ζ,α) μ^α E[(X-μ)^{ζ-α}]`, `E[(X-μ)^{2m}] = (2m-1)!! σ^{2m}`.
//!
//! Probabilities and their gradients never touch the `kzr` phase.

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, RMatrix};
use crate::psf::{labels, Axis, ParamIndex, PointSource, Scene};
use crate::qfim::{reparametrize, FisherMatrix, Jacobian};

pub const DEFAULT_MAX_ORDER: usize = 10;
/// Largest supported truncation; beyond it the binomial moment sums lose
/// all significant digits.
pub const MAX_SUPPORTED_ORDER: usize = 30;
/// Channels below this probability use the analytic zero-probability limit.
pub const ZERO_CHANNEL_FLOOR: f64 = 1e-15;
/// Remainders below `-REMAINDER_SLACK` are reported before clamping.
pub const REMAINDER_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub j: usize,
    pub l: usize,
}

impl ModeIndex {
    pub fn new(j: usize, l: usize) -> Self {
        Self { j, l }
    }

    pub fn order(&self) -> usize {
        self.j + self.l
    }

    pub fn label(&self) -> String {
        format!("{}_{}", self.j, self.l)
    }
}

/// Modes with `j + l ≤ max_order`, ordered by total degree and then by
/// decreasing `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    max_order: usize,
    modes: Vec<ModeIndex>,
    /// `hermite[n][k]`: coefficient of `x^k` in `h_n`.
    hermite: Vec<Vec<f64>>,
}

impl Default for ModeBasis {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_ORDER).expect("default order is supported")
    }
}

impl ModeBasis {
    pub fn new(max_order: usize) -> Result<Self> {
        if max_order > MAX_SUPPORTED_ORDER {
            return Err(Error::Config(format!(
                "mode truncation {max_order} exceeds the supported maximum {MAX_SUPPORTED_ORDER}"
            )));
        }
        let modes = (0..=max_order).flat_map(|n| (0..=n).rev().map(move |j| ModeIndex::new(j, n - j))).collect();
        Ok(Self { max_order, modes, hermite: normalized_hermite(max_order) })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn contains(&self, mode: ModeIndex) -> bool {
        mode.order() <= self.max_order
    }

    pub fn hermite_coefficients(&self, n: usize) -> &[f64] {
        &self.hermite[n]
    }

    /// `h_n(x)` by Horner evaluation of the coefficient table.
    pub fn hermite(&self, n: usize, x: f64) -> f64 {
        self.hermite[n].iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    /// `φ_{j,l}(x, y)`.
    pub fn mode_function(&self, mode: ModeIndex, x: f64, y: f64) -> f64 {
        self.hermite(mode.j, x) * self.hermite(mode.l, y) * (-(x * x + y * y) / 2.0).exp() / std::f64::consts::PI.sqrt()
    }

    /// `M_n`, `∂M_n/∂μ`, `∂M_n/∂σ²` for every `n ≤ max_order`.
    fn moment_sums(&self, mu: Complex64, var: Complex64) -> [Vec<Complex64>; 3] {
        let m = gaussian_moments(mu, var, self.max_order);
        let zero = c(0.0, 0.0);
        let mut value = Vec::with_capacity(self.max_order + 1);
        let mut d_mu = Vec::with_capacity(self.max_order + 1);
        let mut d_var = Vec::with_capacity(self.max_order + 1);
        for coeffs in &self.hermite {
            let (mut v, mut dm, mut dv) = (zero, zero, zero);
            for (z, &h) in coeffs.iter().enumerate() {
                if h == 0.0 {
                    continue;
                }
                v += m[z] * h;
                if z >= 1 {
                    dm += m[z - 1] * (h * z as f64);
                }
                if z >= 2 {
                    dv += m[z - 2] * (h * (z * (z - 1)) as f64 / 2.0);
                }
            }
            value.push(v);
            d_mu.push(dm);
            d_var.push(dv);
        }
        [value, d_mu, d_var]
    }
}

fn normalized_hermite(max_order: usize) -> Vec<Vec<f64>> {
    // physicists' recursion H_{n+1} = 2x H_n - 2n H_{n-1}
    let mut raw: Vec<Vec<f64>> = vec![vec![1.0]];
    if max_order >= 1 {
        raw.push(vec![0.0, 2.0]);
    }
    for n in 1..max_order {
        let mut next = vec![0.0; n + 2];
        for (k, &a) in raw[n].iter().enumerate() {
            next[k + 1] += 2.0 * a;
        }
        for (k, &a) in raw[n - 1].iter().enumerate() {
            next[k] -= 2.0 * n as f64 * a;
        }
        raw.push(next);
    }
    let mut norm = 1.0_f64;
    raw.into_iter()
        .enumerate()
        .map(|(n, coeffs)| {
            if n > 0 {
                norm *= (2.0 * n as f64).sqrt();
            }
            coeffs.into_iter().map(|a| a / norm).collect()
        })
        .collect()
}

/// `E[X^n]` for `n = 0..=max_order`, `X` complex Gaussian with mean `mu` and
/// variance `var`, via the centred binomial expansion.
pub fn gaussian_moments(mu: Complex64, var: Complex64, max_order: usize) -> Vec<Complex64> {
    // central moments E[(X-μ)^k]
    let mut central = vec![c(0.0, 0.0); max_order + 1];
    central[0] = c(1.0, 0.0);
    let mut even = c(1.0, 0.0);
    for k in (2..=max_order).step_by(2) {
        even *= var * (k - 1) as f64;
        central[k] = even;
    }
    let mut mu_pow = vec![c(1.0, 0.0); max_order + 1];
    for a in 1..=max_order {
        mu_pow[a] = mu_pow[a - 1] * mu;
    }
    (0..=max_order)
        .map(|n| {
            let mut binom = 1.0;
            let mut acc = c(0.0, 0.0);
            for a in 0..=n {
                acc += mu_pow[a] * central[n - a] * binom;
                binom = binom * (n - a) as f64 / (a + 1) as f64;
            }
            acc
        })
        .collect()
}

/// Gauge-free amplitudes and their displacement gradients for one source over
/// a whole basis. Built once per source and reused for every mode.
#[derive(Debug, Clone)]
pub struct SourceAmplitudes {
    prefactor: Complex64,
    /// `∂ ln(prefactor)` per axis.
    d_prefactor: [Complex64; 3],
    mx: [Vec<Complex64>; 3],
    my: [Vec<Complex64>; 3],
    /// `∂μ_x`, `∂μ_y`, `∂σ²` per axis.
    d_mu_x: [Complex64; 3],
    d_mu_y: [Complex64; 3],
    d_var: [Complex64; 3],
    /// `|prefactor|²`, computed in real arithmetic.
    weight: f64,
}

impl SourceAmplitudes {
    pub fn new(basis: &ModeBasis, src: &PointSource) -> Self {
        let i = c(0.0, 1.0);
        let w = c(src.dz, 2.0);
        let w2 = w * w;
        let s = src.dx * src.dx + src.dy * src.dy;
        let prefactor = c(0.0, 2.0) / w * (-i * s / (w * 2.0)).exp();
        let mu_x = -i * src.dx / w;
        let mu_y = -i * src.dy / w;
        let var = c(src.dz, 1.0) / w;
        let d_prefactor = [-i * src.dx / w, -i * src.dy / w, -w.inv() + i * s / (w2 * 2.0)];
        let zero = c(0.0, 0.0);
        let denom = 4.0 + src.dz * src.dz;
        Self {
            prefactor,
            d_prefactor,
            mx: basis.moment_sums(mu_x, var),
            my: basis.moment_sums(mu_y, var),
            d_mu_x: [-i / w, zero, i * src.dx / w2],
            d_mu_y: [zero, -i / w, i * src.dy / w2],
            d_var: [zero, zero, i / w2],
            weight: 4.0 / denom * (-2.0 * s / denom).exp(),
        }
    }

    /// Amplitude without the `e^{-i·kzr·δz}` phase.
    pub fn amplitude(&self, mode: ModeIndex) -> Complex64 {
        self.prefactor * self.mx[0][mode.j] * self.my[0][mode.l]
    }

    /// Gradient of [`Self::amplitude`] with respect to `(δx, δy, δz)`.
    pub fn amplitude_grad(&self, mode: ModeIndex) -> [Complex64; 3] {
        let (mj, ml) = (self.mx[0][mode.j], self.my[0][mode.l]);
        let amp = self.prefactor * mj * ml;
        let mut g = [c(0.0, 0.0); 3];
        for (a, out) in g.iter_mut().enumerate() {
            let dmj = self.mx[1][mode.j] * self.d_mu_x[a] + self.mx[2][mode.j] * self.d_var[a];
            let dml = self.my[1][mode.l] * self.d_mu_y[a] + self.my[2][mode.l] * self.d_var[a];
            *out = amp * self.d_prefactor[a] + self.prefactor * (dmj * ml + mj * dml);
        }
        g
    }

    pub fn prob(&self, mode: ModeIndex) -> f64 {
        self.weight * self.mx[0][mode.j].norm_sqr() * self.my[0][mode.l].norm_sqr()
    }

    pub fn prob_grad(&self, mode: ModeIndex) -> [f64; 3] {
        let amp = self.amplitude(mode);
        let g = self.amplitude_grad(mode);
        [0, 1, 2].map(|a| 2.0 * (amp.conj() * g[a]).re)
    }
}

fn single_mode_basis(mode: ModeIndex) -> ModeBasis {
    ModeBasis::new(mode.j.max(mode.l)).expect("mode order within supported range")
}

/// `⟨φ_{j,l}|ψ⟩` including the `kzr` phase.
pub fn channel_overlap(mode: ModeIndex, src: &PointSource, kzr: f64) -> Complex64 {
    let amp = SourceAmplitudes::new(&single_mode_basis(mode), src).amplitude(mode);
    amp * c(0.0, -kzr * src.dz).exp()
}

/// `|⟨φ_{j,l}|ψ⟩|²`; independent of `kzr`.
pub fn channel_prob(mode: ModeIndex, src: &PointSource, _kzr: f64) -> f64 {
    SourceAmplitudes::new(&single_mode_basis(mode), src).prob(mode)
}

pub fn channel_prob_grad(mode: ModeIndex, src: &PointSource, _kzr: f64, axis: Axis) -> f64 {
    SourceAmplitudes::new(&single_mode_basis(mode), src).prob_grad(mode)[axis.index()]
}

/// Scene-averaged channel probabilities over a basis plus the remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTable {
    pub modes: Vec<ModeIndex>,
    pub probs: Vec<f64>,
    pub remainder: f64,
}

impl ChannelTable {
    pub fn get(&self, mode: ModeIndex) -> Option<f64> {
        self.modes.iter().position(|&m| m == mode).map(|k| self.probs[k])
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.remainder
    }

    /// Probabilities followed by the remainder.
    pub fn with_remainder(&self) -> Vec<f64> {
        let mut out = self.probs.clone();
        out.push(self.remainder);
        out
    }
}

fn clamped_remainder(total: f64) -> f64 {
    let rem = 1.0 - total;
    if rem < -REMAINDER_SLACK {
        warn!("mode probabilities exceed one by {:.3e}; clamping remainder to zero", -rem);
    }
    rem.max(0.0)
}

/// Per-source amplitudes of a scene over a basis.
#[derive(Debug, Clone)]
pub struct SceneModes {
    pub modes: Vec<ModeIndex>,
    pub sources: Vec<SourceAmplitudes>,
}

impl SceneModes {
    pub fn new(scene: &Scene, basis: &ModeBasis) -> Self {
        Self {
            modes: basis.modes().to_vec(),
            sources: scene.sources().iter().map(|s| SourceAmplitudes::new(basis, s)).collect(),
        }
    }

    pub fn table(&self) -> ChannelTable {
        let weight = 1.0 / self.sources.len() as f64;
        let probs: Vec<f64> =
            self.modes.iter().map(|&m| self.sources.iter().map(|s| s.prob(m)).sum::<f64>() * weight).collect();
        let remainder = clamped_remainder(probs.iter().sum());
        ChannelTable { modes: self.modes.clone(), probs, remainder }
    }
}

pub fn scene_channel_table(scene: &Scene, basis: &ModeBasis) -> ChannelTable {
    SceneModes::new(scene, basis).table()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsOptions {
    /// Add the `1 − Σ P` channel to the Fisher sum.
    pub include_remainder: bool,
    pub zero_floor: f64,
}

impl Default for MsOptions {
    fn default() -> Self {
        Self { include_remainder: false, zero_floor: ZERO_CHANNEL_FLOOR }
    }
}

/// Fisher information carried by one channel; `mode == None` is the remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeContribution {
    pub mode: Option<ModeIndex>,
    pub prob: f64,
    pub fisher: FisherMatrix,
}

impl ModeContribution {
    pub fn label(&self) -> String {
        self.mode.map_or_else(|| "rem".to_string(), |m| m.label())
    }
}

/// Per-channel contributions to the mode-sorting FIM, optionally mapped
/// through a Jacobian. They sum to [`fim_ms`].
///
/// A channel with `P < zero_floor` contributes the limit of `(∂P)²/P` for a
/// probability vanishing quadratically, `(4/V) Re Σ_v ∂_a c_v* ∂_b c_v`.
pub fn fim_ms_contributions(
    scene: &Scene,
    basis: &ModeBasis,
    params: &[ParamIndex],
    jacobian: Option<&Jacobian>,
    opts: &MsOptions,
) -> Result<Vec<ModeContribution>> {
    scene.check_params(params)?;
    let sm = SceneModes::new(scene, basis);
    let v = scene.len() as f64;
    let m = params.len();
    let names = labels(params);
    let mut out = Vec::with_capacity(sm.modes.len() + 1);
    let mut total_prob = 0.0;
    let mut total_grad = vec![0.0; m];

    for &mode in &sm.modes {
        let prob = sm.sources.iter().map(|s| s.prob(mode)).sum::<f64>() / v;
        let grads: Vec<[Complex64; 3]> = sm.sources.iter().map(|s| s.amplitude_grad(mode)).collect();
        let amps: Vec<Complex64> = sm.sources.iter().map(|s| s.amplitude(mode)).collect();
        let grad: Vec<f64> =
            params.iter().map(|p| 2.0 * (amps[p.source].conj() * grads[p.source][p.axis.index()]).re / v).collect();
        total_prob += prob;
        for (t, g) in total_grad.iter_mut().zip(&grad) {
            *t += g;
        }
        let mut f = RMatrix::zeros(m, m);
        if prob >= opts.zero_floor {
            for a in 0..m {
                for b in 0..m {
                    f[(a, b)] = grad[a] * grad[b] / prob;
                }
            }
        } else {
            for (a, pa) in params.iter().enumerate() {
                for (b, pb) in params.iter().enumerate() {
                    if pa.source == pb.source {
                        let ga = grads[pa.source][pa.axis.index()];
                        let gb = grads[pb.source][pb.axis.index()];
                        f[(a, b)] = 4.0 * (ga.conj() * gb).re / v;
                    }
                }
            }
        }
        out.push(ModeContribution { mode: Some(mode), prob, fisher: FisherMatrix::new(names.clone(), f)? });
    }

    if opts.include_remainder {
        let prob = clamped_remainder(total_prob);
        let mut f = RMatrix::zeros(m, m);
        if prob >= opts.zero_floor {
            for a in 0..m {
                for b in 0..m {
                    f[(a, b)] = total_grad[a] * total_grad[b] / prob;
                }
            }
        }
        out.push(ModeContribution { mode: None, prob, fisher: FisherMatrix::new(names.clone(), f)? });
    }

    if let Some(jac) = jacobian {
        for c in &mut out {
            c.fisher = reparametrize(&c.fisher, jac)?;
        }
    }
    Ok(out)
}

/// Mode-sorting Fisher information per detected photon.
pub fn fim_ms(
    scene: &Scene,
    basis: &ModeBasis,
    params: &[ParamIndex],
    jacobian: Option<&Jacobian>,
    opts: &MsOptions,
) -> Result<FisherMatrix> {
    let parts = fim_ms_contributions(scene, basis, params, jacobian, opts)?;
    let names = match jacobian {
        Some(j) => j.target_params.clone(),
        None => labels(params),
    };
    let n = names.len();
    let total = parts.iter().fold(RMatrix::zeros(n, n), |acc, c| acc + &c.fisher.matrix);
    FisherMatrix::new(names, total)
}
