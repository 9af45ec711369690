//! Finite-difference reference values built only from `⟨ψ_v|ψ_u⟩` and the
//! channel probabilities. Used by the self-test and the test suites.

use num_complex::Complex64;

use crate::modesort::{channel_prob, ModeIndex};
use crate::psf::{overlap_psi_psi, Axis, PointSource};

/// Values smaller than this are compared absolutely.
pub const COMPARISON_FLOOR: f64 = 1e-3;

/// `|a − b| / max(|a|, |b|, COMPARISON_FLOOR)`.
pub fn relative_error(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(COMPARISON_FLOOR)
}

/// Step for a first derivative. Axial steps shrink with `kzr` so the phase
/// `e^{i·kzr·Δz}` stays resolved.
pub fn first_order_step(axis: Axis, kzr: f64) -> f64 {
    match axis {
        Axis::Z => 1e-5_f64.min(1e-3 / kzr),
        _ => 1e-5,
    }
}

pub fn second_order_step(axis: Axis, kzr: f64) -> f64 {
    match axis {
        Axis::Z => 1e-4_f64.min(1e-2 / kzr),
        _ => 1e-4,
    }
}

/// Fourth-order central difference `(−f(2h) + 8f(h) − 8f(−h) + f(−2h)) / 12h`.
pub fn central<T>(f: impl Fn(f64) -> T, h: f64) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    (f(h) * 8.0 - f(-h) * 8.0 - f(2.0 * h) + f(-2.0 * h)) * (1.0 / (12.0 * h))
}

/// Reference for `⟨∂_a ψ_v|ψ_u⟩`.
pub fn fd_dpsi_psi(v: &PointSource, axis: Axis, u: &PointSource, kzr: f64) -> Complex64 {
    central(|t| overlap_psi_psi(&v.shifted(axis, t), u, kzr), first_order_step(axis, kzr))
}

/// Reference for `⟨ψ_v|∂_b ψ_u⟩`.
pub fn fd_psi_dpsi(v: &PointSource, u: &PointSource, axis: Axis, kzr: f64) -> Complex64 {
    central(|t| overlap_psi_psi(v, &u.shifted(axis, t), kzr), first_order_step(axis, kzr))
}

/// Reference for `⟨∂_a ψ_v|∂_b ψ_u⟩` as a mixed second difference.
pub fn fd_dpsi_dpsi(v: &PointSource, axis_a: Axis, u: &PointSource, axis_b: Axis, kzr: f64) -> Complex64 {
    let ha = second_order_step(axis_a, kzr);
    let hb = second_order_step(axis_b, kzr);
    central(|s| central(|t| overlap_psi_psi(&v.shifted(axis_a, s), &u.shifted(axis_b, t), kzr), hb), ha)
}

/// Reference for `∂P_{j,l}/∂θ`.
pub fn fd_channel_prob(mode: ModeIndex, src: &PointSource, kzr: f64, axis: Axis) -> f64 {
    central(|t| channel_prob(mode, &src.shifted(axis, t), kzr), 1e-5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_is_fourth_order() {
        let d = central(|t| (1.0 + t).powi(5), 1e-2);
        assert!((d - 5.0).abs() < 1e-7);
    }
}
