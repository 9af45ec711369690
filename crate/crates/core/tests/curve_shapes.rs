//! Ordinal properties of the information curves.

use qsurf::crack::{build_crack, crack_jacobian, crack_params, CrackSpec};
use qsurf::direct_imaging::fim_di;
use qsurf::modesort::{fim_ms_contributions, ModeBasis, ModeIndex, MsOptions};
use qsurf::quadrature::QuadratureGrid;

fn crack(dx: f64, dz: f64) -> qsurf::psf::Scene {
    build_crack(&CrackSpec::new(dx, dz, 100.0).unwrap()).unwrap()
}

#[test]
fn direct_imaging_depth_information_peaks_near_one_rayleigh_length() {
    let quad = QuadratureGrid::default();
    let (p, j) = (crack_params(), crack_jacobian());
    let depth: Vec<(f64, f64)> = (1..=30)
        .map(|k| {
            let dz = 0.1 * k as f64;
            (dz, fim_di(&crack(0.5, dz), &p, &quad, Some(&j)).unwrap().matrix[(1, 1)])
        })
        .collect();
    let (peak, _) = depth.iter().cloned().fold((0.0, f64::NEG_INFINITY), |m, d| if d.1 > m.1 { d } else { m });
    assert!((0.8..=1.6).contains(&peak), "peak at dz = {peak}");
}

fn share(dx: f64, dz: f64, axis: usize, modes: &[ModeIndex]) -> f64 {
    let parts = fim_ms_contributions(
        &crack(dx, dz),
        &ModeBasis::default(),
        &crack_params(),
        Some(&crack_jacobian()),
        &MsOptions::default(),
    )
    .unwrap();
    let total: f64 = parts.iter().map(|c| c.fisher.matrix[(axis, axis)]).sum();
    let picked: f64 = parts
        .iter()
        .filter(|c| c.mode.is_some_and(|m| modes.contains(&m)))
        .map(|c| c.fisher.matrix[(axis, axis)])
        .sum();
    picked / total
}

#[test]
fn width_information_concentrates_in_first_transverse_mode() {
    let m10 = [ModeIndex::new(1, 0)];
    let near = share(0.02, 0.02, 0, &m10);
    let far = share(2.0, 0.02, 0, &m10);
    assert!(near > 0.99, "share at small width {near}");
    assert!(far < near, "information spreads at larger width: {far}");
}

#[test]
fn depth_information_splits_between_second_order_modes() {
    let parts = fim_ms_contributions(
        &crack(0.02, 0.02),
        &ModeBasis::default(),
        &crack_params(),
        Some(&crack_jacobian()),
        &MsOptions::default(),
    )
    .unwrap();
    let f = |j, l| parts.iter().find(|c| c.mode == Some(ModeIndex::new(j, l))).unwrap().fisher.matrix[(1, 1)];
    let (f20, f02) = (f(2, 0), f(0, 2));
    assert!((f20 / f02 - 1.0).abs() < 0.05, "(2,0) {f20} vs (0,2) {f02}");
    assert!(share(0.02, 0.02, 1, &[ModeIndex::new(2, 0), ModeIndex::new(0, 2)]) > 0.95);
}
