//! Fast invariant checks run by `qsurf selftest`.

use crate::crack::{build_crack, crack_jacobian, crack_params, CrackSpec};
use crate::direct_imaging::{chernoff_di, fim_di};
use crate::error::Result;
use crate::hypothesis::{chernoff_ms, embed_states, fidelity_direct, fidelity_trace_norm, qcb, qcb_fidelity_bound};
use crate::linalg::{c, HermitianEigen, RMatrix};
use crate::modesort::{channel_prob_grad, fim_ms, scene_channel_table, ModeBasis, ModeIndex, MsOptions};
use crate::oracle::{fd_channel_prob, fd_dpsi_dpsi, fd_dpsi_psi, relative_error};
use crate::psf::{assemble_gram, overlap_dpsi_dpsi, overlap_dpsi_psi, Axis, ParamIndex, PointSource, Scene};
use crate::qfim::{qfim_embedding_oracle, qfim_general, qfim_reduced, reparametrize, Jacobian};
use crate::quadrature::QuadratureGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check { name, passed: value <= limit, detail: format!("{value:.3e} (limit {limit:.1e})") }
}

fn run_one(name: &'static str, f: impl FnOnce() -> Result<Check>) -> Check {
    f().unwrap_or_else(|e| Check { name, passed: false, detail: format!("error: {e}") })
}

fn sample_scenes() -> Result<Vec<Scene>> {
    Ok(vec![
        Scene::new(vec![PointSource::new(0.3, -0.2, 0.4)], 10.0)?,
        Scene::new(vec![PointSource::new(-0.5, 0.1, 0.0), PointSource::new(0.6, 0.0, -0.7)], 1000.0)?,
        Scene::new(
            vec![PointSource::new(-1.0, 0.3, 0.2), PointSource::new(0.2, -0.8, 1.1), PointSource::new(0.9, 0.5, -0.4)],
            100.0,
        )?,
    ])
}

pub fn run() -> Vec<Check> {
    let basis = ModeBasis::default();
    let quad = QuadratureGrid::default();
    vec![
        run_one("single-source transverse QFI = 2", || {
            let s = Scene::new(vec![PointSource::ORIGIN], 100.0)?;
            let h = qfim_reduced(&s, &[ParamIndex::new(0, Axis::X), ParamIndex::new(0, Axis::Y)])?;
            let err = (&h.matrix - RMatrix::from_diagonal_element(2, 2, 2.0)).abs().max();
            Ok(check("single-source transverse QFI = 2", err, 1e-9))
        }),
        run_one("QFIM paths agree", || {
            let mut worst = 0.0_f64;
            for s in sample_scenes()? {
                let p = s.all_params();
                let a = qfim_reduced(&s, &p)?;
                worst = worst.max(a.relative_distance(&qfim_general(&s, &p)?));
                worst = worst.max(a.relative_distance(&qfim_embedding_oracle(&s, &p)?));
            }
            Ok(check("QFIM paths agree", worst, 1e-8))
        }),
        run_one("two-source separation QFI = 1/2", || {
            let mut worst = 0.0_f64;
            for d in [0.1, 1.0, 4.0] {
                let s =
                    Scene::new(vec![PointSource::new(-d / 2.0, 0.0, 0.0), PointSource::new(d / 2.0, 0.0, 0.0)], 100.0)?;
                let jac = Jacobian::new(
                    RMatrix::from_row_slice(1, 2, &[-0.5, 0.5]),
                    vec!["dx1".into(), "dx2".into()],
                    vec!["d".into()],
                )?;
                let h = reparametrize(
                    &qfim_embedding_oracle(&s, &[ParamIndex::new(0, Axis::X), ParamIndex::new(1, Axis::X)])?,
                    &jac,
                )?;
                worst = worst.max((h.matrix[(0, 0)] - 0.5).abs());
            }
            Ok(check("two-source separation QFI = 1/2", worst, 1e-6))
        }),
        run_one("overlaps match finite differences", || {
            let v = PointSource::new(0.4, -0.3, 0.5);
            let u = PointSource::new(-0.2, 0.6, -0.8);
            let mut worst = 0.0_f64;
            for kzr in [10.0, 1000.0] {
                for a in Axis::ALL {
                    worst = worst.max(relative_error(overlap_dpsi_psi(&v, a, &u, kzr), fd_dpsi_psi(&v, a, &u, kzr)));
                    for b in Axis::ALL {
                        worst = worst
                            .max(relative_error(overlap_dpsi_dpsi(&v, a, &u, b, kzr), fd_dpsi_dpsi(&v, a, &u, b, kzr)));
                    }
                }
            }
            Ok(check("overlaps match finite differences", worst, 1e-5))
        }),
        run_one("Gram matrix is positive semidefinite", || {
            let mut lowest = 0.0_f64;
            for s in sample_scenes()? {
                lowest = lowest.min(HermitianEigen::new(&assemble_gram(&s)?.full()).min());
            }
            Ok(check("Gram matrix is positive semidefinite", -lowest, 1e-10))
        }),
        run_one("channel gradients match finite differences", || {
            let src = PointSource::new(0.5, -0.2, 0.3);
            let mut worst = 0.0_f64;
            for mode in [ModeIndex::new(0, 0), ModeIndex::new(1, 0), ModeIndex::new(2, 0), ModeIndex::new(1, 2)] {
                for a in Axis::ALL {
                    worst = worst.max(relative_error(
                        c(channel_prob_grad(mode, &src, 100.0, a), 0.0),
                        c(fd_channel_prob(mode, &src, 100.0, a), 0.0),
                    ));
                }
            }
            Ok(check("channel gradients match finite differences", worst, 1e-6))
        }),
        run_one("channel table closes", || {
            let s = build_crack(&CrackSpec::new(1.0, 0.8, 100.0)?)?;
            let t = scene_channel_table(&s, &basis);
            Ok(check("channel table closes", (t.total() - 1.0).abs(), 1e-12))
        }),
        run_one("QFIM dominates classical FIMs", || {
            let s = build_crack(&CrackSpec::new(0.6, 0.4, 100.0)?)?;
            let p = crack_params();
            let h = qfim_reduced(&s, &p)?;
            let ms = fim_ms(&s, &basis, &p, None, &MsOptions::default())?;
            let di = fim_di(&s, &p, &quad, None)?;
            let lowest = h.excess_over(&ms)?[0].min(h.excess_over(&di)?[0]);
            Ok(check("QFIM dominates classical FIMs", -lowest, 1e-8))
        }),
        run_one("Chernoff ordering", || {
            let (dx, dz) = (0.8, 0.5);
            let q = qcb(&embed_states(dx, dz, 100.0)?).xi;
            let ms = chernoff_ms(dx, dz, 100.0, &basis, true)?.xi;
            let spec = CrackSpec::new(dx, dz, 100.0)?;
            let (di, _) = chernoff_di(&build_crack(&spec.flat())?, &build_crack(&spec)?, &quad)?;
            let bound = qcb_fidelity_bound(dx, dz, 100.0)?;
            let violation = (ms - q).max(di - q).max(q - bound).max(0.0);
            Ok(check("Chernoff ordering", violation, 1e-9))
        }),
        run_one("fidelity paths agree", || {
            let a = fidelity_trace_norm(1.2, 0.7, 100.0)?;
            let b = fidelity_direct(&embed_states(1.2, 0.7, 100.0)?);
            Ok(check("fidelity paths agree", (a - b).abs(), 1e-9))
        }),
        run_one("kzr gauge invariance", || {
            let jac = crack_jacobian();
            let p = crack_params();
            let h = |kzr: f64| -> Result<RMatrix> {
                let s = build_crack(&CrackSpec::new(0.7, 0.9, kzr)?)?;
                Ok(reparametrize(&qfim_reduced(&s, &p)?, &jac)?.matrix)
            };
            let qfim = (h(10.0)? - h(1000.0)?).abs().max();
            let xi = (qcb(&embed_states(0.7, 0.9, 10.0)?).xi - qcb(&embed_states(0.7, 0.9, 1000.0)?).xi).abs();
            Ok(check("kzr gauge invariance", qfim.max(xi), 1e-8))
        }),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
