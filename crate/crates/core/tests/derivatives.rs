//! Analytic derivatives against finite differences of the base quantities.

use qsurf::direct_imaging::{source_intensity, source_intensity_grad};
use qsurf::linalg::c;
use qsurf::modesort::{channel_prob_grad, ModeIndex};
use qsurf::oracle::{central, fd_channel_prob, fd_dpsi_dpsi, fd_dpsi_psi, fd_psi_dpsi, relative_error};
use qsurf::psf::{overlap_dpsi_dpsi, overlap_dpsi_psi, overlap_psi_dpsi, overlap_psi_psi, Axis, PointSource};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_source(rng: &mut ChaCha8Rng, half: f64) -> PointSource {
    PointSource::new(rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(-half..half))
}

#[test]
fn overlap_derivatives_on_random_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for kzr in [10.0, 1000.0] {
        let (mut first, mut second) = (0.0_f64, 0.0_f64);
        for _ in 0..60 {
            let v = random_source(&mut rng, 3.0);
            let u = random_source(&mut rng, 3.0);
            for a in Axis::ALL {
                first = first.max(relative_error(overlap_dpsi_psi(&v, a, &u, kzr), fd_dpsi_psi(&v, a, &u, kzr)));
                first = first.max(relative_error(overlap_psi_dpsi(&v, &u, a, kzr), fd_psi_dpsi(&v, &u, a, kzr)));
                for b in Axis::ALL {
                    second = second
                        .max(relative_error(overlap_dpsi_dpsi(&v, a, &u, b, kzr), fd_dpsi_dpsi(&v, a, &u, b, kzr)));
                }
            }
        }
        assert!(first < 1e-6, "kzr {kzr}: first order {first:e}");
        assert!(second < 1e-5, "kzr {kzr}: second order {second:e}");
    }
}

#[test]
fn coincident_sources() {
    let p = PointSource::new(0.2, -0.4, 0.7);
    for kzr in [10.0, 1000.0] {
        for a in Axis::ALL {
            assert!(relative_error(overlap_dpsi_psi(&p, a, &p, kzr), fd_dpsi_psi(&p, a, &p, kzr)) < 1e-6);
            for b in Axis::ALL {
                let e = relative_error(overlap_dpsi_dpsi(&p, a, &p, b, kzr), fd_dpsi_dpsi(&p, a, &p, b, kzr));
                assert!(e < 1e-5, "{a:?}{b:?} kzr {kzr}: {e:e}");
            }
        }
    }
}

#[test]
fn hermitian_pairing() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let v = random_source(&mut rng, 2.0);
        let u = random_source(&mut rng, 2.0);
        assert!((overlap_psi_psi(&v, &u, 100.0) - overlap_psi_psi(&u, &v, 100.0).conj()).norm() < 1e-15);
        for a in Axis::ALL {
            let lhs = overlap_dpsi_psi(&v, a, &u, 100.0);
            let rhs = overlap_psi_dpsi(&u, &v, a, 100.0).conj();
            assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
            for b in Axis::ALL {
                let lhs = overlap_dpsi_dpsi(&v, a, &u, b, 100.0);
                let rhs = overlap_dpsi_dpsi(&u, b, &v, a, 100.0).conj();
                assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
            }
        }
    }
}

#[test]
fn transverse_tangent_sign() {
    // ⟨∂_x ψ_v|ψ_u⟩ at Δx = 1, Δz = 0 equals −½ e^{−1/4}
    let v = PointSource::new(1.0, 0.0, 0.0);
    let got = overlap_dpsi_psi(&v, Axis::X, &PointSource::ORIGIN, 100.0);
    assert!((got - c(-0.5 * (-0.25f64).exp(), 0.0)).norm() < 1e-14);
}

#[test]
fn channel_gradients_on_random_sources() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let src = random_source(&mut rng, 2.0);
        let mode = ModeIndex::new(rng.gen_range(0..=6), rng.gen_range(0..=6));
        for a in Axis::ALL {
            worst = worst.max(relative_error(
                c(channel_prob_grad(mode, &src, 100.0, a), 0.0),
                c(fd_channel_prob(mode, &src, 100.0, a), 0.0),
            ));
        }
    }
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn intensity_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..100 {
        let src = random_source(&mut rng, 2.0);
        let (x, y) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let g = source_intensity_grad(&src, x, y);
        for a in Axis::ALL {
            let fd = central(|t| source_intensity(&src.shifted(a, t), x, y), 1e-4);
            let e = relative_error(c(g[a.index()], 0.0), c(fd, 0.0));
            assert!(e < 1e-8, "{a:?} at {src:?}: {e:e}");
        }
    }
}
