use nls_core::dynamics::PropagatorState;
use nls_core::field::{self, ComplexField, Grid, GridSpec};
use nls_core::ground_state::{self, GroundState};
use nls_core::observables;
use nls_core::physics::{ModelParams, Nonlinearity, Potential};
use num_complex::Complex64;
use proptest::prelude::*;

fn line(l: f64, n: usize) -> Grid {
    GridSpec::cube(1, l, n).unwrap().build().unwrap()
}

fn values(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n).prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

/// Smooth, localized data: a boosted Gaussian bump.
fn bump(grid: &Grid, amp: f64, center: f64, width: f64, k: f64) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        let y = (x[0] - center) / width;
        Complex64::from_polar(amp * (-y * y).exp(), k * x[0])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fft_round_trip_and_parseval(v in values(64)) {
        let grid = line(5.0, 64);
        let mut data = v.clone();
        grid.forward(&mut data);
        let spectral: f64 = data.iter().map(|c| c.norm_sqr()).sum();
        let physical: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((spectral / 64.0 - physical).abs() <= 1e-12 * physical.max(1.0));
        grid.inverse(&mut data);
        for (a, b) in data.iter().zip(&v) {
            prop_assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn laplacian_is_linear(a in values(32), b in values(32), s in -3.0..3.0f64, t in -3.0..3.0f64) {
        let grid = line(2.0, 32);
        let f = ComplexField::new(&grid, a).unwrap();
        let g = ComplexField::new(&grid, b).unwrap();
        let combo = ComplexField::new(
            &grid,
            f.values().iter().zip(g.values()).map(|(x, y)| x * s + y * t).collect(),
        )
        .unwrap();
        let lhs = field::laplacian(&combo);
        let (lf, lg) = (field::laplacian(&f), field::laplacian(&g));
        let scale = lhs.sup_norm().max(1.0);
        for ((l, x), y) in lhs.values().iter().zip(lf.values()).zip(lg.values()) {
            prop_assert!((l - (x * s + y * t)).norm() <= 1e-11 * scale);
        }
    }

    #[test]
    fn strang_step_is_gauge_covariant(theta in 0.0..std::f64::consts::TAU, amp in 0.3..1.5f64, k in -2.0..2.0f64) {
        let grid = line(10.0, 256);
        let params = ModelParams::new(0.7, 1.0, 1.0).unwrap();
        let nl = Nonlinearity::cubic();
        let pot = Potential::harmonic(0.5).unwrap();
        let psi = bump(&grid, amp, 0.5, 1.0, k);
        let rot = Complex64::from_polar(1.0, theta);
        let mut a = PropagatorState::new(psi.clone(), params, nl.clone(), pot.clone(), 0.01).unwrap();
        let mut b = PropagatorState::new(psi.scaled(rot), params, nl, pot, 0.01).unwrap();
        for _ in 0..10 {
            a.step_strang().unwrap();
            b.step_strang().unwrap();
        }
        for (x, y) in a.psi.values().iter().zip(b.psi.values()) {
            prop_assert!((x * rot - y).norm() < 1e-12);
        }
    }

    #[test]
    fn strang_steps_conserve_charge(amp in 0.3..2.0f64, k in -3.0..3.0f64, width in 0.3..1.5f64, lambda in 0.0..0.2f64) {
        let grid = line(10.0, 256);
        let params = ModelParams::new(0.5, 1.0, 1.0).unwrap();
        let psi = bump(&grid, amp, -0.5, width, k);
        let c0 = observables::charge(&psi);
        let mut s = PropagatorState::new(psi, params, Nonlinearity::cubic(), Potential::quartic(lambda).unwrap(), 2e-3).unwrap();
        for _ in 0..50 {
            s.step_strang().unwrap();
        }
        prop_assert!((observables::charge(&s.psi) / c0 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rescaled_charge_is_h_to_the_n_beta(h in 0.2..1.0f64, alpha in 0.5..1.5f64) {
        let gs = ground_state::analytic_sech(2f64.sqrt(), &line(30.0, 1024)).unwrap();
        let params = ModelParams::new(h, alpha, gs.sigma).unwrap();
        let u = ground_state::rescale_to_physical(&gs, &params, &line(8.0, 4096)).unwrap();
        let expected = h.powf(1.0 + alpha / 2.0) * 2.0;
        prop_assert!((field::norm_sq_real(&u) / expected - 1.0).abs() < 1e-6);
    }

    #[test]
    fn energy_and_charge_are_translation_invariant(shift in -3.0..3.0f64, k in -1.0..1.0f64) {
        let grid = line(10.0, 512);
        let params = ModelParams::new(0.5, 1.0, 1.0).unwrap();
        let nl = Nonlinearity::cubic();
        let psi = bump(&grid, 1.0, 0.0, 0.5, k);
        let moved = psi.translated(&[shift]);
        let e0 = observables::energy_split(&psi, &params, &nl, &Potential::Zero).total;
        let e1 = observables::energy_split(&moved, &params, &nl, &Potential::Zero).total;
        prop_assert!((e1 - e0).abs() < 1e-9 * e0.abs().max(1.0));
        prop_assert!((observables::charge(&moved) / observables::charge(&psi) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn analytic_sech_solves_the_profile_equation() {
    let gs: GroundState = ground_state::analytic_sech(2f64.sqrt(), &line(30.0, 1024)).unwrap();
    assert!(gs.residual < 1e-8, "residual {:.3e}", gs.residual);
    let j = ground_state::rescaled_energy(&gs.profile, &Nonlinearity::cubic());
    assert!((j - gs.energy).abs() < 1e-10, "J = {j}");
    let mu = ground_state::lagrange_multiplier(&gs.profile, &Nonlinearity::cubic()).unwrap();
    assert!((mu - gs.mu).abs() < 1e-10, "mu = {mu}");
}
