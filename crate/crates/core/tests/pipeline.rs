//! Cross-module checks: characteristic functions against distributions,
//! delta series against Fock matrices, and filters against direct
//! convolution.

use phasespace::charfn::CharFn;
use phasespace::deltaseries::{pair, series_from_fock, TaylorField};
use phasespace::filters::{filtered_p_numeric, FilterKernel};
use phasespace::numerics::{fourier_inverse, quad2d, Domain, PhaseGrid, PhasePoint};
use phasespace::states::{make_state, StateSpec};
use phasespace::Complex64;

#[test]
fn inverse_transform_of_sampled_phi_is_regular_p() {
    for spec in [StateSpec::thermal(0.5), StateSpec::spats(1.0), StateSpec::thermal(1.0).displaced(PhasePoint::new(0.5, -0.3))] {
        let state = make_state(spec).unwrap();
        let phi = CharFn::new(&state).sample(&PhaseGrid::new(7.0, 301).unwrap()).unwrap();
        let target = PhaseGrid::new(2.0, 21).unwrap();
        let p = fourier_inverse(&phi, &target, 1e-8).unwrap();
        for (k, v) in p.values().unwrap().iter().enumerate() {
            let a = target.point_at(k);
            assert!((v.re - state.regular_p(a).unwrap()).abs() < 1e-8, "{state} at {a:?}");
            assert!(v.im.abs() < 1e-8);
        }
    }
}

#[test]
fn delta_series_pairs_back_to_populations() {
    let psi: Vec<Complex64> = [0.6, 0.0, -0.48, 0.64].iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let state = make_state(StateSpec::squeezed(0.4)).unwrap();
    for fock in [phasespace::states::FockMatrix::from_pure(&psi), state.fock_matrix(40).unwrap()] {
        let series = series_from_fock(&fock, fock.cutoff() as u32).unwrap();
        for k in 0..4u32 {
            let got = pair(&series, &TaylorField::fock_weight(k)).unwrap().value;
            let want = fock.get(k as usize, k as usize);
            assert!((got - want).norm() < 1e-9, "k = {k}: {got} vs {want}");
        }
    }
}

#[test]
fn filtered_spats_matches_direct_convolution() {
    let state = make_state(StateSpec::spats(1.0)).unwrap();
    let kernel = FilterKernel::box_filter(2.0).unwrap();
    let grid = PhaseGrid::new(2.0, 9).unwrap();
    let filtered = filtered_p_numeric(&state, &kernel, &grid).unwrap();
    let conv_grid = PhaseGrid::new(7.0, 281).unwrap();
    for (k, v) in filtered.field.values().unwrap().iter().enumerate() {
        let a = grid.point_at(k);
        let direct = quad2d(
            |b| {
                let d = PhasePoint::new(a.x - b.x, a.p - b.p);
                Complex64::new(state.regular_p(b).unwrap() * kernel.omega_alpha(d), 0.0)
            },
            Domain::Grid(conv_grid),
            1e-8,
        )
        .unwrap();
        assert!((v.re - direct.re()).abs() < 1e-8, "at {a:?}: {} vs {}", v.re, direct.re());
    }
}
