use std::sync::Arc;

use noisehop_core::lindblad::{evolve, find_stationary, Method, StationaryOptions};
use noisehop_core::models::{ChainSpec, ModelTerms};
use noisehop_core::observables::{alpha_1d, theta_asymptote};
use noisehop_core::operators::{build_space, SectorBasis, SiteKind};
use noisehop_core::oracle::{population_diffusion, SetWalk};
use noisehop_core::state::{max_abs_difference, DensityMatrix, StateVector};
use noisehop_core::C64;
use proptest::prelude::*;

const EXP: Method = Method::Exponential { tol: 1e-13 };

fn chain(n: usize, gamma: Vec<f64>) -> ChainSpec {
    let mut spec = ChainSpec::uniform(n, SiteKind::Tls, 1.0);
    spec.gamma = gamma;
    spec
}

fn rates(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.2f64..3.0, n - 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn populations_follow_the_walk((n, gamma, w, t) in (2usize..6).prop_flat_map(|n| {
        (Just(n), rates(n), prop::collection::vec(0.0f64..1.0, 1 << n), 0.0f64..8.0)
    })) {
        let space = build_space(n, SiteKind::Tls).unwrap();
        let basis = Arc::new(SectorBasis::full(&space).unwrap());
        let s: f64 = w.iter().sum::<f64>() + 1e-12;
        let w: Vec<f64> = w.iter().map(|x| (x + 1e-12 / w.len() as f64) / s).collect();
        let rho0 = DensityMatrix::diagonal(basis.clone(), &w).unwrap();
        let model = ModelTerms::simple_tls(&chain(n, gamma.clone())).unwrap().realize(&basis).unwrap();
        let series = evolve(&model, &rho0, &[0.0, t], EXP).unwrap();
        let got = series.states[1].populations();
        let want = population_diffusion(&rho0.populations(), &gamma, t).unwrap();
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        prop_assert!((series.states[1].excitation() - rho0.excitation()).abs() < 1e-11);
    }

    #[test]
    fn basis_states_follow_the_set_walk((n, gamma, k, t) in (3usize..7).prop_flat_map(|n| {
        (Just(n), rates(n), 1usize..n, 0.0f64..4.0)
    })) {
        let k = k.min(4);
        let space = build_space(n, SiteKind::Tls).unwrap();
        let mut label = vec![0u8; n];
        label[..k].iter_mut().for_each(|o| *o = 1);
        let psi = StateVector::basis_state(&space, &label).unwrap();
        let model = ModelTerms::simple_tls(&chain(n, gamma.clone())).unwrap().realize(psi.basis()).unwrap();
        let series = evolve(&model, &psi.to_density(), &[0.0, t], EXP).unwrap();
        let rho = &series.states[1];
        let walk = SetWalk::new(&gamma, k).unwrap();
        let mut c0 = vec![0.0; walk.subsets().len()];
        c0[0] = 1.0;
        let corr = walk.evolve(&c0, t).unwrap();
        // With exactly k excitations, ⟨Π_{j∈K} n_j⟩ is the weight of the basis state K.
        for (set, c) in walk.subsets().iter().zip(&corr) {
            let mut l = vec![0u8; n];
            set.iter().for_each(|&j| l[j - 1] = 1);
            let got = rho.element(&l, &l).re;
            prop_assert!((got - c).abs() < 1e-9, "{set:?}: {got} vs {c}");
        }
    }
}

#[test]
fn phase_mixtures_reach_the_theta_asymptote() {
    let mut seed = 0x9e3779b97f4a7c15u64;
    let mut next = || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        (seed >> 11) as f64 / (1u64 << 53) as f64
    };
    for case in 0..20 {
        let n = 4 + case % 3;
        let thetas: Vec<f64> = (0..n).map(|_| std::f64::consts::TAU * next()).collect();
        let space = build_space(n, SiteKind::Tls).unwrap();
        let rho0 = DensityMatrix::phase_mixture(&space, &thetas).unwrap();
        let model = ModelTerms::simple_tls(&ChainSpec::uniform(n, SiteKind::Tls, 1.0))
            .unwrap()
            .realize(rho0.basis())
            .unwrap();
        let stat = find_stationary(&model, &rho0, StationaryOptions::default()).unwrap();
        let (_, want) = theta_asymptote(&space, &thetas).unwrap();
        let d = max_abs_difference(&stat.state, &want).unwrap();
        assert!(d < 1e-9, "case {case}: {d}");
        // Σα is conserved, so the flat profile carries the initial sum.
        let s0: C64 = alpha_1d(&rho0).iter().sum();
        let s1: C64 = alpha_1d(&stat.state).iter().sum();
        assert!((s0 - s1).norm() < 1e-10);
    }
}

#[test]
fn a_single_hole_diffuses_like_a_particle() {
    let n = 6;
    let gamma = vec![0.8, 1.4, 1.0, 0.6, 1.2];
    let space = build_space(n, SiteKind::Tls).unwrap();
    let mut label = vec![1u8; n];
    label[1] = 0;
    let psi = StateVector::basis_state(&space, &label).unwrap();
    let model = ModelTerms::simple_tls(&chain(n, gamma.clone())).unwrap().realize(psi.basis()).unwrap();
    let times = [0.0, 0.3, 1.0, 2.5, 6.0];
    let series = evolve(&model, &psi.to_density(), &times, EXP).unwrap();
    let mut h0 = vec![0.0; n];
    h0[1] = 1.0;
    for (t, rho) in times.iter().zip(&series.states) {
        let holes: Vec<f64> = rho.populations().iter().map(|x| 1.0 - x).collect();
        let want = population_diffusion(&h0, &gamma, *t).unwrap();
        for (a, b) in holes.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "t = {t}: {a} vs {b}");
        }
    }
}
