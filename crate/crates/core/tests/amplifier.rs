use proptest::prelude::*;

use shuffle_amp::amplifier::{
    bound_report, delta_bound, delta_exact_smalln, family_delta, find_epsilon, find_epsilon_lower, self_convolve,
    LatticeDist, Rounding, StepRule,
};
use shuffle_amp::gparv::{gparv_lower, GparvFamily, StdCloneFamily};
use shuffle_amp::mechanism::Mechanism;
use shuffle_amp::probdist::FiniteDist;
use shuffle_amp::randomizers::{Kind, RandomizerSpec};
use shuffle_amp::Error;

fn krr(k: usize, eps0: f64) -> Mechanism {
    Mechanism::Randomizer(RandomizerSpec::krr(k, eps0).unwrap())
}

fn delta(f: &dyn GparvFamily, eps: f64, n: usize, step: f64, mode: Rounding) -> f64 {
    family_delta(f, eps, n, step, mode).unwrap().bound.delta
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn delta_is_non_increasing_in_eps(eps0 in 0.2f64..3.0, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0, n in 2usize..2000) {
        let m = krr(6, eps0);
        let fam = m.upper_family().unwrap();
        let step = StepRule::default().step(eps0);
        let (a, b) = (f1.min(f2) * eps0, f1.max(f2) * eps0);
        prop_assert!(delta(fam.as_ref(), b, n, step, Rounding::Up) <= delta(fam.as_ref(), a, n, step, Rounding::Up) + 1e-12);
    }

    #[test]
    fn refinement_tightens_both_sides(eps0 in 0.2f64..3.0, frac in 0.0f64..0.8, n in 2usize..3000) {
        let m = krr(4, eps0);
        let (up, low) = (m.upper_family().unwrap(), m.lower_family().unwrap());
        let eps = frac * eps0;
        let rule = StepRule::default();
        let (l, l2) = (rule.step(eps0), rule.halved().step(eps0));
        let (u1, u2) = (delta(up.as_ref(), eps, n, l, Rounding::Up), delta(up.as_ref(), eps, n, l2, Rounding::Up));
        let (d1, d2) = (delta(low.as_ref(), eps, n, l, Rounding::Down), delta(low.as_ref(), eps, n, l2, Rounding::Down));
        // transform roundoff is relative to the size of delta
        let slack = |x: f64| 1e-12 + 1e-9 * x;
        prop_assert!(u2 <= u1 + slack(u1), "{u1} -> {u2}");
        prop_assert!(d2 >= d1 - slack(d1), "{d1} -> {d2}");
        prop_assert!(d1 <= u1 + slack(u1));
    }

    #[test]
    fn lattice_brackets_exact_oracle(
        rows in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 4), 3),
        eps in 0.0f64..0.6,
        n in 1usize..=10,
        div in 10.0f64..500.0,
    ) {
        let d: Vec<FiniteDist> = rows
            .into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                FiniteDist::from_masses(r.into_iter().map(|x| x / s).collect()).unwrap()
            })
            .collect();
        let g = gparv_lower(&d[0], &d[1], &d[2], eps).unwrap();
        let step = g.eps0.exp_m1() / div;
        let exact = delta_exact_smalln(&g, n).unwrap();
        let up = delta_bound(&g, n, step, Rounding::Up).unwrap().delta;
        let down = delta_bound(&g, n, step, Rounding::Down).unwrap().delta;
        prop_assert!(down <= exact + 1e-12 && exact <= up + 1e-12, "{down} {exact} {up}");
        prop_assert!(up - down <= n as f64 * step);
    }
}

#[test]
fn exact_krr3_pair() {
    // k = 3, eps0 = ln 2, two users, eps = 0
    let m = krr(3, 2f64.ln());
    let fam = m.upper_family().unwrap();
    for g in fam.at(0.0).unwrap() {
        assert!((delta_exact_smalln(&g, 2).unwrap() - 3.0 / 16.0).abs() < 1e-15);
    }
    let r = bound_report(fam.as_ref(), None, 0.0, 2, 1e-3).unwrap();
    assert!((r.delta_upper - 3.0 / 16.0).abs() < 1e-12);
}

#[test]
fn experiments_row_neighbourhood() {
    // eps0 = 1.14 certifies (0.10, 1e-6); at 1.15 the lower bound already exceeds 1e-6
    let step = |e: f64| StepRule::default().step(e);
    let below = krr(10, 1.14).upper_family().unwrap();
    assert!(delta(below.as_ref(), 0.10, 1000, step(1.14), Rounding::Up) <= 1e-6);
    let above = krr(10, 1.15).lower_family().unwrap();
    assert!(delta(above.as_ref(), 0.10, 1000, StepRule::Relative(16000.0).step(1.15), Rounding::Down) > 1e-6);
    assert_eq!(delta(krr(2, 0.5).upper_family().unwrap().as_ref(), 0.5, 100, 1e-3, Rounding::Up), 0.0);
}

#[test]
fn searches_are_consistent() {
    let m = krr(10, 2.0);
    let (up, low) = (m.upper_family().unwrap(), m.lower_family().unwrap());
    let step = StepRule::default().step(2.0);
    let eps_u = find_epsilon(up.as_ref(), 1000, 1e-6, step, 1e-3).unwrap();
    let eps_l = find_epsilon_lower(low.as_ref(), 1000, 1e-6, step, 1e-3, eps_u).unwrap();
    assert!(eps_l <= eps_u);
    assert!(delta(up.as_ref(), eps_u, 1000, step, Rounding::Up) <= 1e-6);
    assert!(delta(low.as_ref(), eps_l, 1000, step, Rounding::Down) > 1e-6);
    let std = find_epsilon(&StdCloneFamily { eps0: 2.0 }, 1000, 1e-6, step, 1e-3).unwrap();
    assert!(eps_u <= std);
}

#[test]
fn asymptotic_catalog_bounds_are_finite() {
    for kind in [Kind::Blh, Kind::Rappor, Kind::Oue, Kind::Hr] {
        let m = Mechanism::Randomizer(RandomizerSpec::asymptotic(kind, 1.0).unwrap());
        let fam = m.upper_family().unwrap();
        let d = delta(fam.as_ref(), 0.1, 10_000, StepRule::default().step(1.0), Rounding::Up);
        assert!(d.is_finite() && (0.0..=1.0).contains(&d), "{kind:?}: {d}");
    }
}

#[test]
fn oversized_transform_is_a_resource_error() {
    let d = LatticeDist::new(1.0, 0, vec![0.5, 0.0, 0.0, 0.0, 0.5]);
    let err = self_convolve(&d, 1 << 25).unwrap_err();
    assert!(matches!(err, Error::Resource(_)));
    assert!(err.is_resource());
}
