use proptest::prelude::*;

use shuffle_amp::decomposition::{
    approx_equal, five_component, five_component_unchanged, joint, parallel, primary_optimal, simplify, validate,
    CloneComponent, CloneDecomposition,
};
use shuffle_amp::mechanism::{subsample, Coordinate, Mechanism};
use shuffle_amp::probdist::{Kernel, Label};
use shuffle_amp::randomizers::{build_table, closed_form_pqr, RandomizerSpec};

fn random_kernel() -> impl Strategy<Value = Kernel> {
    (2usize..5, 2usize..6).prop_flat_map(|(inputs, outputs)| {
        prop::collection::vec(prop::collection::vec(0.05f64..1.0, outputs), inputs).prop_map(move |rows| {
            let rows = rows
                .into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(|x| x / s).collect()
                })
                .collect();
            Kernel::new(
                (0..inputs as i64).map(Label::Int).collect(),
                (0..outputs as i64).map(Label::Int).collect(),
                rows,
            )
            .unwrap()
        })
    })
}

proptest! {
    #[test]
    fn primary_optimal_is_valid(k in random_kernel()) {
        let d = primary_optimal(&k, &Label::Int(0), &Label::Int(1)).unwrap();
        prop_assert!(validate(&d).passed());
        let s = simplify(&d).unwrap();
        prop_assert!(validate(&s).passed());
        prop_assert!((s.gamma() - d.gamma()).abs() < 1e-12);
    }

    #[test]
    fn simplify_ignores_splitting_and_order(k in random_kernel(), cut in 0.1f64..0.9, rot in 0usize..6) {
        let d = primary_optimal(&k, &Label::Int(0), &Label::Int(1)).unwrap();
        let mut parts = Vec::new();
        for c in &d.components {
            parts.push(CloneComponent::new(cut * c.a, cut * c.b, cut * c.c));
            parts.push(CloneComponent::new((1.0 - cut) * c.a, (1.0 - cut) * c.b, (1.0 - cut) * c.c));
        }
        let len = parts.len();
        parts.rotate_left(rot % len);
        let split = CloneDecomposition::new(parts, d.beta);
        let a = simplify(&d).unwrap();
        prop_assert!(approx_equal(&a, &simplify(&split).unwrap(), 1e-12));
        prop_assert!(approx_equal(&a, &simplify(&a).unwrap(), 0.0));
    }

    #[test]
    fn joint_matches_product_kernel(k1 in random_kernel(), k2 in random_kernel()) {
        let d1 = primary_optimal(&k1, &Label::Int(0), &Label::Int(1)).unwrap();
        let d2 = primary_optimal(&k2, &Label::Int(0), &Label::Int(1)).unwrap();
        let prod = k1.product(&k2);
        let x0 = Label::pair(Label::Int(0), Label::Int(0));
        let x1 = Label::pair(Label::Int(1), Label::Int(1));
        let direct = simplify(&primary_optimal(&prod, &x0, &x1).unwrap()).unwrap();
        let composed = joint(&[d1, d2]).unwrap();
        prop_assert!(validate(&composed).passed());
        prop_assert!(approx_equal(&composed, &direct, 1e-12));
    }

    #[test]
    fn parallel_is_valid(eps0 in 0.1f64..4.0, w in 0.0f64..1.0) {
        let a = five_component(&closed_form_pqr(&RandomizerSpec::krr(4, eps0).unwrap()).unwrap(), eps0);
        let b = five_component(&closed_form_pqr(&RandomizerSpec::oue(5, eps0).unwrap()).unwrap(), eps0);
        let p = parallel(&[(w, a.clone()), (1.0 - w, b.clone())]).unwrap();
        prop_assert!(validate(&p).passed());
        prop_assert!((p.beta - (w * a.beta + (1.0 - w) * b.beta)).abs() < 1e-12);
    }
}

#[test]
fn krr_five_component_against_table() {
    let spec = RandomizerSpec::krr(10, 2.0).unwrap();
    let t = build_table(&spec).unwrap();
    let direct = simplify(&primary_optimal(&t, &Label::Int(3), &Label::Int(7)).unwrap()).unwrap();
    let closed = simplify(&five_component(&closed_form_pqr(&spec).unwrap(), 2.0)).unwrap();
    assert!(approx_equal(&direct, &closed, 1e-12));
}

#[test]
fn hamming_joint_has_unchanged_coordinates() {
    let half = RandomizerSpec::krr(3, 0.5).unwrap();
    let m = Mechanism::Joint(vec![
        Coordinate { spec: half.clone(), changed: true },
        Coordinate { spec: half.clone(), changed: false },
    ]);
    let pqr = closed_form_pqr(&half).unwrap();
    let expected = joint(&[five_component(&pqr, 0.5), five_component_unchanged(&pqr, 0.5)]).unwrap();
    assert!(approx_equal(&m.upper_decomposition().unwrap(), &expected, 1e-14));
    assert_eq!(m.eps0(), 0.5);
}

#[test]
fn bot_and_subsampling() {
    let bot = CloneDecomposition::bot();
    assert_eq!(bot.beta, 0.0);
    assert!(validate(&bot).passed());
    let inner = Mechanism::Randomizer(RandomizerSpec::krr(10, 1.0).unwrap());
    let gamma = inner.upper_decomposition().unwrap().gamma();
    let sub = subsample(inner, 0.25).unwrap().upper_decomposition().unwrap();
    assert!((sub.gamma() - (0.25 * gamma + 0.75)).abs() < 1e-14);
    assert!(parallel(&[(0.6, bot.clone()), (0.6, bot)]).is_err());
}
