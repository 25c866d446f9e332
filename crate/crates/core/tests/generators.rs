use proptest::prelude::*;

use qsdlab::birth_death::{bd_generator_apply, BDLyapunovParams, BDModel, BdPair, LvParams};
use qsdlab::feller::{feller_generator_apply, FellerModel, FellerSetup};
use qsdlab::lyapunov::{check_condition_a, check_condition_b, Domain, LyapunovPair, Verdict};
use qsdlab::{ContinuousState, DiscreteState};

fn lv_model(lambda: [f64; 2], mu: [f64; 2], c: [[f64; 2]; 2]) -> BDModel {
    BDModel::lv(LvParams {
        lambda: lambda.to_vec(),
        mu: mu.to_vec(),
        gamma: vec![vec![0.0; 2]; 2],
        c: c.iter().map(|r| r.to_vec()).collect(),
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bd_closed_forms_match_the_generic_generator(
        l0 in 0.1f64..3.0, l1 in 0.1f64..3.0, m0 in 0.0f64..2.0, m1 in 0.0f64..2.0,
        c00 in 0.05f64..1.0, c11 in 0.05f64..1.0, c01 in 0.0f64..0.5, c10 in 0.0f64..0.5,
        eta in 0.1f64..2.0, beta in 1.05f64..6.0,
        n0 in 1u32..60, n1 in 1u32..60,
    ) {
        let model = lv_model([l0, l1], [m0, m1], [[c00, c01], [c10, c11]]);
        let pair = BdPair::new(model.clone(), BDLyapunovParams::from_eta_beta(eta, beta).unwrap());
        let n = DiscreteState::new([n0, n1]);
        let scale = model.total_rate(&n);
        let lv = bd_generator_apply(&model, |m| pair.v(m), &n).unwrap();
        let lphi = bd_generator_apply(&model, |m| pair.phi(m), &n).unwrap();
        prop_assert!((pair.lv(&n) - lv).abs() <= 1e-10 * scale * pair.v(&n).max(1.0), "{} vs {lv}", pair.lv(&n));
        prop_assert!((pair.lphi(&n) - lphi).abs() <= 1e-10 * scale * pair.phi(&n).max(1e-300), "{} vs {lphi}", pair.lphi(&n));
    }

    #[test]
    fn bd_pair_vanishes_at_the_boundary(eta in 0.1f64..2.0, beta in 1.05f64..6.0, k in 0u32..50) {
        let pair = BdPair::new(lv_model([1.0, 1.0], [1.0, 1.0], [[1.0, 0.2], [0.2, 1.0]]), BDLyapunovParams::from_eta_beta(eta, beta).unwrap());
        let n = DiscreteState::new([0, k]);
        prop_assert_eq!(pair.v(&n), 0.0);
        prop_assert_eq!(pair.phi(&n), 0.0);
    }
}

/// `L f = sum_i x_i (1 - x_i) f_i + x_i f_ii` for `gamma = (2, 2)`, `r = (1, 1)`, `c = I`.
fn finite_difference_generator(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        let h = 1e-4 * x[i];
        let mut up = x.to_vec();
        let mut dn = x.to_vec();
        up[i] += h;
        dn[i] -= h;
        let (fu, f0, fd) = (f(&up), f(x), f(&dn));
        let d1 = (fu - fd) / (2.0 * h);
        let d2 = (fu - 2.0 * f0 + fd) / (h * h);
        acc += x[i] * (1.0 - x[i]) * d1 + x[i] * d2;
    }
    acc
}

#[test]
fn feller_closed_forms_match_finite_differences() {
    let model = FellerModel::lv(vec![2.0, 2.0], vec![1.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let setup = FellerSetup::auto(&model, 0.5).unwrap();
    let pair = setup.pair(&model);
    let axis: Vec<f64> = (0..23).map(|i| 0.03 * 1.35f64.powi(i)).collect();
    let mut checked = 0;
    for &a in &axis {
        for &b in &axis {
            let x = ContinuousState::new([a, b]);
            for (exact, f) in [
                (pair.lv(&x), &(|y: &[f64]| pair.v(&ContinuousState::new(y.to_vec()))) as &dyn Fn(&[f64]) -> f64),
                (pair.lphi(&x), &|y: &[f64]| pair.phi(&ContinuousState::new(y.to_vec()))),
            ] {
                let fd = finite_difference_generator(f, x.coords());
                let scale = f(x.coords()).abs() * (1.0 + a * a + b * b) / (a.min(b)).min(1.0);
                assert!((exact - fd).abs() <= 1e-4 * scale, "x = {x}: {exact} vs {fd}");
                checked += 1;
            }
            let generic = feller_generator_apply(&pair.model, &pair.v_fn(), &x).unwrap();
            assert!((generic - pair.lv(&x)).abs() <= 1e-12 * pair.lv(&x).abs().max(1e-300));
        }
    }
    assert_eq!(checked, 2 * axis.len() * axis.len());
}

/// One state per shell; `L phi` given directly.
struct Toy {
    lphi: Vec<f64>,
}

impl LyapunovPair for Toy {
    type State = DiscreteState;

    fn v(&self, s: &DiscreteState) -> f64 {
        s.coords()[0] as f64
    }

    fn phi(&self, _: &DiscreteState) -> f64 {
        1.0
    }

    fn lv(&self, s: &DiscreteState) -> f64 {
        -(s.coords()[0] as f64)
    }

    fn lphi(&self, s: &DiscreteState) -> f64 {
        self.lphi[s.coords()[0] as usize - 1]
    }

    fn exhaustion_level(&self, s: &DiscreteState) -> f64 {
        s.coords()[0] as f64
    }
}

fn line(n: u32) -> Domain<DiscreteState> {
    Domain::new((1..=n).map(|k| vec![DiscreteState::new([k, 1])]).collect(), "line")
}

#[test]
fn condition_a_reports_the_first_clean_level() {
    let mut lphi = vec![1.0; 20];
    lphi[2] = -3.5;
    lphi[4] = -0.5;
    let cert = check_condition_a(&Toy { lphi }, &line(20));
    assert!(cert.holds());
    assert_eq!(cert.get("C"), Some(3.5));
    assert_eq!(cert.get("n"), Some(6.0));

    let cert = check_condition_a(&Toy { lphi: vec![0.5; 20] }, &line(20));
    assert_eq!(cert.get("C"), Some(0.0));
    assert_eq!(cert.get("n"), Some(1.0));

    let mut lphi = vec![1.0; 20];
    lphi[..6].iter_mut().for_each(|v| *v = -1.0);
    let cert = check_condition_a(&Toy { lphi: lphi.clone() }, &line(20));
    assert!(cert.holds());
    assert_eq!(cert.get("C"), Some(1.0));
    assert_eq!(cert.get("n"), Some(7.0));

    lphi[17] = -2.0;
    let cert = check_condition_a(&Toy { lphi }, &line(20));
    assert_eq!(cert.verdict, Verdict::Violated);
    assert!(!cert.counterexamples.is_empty());
}

#[test]
fn condition_b_holds_for_a_strongly_dissipative_toy() {
    let cert = check_condition_b(&Toy { lphi: vec![0.0; 20] }, 0.1, &line(20));
    assert!(cert.holds(), "{:?}", cert);
    assert!(cert.get("C_prime").unwrap() > 0.0);
}
