use nalgebra::{DMatrix, SymmetricEigen};
use qsdlab::birth_death::{BDModel, LvParams, TruncatedChain};
use qsdlab::qsd::{conditioned_mc, fleming_viot, qsd_eigen_oracle, FvConfig};
use qsdlab::{DiscreteState, EmpiricalMeasure, RngStream, TimeGrid};

/// Killed generator of the 1-d chain with per-capita rates `b`, `mu + c k`
/// on `1..=n`, symmetrized; returns `(lambda0, nu)`.
fn one_dim(b: f64, mu: f64, c: f64, n: usize) -> (f64, Vec<f64>) {
    let birth = |k: usize| k as f64 * b;
    let death = |k: usize| k as f64 * (mu + c * k as f64);
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = i + 1;
        s[(i, i)] = -(birth(k) + death(k));
        if k < n {
            let off = (birth(k) * death(k + 1)).sqrt();
            s[(i, i + 1)] = off;
            s[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(s);
    let top = eig.eigenvalues.imax();
    let u = eig.eigenvectors.column(top);
    // Reversible measure pi_{k+1} / pi_k = b_k / d_{k+1}.
    let mut sqrt_pi = vec![1.0; n];
    for i in 1..n {
        sqrt_pi[i] = sqrt_pi[i - 1] * (birth(i) / death(i + 1)).sqrt();
    }
    let mut nu: Vec<f64> = (0..n).map(|i| (u[i] * sqrt_pi[i]).abs()).collect();
    let z: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|v| *v /= z);
    (-eig.eigenvalues[top], nu)
}

fn uncoupled() -> BDModel {
    BDModel::lv(LvParams {
        lambda: vec![1.0, 0.6],
        mu: vec![0.5, 0.8],
        gamma: vec![vec![0.0; 2]; 2],
        c: vec![vec![0.1, 0.0], vec![0.0, 0.3]],
    })
    .unwrap()
}

#[test]
fn oracle_matches_kronecker_sum_of_symmetric_chains() {
    let (n1, n2) = (25usize, 12usize);
    let o = qsd_eigen_oracle(&uncoupled(), vec![n1 as u32, n2 as u32]).unwrap();
    let (l1, nu1) = one_dim(1.0, 0.5, 0.1, n1);
    let (l2, nu2) = one_dim(0.6, 0.8, 0.3, n2);
    assert!((o.lambda0 - (l1 + l2)).abs() < 1e-8 * (l1 + l2), "{} vs {}", o.lambda0, l1 + l2);
    let states = o.chain.states();
    let mut worst: f64 = 0.0;
    for (i, s) in states.iter().enumerate() {
        let (a, b) = (s.coords()[0] as usize - 1, s.coords()[1] as usize - 1);
        worst = worst.max((o.nu[i] - nu1[a] * nu2[b]).abs());
    }
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn survival_decays_like_eta_times_exp() {
    let o = qsd_eigen_oracle(&uncoupled(), vec![15, 10]).unwrap();
    let x = DiscreteState::new([3, 2]);
    let i = o.chain.index_of(&x).unwrap();
    let t = 25.0;
    let p = o.chain.survival(&x, t).unwrap();
    let limit = o.eta[i] * (-o.lambda0 * t).exp();
    assert!((p / limit - 1.0).abs() < 1e-4, "{p} vs {limit}");
}

#[test]
fn truncated_laws_stay_substochastic() {
    let chain = TruncatedChain::square(&uncoupled(), 8).unwrap();
    let nu = chain.dirac(&DiscreteState::new([1, 1])).unwrap();
    let mut prev = 1.0;
    for t in [0.1, 0.5, 1.0, 3.0] {
        let p = chain.propagate_left(&nu, t);
        let mass: f64 = p.iter().sum();
        assert!(p.iter().all(|v| *v >= -1e-15));
        assert!(mass <= prev + 1e-12);
        prev = mass;
    }
}

/// From `(1, 1)` without births the first death absorbs: `tau ~ Exp(1.3 + 0.7)`.
fn pure_death() -> BDModel {
    BDModel::constant(vec![0.0, 0.0], vec![1.3, 0.7]).unwrap()
}

#[test]
fn conditioned_mc_survival_is_exponential() {
    let grid = TimeGrid::span(1.0, 10).unwrap();
    let init = EmpiricalMeasure::dirac(DiscreteState::new([1, 1]));
    let n = 20_000;
    let laws = conditioned_mc(&pure_death(), &init, &grid, n, 1000, &|s: &DiscreteState| s.clone(), RngStream::root(5).named("death")).unwrap();
    for (t, f) in grid.instants().zip(laws.survival_fractions()) {
        let p = (-2.0 * t).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() <= 4.0 * se + 1e-12, "t = {t}: {f} vs {p}");
    }
    for law in laws.laws.iter().flatten() {
        assert_eq!(law.len(), 1);
    }
}

#[test]
fn fleming_viot_recovers_the_absorption_rate() {
    let init = EmpiricalMeasure::dirac(DiscreteState::new([1, 1]));
    let mut cfg = FvConfig::new(500, 5.0, 0.01);
    cfg.record_every = 0.05;
    let run = fleming_viot(&pure_death(), &init, &cfg, RngStream::root(9).named("fv")).unwrap();
    assert!(run.lambda0_ci.0 <= 2.0 && 2.0 <= run.lambda0_ci.1, "{} {:?}", run.lambda0, run.lambda0_ci);
    assert!(run.samples.iter().all(|s| s.coords() == [1, 1]));
}

#[test]
fn fleming_viot_is_reproducible() {
    let init = EmpiricalMeasure::dirac(DiscreteState::new([2, 2]));
    let cfg = FvConfig::new(200, 2.0, 0.01);
    let rng = RngStream::root(11).named("fv");
    let a = fleming_viot(&uncoupled(), &init, &cfg, rng).unwrap();
    let b = fleming_viot(&uncoupled(), &init, &cfg, rng).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.lambda0.to_bits(), b.lambda0.to_bits());
}
