use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{check_condition_a, check_condition_b, CheckCertificate, Domain, LyapunovPair, Verdict};
use crate::state::ContinuousState;

use super::assumption::FellerAssumptionParams;
use super::gfun::GFunction;
use super::hbeta::HBetaFunction;
use super::model::{FellerModel, SmoothFn};

/// `V(x) = prod_i g(x_i)`.
pub fn feller_lyapunov_v(g: &GFunction, x: &[f64]) -> f64 {
    x.iter().map(|&v| g.value(v)).product()
}

/// `phi(x) = prod_i h_beta(x_i)`.
pub fn feller_lyapunov_phi(h: &HBetaFunction, x: &[f64]) -> f64 {
    x.iter().map(|&v| h.value(v)).product()
}

/// Product of one-dimensional factors, as a [`SmoothFn`].
struct Product<'a, F: Fn(f64) -> (f64, f64, f64)> {
    factor: &'a F,
}

impl<F: Fn(f64) -> (f64, f64, f64)> SmoothFn for Product<'_, F> {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| (self.factor)(v).0).product()
    }

    fn partials(&self, x: &[f64], i: usize) -> (f64, f64) {
        let rest: f64 = x.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &v)| (self.factor)(v).0).product();
        let (_, d1, d2) = (self.factor)(x[i]);
        (d1 * rest, d2 * rest)
    }
}

/// `sum_i (x_i r_i f_i' + (gamma_i x_i / 2) f_i'') prod_{j != i} f_j` for a
/// product function, without re-evaluating factors.
fn product_generator(model: &FellerModel, x: &[f64], factor: impl Fn(f64) -> (f64, f64, f64)) -> f64 {
    let d = x.len();
    if x.iter().any(|v| *v <= 0.0) {
        return 0.0;
    }
    let mut vals = [(0.0, 0.0, 0.0); 8];
    let mut heap;
    let vals: &mut [(f64, f64, f64)] = if d <= 8 {
        &mut vals[..d]
    } else {
        heap = vec![(0.0, 0.0, 0.0); d];
        &mut heap
    };
    for i in 0..d {
        vals[i] = factor(x[i]);
    }
    let mut r = [0.0; 8];
    let mut rheap;
    let r: &mut [f64] = if d <= 8 {
        &mut r[..d]
    } else {
        rheap = vec![0.0; d];
        &mut rheap
    };
    model.growth_into(x, r);
    let mut acc = 0.0;
    for i in 0..d {
        let rest: f64 = (0..d).filter(|&j| j != i).map(|j| vals[j].0).product();
        acc += (x[i] * r[i] * vals[i].1 + 0.5 * model.gamma()[i] * x[i] * vals[i].2) * rest;
    }
    acc
}

/// Exhaustion index: the smallest `n` with
/// `1/(2n) < x_i < 2n` for all `i`.
pub fn feller_level(x: &[f64]) -> f64 {
    let m = x.iter().map(|&v| (v / 2.0).max(1.0 / (2.0 * v))).fold(0.0, f64::max);
    m.floor() + 1.0
}

/// The product couple `(V, phi) = (prod g, prod h_beta)` on a model whose
/// diffusion coefficients are normalized to 2.
#[derive(Clone, Debug)]
pub struct FellerPair {
    pub model: FellerModel,
    pub h: HBetaFunction,
    pub g: GFunction,
}

impl FellerPair {
    /// `model` is rescaled internally.
    pub fn new(model: &FellerModel, h: HBetaFunction, g: GFunction) -> Self {
        FellerPair { model: model.rescaled(), h, g }
    }

    /// `V` as a [`SmoothFn`] for use with the generic generator.
    pub fn v_fn(&self) -> impl SmoothFn + '_ {
        VFn(&self.g)
    }

    pub fn phi_fn(&self) -> impl SmoothFn + '_ {
        PhiFn(&self.h)
    }
}

struct VFn<'a>(&'a GFunction);

impl SmoothFn for VFn<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        feller_lyapunov_v(self.0, x)
    }

    fn partials(&self, x: &[f64], i: usize) -> (f64, f64) {
        let f = |v: f64| self.0.eval(v);
        Product { factor: &f }.partials(x, i)
    }
}

struct PhiFn<'a>(&'a HBetaFunction);

impl SmoothFn for PhiFn<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        feller_lyapunov_phi(self.0, x)
    }

    fn partials(&self, x: &[f64], i: usize) -> (f64, f64) {
        let f = |v: f64| self.0.eval(v);
        Product { factor: &f }.partials(x, i)
    }
}

impl LyapunovPair for FellerPair {
    type State = ContinuousState;

    fn v(&self, s: &ContinuousState) -> f64 {
        feller_lyapunov_v(&self.g, s.coords())
    }

    fn phi(&self, s: &ContinuousState) -> f64 {
        feller_lyapunov_phi(&self.h, s.coords())
    }

    fn lv(&self, s: &ContinuousState) -> f64 {
        product_generator(&self.model, s.coords(), |v| self.g.eval(v))
    }

    fn lphi(&self, s: &ContinuousState) -> f64 {
        product_generator(&self.model, s.coords(), |v| self.h.eval(v))
    }

    fn exhaustion_level(&self, s: &ContinuousState) -> f64 {
        feller_level(s.coords())
    }
}

/// Log-uniform box grid, in normalized coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogBoxGrid {
    pub lo: f64,
    pub hi: f64,
    pub points_per_axis: usize,
    /// Outermost grid layers that must be violation-free (default: half).
    pub clean_outer: Option<usize>,
}

impl LogBoxGrid {
    /// `[1e-4, 10 B_a]` with 200 points per axis in dimension 2 and 60 in
    /// dimension 3 (30 beyond).
    pub fn standard(params: &FellerAssumptionParams, d: usize) -> Self {
        let n = match d {
            0..=2 => 200,
            3 => 60,
            _ => 30,
        };
        LogBoxGrid { lo: 1e-4, hi: 10.0 * params.b_a, points_per_axis: n, clean_outer: None }
    }

    pub fn axis(&self) -> Vec<f64> {
        let n = self.points_per_axis;
        (0..n).map(|j| self.lo * (self.hi / self.lo).powf(j as f64 / (n - 1) as f64)).collect()
    }

    /// Grid points grouped by exhaustion level, innermost first.
    ///
    /// Shell `k` holds the points whose level (see [`feller_level`]) is the
    /// `k`-th smallest level present on the grid.
    pub fn domain(&self, d: usize) -> Result<Domain<ContinuousState>> {
        let n = self.points_per_axis;
        if n < 4 || !(self.lo > 0.0 && self.hi > self.lo) {
            return Err(Error::InvalidParameter("grid needs lo > 0, hi > lo, at least 4 points".into()));
        }
        let total = n.checked_pow(d as u32).filter(|t| *t <= 20_000_000).ok_or_else(|| Error::InvalidParameter("grid too large".into()))?;
        let axis = self.axis();
        let mut by_level: BTreeMap<u64, Vec<ContinuousState>> = BTreeMap::new();
        let mut x = vec![0.0; d];
        for flat in 0..total {
            let mut q = flat;
            for v in x.iter_mut() {
                *v = axis[q % n];
                q /= n;
            }
            by_level.entry(feller_level(&x) as u64).or_default().push(ContinuousState::new(x.clone()));
        }
        let shells: Vec<Vec<ContinuousState>> = by_level.into_values().collect();
        let dom = Domain::new(
            shells,
            format!("log grid [{:e}, {:e}]^{d}, {n} points per axis (normalized units), shells by level", self.lo, self.hi),
        );
        Ok(match self.clean_outer {
            Some(k) => dom.with_clean_outer(k),
            None => dom,
        })
    }
}

/// Both conditions on the grid, counterexamples in original units.
#[derive(Clone, Debug)]
pub struct FellerConditions {
    pub condition_a: CheckCertificate,
    pub condition_b: CheckCertificate,
}

impl FellerConditions {
    pub fn holds(&self) -> bool {
        self.condition_a.holds() && self.condition_b.holds()
    }

    pub fn certificates(&self) -> [&CheckCertificate; 2] {
        [&self.condition_a, &self.condition_b]
    }
}

/// Evaluates conditions (a) and (b) for `(prod g, prod h_beta)` on `grid`.
///
/// Beyond the shell witnesses, each certificate records `box_n`: the
/// smallest `n` such that every violation lies in `O_n` (0 when none).
pub fn check_feller_conditions(
    model: &FellerModel,
    params: &FellerAssumptionParams,
    h: &HBetaFunction,
    g: &GFunction,
    epsilon: f64,
    grid: &LogBoxGrid,
    eps_abs: f64,
) -> Result<FellerConditions> {
    params.validate()?;
    let d = model.dim() as f64;
    if !(epsilon > 0.0) || !(h.beta * d * epsilon < params.eta / 2.0) {
        return Err(Error::Precondition(format!(
            "epsilon = {epsilon} violates beta d epsilon < eta/2 (beta = {}, d = {d}, eta = {})",
            h.beta, params.eta
        )));
    }
    if grid.lo <= eps_abs {
        return Err(Error::Precondition(format!("grid lower end {} within the absorption floor {eps_abs}", grid.lo)));
    }
    let pair = FellerPair::new(model, h.clone(), g.clone());
    let domain = grid.domain(model.dim())?;
    let mut ca = check_condition_a(&pair, &domain);
    let mut cb = check_condition_b(&pair, epsilon, &domain);
    let box_a = violation_level(&pair, &domain, |s| -pair.lphi(s));
    let cp = cb.get("C_prime").unwrap_or(0.0);
    let box_b = violation_level(&pair, &domain, |s| {
        let v = pair.v(s);
        let phi = pair.phi(s);
        pair.lv(s) + cp * v.powf(1.0 + epsilon) / phi.powf(epsilon)
    });
    for (cert, b) in [(&mut ca, box_a), (&mut cb, box_b)] {
        if cert.verdict == Verdict::Holds {
            cert.set_witness("box_n", b);
            cert.set_witness("box_hi_normalized", 2.0 * b);
        }
        cert.set_witness("beta", h.beta);
        for c in cert.counterexamples.iter_mut() {
            c.state = model.from_rescaled(&c.state);
        }
        cert.note("counterexample states in original units");
    }
    Ok(FellerConditions { condition_a: ca, condition_b: cb })
}

fn violation_level(pair: &FellerPair, domain: &Domain<ContinuousState>, f: impl Fn(&ContinuousState) -> f64 + Sync) -> f64 {
    domain
        .shells
        .par_iter()
        .map(|shell| shell.iter().filter(|s| f(s) > 0.0).map(|s| pair.exhaustion_level(s)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

/// Default `epsilon = eta / (4 beta d)`.
pub fn default_feller_epsilon(params: &FellerAssumptionParams, beta: f64, d: usize) -> f64 {
    params.eta / (4.0 * beta * d as f64)
}

