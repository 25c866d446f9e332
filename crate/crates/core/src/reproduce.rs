//! Desk-scale acceptance pipelines on the two reference models.
//!
//! Each `criterion_*` function runs one suite and returns its checks with
//! the CSV artifacts it produced. Every random draw comes from the seed
//! passed in, so two runs with the same seed give identical artifacts.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::birth_death::{auto_eta, select_bd_params, slice_domain, BDModel, BdPair, LvParams, TruncatedChain};
use crate::error::Result;
use crate::feller::{
    build_h_beta, check_feller_conditions, compute_M, coupled_comparison, lv_assumption_params, FellerAssumptionParams,
    FellerModel, FellerProcess, FellerScheme, FellerSetup, HPiece, LogBoxGrid,
};
use crate::grid::TimeGrid;
use crate::lyapunov::{check_condition_a, check_condition_b, check_nonlinear_inequality, sample_mixtures, verify_dynkin_identity, CheckCertificate};
use crate::measure::{tv_distance, BinGrid, BinIndex, EmpiricalMeasure};
use crate::qsd::{
    auto_box, conditioned_mc, fit_decay_rate, fleming_viot, fleming_viot_qsd, survival_noise, tv_curve, DecayFit, EigenOracle, FvConfig,
};
use crate::rng::RngStream;
use crate::state::{ContinuousState, DiscreteState, State};

/// One pass/fail item inside a criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// A named CSV body.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub body: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub title: String,
    pub checks: Vec<Check>,
    pub seconds: f64,
    pub limit_seconds: f64,
    #[serde(skip)]
    pub artifacts: Vec<Artifact>,
}

impl CriterionOutcome {
    fn new(id: u32, title: &str, limit_seconds: f64) -> Self {
        CriterionOutcome { id, title: title.into(), checks: Vec::new(), seconds: 0.0, limit_seconds, artifacts: Vec::new() }
    }

    fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    fn artifact(&mut self, name: &str, body: String) {
        self.artifacts.push(Artifact { name: name.into(), body });
    }

    fn finish(mut self, start: Instant) -> Self {
        self.seconds = start.elapsed().as_secs_f64();
        let ok = self.seconds <= self.limit_seconds;
        let detail = format!("{:.2} s (limit {} s)", self.seconds, self.limit_seconds);
        self.check("runtime", ok, detail);
        self
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// `criterion N: PASS|FAIL  title  (seconds)`.
    pub fn summary_line(&self) -> String {
        format!("criterion {}: {}  {}  ({:.2} s)", self.id, if self.pass() { "PASS" } else { "FAIL" }, self.title, self.seconds)
    }

    /// Summary line followed by one indented line per check.
    pub fn table(&self) -> String {
        let mut out = self.summary_line();
        for c in &self.checks {
            let _ = write!(out, "\n    [{}] {}: {}", if c.pass { "ok" } else { "FAIL" }, c.name, c.detail);
        }
        out
    }
}

/// The 2-d competitive birth-death chain with unit birth and death rates.
pub fn reference_bd_model() -> BDModel {
    BDModel::lv(LvParams {
        lambda: vec![1.0, 1.0],
        mu: vec![1.0, 1.0],
        gamma: vec![vec![0.0; 2]; 2],
        c: vec![vec![1.0, 0.2], vec![0.2, 1.0]],
    })
    .expect("valid reference chain")
}

/// The 2-d LV Feller diffusion with `r = (1, 1)`, `c = I`, `gamma = (2, 2)`.
pub fn reference_feller_model() -> FellerModel {
    FellerModel::lv(vec![2.0, 2.0], vec![1.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).expect("valid reference diffusion")
}

/// `eta` of the Feller growth assumption used throughout.
pub const FELLER_ETA: f64 = 0.5;

fn cert_csv(certs: &[&CheckCertificate]) -> String {
    let mut out = String::from("check,key,value\n");
    for c in certs {
        let _ = writeln!(out, "{},verdict,{}", c.check, c.verdict);
        for (k, v) in &c.witnesses {
            let _ = writeln!(out, "{},{k},{v:e}", c.check);
        }
        for x in &c.counterexamples {
            let s: Vec<String> = x.state.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{},counterexample,\"{}\"", c.check, s.join(" "));
        }
    }
    out
}

fn fit_text(f: &Option<DecayFit>, err: &Option<String>) -> String {
    match f {
        Some(f) => format!(
            "rate {:.4} [{:.4}, {:.4}], R2 {:.4}, window [{}, {}]",
            f.rate, f.rate_ci.0, f.rate_ci.1, f.r_squared, f.window.0, f.window.1
        ),
        None => format!("no fit: {}", err.as_deref().unwrap_or("unknown")),
    }
}

fn binned_csv(m: &EmpiricalMeasure<BinIndex>) -> String {
    let mut out = String::from("bin,mass\n");
    for (b, w) in m.atoms() {
        let s: Vec<String> = b.0.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{},{w:.17e}", s.join(" "));
    }
    out
}

/// Construction suite for `h_beta`: 20 random `(a, B_a)` and five `beta >= M`
/// each, checking junction smoothness, `P_2(a) = 1` and the shape of `h_beta`
/// on `[a, 10 B_a]`.
pub fn criterion_1(seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(1, "h_beta construction suite", 5.0);
    let mut rng = RngStream::root(seed).named("hbeta-suite").rng();
    let mut csv = String::from("a,b_a,beta,junction,p2_at_a_error,shape_violations\n");
    let (mut worst_junction, mut worst_unit, mut shape_bad, mut built, mut errors) = (0f64, 0f64, 0usize, 0usize, Vec::new());
    for _ in 0..20 {
        let a = rng.random_range(0.1..5.0);
        let b_a = a * rng.random_range(1.05..6.0);
        let params = FellerAssumptionParams::new(a, FELLER_ETA, b_a, 1.0, 1.0).expect("admissible constants");
        let m = compute_M(&params).m;
        for beta in [m, m + 0.5, 2.0 * m + 1.0, m + 5.0, m + 25.0] {
            match build_h_beta(&params, beta) {
                Ok(h) => {
                    built += 1;
                    let j = h.junction_mismatch();
                    let unit = (h.piece(HPiece::Quartic, a).0 - 1.0).abs();
                    let shape = h.shape_violations(10.0 * b_a, 10_000);
                    worst_junction = worst_junction.max(j);
                    worst_unit = worst_unit.max(unit);
                    shape_bad += shape;
                    let _ = writeln!(csv, "{a:.17e},{b_a:.17e},{beta:.17e},{j:e},{unit:e},{shape}");
                }
                Err(e) => errors.push(format!("a = {a}, B_a = {b_a}, beta = {beta}: {e}")),
            }
        }
    }
    out.check("constructed", errors.is_empty(), format!("{built}/100 functions built{}", errors.first().map_or(String::new(), |e| format!("; first error: {e}"))));
    out.check("junction continuity", worst_junction <= 1e-9, format!("max relative mismatch {worst_junction:e} (limit 1e-9)"));
    out.check("P2(a) = 1", worst_unit <= 4.0 * f64::EPSILON, format!("max |P2(a) - 1| = {worst_unit:e}"));
    out.check("monotone and convex", shape_bad == 0, format!("{shape_bad} violations on 10^4-point grids"));
    out.artifact("hbeta_suite.csv", csv);
    out.finish(start)
}

/// Slice-inequality certificate, parameter selection and conditions (a),
/// (b) for the reference chain on `|n| <= 200`.
pub fn criterion_2() -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(2, "birth-death Lyapunov conditions by slice enumeration", 60.0);
    let m = reference_bd_model();
    let run = || -> Result<_> {
        let (eta, assumption) = auto_eta(&m, 2..=200)?;
        let sel = select_bd_params(&m, 200)?;
        let pair = BdPair::new(m.clone(), sel.params);
        let dom = slice_domain(2, 200);
        let a = check_condition_a(&pair, &dom);
        let b = check_condition_b(&pair, sel.params.epsilon, &dom);
        Ok((eta, assumption, sel, a, b))
    };
    match run() {
        Ok((eta, assumption, sel, a, b)) => {
            out.check(
                "slice inequality",
                eta.is_some() && assumption.holds(),
                format!("auto eta = {:?}, verdict {}", eta, assumption.verdict),
            );
            let p = sel.params;
            out.check(
                "parameter selection",
                true,
                format!("alpha = {:.4}, beta = {}, epsilon = {:.4e}, k* = {}", p.alpha, p.beta, p.epsilon, sel.k_star),
            );
            out.check(
                "condition (a)",
                a.holds(),
                format!("{}, C = {:?}, n = {:?}, violations past n: 0", a.verdict, a.get("C"), a.get("n")),
            );
            out.check(
                "condition (b)",
                b.holds(),
                format!("{}, C' = {:?}, C'' = {:?}, m = {:?}", b.verdict, b.get("C_prime"), b.get("C_double_prime"), b.get("m")),
            );
            out.artifact("bd_conditions.csv", cert_csv(&[&assumption, &sel.certificate, &a, &b]));
        }
        Err(e) => out.check("pipeline", false, e.to_string()),
    }
    out.finish(start)
}

/// Conditional Dynkin identity on the 15 x 15 truncation from `(1, 1)`.
pub fn criterion_3() -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(3, "conditional Dynkin identity on the 15x15 truncation", 120.0);
    let m = reference_bd_model();
    let run = || -> Result<_> {
        let sel = select_bd_params(&m, 200)?;
        let pair = BdPair::new(m.clone(), sel.params);
        let chain = TruncatedChain::square(&m, 15)?;
        let grid = TimeGrid::span(5.0, 50)?;
        let x = DiscreteState::new([1, 1]);
        let coarse = verify_dynkin_identity(&chain, &pair, &x, &grid, 1e-3, 1e6)?;
        let fine = verify_dynkin_identity(&chain, &pair, &x, &grid, 5e-4, 1e6)?;
        Ok((coarse, fine))
    };
    match run() {
        Ok((coarse, fine)) => {
            out.check(
                "max residual",
                coarse.max_residual <= 1e-6,
                format!("{:e} at step 1e-3 (limit 1e-6)", coarse.max_residual),
            );
            let ratio = coarse.max_residual / fine.max_residual;
            out.check(
                "step halving",
                ratio >= 3.5,
                format!("residual {:e} at step 5e-4, reduction {ratio:.3}x (need 3.5x)", fine.max_residual),
            );
            out.artifact("dynkin_step_1e-3.csv", coarse.to_csv());
            out.artifact("dynkin_step_5e-4.csv", fine.to_csv());
        }
        Err(e) => out.check("pipeline", false, e.to_string()),
    }
    out.finish(start)
}

/// Eigen oracle of the reference chain on an auto-sized box.
pub fn reference_oracle() -> Result<EigenOracle> {
    auto_box(&reference_bd_model(), 10, 5, 1e-6, 200)
}

/// Oracle, Fleming-Viot and conditioned Monte Carlo on the reference chain.
///
/// The TV curves are taken against the oracle QSD; the curve between the
/// two conditional laws is reported alongside.
pub fn criterion_4(seed: u64, n_traj: usize) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(4, "birth-death QSD: oracle, Fleming-Viot, conditioned Monte Carlo", 600.0);
    let m = reference_bd_model();
    let root = RngStream::root(seed).named("bd-qsd");
    let run = || -> Result<_> {
        let oracle = reference_oracle()?;
        let est = oracle.estimate();
        let mut cfg = FvConfig::new(2000, 20.0, 0.01);
        cfg.record_every = 0.05;
        let fv = fleming_viot_qsd(&m, &EmpiricalMeasure::dirac(DiscreteState::new([1, 1])), &cfg, root.named("fv"))?;
        let grid = TimeGrid::span(2.0, 100)?;
        let key = |s: &DiscreteState| s.clone();
        let la = conditioned_mc(&m, &EmpiricalMeasure::dirac(DiscreteState::new([1, 1])), &grid, n_traj, u64::MAX, &key, root.named("mc-a"))?;
        let lb = conditioned_mc(&m, &EmpiricalMeasure::dirac(DiscreteState::new([30, 30])), &grid, n_traj, u64::MAX, &key, root.named("mc-b"))?;
        let ca = tv_curve("from (1,1)", &la, &est.measure, None, None)?;
        let cb = tv_curve("from (30,30)", &lb, &est.measure, None, None)?;
        let cross = tv_curve("(1,1) against (30,30)", &la, &est.measure, None, Some(&lb))?;
        let frac = la.survival_fractions();
        let surv = fit_decay_rate(&la.times, &frac, &survival_noise(&frac, n_traj));
        Ok((oracle, est, fv, la, ca, cb, cross, surv))
    };
    let (oracle, est, fv, la, ca, cb, cross, surv) = match run() {
        Ok(v) => v,
        Err(e) => {
            out.check("pipeline", false, e.to_string());
            return out.finish(start);
        }
    };
    out.check(
        "eigen oracle",
        oracle.residual <= 1e-10,
        format!(
            "box {:?}, lambda0 = {:.6}, residual {:e}, {} iterations",
            oracle.chain.max(),
            oracle.lambda0,
            oracle.residual,
            oracle.iterations
        ),
    );
    match tv_distance(&est.measure, &fv.measure) {
        Ok(tv) => out.check("Fleming-Viot agreement", tv <= 0.05, format!("TV = {tv:.4} (limit 0.05), lambda0 = {:.4}", fv.lambda0)),
        Err(e) => out.check("Fleming-Viot agreement", false, e.to_string()),
    }
    for (name, c) in [("TV fit from (1,1)", &ca), ("TV fit from (30,30)", &cb)] {
        let ok = c.fit.is_some_and(|f| f.r_squared >= 0.95 && f.rate > 0.0 && f.rate_ci.0 > 0.0);
        out.check(name, ok, fit_text(&c.fit, &c.fit_error));
    }
    let agree = matches!((ca.fit, cb.fit), (Some(a), Some(b)) if a.overlaps(&b));
    out.check("TV rates agree", agree, "95% intervals of the two fitted rates intersect");
    match surv {
        Ok(f) => {
            let rel = (f.rate - oracle.lambda0).abs() / oracle.lambda0;
            out.check(
                "survival lambda0",
                rel <= 0.05,
                format!("fitted {:.4} vs oracle {:.4}, relative error {:.4} (limit 0.05)", f.rate, oracle.lambda0, rel),
            );
        }
        Err(e) => out.check("survival lambda0", false, e.to_string()),
    }
    out.check("cross curve (reported)", true, fit_text(&cross.fit, &cross.fit_error));
    let coords = |s: &DiscreteState| s.coords_f64();
    out.artifact("bd_oracle_qsd.csv", est.to_csv(coords));
    out.artifact("bd_fv_qsd.csv", fv.to_csv(coords));
    out.artifact("bd_tv_from_1_1.csv", ca.to_csv());
    out.artifact("bd_tv_from_30_30.csv", cb.to_csv());
    out.artifact("bd_tv_cross.csv", cross.to_csv());
    let mut s = String::from("t,survival,survivors\n");
    for (i, t) in la.times.iter().enumerate() {
        let _ = writeln!(s, "{t},{:.12e},{}", la.survivors[i] as f64 / la.n_traj as f64, la.survivors[i]);
    }
    out.artifact("bd_survival_from_1_1.csv", s);
    out.finish(start)
}

fn feller_fv(dt: f64, seed: u64, label: &str) -> Result<Vec<ContinuousState>> {
    let p = FellerProcess::new(reference_feller_model(), FellerScheme::with_dt(dt))?;
    let mut cfg = FvConfig::new(2000, 40.0, 0.01);
    cfg.record_every = 0.1;
    let init = EmpiricalMeasure::dirac(ContinuousState::new([1.0, 1.0]));
    Ok(fleming_viot(&p, &init, &cfg, RngStream::root(seed).named(label))?.samples)
}

fn binned(samples: &[ContinuousState], grid: &BinGrid) -> Result<EmpiricalMeasure<BinIndex>> {
    Ok(EmpiricalMeasure::uniform(samples.to_vec())?.bin(grid).consolidated())
}

/// Conditions (a), (b) on the log grid, Fleming-Viot stability under step
/// halving, and binned TV curves from `(0.05, 3)` and `(0.5, 0.5)` against
/// the Fleming-Viot QSD.
pub fn criterion_5(seed: u64, n_traj: usize) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(5, "Feller QSD: Lyapunov conditions, Fleming-Viot, TV decay", 1200.0);
    let m = reference_feller_model();
    let setup = match FellerSetup::auto(&m, FELLER_ETA) {
        Ok(s) => s,
        Err(e) => {
            out.check("setup", false, e.to_string());
            return out.finish(start);
        }
    };
    let grid = LogBoxGrid::standard(&setup.params, 2);
    match check_feller_conditions(&m, &setup.params, &setup.h, &setup.g, setup.epsilon, &grid, FellerScheme::default().eps_abs) {
        Ok(c) => {
            let a = &c.condition_a;
            let b = &c.condition_b;
            out.check("condition (a)", a.holds(), format!("{}, C = {:?}, box_n = {:?}", a.verdict, a.get("C"), a.get("box_n")));
            out.check(
                "condition (b)",
                b.holds(),
                format!("{}, C' = {:?}, C'' = {:?}, box_n = {:?}", b.verdict, b.get("C_prime"), b.get("C_double_prime"), b.get("box_n")),
            );
            out.artifact("feller_conditions.csv", cert_csv(&[a, b]));
        }
        Err(e) => out.check("conditions", false, e.to_string()),
    }
    let run = || -> Result<_> {
        let coarse = feller_fv(1e-3, seed, "fv-dt")?;
        let fine = feller_fv(5e-4, seed, "fv-dt-half")?;
        let g40 = BinGrid::from_quantiles(coarse.iter(), 0.001, 0.999, 40)?;
        let change = tv_distance(&binned(&coarse, &g40)?, &binned(&fine, &g40)?)?;
        let g6 = BinGrid::from_quantiles(coarse.iter(), 0.001, 0.999, 6)?;
        let reference = binned(&coarse, &g6)?;
        let p = FellerProcess::new(m.clone(), FellerScheme::default())?;
        let t_grid = TimeGrid::span(3.0, 60)?;
        let key = |s: &ContinuousState| g6.bin_of(s.coords());
        let mut curves = Vec::new();
        for (label, x) in [("from (0.05,3)", [0.05, 3.0]), ("from (0.5,0.5)", [0.5, 0.5])] {
            let laws = conditioned_mc(&p, &EmpiricalMeasure::dirac(ContinuousState::new(x)), &t_grid, n_traj, u64::MAX, &key, RngStream::root(seed).named(label))?
                .with_binning(&g6);
            curves.push(tv_curve(label, &laws, &reference, Some(coarse.len() / 20), None)?);
        }
        Ok((change, binned(&coarse, &g40)?, curves))
    };
    match run() {
        Ok((change, qsd, curves)) => {
            out.check("dt halving", change <= 0.08, format!("binned TV change {change:.4} (limit 0.08, 40 bins per axis)"));
            for c in &curves {
                let ok = c.fit.is_some_and(|f| f.r_squared >= 0.9 && f.rate_ci.0 > 0.0);
                out.check(&format!("TV fit {}", c.label), ok, fit_text(&c.fit, &c.fit_error));
            }
            let agree = matches!((curves[0].fit, curves[1].fit), (Some(a), Some(b)) if a.overlaps(&b));
            out.check("TV rates agree", agree, "95% intervals of the two fitted rates intersect");
            out.artifact("feller_fv_qsd_binned.csv", binned_csv(&qsd));
            out.artifact("feller_tv_from_0.05_3.csv", curves[0].to_csv());
            out.artifact("feller_tv_from_0.5_0.5.csv", curves[1].to_csv());
        }
        Err(e) => out.check("estimation", false, e.to_string()),
    }
    out.finish(start)
}

/// 1000 coupled paths of the reference diffusion against the linear and
/// logistic upper processes, from `(1, 1)` up to `t = 10`.
pub fn criterion_6(seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(6, "pathwise comparison with the upper processes", 60.0);
    let m = reference_feller_model();
    let run = || -> Result<_> {
        let params = lv_assumption_params(&m, FELLER_ETA, 2.0)?;
        let r = coupled_comparison(
            &m,
            params.a_eta(),
            FELLER_ETA,
            &ContinuousState::new([1.0, 1.0]),
            10.0,
            FellerScheme::default(),
            1000,
            RngStream::root(seed).named("comparison"),
        )?;
        Ok((params, r))
    };
    match run() {
        Ok((params, r)) => {
            out.check("linear bound", r.hat_violations == 0, format!("{} violations in {} steps, max excess {:e}", r.hat_violations, r.steps_checked, r.max_hat_excess));
            out.check("logistic bound", r.bar_violations == 0, format!("{} violations, max excess {:e}", r.bar_violations, r.max_bar_excess));
            let mut s = String::from("key,value\n");
            let _ = writeln!(s, "a_eta,{:e}", params.a_eta());
            for (k, v) in [
                ("n_paths", r.n_paths as f64),
                ("steps_checked", r.steps_checked as f64),
                ("hat_violations", r.hat_violations as f64),
                ("bar_violations", r.bar_violations as f64),
                ("max_hat_excess", r.max_hat_excess),
                ("max_bar_excess", r.max_bar_excess),
            ] {
                let _ = writeln!(s, "{k},{v:e}");
            }
            out.artifact("comparison.csv", s);
        }
        Err(e) => out.check("pipeline", false, e.to_string()),
    }
    out.finish(start)
}

/// The nonlinear inequality for 500 sampled measures on the 15 x 15 box
/// with the parameters of [`criterion_2`].
pub fn criterion_7(seed: u64) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(7, "nonlinear inequality on sampled measures", 30.0);
    let m = reference_bd_model();
    let run = || -> Result<_> {
        let sel = select_bd_params(&m, 200)?;
        let pair = BdPair::new(m.clone(), sel.params);
        let chain = TruncatedChain::square(&m, 15)?;
        let measures = sample_mixtures(chain.states(), 500, RngStream::root(seed).named("mixtures"))?;
        Ok(check_nonlinear_inequality(&pair, &measures, sel.params.epsilon))
    };
    match run() {
        Ok(c) => {
            out.check(
                "fitted (A, B)",
                c.holds(),
                format!("{}, A = {:?}, B = {:?}, measures = {:?}", c.verdict, c.get("A"), c.get("B"), c.get("measures")),
            );
            let holder = c.get("holder_violations").unwrap_or(f64::NAN);
            out.check("Hoelder step", holder == 0.0, format!("{holder} violations"));
            out.artifact("nonlinear.csv", cert_csv(&[&c]));
        }
        Err(e) => out.check("pipeline", false, e.to_string()),
    }
    out.finish(start)
}

/// The oracle QSD is a fixed point of the reconditioned semigroup.
pub fn criterion_8() -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(8, "QSD fixed point under the truncated semigroup", 30.0);
    match reference_oracle() {
        Ok(o) => {
            let mut s = String::from("t,tv\n");
            for t in [0.5, 1.0, 2.0] {
                let mu = o.chain.propagate_left(&o.nu, t);
                let mass: f64 = mu.iter().sum();
                let tv: f64 = mu.iter().zip(&o.nu).map(|(a, b)| (a / mass - b).abs()).sum();
                out.check(&format!("t = {t}"), tv <= 1e-8, format!("TV = {tv:e} (limit 1e-8)"));
                let _ = writeln!(s, "{t},{tv:e}");
            }
            out.artifact("fixed_point.csv", s);
        }
        Err(e) => out.check("oracle", false, e.to_string()),
    }
    out.finish(start)
}

/// Seed of the published acceptance run.
pub const DEFAULT_SEED: u64 = 2024;

/// Default number of conditioned Monte Carlo paths for the chain.
pub const BD_TRAJECTORIES: usize = 100_000;
/// Default number of conditioned Monte Carlo paths for the diffusion.
pub const FELLER_TRAJECTORIES: usize = 40_000;

/// Criteria 2, 3, 4, 7 and 8.
pub fn birth_death_suite(seed: u64) -> Vec<CriterionOutcome> {
    vec![criterion_2(), criterion_3(), criterion_4(seed, BD_TRAJECTORIES), criterion_7(seed), criterion_8()]
}

/// Criteria 1, 5 and 6.
pub fn feller_suite(seed: u64) -> Vec<CriterionOutcome> {
    vec![criterion_1(seed), criterion_5(seed, FELLER_TRAJECTORIES), criterion_6(seed)]
}

/// Criteria 1 to 8 in order.
pub fn all_criteria(seed: u64) -> Vec<CriterionOutcome> {
    let mut v = feller_suite(seed);
    v.extend(birth_death_suite(seed));
    v.sort_by_key(|c| c.id);
    v
}

/// Criterion 9: two runs with the same seed produced identical artifacts.
pub fn reproducibility(first: &[CriterionOutcome], second: &[CriterionOutcome]) -> CriterionOutcome {
    let start = Instant::now();
    let mut out = CriterionOutcome::new(9, "byte-identical artifacts on re-run", f64::INFINITY);
    let list = |runs: &[CriterionOutcome]| runs.iter().flat_map(|c| c.artifacts.iter()).cloned().collect::<Vec<_>>();
    let (a, b) = (list(first), list(second));
    let names = |v: &[Artifact]| v.iter().map(|x| x.name.clone()).collect::<Vec<_>>();
    out.check("same artifact set", names(&a) == names(&b), format!("{} artifacts", a.len()));
    let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x.body != y.body).map(|(x, _)| x.name.as_str()).collect();
    out.check(
        "identical bodies",
        differing.is_empty() && !a.is_empty(),
        if differing.is_empty() { "all equal".to_string() } else { format!("differ: {}", differing.join(", ")) },
    );
    out.finish(start)
}

/// Pass/fail table of `outcomes` and whether every criterion passed.
pub fn summarize(outcomes: &[CriterionOutcome]) -> (String, bool) {
    let text = outcomes.iter().map(CriterionOutcome::table).collect::<Vec<_>>().join("\n");
    (text, outcomes.iter().all(CriterionOutcome::pass))
}
