//! Spec execution: parameter selection, certificates, estimation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde_json::{json, Value};

use qsdlab::birth_death::{
    auto_eta, check_assumption_pnm, select_bd_params_with_eta, slice_domain, BDLyapunovParams, BDModel, BdPair, TruncatedChain,
};
use qsdlab::feller::{
    check_feller_assumption, check_feller_conditions, coupled_comparison, lv_assumption_params, FellerModel, FellerProcess, FellerScheme,
    FellerSetup, LogBoxGrid,
};
use qsdlab::lyapunov::{
    check_condition_a, check_condition_b, check_nonlinear_inequality, sample_mixtures, verify_dynkin_identity, CheckCertificate,
    Counterexample, Qualifier, Verdict,
};
use qsdlab::qsd::{
    auto_box, conditioned_mc, fit_decay_rate, fleming_viot, fleming_viot_qsd, qsd_eigen_oracle, survival_noise, tv_curve,
    ConditionedLaws, ConvergenceReport, FvConfig,
};
use qsdlab::{BinGrid, BinIndex, ContinuousState, DiscreteState, EmpiricalMeasure, Result, RngStream, State, TimeGrid};

use crate::spec::{CheckKind, EstimationSpec, ExperimentSpec, LyapunovSpec, Method, Model};

/// Which stages to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Run,
    Check,
    Estimate,
}

/// Default largest slice for chain checks.
pub const DEFAULT_K_MAX: u64 = 200;
/// Box side, horizon and quadrature step of the Dynkin check.
pub const DYNKIN_SIDE: u32 = 15;
pub const DYNKIN_HORIZON: f64 = 5.0;
pub const DYNKIN_STEP: f64 = 1e-3;
pub const DYNKIN_TOL: f64 = 1e-6;
/// Sampled measures for the nonlinear inequality.
pub const NONLINEAR_MEASURES: usize = 500;
/// Paths and horizon of the comparison check.
pub const COMPARISON_PATHS: usize = 1000;
pub const COMPARISON_HORIZON: f64 = 10.0;
/// Default `eta` of the diffusion growth assumption.
pub const DEFAULT_FELLER_ETA: f64 = 0.5;

#[derive(Default)]
pub struct Outcome {
    /// `(file name, body)` in creation order.
    pub artifacts: Vec<(String, String)>,
    pub certificates: Vec<CheckCertificate>,
    pub wall_times: BTreeMap<String, f64>,
    pub estimation_errors: Vec<String>,
    pub summary: Vec<(String, String)>,
}

impl Outcome {
    pub fn violated(&self) -> impl Iterator<Item = &CheckCertificate> {
        self.certificates.iter().filter(|c| !c.holds())
    }

    pub fn success(&self) -> bool {
        self.violated().next().is_none() && self.estimation_errors.is_empty()
    }

    fn artifact(&mut self, name: impl Into<String>, body: String) {
        self.artifacts.push((name.into(), body));
    }

    fn line(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.summary.push((key.into(), value.into()));
    }

    fn push_cert(&mut self, c: CheckCertificate) {
        self.line(c.check.clone(), cert_line(&c));
        self.certificates.push(c);
    }
}

fn cert_line(c: &CheckCertificate) -> String {
    let w: Vec<String> = c.witnesses.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
    format!("{} {}", c.verdict, w.join(" "))
}

/// A violated certificate standing for a stage that could not produce one.
fn failed(check: &str, why: String) -> CheckCertificate {
    let mut c = CheckCertificate::new(check, "parameter selection", Qualifier::Exact);
    c.push_counterexample(Counterexample::new(Vec::new(), why));
    c.conclude(Verdict::Violated)
}

fn timed<T>(out: &mut Outcome, stage: &str, f: impl FnOnce(&mut Outcome) -> T) -> T {
    let t = Instant::now();
    let v = f(out);
    out.wall_times.insert(stage.into(), t.elapsed().as_secs_f64());
    v
}

pub fn execute(spec: &ExperimentSpec, model: &Model, mode: Mode) -> Outcome {
    let mut out = Outcome::default();
    let root = RngStream::root(spec.seed);
    if mode != Mode::Estimate {
        match model {
            Model::Bd(m) => bd_checks(spec, m, root, &mut out),
            Model::Feller(m) => feller_checks(spec, m, root, &mut out),
        }
        let certs: Vec<Value> = out.certificates.iter().map(|c| c.to_json()).collect();
        out.artifact("certificates.json", pretty(&Value::Array(certs)));
    }
    if mode != Mode::Check {
        if let Some(est) = &spec.estimation {
            timed(&mut out, "estimation", |out| {
                let r = match model {
                    Model::Bd(m) => bd_estimation(est, m, root, out),
                    Model::Feller(m) => feller_estimation(spec, est, m, root, out),
                };
                if let Err(e) = r {
                    out.estimation_errors.push(e.to_string());
                }
            });
        }
    }
    out
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

fn bd_params(spec: &ExperimentSpec, m: &BDModel, out: &mut Outcome) -> Option<(BDLyapunovParams, u64)> {
    let d = m.dim() as u64;
    let (eta, beta, k_max) = match &spec.lyapunov {
        LyapunovSpec::Explicit(p) => (Some(p.eta), p.beta, p.k_max.unwrap_or(DEFAULT_K_MAX)),
        _ => (None, None, DEFAULT_K_MAX),
    };
    let eta = match eta {
        Some(eta) => match check_assumption_pnm(m, eta, d..=k_max) {
            Ok(c) => {
                let ok = c.holds();
                out.push_cert(c);
                ok.then_some(eta)?
            }
            Err(e) => {
                out.push_cert(failed("assumption_pnm", e.to_string()));
                return None;
            }
        },
        None => match auto_eta(m, d..=k_max) {
            Ok((eta, c)) => {
                out.push_cert(c);
                eta?
            }
            Err(e) => {
                out.push_cert(failed("assumption_pnm", e.to_string()));
                return None;
            }
        },
    };
    let params = match beta {
        Some(beta) => BDLyapunovParams::from_eta_beta(eta, beta).map_err(|e| e.to_string()),
        None => select_bd_params_with_eta(m, eta, k_max)
            .map(|sel| {
                out.push_cert(sel.certificate);
                sel.params
            })
            .map_err(|e| e.to_string()),
    };
    match params {
        Ok(p) => {
            out.artifact("lyapunov_params.json", pretty(&json!({ "model": "birth_death", "params": p, "k_max": k_max })));
            Some((p, k_max))
        }
        Err(e) => {
            out.push_cert(failed("beta_selection", e));
            None
        }
    }
}

fn bd_checks(spec: &ExperimentSpec, m: &BDModel, root: RngStream, out: &mut Outcome) {
    let Some((params, k_max)) = timed(out, "params", |out| bd_params(spec, m, out)) else { return };
    timed(out, "checks", |out| {
        let pair = BdPair::new(m.clone(), params);
        let wants = |k: CheckKind| spec.checks.contains(&k);
        if wants(CheckKind::ConditionA) || wants(CheckKind::ConditionB) {
            let dom = slice_domain(m.dim(), k_max);
            if wants(CheckKind::ConditionA) {
                out.push_cert(check_condition_a(&pair, &dom));
            }
            if wants(CheckKind::ConditionB) {
                out.push_cert(check_condition_b(&pair, params.epsilon, &dom));
            }
        }
        if !(wants(CheckKind::Dynkin) || wants(CheckKind::Nonlinear)) {
            return;
        }
        let chain = match TruncatedChain::new(m, vec![DYNKIN_SIDE; m.dim()]) {
            Ok(c) => c,
            Err(e) => return out.push_cert(failed("truncation", e.to_string())),
        };
        if wants(CheckKind::Dynkin) {
            let x = DiscreteState::ones(m.dim());
            let grid = TimeGrid::span(DYNKIN_HORIZON, 50).expect("grid");
            match verify_dynkin_identity(&chain, &pair, &x, &grid, DYNKIN_STEP, 1e6) {
                Ok(r) => {
                    let mut c = CheckCertificate::new(
                        "dynkin_identity",
                        format!("{DYNKIN_SIDE}-side truncation from {x}, t in [0, {DYNKIN_HORIZON}]"),
                        Qualifier::Exact,
                    )
                    .witness("max_residual", r.max_residual)
                    .witness("quad_step", r.quad_step)
                    .witness("tolerance", DYNKIN_TOL);
                    if r.max_residual > DYNKIN_TOL {
                        let i = r.residuals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |(i, _)| i);
                        c.push_counterexample(Counterexample::new(x.coords_f64(), format!("residual {:e} at t = {}", r.residuals[i], r.times[i])));
                        c = c.conclude(Verdict::Violated);
                    } else {
                        c = c.conclude(Verdict::Holds);
                    }
                    out.push_cert(c);
                    out.artifact("dynkin.csv", r.to_csv());
                }
                Err(e) => out.push_cert(failed("dynkin_identity", e.to_string())),
            }
        }
        if wants(CheckKind::Nonlinear) {
            match sample_mixtures(chain.states(), NONLINEAR_MEASURES, root.named("mixtures")) {
                Ok(ms) => out.push_cert(check_nonlinear_inequality(&pair, &ms, params.epsilon)),
                Err(e) => out.push_cert(failed("nonlinear_inequality", e.to_string())),
            }
        }
    });
}

fn feller_eta(spec: &ExperimentSpec) -> f64 {
    match &spec.lyapunov {
        LyapunovSpec::Explicit(p) => p.eta,
        _ => DEFAULT_FELLER_ETA,
    }
}

fn feller_scheme(spec: &ExperimentSpec) -> FellerScheme {
    match &spec.model {
        crate::spec::ModelSpec::Feller { dt: Some(dt), .. } => FellerScheme::with_dt(*dt),
        _ => FellerScheme::default(),
    }
}

fn feller_checks(spec: &ExperimentSpec, m: &FellerModel, root: RngStream, out: &mut Outcome) {
    let eta = feller_eta(spec);
    let setup = timed(out, "params", |out| match FellerSetup::auto(m, eta) {
        Ok(s) => {
            out.artifact("lyapunov_params.json", pretty(&json!({ "model": "feller", "setup": s })));
            Some(s)
        }
        Err(e) => {
            out.push_cert(failed("feller_setup", e.to_string()));
            None
        }
    });
    let Some(setup) = setup else { return };
    timed(out, "checks", |out| {
        let wants = |k: CheckKind| spec.checks.contains(&k);
        let grid = LogBoxGrid::standard(&setup.params, m.dim());
        if wants(CheckKind::Assumption) {
            match check_feller_assumption(&m.rescaled(), &setup.params, grid.lo, grid.hi, grid.points_per_axis) {
                Ok(c) => out.push_cert(c),
                Err(e) => out.push_cert(failed("feller_assumption", e.to_string())),
            }
        }
        if wants(CheckKind::ConditionA) || wants(CheckKind::ConditionB) {
            let scheme = feller_scheme(spec);
            match check_feller_conditions(m, &setup.params, &setup.h, &setup.g, setup.epsilon, &grid, scheme.eps_abs) {
                Ok(c) => {
                    if wants(CheckKind::ConditionA) {
                        out.push_cert(c.condition_a);
                    }
                    if wants(CheckKind::ConditionB) {
                        out.push_cert(c.condition_b);
                    }
                }
                Err(e) => out.push_cert(failed("feller_conditions", e.to_string())),
            }
        }
        if wants(CheckKind::Comparison) {
            out.push_cert(comparison(spec, m, eta, root));
        }
    });
}

fn comparison(spec: &ExperimentSpec, m: &FellerModel, eta: f64, root: RngStream) -> CheckCertificate {
    let x0 = ContinuousState::new(vec![1.0; m.dim()]);
    let run = || -> Result<_> {
        let p = lv_assumption_params(m, eta, 2.0)?;
        coupled_comparison(m, p.a_eta(), eta, &x0, COMPARISON_HORIZON, feller_scheme(spec), COMPARISON_PATHS, root.named("comparison"))
    };
    match run() {
        Ok(r) => {
            let mut c = CheckCertificate::new(
                "comparison",
                format!("{COMPARISON_PATHS} coupled paths from {x0} to t = {COMPARISON_HORIZON}"),
                Qualifier::Empirical,
            )
            .witness("steps_checked", r.steps_checked as f64)
            .witness("hat_violations", r.hat_violations as f64)
            .witness("bar_violations", r.bar_violations as f64)
            .witness("max_hat_excess", r.max_hat_excess)
            .witness("max_bar_excess", r.max_bar_excess);
            if r.clean() {
                c.conclude(Verdict::Holds)
            } else {
                c.push_counterexample(Counterexample::new(x0.coords().to_vec(), "comparison violated along some path"));
                c.conclude(Verdict::Violated)
            }
        }
        Err(e) => failed("comparison", e.to_string()),
    }
}

fn label_of(x: &[f64]) -> String {
    x.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join("_")
}

fn survival_csv(initial: &[Vec<f64>], laws: &[(Vec<usize>, usize)], times: &[f64]) -> String {
    let mut s = String::from("t");
    for x in initial {
        let _ = write!(s, ",from_{}", label_of(x));
    }
    s.push('\n');
    for (i, t) in times.iter().enumerate() {
        let _ = write!(s, "{t}");
        for (surv, n) in laws {
            let _ = write!(s, ",{:.12e}", surv[i] as f64 / *n as f64);
        }
        s.push('\n');
    }
    s
}

/// TV curves of each law against `reference`, or against the next law
/// (cyclically) when there is none, with survival rate fits.
fn curves<K: Ord + Clone>(
    initial: &[Vec<f64>],
    laws: &[ConditionedLaws<K>],
    reference: Option<(&EmpiricalMeasure<K>, Option<usize>)>,
) -> Result<Vec<ConvergenceReport>> {
    let mut v = Vec::new();
    for (i, l) in laws.iter().enumerate() {
        let label = format!("from {}", label_of(&initial[i]));
        let mut c = match reference {
            Some((r, n)) => tv_curve(&label, l, r, n, None)?,
            None => {
                let o = &laws[(i + 1) % laws.len()];
                let first = o.laws.iter().flatten().next().expect("initial law");
                tv_curve(&label, l, first, None, Some(o))?
            }
        };
        let frac = l.survival_fractions();
        c.lambda0 = fit_decay_rate(&l.times, &frac, &survival_noise(&frac, l.n_traj)).ok();
        v.push(c);
    }
    Ok(v)
}

fn finish_curves(out: &mut Outcome, initial: &[Vec<f64>], curves: &[ConvergenceReport], summary: &mut Value) {
    for (x, c) in initial.iter().zip(curves) {
        out.artifact(format!("tv_from_{}.csv", label_of(x)), c.to_csv());
        let fit = c.fit.map_or_else(|| c.fit_error.clone().unwrap_or_default(), |f| format!("rate {:.4} [{:.4}, {:.4}] R2 {:.4}", f.rate, f.rate_ci.0, f.rate_ci.1, f.r_squared));
        out.line(format!("tv {}", c.label), fit);
    }
    summary["curves"] = Value::Array(curves.iter().map(ConvergenceReport::summary_json).collect());
}

fn bd_estimation(est: &EstimationSpec, m: &BDModel, root: RngStream, out: &mut Outcome) -> Result<()> {
    let mut summary = json!({});
    let d = m.dim();
    let oracle = if est.methods.contains(&Method::Oracle) {
        let o = match &est.oracle.r#box {
            Some(b) => qsd_eigen_oracle(m, b.clone())?,
            None => auto_box(m, est.oracle.start, est.oracle.step, est.oracle.tol, est.oracle.max_side)?,
        };
        let e = o.estimate();
        out.artifact("oracle_qsd.csv", e.to_csv(|s| s.coords_f64()));
        out.line("oracle lambda0", format!("{:.6}", e.lambda0));
        summary["oracle"] = e.diagnostics_json();
        Some(e)
    } else {
        None
    };
    let fv = if est.methods.contains(&Method::FlemingViot) {
        let f = &est.fleming_viot;
        let x0 = f.initial.as_ref().map_or(DiscreteState::ones(d), |x| DiscreteState::new(x.iter().map(|v| *v as u32).collect::<Vec<_>>()));
        let mut cfg = FvConfig::new(f.particles, f.horizon, f.dt_sync);
        cfg.record_every = f.record_every;
        let e = fleming_viot_qsd(m, &EmpiricalMeasure::dirac(x0), &cfg, root.named("fleming_viot"))?;
        out.artifact("fv_qsd.csv", e.to_csv(|s| s.coords_f64()));
        out.line("fleming-viot lambda0", format!("{:.6} [{:.6}, {:.6}]", e.lambda0, e.lambda0_ci.0, e.lambda0_ci.1));
        if let Some(o) = &oracle {
            let tv = qsdlab::tv_distance(&o.measure, &e.measure)?;
            out.line("tv(oracle, fleming-viot)", format!("{tv:.6}"));
            summary["tv_oracle_fleming_viot"] = json!(tv);
        }
        summary["fleming_viot"] = e.diagnostics_json();
        Some(e)
    } else {
        None
    };
    if est.methods.contains(&Method::ConditionedMc) {
        let mc = &est.conditioned_mc;
        let grid = TimeGrid::span(mc.horizon, mc.steps)?;
        let key = |s: &DiscreteState| s.clone();
        let mut laws = Vec::new();
        for (i, x) in mc.initial.iter().enumerate() {
            let x = DiscreteState::new(x.iter().map(|v| *v as u32).collect::<Vec<_>>());
            laws.push(conditioned_mc(m, &EmpiricalMeasure::dirac(x), &grid, mc.trajectories, u64::MAX, &key, root.named("conditioned_mc").child(i as u64))?);
        }
        let fv_n = fv.as_ref().map(|e| (e.diagnostics["snapshots"] * e.diagnostics["particles"]) as usize / 20);
        let reference = match (&oracle, &fv) {
            (Some(o), _) => Some((&o.measure, None)),
            (None, Some(f)) => Some((&f.measure, fv_n)),
            _ => None,
        };
        let cs = curves(&mc.initial, &laws, reference)?;
        let times: Vec<f64> = grid.instants().collect();
        let surv: Vec<(Vec<usize>, usize)> = laws.iter().map(|l| (l.survivors.clone(), l.n_traj)).collect();
        finish_curves(out, &mc.initial, &cs, &mut summary);
        out.artifact("survival.csv", survival_csv(&mc.initial, &surv, &times));
    }
    out.artifact("estimation_summary.json", pretty(&summary));
    Ok(())
}

fn binned_csv(m: &EmpiricalMeasure<BinIndex>) -> String {
    let mut s = String::from("bin,mass\n");
    for (b, w) in m.atoms() {
        let _ = writeln!(s, "{},{w:.17e}", b.0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "));
    }
    s
}

fn feller_estimation(spec: &ExperimentSpec, est: &EstimationSpec, m: &FellerModel, root: RngStream, out: &mut Outcome) -> Result<()> {
    let mut summary = json!({});
    let d = m.dim();
    let p = FellerProcess::new(m.clone(), feller_scheme(spec))?;
    let mc = &est.conditioned_mc;
    let fv = if est.methods.contains(&Method::FlemingViot) {
        let f = &est.fleming_viot;
        let x0 = ContinuousState::new(f.initial.clone().unwrap_or_else(|| vec![1.0; d]));
        let mut cfg = FvConfig::new(f.particles, f.horizon, f.dt_sync);
        cfg.record_every = f.record_every;
        let run = fleming_viot(&p, &EmpiricalMeasure::dirac(x0), &cfg, root.named("fleming_viot"))?;
        let g = BinGrid::from_quantiles(run.samples.iter(), 0.001, 0.999, 40)?;
        let qsd = EmpiricalMeasure::uniform(run.samples.clone())?.bin(&g).consolidated();
        out.artifact("fv_qsd_binned.csv", binned_csv(&qsd));
        out.line("fleming-viot lambda0", format!("{:.6} [{:.6}, {:.6}]", run.lambda0, run.lambda0_ci.0, run.lambda0_ci.1));
        summary["fleming_viot"] = json!({
            "lambda0": run.lambda0, "lambda0_ci": [run.lambda0_ci.0, run.lambda0_ci.1], "events": run.events,
            "snapshots": run.snapshots, "burn_in": cfg.horizon - run.window, "guard_tripped": run.guard_tripped,
            "bins": { "lo": g.lo, "hi": g.hi, "per_axis": 40 },
        });
        Some(run)
    } else {
        None
    };
    if est.methods.contains(&Method::ConditionedMc) {
        let g = match &fv {
            Some(run) => BinGrid::from_quantiles(run.samples.iter(), 0.001, 0.999, mc.bins)?,
            None => {
                let top = mc.initial.iter().flatten().copied().fold(4.0, f64::max);
                BinGrid::new(vec![0.0; d], vec![top; d], vec![mc.bins; d])?
            }
        };
        let grid = TimeGrid::span(mc.horizon, mc.steps)?;
        let key = |s: &ContinuousState| g.bin_of(s.coords());
        let mut laws = Vec::new();
        for (i, x) in mc.initial.iter().enumerate() {
            let l = conditioned_mc(&p, &EmpiricalMeasure::dirac(ContinuousState::new(x.clone())), &grid, mc.trajectories, u64::MAX, &key, root.named("conditioned_mc").child(i as u64))?;
            laws.push(l.with_binning(&g));
        }
        let reference = fv.as_ref().map(|run| (EmpiricalMeasure::uniform(run.samples.clone()).map(|e| e.bin(&g).consolidated()), run.samples.len() / 20));
        let reference = match reference {
            Some((r, n)) => Some((r?, Some(n))),
            None => None,
        };
        let cs = curves(&mc.initial, &laws, reference.as_ref().map(|(r, n)| (r, *n)))?;
        let times: Vec<f64> = grid.instants().collect();
        let surv: Vec<(Vec<usize>, usize)> = laws.iter().map(|l| (l.survivors.clone(), l.n_traj)).collect();
        finish_curves(out, &mc.initial, &cs, &mut summary);
        out.artifact("survival.csv", survival_csv(&mc.initial, &surv, &times));
    }
    out.artifact("estimation_summary.json", pretty(&summary));
    Ok(())
}
