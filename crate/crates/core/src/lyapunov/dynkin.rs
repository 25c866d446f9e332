use serde::{Deserialize, Serialize};

use crate::birth_death::TruncatedChain;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::state::DiscreteState;

use super::pair::LyapunovPair;

/// Both sides of the ratio identity
/// `E V(X_t) / E phi(X_t) = V/phi(x) + int_0^t [E LV/E phi - (E V/E phi)(E L phi/E phi)] ds`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DynkinReport {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub quad_step: f64,
}

impl DynkinReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,lhs,rhs,residual\n");
        for i in 0..self.times.len() {
            out.push_str(&format!("{},{:e},{:e},{:e}\n", self.times[i], self.lhs[i], self.rhs[i], self.residuals[i]));
        }
        out
    }
}

/// Evaluates the identity on a truncation, with the semigroup computed by
/// uniformization and the integral by the trapezoid rule with step
/// `quad_step`. `V`, `phi` are restricted to the box and their generator
/// images are those of the killed chain.
pub fn verify_dynkin_identity<P: LyapunovPair<State = DiscreteState>>(
    chain: &TruncatedChain,
    pair: &P,
    x: &DiscreteState,
    times: &TimeGrid,
    quad_step: f64,
    max_rate: f64,
) -> Result<DynkinReport> {
    if !(quad_step > 0.0) {
        return Err(Error::InvalidParameter("quadrature step must be positive".into()));
    }
    let rate = chain.max_rate();
    if rate > max_rate {
        return Err(Error::UniformizationRate { rate, bound: max_rate });
    }
    let per = |t: f64| -> Result<usize> {
        let k = (t / quad_step).round();
        if (k * quad_step - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::InvalidParameter(format!("time {t} is not a multiple of the quadrature step")));
        }
        Ok(k as usize)
    };
    let marks: Vec<usize> = times.instants().map(per).collect::<Result<_>>()?;
    let v: Vec<f64> = chain.states().iter().map(|s| pair.v(s)).collect();
    let phi: Vec<f64> = chain.states().iter().map(|s| pair.phi(s)).collect();
    let lv = chain.apply_generator(&v);
    let lphi = chain.apply_generator(&phi);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let integrand = |mu: &[f64]| {
        let (mv, mp) = (dot(mu, &v), dot(mu, &phi));
        dot(mu, &lv) / mp - (mv / mp) * (dot(mu, &lphi) / mp)
    };
    let mut mu = chain.dirac(x)?;
    let start = dot(&mu, &v) / dot(&mu, &phi);
    let last = *marks.last().unwrap();
    let mut report = DynkinReport {
        times: Vec::new(),
        lhs: Vec::new(),
        rhs: Vec::new(),
        residuals: Vec::new(),
        max_residual: 0.0,
        quad_step,
    };
    let mut integral = 0.0;
    let mut f_prev = integrand(&mu);
    let mut next_mark = 0;
    for step in 0..=last {
        if step > 0 {
            mu = chain.propagate_left(&mu, quad_step);
            let f = integrand(&mu);
            integral += 0.5 * quad_step * (f_prev + f);
            f_prev = f;
        }
        while next_mark < marks.len() && marks[next_mark] == step {
            let lhs = dot(&mu, &v) / dot(&mu, &phi);
            let rhs = start + integral;
            report.times.push(times.at(next_mark));
            report.lhs.push(lhs);
            report.rhs.push(rhs);
            report.residuals.push((lhs - rhs).abs());
            next_mark += 1;
        }
    }
    report.max_residual = report.residuals.iter().copied().fold(0.0, f64::max);
    Ok(report)
}
