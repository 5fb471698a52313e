//! Analytic evaluation of mechanisms, the two reference mechanisms, and the
//! seeded capacity-sweep experiment.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{Prior, PriorSpec};
use crate::equilibrium::{CostModel, Population};
use crate::error::{invalid, Error, Result};
use crate::geometry::{belief_preimage, intersect, BeliefIntervals, GoalSpec};
use crate::mechanism::SignallingMechanism;
use crate::scalar::Scalar;
use crate::stateful::StatefulScenario;
use crate::stateless::design;

/// Absolute slack when testing whether a posterior mean lies in a belief interval.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-7;
/// Relative slack when comparing a posterior mean against a state threshold.
pub const THRESHOLD_TOLERANCE: f64 = 1e-9;
/// Perturbation separating tied sampled benefits.
pub const TIE_BREAK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport<T> {
    /// Compliance probability.
    pub value: T,
    /// Per belief interval (stateless) or per state (stateful) contributions:
    /// interval masses in the first case, conditional compliance in the second.
    pub breakdown: Vec<T>,
    /// Number of signals with positive probability.
    pub signals: usize,
}

/// Probability that the realized posterior mean falls in some belief interval.
pub fn evaluate_stateless<T: Scalar>(
    mech: &SignallingMechanism<T>,
    prior: &Prior<T>,
    beliefs: &BeliefIntervals<T>,
) -> Result<EvaluationReport<T>> {
    let direct = mech.to_direct(prior)?;
    let tol = T::tol(MEMBERSHIP_TOLERANCE);
    let mut breakdown = vec![T::zero(); beliefs.len()];
    for s in &direct.0 {
        if let Some(k) = beliefs.locate(s.theta, tol) {
            breakdown[k] = breakdown[k] + s.q;
        }
    }
    let value = breakdown.iter().fold(T::zero(), |a, &v| a + v).min(T::one());
    Ok(EvaluationReport {
        value,
        breakdown,
        signals: direct.len(),
    })
}

/// The mechanism that sends a single signal.
pub fn benchmark_noinfo<T: Scalar>(prior: &Prior<T>) -> SignallingMechanism<T> {
    SignallingMechanism::uninformative(prior)
}

/// Compliance under full revelation: the prior mass of the belief intervals.
pub fn fullinfo_value<T: Scalar>(prior: &Prior<T>, beliefs: &BeliefIntervals<T>) -> T {
    beliefs
        .iter()
        .fold(T::zero(), |a, iv| a + prior.prob_closed(iv.lo, iv.hi))
        .min(T::one())
}

fn meets<T: Scalar>(theta: T, gamma: T) -> bool {
    let slack = T::tol(THRESHOLD_TOLERANCE) * gamma.abs().max(T::one());
    theta >= gamma - slack
}

/// Evaluates a finite-state kernel against per-state thresholds, recomputing
/// every posterior mean from the table itself.
pub fn evaluate_stateful_mech<T: Scalar>(
    mech: &SignallingMechanism<T>,
    scenario: &StatefulScenario<T>,
) -> Result<EvaluationReport<T>> {
    let rows = match mech {
        SignallingMechanism::DiscreteTable { rows, .. } => rows,
        _ => return Err(invalid("stateful evaluation needs a discrete table")),
    };
    mech.validate()?;
    if rows.len() != scenario.len() {
        return Err(invalid("table rows must match the scenario's states"));
    }
    let (nu, p, gammas) = (scenario.states(), scenario.probs(), scenario.gammas());
    let width = mech.signal_count();
    let mut posteriors = Vec::with_capacity(width);
    for i in 0..width {
        let (mut q, mut first) = (T::zero(), T::zero());
        for j in 0..rows.len() {
            q = q + p[j] * rows[j][i];
            first = first + p[j] * rows[j][i] * nu[j];
        }
        posteriors.push(if q > T::zero() { Some(first / q) } else { None });
    }
    let breakdown: Vec<T> = (0..rows.len())
        .map(|j| {
            (0..width)
                .filter(|&i| posteriors[i].map_or(false, |t| meets(t, gammas[j])))
                .fold(T::zero(), |a, i| a + rows[j][i])
                .min(T::one())
        })
        .collect();
    let value = breakdown.iter().zip(p).fold(T::zero(), |a, (&v, &pj)| a + v * pj);
    Ok(EvaluationReport {
        value,
        breakdown,
        signals: posteriors.iter().filter(|t| t.is_some()).count(),
    })
}

/// Full-revelation compliance for a finite-state scenario.
pub fn fullinfo_stateful<T: Scalar>(scenario: &StatefulScenario<T>) -> T {
    crate::stateful::benchmarks_stateful(scenario).fullinfo
}

/// Parameters of the capacity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of worker groups.
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    /// Capacity floors to sweep; defaults to `0, 0.05, …, 1`.
    pub b_grid: Vec<f64>,
    pub benefit_low: f64,
    pub benefit_high: f64,
    pub prior: PriorSpec<f64>,
    pub cost: CostModel<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k: 10,
            trials: 10_000,
            seed: 0,
            b_grid: (0..=20).map(|i| i as f64 / 20.0).collect(),
            benefit_low: 0.0,
            benefit_high: 10.0,
            prior: PriorSpec::Uniform { low: 5.0, high: 20.0 },
            cost: CostModel::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<Prior<f64>> {
        if self.k == 0 {
            return Err(invalid("need at least one group"));
        }
        if self.trials == 0 {
            return Err(invalid("need at least one trial"));
        }
        if self.b_grid.is_empty() || self.b_grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(invalid("capacity grid must be non-empty and inside [0, 1]"));
        }
        if !(self.benefit_low >= 0.0 && self.benefit_high > self.benefit_low && self.benefit_high.is_finite()) {
            return Err(invalid("benefit range must satisfy 0 <= low < high"));
        }
        self.cost.validate()?;
        Prior::try_from(self.prior.clone())
    }
}

/// One line of the sweep output, averaged over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub b: f64,
    pub v_noinfo_analytic: f64,
    pub v_fullinfo_analytic: f64,
    pub v_opt_analytic: f64,
    pub v_noinfo_mc: f64,
    pub v_fullinfo_mc: f64,
    pub v_opt_mc: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Trials where the designed value fell below a benchmark.
    pub dominance_violations: usize,
}

/// Uniform point on the probability simplex from normalized exponential spacings.
pub fn sample_simplex(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k)
        .map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0).ln())
        .collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}

/// I.i.d. benefits sorted decreasing, with ties pushed apart.
pub fn sample_benefits(rng: &mut impl Rng, k: usize, low: f64, high: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| rng.gen_range(low..high)).collect();
    v.sort_by(|a, b| b.partial_cmp(a).expect("finite benefits"));
    for i in 1..k {
        if v[i] >= v[i - 1] {
            v[i] = v[i - 1] - TIE_BREAK;
        }
    }
    let floor = v[k - 1];
    if floor <= 0.0 {
        let lift = TIE_BREAK - floor;
        v.iter_mut().for_each(|x| *x += lift);
    }
    v
}

fn trial_rng(seed: u64, b_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((b_index as u64) << 32) | trial as u64);
    rng
}

/// Per-trial analytic values and Monte Carlo indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub analytic: [f64; 3],
    pub realized: [bool; 3],
}

/// Runs one trial: sample a population and a state, design, and evaluate
/// the no-information, full-information and designed mechanisms.
pub fn run_trial(cfg: &ExperimentConfig, prior: &Prior<f64>, b: f64, b_index: usize, trial: usize) -> Result<TrialOutcome> {
    let mut rng = trial_rng(cfg.seed, b_index, trial);
    let x = sample_simplex(&mut rng, cfg.k);
    let v = sample_benefits(&mut rng, cfg.k, cfg.benefit_low, cfg.benefit_high);
    let level: f64 = rng.gen();
    let aux: f64 = rng.gen();

    let pop = Population::new(x, v)?;
    let masses = intersect(&pop, &GoalSpec::Capacity { b })?;
    let beliefs = belief_preimage(&pop, &cfg.cost, &masses, prior.high());
    let tol = MEMBERSHIP_TOLERANCE;
    let inside = |t: f64| beliefs.locate(t, tol).is_some();

    let noinfo = if inside(prior.mean()) { 1.0 } else { 0.0 };
    let fullinfo = fullinfo_value(prior, &beliefs);
    let opt = design(prior, &beliefs)?;
    let v_opt = evaluate_stateless(&opt.mechanism, prior, &beliefs)?.value;

    let theta = prior.quantile(level)?;
    let signal = opt.mechanism.draw_signal(prior, level, aux, None);
    let opt_hit = opt.direct.posterior_of(signal).map_or(false, inside);
    Ok(TrialOutcome {
        analytic: [noinfo, fullinfo, v_opt],
        realized: [noinfo == 1.0, inside(theta), opt_hit],
    })
}

/// The capacity sweep: for each floor `b`, averages analytic and simulated
/// compliance of the three mechanisms over independent trials.
pub fn run_capacity_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let prior = cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.b_grid.len());
    let mut dominance_violations = 0;
    let n = cfg.trials as f64;
    for (bi, &b) in cfg.b_grid.iter().enumerate() {
        let mut analytic = [0.0; 3];
        let mut hits = [0usize; 3];
        for trial in 0..cfg.trials {
            let out = run_trial(cfg, &prior, b, bi, trial)?;
            if out.analytic[2] < out.analytic[0].max(out.analytic[1]) {
                dominance_violations += 1;
            }
            for m in 0..3 {
                analytic[m] += out.analytic[m];
                hits[m] += out.realized[m] as usize;
            }
        }
        rows.push(SweepRow {
            b,
            v_noinfo_analytic: analytic[0] / n,
            v_fullinfo_analytic: analytic[1] / n,
            v_opt_analytic: analytic[2] / n,
            v_noinfo_mc: hits[0] as f64 / n,
            v_fullinfo_mc: hits[1] as f64 / n,
            v_opt_mc: hits[2] as f64 / n,
            trials: cfg.trials,
            seed: cfg.seed,
        });
    }
    Ok(SweepReport {
        rows,
        dominance_violations,
    })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidInput(format!("writing CSV: {e}")))?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("writing CSV: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Interval;
    use crate::stateful::design_stateful;
    use crate::stateless::design as design_stateless;

    fn beliefs(v: &[(f64, f64)]) -> BeliefIntervals<f64> {
        BeliefIntervals::new(v.iter().map(|&(a, b)| Interval::new(a, b)).collect()).unwrap()
    }

    #[test]
    fn stateless_evaluation() {
        let ten = Prior::<f64>::uniform(0.0, 10.0).unwrap();
        let r = evaluate_stateless(&benchmark_noinfo(&ten), &ten, &beliefs(&[(4.0, 6.0)])).unwrap();
        assert_eq!(r.value, 1.0);
        assert!((fullinfo_value(&ten, &beliefs(&[(8.0, 10.0)])) - 0.2).abs() < 1e-12);
        assert_eq!(fullinfo_value(&ten, &beliefs(&[(0.0, 10.0)])), 1.0);

        let u = Prior::<f64>::uniform(0.0, 1.0).unwrap();
        let b = beliefs(&[(0.0, 0.25)]);
        let d = design_stateless(&u, &b).unwrap();
        assert!((evaluate_stateless(&d.mechanism, &u, &b).unwrap().value - 0.5).abs() < 1e-7);

        let wide = Prior::<f64>::uniform(5.0, 20.0).unwrap();
        let d = benchmark_noinfo(&wide).to_direct(&wide).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d.0[0].theta - 12.5).abs() < 1e-12);
    }

    #[test]
    fn stateful_evaluation() {
        let s = StatefulScenario::<f64>::new(vec![0.4, 0.6, 1.0], vec![0.3, 0.3, 0.4], vec![0.5, 0.9, 1.2]).unwrap();
        let d = design_stateful(&s).unwrap();
        let r = evaluate_stateful_mech(&d.mechanism(&s), &s).unwrap();
        assert!((r.value - 0.425).abs() < 1e-9);
        assert!((r.breakdown[1] - 5.0 / 12.0).abs() < 1e-6);

        let flat = SignallingMechanism::DiscreteTable {
            states: s.states().to_vec(),
            probs: s.probs().to_vec(),
            rows: vec![vec![1.0, 0.0]; 3],
        };
        let r = evaluate_stateful_mech(&flat, &s).unwrap();
        assert!((r.value - 0.3).abs() < 1e-12);
        assert_eq!(r.signals, 1);
        assert_eq!(fullinfo_stateful(&s), 0.0);
    }

    #[test]
    fn samplers() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = sample_simplex(&mut rng, 10);
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(x.iter().all(|&m| m > 0.0));
        let v = sample_benefits(&mut rng, 10, 0.0, 10.0);
        assert!(v.windows(2).all(|w| w[0] > w[1]) && v[9] > 0.0);
    }

    #[test]
    fn small_sweep_is_deterministic() {
        let cfg = ExperimentConfig {
            trials: 20,
            seed: 3,
            ..ExperimentConfig::default()
        };
        let a = run_capacity_sweep(&cfg).unwrap();
        let b = run_capacity_sweep(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 21);
        assert_eq!(a.dominance_violations, 0);
        let first = &a.rows[0];
        assert_eq!(
            (first.v_noinfo_analytic, first.v_fullinfo_analytic, first.v_opt_analytic),
            (1.0, 1.0, 1.0)
        );
        let last = &a.rows[20];
        assert_eq!((last.v_noinfo_mc, last.v_fullinfo_mc, last.v_opt_mc), (0.0, 0.0, 0.0));
        let mut out = Vec::new();
        write_sweep_csv(&a.rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("b,v_noinfo_analytic,v_fullinfo_analytic,v_opt_analytic,"));
        assert_eq!(text.lines().count(), 22);
    }
}
