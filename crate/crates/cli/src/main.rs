use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use signal_design::oracle::DEFAULT_GRID;
use signal_design::{
    belief_preimage, benchmarks_stateful, design_stateful, design_weighted, evaluate_stateless, intersect,
    oracle_for_prior, run_capacity_sweep, stateless, write_sweep_csv, BeliefIntervals, CostModel, Error,
    ExperimentConfig, GoalSpec, Interval, Population, Prior, SignallingMechanism, StatefulScenario,
};

const SCHEMA: &str = "1";

#[derive(Parser)]
#[command(name = "signal-design", version, about = "Equilibria and optimal public signalling for hybrid work")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design the optimal mechanism for a state-independent goal.
    DesignStateless {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Oracle grid used when no closed form applies.
        #[arg(long, default_value_t = 256)]
        fallback_grid: usize,
    },
    /// Solve the finite-state design LP.
    DesignStateful {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated per-state weights for the weighted objective.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a given mechanism on a stateless scenario.
    Evaluate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        mechanism: PathBuf,
    },
    /// Lower-bound the optimal value with the discretized LP.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the seeded capacity sweep and write CSV.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Stateless scenario: a prior plus either explicit belief intervals or a
/// population, cost model and goal from which they are derived.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StatelessFile {
    #[serde(default)]
    schema: Option<String>,
    prior: Prior<f64>,
    #[serde(default)]
    population: Option<Population<f64>>,
    #[serde(default)]
    cost: Option<CostModel<f64>>,
    #[serde(default)]
    goal: Option<GoalSpec<f64>>,
    #[serde(default)]
    beliefs: Option<Vec<[f64; 2]>>,
}

impl StatelessFile {
    fn beliefs(&self) -> anyhow::Result<BeliefIntervals<f64>> {
        if let Some(b) = &self.beliefs {
            return Ok(BeliefIntervals::new(b.iter().map(|&[lo, hi]| Interval::new(lo, hi)).collect())?);
        }
        let (pop, goal) = match (&self.population, &self.goal) {
            (Some(p), Some(g)) => (p, g),
            _ => bail!(Error::InvalidInput(
                "scenario needs either \"beliefs\" or both \"population\" and \"goal\"".into()
            )),
        };
        let cost = self.cost.unwrap_or_default();
        cost.validate()?;
        let masses = intersect(pop, goal)?;
        Ok(belief_preimage(pop, &cost, &masses, self.prior.high()))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateEntry {
    nu: f64,
    p: f64,
    #[serde(default)]
    b: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StatefulFile {
    #[serde(default)]
    schema: Option<String>,
    states: Vec<StateEntry>,
    #[serde(default)]
    gammas: Option<Vec<f64>>,
    #[serde(default)]
    population: Option<Population<f64>>,
    #[serde(default)]
    cost: Option<CostModel<f64>>,
}

impl StatefulFile {
    fn scenario(&self) -> anyhow::Result<StatefulScenario<f64>> {
        let nu = self.states.iter().map(|s| s.nu).collect();
        let p = self.states.iter().map(|s| s.p).collect();
        if let Some(g) = &self.gammas {
            return Ok(StatefulScenario::new(nu, p, g.clone())?);
        }
        let floors = self
            .states
            .iter()
            .map(|s| s.b)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidInput("each state needs \"b\" when \"gammas\" is absent".into()))?;
        let pop = self
            .population
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("capacity floors need a \"population\"".into()))?;
        let cost = self.cost.unwrap_or_default();
        Ok(StatefulScenario::from_floors(nu, p, &floors, pop, &cost)?)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow!(Error::InvalidInput(format!("{}: {e}", path.display()))))
}

fn check_schema(schema: &Option<String>) -> anyhow::Result<()> {
    match schema.as_deref() {
        None | Some(SCHEMA) => Ok(()),
        Some(other) => bail!(Error::InvalidInput(format!("unsupported schema version {other:?}"))),
    }
}

fn emit(doc: &Value, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    match out {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn mechanism_json(mech: &SignallingMechanism<f64>, prior: &Prior<f64>) -> anyhow::Result<Value> {
    let mut doc = serde_json::to_value(mech)?;
    let direct = mech.to_direct(prior)?;
    doc["direct"] = json!(direct
        .0
        .iter()
        .map(|s| json!({"signal": s.signal, "q": s.q, "theta": s.theta}))
        .collect::<Vec<_>>());
    Ok(doc)
}

fn beliefs_json(b: &BeliefIntervals<f64>) -> Value {
    json!(b.iter().map(|iv| [iv.lo, iv.hi]).collect::<Vec<_>>())
}

fn design_stateless_cmd(scenario: &Path, out: Option<&Path>, fallback_grid: usize) -> anyhow::Result<()> {
    let file: StatelessFile = read_json(scenario)?;
    check_schema(&file.schema)?;
    let beliefs = file.beliefs()?;
    let opts = stateless::DesignOptions {
        fallback_grid,
        ..Default::default()
    };
    let d = stateless::design_with(&file.prior, &beliefs, &opts)?;
    if beliefs.is_empty() {
        eprintln!("warning: no posterior mean reaches the goal set; V*=0");
    }
    if d.approximate {
        eprintln!("note: no closed form applies; mechanism computed by the discretized LP");
    }
    println!("regime={}", d.regime.label());
    println!("V*={}", d.value);
    let doc = json!({
        "schema": SCHEMA,
        "regime": d.regime,
        "value": d.value,
        "approximate": d.approximate,
        "beliefs": beliefs_json(&beliefs),
        "mechanism": mechanism_json(&d.mechanism, &file.prior)?,
    });
    emit(&doc, out)
}

fn parse_weights(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .map_err(|e| anyhow!(Error::InvalidInput(format!("bad weight {w:?}: {e}"))))
        })
        .collect()
}

fn design_stateful_cmd(scenario: &Path, weights: Option<&str>, out: Option<&Path>) -> anyhow::Result<()> {
    let file: StatefulFile = read_json(scenario)?;
    check_schema(&file.schema)?;
    let s = file.scenario()?;
    let d = match weights {
        Some(w) => design_weighted(&s, &parse_weights(w)?)?,
        None => design_stateful(&s)?,
    };
    let bench = benchmarks_stateful(&s);
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",");
    println!("V*={:.6}", d.value);
    println!("V_j={}", list(&d.conditionals));
    println!("V_noinfo={:.6}", bench.noinfo);
    println!("V_fullinfo={:.6}", bench.fullinfo);
    let doc = json!({
        "schema": SCHEMA,
        "value": d.value,
        "conditionals": d.conditionals,
        "z": d.z,
        "gammas": s.gammas(),
        "mechanism": serde_json::to_value(d.mechanism(&s))?,
        "benchmarks": bench,
    });
    emit(&doc, out)
}

fn evaluate_cmd(scenario: &Path, mechanism: &Path) -> anyhow::Result<()> {
    let file: StatelessFile = read_json(scenario)?;
    check_schema(&file.schema)?;
    let beliefs = file.beliefs()?;
    let mut raw: Value = read_json(mechanism)?;
    // Accept a design output as well as a bare mechanism.
    if let Some(inner) = raw.get("mechanism") {
        raw = inner.clone();
    }
    if let Some(obj) = raw.as_object_mut() {
        obj.remove("direct");
    }
    let mech: SignallingMechanism<f64> =
        serde_json::from_value(raw).map_err(|e| anyhow!(Error::InvalidInput(format!("mechanism: {e}"))))?;
    let r = evaluate_stateless(&mech, &file.prior, &beliefs)?;
    println!("V={}", r.value);
    emit(
        &json!({"schema": SCHEMA, "value": r.value, "breakdown": r.breakdown, "signals": r.signals}),
        None,
    )
}

fn oracle_cmd(scenario: &Path, grid: usize, out: Option<&Path>) -> anyhow::Result<()> {
    let file: StatelessFile = read_json(scenario)?;
    check_schema(&file.schema)?;
    let beliefs = file.beliefs()?;
    let sol = oracle_for_prior(&file.prior, &beliefs, grid)?;
    println!("V_oracle={}", sol.value);
    let table = match &sol.mechanism {
        SignallingMechanism::DiscreteTable { states, probs, rows } => states
            .iter()
            .zip(probs)
            .zip(rows)
            .map(|((s, p), r)| json!({"theta": s, "p": p, "row": r}))
            .collect::<Vec<_>>(),
        _ => unreachable!("the oracle returns a table"),
    };
    let doc = json!({"schema": SCHEMA, "value": sol.value, "grid": sol.grid, "table": table});
    emit(&doc, out)
}

fn sweep_cmd(config: Option<&Path>, seed: Option<u64>, trials: Option<usize>, out: Option<&Path>) -> anyhow::Result<()> {
    let mut cfg: ExperimentConfig = match config {
        Some(p) => read_json(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    let report = run_capacity_sweep(&cfg)?;
    if report.dominance_violations > 0 {
        eprintln!(
            "warning: designed value below a benchmark on {} trials",
            report.dominance_violations
        );
    }
    match out {
        Some(path) => {
            let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_sweep_csv(&report.rows, io::BufWriter::new(f))?;
            eprintln!("wrote {} rows to {}", report.rows.len(), path.display());
        }
        None => {
            let stdout = io::stdout();
            write_sweep_csv(&report.rows, stdout.lock())?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::DesignStateless {
            scenario,
            out,
            fallback_grid,
        } => design_stateless_cmd(&scenario, out.as_deref(), fallback_grid),
        Command::DesignStateful { scenario, weights, out } => {
            design_stateful_cmd(&scenario, weights.as_deref(), out.as_deref())
        }
        Command::Evaluate { scenario, mechanism } => evaluate_cmd(&scenario, &mechanism),
        Command::Oracle { scenario, grid, out } => oracle_cmd(&scenario, grid, out.as_deref()),
        Command::Sweep {
            config,
            seed,
            trials,
            out,
        } => sweep_cmd(config.as_deref(), seed, trials, out.as_deref()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Numerical(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
