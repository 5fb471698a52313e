//! Equilibria and optimal public signalling for a population of hybrid
//! workers facing an uncertain infectious-risk parameter.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*F64` and
//! `*F32` aliases below name the concrete instantiations.

pub mod distributions;
pub mod equilibrium;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linprog;
pub mod mechanism;
pub mod oracle;
pub mod scalar;
pub mod stateful;
pub mod stateless;

pub use distributions::{Prior, PriorSpec};
pub use equilibrium::{equilibrium, gamma_threshold, in_person_mass, CostModel, EquilibriumOutcome, Population};
pub use error::{Error, Result};
pub use geometry::{belief_preimage, intersect, manifold_point, BeliefIntervals, GoalSpec, Interval, MassIntervals};
pub use harness::{
    benchmark_noinfo, evaluate_stateful_mech, evaluate_stateless, fullinfo_value, run_capacity_sweep,
    write_sweep_csv, EvaluationReport, ExperimentConfig, SweepReport, SweepRow,
};
pub use linprog::{solve, LpProblem, LpSolution, LpStatus};
pub use mechanism::{DirectMechanism, DirectSignal, SignallingMechanism};
pub use oracle::{discretize, oracle_for_prior, oracle_value, Discretization, OracleSolution};
pub use scalar::Scalar;
pub use stateful::{
    benchmarks_stateful, build_lp, design_stateful, design_weighted, StatefulBenchmarks, StatefulDesign,
    StatefulScenario,
};
pub use stateless::{classify, design, search_split, DesignOptions, Regime, Split, StatelessDesign};

pub type PriorF64 = Prior<f64>;
pub type PriorF32 = Prior<f32>;
pub type PopulationF64 = Population<f64>;
pub type PopulationF32 = Population<f32>;
pub type CostModelF64 = CostModel<f64>;
pub type CostModelF32 = CostModel<f32>;
pub type GoalSpecF64 = GoalSpec<f64>;
pub type GoalSpecF32 = GoalSpec<f32>;
pub type BeliefIntervalsF64 = BeliefIntervals<f64>;
pub type BeliefIntervalsF32 = BeliefIntervals<f32>;
pub type MechanismF64 = SignallingMechanism<f64>;
pub type MechanismF32 = SignallingMechanism<f32>;
pub type LpProblemF64 = LpProblem<f64>;
pub type LpProblemF32 = LpProblem<f32>;
pub type StatefulScenarioF64 = StatefulScenario<f64>;
pub type StatefulScenarioF32 = StatefulScenario<f32>;
