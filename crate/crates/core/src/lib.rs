//! Mixed-autonomy platoon simulation and optimal control.
//!
//! Human drivers follow the Bando follow-the-leader law; autonomous
//! vehicles are driven by piecewise-constant accelerations chosen to
//! minimize the squared accelerations of the whole platoon, subject to
//! headway and velocity constraints imposed by quadratic penalties.
//! Gradients come from the adjoint of the forward integrator.

pub mod adjoint;
pub mod dynamics;
pub mod error;
pub mod interp;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod optimizer;
pub mod problem;
pub mod scalar;
pub mod scenario;

pub use adjoint::{AdjointTrajectory, CostateScheme, JacobianBlocks};
pub use dynamics::{
    ControlSchedule, InitialState, LeaderTrajectory, Platoon, PlatoonLayout, StateGrid,
    StateTrajectory,
};
pub use error::{PlatoonError, Result};
pub use metrics::Metrics;
pub use model::{
    safe_min_deceleration, theorem_bounds, AccPartials, Envelope, ModelParams, WellPosednessBounds,
};
pub use objective::{EnergyParams, ObjectiveConfig, ObjectiveMode, TerminalCost};
pub use optimizer::{
    audit_feasibility, solve, warm_start_penetration, Direction, OptimizationResult, SolverOptions,
    StopReason, ViolationReport,
};
pub use problem::{Evaluation, Problem};
pub use scalar::Scalar;

pub type ModelParams64 = ModelParams<f64>;
pub type Platoon64 = Platoon<f64>;
pub type Problem64 = Problem<f64>;
pub type ControlSchedule64 = ControlSchedule<f64>;
pub type StateTrajectory64 = StateTrajectory<f64>;
pub type SolverOptions64 = SolverOptions<f64>;
pub type OptimizationResult64 = OptimizationResult<f64>;

pub type ModelParams32 = ModelParams<f32>;
pub type Platoon32 = Platoon<f32>;
pub type Problem32 = Problem<f32>;
pub type ControlSchedule32 = ControlSchedule<f32>;
pub type StateTrajectory32 = StateTrajectory<f32>;
