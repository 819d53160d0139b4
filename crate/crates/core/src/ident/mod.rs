//! Two-stage identification: the inverse static characteristic from
//! constant-reference experiments, then the linear block from
//! feedback-linearized multisine experiments.

pub mod dynamic_stage;
pub mod static_stage;

pub use dynamic_stage::{
    assemble_model, estimate_frf, fit_rational, recover_ga, run_dynamic_stage, DynamicStageConfig,
    FitOptions, FrfEstimate, IdentifiedModel,
};
pub use static_stage::{
    build_regression, fit_dataset, fit_static, order_scan, run_static_stage, EquilibriumDataset, IvRow, StaticFit,
    StaticStageConfig,
};

use crate::error::Result;
use crate::lure::LureModel;
use crate::sim::{derive_seed, simulate_plant, Controller, LurePlant, SampledRecord, SimConfig};

/// Anything that can run a closed-loop experiment and return its record.
pub trait RecordSource: Sync {
    /// One run of `duration` seconds; `stream` and `index` select the noise
    /// realization.
    fn run(&self, ctrl: &Controller, duration: f64, stream: u64, index: usize) -> Result<SampledRecord>;

    /// Sample period of the returned records.
    fn ts(&self) -> f64;
}

/// Experiments on a simulated plant. The configured duration is ignored and
/// the seed is split into one independent stream per experiment.
#[derive(Clone, Debug)]
pub struct SimulatedPlant {
    pub plant: LurePlant,
    pub sim: SimConfig,
}

impl SimulatedPlant {
    pub fn new(model: &LureModel, sim: SimConfig) -> Result<Self> {
        Ok(Self {
            plant: LurePlant::from_model(model)?,
            sim,
        })
    }
}

impl RecordSource for SimulatedPlant {
    fn run(&self, ctrl: &Controller, duration: f64, stream: u64, index: usize) -> Result<SampledRecord> {
        let mut cfg = self.sim.clone();
        cfg.duration = duration;
        cfg.seed = derive_seed(self.sim.seed, stream, index as u64);
        simulate_plant(&self.plant, ctrl, &cfg)
    }

    fn ts(&self) -> f64 {
        self.sim.ts
    }
}
