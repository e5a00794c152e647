//! Switched linear transient engine.

pub mod fit;
pub mod integrate;
pub mod sim;
pub mod system;

pub use fit::{fit_decay, DecayFit};
pub use integrate::{advance, Propagator};
pub use sim::{
    cycle_stats, energy_residual, simulate, CycleEnergy, CycleStats, EnergyLedger, PhaseSchedule, Segment,
    SimOptions, SimOutput, SimState, Trace,
};
pub use system::{build_phase_system, group_active, BranchGroup, Drive, PhaseSystem, Powers, SwitchState, Waveform};
