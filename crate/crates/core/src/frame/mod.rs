//! Planar portal-frame vibration simulator.
//!
//! Two columns fixed at their bases carry a beam whose ends are attached to
//! the column tops through three springs each (horizontal, vertical,
//! rotational). Damage is modelled as a reduction of those spring stiffnesses.

mod config;
mod generate;
mod modal;
mod model;
mod newmark;
mod scenario;

pub use config::{FrameConfig, JointSpringSet, SimulationConfig};
pub use generate::{
    default_impulses, downsample, generate_dataset, perturb_domain, simulate_scenarios, simulate_surrogate_lab, simulate_table3, surrogate_lab_perturbation,
    GenerationSettings, PerturbSpec, PerturbedDomain,
};
pub use modal::{modal_analysis, ModalResult};
pub use model::{
    assemble_frame, beam_element_mass, beam_element_stiffness, BeamElement, Direction, FrameModel,
    JointLink, PortalLayout, SystemMatrices,
};
pub use newmark::{simulate_impulse, ImpulseKind, ImpulseRecord};
pub use scenario::{
    apply_damage, surrogate_lab_scenarios, table3_scenarios, DamageKind, DamageScenario, Side,
    DAMAGE_LEVELS,
};
