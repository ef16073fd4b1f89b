//! Multi-fidelity reinforcement learning for airfoil drag minimization.
//!
//! A PPO agent proposes Bézier airfoils in a single-step episode and is
//! rewarded with `-Cd`. Training starts on a cheap low-fidelity flow model and
//! hands the policy over to an expensive high-fidelity model once reward
//! variance settles, a schedule governed by [`ctl::TransferController`].

pub mod aeroenv;
pub mod agent;
pub mod checkpoint;
pub mod ctl;
pub mod geometry;
pub mod orchestrator;
pub mod ppo;
pub mod rng;
pub mod scalar;

pub use scalar::Real;

pub type Airfoil = geometry::AirfoilShape<f64>;
pub type Params = agent::PolicyParams<f64>;
pub type Controller = ctl::TransferController<f64>;
