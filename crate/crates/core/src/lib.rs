//! Simulation and analysis toolkit for an optical memory built from cold atoms
//! coupled to the evanescent field of a subwavelength optical nanofiber.
//!
//! The crate is organised by physical subsystem:
//!
//! * [`waveguide`]: exact HE11 mode of a vacuum-clad step-index cylinder.
//! * [`ensemble`]: atom cloud around the fiber, atom-number estimates and the
//!   empirical saturation / optical-depth absorption laws.
//! * [`eit`]: Λ-system susceptibility, transmission spectra, slow light and a
//!   Maxwell–Bloch solver for dynamic storage and retrieval.
//! * [`decoherence`]: closed-form lifetime constants, the combined decay law
//!   and Larmor collapse/revival envelopes.
//! * [`fitkit`]: damped least-squares engine with the registered curve models.
//! * [`runner`]: scenario catalog, configuration, counting statistics and CSV
//!   output used by the command-line front end.
//!
//! Everything is SI internally: lengths in metres, times in seconds, angular
//! frequencies in rad/s, powers in watts, magnetic fields in tesla.

pub mod constants;
pub mod decoherence;
pub mod eit;
pub mod ensemble;
mod error;
pub mod fitkit;
pub mod quad;
pub mod runner;
pub mod special;
pub mod waveguide;

pub use error::{Error, Result};

pub use decoherence::{DecoherenceParams, MagneticScenario};
pub use eit::{ControlField, LambdaScheme, ProbePulse, PropagationGrid, PropagationResult, PulseShape};
pub use ensemble::{AbsorptionModel, CloudSpec, DensityModel};
pub use fitkit::{FitProblem, FitResult, ModelId};
pub use runner::{CountingModel, Scenario, ScenarioId};
pub use waveguide::{FiberSpec, GuidedMode};
