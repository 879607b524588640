//! Simulation and phase retrieval for lensless imaging of phase objects
//! under low photon flux.
//!
//! The forward model propagates an SLM-modulated Bessel beam to an EM-CCD
//! detector, [`sensor`] turns the ideal intensity into noisy counts and
//! [`retrieval`] recovers object phase with Gerchberg-Saxton iterations or
//! a single back-propagation.

pub mod beam;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod geometry;
pub mod grid;
pub mod metrics;
pub mod propagation;
pub mod retrieval;
pub mod rng;
pub mod sensor;
pub mod slm;

pub use beam::{incident_field, BeamModel, BeamProfile, Coverage};
pub use config::{CalibrationSpec, RunConfig};
pub use error::{Error, Result};
pub use geometry::Geometry;
pub use grid::{embed, intensity, wrap_phase, ComplexField, Grid, IntensityImage, PhaseImage, RealImage};
pub use metrics::{npcc, pcc, recover_scale, MetricsRecord};
pub use propagation::{propagate, Method, PropagationPlan};
pub use retrieval::{gs_approximant, gs_reconstruct, Approximant, GsOptions, GsResult, GsStatus, Retriever, Unmeasured};
pub use sensor::{detect, photoelectrons_per_pixel, Detection, NoiseLevel, PhotonBudget, SensorConfig, NOISE_LEVELS};
pub use slm::{object_field, slm_transmittance, Modulation, SlmCalibration};
