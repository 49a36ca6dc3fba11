//! Cognitive service composition for mobile ad hoc networks, with a
//! discrete-event simulator, two reference composers and an experiment
//! harness.

pub mod agent;
pub mod baselines;
pub mod behavior;
pub mod catalog;
pub mod copernic;
pub mod error;
pub mod footprint;
pub mod harness;
pub mod perception;
pub mod procedural;
pub mod sdm;
pub mod service;
pub mod sim;
pub mod slipnet;
pub mod wm;

pub use error::{Error, Result};
