pub mod activations;
pub mod data;
pub mod engine;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod par;
pub mod runner;
pub mod verify;
