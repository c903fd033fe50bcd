//! Batch front end for the fusion library: scene synthesis,
//! initialization, fusion, evaluation, rendering and parameter sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod render;
