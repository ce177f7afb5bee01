//! Command-line driver for the dynapsim fabric simulator: AER ingestion,
//! network compilation, simulation runs and the convolutional demo.

pub mod aer;
pub mod classify;
pub mod commands;
pub mod cnn;
pub mod demo;
pub mod readout;
pub mod sim;
