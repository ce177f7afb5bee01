//! Simulation and mapping toolkit for a DYNAP-style multi-core neuromorphic
//! processor: bit-exact routing memory formats, an analytic routing-memory
//! model, an event-driven R1/R2/R3 fabric simulator with neural cores, and a
//! compiler that maps spiking networks onto the fabric.

pub mod packets;
pub mod memopt;
pub mod neuro;
pub mod fabric;
pub mod compiler;
