//! Gaussian scale-space derivative networks and frequency/scale
//! sensitivity probes.

pub mod datasets;
pub mod freqprobe;
pub mod gradcheck;
pub mod gssdnet;
pub mod ndtensor;
pub mod scalespace;
