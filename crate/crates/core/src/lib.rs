pub mod adaptation;
pub mod analysis;
pub mod classifier;
pub mod features;
pub mod flightperf;
pub mod signal;
pub mod pipeline;
pub mod synth;
pub mod session;
