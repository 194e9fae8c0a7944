//! Recording, post-processing and teleoperation building blocks for a
//! phone-centred robot platform: sensor dataset formats, a framed wire
//! protocol, simulated device/bridge/station nodes and link benchmarks.

pub mod bridge;
pub mod clock;
pub mod commbench;
pub mod dataset;
pub mod device;
pub mod protocol;
pub mod station;
pub mod tools;
pub mod transport;
