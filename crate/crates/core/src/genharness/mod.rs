//! Hole filling, program emission and the checksum harness.

pub mod checksum;
pub mod driver;
pub mod generate;
