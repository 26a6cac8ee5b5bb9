//! Trace-driven DRAM memory-subsystem simulator with in-DRAM bulk copy and
//! initialization (RowClone-style FPM/PSM and zero-row initialization).

pub mod config;
pub mod controller;
pub mod dram;
pub mod energy;
pub mod report;
pub mod system;
pub mod time;
pub mod workloads;

pub use time::Time;
