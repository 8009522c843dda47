//! Simulator and closed-form performance analysis for asynchronous
//! diffusion adaptation (adapt-then-combine LMS) over random networks.

pub mod blockalg;
pub mod config;
pub mod error;
pub mod netmodel;
pub mod report;
pub mod rngstream;
pub mod sim;
pub mod theory;
