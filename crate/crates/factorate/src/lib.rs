pub mod config;
pub mod csvio;
pub mod harness;
pub mod report;
