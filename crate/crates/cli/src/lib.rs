pub mod config;
pub mod output;
pub mod peaks;
pub mod run;
pub mod scenario;
