//! Command-line front end and reward-scoring service for `sgkit-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod judge_http;
pub mod service;
