//! Command line and HTTP front ends for [`dir_core`].

pub mod cli;
pub mod http;

pub use cli::{render_answer, render_turn, run_command};
