//! Task-success and cost measures for spoken dialogue agents, and a performance
//! function fitted against user satisfaction.
//!
//! A task is described by an attribute value matrix ([`avm`]). Dialogues are
//! compared with their scenario keys through a confusion matrix and κ
//! ([`kappa`]), costs are counted over whole dialogues or over the segments
//! derived from utterance tags ([`segment`], [`costs`]), and a standardized
//! regression combines them into a single score ([`performance`]).

pub mod avm;
pub mod cli;
pub mod costs;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod kappa;
pub mod performance;
pub mod report;
pub mod segment;
pub mod stats;

pub use error::{Error, Result};
