//! Evaluation harness for image geolocation with vision-language models.

pub mod dataset;
pub mod duel;
pub mod eval;
pub mod gateway;
pub mod geo;
pub mod par;
pub mod parser;
pub mod prompt;
pub mod seed;
