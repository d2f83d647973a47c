//! Forward and reverse language models for limericks, two-stage
//! generation, and the metrics used to filter and rank the results.

pub mod continuity;
pub mod corpus;
pub mod generation;
pub mod lm;
pub mod pipeline;
pub mod rhyme;
