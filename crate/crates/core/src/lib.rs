//! Psychophysical test suite for full-reference image and video quality metrics.

pub mod adapter;
pub mod colorimetry;
pub mod evaluation;
pub mod metrics;
pub mod pipeline;
pub mod pngio;
pub mod reference;
pub mod report;
pub mod stimgen;
