//! Analytics engine for mouse-interaction logs recorded while students solve
//! questions: heat grids, regions of interest, transition maps between
//! regions, cohort comparison and difficulty-vs-score correlation.

pub mod analytics;
pub mod api;
pub mod error;
pub mod event;
pub mod heatmap;
pub mod pipeline;
pub mod roi;
pub mod synthgen;
pub mod transition;

pub use error::{Error, Result};
