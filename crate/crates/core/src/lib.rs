//! Two-stage prioritization toolkit for rated security and privacy concepts.
//!
//! Stage one groups concepts by their expert-averaged Likert ratings with
//! Lloyd's K-means ([`kmeans`]). Stage two turns ordinal expert rankings of the
//! resulting factors into cardinal weights with the Ordinal Priority Approach
//! ([`opa`]), solved by a dense two-phase simplex ([`simplex`]). The
//! [`stats`] and [`robustness`] modules validate both stages, and [`report`]
//! renders everything as Markdown and CSV.

pub mod cli;
pub mod kmeans;
pub mod model;
mod nonfinite;
pub mod opa;
pub mod report;
pub mod robustness;
pub mod simplex;
pub mod stats;

pub use kmeans::{lloyd, ClusterSolution};
pub use model::{CriterionId, ItemId, RankProfile, RatingMatrix, SurveyRecord};
pub use opa::{solve_opa, WeightSolution};
pub use simplex::{LinearProgram, LpSolution, LpStatus};
