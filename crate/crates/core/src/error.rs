use thiserror::Error;

use crate::equalize_area::WeightSolution;
use crate::equalize_fn::PartitionSolution;
use crate::recursive::PartitionTree;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate site configuration: {0}")]
    DegenerateConfig(String),

    #[error("cell {index} is empty or below the area floor")]
    DegenerateCell { index: usize },

    #[error(
        "weight solver stopped after {} iterations with mass error {:.3e}",
        .0.iterations, .0.max_mass_error
    )]
    WeightsNotConverged(Box<WeightSolution>),

    #[error(
        "partition solver exhausted its restarts; best discrepancy {:.3e}",
        .0.max_discrepancy
    )]
    PartitionNotConverged(Box<PartitionSolution>),

    #[error("branch curve stays discontinuous near t = {t:.6} at the finest step")]
    BranchBroken { t: f64 },

    #[error("no sign change or near-zero plateau of G_L - G_M over {} samples", trace.len())]
    NoCrossingFound { trace: Vec<(f64, f64)> },

    #[error("recursive solve failed: {reason}")]
    TreeNotConverged { reason: String, partial: Option<Box<PartitionTree>> },
}

impl Error {
    /// True for the "ran but did not converge" family, as opposed to bad input.
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            Error::WeightsNotConverged(_)
                | Error::PartitionNotConverged(_)
                | Error::BranchBroken { .. }
                | Error::NoCrossingFound { .. }
                | Error::TreeNotConverged { .. }
                | Error::DegenerateCell { .. }
        )
    }
}
