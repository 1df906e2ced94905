//! Sweep execution, persistence and finite-size-scaling analysis.

mod collapse;
mod crossing;
mod dataset;
pub mod recipes;
mod sweep;

pub use collapse::{collapse_quality, fit_collapse, CollapseFit, CollapseModel, FitOptions, FittedParam, Param};
pub use crossing::{
    algebraic_decay_threshold, crossing_point, CrossingEstimate, DecayEstimate, DecayTest, PairCrossing,
};
pub use dataset::{Curve, DataPoint, Dataset};
pub use sweep::{
    compute_rows, gnuplot_script, read_csv, run_sweep, write_csv, Manifest, Size, SweepBase, SweepResult, SweepRow,
    SweepSpec,
};
