//! Experiment support: seeded generators, image ingestion, and the timing
//! harness with log-log slope fitting. Everything here runs in `f64`.

pub mod bench;
pub mod generators;
pub mod image;

pub use bench::{
    fit_loglog_slope, run_benchmark, BenchParams, BenchReport, BenchRow, BenchSpec, BenchTask,
    Metric, ModeSelection,
};
pub use generators::{
    gen_random_measure_1d, gen_random_measure_2d, gen_two_hump_series, index_feature_cost_1d,
    manhattan_feature_cost_2d, synthetic_deformation_pair, synthetic_digit, HumpShape,
    TwoHumpSeries,
};
pub use image::{feature_cost_from_images, GrayscaleImage, GRAY_LEVEL_SCALE};
