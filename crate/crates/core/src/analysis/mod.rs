//! Waveform-to-parameter pipeline: cycle segmentation, exponential fits,
//! model-parameter extraction, jitter and frequency statistics, plus the
//! transistor characterization fits used to set up the bias devices.

mod cycles;
mod expfit;
mod extract;
mod transistor;

pub use cycles::{
    compute_jitter, frequency_stats, segment_cycles, segment_cycles_auto, write_cycles_csv, Cycle,
    FrequencyStats, JitterPair, JitterTrace, Segmentation,
};
pub use expfit::{fit_exponential, ExpFit};
pub use extract::{extract_model_params, CycleExtraction, Extraction, Quartiles, SpreadReport};
pub use transistor::{extract_series_resistance, mobility_y_function, MobilityExtraction, SeriesResistance};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("need at least {need} cycles, got {got}")]
    TooFewCycles { need: usize, got: usize },
    #[error("segment is flat")]
    Flat,
    #[error("fit did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("cycle {cycle}: {source}")]
    Cycle {
        cycle: usize,
        #[source]
        source: Box<AnalysisError>,
    },
    #[error("records cannot be paired: {0}")]
    Unpairable(String),
    #[error("need at least two distinct lengths")]
    RankDeficient,
    #[error("transconductance sample {index} is not positive ({value})")]
    NonPositiveTransconductance { index: usize, value: f64 },
}
