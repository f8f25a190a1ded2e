//! Experiment plumbing: run configs, checkpoints, CSV and PGM output.

mod checkpoint;
mod config;
mod csv;
mod pgm;
mod render;
mod run;
mod suites;

pub use checkpoint::{decode, encode, load_checkpoint, save_checkpoint, CheckpointBlob, FORMAT_VERSION, MAGIC};
pub use config::RunConfig;
pub use csv::{
    evals_csv, histogram_csv, metrics_csv, write_evals, write_histogram, write_metrics, EVALS_HEADER,
    HISTOGRAM_HEADER, METRICS_HEADER,
};
pub use pgm::{encode_pgm, write_pgm, HEADER_LEN as PGM_HEADER_LEN};
pub use render::{agent_from_checkpoint, render_sequence, select_frames, RenderOptions};
pub use run::{checkpoint_name, train_to_dir, RunOutputs};
pub use suites::{gradcheck_suite, GradcheckEntry, GradcheckReport, GRADCHECK_TOLERANCE};
