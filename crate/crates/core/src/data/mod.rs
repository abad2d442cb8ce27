//! Datasets, learning tasks and their metrics.

mod loaders;
mod metrics;
mod synth;
mod task;

pub use loaders::{
    coauthorship_values, load_contact_list, load_coauthorship, load_labels, load_value_csv, parse_contact_list, parse_coauthorship,
    parse_labels, write_labels_csv, write_value_csv, Paper,
};
pub use metrics::{classification_accuracy, imputation_accuracy, median_accuracy};
pub use synth::{random_complex, synth_citations, synth_contact, CitationConfig, ContactConfig};
pub use task::{
    make_classification_task, make_imputation_task, ClassificationTask, HeadLoss, HeadTarget, ImputationTask, Normalization,
    Task, TaskView, ValueTransform, VertexInputs,
};

use thiserror::Error;

use crate::complex::io::FormatError;
use crate::complex::ComplexError;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error("{0}: empty dataset")]
    EmptyDataset(String),
    #[error("every value of order {0} is masked")]
    AllMasked(usize),
    #[error("evaluation mask is empty")]
    EmptyEvalMask,
    #[error("rate {0} outside [0, 1)")]
    InvalidRate(f64),
    #[error("{0}")]
    Invalid(String),
}
