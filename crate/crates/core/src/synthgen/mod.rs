//! Rendering of attribute assignments into feature vectors, deterministic
//! single-attribute counterfactuals, and κ-controlled dataset assembly.

mod dataset;
mod io;
mod render;

pub use dataset::{
    assemble, minority_count, natural_kappa, AssembleConfig, DatasetSplits, Example, Group, LabeledDataset, Split,
};
pub use io::{read_dataset, write_dataset, DatasetHeader, FORMAT_VERSION};
pub use render::{
    syntext_word_lists, Assignment, GlyphRenderer, RendererSpec, TextRenderer, WordList,
};
