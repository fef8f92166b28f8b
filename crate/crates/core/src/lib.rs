//! Large-scale hierarchical alignment of comparable corpora.
//!
//! Documents of a source and a target corpus are embedded and matched with
//! an approximate nearest-neighbour index; inside each matched document pair
//! the sentences are scored against each other and merged into
//! pseudo-parallel sentence groups.

pub mod corpus;
pub mod embeddings;
mod error;
pub mod metrics;
pub mod ann_index;
pub mod doc_align;
pub mod sent_align;
pub mod evaluate;
pub mod synthetic;
pub mod pipeline;

pub use error::{Error, Result};
