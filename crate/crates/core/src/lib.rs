//! Scoring toolkit for cross-lingual image captioning.
//!
//! Candidates in the target language are judged without target-language
//! references: against a machine-translated source reference by Word
//! Mover's Distance ([`transport`]), and against the source reference or the
//! image itself in a shared visual feature space ([`visual`]). The usual
//! reference-based metrics live in [`ngram`], and [`rank`] measures how
//! consistently two metrics order a pool of models.

pub mod error;
pub mod io;
pub mod model;
pub mod ngram;
pub mod rank;
pub mod transport;
pub mod visual;

pub use error::{Error, Result};
pub use io::{EmbeddingTable, Report, ReportFormat, ReportOptions, VectorTable, VisualFeatures};
pub use model::{
    aggregate, tokenize, CaptionRecord, Language, MetricKind, ReferenceSet, ScoreRow, ScoreTable,
    Segmentation, Sentence, TokenizerPolicy,
};
pub use rank::{CorrelationMatrix, RankVector};
pub use transport::{NBow, TransportPlan};
pub use visual::{Projector, SentenceRepr, TrainingPair};
