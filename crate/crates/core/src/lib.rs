//! Knowledge-graph reasoning-path mining and benchmark curation.
//!
//! The crate is organised around the pipeline stages:
//!
//! - [`kg_store`]: typed property graph loaded from a PrimeKG-style edge table.
//! - [`entity_linker`]: dictionary linking of question/answer text onto graph nodes.
//! - [`path_engine`]: linear / divergent / convergent path templates, complexity and difficulty.
//! - [`qa_forge`]: head–relation multiple-choice QA synthesis and head-disjoint splits.
//! - [`cot_pipeline`]: generation and pruning prompts, text-generation clients, SFT export.
//! - [`reward_grpo`]: format/answer reward and group-relative policy optimisation numerics.

pub mod cot_pipeline;
pub mod digest;
pub mod entity_linker;
pub mod kg_store;
pub mod path_engine;
pub mod qa_forge;
pub mod reward_grpo;
pub mod seeding;

pub use entity_linker::{EntityLinker, EntityMention, Lexicon, LinkResult};
pub use kg_store::{Direction, Edge, Graph, GraphError, GraphStats, InverseMode, LoadOptions, Node, NodeId, RelId};
pub use path_engine::{
    Branch, DifficultyLevel, PathEngine, PathSet, PathTemplate, ReasoningPath, SearchLimits, Step, TemplateKind,
    TemplateRegistry,
};
pub use qa_forge::{CategorySpec, DatasetSplit, QAItem, QaRecord, TaskCategory};
pub use reward_grpo::{GrpoConfig, PolicyDist, ResponseGroup, RewardBreakdown};
