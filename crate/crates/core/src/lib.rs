pub mod corpus;
pub mod critic;
pub mod evalkit;
pub mod jsonl;
pub mod llmgate;
pub mod par;
pub mod pipeline;
pub mod progdsl;
pub mod qagen;
pub mod reasoner;
pub mod retrieval;
pub mod seed;
