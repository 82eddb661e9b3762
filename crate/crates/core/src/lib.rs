//! Core engines for building, repairing, reviewing and evaluating multi-turn
//! RAG conversations.
//!
//! The crate is organised around the conversation document ([`conversation`]):
//! retrieval and generation produce agent turns, the create and review engines
//! edit documents immutably, and the experiment engine replays finished
//! conversations against a matrix of systems.

pub mod backend;
pub mod conversation;
pub mod create;
pub mod experiment;
pub mod generation;
mod http;
pub mod quality;
pub mod retrieval;
pub mod review;
pub mod text;

pub use backend::{Backends, Generator, Retriever};
pub use conversation::{
    parse_batch, parse_conversation, serialize_batch, serialize_conversation, Conversation, DocumentError, Message,
    SchemaViolation,
};
