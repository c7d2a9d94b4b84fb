//! Concept tagging toolkit: dataset handling, conlleval-style scoring, and
//! the generative (WFST) and discriminative (CRF) taggers.

pub mod corpus;
pub mod crf;
pub mod eval;
pub mod wfst;
