//! Independent reference implementations shared by the test targets.
#![allow(dead_code)]

pub mod conlleval;
pub mod crf;
pub mod wfst;
