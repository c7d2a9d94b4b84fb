//! Independent reference implementations shared by the test targets.
#![allow(dead_code)]

pub mod gradients;
pub mod neural_crf;
