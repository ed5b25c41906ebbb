#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod domain;
pub mod ingest;
pub mod models;
pub mod pipeline;
pub mod select;
pub mod synth;
