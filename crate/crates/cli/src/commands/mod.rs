pub mod export;
pub mod ingest;
pub mod run;
pub mod share;
pub mod synth;
