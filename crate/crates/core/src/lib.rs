pub mod answer;
pub mod atoms;
pub mod dataset;
pub mod decompose;
pub mod grammar;
pub mod harness;
pub mod kb;
pub mod metrics;
pub mod ops;
pub mod question;
pub mod reasoner;
pub mod text;
pub mod tree;
pub mod world;
