pub mod crx;
pub mod js;
pub mod manifest;
pub mod static_tracer;
pub mod mock_tracer;
pub mod featurizer;
pub mod embedder;
pub mod cluster;
pub mod similarity;
pub mod analytics;
pub mod store;
pub mod synth;
pub mod cli;
