mod batch;
pub mod corpus;
pub mod defstore;
pub mod dynamics;
pub mod embedder;
pub mod evalharness;
pub mod http;
pub mod sense_labels;
pub mod space_stats;
pub mod textmetrics;
pub mod usage_graph;
