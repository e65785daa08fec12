pub mod audit;
pub mod backend;
pub mod bcp47;
pub mod content;
pub mod enrichment;
pub mod fixtures;
pub mod lang;
pub mod metrics;
pub mod ocf;
pub mod opf;
pub mod path;
pub mod pipeline;
pub mod reconstruct;
pub mod xhtml;
