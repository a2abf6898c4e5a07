//! Benchmark dataset generation from procedural phantoms, per-sample
//! metadata, and correlation reports over a generated dataset.

mod config;
mod generate;
mod metadata;
mod report;

pub use config::{GenerationConfig, DEFAULT_IMAGE_SIZE, DEFAULT_TEST_FRACTION};
pub use generate::{
    dataset_root, generate, reference_id, sample_id, split_slices, DatasetManifest,
    ManifestEntry, ReferenceEntry, SplitAssignment, MANIFEST_FILE, PARTIAL_MARKER, SCHEMA_FILE,
};
pub use metadata::{
    describe, validate_metadata, validate_metadata_str, SampleMetadata, Split, GENERATOR_VERSION,
    METADATA_SCHEMA,
};
pub use report::{report, ReportOptions, ReportOutcome};
